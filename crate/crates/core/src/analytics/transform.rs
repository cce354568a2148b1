use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise value transform applied before binning or brushing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log10,
    Abs,
    Negate,
}

impl Transform {
    /// Out-of-domain inputs (log10 of values <= 0) map to NaN.
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Log10 => {
                if v > 0.0 {
                    v.log10()
                } else {
                    f64::NAN
                }
            }
            Transform::Abs => v.abs(),
            Transform::Negate => -v,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log10 => "log10",
            Transform::Abs => "abs",
            Transform::Negate => "negate",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Transform::Identity),
            "log10" => Ok(Transform::Log10),
            "abs" => Ok(Transform::Abs),
            "negate" => Ok(Transform::Negate),
            other => Err(Error::InvalidArgument(format!("unknown transform `{other}`"))),
        }
    }
}

/// Applies the chain left to right.
#[inline]
pub fn apply_chain(chain: &[Transform], v: f64) -> f64 {
    chain.iter().fold(v, |acc, t| t.apply(acc))
}

/// Parses a comma-separated chain such as `"negate,abs"`; empty means identity.
pub fn parse_chain(s: &str) -> Result<Vec<Transform>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log10_domain() {
        assert_eq!(Transform::Log10.apply(100.0), 2.0);
        assert!(Transform::Log10.apply(0.0).is_nan());
        assert!(Transform::Log10.apply(-1.0).is_nan());
    }

    #[test]
    fn parses_chains() {
        assert_eq!(parse_chain("negate, abs").unwrap(), vec![Transform::Negate, Transform::Abs]);
        assert!(parse_chain("").unwrap().is_empty());
        assert!(parse_chain("sqrt").is_err());
    }

    proptest! {
        #[test]
        fn negate_then_abs_is_abs(v in -1e300f64..1e300) {
            prop_assert_eq!(apply_chain(&[Transform::Negate, Transform::Abs], v), v.abs());
        }
    }
}
