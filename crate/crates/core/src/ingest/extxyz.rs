//! Extended XYZ reader.
//!
//! Each frame is a count line, a comment line of `key=value` pairs and one
//! row per atom whose fields follow `Properties=name:type:width:...`
//! (default `species:S:1:pos:R:3`). Real (`R`) and integer (`I`) per-atom
//! properties become feature columns `name_0 .. name_{width-1}`; string and
//! logical properties other than the species are ignored.

use super::text::{parse_f64, Lines};
use crate::error::{Error, ParseError, Position, Result};
use crate::model::{AtomFrame, Cell, Column, Element, FeatureTable};

const FORMAT: &str = "extxyz";

fn err(line: usize, msg: impl Into<String>) -> Error {
    ParseError::new(FORMAT, Position::Line(line), msg).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyType {
    Str,
    Real,
    Int,
    Logical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyType,
    pub width: usize,
}

/// Parses a `Properties=` value into its declared columns.
pub fn parse_properties(spec: &str) -> Result<Vec<Property>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() % 3 != 0 || parts.is_empty() {
        return Err(format!(
            "Properties `{spec}` must be name:type:width triples"
        ));
    }
    parts
        .chunks(3)
        .map(|c| {
            let kind = match c[1] {
                "S" => PropertyType::Str,
                "R" => PropertyType::Real,
                "I" => PropertyType::Int,
                "L" => PropertyType::Logical,
                other => return Err(format!("unknown property type `{other}` for `{}`", c[0])),
            };
            let width: usize = c[2]
                .parse()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| format!("invalid width `{}` for `{}`", c[2], c[0]))?;
            if c[0].is_empty() {
                return Err("empty property name".into());
            }
            Ok(Property {
                name: c[0].to_string(),
                kind,
                width,
            })
        })
        .collect()
}

/// Splits an extxyz comment line into `(key, value)` pairs. Values may be
/// bare, `"quoted"` or `{braced}`; bare keys get the value `T`.
pub fn parse_comment(line: &str) -> Result<Vec<(String, String)>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    let read_item = |i: &mut usize, stop_at_eq: bool| -> Result<String, String> {
        let mut s = String::new();
        match chars.get(*i) {
            Some('"') => {
                *i += 1;
                loop {
                    match chars.get(*i) {
                        None => return Err("unterminated quoted value".into()),
                        Some('\\') if chars.get(*i + 1).is_some() => {
                            s.push(chars[*i + 1]);
                            *i += 2;
                        }
                        Some('"') => {
                            *i += 1;
                            break;
                        }
                        Some(&c) => {
                            s.push(c);
                            *i += 1;
                        }
                    }
                }
            }
            Some('{') => {
                *i += 1;
                loop {
                    match chars.get(*i) {
                        None => return Err("unterminated braced value".into()),
                        Some('}') => {
                            *i += 1;
                            break;
                        }
                        Some(&c) => {
                            s.push(c);
                            *i += 1;
                        }
                    }
                }
            }
            _ => {
                while let Some(&c) = chars.get(*i) {
                    if c.is_whitespace() || (stop_at_eq && c == '=') {
                        break;
                    }
                    s.push(c);
                    *i += 1;
                }
            }
        }
        Ok(s)
    };

    loop {
        skip_ws(&mut i);
        if i >= chars.len() {
            break;
        }
        let key = read_item(&mut i, true)?;
        if key.is_empty() {
            return Err(format!("expected a key at character {}", i + 1));
        }
        let mut j = i;
        skip_ws(&mut j);
        if chars.get(j) == Some(&'=') {
            i = j + 1;
            skip_ws(&mut i);
            let value = read_item(&mut i, false)?;
            out.push((key, value));
        } else {
            out.push((key, "T".to_string()));
        }
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "T" | "t" | "True" | "true" | "1" => Some(true),
        "F" | "f" | "False" | "false" | "0" => Some(false),
        _ => None,
    }
}

enum Sink {
    Species,
    Position,
    Feature(usize),
    Skip,
}

pub fn parse_extxyz(bytes: &[u8]) -> Result<Vec<AtomFrame>> {
    let mut lines = Lines::new(bytes);
    let mut frames = Vec::new();
    loop {
        let (count_line, count_text) = loop {
            match lines.next_line() {
                None => return Ok(frames),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break (lines.line_no(), l),
            }
        };
        let n_atoms: usize = count_text
            .trim()
            .parse()
            .map_err(|_| err(count_line, format!("expected an atom count, found `{}`", count_text.trim())))?;
        let comment_line = count_line + 1;
        let (_, comment) = lines
            .next_line()
            .ok_or_else(|| err(comment_line, "missing comment line"))?;
        frames.push(parse_frame(&mut lines, n_atoms, comment, comment_line)?);
    }
}

fn parse_frame(lines: &mut Lines<'_>, n_atoms: usize, comment: &str, comment_line: usize) -> Result<AtomFrame> {
    let info = parse_comment(comment).map_err(|m| err(comment_line, m))?;
    let lookup = |key: &str| {
        info.iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v.as_str())
    };
    let props = match lookup("Properties") {
        Some(p) => parse_properties(p).map_err(|m| err(comment_line, m))?,
        None => parse_properties("species:S:1:pos:R:3").expect("default properties"),
    };

    let mut sinks = Vec::new();
    let mut feature_names = Vec::new();
    let mut have_species = false;
    let mut have_pos = false;
    for p in &props {
        match (p.name.as_str(), p.kind, p.width) {
            ("species" | "element", PropertyType::Str, 1) if !have_species => {
                have_species = true;
                sinks.push(Sink::Species);
            }
            ("pos" | "positions", PropertyType::Real, 3) if !have_pos => {
                have_pos = true;
                for _ in 0..3 {
                    sinks.push(Sink::Position);
                }
            }
            (_, PropertyType::Real | PropertyType::Int, w) => {
                for k in 0..w {
                    sinks.push(Sink::Feature(feature_names.len()));
                    feature_names.push(format!("{}_{k}", p.name));
                }
            }
            (_, _, w) => sinks.extend((0..w).map(|_| Sink::Skip)),
        }
    }
    if !have_species || !have_pos {
        return Err(err(
            comment_line,
            "Properties must declare species:S:1 and pos:R:3",
        ));
    }

    let cell = match lookup("Lattice") {
        None => None,
        Some(l) => {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(parse_f64)
                .collect::<Option<_>>()
                .filter(|v: &Vec<f64>| v.len() == 9)
                .ok_or_else(|| err(comment_line, format!("Lattice must hold 9 numbers, got `{l}`")))?;
            let pbc = match lookup("pbc") {
                None => [true; 3],
                Some(s) => {
                    let b: Vec<bool> = s
                        .split_whitespace()
                        .map(parse_bool)
                        .collect::<Option<_>>()
                        .filter(|b: &Vec<bool>| b.len() == 3)
                        .ok_or_else(|| err(comment_line, format!("pbc must hold 3 booleans, got `{s}`")))?;
                    [b[0], b[1], b[2]]
                }
            };
            Some(Cell {
                matrix: [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]],
                pbc,
            })
        }
    };

    let width = sinks.len();
    let mut positions = Vec::with_capacity(n_atoms);
    let mut elements = Vec::with_capacity(n_atoms);
    let mut features: Vec<Vec<f64>> = feature_names.iter().map(|_| Vec::with_capacity(n_atoms)).collect();
    for a in 0..n_atoms {
        let Some((_, row)) = lines.next_line() else {
            return Err(err(
                lines.line_no() + 1,
                format!("frame declares {n_atoms} atoms but the file ends after {a}"),
            ));
        };
        let line_no = lines.line_no();
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != width {
            return Err(err(
                line_no,
                format!("expected {width} fields per atom row, found {}", fields.len()),
            ));
        }
        let mut pos = [0.0; 3];
        let mut pk = 0;
        for (field, sink) in fields.iter().zip(&sinks) {
            match sink {
                Sink::Species => elements.push(Element::from_symbol(field)?),
                Sink::Position => {
                    pos[pk] = parse_f64(field)
                        .ok_or_else(|| err(line_no, format!("invalid coordinate `{field}`")))?;
                    pk += 1;
                }
                Sink::Feature(c) => features[*c].push(
                    parse_f64(field)
                        .ok_or_else(|| err(line_no, format!("invalid number `{field}` for `{}`", feature_names[*c])))?,
                ),
                Sink::Skip => {}
            }
        }
        positions.push(pos);
    }

    let columns = feature_names
        .into_iter()
        .zip(features)
        .map(|(n, v)| Column::new(n, v))
        .collect();
    let table = FeatureTable::from_columns(n_atoms, columns)
        .map_err(|e| err(comment_line, e.to_string()))?;
    AtomFrame::new(positions, elements, cell, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WATER: &str = "3\nProperties=species:S:1:pos:R:3\nO 0.0 0.0 0.117\nH 0.0 0.757 -0.467\nH 0.0 -0.757 -0.467\n";

    #[test]
    fn minimal_water_frame() {
        let frames = parse_extxyz(WATER.as_bytes()).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].len(), 3);
        assert_eq!(frames[0].features().n_columns(), 0);
        assert_eq!(frames[0].elements()[0].symbol(), "O");
    }

    #[test]
    fn extra_vector_property_becomes_columns() {
        let text = "3\nProperties=species:S:1:pos:R:3:force:R:3 energy=-14.2\n\
                    O 0 0 0.117 0.1 0.2 0.3\nH 0 0.757 -0.467 1 2 3\nH 0 -0.757 -0.467 4 5 6\n";
        let f = &parse_extxyz(text.as_bytes()).unwrap()[0];
        assert_eq!(f.features().column_names(), vec!["force_0", "force_1", "force_2"]);
        assert_eq!(f.features().n_points(), 3);
        assert_eq!(f.features().column("force_1").unwrap().values(), &[0.2, 2.0, 5.0]);
    }

    #[test]
    fn concatenated_frames_keep_order() {
        let text = format!("{WATER}\n2\n\nC 0 0 0\nO 0 0 1.13\n");
        let frames = parse_extxyz(text.as_bytes()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].len(), 3);
        assert_eq!(frames[1].elements()[0].symbol(), "C");
    }

    #[test]
    fn lattice_and_pbc() {
        let text = "1\nLattice=\"5 0 0 0 6 0 0 0 7\" pbc=\"T F T\" Properties=species:S:1:pos:R:3\nNa 0 0 0\n";
        let f = &parse_extxyz(text.as_bytes()).unwrap()[0];
        let cell = f.cell().unwrap();
        assert_eq!(cell.matrix[1], [0.0, 6.0, 0.0]);
        assert_eq!(cell.pbc, [true, false, true]);
    }

    #[test]
    fn row_width_mismatch_reports_line() {
        let text = "2\nProperties=species:S:1:pos:R:3:q:R:1\nO 0 0 0 1.0\nH 0 0 1\n";
        match parse_extxyz(text.as_bytes()) {
            Err(Error::Parse(e)) => {
                assert_eq!(e.position, Position::Line(4));
                assert!(e.message.contains("expected 5 fields"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_frame_is_an_error_not_truncation() {
        let text = "4\nProperties=species:S:1:pos:R:3\nO 0 0 0\nH 0 0 1\n";
        assert!(matches!(parse_extxyz(text.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn malformed_properties_are_rejected() {
        for bad in ["species:S:1:pos:R", "species:S:1:pos:Q:3", "species:S:1:pos:R:0", "pos:R:3"] {
            let text = format!("1\nProperties={bad}\nH 0 0 0\n");
            assert!(
                matches!(parse_extxyz(text.as_bytes()), Err(Error::Parse(ref e)) if e.position == Position::Line(2)),
                "{bad}"
            );
        }
    }

    #[test]
    fn comment_tokenizer_handles_quotes_and_flags() {
        let kv = parse_comment(r#"a=1 b="x y" c = {1 2} flag d="q\"q""#).unwrap();
        assert_eq!(
            kv,
            vec![
                ("a".into(), "1".into()),
                ("b".into(), "x y".into()),
                ("c".into(), "1 2".into()),
                ("flag".into(), "T".into()),
                ("d".into(), "q\"q".into()),
            ]
        );
        assert!(parse_comment("a=\"open").is_err());
    }

    #[test]
    fn unknown_species_is_a_catalog_error() {
        let text = "1\n\nZz 0 0 0\n";
        assert!(matches!(parse_extxyz(text.as_bytes()), Err(Error::UnknownElement(_))));
    }
}
