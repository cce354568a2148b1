//! Gaussian cube files.
//!
//! Layout: two comment lines; `natoms ox oy oz [nval]`; three lines
//! `n vx vy vz` for the voxel axes; `|natoms|` lines `Z charge x y z`; when
//! natoms is negative a dataset-id line `m id1 .. idm`; then the values with
//! z running fastest. A positive first voxel count means all lengths are in
//! Bohr, a negative one means Ångström. Everything is converted to Å on read.

use std::fmt::Write as _;
use std::sync::Arc;

use super::text::{parse_f64, Lines, Tokens};
use crate::error::{ParseError, Position, Result};
use crate::model::{AtomFrame, Column, Element, FeatureTable, VolumetricGrid, DENSITY_COLUMN};

pub const BOHR_TO_ANGSTROM: f64 = 0.529177210903;

const FORMAT: &str = "cube";

#[derive(Debug, Clone)]
pub struct CubeFile {
    pub comments: [String; 2],
    pub grid: VolumetricGrid,
    pub atoms: AtomFrame,
}

fn err(offset: usize, msg: impl Into<String>) -> ParseError {
    ParseError::new(FORMAT, Position::Byte(offset), msg)
}

fn header_fields<'a>(
    lines: &mut Lines<'a>,
    what: &str,
    min: usize,
) -> Result<(usize, Vec<&'a str>), ParseError> {
    let (offset, line) = lines
        .next_line()
        .ok_or_else(|| err(lines.offset(), format!("unexpected end of file, expected {what}")))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < min {
        return Err(err(
            offset,
            format!("{what}: expected at least {min} fields, found {}", fields.len()),
        ));
    }
    Ok((offset, fields))
}

fn num(offset: usize, field: &str, what: &str) -> Result<f64, ParseError> {
    parse_f64(field).ok_or_else(|| err(offset, format!("invalid {what} `{field}`")))
}

fn int(offset: usize, field: &str, what: &str) -> Result<i64, ParseError> {
    field
        .parse::<i64>()
        .map_err(|_| err(offset, format!("invalid {what} `{field}`")))
}

pub fn parse_cube(bytes: &[u8]) -> Result<CubeFile> {
    let mut lines = Lines::new(bytes);
    let mut comments = [String::new(), String::new()];
    for c in comments.iter_mut() {
        let (_, line) = lines
            .next_line()
            .ok_or_else(|| err(lines.offset(), "missing comment line"))?;
        *c = line.trim_end().to_string();
    }

    let (off, f) = header_fields(&mut lines, "atom count and origin", 4)?;
    let natoms_signed = int(off, f[0], "atom count")?;
    let mut origin = [0.0; 3];
    for k in 0..3 {
        origin[k] = num(off, f[k + 1], "origin coordinate")?;
    }
    let values_per_voxel = match f.get(4) {
        Some(s) => int(off, s, "values-per-voxel")?,
        None => 1,
    };
    if values_per_voxel != 1 {
        return Err(err(off, format!("values-per-voxel {values_per_voxel} is not supported")).into());
    }

    let mut shape = [0usize; 3];
    let mut basis = [[0.0; 3]; 3];
    let mut scale = 1.0;
    for axis in 0..3 {
        let (off, f) = header_fields(&mut lines, "voxel axis", 4)?;
        let n = int(off, f[0], "voxel count")?;
        if n == 0 {
            return Err(err(off, format!("voxel count along axis {axis} is zero")).into());
        }
        if axis == 0 {
            scale = if n > 0 { BOHR_TO_ANGSTROM } else { 1.0 };
        }
        shape[axis] = n.unsigned_abs() as usize;
        for k in 0..3 {
            basis[axis][k] = num(off, f[k + 1], "voxel vector component")?;
        }
    }

    let natoms = natoms_signed.unsigned_abs() as usize;
    let mut positions = Vec::with_capacity(natoms);
    let mut elements = Vec::with_capacity(natoms);
    for i in 0..natoms {
        let (off, f) = lines.next_line().ok_or_else(|| {
            err(
                lines.offset(),
                format!("header declares {natoms} atoms but the file ends after {i}"),
            )
        })?;
        let f: Vec<&str> = f.split_whitespace().collect();
        if f.len() < 5 {
            return Err(err(
                off,
                format!("atom line {} of {natoms}: expected `Z charge x y z`", i + 1),
            )
            .into());
        }
        let z = int(off, f[0], "atomic number")?;
        let element = u32::try_from(z)
            .ok()
            .and_then(|z| Element::from_atomic_number(z).ok())
            .ok_or_else(|| err(off, format!("unknown atomic number {z}")))?;
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = num(off, f[k + 2], "atom coordinate")? * scale;
        }
        elements.push(element);
        positions.push(p);
    }

    let body_start = lines.offset();
    let mut tokens = Tokens::new(bytes, body_start);
    let mut dataset_ids: Vec<i64> = vec![0];
    if natoms_signed < 0 {
        let (off, tok) = tokens
            .next_token()
            .ok_or_else(|| err(bytes.len(), "missing dataset-id line"))?;
        let m = int(off, tok, "dataset count")?;
        if m < 1 {
            return Err(err(off, "dataset count must be positive").into());
        }
        dataset_ids.clear();
        for _ in 0..m {
            let (off, tok) = tokens
                .next_token()
                .ok_or_else(|| err(bytes.len(), "truncated dataset-id line"))?;
            dataset_ids.push(int(off, tok, "dataset id")?);
        }
    }

    let n_voxels = shape[0] * shape[1] * shape[2];
    let m = dataset_ids.len();
    let total = n_voxels * m;
    let mut datasets: Vec<Vec<f64>> = (0..m).map(|_| Vec::with_capacity(n_voxels)).collect();
    for i in 0..total {
        let (off, tok) = tokens.next_token().ok_or_else(|| {
            err(
                bytes.len(),
                format!("truncated values section: expected {total} values, found {i}"),
            )
        })?;
        let v = parse_f64(tok).ok_or_else(|| err(off, format!("invalid voxel value `{tok}`")))?;
        datasets[i % m].push(v);
    }
    if let Some((off, tok)) = tokens.next_token() {
        return Err(err(
            off,
            format!("unexpected data `{tok}` after {total} voxel values"),
        )
        .into());
    }

    for v in origin.iter_mut() {
        *v *= scale;
    }
    for row in basis.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }

    let mut datasets = datasets.into_iter();
    let values: Arc<[f64]> = datasets.next().unwrap_or_default().into();
    let mut features = FeatureTable::empty(n_voxels);
    features.push(Column::new(DENSITY_COLUMN, values.clone()))?;
    for (id, data) in dataset_ids.iter().skip(1).zip(datasets) {
        features.push(Column::new(format!("dataset_{id}"), data))?;
    }
    let grid = VolumetricGrid::with_features(origin, basis, shape, values, features)?;
    let atoms = AtomFrame::new(positions, elements, None, FeatureTable::empty(natoms))?;
    Ok(CubeFile {
        comments,
        grid,
        atoms,
    })
}

/// Writes a cube in the Ångström convention (negative voxel counts) with
/// full `f64` precision, so reading it back is exact.
pub fn write_cube(grid: &VolumetricGrid, atoms: &AtomFrame, comments: [&str; 2]) -> String {
    let mut out = String::with_capacity(grid.len() * 24 + 512);
    for c in comments {
        out.push_str(&c.replace(['\n', '\r'], " "));
        out.push('\n');
    }
    let o = grid.origin();
    let _ = writeln!(out, "{:5} {:.16e} {:.16e} {:.16e}", atoms.len(), o[0], o[1], o[2]);
    for (axis, v) in grid.basis().iter().enumerate() {
        let n = -(grid.shape()[axis] as i64);
        let _ = writeln!(out, "{n:5} {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for (e, p) in atoms.elements().iter().zip(atoms.positions()) {
        let z = e.atomic_number();
        let _ = writeln!(
            out,
            "{z:5} {:.16e} {:.16e} {:.16e} {:.16e}",
            z as f64, p[0], p[1], p[2]
        );
    }
    let nz = grid.shape()[2];
    for row in grid.values().chunks(nz) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(if i % 6 == 0 { '\n' } else { ' ' });
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}
