use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Bitset;
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Write(io),
        other => Error::Write(std::io::Error::other(format!("{other:?}"))),
    }
}

/// 17 significant digits; NaN as an empty cell.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `system_id,local_index,x,y,z,<features...>` rows for every set
/// bit of `mask`. Returns the number of data rows.
pub fn export_selection<W: Write>(c: &SystemCollection, mask: &Bitset, kind: DataKind, out: W) -> Result<usize> {
    if mask.len() != c.total(kind) {
        return Err(Error::Shape {
            context: "selection mask".into(),
            expected: c.total(kind),
            found: mask.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let schema = c.schema(kind).unwrap_or(&[]);
    let mut header = vec!["system_id", "local_index", "x", "y", "z"];
    header.extend(schema.iter().map(String::as_str));
    w.write_record(&header).map_err(csv_err)?;

    let mut rows = 0;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for seg in c.segments(kind) {
        let sys = &c.systems()[seg.system];
        for g in mask.iter_ones_in(seg.offset, seg.offset + seg.len()) {
            let local = g - seg.offset;
            let p = sys.position(kind, local).expect("segment point has a position");
            record.clear();
            record.push(sys.id.clone());
            record.push(local.to_string());
            record.extend(p.iter().map(|&v| format_value(v)));
            record.extend(seg.table.columns().iter().map(|col| format_value(col.values()[local])));
            w.write_record(&record).map_err(csv_err)?;
            rows += 1;
        }
    }
    w.flush().map_err(Error::Write)?;
    Ok(rows)
}

pub fn export_selection_to_path(c: &SystemCollection, mask: &Bitset, kind: DataKind, path: &Path) -> Result<usize> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let n = export_selection(c, mask, kind, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}
