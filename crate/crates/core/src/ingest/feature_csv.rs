//! Sidecar feature tables: a header row of column names followed by one
//! numeric row per point. Empty cells read as NaN.

use std::collections::HashSet;

use rayon::prelude::*;

use super::text::parse_f64;
use crate::error::{Error, ParseError, Position, Result};
use crate::model::{Column, FeatureTable};

const FORMAT: &str = "csv";
const CHUNK_BYTES: usize = 4 << 20;

pub fn parse_feature_csv(bytes: &[u8], expected_rows: usize) -> Result<FeatureTable> {
    parse_feature_csv_excluding(bytes, expected_rows, &[])
}

/// Like [`parse_feature_csv`] but drops the named columns (for example the
/// `system_id` column of an exported selection).
pub fn parse_feature_csv_excluding(
    bytes: &[u8],
    expected_rows: usize,
    excluded: &[&str],
) -> Result<FeatureTable> {
    parse_in_chunks(bytes, expected_rows, excluded, CHUNK_BYTES)
}

fn parse_in_chunks(
    bytes: &[u8],
    expected_rows: usize,
    excluded: &[&str],
    chunk_bytes: usize,
) -> Result<FeatureTable> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .map_or(bytes.len(), |i| i + 1);
    let names = parse_header(&bytes[..header_end])?;
    let keep: Vec<bool> = names.iter().map(|n| !excluded.contains(&n.as_str())).collect();
    let body = &bytes[header_end..];

    let chunks = split_chunks(body, chunk_bytes);
    let mut first_line = Vec::with_capacity(chunks.len());
    let mut line = 2;
    for c in &chunks {
        first_line.push(line);
        line += c.iter().filter(|&&b| b == b'\n').count();
    }

    let n_fields = names.len();
    let n_kept = keep.iter().filter(|&&k| k).count();
    let parsed: Vec<Result<Vec<Vec<f64>>>> = chunks
        .par_iter()
        .zip(first_line.par_iter())
        .map(|(chunk, &first)| parse_chunk(chunk, first, n_fields, &keep, n_kept))
        .collect();

    let mut columns: Vec<Vec<f64>> = (0..n_kept).map(|_| Vec::new()).collect();
    let mut parts = Vec::with_capacity(parsed.len());
    for p in parsed {
        parts.push(p?);
    }
    let rows: usize = parts.iter().map(|p| p.first().map_or(0, |c| c.len())).sum();
    if rows != expected_rows {
        return Err(Error::Shape {
            context: "feature table".into(),
            expected: expected_rows,
            found: rows,
        });
    }
    for (k, col) in columns.iter_mut().enumerate() {
        col.reserve_exact(rows);
        for p in &parts {
            col.extend_from_slice(&p[k]);
        }
    }
    drop(parts);

    let kept_names = names.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(n, _)| n);
    FeatureTable::from_columns(
        rows,
        kept_names.zip(columns).map(|(n, v)| Column::new(n, v)).collect(),
    )
}

fn parse_header(line: &[u8]) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(line);
    let record = match reader.records().next() {
        Some(Ok(r)) => r,
        Some(Err(e)) => {
            return Err(ParseError::new(FORMAT, Position::Line(1), format!("invalid header: {e}")).into())
        }
        None => return Err(ParseError::new(FORMAT, Position::Line(1), "missing header row").into()),
    };
    let names: Vec<String> = record.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if n.is_empty() {
            return Err(Error::Schema("empty column name in header".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Schema(format!("duplicate column name `{n}` in header")));
        }
    }
    Ok(names)
}

fn split_chunks(body: &[u8], target: usize) -> Vec<&[u8]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < body.len() {
        let mut end = (start + target).min(body.len());
        if end < body.len() {
            end = body[end..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(body.len(), |i| end + i + 1);
        }
        out.push(&body[start..end]);
        start = end;
    }
    out
}

fn parse_chunk(
    chunk: &[u8],
    first_line: usize,
    n_fields: usize,
    keep: &[bool],
    n_kept: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(chunk);
    let mut columns: Vec<Vec<f64>> = (0..n_kept).map(|_| Vec::new()).collect();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(first_line, |p| first_line + p.line() as usize - 1);
                return Err(ParseError::new(FORMAT, Position::Line(line), e.to_string()).into());
            }
        }
        let line = record
            .position()
            .map_or(first_line, |p| first_line + p.line() as usize - 1);
        if record.len() != n_fields {
            return Err(ParseError::new(
                FORMAT,
                Position::Line(line),
                format!("expected {n_fields} fields, found {}", record.len()),
            )
            .into());
        }
        let mut k = 0;
        for (c, field) in record.iter().enumerate() {
            if !keep[c] {
                continue;
            }
            let v = if field.is_empty() {
                f64::NAN
            } else {
                std::str::from_utf8(field)
                    .ok()
                    .and_then(parse_f64)
                    .ok_or_else(|| {
                        ParseError::new(
                            FORMAT,
                            Position::LineColumn { line, column: c + 1 },
                            format!("invalid number `{}`", String::from_utf8_lossy(field)),
                        )
                    })?
            };
            columns[k].push(v);
            k += 1;
        }
    }
    Ok(columns)
}
