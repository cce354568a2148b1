//! Binary tiles. Every tile is a 24-byte little-endian header followed by
//! the payload:
//!
//! | offset | type     | field                                  |
//! |--------|----------|----------------------------------------|
//! | 0      | [u8; 4]  | magic `FLTL`                           |
//! | 4      | u32      | layout version (1)                     |
//! | 8      | u32      | tile kind (see [`TileKind`])           |
//! | 12     | u32      | item count (points, atoms or runs)     |
//! | 16     | u64      | payload length in bytes                |
//!
//! Payloads, all little-endian:
//! - cloud: `count` x 3 f32 positions, then `count` u32 source voxels.
//! - atoms: `count` x 3 f32 positions, `count` u32 atomic numbers, a u32
//!   bond count `b`, then `b` pairs of u32 atom indices (i < j).
//! - mask: `count` u32 run lengths, alternating unselected/selected and
//!   starting with an unselected run (which may be 0).
//! - features: a u32 column count `c`, then `c` columns of `count` f32
//!   values each (NaN for missing).
//! - encoding: a u32 flag word (bit 0 sizes, bit 1 colors), then `count`
//!   f32 sizes and/or `count` f32 color positions in [0, 1].

use featurelens_core::cloud::PointCloud;
use featurelens_core::model::{AtomFrame, BondList};

pub const MAGIC: [u8; 4] = *b"FLTL";
pub const LAYOUT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const CONTENT_TYPE: &str = "application/octet-stream";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum TileKind {
    Cloud = 1,
    Atoms = 2,
    Mask = 3,
    Features = 4,
    Encoding = 5,
}

impl TileKind {
    pub fn from_u32(v: u32) -> Option<Self> {
        Some(match v {
            1 => TileKind::Cloud,
            2 => TileKind::Atoms,
            3 => TileKind::Mask,
            4 => TileKind::Features,
            5 => TileKind::Encoding,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileHeader {
    pub kind: TileKind,
    pub count: u32,
    pub payload_len: u64,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(kind: TileKind, count: usize, payload_len: usize) -> Self {
        let mut buf = Vec::with_capacity(HEADER_LEN + payload_len);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&LAYOUT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(kind as u32).to_le_bytes());
        buf.extend_from_slice(&(count as u32).to_le_bytes());
        buf.extend_from_slice(&(payload_len as u64).to_le_bytes());
        Writer { buf }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn finish(self) -> Vec<u8> {
        let declared = u64::from_le_bytes(self.buf[16..24].try_into().unwrap());
        debug_assert_eq!(declared as usize, self.buf.len() - HEADER_LEN);
        self.buf
    }
}

pub fn cloud_tile(cloud: &PointCloud) -> Vec<u8> {
    let n = cloud.len();
    let mut w = Writer::new(TileKind::Cloud, n, n * 16);
    for p in &cloud.positions {
        p.iter().for_each(|&x| w.f32(x as f32));
    }
    cloud.source_voxel.iter().for_each(|&v| w.u32(v));
    w.finish()
}

pub fn atoms_tile(frame: &AtomFrame, bonds: &BondList) -> Vec<u8> {
    let n = frame.len();
    let b = bonds.pairs().len();
    let mut w = Writer::new(TileKind::Atoms, n, n * 16 + 4 + b * 8);
    for p in frame.positions() {
        p.iter().for_each(|&x| w.f32(x as f32));
    }
    frame.elements().iter().for_each(|e| w.u32(e.atomic_number() as u32));
    w.u32(b as u32);
    for &(i, j) in bonds.pairs() {
        w.u32(i);
        w.u32(j);
    }
    w.finish()
}

pub fn mask_tile(runs: &[u32]) -> Vec<u8> {
    let mut w = Writer::new(TileKind::Mask, runs.len(), runs.len() * 4);
    runs.iter().for_each(|&r| w.u32(r));
    w.finish()
}

pub fn features_tile(n: usize, columns: &[&[f64]]) -> Vec<u8> {
    let mut w = Writer::new(TileKind::Features, n, 4 + columns.len() * n * 4);
    w.u32(columns.len() as u32);
    for c in columns {
        c.iter().for_each(|&v| w.f32(v as f32));
    }
    w.finish()
}

pub fn encoding_tile(n: usize, sizes: Option<&[f32]>, colors: Option<&[f32]>) -> Vec<u8> {
    let flags = sizes.is_some() as u32 | (colors.is_some() as u32) << 1;
    let len = 4 + (sizes.is_some() as usize + colors.is_some() as usize) * n * 4;
    let mut w = Writer::new(TileKind::Encoding, n, len);
    w.u32(flags);
    for v in sizes.into_iter().chain(colors) {
        v.iter().for_each(|&x| w.f32(x));
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TileError {
    Short(usize),
    Magic,
    Version(u32),
    Kind(u32),
    Length { declared: u64, actual: u64 },
}

impl std::fmt::Display for TileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TileError::Short(n) => write!(f, "tile of {n} bytes is shorter than its header"),
            TileError::Magic => write!(f, "bad tile magic"),
            TileError::Version(v) => write!(f, "unsupported tile layout version {v}"),
            TileError::Kind(k) => write!(f, "unknown tile kind {k}"),
            TileError::Length { declared, actual } => {
                write!(f, "tile declares {declared} payload bytes but carries {actual}")
            }
        }
    }
}

impl std::error::Error for TileError {}

/// Checks the header of a complete tile and returns it with the payload.
pub fn decode_header(bytes: &[u8]) -> Result<(TileHeader, &[u8]), TileError> {
    if bytes.len() < HEADER_LEN {
        return Err(TileError::Short(bytes.len()));
    }
    if bytes[..4] != MAGIC {
        return Err(TileError::Magic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != LAYOUT_VERSION {
        return Err(TileError::Version(version));
    }
    let kind = TileKind::from_u32(u32_at(8)).ok_or(TileError::Kind(u32_at(8)))?;
    let payload_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != payload_len {
        return Err(TileError::Length {
            declared: payload_len,
            actual: payload.len() as u64,
        });
    }
    Ok((
        TileHeader {
            kind,
            count: u32_at(12),
            payload_len,
        },
        payload,
    ))
}

pub fn read_u32s(bytes: &[u8]) -> Vec<u32> {
    bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()
}

pub fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

/// Expands mask runs back into per-point flags.
pub fn expand_runs(runs: &[u32]) -> Vec<bool> {
    let mut out = Vec::with_capacity(runs.iter().map(|&r| r as usize).sum());
    for (k, &r) in runs.iter().enumerate() {
        out.extend(std::iter::repeat_n(k % 2 == 1, r as usize));
    }
    out
}
