//! MAPB: a minimal container for float maps with any channel count.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MAPB"
//! 4       4     u32 version (1)
//! 8       4     u32 width
//! 12      4     u32 height
//! 16      4     u32 channels
//! 20      1     u8 kind tag (see MapKind::tag)
//! 21      4·n   f32 samples, row-major, top row first, n = w·h·c
//! ```

use std::path::Path;

use super::{MapImage, MapKind};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MAPB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

pub fn encode(map: &MapImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + map.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.extend_from_slice(&(map.channels() as u32).to_le_bytes());
    out.push(map.kind().tag());
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<MapImage> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::corrupt("MAPB", format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::corrupt("MAPB", "bad magic"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::corrupt("MAPB", format!("unsupported version {version}")));
    }
    let (w, h, c) = (word(8) as usize, word(12) as usize, word(16) as usize);
    let kind = MapKind::from_tag(bytes[20])
        .ok_or_else(|| Error::corrupt("MAPB", format!("unknown kind tag {}", bytes[20])))?;
    if !kind.accepts_channels(c) {
        return Err(Error::corrupt("MAPB", format!("{kind} map declared with {c} channels")));
    }
    let n = w
        .checked_mul(h)
        .and_then(|p| p.checked_mul(c))
        .ok_or_else(|| Error::corrupt("MAPB", "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n * 4 {
        return Err(Error::corrupt(
            "MAPB",
            format!("expected {} payload bytes for {w}x{h}x{c}, found {}", n * 4, payload.len()),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    MapImage::new(w, h, c, kind, data).map_err(|e| Error::corrupt("MAPB", e.to_string()))
}

pub fn read(path: &Path) -> Result<MapImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
