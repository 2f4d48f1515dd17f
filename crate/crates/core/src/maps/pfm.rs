//! Portable float map: `PF` (RGB) or `Pf` (gray) header, width and height,
//! a scale whose sign gives the byte order, then rows stored bottom to top.

use std::path::Path;

use super::MapImage;
use crate::error::{Error, Result};

pub fn encode(map: &MapImage) -> Result<Vec<u8>> {
    let tag = match map.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::Unsupported(format!("PFM cannot hold {c} channels"))),
    };
    let (w, h, c) = (map.width(), map.height(), map.channels());
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * c * 4);
    for row in map.data().chunks_exact(w * c).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Returns `(width, height, channels, samples top row first)`.
pub fn decode(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f32>)> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::corrupt("PFM", "truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::corrupt("PFM", "non-ASCII header"))?;
        Ok(tok.to_owned())
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::corrupt("PFM", format!("bad magic {other:?}"))),
    };
    let w: usize = token()?.parse().map_err(|_| Error::corrupt("PFM", "bad width"))?;
    let h: usize = token()?.parse().map_err(|_| Error::corrupt("PFM", "bad height"))?;
    let scale: f32 = token()?.parse().map_err(|_| Error::corrupt("PFM", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::corrupt("PFM", "scale must be non-zero"));
    }
    // exactly one whitespace byte separates the header from the payload
    let payload = &bytes[(pos + 1).min(bytes.len())..];
    let n = w * h * channels;
    if payload.len() != n * 4 {
        return Err(Error::corrupt("PFM", format!("expected {} payload bytes, found {}", n * 4, payload.len())));
    }
    let little = scale < 0.0;
    let samples: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| {
            let b: [u8; 4] = b.try_into().unwrap();
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let row = w * channels;
    let mut data = Vec::with_capacity(n);
    if row > 0 {
        for r in samples.chunks_exact(row).rev() {
            data.extend_from_slice(r);
        }
    }
    Ok((w, h, channels, data))
}

pub fn read(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
