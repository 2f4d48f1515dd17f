//! 8-bit PNG boundary: masks, albedo previews and display images.
//! Color data is sRGB-encoded on disk and linear in memory.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{encode_srgb8, srgb_to_linear, MapImage, MapKind};
use crate::error::{Error, Result};

pub fn encode(map: &MapImage) -> Result<Vec<u8>> {
    let (w, h) = (map.width() as u32, map.height() as u32);
    let img = match (map.channels(), map.kind()) {
        (1, MapKind::Mask) => {
            let buf = map.data().iter().map(|&v| if v != 0.0 { 255 } else { 0 }).collect();
            DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, buf).unwrap())
        }
        (1, _) => {
            let buf = map.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
            DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, buf).unwrap())
        }
        (3, _) => {
            let buf = map.data().iter().map(|&v| encode_srgb8(v)).collect();
            DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, buf).unwrap())
        }
        (c, kind) => return Err(Error::Unsupported(format!("PNG cannot hold a {c}-channel {kind} map"))),
    };
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
    Ok(out)
}

fn open(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(image::load_from_memory_with_format(&bytes, ImageFormat::Png)?)
}

/// Single-channel PNGs are masks, anything else is a color image.
pub fn guess_kind(path: &Path) -> Result<MapKind> {
    let img = open(path)?;
    Ok(if img.color().channel_count() <= 2 { MapKind::Mask } else { MapKind::Rgb })
}

pub fn read(path: &Path, kind: MapKind) -> Result<MapImage> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match kind.default_channels() {
        1 => {
            let gray = img.to_luma8();
            let data = gray
                .as_raw()
                .iter()
                .map(|&v| {
                    let v = f32::from(v) / 255.0;
                    match kind {
                        MapKind::Mask => {
                            if v >= 0.5 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        _ => v,
                    }
                })
                .collect();
            MapImage::new(w, h, 1, kind, data)
        }
        3 => {
            let rgb = img.to_rgb8();
            let linear = matches!(kind, MapKind::Rgb | MapKind::Albedo | MapKind::Shading);
            let data = rgb
                .as_raw()
                .iter()
                .map(|&v| {
                    let v = f32::from(v) / 255.0;
                    if linear {
                        srgb_to_linear(v)
                    } else {
                        v
                    }
                })
                .collect();
            MapImage::new(w, h, 3, kind, data)
        }
        c => Err(Error::Unsupported(format!("PNG cannot hold a {c}-channel {kind} map"))),
    }
}
