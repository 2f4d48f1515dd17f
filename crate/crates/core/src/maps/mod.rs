//! Raster containers for every per-pixel quantity the pipeline handles, and
//! their on-disk formats.
//!
//! All samples are linear `f32`, row-major, top row first. Format selection
//! is by file extension:
//!
//! | extension | container | channels |
//! |-----------|-----------|----------|
//! | `.mapb`   | [`mapb`]  | any      |
//! | `.pfm`    | [`pfm`]   | 1 or 3   |
//! | `.png`    | [`png`]   | 1 or 3   |

pub mod light;
pub mod mapb;
pub mod pfm;
pub mod png;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use light::ShLight;

/// Semantic role of a [`MapImage`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Albedo,
    Normal,
    Transport,
    Ao,
    Shading,
    Mask,
    Rgb,
    /// World-space surface positions from the rasterizer.
    Position,
}

impl MapKind {
    pub const ALL: [MapKind; 8] = [
        MapKind::Albedo,
        MapKind::Normal,
        MapKind::Transport,
        MapKind::Ao,
        MapKind::Shading,
        MapKind::Mask,
        MapKind::Rgb,
        MapKind::Position,
    ];

    /// Tag byte used by the MAPB container.
    pub fn tag(self) -> u8 {
        match self {
            MapKind::Albedo => 0,
            MapKind::Normal => 1,
            MapKind::Transport => 2,
            MapKind::Ao => 3,
            MapKind::Shading => 4,
            MapKind::Mask => 5,
            MapKind::Rgb => 6,
            MapKind::Position => 7,
        }
    }

    pub fn from_tag(tag: u8) -> Option<MapKind> {
        MapKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Channel count a freshly allocated map of this kind gets.
    pub fn default_channels(self) -> usize {
        match self {
            MapKind::Transport => 9,
            MapKind::Ao | MapKind::Mask => 1,
            _ => 3,
        }
    }

    pub fn accepts_channels(self, channels: usize) -> bool {
        match self {
            MapKind::Shading => channels == 1 || channels == 3,
            other => channels == other.default_channels(),
        }
    }

    /// Guess the kind from a file stem such as `transport` or `gt_albedo`.
    pub fn from_stem(stem: &str) -> Option<MapKind> {
        let stem = stem.to_ascii_lowercase();
        let table = [
            ("mask", MapKind::Mask),
            ("albedo", MapKind::Albedo),
            ("normal", MapKind::Normal),
            ("transport", MapKind::Transport),
            ("shading", MapKind::Shading),
            ("position", MapKind::Position),
        ];
        for (needle, kind) in table {
            if stem.contains(needle) {
                return Some(kind);
            }
        }
        if stem == "ao" || stem.starts_with("ao_") || stem.ends_with("_ao") {
            return Some(MapKind::Ao);
        }
        None
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MapKind::Albedo => "albedo",
            MapKind::Normal => "normal",
            MapKind::Transport => "transport",
            MapKind::Ao => "ao",
            MapKind::Shading => "shading",
            MapKind::Mask => "mask",
            MapKind::Rgb => "rgb",
            MapKind::Position => "position",
        };
        f.write_str(name)
    }
}

/// A `width × height × channels` raster of linear `f32` samples.
///
/// Construction validates the kind-specific invariants, so a `MapImage` in
/// hand is always well formed. The one invariant that needs a second map,
/// unit normals under the mask, is checked by [`MapImage::check_normals`].
#[derive(Clone, Debug, PartialEq)]
pub struct MapImage {
    width: usize,
    height: usize,
    channels: usize,
    kind: MapKind,
    data: Vec<f32>,
}

impl MapImage {
    pub fn new(width: usize, height: usize, channels: usize, kind: MapKind, data: Vec<f32>) -> Result<Self> {
        if !kind.accepts_channels(channels) {
            return Err(Error::invalid(format!("{kind} map cannot have {channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "{kind} map {width}x{height}x{channels} needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        match kind {
            MapKind::Mask => {
                if let Some(v) = data.iter().find(|&&v| v != 0.0 && v != 1.0) {
                    return Err(Error::invalid(format!("mask sample {v} is not 0 or 1")));
                }
            }
            MapKind::Ao => {
                if let Some(v) = data.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::invalid(format!("ao sample {v} outside [0, 1]")));
                }
            }
            _ => {}
        }
        Ok(MapImage { width, height, channels, kind, data })
    }

    pub fn zeros(width: usize, height: usize, kind: MapKind) -> Self {
        Self::zeros_with_channels(width, height, kind.default_channels(), kind)
    }

    pub fn zeros_with_channels(width: usize, height: usize, channels: usize, kind: MapKind) -> Self {
        assert!(kind.accepts_channels(channels), "{kind} map cannot have {channels} channels");
        MapImage { width, height, channels, kind, data: vec![0.0; width * height * channels] }
    }

    /// Build a map from a per-pixel closure writing `channels` values.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        kind: MapKind,
        mut f: impl FnMut(usize, usize, &mut [f32]),
    ) -> Result<Self> {
        let mut data = vec![0.0; width * height * channels];
        if channels > 0 {
            for (i, px) in data.chunks_exact_mut(channels).enumerate() {
                f(i % width.max(1), i / width.max(1), px);
            }
        }
        Self::new(width, height, channels, kind, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels)
    }

    /// True where a Mask-kind map is set.
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0.0
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Reinterpret under another kind, re-validating the invariants.
    pub fn with_kind(self, kind: MapKind) -> Result<Self> {
        Self::new(self.width, self.height, self.channels, kind, self.data)
    }

    pub fn same_size(&self, other: &MapImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_size(&self, other: &MapImage, what: &str) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: what.to_owned(),
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    /// Normals must be unit length under the mask and exactly zero outside it.
    pub fn check_normals(&self, mask: &MapImage, tolerance: f64) -> Result<()> {
        if self.kind != MapKind::Normal {
            return Err(Error::invalid(format!("expected a normal map, got {}", self.kind)));
        }
        self.ensure_same_size(mask, "normal map vs mask")?;
        for (i, n) in self.pixels().enumerate() {
            let (x, y) = (i % self.width, i / self.width);
            let len = n.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if mask.is_set(x, y) {
                if (len - 1.0).abs() > tolerance {
                    return Err(Error::invalid(format!("normal at ({x}, {y}) has length {len}")));
                }
            } else if len != 0.0 {
                return Err(Error::invalid(format!("normal at ({x}, {y}) is non-zero outside the mask")));
            }
        }
        Ok(())
    }
}

/// Multiply every channel by a binary mask; out-of-mask pixels become exactly 0.
pub fn apply_mask(map: &MapImage, mask: &MapImage) -> Result<MapImage> {
    if mask.kind() != MapKind::Mask {
        return Err(Error::invalid(format!("expected a mask, got a {} map", mask.kind())));
    }
    map.ensure_same_size(mask, "apply_mask")?;
    let c = map.channels;
    let mut data = map.data.clone();
    for (px, &m) in data.chunks_exact_mut(c).zip(&mask.data) {
        if m == 0.0 {
            px.fill(0.0);
        }
    }
    MapImage::new(map.width, map.height, c, map.kind, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Container {
    Mapb,
    Pfm,
    Png,
}

fn container_of(path: &Path) -> Result<Container> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("mapb") => Ok(Container::Mapb),
        Some("pfm") => Ok(Container::Pfm),
        Some("png") => Ok(Container::Png),
        _ => Err(Error::Unsupported(format!("unknown map format for {}", path.display()))),
    }
}

fn stem_kind(path: &Path) -> Option<MapKind> {
    path.file_stem().and_then(|s| s.to_str()).and_then(MapKind::from_stem)
}

/// Read a map, inferring its kind from the container header (MAPB) or the
/// file name, falling back to the channel count.
pub fn read_map(path: impl AsRef<Path>) -> Result<MapImage> {
    let path = path.as_ref();
    match container_of(path)? {
        Container::Mapb => mapb::read(path),
        Container::Pfm => {
            let (w, h, c, data) = pfm::read(path)?;
            let kind = stem_kind(path)
                .filter(|k| k.accepts_channels(c))
                .unwrap_or(if c == 1 { MapKind::Shading } else { MapKind::Rgb });
            MapImage::new(w, h, c, kind, data)
        }
        Container::Png => {
            let kind = match stem_kind(path) {
                Some(k) => k,
                None => png::guess_kind(path)?,
            };
            png::read(path, kind)
        }
    }
}

/// Read a map and force its kind. Fails if the stored channel count does
/// not fit the requested kind.
pub fn read_map_as(path: impl AsRef<Path>, kind: MapKind) -> Result<MapImage> {
    let path = path.as_ref();
    match container_of(path)? {
        Container::Mapb => {
            let map = mapb::read(path)?;
            if map.kind() == kind {
                Ok(map)
            } else {
                map.with_kind(kind)
            }
        }
        Container::Pfm => {
            let (w, h, c, data) = pfm::read(path)?;
            MapImage::new(w, h, c, kind, data)
        }
        Container::Png => png::read(path, kind),
    }
}

/// Write a map in the container selected by the file extension.
pub fn write_map(map: &MapImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_map(map, container_of(path)?)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn encode_map(map: &MapImage, container: Container) -> Result<Vec<u8>> {
    match container {
        Container::Mapb => Ok(mapb::encode(map)),
        Container::Pfm => pfm::encode(map),
        Container::Png => png::encode(map),
    }
}

/// sRGB electro-optical transfer function, encoded `[0, 1]` to linear.
pub fn srgb_to_linear(v: f32) -> f32 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(v: f32) -> f32 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Clamp to `[0, 1]`, sRGB-encode, quantize to 8 bits.
pub fn encode_srgb8(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (linear_to_srgb(v) * 255.0).round() as u8
}
