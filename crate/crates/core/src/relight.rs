//! Forward composition `image = albedo · (transport · light)`, relighting
//! sweeps, light transfer and SH rotation about the vertical axis.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{read_map, read_map_as, write_map, MapImage, MapKind, ShLight};
use crate::sh::SH_COUNT;

fn check_mask(mask: &MapImage) -> Result<()> {
    if mask.kind() != MapKind::Mask {
        return Err(Error::invalid(format!("expected a mask, got a {} map", mask.kind())));
    }
    Ok(())
}

/// Per-pixel `T · L` for each color channel, zero off the mask.
pub fn shade_map(transport: &MapImage, light: &ShLight, mask: &MapImage) -> Result<MapImage> {
    if transport.channels() != SH_COUNT {
        return Err(Error::invalid(format!("transport map has {} channels, expected 9", transport.channels())));
    }
    check_mask(mask)?;
    transport.ensure_same_size(mask, "transport vs mask")?;
    let l = light.coeffs;
    let mut out = vec![0.0f32; transport.pixel_count() * 3];
    out.par_chunks_mut(3 * 4096)
        .zip(transport.data().par_chunks(SH_COUNT * 4096))
        .zip(mask.data().par_chunks(4096))
        .for_each(|((out, t), m)| {
            for ((o, t), &m) in out.chunks_exact_mut(3).zip(t.chunks_exact(SH_COUNT)).zip(m) {
                if m == 0.0 {
                    continue;
                }
                let (mut r, mut g, mut b) = (0.0f64, 0.0f64, 0.0f64);
                for i in 0..SH_COUNT {
                    let ti = f64::from(t[i]);
                    r += ti * l[i][0];
                    g += ti * l[i][1];
                    b += ti * l[i][2];
                }
                o[0] = r as f32;
                o[1] = g as f32;
                o[2] = b as f32;
            }
        });
    MapImage::new(transport.width(), transport.height(), 3, MapKind::Shading, out)
}

/// Element-wise `albedo · shading` under the mask. One-channel shading is
/// broadcast over the three albedo channels.
pub fn compose(albedo: &MapImage, shading: &MapImage, mask: &MapImage) -> Result<MapImage> {
    check_mask(mask)?;
    albedo.ensure_same_size(shading, "albedo vs shading")?;
    albedo.ensure_same_size(mask, "albedo vs mask")?;
    if albedo.channels() != 3 || !matches!(shading.channels(), 1 | 3) {
        return Err(Error::invalid("compose expects 3-channel albedo and 1- or 3-channel shading"));
    }
    let sc = shading.channels();
    let mut out = vec![0.0f32; albedo.pixel_count() * 3];
    out.par_chunks_mut(3 * 4096).enumerate().for_each(|(chunk, out)| {
        let base = chunk * 4096;
        for (k, o) in out.chunks_exact_mut(3).enumerate() {
            let p = base + k;
            if mask.data()[p] == 0.0 {
                continue;
            }
            let a = &albedo.data()[p * 3..p * 3 + 3];
            let s = &shading.data()[p * sc..p * sc + sc];
            for c in 0..3 {
                o[c] = a[c] * s[if sc == 1 { 0 } else { c }];
            }
        }
    });
    MapImage::new(albedo.width(), albedo.height(), 3, MapKind::Rgb, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    LinearPfm,
    SrgbPng,
}

impl Encoding {
    pub fn from_path(path: &Path) -> Result<Encoding> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pfm") => Ok(Encoding::LinearPfm),
            Some("png") => Ok(Encoding::SrgbPng),
            _ => Err(Error::Unsupported(format!("{}: relit images are written as .pfm or .png", path.display()))),
        }
    }
}

/// Maps needed to render one figure.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub albedo: MapImage,
    pub transport: MapImage,
    pub mask: MapImage,
    pub light: ShLight,
}

impl Decomposition {
    pub fn new(albedo: MapImage, transport: MapImage, mask: MapImage, light: ShLight) -> Result<Decomposition> {
        check_mask(&mask)?;
        albedo.ensure_same_size(&transport, "albedo vs transport")?;
        albedo.ensure_same_size(&mask, "albedo vs mask")?;
        Ok(Decomposition { albedo, transport, mask, light })
    }

    /// Read `albedo.mapb`, `transport.mapb`, `mask.png` and `light.json` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Decomposition> {
        Decomposition::new(
            read_map_as(dir.join("albedo.mapb"), MapKind::Albedo)?,
            read_map(dir.join("transport.mapb"))?,
            read_map_as(dir.join("mask.png"), MapKind::Mask)?,
            ShLight::load(&dir.join("light.json").to_string_lossy())?,
        )
    }

    pub fn render_with(&self, light: &ShLight) -> Result<MapImage> {
        compose(&self.albedo, &shade_map(&self.transport, light, &self.mask)?, &self.mask)
    }

    pub fn render(&self) -> Result<MapImage> {
        self.render_with(&self.light)
    }
}

pub fn write_image(image: &MapImage, path: &Path, encoding: Encoding) -> Result<()> {
    if Encoding::from_path(path)? != encoding {
        return Err(Error::invalid(format!("{} does not match the {encoding:?} encoding", path.display())));
    }
    write_map(image, path)
}

/// Render from map files and write the result; the encoding follows the
/// output extension.
pub fn relight(albedo: &Path, transport: &Path, mask: &Path, light: &ShLight, out: &Path) -> Result<MapImage> {
    let encoding = Encoding::from_path(out)?;
    let d = Decomposition::new(
        read_map_as(albedo, MapKind::Albedo)?,
        read_map(transport)?,
        read_map_as(mask, MapKind::Mask)?,
        light.clone(),
    )?;
    let image = d.render()?;
    write_image(&image, out, encoding)?;
    Ok(image)
}

/// Render `frames` images with the light turned by `step_deg` about +y per
/// frame, written as `frame_000.<ext>` and so on.
pub fn sweep(d: &Decomposition, frames: usize, step_deg: f64, out_dir: &Path, encoding: Encoding) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ext = match encoding {
        Encoding::LinearPfm => "pfm",
        Encoding::SrgbPng => "png",
    };
    (0..frames)
        .map(|k| {
            let light = rotate_light_y(&d.light, k as f64 * step_deg);
            let path = out_dir.join(format!("frame_{k:03}.{ext}"));
            write_map(&d.render_with(&light)?, &path)?;
            Ok(path)
        })
        .collect()
}

/// Render each decomposition under the other's light: `(A lit by B, B lit by A)`.
pub fn transfer_light(a: &Decomposition, b: &Decomposition) -> Result<(MapImage, MapImage)> {
    Ok((a.render_with(&b.light)?, b.render_with(&a.light)?))
}

/// Rotate a light about +y by `degrees`, matching a panorama rotated by the
/// same angle (azimuth φ ↦ φ + degrees).
pub fn rotate_light_y(light: &ShLight, degrees: f64) -> ShLight {
    let m = rotation_y_matrix(degrees);
    let mut out = light.clone();
    for c in 0..3 {
        for i in 0..SH_COUNT {
            out.coeffs[i][c] = (0..SH_COUNT).map(|j| m[i][j] * light.coeffs[j][c]).sum();
        }
    }
    out
}

/// The 9×9 block-diagonal matrix taking coefficients of `f` to those of
/// `f ∘ R⁻¹` for a rotation `R` about +y.
pub fn rotation_y_matrix(degrees: f64) -> [[f64; SH_COUNT]; SH_COUNT] {
    let (s, c) = degrees.to_radians().sin_cos();
    let (s2, c2) = (2.0 * s * c, c * c - s * s);
    let h3 = 0.5 * 3f64.sqrt();
    let mut m = [[0.0; SH_COUNT]; SH_COUNT];
    m[0][0] = 1.0;
    // band 1 in (y, z, x) order
    m[1][1] = 1.0;
    m[2][2] = c;
    m[2][3] = -s;
    m[3][2] = s;
    m[3][3] = c;
    // band 2 in (xy, yz, 3z²−1, xz, x²−y²) order
    m[4][4] = c;
    m[4][5] = s;
    m[5][4] = -s;
    m[5][5] = c;
    m[6][6] = c * c - 0.5 * s * s;
    m[6][7] = -h3 * s2;
    m[6][8] = h3 * s * s;
    m[7][6] = h3 * s2;
    m[7][7] = c2;
    m[7][8] = -0.5 * s2;
    m[8][6] = h3 * s * s;
    m[8][7] = 0.5 * s2;
    m[8][8] = 0.5 * (1.0 + c * c);
    m
}
