use std::f64::consts::PI;
use std::path::Path;

use glam::DVec3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{pfm, MapImage, MapKind, ShLight};
use crate::sh::{basis, SH_COUNT};

/// Equirectangular radiance panorama, linear RGB, row 0 at the zenith.
///
/// Pixel `(x, y)` looks along `θ = π(y + ½)/H` from +y and azimuth
/// `φ = 2π(x + ½)/W`, direction `(sin θ sin φ, cos θ, sin θ cos φ)`. The
/// center column therefore faces −z, away from the viewer, and the seam
/// faces +z.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvMap {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl EnvMap {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<EnvMap> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("environment map has zero size"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!("{width}x{height} panorama needs {} texels, got {}", width * height, data.len())));
        }
        if let Some(v) = data.iter().flatten().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("radiance {v} is negative or not finite")));
        }
        Ok(EnvMap { width, height, data })
    }

    /// Sample a radiance function at every pixel center.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(DVec3) -> [f64; 3]) -> Result<EnvMap> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(pixel_direction(x, y, width, height)).map(|v| v as f32));
            }
        }
        EnvMap::new(width, height, data)
    }

    pub fn constant(width: usize, height: usize, rgb: [f32; 3]) -> Result<EnvMap> {
        EnvMap::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn texels(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn texel(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Read a Radiance `.hdr` or a `.pfm` panorama (grayscale PFMs are
    /// expanded to RGB).
    pub fn read(path: impl AsRef<Path>) -> Result<EnvMap> {
        let path = path.as_ref();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("hdr") => {
                let img = image::open(path)?.into_rgb32f();
                let (w, h) = (img.width() as usize, img.height() as usize);
                EnvMap::new(w, h, img.pixels().map(|p| p.0).collect())
            }
            Some("pfm") => {
                let (w, h, c, data) = pfm::read(path)?;
                let texels = match c {
                    1 => data.iter().map(|&v| [v; 3]).collect(),
                    _ => data.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect(),
                };
                EnvMap::new(w, h, texels)
            }
            _ => Err(Error::Unsupported(format!("{}: panoramas must be .hdr or .pfm", path.display()))),
        }
    }

    pub fn write_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let data = self.data.iter().flatten().copied().collect();
        let map = MapImage::new(self.width, self.height, 3, MapKind::Rgb, data)?;
        crate::maps::write_map(&map, path)
    }

    /// Bilinear radiance lookup, wrapping in azimuth and clamping at the poles.
    pub fn lookup(&self, dir: DVec3) -> [f64; 3] {
        let (w, h) = (self.width as f64, self.height as f64);
        let theta = dir.y.clamp(-1.0, 1.0).acos();
        let phi = dir.x.atan2(dir.z).rem_euclid(2.0 * PI);
        let u = phi / (2.0 * PI) * w - 0.5;
        let v = (theta / PI * h - 0.5).clamp(0.0, h - 1.0);
        let (x0, y0) = (u.floor(), v.floor());
        let (fx, fy) = (u - x0, v - y0);
        let xi = |x: f64| (x as i64).rem_euclid(self.width as i64) as usize;
        let (xa, xb) = (xi(x0), xi(x0 + 1.0));
        let (ya, yb) = (y0 as usize, (y0 as usize + 1).min(self.height - 1));
        let mut out = [0.0; 3];
        for (x, y, wgt) in [(xa, ya, (1.0 - fx) * (1.0 - fy)), (xb, ya, fx * (1.0 - fy)), (xa, yb, (1.0 - fx) * fy), (xb, yb, fx * fy)] {
            let t = self.texel(x, y);
            for c in 0..3 {
                out[c] += wgt * f64::from(t[c]);
            }
        }
        out
    }

    pub fn scaled(&self, s: f32) -> EnvMap {
        EnvMap { width: self.width, height: self.height, data: self.data.iter().map(|p| p.map(|v| v * s)).collect() }
    }
}

/// Direction through the center of panorama pixel `(x, y)`.
pub fn pixel_direction(x: usize, y: usize, width: usize, height: usize) -> DVec3 {
    let theta = PI * (y as f64 + 0.5) / height as f64;
    let phi = 2.0 * PI * (x as f64 + 0.5) / width as f64;
    let (st, ct) = theta.sin_cos();
    DVec3::new(st * phi.sin(), ct, st * phi.cos())
}

/// Project a panorama onto the nine SH bases, weighting each pixel by its
/// solid angle `(2π/W)(π/H) sin θ`.
pub fn env_to_sh(env: &EnvMap, id: impl Into<String>) -> ShLight {
    let (w, h) = (env.width, env.height);
    let d_omega = (2.0 * PI / w as f64) * (PI / h as f64);
    let rows: Vec<[[f64; 3]; SH_COUNT]> = (0..h)
        .into_par_iter()
        .map(|y| {
            let weight = d_omega * (PI * (y as f64 + 0.5) / h as f64).sin();
            let mut acc = [[0.0; 3]; SH_COUNT];
            for x in 0..w {
                let r = env.texel(x, y);
                if r == [0.0; 3] {
                    continue;
                }
                let b = basis(pixel_direction(x, y, w, h));
                for i in 0..SH_COUNT {
                    for c in 0..3 {
                        acc[i][c] += f64::from(r[c]) * b[i];
                    }
                }
            }
            acc.map(|row| row.map(|v| v * weight))
        })
        .collect();
    // rows are summed in order so the result is independent of scheduling
    let mut coeffs = [[0.0; 3]; SH_COUNT];
    for row in rows {
        for i in 0..SH_COUNT {
            for c in 0..3 {
                coeffs[i][c] += row[i][c];
            }
        }
    }
    ShLight { id: id.into(), coeffs }
}

/// Rotate the panorama about +y by `degrees`: a direction at azimuth φ
/// moves to φ + degrees. Whole-column shifts are exact permutations;
/// other angles interpolate linearly between neighboring columns.
pub fn rotate_env(env: &EnvMap, degrees: f64) -> EnvMap {
    let w = env.width;
    let shift = (degrees / 360.0 * w as f64).rem_euclid(w as f64);
    let whole = shift.round();
    let mut data = Vec::with_capacity(env.data.len());
    if (shift - whole).abs() < 1e-9 {
        let k = whole as usize % w;
        for y in 0..env.height {
            for x in 0..w {
                data.push(env.texel((x + w - k) % w, y));
            }
        }
    } else {
        let k0 = shift.floor() as usize;
        let f = (shift - shift.floor()) as f32;
        for y in 0..env.height {
            for x in 0..w {
                // source position x − shift lies between columns x − k0 − 1 and x − k0
                let a = env.texel((x + 2 * w - k0 - 1) % w, y);
                let b = env.texel((x + w - k0) % w, y);
                data.push(std::array::from_fn(|c| f * a[c] + (1.0 - f) * b[c]));
            }
        }
    }
    EnvMap { width: w, height: env.height, data }
}

/// `count` rotated copies at `step, 2·step, …` degrees; the original is not included.
pub fn rotate_augment(env: &EnvMap, count: usize, step_degrees: f64) -> Vec<(f64, EnvMap)> {
    (1..=count)
        .map(|k| {
            let deg = k as f64 * step_degrees;
            (deg, rotate_env(env, deg))
        })
        .collect()
}

/// A simple outdoor-like panorama: a sky gradient over a dim ground plus a
/// sharp sun lobe around `sun`.
pub fn sky_panorama(width: usize, height: usize, sun: DVec3, sun_rgb: [f64; 3], sky_rgb: [f64; 3], ground_rgb: [f64; 3]) -> Result<EnvMap> {
    let sun = sun.normalize();
    EnvMap::from_fn(width, height, |d| {
        let lobe = (40.0 * (d.dot(sun) - 1.0)).exp();
        let up = d.y.max(0.0);
        std::array::from_fn(|c| {
            let base = if d.y >= 0.0 { sky_rgb[c] * (0.6 + 0.4 * up) } else { ground_rgb[c] };
            base + sun_rgb[c] * lobe
        })
    })
}

/// Six procedural panoramas with the sun at different positions, used by
/// the demo in place of captured HDR data.
pub fn demo_panoramas(width: usize, height: usize) -> Result<Vec<(String, EnvMap)>> {
    let specs: [(&str, [f64; 3], [f64; 3], [f64; 3]); 6] = [
        ("noon", [0.2, 1.0, 0.4], [6.0, 5.8, 5.2], [0.35, 0.45, 0.65]),
        ("morning", [-0.8, 0.4, 0.6], [5.0, 3.8, 2.6], [0.3, 0.35, 0.5]),
        ("evening", [0.9, 0.15, 0.5], [5.0, 2.5, 1.2], [0.25, 0.22, 0.35]),
        ("overcast", [0.0, 1.0, 0.1], [0.8, 0.8, 0.8], [0.6, 0.62, 0.66]),
        ("studio", [0.5, 0.5, 1.0], [7.0, 7.0, 7.0], [0.15, 0.15, 0.15]),
        ("dusk", [-0.3, 0.05, 0.9], [2.0, 0.9, 0.5], [0.12, 0.1, 0.2]),
    ];
    specs
        .iter()
        .map(|(name, sun, sun_rgb, sky)| {
            let env = sky_panorama(width, height, DVec3::from_array(*sun), *sun_rgb, *sky, [0.12, 0.1, 0.08])?;
            Ok((name.to_string(), env))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_grid_orientation() {
        // center column faces −z, top row near +y
        let d = pixel_direction(1, 1, 3, 3);
        assert!((d - DVec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
        assert!(pixel_direction(0, 0, 8, 4).y > 0.9);
    }

    #[test]
    fn lookup_hits_pixel_centers() {
        let env = EnvMap::from_fn(16, 8, |d| [d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)]).unwrap();
        for (x, y) in [(3, 2), (0, 5), (15, 7)] {
            let got = env.lookup(pixel_direction(x, y, 16, 8));
            let want = env.texel(x, y);
            for c in 0..3 {
                assert!((got[c] - f64::from(want[c])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn constant_map_projects_to_band_zero() {
        let env = EnvMap::constant(128, 64, [1.0, 1.0, 1.0]).unwrap();
        let l = env_to_sh(&env, "c");
        for c in 0..3 {
            assert!((l.coeffs[0][c] - 2.0 * PI.sqrt()).abs() < 1e-3);
            for i in 1..SH_COUNT {
                assert!(l.coeffs[i][c].abs() < 1e-3);
            }
        }
        let black = env_to_sh(&EnvMap::constant(8, 4, [0.0; 3]).unwrap(), "k");
        assert_eq!(black.coeffs, [[0.0; 3]; SH_COUNT]);
    }

    #[test]
    fn rejects_bad_radiance() {
        assert!(EnvMap::new(1, 1, vec![[-1.0, 0.0, 0.0]]).is_err());
        assert!(EnvMap::new(1, 1, vec![[f32::NAN, 0.0, 0.0]]).is_err());
        assert!(EnvMap::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn column_rotation_is_a_permutation() {
        let env = EnvMap::from_fn(36, 4, |d| [d.x + 1.0, d.z + 1.0, d.y + 1.0]).unwrap();
        let r = rotate_env(&env, 10.0);
        assert_eq!(r.texel(1, 2), env.texel(0, 2));
        assert_eq!(rotate_env(&env, 360.0), env);
        let mut acc = env.clone();
        for _ in 0..36 {
            acc = rotate_env(&acc, 10.0);
        }
        assert_eq!(acc, env);
        assert_eq!(rotate_augment(&env, 35, 10.0).len(), 35);
    }

    #[test]
    fn fractional_rotation_interpolates() {
        let env = EnvMap::new(4, 1, vec![[0.0; 3], [1.0; 3], [2.0; 3], [3.0; 3]]).unwrap();
        // a quarter column
        let r = rotate_env(&env, 360.0 / 16.0);
        assert!((r.texel(2, 0)[0] - 1.75).abs() < 1e-6);
    }
}
