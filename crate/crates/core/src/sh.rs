//! Real spherical harmonics up to band 2.
//!
//! Coefficients are indexed `i = l(l+1)+m`, so the nine entries are
//! `Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22`. The basis is written as
//! Cartesian polynomials of a unit direction `(x, y, z)` with all constants
//! positive; no separate Condon-Shortley factor is applied.

use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use glam::DVec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::ShLight;
use crate::sampling::StratifiedSphere;

pub const SH_COUNT: usize = 9;

/// How far from unit length an input direction may be.
pub const UNIT_TOLERANCE: f64 = 1e-4;

/// 1/(2√π)
pub const Y00: f64 = 0.282_094_791_773_878_14;
/// √(3/(4π))
pub const Y1: f64 = 0.488_602_511_902_919_9;
/// ½√(15/π), shared by xy, yz and xz
pub const Y2_CROSS: f64 = 1.092_548_430_592_079_2;
/// ¼√(5/π), times (3z² − 1)
pub const Y20: f64 = 0.315_391_565_252_520_05;
/// ¼√(15/π), times (x² − y²)
pub const Y22: f64 = 0.546_274_215_296_039_6;

/// SH band of coefficient index `i`.
pub const fn band(i: usize) -> usize {
    match i {
        0 => 0,
        1..=3 => 1,
        _ => 2,
    }
}

/// A 9-vector of SH coefficients: a transport vector, a basis evaluation,
/// or one color channel of a light.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShVector9(pub [f64; SH_COUNT]);

/// Basis values at a direction.
pub type ShBasis9 = ShVector9;

impl ShVector9 {
    pub const ZERO: ShVector9 = ShVector9([0.0; SH_COUNT]);

    pub fn dot(&self, other: &ShVector9) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn as_array(&self) -> &[f64; SH_COUNT] {
        &self.0
    }

    /// L2 norm of each band.
    pub fn band_norms(&self) -> [f64; 3] {
        let mut sq = [0.0; 3];
        for (i, v) in self.0.iter().enumerate() {
            sq[band(i)] += v * v;
        }
        sq.map(f64::sqrt)
    }

    pub fn to_f32(&self) -> [f32; SH_COUNT] {
        self.0.map(|v| v as f32)
    }

    pub fn from_f32(v: &[f32]) -> ShVector9 {
        ShVector9(std::array::from_fn(|i| f64::from(v[i])))
    }
}

impl Index<usize> for ShVector9 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ShVector9 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for ShVector9 {
    type Output = ShVector9;

    fn add(self, rhs: ShVector9) -> ShVector9 {
        ShVector9(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl Sub for ShVector9 {
    type Output = ShVector9;

    fn sub(self, rhs: ShVector9) -> ShVector9 {
        ShVector9(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mul<f64> for ShVector9 {
    type Output = ShVector9;

    fn mul(self, s: f64) -> ShVector9 {
        ShVector9(self.0.map(|v| v * s))
    }
}

/// Basis values without the unit-length check. Callers guarantee `|d| = 1`.
#[inline]
pub fn basis(d: DVec3) -> ShVector9 {
    let (x, y, z) = (d.x, d.y, d.z);
    ShVector9([
        Y00,
        Y1 * y,
        Y1 * z,
        Y1 * x,
        Y2_CROSS * x * y,
        Y2_CROSS * y * z,
        Y20 * (3.0 * z * z - 1.0),
        Y2_CROSS * x * z,
        Y22 * (x * x - y * y),
    ])
}

fn check_unit(d: DVec3, what: &str) -> Result<()> {
    let len = d.length();
    if !len.is_finite() || (len - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::invalid(format!("{what} {d} has length {len}, expected 1")));
    }
    Ok(())
}

/// The nine basis functions at a unit direction.
pub fn eval_basis(direction: DVec3) -> Result<ShBasis9> {
    check_unit(direction, "direction")?;
    Ok(basis(direction))
}

/// Per-band SH coefficients of the clamped cosine `max(cos θ, 0)`, already
/// scaled by `√(4π/(2l+1))` so that irradiance is a plain dot product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineLobe {
    pub a_hat: [f64; 3],
}

impl CosineLobe {
    /// Scale for coefficient index `i`.
    pub fn scale(&self, i: usize) -> f64 {
        self.a_hat[band(i)]
    }
}

pub const COSINE_LOBE: CosineLobe = CosineLobe { a_hat: [PI, 2.0 * PI / 3.0, PI / 4.0] };

pub fn cosine_lobe() -> CosineLobe {
    COSINE_LOBE
}

#[inline]
pub(crate) fn analytic_transport_unchecked(normal: DVec3) -> ShVector9 {
    let mut t = basis(normal);
    for i in 0..SH_COUNT {
        t[i] *= COSINE_LOBE.scale(i);
    }
    t
}

/// Transport vector of an unoccluded surface point: the clamped cosine
/// around `normal` in SH, so that `E = T·L`.
pub fn analytic_transport(normal: DVec3) -> Result<ShVector9> {
    check_unit(normal, "normal")?;
    Ok(analytic_transport_unchecked(normal))
}

/// Per-channel dot product of a transport vector with a light. Negative
/// results are kept.
pub fn shade(transport: &ShVector9, light: &ShLight) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (t, row) in transport.0.iter().zip(&light.coeffs) {
        for c in 0..3 {
            out[c] += t * row[c];
        }
    }
    out
}

/// Monte Carlo projection of a spherical function onto the basis:
/// `∫ f(ω) Y_i(ω) dω ≈ 4π/N Σ f(ω_k) Y_i(ω_k)` over stratified uniform
/// sphere samples drawn from a generator seeded with `seed`.
pub fn project_sphere_fn(f: impl Fn(DVec3) -> f64, samples: usize, seed: u64) -> ShVector9 {
    assert!(samples >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = [0.0; SH_COUNT];
    for w in StratifiedSphere::new(samples, &mut rng) {
        let fw = f(w);
        if fw == 0.0 {
            continue;
        }
        let y = basis(w);
        for i in 0..SH_COUNT {
            acc[i] += fw * y[i];
        }
    }
    let weight = 4.0 * PI / samples as f64;
    ShVector9(acc.map(|v| v * weight))
}
