//! Closed-form inverse problems: least-squares light estimation from a
//! shading map, and albedo recovery by division.

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{MapImage, MapKind, ShLight};
use crate::sh::SH_COUNT;

type Mat9 = SMatrix<f64, SH_COUNT, SH_COUNT>;
type Vec9 = SVector<f64, SH_COUNT>;

/// Condition number above which the normal equations are not trusted.
pub const MAX_CONDITION: f64 = 1e8;
/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;
const BLOCK: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct LightEstimate {
    pub light: ShLight,
    /// RMS of `A·L − b` over mask pixels and color channels.
    pub residual: f64,
    /// Numerical rank of the transport system.
    pub rank: usize,
    pub rank_deficient: bool,
    /// Eigenvalue ratio of the Gram matrix (infinite when singular).
    pub condition: f64,
}

#[derive(Clone, Copy)]
struct Normal {
    gram: Mat9,
    rhs: [Vec9; 3],
    count: usize,
}

impl Normal {
    fn zero() -> Normal {
        Normal { gram: Mat9::zeros(), rhs: [Vec9::zeros(); 3], count: 0 }
    }

    fn add(mut self, o: &Normal) -> Normal {
        self.gram += o.gram;
        for c in 0..3 {
            self.rhs[c] += o.rhs[c];
        }
        self.count += o.count;
        self
    }
}

/// Pairwise reduction in a fixed tree shape, so the sum does not depend on
/// how blocks were scheduled.
fn pairwise(parts: &[Normal]) -> Normal {
    match parts.len() {
        0 => Normal::zero(),
        1 => parts[0],
        n => pairwise(&parts[..n / 2]).add(&pairwise(&parts[n / 2..])),
    }
}

fn accumulate(observed: &MapImage, transport: &MapImage, mask: &MapImage) -> Normal {
    let n = mask.pixel_count();
    let blocks: Vec<Normal> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = Normal::zero();
            for p in b * BLOCK..((b + 1) * BLOCK).min(n) {
                if mask.data()[p] == 0.0 {
                    continue;
                }
                let t = Vec9::from_iterator(transport.data()[p * SH_COUNT..(p + 1) * SH_COUNT].iter().map(|&v| f64::from(v)));
                acc.gram += t * t.transpose();
                for c in 0..3 {
                    acc.rhs[c] += t * f64::from(observed.data()[p * 3 + c]);
                }
                acc.count += 1;
            }
            acc
        })
        .collect();
    pairwise(&blocks)
}

/// Least-squares SH light from a 3-channel shading map and the transport
/// map, per color channel, over mask pixels.
///
/// Well-conditioned systems are solved through a Cholesky factorization of
/// the 9×9 Gram matrix. Past [`MAX_CONDITION`] the minimum-norm solution is
/// taken from its eigen-decomposition instead.
pub fn estimate_light(observed: &MapImage, transport: &MapImage, mask: &MapImage) -> Result<LightEstimate> {
    if mask.kind() != MapKind::Mask {
        return Err(Error::invalid("estimate_light needs a mask"));
    }
    if observed.channels() != 3 || transport.channels() != SH_COUNT {
        return Err(Error::invalid("estimate_light needs a 3-channel observation and a 9-channel transport map"));
    }
    observed.ensure_same_size(transport, "observed vs transport")?;
    observed.ensure_same_size(mask, "observed vs mask")?;

    let sys = accumulate(observed, transport, mask);
    if sys.count < SH_COUNT {
        return Err(Error::invalid(format!("need at least {SH_COUNT} mask pixels, found {}", sys.count)));
    }
    let eig = SymmetricEigen::new(sys.gram);
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::invalid("transport is zero everywhere under the mask"));
    }
    let lmin = eig.eigenvalues.min();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let rank = eig.eigenvalues.iter().filter(|&&l| l >= lmax * RANK_TOLERANCE).count();

    let cholesky = (condition <= MAX_CONDITION).then(|| sys.gram.cholesky()).flatten();
    let solution: [Vec9; 3] = match &cholesky {
        Some(ch) => sys.rhs.map(|b| ch.solve(&b)),
        None => {
            log::warn!("transport system is rank {rank} (condition {condition:.3e}); using the minimum-norm solution");
            let inv = Vec9::from_iterator(
                eig.eigenvalues.iter().map(|&l| if l >= lmax * RANK_TOLERANCE { 1.0 / l } else { 0.0 }),
            );
            let pinv = eig.eigenvectors * Mat9::from_diagonal(&inv) * eig.eigenvectors.transpose();
            sys.rhs.map(|b| pinv * b)
        }
    };
    let coeffs: [[f64; 3]; SH_COUNT] = std::array::from_fn(|i| std::array::from_fn(|c| solution[c][i]));
    let light = ShLight::new("estimated", coeffs)?;

    let n = mask.pixel_count();
    let sq: Vec<f64> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = 0.0;
            for p in b * BLOCK..((b + 1) * BLOCK).min(n) {
                if mask.data()[p] == 0.0 {
                    continue;
                }
                let t = &transport.data()[p * SH_COUNT..(p + 1) * SH_COUNT];
                for c in 0..3 {
                    let pred: f64 = (0..SH_COUNT).map(|i| f64::from(t[i]) * coeffs[i][c]).sum();
                    let r = pred - f64::from(observed.data()[p * 3 + c]);
                    acc += r * r;
                }
            }
            acc
        })
        .collect();
    let residual = (pairwise_sum(&sq) / (3 * sys.count) as f64).sqrt();
    Ok(LightEstimate { light, residual, rank, rank_deficient: rank < SH_COUNT, condition })
}

pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// `albedo = image / max(shading, ε)` under the mask. The second map marks
/// mask pixels where every shading channel is at least `ε`.
pub fn recover_albedo(image: &MapImage, shading: &MapImage, mask: &MapImage, epsilon: f64) -> Result<(MapImage, MapImage)> {
    if mask.kind() != MapKind::Mask {
        return Err(Error::invalid("recover_albedo needs a mask"));
    }
    image.ensure_same_size(shading, "image vs shading")?;
    image.ensure_same_size(mask, "image vs mask")?;
    if image.channels() != 3 || !matches!(shading.channels(), 1 | 3) {
        return Err(Error::invalid("recover_albedo expects a 3-channel image and 1- or 3-channel shading"));
    }
    let sc = shading.channels();
    let eps = epsilon as f32;
    let n = image.pixel_count();
    let mut albedo = vec![0.0f32; n * 3];
    let mut valid = vec![0.0f32; n];
    for p in 0..n {
        if mask.data()[p] == 0.0 {
            continue;
        }
        let mut ok = true;
        for c in 0..3 {
            let s = shading.data()[p * sc + if sc == 1 { 0 } else { c }];
            ok &= s >= eps;
            albedo[p * 3 + c] = image.data()[p * 3 + c] / s.max(eps);
        }
        valid[p] = if ok { 1.0 } else { 0.0 };
    }
    Ok((
        MapImage::new(image.width(), image.height(), 3, MapKind::Albedo, albedo)?,
        MapImage::new(image.width(), image.height(), 1, MapKind::Mask, valid)?,
    ))
}
