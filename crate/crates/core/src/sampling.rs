//! Deterministic stratified sphere sampling and per-pixel seeding.

use std::f64::consts::PI;

use glam::DVec3;
use rand::Rng;

/// Split `n` samples into a `cols × rows` grid with `cols · rows = n`
/// exactly, `cols` the largest divisor of `n` not above `√n`.
pub fn strata_grid(n: usize) -> (usize, usize) {
    assert!(n >= 1);
    let mut cols = (n as f64).sqrt() as usize;
    while cols > 1 && !n.is_multiple_of(cols) {
        cols -= 1;
    }
    (cols.max(1), n / cols.max(1))
}

/// Map `(u, v) ∈ [0,1)²` to the unit sphere by `z = 1 − 2u`, `φ = 2πv`.
#[inline]
pub fn uniform_sphere(u: f64, v: f64) -> DVec3 {
    let z = 1.0 - 2.0 * u;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = (2.0 * PI * v).sin_cos();
    DVec3::new(r * c, r * s, z)
}

/// Jittered samples, one per cell of a [`strata_grid`] over `(u, v)`.
pub struct StratifiedSphere<'a, R: Rng> {
    rng: &'a mut R,
    cols: usize,
    rows: usize,
    next: usize,
}

impl<'a, R: Rng> StratifiedSphere<'a, R> {
    pub fn new(n: usize, rng: &'a mut R) -> Self {
        let (cols, rows) = strata_grid(n);
        StratifiedSphere { rng, cols, rows, next: 0 }
    }
}

impl<R: Rng> Iterator for StratifiedSphere<'_, R> {
    type Item = DVec3;

    fn next(&mut self) -> Option<DVec3> {
        if self.next >= self.cols * self.rows {
            return None;
        }
        let (i, j) = (self.next % self.cols, self.next / self.cols);
        self.next += 1;
        let u = (i as f64 + self.rng.gen::<f64>()) / self.cols as f64;
        let v = (j as f64 + self.rng.gen::<f64>()) / self.rows as f64;
        Some(uniform_sphere(u, v))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.cols * self.rows - self.next;
        (left, Some(left))
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit seed for pixel `(x, y)` under a global seed.
pub fn pixel_seed(seed: u64, x: u32, y: u32) -> u64 {
    splitmix64(splitmix64(seed) ^ ((u64::from(y) << 32) | u64::from(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_covers_exactly_n() {
        for n in [1, 2, 7, 128, 256, 512, 1000, 1_000_000, 10_000_000] {
            let (c, r) = strata_grid(n);
            assert_eq!(c * r, n);
            assert!(c <= r);
        }
        assert_eq!(strata_grid(256), (16, 16));
        assert_eq!(strata_grid(512), (16, 32));
        assert_eq!(strata_grid(1_000_000), (1000, 1000));
    }

    #[test]
    fn samples_are_unit_and_counted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<_> = StratifiedSphere::new(300, &mut rng).collect();
        assert_eq!(v.len(), 300);
        assert!(v.iter().all(|d| (d.length() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pixel_seeds_differ() {
        let a = pixel_seed(7, 0, 0);
        assert_ne!(a, pixel_seed(7, 1, 0));
        assert_ne!(a, pixel_seed(7, 0, 1));
        assert_ne!(a, pixel_seed(8, 0, 0));
        assert_ne!(pixel_seed(7, 1, 0), pixel_seed(7, 0, 1));
        assert_eq!(a, pixel_seed(7, 0, 0));
    }

    proptest::proptest! {
        #[test]
        fn stratified_sets_are_unit_and_balanced(n in 1usize..600, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<_> = StratifiedSphere::new(n, &mut rng).collect();
            proptest::prop_assert_eq!(v.len(), n);
            proptest::prop_assert!(v.iter().all(|d| (d.length() - 1.0).abs() < 1e-12));
            // strata centers cancel, so the mean height is within 1/cols of zero
            let (cols, _) = strata_grid(n);
            let mean_z = v.iter().map(|d| d.z).sum::<f64>() / n as f64;
            proptest::prop_assert!(mean_z.abs() <= 1.0 / cols as f64 + 1e-12);
        }
    }
}
