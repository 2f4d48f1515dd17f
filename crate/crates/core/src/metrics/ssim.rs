//! Gaussian-window SSIM over a rectangle of a multi-channel map.

use crate::error::{Error, Result};
use crate::maps::MapImage;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const DYNAMIC_RANGE: f64 = 1.0;

/// Inclusive-exclusive pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

/// Tight bounding box of the set pixels of a mask.
pub fn mask_bbox(mask: &MapImage) -> Option<Rect> {
    let mut r: Option<Rect> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.is_set(x, y) {
                r = Some(match r {
                    None => Rect { x0: x, y0: y, x1: x + 1, y1: y + 1 },
                    Some(r) => Rect { x0: r.x0.min(x), y0: r.y0.min(y), x1: r.x1.max(x + 1), y1: r.y1.max(y + 1) },
                });
            }
        }
    }
    r
}

fn gaussian(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a `w × h` plane.
fn filter(plane: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM of one channel plane.
fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, window: usize) -> f64 {
    let k = gaussian(window);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (ma, ow, oh) = filter(a, w, h, &k);
    let (mb, ..) = filter(b, w, h, &k);
    let (saa, ..) = filter(&aa, w, h, &k);
    let (sbb, ..) = filter(&bb, w, h, &k);
    let (sab, ..) = filter(&ab, w, h, &k);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (mu_a, mu_b) = (ma[i], mb[i]);
        let va = saa[i] - mu_a * mu_a;
        let vb = sbb[i] - mu_b * mu_b;
        let cov = sab[i] - mu_a * mu_b;
        total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
    }
    total / (ow * oh) as f64
}

/// Channel-averaged SSIM over `rect`. Rectangles smaller than the window
/// are replaced by the whole image; images smaller than the window shrink
/// the window to fit.
pub fn ssim_rect(a: &MapImage, b: &MapImage, rect: Rect) -> Result<f64> {
    a.ensure_same_size(b, "ssim")?;
    if a.channels() != b.channels() {
        return Err(Error::invalid("ssim inputs differ in channel count"));
    }
    let mut rect = rect;
    if rect.width() < WINDOW || rect.height() < WINDOW {
        rect = Rect { x0: 0, y0: 0, x1: a.width(), y1: a.height() };
    }
    let window = WINDOW.min(rect.width()).min(rect.height());
    if window == 0 {
        return Err(Error::invalid("ssim of an empty image"));
    }
    let (w, h, ch) = (rect.width(), rect.height(), a.channels());
    let mut sum = 0.0;
    for c in 0..ch {
        let plane = |m: &MapImage| -> Vec<f64> {
            let mut out = Vec::with_capacity(w * h);
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    out.push(f64::from(m.pixel(x, y)[c]));
                }
            }
            out
        };
        sum += ssim_plane(&plane(a), &plane(b), w, h, window);
    }
    Ok(sum / ch as f64)
}

/// SSIM inside the bounding box of the mask.
pub fn ssim_bbox(a: &MapImage, b: &MapImage, mask: &MapImage) -> Result<f64> {
    a.ensure_same_size(mask, "ssim vs mask")?;
    let rect = mask_bbox(mask).ok_or_else(|| Error::invalid("ssim needs a non-empty mask"))?;
    ssim_rect(a, b, rect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapKind;

    fn map(w: usize, h: usize, f: impl Fn(usize, usize) -> f32) -> MapImage {
        MapImage::from_fn(w, h, 1, MapKind::Shading, |x, y, px| px[0] = f(x, y)).unwrap()
    }

    fn ones(w: usize, h: usize) -> MapImage {
        MapImage::from_fn(w, h, 1, MapKind::Mask, |_, _, px| px[0] = 1.0).unwrap()
    }

    #[test]
    fn gaussian_window_is_normalized_and_symmetric() {
        let g = gaussian(WINDOW);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(g[0], g[10]);
        assert!(g[5] > g[4]);
    }

    #[test]
    fn self_similarity_is_one() {
        let a = map(20, 16, |x, y| ((x * 7 + y * 3) % 11) as f32 / 10.0);
        assert!((ssim_bbox(&a, &a, &ones(20, 16)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverted_image_scores_lower() {
        let a = map(24, 24, |x, y| ((x * 5 + y * 9) % 13) as f32 / 12.0);
        let b = map(24, 24, |x, y| 1.0 - a.pixel(x, y)[0]);
        assert!(ssim_bbox(&a, &b, &ones(24, 24)).unwrap() < 0.5);
    }

    #[test]
    fn constant_images_reduce_to_luminance_term() {
        let a = map(16, 16, |_, _| 0.5);
        let b = map(16, 16, |_, _| 0.6);
        // (2·0.5·0.6 + C1) / (0.25 + 0.36 + C1), C1 = 1e-4
        let want = 0.6001 / 0.6101;
        assert!((ssim_bbox(&a, &b, &ones(16, 16)).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn tiny_boxes_fall_back_to_the_whole_image() {
        let a = map(16, 16, |x, y| (x + y) as f32 / 30.0);
        let b = map(16, 16, |x, _| x as f32 / 15.0);
        let mask = MapImage::from_fn(16, 16, 1, MapKind::Mask, |x, y, px| px[0] = if x < 3 && y < 3 { 1.0 } else { 0.0 }).unwrap();
        let whole = ssim_rect(&a, &b, Rect { x0: 0, y0: 0, x1: 16, y1: 16 }).unwrap();
        assert_eq!(ssim_bbox(&a, &b, &mask).unwrap(), whole);
    }
}
