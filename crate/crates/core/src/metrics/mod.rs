//! Masked error metrics, the fifteen decomposition losses, and directory
//! evaluation reports.

pub mod ssim;

use std::collections::BTreeMap;
use std::path::Path;

use glam::DVec3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use ssim::{mask_bbox, ssim_bbox, ssim_rect, Rect};

use crate::baker::files;
use crate::error::{Error, Result};
use crate::inverse::pairwise_sum;
use crate::maps::{read_map, read_map_as, MapImage, MapKind, ShLight};
use crate::relight::{compose, shade_map};
use crate::sh::{analytic_transport_unchecked, shade};

/// Side of the square sphere rendering used to compare lights.
pub const SPHERE_SIZE: usize = 256;

fn check_pair(a: &MapImage, b: &MapImage, mask: &MapImage) -> Result<()> {
    a.ensure_same_size(b, "metric inputs")?;
    a.ensure_same_size(mask, "metric input vs mask")?;
    if a.channels() != b.channels() {
        return Err(Error::invalid(format!("metric inputs have {} and {} channels", a.channels(), b.channels())));
    }
    if mask.kind() != MapKind::Mask {
        return Err(Error::invalid("metric needs a mask"));
    }
    Ok(())
}

/// Sum of `f(a, b)` over every channel of every mask pixel, and the number of terms.
fn masked_sum(a: &MapImage, b: &MapImage, mask: &MapImage, f: impl Fn(f64, f64) -> f64) -> (f64, usize) {
    let c = a.channels();
    let mut rows = Vec::with_capacity(a.height());
    let mut count = 0;
    for y in 0..a.height() {
        let mut row = 0.0;
        for x in 0..a.width() {
            if !mask.is_set(x, y) {
                continue;
            }
            for (p, q) in a.pixel(x, y).iter().zip(b.pixel(x, y)) {
                row += f(f64::from(*p), f64::from(*q));
            }
            count += c;
        }
        rows.push(row);
    }
    (pairwise_sum(&rows), count)
}

/// Mean absolute difference over mask pixels and channels.
pub fn l1_masked(a: &MapImage, b: &MapImage, mask: &MapImage) -> Result<f64> {
    check_pair(a, b, mask)?;
    let (sum, n) = masked_sum(a, b, mask, |p, q| (p - q).abs());
    if n == 0 {
        return Err(Error::invalid("empty mask"));
    }
    Ok(sum / n as f64)
}

/// Root mean squared difference over mask pixels and channels.
pub fn rmse_masked(a: &MapImage, b: &MapImage, mask: &MapImage) -> Result<f64> {
    check_pair(a, b, mask)?;
    let (sum, n) = masked_sum(a, b, mask, |p, q| (p - q) * (p - q));
    if n == 0 {
        return Err(Error::invalid("empty mask"));
    }
    Ok((sum / n as f64).sqrt())
}

/// Anisotropic L1 total variation: mean absolute forward difference over
/// horizontal and vertical neighbor pairs that both lie in the mask.
pub fn tv_masked(map: &MapImage, mask: &MapImage) -> Result<f64> {
    map.ensure_same_size(mask, "tv")?;
    let c = map.channels();
    let mut rows = Vec::with_capacity(map.height());
    let mut pairs = 0usize;
    for y in 0..map.height() {
        let mut row = 0.0;
        for x in 0..map.width() {
            if !mask.is_set(x, y) {
                continue;
            }
            let p = map.pixel(x, y);
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < map.width() && ny < map.height() && mask.is_set(nx, ny) {
                    let q = map.pixel(nx, ny);
                    row += p.iter().zip(q).map(|(a, b)| f64::from(b - a).abs()).sum::<f64>();
                    pairs += 1;
                }
            }
        }
        rows.push(row);
    }
    if pairs == 0 {
        return Ok(0.0);
    }
    Ok(pairwise_sum(&rows) / (pairs * c) as f64)
}

/// Mean absolute difference of the 27 coefficients.
pub fn light_l1(a: &ShLight, b: &ShLight) -> f64 {
    a.flat().iter().zip(b.flat()).map(|(x, y)| (x - y).abs()).sum::<f64>() / 27.0
}

pub fn light_rmse(a: &ShLight, b: &ShLight) -> f64 {
    (a.flat().iter().zip(b.flat()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 27.0).sqrt()
}

/// Unoccluded shading of a unit sphere seen head-on, with its disc mask.
pub fn render_light_sphere(light: &ShLight, size: usize) -> (MapImage, MapImage) {
    let r = size as f64 / 2.0;
    let normal_at = |x: usize, y: usize| {
        let u = (x as f64 + 0.5 - r) / r;
        let v = (r - (y as f64 + 0.5)) / r;
        let d = u * u + v * v;
        (d < 1.0).then(|| DVec3::new(u, v, (1.0 - d).sqrt()))
    };
    let image = MapImage::from_fn(size, size, 3, MapKind::Shading, |x, y, px| {
        if let Some(n) = normal_at(x, y) {
            let s = shade(&analytic_transport_unchecked(n), light);
            for c in 0..3 {
                px[c] = s[c] as f32;
            }
        }
    })
    .expect("sphere rendering is well formed");
    let mask = MapImage::from_fn(size, size, 1, MapKind::Mask, |x, y, px| {
        px[0] = if normal_at(x, y).is_some() { 1.0 } else { 0.0 };
    })
    .expect("sphere mask is binary");
    (image, mask)
}

/// Albedo, transport and light of one decomposition.
#[derive(Clone, Debug)]
pub struct Factors {
    pub albedo: MapImage,
    pub transport: MapImage,
    pub light: ShLight,
}

/// Predicted and ground-truth factors with the mask and input image.
#[derive(Clone, Debug)]
pub struct DecompositionPair {
    pub predicted: Factors,
    pub truth: Factors,
    pub mask: MapImage,
    pub image: MapImage,
}

pub const LOSS_NAMES: [&str; 15] = [
    "01_albedo",
    "02_transport",
    "03_light",
    "04_reconstruction",
    "05_tv_albedo",
    "06_tv_transport",
    "07_shading_pred_transport",
    "08_shading_pred_light",
    "09_shading_pred_both",
    "10_image_gt_albedo_pred_light",
    "11_image_gt_albedo_pred_transport",
    "12_image_gt_albedo_pred_both",
    "13_image_pred_albedo_gt_shading",
    "14_image_pred_albedo_pred_light",
    "15_image_pred_albedo_pred_transport",
];

/// The fifteen L1 terms, numbered as in [`LOSS_NAMES`].
pub fn losses15(pair: &DecompositionPair) -> Result<[f64; 15]> {
    let m = &pair.mask;
    let (p, t) = (&pair.predicted, &pair.truth);
    for map in [&p.albedo, &p.transport, &t.albedo, &t.transport, &pair.image] {
        map.ensure_same_size(m, "losses15")?;
    }
    let s_tt = shade_map(&t.transport, &t.light, m)?;
    let s_pt = shade_map(&p.transport, &t.light, m)?;
    let s_tp = shade_map(&t.transport, &p.light, m)?;
    let s_pp = shade_map(&p.transport, &p.light, m)?;
    let img = &pair.image;
    let recon = |albedo: &MapImage, shading: &MapImage| -> Result<f64> { l1_masked(&compose(albedo, shading, m)?, img, m) };
    Ok([
        l1_masked(&p.albedo, &t.albedo, m)?,
        l1_masked(&p.transport, &t.transport, m)?,
        light_l1(&p.light, &t.light),
        recon(&p.albedo, &s_pp)?,
        tv_masked(&p.albedo, m)?,
        tv_masked(&p.transport, m)?,
        l1_masked(&s_pt, &s_tt, m)?,
        l1_masked(&s_tp, &s_tt, m)?,
        l1_masked(&s_pp, &s_tt, m)?,
        recon(&t.albedo, &s_tp)?,
        recon(&t.albedo, &s_pt)?,
        recon(&t.albedo, &s_pp)?,
        recon(&p.albedo, &s_tt)?,
        recon(&p.albedo, &s_tp)?,
        recon(&p.albedo, &s_pt)?,
    ])
}

/// A metric value, or `"N/A"` when a component is missing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric(pub Option<f64>);

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("N/A"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Metric(Some(v))),
            Raw::Text(t) if t == "N/A" => Ok(Metric(None)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected metric {t:?}"))),
        }
    }
}

pub const COMPONENTS: [&str; 6] = ["shading", "transport", "normal", "ao", "light", "albedo"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: BTreeMap<String, Metric>,
    pub ssim: BTreeMap<String, Metric>,
    /// The fifteen losses and their unweighted sum under `"sum"`.
    pub losses15: BTreeMap<String, Metric>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Maps found in a dataset or prediction directory.
#[derive(Clone, Debug, Default)]
pub struct MapSet {
    pub mask: Option<MapImage>,
    pub albedo: Option<MapImage>,
    pub normal: Option<MapImage>,
    pub transport: Option<MapImage>,
    pub ao: Option<MapImage>,
    pub shading: Option<MapImage>,
    pub image: Option<MapImage>,
    pub light: Option<ShLight>,
}

pub const LIGHT_FILE: &str = "light.json";
pub const SHADING_FILE: &str = "shading.pfm";
pub const IMAGE_FILE: &str = "image.pfm";

fn optional<T>(path: &Path, load: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        load(path).map(Some)
    } else {
        Ok(None)
    }
}

impl MapSet {
    pub fn load(dir: &Path) -> Result<MapSet> {
        if !dir.is_dir() {
            return Err(Error::Missing(format!("directory {}", dir.display())));
        }
        Ok(MapSet {
            mask: optional(&dir.join(files::MASK), |p| read_map_as(p, MapKind::Mask))?,
            albedo: optional(&dir.join(files::ALBEDO), |p| read_map_as(p, MapKind::Albedo))?,
            normal: optional(&dir.join(files::NORMAL), |p| read_map_as(p, MapKind::Normal))?,
            transport: optional(&dir.join(files::TRANSPORT), |p| read_map(p))?,
            ao: optional(&dir.join(files::AO), |p| read_map_as(p, MapKind::Ao))?,
            shading: optional(&dir.join(SHADING_FILE), |p| read_map_as(p, MapKind::Shading))?,
            image: optional(&dir.join(IMAGE_FILE), |p| read_map_as(p, MapKind::Rgb))?,
            light: optional(&dir.join(LIGHT_FILE), |p| ShLight::load(&p.to_string_lossy()))?,
        })
    }

    /// Stored shading, or the product of transport and light when both exist.
    fn shading_or_derived(&self, mask: &MapImage) -> Result<Option<MapImage>> {
        if let Some(s) = &self.shading {
            return Ok(Some(s.clone()));
        }
        match (&self.transport, &self.light) {
            (Some(t), Some(l)) => Ok(Some(shade_map(t, l, mask)?)),
            _ => Ok(None),
        }
    }
}

/// Compare a prediction directory against ground truth. Components missing
/// on either side are reported as `"N/A"`.
pub fn evaluate_sets(pred: &MapSet, gt: &MapSet) -> Result<EvalReport> {
    let mask = gt.mask.as_ref().ok_or_else(|| Error::Missing("ground-truth mask".into()))?;
    let mut rmse = BTreeMap::new();
    let mut ssim = BTreeMap::new();
    let pair_maps = |a: &Option<MapImage>, b: &Option<MapImage>| -> Result<(Metric, Metric)> {
        match (a, b) {
            (Some(a), Some(b)) => Ok((Metric(Some(rmse_masked(a, b, mask)?)), Metric(Some(ssim_bbox(a, b, mask)?)))),
            _ => Ok((Metric(None), Metric(None))),
        }
    };
    let entries = [
        ("shading", pair_maps(&pred.shading_or_derived(mask)?, &gt.shading_or_derived(mask)?)?),
        ("transport", pair_maps(&pred.transport, &gt.transport)?),
        ("normal", pair_maps(&pred.normal, &gt.normal)?),
        ("ao", pair_maps(&pred.ao, &gt.ao)?),
        ("albedo", pair_maps(&pred.albedo, &gt.albedo)?),
        (
            "light",
            match (&pred.light, &gt.light) {
                (Some(a), Some(b)) => {
                    let (sa, sm) = render_light_sphere(a, SPHERE_SIZE);
                    let (sb, _) = render_light_sphere(b, SPHERE_SIZE);
                    (Metric(Some(light_rmse(a, b))), Metric(Some(ssim_bbox(&sa, &sb, &sm)?)))
                }
                _ => (Metric(None), Metric(None)),
            },
        ),
    ];
    for (name, (r, s)) in entries {
        rmse.insert(name.to_string(), r);
        ssim.insert(name.to_string(), s);
    }

    let mut losses = BTreeMap::new();
    let pair = match (&pred.albedo, &pred.transport, &pred.light, &gt.albedo, &gt.transport, &gt.light) {
        (Some(pa), Some(pt), Some(pl), Some(ga), Some(gt_t), Some(gl)) => {
            let image = match &gt.image {
                Some(i) => i.clone(),
                None => compose(ga, &shade_map(gt_t, gl, mask)?, mask)?,
            };
            Some(DecompositionPair {
                predicted: Factors { albedo: pa.clone(), transport: pt.clone(), light: pl.clone() },
                truth: Factors { albedo: ga.clone(), transport: gt_t.clone(), light: gl.clone() },
                mask: mask.clone(),
                image,
            })
        }
        _ => None,
    };
    match pair {
        Some(pair) => {
            let values = losses15(&pair)?;
            for (name, v) in LOSS_NAMES.iter().zip(values) {
                losses.insert(name.to_string(), Metric(Some(v)));
            }
            losses.insert("sum".into(), Metric(Some(values.iter().sum())));
        }
        None => {
            for name in LOSS_NAMES.iter().chain(&["sum"]) {
                losses.insert(name.to_string(), Metric(None));
            }
        }
    }
    Ok(EvalReport { rmse, ssim, losses15: losses })
}

/// Load both directories, evaluate, and write the report as JSON.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path, out: &Path) -> Result<EvalReport> {
    let report = evaluate_sets(&MapSet::load(pred_dir)?, &MapSet::load(gt_dir)?)?;
    std::fs::write(out, report.to_json()?).map_err(|e| Error::io(out, e))?;
    Ok(report)
}
