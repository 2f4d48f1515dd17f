//! Illumination set preparation: panoramas to SH lights, brightness
//! normalization, rotation augmentation, clustering, filtering and the
//! train/test split.

pub mod env;
pub mod kmeans;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use glam::DVec3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use env::{demo_panoramas, env_to_sh, pixel_direction, rotate_augment, rotate_env, sky_panorama, EnvMap};

use crate::error::{Error, Result};
use crate::maps::ShLight;
use crate::sh::{analytic_transport_unchecked, shade, SH_COUNT};

pub const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

pub fn luminance(rgb: [f64; 3]) -> f64 {
    REC709[0] * rgb[0] + REC709[1] * rgb[1] + REC709[2] * rgb[2]
}

/// Luminance of the unoccluded shading of `normal`.
pub fn shading_luminance(light: &ShLight, normal: DVec3) -> f64 {
    luminance(shade(&analytic_transport_unchecked(normal.normalize()), light))
}

/// Luminance of the front-facing (+z) unoccluded shading over π, so a
/// uniform unit-radiance environment scores 1.
pub fn reference_brightness(light: &ShLight) -> f64 {
    shading_luminance(light, DVec3::Z) / PI
}

#[derive(Clone, Debug, PartialEq)]
pub enum Brightness {
    Kept(ShLight),
    Scaled { light: ShLight, factor: f64 },
    Rejected { brightness: f64 },
}

impl Brightness {
    pub fn light(&self) -> Option<&ShLight> {
        match self {
            Brightness::Kept(l) | Brightness::Scaled { light: l, .. } => Some(l),
            Brightness::Rejected { .. } => None,
        }
    }

    pub fn factor(&self) -> Option<f64> {
        match self {
            Brightness::Kept(_) => Some(1.0),
            Brightness::Scaled { factor, .. } => Some(*factor),
            Brightness::Rejected { .. } => None,
        }
    }
}

/// Reject dark lights; pull out-of-range ones to the middle of `[low, high]`.
pub fn normalize_brightness(light: &ShLight, low: f64, high: f64, reject_below: f64) -> Result<Brightness> {
    if !(low < high) {
        return Err(Error::invalid(format!("brightness range [{low}, {high}] is empty")));
    }
    let b = reference_brightness(light);
    if !(b >= reject_below) {
        return Ok(Brightness::Rejected { brightness: b });
    }
    if (low..=high).contains(&b) {
        return Ok(Brightness::Kept(light.clone()));
    }
    let factor = 0.5 * (low + high) / b;
    Ok(Brightness::Scaled { light: light.scaled(factor), factor })
}

/// Back-to-front luminance ratio of the unoccluded shading.
pub fn back_light_ratio(light: &ShLight) -> f64 {
    let front = shading_luminance(light, DVec3::Z);
    let back = shading_luminance(light, -DVec3::Z);
    if front > 0.0 {
        back / front
    } else if back > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// The 26 directions of a 3×3×3 grid around the origin.
pub fn contrast_normals() -> Vec<DVec3> {
    let mut out = Vec::with_capacity(26);
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                if (i, j, k) != (0, 0, 0) {
                    out.push(DVec3::new(i as f64, j as f64, k as f64).normalize());
                }
            }
        }
    }
    out
}

/// Max over min shading luminance across [`contrast_normals`]; infinite
/// when any of them is not lit.
pub fn shading_contrast(light: &ShLight) -> f64 {
    let lum: Vec<f64> = contrast_normals().into_iter().map(|n| shading_luminance(light, n)).collect();
    let min = lum.iter().copied().fold(f64::INFINITY, f64::min);
    let max = lum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightEntry {
    pub id: String,
    pub coeffs: [[f64; 3]; SH_COUNT],
    pub source: String,
    pub rotation_deg: f64,
}

impl LightEntry {
    pub fn new(light: &ShLight, source: impl Into<String>, rotation_deg: f64) -> LightEntry {
        LightEntry { id: light.id.clone(), coeffs: light.coeffs, source: source.into(), rotation_deg }
    }

    pub fn light(&self) -> ShLight {
        ShLight { id: self.id.clone(), coeffs: self.coeffs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightSet {
    pub lights: Vec<LightEntry>,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub config: serde_json::Value,
}

impl LightSet {
    pub fn get(&self, id: &str) -> Option<ShLight> {
        self.lights.iter().find(|l| l.id == id).map(LightEntry::light)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LightSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvPrepConfig {
    pub rotations: usize,
    pub step_deg: f64,
    pub clusters: usize,
    pub bright_min: f64,
    pub target: [f64; 2],
    pub seed: u64,
    pub backlight_max: f64,
    pub contrast_max: f64,
    pub train_fraction: f64,
}

impl Default for EnvPrepConfig {
    fn default() -> Self {
        EnvPrepConfig {
            rotations: 35,
            step_deg: 10.0,
            clusters: 50,
            bright_min: 0.2,
            target: [0.7, 0.9],
            seed: 7,
            backlight_max: 2.0,
            contrast_max: 10.0,
            train_fraction: 0.8,
        }
    }
}

/// Counts from each stage, stored in the light set's config block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepStats {
    pub inputs: usize,
    pub rejected_dark: usize,
    pub scaled: usize,
    pub candidates: usize,
    pub representatives: usize,
    pub dropped_backlight: usize,
    pub dropped_contrast: usize,
    pub survivors: usize,
}

/// Cluster the candidates, keep one light per cluster, drop back-lights and
/// high-contrast lights, and split the survivors.
pub fn dedup_and_filter(candidates: &[LightEntry], config: &EnvPrepConfig, stats: &mut PrepStats) -> Result<LightSet> {
    if config.clusters == 0 || config.clusters > candidates.len() {
        return Err(Error::invalid(format!(
            "cannot form {} clusters from {} lights",
            config.clusters,
            candidates.len()
        )));
    }
    let points: Vec<Vec<f64>> = candidates.iter().map(|c| c.light().flat().to_vec()).collect();
    let clustering = kmeans::kmeans(&points, config.clusters, config.seed);
    let mut reps = kmeans::representatives(&points, &clustering);
    reps.sort_unstable();
    stats.representatives = reps.len();

    let mut survivors = Vec::new();
    for i in reps {
        let light = candidates[i].light();
        if back_light_ratio(&light) > config.backlight_max {
            stats.dropped_backlight += 1;
        } else if shading_contrast(&light) > config.contrast_max {
            stats.dropped_contrast += 1;
        } else {
            survivors.push(candidates[i].clone());
        }
    }
    stats.survivors = survivors.len();

    let mut ids: Vec<String> = survivors.iter().map(|l| l.id.clone()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1)));
    let n_train = (ids.len() as f64 * config.train_fraction).round() as usize;
    let test = ids.split_off(n_train.min(ids.len()));
    Ok(LightSet {
        lights: survivors,
        train: ids,
        test,
        config: serde_json::json!({ "params": config, "stats": stats }),
    })
}

/// Project one panorama and its rotated copies, with the brightness factor
/// chosen on the unrotated original applied to every copy.
pub fn prepare_env(stem: &str, env: &EnvMap, config: &EnvPrepConfig) -> Result<Option<(Vec<LightEntry>, bool)>> {
    let base = env_to_sh(env, format!("{stem}_r000"));
    let outcome = normalize_brightness(&base, config.target[0], config.target[1], config.bright_min)?;
    let Some(factor) = outcome.factor() else {
        log::info!("{stem}: reference brightness below {}, skipped", config.bright_min);
        return Ok(None);
    };
    let mut out = vec![LightEntry::new(&base.scaled(factor), stem, 0.0)];
    for (deg, rotated) in rotate_augment(env, config.rotations, config.step_deg) {
        let light = env_to_sh(&rotated, format!("{stem}_r{:03}", deg.round() as i64)).scaled(factor);
        out.push(LightEntry::new(&light, stem, deg));
    }
    Ok(Some((out, factor != 1.0)))
}

/// The full pipeline over in-memory panoramas, in the given order.
pub fn prepare_lights(envs: &[(String, EnvMap)], config: &EnvPrepConfig) -> Result<LightSet> {
    let per_env: Vec<Result<Option<(Vec<LightEntry>, bool)>>> =
        envs.par_iter().map(|(stem, env)| prepare_env(stem, env, config)).collect();
    let mut stats = PrepStats { inputs: envs.len(), ..Default::default() };
    let mut candidates = Vec::new();
    for r in per_env {
        match r? {
            None => stats.rejected_dark += 1,
            Some((lights, scaled)) => {
                stats.scaled += usize::from(scaled);
                candidates.extend(lights);
            }
        }
    }
    stats.candidates = candidates.len();
    dedup_and_filter(&candidates, config, &mut stats)
}

/// Panoramas (`.hdr`, `.pfm`) in a directory, sorted by file name.
pub fn list_panoramas(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("hdr" | "pfm")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Read every panorama in `dir` and run [`prepare_lights`].
pub fn prepare_lights_from_dir(dir: &Path, config: &EnvPrepConfig) -> Result<LightSet> {
    let paths = list_panoramas(dir)?;
    if paths.is_empty() {
        return Err(Error::Missing(format!("no .hdr or .pfm panoramas in {}", dir.display())));
    }
    let envs = paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((stem, EnvMap::read(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    prepare_lights(&envs, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white(scale: f64) -> ShLight {
        ShLight::constant("w", [scale; 3])
    }

    #[test]
    fn brightness_of_constant_light() {
        assert!((reference_brightness(&white(1.0)) - 1.0).abs() < 1e-12);
        assert!((reference_brightness(&white(2.5)) - 2.5).abs() < 1e-12);
        assert_eq!(reference_brightness(&ShLight::zero("z")), 0.0);
    }

    #[test]
    fn brightness_rules() {
        assert!(matches!(normalize_brightness(&white(0.1), 0.7, 0.9, 0.2).unwrap(), Brightness::Rejected { .. }));
        let Brightness::Scaled { light, factor } = normalize_brightness(&white(1.5), 0.7, 0.9, 0.2).unwrap() else {
            panic!("expected scaling")
        };
        assert!((factor - 0.8 / 1.5).abs() < 1e-12);
        assert!((reference_brightness(&light) - 0.8).abs() < 1e-12);
        assert_eq!(normalize_brightness(&white(0.75), 0.7, 0.9, 0.2).unwrap(), Brightness::Kept(white(0.75)));
        assert!(normalize_brightness(&white(1.0), 0.9, 0.7, 0.2).is_err());
    }

    /// A light whose radiance is a clamped cosine lobe around `axis`.
    fn lobe(axis: DVec3) -> ShLight {
        let t = analytic_transport_unchecked(axis);
        let coeffs: [[f64; 3]; SH_COUNT] = std::array::from_fn(|i| {
            // projection of max(cos, 0) is Y_i(axis)·A_l with A_l = Â_l/√(4π/(2l+1)); the
            // transport already holds Â_l·Y_i, so divide the normalization back out
            let l = crate::sh::band(i) as f64;
            [t[i] / (4.0 * PI / (2.0 * l + 1.0)).sqrt(); 3]
        });
        ShLight::new("lobe", coeffs).unwrap()
    }

    #[test]
    fn back_light_is_filtered() {
        let back = lobe(-DVec3::Z);
        assert!(back_light_ratio(&back) > 2.0);
        let front = lobe(DVec3::Z);
        assert!(back_light_ratio(&front) < 0.5);
        assert!(shading_contrast(&white(1.0)) < 1.0 + 1e-9);
        assert_eq!(contrast_normals().len(), 26);
    }

    fn entries(n: usize) -> Vec<LightEntry> {
        (0..n)
            .map(|i| {
                let mut l = white(0.8);
                l.coeffs[1] = [0.05 * (i % 7) as f64; 3];
                l.coeffs[3] = [0.04 * (i % 5) as f64; 3];
                l.id = format!("e{i:03}");
                LightEntry::new(&l, "synthetic", 0.0)
            })
            .collect()
    }

    #[test]
    fn fifty_survivors_split_forty_ten() {
        let config = EnvPrepConfig { clusters: 35, ..Default::default() };
        let mut stats = PrepStats::default();
        // 35 distinct lights, each present twice
        let mut input = entries(35);
        input.extend(entries(35).into_iter().map(|mut e| {
            e.id.push('b');
            e
        }));
        let set = dedup_and_filter(&input, &config, &mut stats).unwrap();
        assert_eq!(set.lights.len(), 35);
        assert_eq!((set.train.len(), set.test.len()), (28, 7));

        let mut uniq = entries(50);
        uniq.iter_mut().enumerate().for_each(|(i, e)| e.coeffs[4] = [0.01 * i as f64; 3]);
        let config = EnvPrepConfig::default();
        let set = dedup_and_filter(&uniq, &config, &mut PrepStats::default()).unwrap();
        assert_eq!((set.train.len(), set.test.len()), (40, 10));
        assert!(set.train.iter().all(|id| !set.test.contains(id)));
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        assert!(dedup_and_filter(&entries(3), &EnvPrepConfig::default(), &mut PrepStats::default()).is_err());
    }
}
