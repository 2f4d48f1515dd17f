//! Per-pixel Monte Carlo baking of occlusion-aware transport and ambient
//! occlusion, plus the analytic occlusion-free baselines.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use glam::DVec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::maps::{write_map, MapImage, MapKind};
use crate::sampling::{pixel_seed, StratifiedSphere};
use crate::scene::{frame_camera, load_mesh, rasterize_gbuffer, CameraFrame, GBuffer, Scene, TriMesh};
use crate::sh::{analytic_transport_unchecked, basis, ShVector9, SH_COUNT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakeConfig {
    pub samples: usize,
    pub seed: u64,
    /// Shadow-ray offset as a fraction of the bounding-box diagonal.
    pub epsilon_scale: f64,
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig { samples: 256, seed: 7, epsilon_scale: crate::scene::DEFAULT_EPSILON_SCALE }
    }
}

impl BakeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("samples must be at least 1"));
        }
        if !(self.epsilon_scale.is_finite() && self.epsilon_scale >= 0.0) {
            return Err(Error::invalid(format!("bad epsilon scale {}", self.epsilon_scale)));
        }
        Ok(())
    }
}

/// Transport and AO at one surface point, from one sample set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointBake {
    pub transport: ShVector9,
    pub ao: f64,
}

/// Bake one surface point.
///
/// Directions come from a stratified uniform sphere set. Both outputs are
/// normalized by the sampled cosine mass `Σ max(n·ω, 0)` instead of its
/// expectation `N/4`, so that AO stays in `[0, 1]`, the unoccluded constant
/// term is exact, and `T · (2√π, 0, …) = π · AO` holds to rounding.
pub fn bake_point(scene: &Scene, position: DVec3, normal: DVec3, samples: usize, seed: u64) -> PointBake {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = [0.0; SH_COUNT];
    let mut cos_mass = 0.0;
    let mut visible = 0.0;
    for w in StratifiedSphere::new(samples, &mut rng) {
        let cos = normal.dot(w);
        if cos <= 0.0 {
            continue;
        }
        cos_mass += cos;
        if scene.occluded(position, normal, w) {
            continue;
        }
        visible += cos;
        let y = basis(w);
        for i in 0..SH_COUNT {
            acc[i] += cos * y[i];
        }
    }
    if cos_mass == 0.0 {
        return PointBake { transport: ShVector9::ZERO, ao: 0.0 };
    }
    PointBake { transport: ShVector9(acc.map(|v| PI * v / cos_mass)), ao: (visible / cos_mass).min(1.0) }
}

fn check_gbuffer(g: &GBuffer) -> Result<()> {
    for (map, kind, name) in [
        (&g.normal, MapKind::Normal, "normal"),
        (&g.albedo, MapKind::Albedo, "albedo"),
        (&g.position, MapKind::Position, "position"),
    ] {
        if map.kind() != kind {
            return Err(Error::Missing(format!("gbuffer {name} layer holds a {} map", map.kind())));
        }
        map.ensure_same_size(&g.mask, &format!("gbuffer {name} layer"))?;
    }
    if g.mask.kind() != MapKind::Mask {
        return Err(Error::Missing("gbuffer has no mask layer".into()));
    }
    Ok(())
}

/// Bake transport (9 channels) and AO (1 channel) together, sharing samples.
/// Pixels are independent and seeded by position, so the result does not
/// depend on the worker count.
pub fn bake_maps(scene: &Scene, gbuffer: &GBuffer, config: &BakeConfig) -> Result<(MapImage, MapImage)> {
    config.validate()?;
    check_gbuffer(gbuffer)?;
    let (w, h) = (gbuffer.width(), gbuffer.height());
    let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut t = vec![0.0f32; w * SH_COUNT];
            let mut ao = vec![0.0f32; w];
            for x in 0..w {
                if !gbuffer.mask.is_set(x, y) {
                    continue;
                }
                let p = gbuffer.position.pixel(x, y);
                let n = gbuffer.normal.pixel(x, y);
                let position = DVec3::new(p[0].into(), p[1].into(), p[2].into());
                let normal = DVec3::new(n[0].into(), n[1].into(), n[2].into()).normalize();
                let b = bake_point(scene, position, normal, config.samples, pixel_seed(config.seed, x as u32, y as u32));
                t[x * SH_COUNT..(x + 1) * SH_COUNT].copy_from_slice(&b.transport.to_f32());
                ao[x] = b.ao as f32;
            }
            (t, ao)
        })
        .collect();
    let mut transport = Vec::with_capacity(w * h * SH_COUNT);
    let mut ao = Vec::with_capacity(w * h);
    for (t, a) in rows {
        transport.extend(t);
        ao.extend(a);
    }
    Ok((
        MapImage::new(w, h, SH_COUNT, MapKind::Transport, transport)?,
        MapImage::new(w, h, 1, MapKind::Ao, ao)?,
    ))
}

pub fn bake_transport(scene: &Scene, gbuffer: &GBuffer, config: &BakeConfig) -> Result<MapImage> {
    Ok(bake_maps(scene, gbuffer, config)?.0)
}

pub fn bake_ao(scene: &Scene, gbuffer: &GBuffer, config: &BakeConfig) -> Result<MapImage> {
    Ok(bake_maps(scene, gbuffer, config)?.1)
}

/// Occlusion-free baseline: the analytic transport of each masked normal.
pub fn transport_from_normals(normal: &MapImage, mask: &MapImage) -> Result<MapImage> {
    normal.ensure_same_size(mask, "transport_from_normals")?;
    normal.check_normals(mask, 1e-3)?;
    if normal.channels() != 3 {
        return Err(Error::invalid("normal map must have 3 channels"));
    }
    MapImage::from_fn(normal.width(), normal.height(), SH_COUNT, MapKind::Transport, |x, y, out| {
        if mask.is_set(x, y) {
            let n = normal.pixel(x, y);
            let n = DVec3::new(n[0].into(), n[1].into(), n[2].into()).normalize();
            out.copy_from_slice(&analytic_transport_unchecked(n).to_f32());
        }
    })
}

/// Scale all nine coefficients of each pixel by its AO value.
pub fn apply_ao_to_transport(transport: &MapImage, ao: &MapImage) -> Result<MapImage> {
    transport.ensure_same_size(ao, "apply_ao_to_transport")?;
    if transport.channels() != SH_COUNT || ao.channels() != 1 {
        return Err(Error::invalid("expected a 9-channel transport map and a 1-channel AO map"));
    }
    let mut data = transport.data().to_vec();
    for (px, &a) in data.chunks_exact_mut(SH_COUNT).zip(ao.data()) {
        px.iter_mut().for_each(|v| *v *= a);
    }
    MapImage::new(transport.width(), transport.height(), SH_COUNT, MapKind::Transport, data)
}

/// Everything one bake produces, in memory.
#[derive(Clone, Debug)]
pub struct BakedScene {
    pub camera: CameraFrame,
    pub gbuffer: GBuffer,
    pub transport: MapImage,
    pub ao: MapImage,
}

pub fn bake_scene(scene: &Scene, size: usize, padding: f64, config: &BakeConfig) -> Result<BakedScene> {
    config.validate()?;
    let camera = frame_camera(&scene.mesh, size, padding)?;
    let gbuffer = rasterize_gbuffer(scene, &camera);
    let (transport, ao) = bake_maps(scene, &gbuffer, config)?;
    Ok(BakedScene { camera, gbuffer, transport, ao })
}

/// File names inside a dataset directory.
pub mod files {
    pub const MASK: &str = "mask.png";
    pub const ALBEDO: &str = "albedo.mapb";
    pub const ALBEDO_PREVIEW: &str = "albedo.png";
    pub const NORMAL: &str = "normal.mapb";
    pub const TRANSPORT: &str = "transport.mapb";
    pub const AO: &str = "ao.pfm";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: BTreeMap<String, String>,
    pub config: serde_json::Value,
    /// SHA-256 of each written file, hex.
    pub hashes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Manifest> {
        let path = dir.as_ref().join(files::MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

#[derive(Serialize)]
struct ManifestConfig<'a> {
    source: &'a str,
    triangles: usize,
    size: usize,
    padding: f64,
    samples: usize,
    seed: u64,
    epsilon_scale: f64,
    camera: &'a CameraFrame,
}

/// Write the dataset files and the manifest into `out`.
pub fn write_dataset(baked: &BakedScene, source: &str, triangles: usize, padding: f64, config: &BakeConfig, out: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let g = &baked.gbuffer;
    let entries: [(&str, &str, &MapImage); 6] = [
        ("mask", files::MASK, &g.mask),
        ("albedo", files::ALBEDO, &g.albedo),
        ("albedo_preview", files::ALBEDO_PREVIEW, &g.albedo),
        ("normal", files::NORMAL, &g.normal),
        ("transport", files::TRANSPORT, &baked.transport),
        ("ao", files::AO, &baked.ao),
    ];
    let mut manifest = Manifest {
        files: BTreeMap::new(),
        config: serde_json::to_value(ManifestConfig {
            source,
            triangles,
            size: baked.camera.size,
            padding,
            samples: config.samples,
            seed: config.seed,
            epsilon_scale: config.epsilon_scale,
            camera: &baked.camera,
        })?,
        hashes: BTreeMap::new(),
    };
    for (key, name, map) in entries {
        let path = out.join(name);
        write_map(map, &path)?;
        manifest.files.insert(key.to_string(), name.to_string());
        manifest.hashes.insert(name.to_string(), sha256_file(&path)?);
    }
    let path = out.join(files::MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Bake an in-memory mesh into a dataset directory.
pub fn bake_mesh_to_dir(mesh: TriMesh, source: &str, config: &BakeConfig, size: usize, padding: f64, out: &Path) -> Result<(BakedScene, Manifest)> {
    mesh.validate()?;
    let triangles = mesh.triangle_count();
    let scene = Scene::with_epsilon_scale(mesh, config.epsilon_scale);
    let baked = bake_scene(&scene, size, padding, config)?;
    let manifest = write_dataset(&baked, source, triangles, padding, config, out)?;
    Ok((baked, manifest))
}

/// Load an OBJ, bake it, and write the dataset directory.
pub fn bake_all(mesh_path: &Path, config: &BakeConfig, size: usize, padding: f64, out: &Path) -> Result<Manifest> {
    let mesh = load_mesh(mesh_path)?;
    let source = mesh_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(bake_mesh_to_dir(mesh, &source, config, size, padding, out)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::procedural;
    use crate::sh::analytic_transport;

    fn plane_scene() -> Scene {
        Scene::new(procedural::quad(DVec3::ZERO, DVec3::X * 10.0, DVec3::Y * 10.0))
    }

    #[test]
    fn unoccluded_point_matches_analytic_within_noise() {
        let scene = plane_scene();
        let n = DVec3::Z;
        let samples = 1024;
        let b = bake_point(&scene, DVec3::ZERO, n, samples, 11);
        let exact = analytic_transport(n).unwrap();
        assert_eq!(b.ao, 1.0);
        assert!((b.transport[0] - exact[0]).abs() < 1e-12);
        // per-sample spread of the estimator, bounded crudely by its range
        let sigma = PI * crate::sh::Y20 * 2.0 / (samples as f64 / 2.0).sqrt();
        for i in 0..SH_COUNT {
            assert!((b.transport[i] - exact[i]).abs() < 3.0 * sigma, "coeff {i}");
        }
    }

    #[test]
    fn enclosed_point_is_black() {
        let scene = Scene::new(procedural::box_mesh(DVec3::splat(-1.0), DVec3::splat(1.0)));
        let b = bake_point(&scene, DVec3::ZERO, DVec3::Y, 256, 1);
        assert_eq!(b.transport, ShVector9::ZERO);
        assert_eq!(b.ao, 0.0);
    }

    #[test]
    fn band0_identity_is_exact() {
        let scene = Scene::new(procedural::wedge(4.0, 4.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let n = DVec3::new(-s, 0.0, s);
        let b = bake_point(&scene, DVec3::new(0.3 * s, 0.0, 0.3 * s), n, 256, 5);
        let c = 2.0 * PI.sqrt();
        assert!((b.transport[0] * c - PI * b.ao).abs() < 1e-12);
        assert!(b.ao > 0.3 && b.ao < 0.7);
    }

    #[test]
    fn analytic_baseline_and_ao_scaling() {
        let mask = MapImage::new(2, 1, 1, MapKind::Mask, vec![1.0, 0.0]).unwrap();
        let normal = MapImage::new(2, 1, 3, MapKind::Normal, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let t = transport_from_normals(&normal, &mask).unwrap();
        let want = [0.886_226_9, 0.0, 1.023_326_7, 0.0, 0.0, 0.0, 0.495_415_9, 0.0, 0.0];
        for (a, b) in t.pixel(0, 0).iter().zip(want) {
            assert!((f64::from(*a) - b).abs() < 1e-6);
        }
        assert!(t.pixel(1, 0).iter().all(|&v| v == 0.0));

        let ao = MapImage::new(2, 1, 1, MapKind::Ao, vec![0.5, 1.0]).unwrap();
        let half = apply_ao_to_transport(&t, &ao).unwrap();
        for (a, b) in half.pixel(0, 0).iter().zip(t.pixel(0, 0)) {
            assert_eq!(*a, b * 0.5);
        }
        let bad = MapImage::new(1, 1, 1, MapKind::Ao, vec![1.0]).unwrap();
        assert!(apply_ao_to_transport(&t, &bad).is_err());
    }

    #[test]
    fn non_unit_normals_rejected() {
        let mask = MapImage::new(1, 1, 1, MapKind::Mask, vec![1.0]).unwrap();
        let normal = MapImage::new(1, 1, 3, MapKind::Normal, vec![0.0, 0.0, 0.9]).unwrap();
        assert!(transport_from_normals(&normal, &mask).is_err());
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = BakeConfig { samples: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
