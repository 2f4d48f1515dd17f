//! End-to-end run on the built-in procedural scenes and panoramas.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use prt_core::baker::{bake_mesh_to_dir, files, transport_from_normals, BakeConfig};
use prt_core::illum::{demo_panoramas, prepare_lights_from_dir, EnvPrepConfig};
use prt_core::inverse::estimate_light;
use prt_core::maps::{write_map, MapImage, MapKind, ShLight};
use prt_core::metrics::{evaluate, IMAGE_FILE, LIGHT_FILE, SHADING_FILE};
use prt_core::relight::{compose, shade_map, sweep, transfer_light, Decomposition, Encoding};
use prt_core::scene::procedural::demo_scenes;
use prt_core::scene::DEFAULT_PADDING;

use crate::{log_outputs, DemoArgs};

const PANORAMA_SIZE: (usize, usize) = (128, 64);
const DEMO_CLUSTERS: usize = 12;

/// Images placed left to right on one canvas.
fn side_by_side(images: &[&MapImage]) -> Result<MapImage> {
    let (w, h) = (images[0].width(), images[0].height());
    for im in images {
        ensure!(im.width() == w && im.height() == h && im.channels() == 3, "panels differ in shape");
    }
    Ok(MapImage::from_fn(w * images.len(), h, 3, MapKind::Rgb, |x, y, px| {
        px.copy_from_slice(images[x / w].pixel(x % w, y));
    })?)
}

/// Absolute difference scaled by `gain`, for visual inspection.
fn difference(a: &MapImage, b: &MapImage, gain: f32) -> Result<MapImage> {
    Ok(MapImage::from_fn(a.width(), a.height(), 3, MapKind::Rgb, |x, y, px| {
        for c in 0..3 {
            px[c] = gain * (a.pixel(x, y)[c] - b.pixel(x, y)[c]).abs();
        }
    })?)
}

fn write(map: &MapImage, path: PathBuf, written: &mut Vec<PathBuf>) -> Result<()> {
    write_map(map, &path)?;
    written.push(path);
    Ok(())
}

fn make_lights(out: &Path, seed: u64) -> Result<Vec<ShLight>> {
    let pano_dir = out.join("panoramas");
    std::fs::create_dir_all(&pano_dir).with_context(|| format!("creating {}", pano_dir.display()))?;
    let mut written = Vec::new();
    for (name, env) in demo_panoramas(PANORAMA_SIZE.0, PANORAMA_SIZE.1)? {
        let path = pano_dir.join(format!("{name}.pfm"));
        env.write_pfm(&path)?;
        written.push(path);
    }
    let config = EnvPrepConfig { clusters: DEMO_CLUSTERS, seed, ..EnvPrepConfig::default() };
    log::info!("envprep config {}", serde_json::to_string(&config)?);
    let set = prepare_lights_from_dir(&pano_dir, &config)?;
    let path = out.join("lights.json");
    set.save(&path)?;
    written.push(path);
    log_outputs(&written)?;
    ensure!(!set.lights.is_empty(), "light preparation kept no lights");
    log::info!("{} curated lights", set.lights.len());
    Ok(set.lights.iter().map(|l| l.light()).collect())
}

pub fn run(args: &DemoArgs, seed: u64) -> Result<()> {
    let out = &args.out;
    let lights = make_lights(out, seed)?;
    let config = BakeConfig { samples: args.samples, seed, ..BakeConfig::default() };
    log::info!("bake config {} size={}", serde_json::to_string(&config)?, args.size);

    let mut decomps = Vec::new();
    for (i, (name, mesh)) in demo_scenes().into_iter().enumerate() {
        let dir = out.join(name);
        let (baked, _) = bake_mesh_to_dir(mesh, name, &config, args.size, DEFAULT_PADDING, &dir)?;
        let g = &baked.gbuffer;
        // 1/π exposure keeps the sRGB previews out of clipping
        let curated = &lights[i % lights.len()];
        let light = curated.scaled(std::f64::consts::FRAC_1_PI).with_id(format!("{}_display", curated.id));
        let mut written = Vec::new();
        let light_path = dir.join(LIGHT_FILE);
        light.save(&light_path)?;
        written.push(light_path);

        let shading = shade_map(&baked.transport, &light, &g.mask)?;
        let image = compose(&g.albedo, &shading, &g.mask)?;
        let free = transport_from_normals(&g.normal, &g.mask)?;
        let free_image = compose(&g.albedo, &shade_map(&free, &light, &g.mask)?, &g.mask)?;
        write(&shading, dir.join(SHADING_FILE), &mut written)?;
        write(&image, dir.join(IMAGE_FILE), &mut written)?;
        write(&image, dir.join("occluded.png"), &mut written)?;
        write(&free_image, dir.join("unoccluded.png"), &mut written)?;
        let diff = difference(&free_image, &image, 4.0)?;
        write(&side_by_side(&[&image, &free_image, &diff])?, dir.join("comparison.png"), &mut written)?;

        // the occlusion-free maps scored as if they were a prediction
        let pred = dir.join("unoccluded_pred");
        std::fs::create_dir_all(&pred).with_context(|| format!("creating {}", pred.display()))?;
        write(&g.albedo, pred.join(files::ALBEDO), &mut written)?;
        write(&free, pred.join(files::TRANSPORT), &mut written)?;
        write(&g.normal, pred.join(files::NORMAL), &mut written)?;
        light.save(pred.join(LIGHT_FILE))?;
        let report_path = dir.join("report.json");
        let report = evaluate(&pred, &dir, &report_path)?;
        written.push(report_path);
        if let Some(r) = report.rmse.get("shading").and_then(|m| m.0) {
            log::info!("{name}: occlusion-free shading RMSE {r:.4}");
        }

        let est = estimate_light(&shading, &baked.transport, &g.mask)?;
        log::info!("{name}: light recovered with residual {:.2e} (rank {})", est.residual, est.rank);
        let est_path = dir.join("estimated_light.json");
        est.light.with_id(format!("{name}_estimate")).save(&est_path)?;
        written.push(est_path);
        log_outputs(&written)?;

        decomps.push((name, Decomposition::new(g.albedo.clone(), baked.transport, g.mask.clone(), light)?));
    }

    let (_, figure) = decomps.iter().find(|(n, _)| *n == "figure").context("figure scene missing")?;
    log_outputs(&sweep(figure, 12, 30.0, &out.join("figure").join("sweep"), Encoding::SrgbPng)?)?;

    let (na, a) = &decomps[0];
    let (nb, b) = &decomps[decomps.len() - 1];
    let (ab, ba) = transfer_light(a, b)?;
    let tdir = out.join("transfer");
    std::fs::create_dir_all(&tdir).with_context(|| format!("creating {}", tdir.display()))?;
    let mut written = Vec::new();
    write(&ab, tdir.join(format!("{na}_lit_by_{nb}.png")), &mut written)?;
    write(&ba, tdir.join(format!("{nb}_lit_by_{na}.png")), &mut written)?;
    log_outputs(&written)?;
    Ok(())
}
