use std::f64::consts::{FRAC_1_SQRT_2, PI};

use glam::DVec3;
use prt_core::baker::{bake_all, bake_point, bake_scene, files, transport_from_normals, BakeConfig};
use prt_core::maps::MapImage;
use prt_core::metrics::rmse_masked;
use prt_core::scene::procedural::{quad, uv_sphere, wedge};
use prt_core::scene::{Scene, TriMesh};
use prt_core::sh::basis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain Möller-Trumbore, kept separate from the library's BVH path.
fn hits(mesh: &TriMesh, o: DVec3, d: DVec3) -> bool {
    mesh.triangles.iter().any(|t| {
        let [a, b, c] = t.map(|i| mesh.positions[i as usize]);
        let (e1, e2) = (b - a, c - a);
        let p = d.cross(e2);
        let det = e1.dot(p);
        if det.abs() < 1e-15 {
            return false;
        }
        let s = o - a;
        let u = s.dot(p) / det;
        let q = s.cross(e1);
        let v = d.dot(q) / det;
        let t = e2.dot(q) / det;
        (0.0..=1.0).contains(&u) && v >= 0.0 && u + v <= 1.0 && t > 0.0
    })
}

/// Raw Monte Carlo over independent uniform directions:
/// `T_i = 4π/N Σ V max(n·ω, 0) Y_i(ω)` and `AO = 4/N Σ V max(n·ω, 0)`.
fn brute_force(mesh: &TriMesh, p: DVec3, n: DVec3, rays: usize, seed: u64) -> ([f64; 9], f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = p + n * 1e-7;
    let mut t = [0.0; 9];
    let mut ao = 0.0;
    for _ in 0..rays {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).sqrt();
        let w = DVec3::new(r * phi.cos(), r * phi.sin(), z);
        let cos = n.dot(w);
        if cos <= 0.0 || hits(mesh, offset, w) {
            continue;
        }
        ao += cos;
        let y = basis(w);
        for i in 0..9 {
            t[i] += cos * y[i];
        }
    }
    (t.map(|v| 4.0 * PI * v / rays as f64), 4.0 * ao / rays as f64)
}

#[test]
fn wedge_pixel_sees_half_the_cosine_weighted_hemisphere() {
    let mesh = wedge(400.0, 400.0);
    let scene = Scene::new(mesh.clone());
    let n = DVec3::new(-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
    let p = DVec3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
    let (oracle_t, oracle_ao) = brute_force(&mesh, p, n, 1_000_000, 3);
    assert!((oracle_ao - 0.5).abs() < 0.01, "oracle AO {oracle_ao}");

    let baked = bake_point(&scene, p, n, 512, 17);
    assert!((baked.ao - 0.5).abs() < 0.02, "AO {}", baked.ao);
    let constant = 2.0 * PI.sqrt() * baked.transport[0];
    assert!((constant / PI - 0.5).abs() < 0.05, "ratio {}", constant / PI);

    let fine = bake_point(&scene, p, n, 16_384, 17);
    for i in 0..9 {
        assert!((fine.transport[i] - oracle_t[i]).abs() < 0.03, "coefficient {i}: {} vs {}", fine.transport[i], oracle_t[i]);
    }
    assert!((fine.ao - oracle_ao).abs() < 0.01);
}

#[test]
fn sphere_bake_matches_analytic_transport() {
    let scene = Scene::new(uv_sphere(DVec3::ZERO, 1.0, 64, 32));
    let config = BakeConfig { samples: 512, ..BakeConfig::default() };
    let baked = bake_scene(&scene, 48, 0.05, &config).unwrap();
    let analytic = transport_from_normals(&baked.gbuffer.normal, &baked.gbuffer.mask).unwrap();
    let rmse = rmse_masked(&baked.transport, &analytic, &baked.gbuffer.mask).unwrap();
    assert!(rmse < 0.02, "rmse {rmse}");
    // facets only clip grazing rays around interpolated normals
    let inside: Vec<f32> = baked.ao.data().iter().zip(baked.gbuffer.mask.data()).filter(|(_, m)| **m == 1.0).map(|(a, _)| *a).collect();
    let mean = inside.iter().map(|a| f64::from(*a)).sum::<f64>() / inside.len() as f64;
    let min = inside.iter().cloned().fold(1.0f32, f32::min);
    assert!(mean > 0.995 && min > 0.95, "mean {mean}, min {min}");
}

#[test]
fn adding_an_occluder_never_brightens() {
    let floor = quad(DVec3::ZERO, DVec3::X * 5.0, DVec3::Y * 5.0);
    let mut covered = floor.clone();
    covered.merge(&quad(DVec3::new(0.3, 0.0, 0.8), DVec3::X * 0.5, DVec3::Y * 0.5));
    let open = Scene::new(floor);
    let shut = Scene::new(covered);
    let light = |t: &prt_core::ShVector9| 2.0 * PI.sqrt() * t[0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..20 {
        let p = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0);
        let a = bake_point(&open, p, DVec3::Z, 256, k);
        let b = bake_point(&shut, p, DVec3::Z, 256, k);
        // same directions, so visibility can only drop
        assert!(light(&b.transport) <= light(&a.transport) + 1e-12);
        assert!(b.ao <= a.ao);
    }
}

fn dataset_bytes(dir: &std::path::Path) -> Vec<Vec<u8>> {
    [files::MASK, files::ALBEDO, files::NORMAL, files::TRANSPORT, files::AO, files::MANIFEST]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn bake_all_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh_path = tmp.path().join("figure.obj");
    prt_core::scene::procedural::figure(1).write_obj(&mesh_path).unwrap();
    let config = BakeConfig { samples: 24, ..BakeConfig::default() };
    let mut outputs = Vec::new();
    for threads in [1, 2, 5] {
        let out = tmp.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| bake_all(&mesh_path, &config, 40, 0.05, &out)).unwrap();
        outputs.push(dataset_bytes(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    // and a different seed changes the transport
    let other = tmp.path().join("seed8");
    bake_all(&mesh_path, &BakeConfig { seed: 8, ..config }, 40, 0.05, &other).unwrap();
    assert_ne!(dataset_bytes(&other)[3], outputs[0][3]);
    assert_eq!(dataset_bytes(&other)[0], outputs[0][0]);
}

#[test]
fn transport_and_ao_are_zero_outside_the_mask() {
    let scene = Scene::new(uv_sphere(DVec3::ZERO, 1.0, 24, 12));
    let baked = bake_scene(&scene, 24, 0.1, &BakeConfig { samples: 16, ..BakeConfig::default() }).unwrap();
    let mask: &MapImage = &baked.gbuffer.mask;
    for y in 0..24 {
        for x in 0..24 {
            if !mask.is_set(x, y) {
                assert!(baked.transport.pixel(x, y).iter().all(|v| *v == 0.0));
                assert_eq!(baked.ao.pixel(x, y), &[0.0]);
            }
        }
    }
}
