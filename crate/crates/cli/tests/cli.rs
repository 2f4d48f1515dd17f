use std::path::Path;
use std::process::{Command, Output};

use prt_core::baker::files;
use prt_core::maps::{write_map, MapImage, MapKind, ShLight};

fn prt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prt")).args(args).output().expect("spawn prt")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CUBE: &str = "\
v -1 -1 -1\nv 1 -1 -1\nv 1 1 -1\nv -1 1 -1\nv -1 -1 1\nv 1 -1 1\nv 1 1 1\nv -1 1 1
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 4 7 3\nf 4 8 7\nf 1 5 8\nf 1 8 4\nf 2 3 7\nf 2 7 6
";

fn write_cube(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cube.obj");
    std::fs::write(&path, CUBE).unwrap();
    path
}

#[test]
fn bake_writes_maps_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = write_cube(tmp.path());
    let out = tmp.path().join("d");
    let o = prt(&["bake", "--mesh", s(&mesh), "--size", "32", "--samples", "16", "--seed", "7", "--out", s(&out), "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [files::MASK, files::ALBEDO, files::NORMAL, files::TRANSPORT, files::AO, files::MANIFEST] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join(files::MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["config"]["samples"], 16);
    assert_eq!(manifest["hashes"].as_object().unwrap().len(), 6);
}

#[test]
fn bake_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = write_cube(tmp.path());
    let run = |threads: &str| {
        let out = tmp.path().join(format!("t{threads}"));
        let o = prt(&["--threads", threads, "bake", "--mesh", s(&mesh), "--size", "48", "--samples", "32", "--out", s(&out), "-q"]);
        assert!(o.status.success());
        [files::TRANSPORT, files::AO, files::MASK, files::MANIFEST].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn relight_size_mismatch_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_map(&MapImage::zeros(8, 6, MapKind::Albedo), d.join("albedo.mapb")).unwrap();
    write_map(&MapImage::zeros(5, 7, MapKind::Transport), d.join("transport.mapb")).unwrap();
    write_map(&MapImage::zeros(8, 6, MapKind::Mask), d.join("mask.png")).unwrap();
    ShLight::constant("white", [1.0; 3]).save(d.join("light.json")).unwrap();
    let o = prt(&[
        "relight",
        "--albedo",
        s(&d.join("albedo.mapb")),
        "--transport",
        s(&d.join("transport.mapb")),
        "--mask",
        s(&d.join("mask.png")),
        "--light",
        s(&d.join("light.json")),
        "--out",
        s(&d.join("out.png")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("8x6") && err.contains("5x7"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(prt(&["bake", "--bogus"]).status.code(), Some(1));
    assert_eq!(prt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(prt(&["envprep", "--in", "x", "--out", "y", "--target", "0.9:0.1"]).status.code(), Some(1));
    assert_eq!(prt(&["--threads", "0", "demo", "--out", "x"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let v = prt(&["--version"]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
    assert!(prt(&["--help"]).status.success());
    assert!(prt(&["relight", "--help"]).status.success());
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prt(&["bake", "--mesh", s(&tmp.path().join("nope.obj")), "--out", s(&tmp.path().join("d"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shade_then_estimate_recovers_the_light() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mesh = d.join("sphere.obj");
    prt_core::scene::procedural::uv_sphere(glam::DVec3::ZERO, 1.0, 24, 12).write_obj(&mesh).unwrap();
    let data = d.join("sphere");
    assert!(prt(&["bake", "--mesh", s(&mesh), "--size", "24", "--samples", "16", "--out", s(&data), "-q"]).status.success());
    let mut coeffs = [[0.0; 3]; 9];
    coeffs[0] = [1.0, 0.8, 0.6];
    coeffs[2] = [0.4, 0.3, 0.2];
    coeffs[3] = [0.1, -0.1, 0.05];
    ShLight::new("key", coeffs).unwrap().save(d.join("light.json")).unwrap();
    let shading = d.join("shading.pfm");
    let transport = data.join(files::TRANSPORT);
    let mask = data.join(files::MASK);
    let o = prt(&["shade", "--transport", s(&transport), "--mask", s(&mask), "--light", s(&d.join("light.json")), "--out", s(&shading)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let est = d.join("est.json");
    let o = prt(&["estimate-light", "--shading", s(&shading), "--transport", s(&transport), "--mask", s(&mask), "--out", s(&est)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = ShLight::load(s(&est)).unwrap();
    // shading and transport pass through f32 files
    for (a, b) in got.flat().iter().zip(ShLight::new("key", coeffs).unwrap().flat()) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn demo_produces_comparisons_and_is_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = tmp.path().join(format!("demo{threads}"));
        let o = prt(&["--threads", threads, "demo", "--out", s(&out), "--size", "48", "--samples", "16", "-q"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("1");
    let b = run("3");
    for scene in ["sphere", "sphere_wedge", "figure"] {
        for f in ["occluded.png", "unoccluded.png", "comparison.png", "report.json", files::TRANSPORT] {
            let pa = a.join(scene).join(f);
            assert!(pa.is_file(), "missing {}", pa.display());
            assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(b.join(scene).join(f)).unwrap(), "{scene}/{f}");
        }
    }
    assert_eq!(std::fs::read(a.join("lights.json")).unwrap(), std::fs::read(b.join("lights.json")).unwrap());
    assert!(a.join("figure/sweep/frame_011.png").is_file());
    assert!(a.join("transfer").read_dir().unwrap().count() == 2);
}
