//! Built-in test geometry: quads, boxes, spheres, a 90° wedge and a
//! capsule-assembly figure with armpit and crotch concavities.

use std::f64::consts::PI;

use glam::DVec3;

use super::mesh::{Material, TriMesh};

fn assemble(positions: Vec<DVec3>, normals: Vec<DVec3>, triangles: Vec<[u32; 3]>) -> TriMesh {
    let n = triangles.len();
    TriMesh {
        positions,
        normals,
        triangles,
        uvs: None,
        colors: None,
        materials: vec![Material::default()],
        material_ids: vec![0; n],
    }
}

/// Paint every vertex with one linear color.
pub fn with_color(mut mesh: TriMesh, rgb: [f64; 3]) -> TriMesh {
    mesh.colors = Some(vec![rgb; mesh.positions.len()]);
    mesh
}

/// Parallelogram `center ± u ± v`, facing `u × v`.
pub fn quad(center: DVec3, u: DVec3, v: DVec3) -> TriMesh {
    let n = u.cross(v).normalize();
    let p = vec![center - u - v, center + u - v, center + u + v, center - u + v];
    assemble(p, vec![n; 4], vec![[0, 1, 2], [0, 2, 3]])
}

/// Axis-aligned box with outward flat normals.
pub fn box_mesh(min: DVec3, max: DVec3) -> TriMesh {
    let c = (min + max) * 0.5;
    let h = (max - min) * 0.5;
    let faces = [
        (DVec3::X, DVec3::Y, DVec3::Z),
        (-DVec3::X, DVec3::Z, DVec3::Y),
        (DVec3::Y, DVec3::Z, DVec3::X),
        (-DVec3::Y, DVec3::X, DVec3::Z),
        (DVec3::Z, DVec3::X, DVec3::Y),
        (-DVec3::Z, DVec3::Y, DVec3::X),
    ];
    let mut out: Option<TriMesh> = None;
    for (n, u, v) in faces {
        let face = quad(c + n * h, u * h, v * h);
        debug_assert!(face.normals[0].dot(n) > 0.0);
        match &mut out {
            Some(m) => m.merge(&face),
            None => out = Some(face),
        }
    }
    let mut mesh = out.unwrap();
    mesh.materials.truncate(1);
    mesh.material_ids.iter_mut().for_each(|m| *m = 0);
    mesh
}

/// UV sphere with smooth normals.
pub fn uv_sphere(center: DVec3, radius: f64, segments: usize, rings: usize) -> TriMesh {
    let segments = segments.max(3);
    let rings = rings.max(2);
    let mut p = Vec::new();
    let mut n = Vec::new();
    for r in 0..=rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..=segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            let d = DVec3::new(theta.sin() * phi.cos(), theta.cos(), -theta.sin() * phi.sin());
            p.push(center + d * radius);
            n.push(d);
        }
    }
    let row = segments as u32 + 1;
    let mut t = Vec::new();
    for r in 0..rings as u32 {
        for s in 0..segments as u32 {
            let (a, b, c, d) = (r * row + s, r * row + s + 1, (r + 1) * row + s, (r + 1) * row + s + 1);
            if r != 0 {
                t.push([a, c, b]);
            }
            if r + 1 != rings as u32 {
                t.push([b, c, d]);
            }
        }
    }
    assemble(p, n, t)
}

/// Capsule between `a` and `b`: a tube with hemispherical caps.
pub fn capsule(a: DVec3, b: DVec3, radius: f64, segments: usize, rings: usize) -> TriMesh {
    let axis = (b - a).normalize();
    let len = (b - a).length();
    let helper = if axis.x.abs() < 0.9 { DVec3::X } else { DVec3::Y };
    let e1 = axis.cross(helper).normalize();
    let e2 = axis.cross(e1);
    let segments = segments.max(3);
    let cap_rings = (rings / 2).max(2);
    // latitude rings from the `b` pole down to the `a` pole
    let mut lats: Vec<(f64, f64)> = Vec::new(); // (offset along axis, polar angle from +axis)
    for r in 0..=cap_rings {
        lats.push((len, PI * 0.5 * r as f64 / cap_rings as f64));
    }
    for r in 0..=cap_rings {
        lats.push((0.0, PI * 0.5 + PI * 0.5 * r as f64 / cap_rings as f64));
    }
    let mut p = Vec::new();
    let mut n = Vec::new();
    for &(off, theta) in &lats {
        for s in 0..=segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            let d = axis * theta.cos() + (e1 * phi.cos() + e2 * phi.sin()) * theta.sin();
            p.push(a + axis * off + d * radius);
            n.push(d);
        }
    }
    let row = segments as u32 + 1;
    let last = lats.len() as u32 - 1;
    let mut t = Vec::new();
    for r in 0..last {
        for s in 0..segments as u32 {
            let (i0, i1, i2, i3) = (r * row + s, r * row + s + 1, (r + 1) * row + s, (r + 1) * row + s + 1);
            if r != 0 {
                t.push([i0, i1, i2]);
            }
            if r + 1 != last {
                t.push([i1, i3, i2]);
            }
        }
    }
    let mut mesh = assemble(p, n, t);
    // winding so that geometric normals agree with the outward normals
    let flip = mesh.triangles.iter().position(|tri| {
        let [x, y, z] = tri.map(|i| mesh.positions[i as usize]);
        (y - x).cross(z - x).length() > 0.0
    });
    if let Some(i) = flip {
        if mesh.face_normal(i).dot(mesh.normals[mesh.triangles[i][0] as usize]) < 0.0 {
            mesh.triangles.iter_mut().for_each(|tri| tri.swap(1, 2));
        }
    }
    mesh
}

/// Two `width × height` quads meeting at a right angle along the y axis,
/// opening toward +z. Face A (x > 0) faces `(−1, 0, 1)/√2`, face B (x < 0)
/// faces `(1, 0, 1)/√2`.
pub fn wedge(width: f64, height: f64) -> TriMesh {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let out_a = DVec3::new(s, 0.0, s);
    let out_b = DVec3::new(-s, 0.0, s);
    let up = DVec3::Y * (height * 0.5);
    let mut a = quad(out_a * (width * 0.5), out_a * (width * 0.5), up);
    let b = quad(out_b * (width * 0.5), up, out_b * (width * 0.5));
    a.merge(&b);
    a.materials.truncate(1);
    a.material_ids.iter_mut().for_each(|m| *m = 0);
    a
}

/// A standing, roughly human-proportioned assembly of capsules and a
/// sphere, 1.8 units tall. `detail` scales the tessellation; triangle
/// count grows as `detail²`.
pub fn figure(detail: usize) -> TriMesh {
    let seg = 8 * detail.max(1);
    let rings = 4 * detail.max(1);
    let skin = [0.62, 0.45, 0.36];
    let shirt = [0.15, 0.28, 0.55];
    let pants = [0.18, 0.18, 0.2];
    let parts = [
        // legs, close together
        (capsule(DVec3::new(-0.1, 0.1, 0.0), DVec3::new(-0.09, 0.82, 0.0), 0.085, seg, rings), pants),
        (capsule(DVec3::new(0.1, 0.1, 0.0), DVec3::new(0.09, 0.82, 0.0), 0.085, seg, rings), pants),
        // torso
        (capsule(DVec3::new(0.0, 0.9, 0.0), DVec3::new(0.0, 1.36, 0.0), 0.17, seg, rings), shirt),
        // arms hanging beside the torso
        (capsule(DVec3::new(-0.27, 0.8, 0.02), DVec3::new(-0.24, 1.38, 0.0), 0.06, seg, rings), shirt),
        (capsule(DVec3::new(0.27, 0.8, 0.02), DVec3::new(0.24, 1.38, 0.0), 0.06, seg, rings), shirt),
        // neck and head
        (capsule(DVec3::new(0.0, 1.45, 0.0), DVec3::new(0.0, 1.58, 0.0), 0.05, seg, rings), skin),
        (uv_sphere(DVec3::new(0.0, 1.68, 0.0), 0.11, seg, rings), skin),
        // feet
        (capsule(DVec3::new(-0.1, 0.045, 0.0), DVec3::new(-0.11, 0.045, 0.14), 0.045, seg, rings), pants),
        (capsule(DVec3::new(0.1, 0.045, 0.0), DVec3::new(0.11, 0.045, 0.14), 0.045, seg, rings), pants),
    ];
    let mut out: Option<TriMesh> = None;
    for (part, color) in parts {
        let part = with_color(part, color);
        match &mut out {
            Some(m) => m.merge(&part),
            None => out = Some(part),
        }
    }
    let mut mesh = out.unwrap();
    mesh.materials.truncate(1);
    mesh.material_ids.iter_mut().for_each(|m| *m = 0);
    mesh
}

/// Smallest `detail` for which [`figure`] has at least `triangles` triangles.
pub fn figure_detail_for(triangles: usize) -> usize {
    (1..).find(|&d| figure(d).triangle_count() >= triangles).unwrap()
}

/// Scenes used by the demo: a lone sphere, a sphere floating in a wedge,
/// and the figure.
pub fn demo_scenes() -> Vec<(&'static str, TriMesh)> {
    let sphere = with_color(uv_sphere(DVec3::ZERO, 1.0, 48, 24), [0.8, 0.55, 0.4]);
    let mut sphere_wedge = with_color(wedge(2.0, 2.0), [0.7, 0.7, 0.7]);
    sphere_wedge.merge(&with_color(uv_sphere(DVec3::new(0.0, 0.0, 0.7), 0.35, 40, 20), [0.3, 0.5, 0.8]));
    sphere_wedge.materials.truncate(1);
    sphere_wedge.material_ids.iter_mut().for_each(|m| *m = 0);
    vec![("sphere", sphere), ("sphere_wedge", sphere_wedge), ("figure", figure(2))]
}
