use glam::DVec3;
use rayon::prelude::*;

use super::{CameraFrame, Scene};
use crate::maps::{MapImage, MapKind};

/// Per-pixel geometry produced by one primary ray per pixel center.
#[derive(Clone, Debug)]
pub struct GBuffer {
    pub mask: MapImage,
    /// Camera-space unit normals, +z toward the viewer; zero off the mask.
    pub normal: MapImage,
    /// Linear RGB.
    pub albedo: MapImage,
    /// World-space hit points.
    pub position: MapImage,
}

impl GBuffer {
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }
}

struct Sample {
    normal: DVec3,
    albedo: [f64; 3],
    position: DVec3,
}

fn cast(scene: &Scene, camera: &CameraFrame, x: usize, y: usize) -> Option<Sample> {
    let hit = scene.closest_hit(camera.ray_origin(x, y), -DVec3::Z)?;
    let mesh = &scene.mesh;
    let mut normal = mesh.normal_at(hit.triangle, hit.u, hit.v);
    // open surfaces seen from behind are shaded as two-sided
    if mesh.face_normal(hit.triangle).z < 0.0 {
        normal = -normal;
    }
    Some(Sample {
        normal,
        albedo: mesh.albedo_at(hit.triangle, hit.u, hit.v),
        position: mesh.position_at(hit.triangle, hit.u, hit.v),
    })
}

/// Ray-cast the scene through an orthographic camera looking down −z.
pub fn rasterize_gbuffer(scene: &Scene, camera: &CameraFrame) -> GBuffer {
    let n = camera.size;
    let rows: Vec<Vec<Option<Sample>>> =
        (0..n).into_par_iter().map(|y| (0..n).map(|x| cast(scene, camera, x, y)).collect()).collect();

    let mut mask = Vec::with_capacity(n * n);
    let mut normal = Vec::with_capacity(n * n * 3);
    let mut albedo = Vec::with_capacity(n * n * 3);
    let mut position = Vec::with_capacity(n * n * 3);
    for s in rows.iter().flatten() {
        match s {
            Some(s) => {
                mask.push(1.0);
                normal.extend(s.normal.to_array().map(|v| v as f32));
                albedo.extend(s.albedo.map(|v| v as f32));
                position.extend(s.position.to_array().map(|v| v as f32));
            }
            None => {
                mask.push(0.0);
                normal.extend([0.0; 3]);
                albedo.extend([0.0; 3]);
                position.extend([0.0; 3]);
            }
        }
    }
    let build = |c, kind, data| MapImage::new(n, n, c, kind, data).expect("rasterizer output is well formed");
    GBuffer {
        mask: build(1, MapKind::Mask, mask),
        normal: build(3, MapKind::Normal, normal),
        albedo: build(3, MapKind::Albedo, albedo),
        position: build(3, MapKind::Position, position),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{frame_camera, procedural};

    #[test]
    fn full_screen_quad() {
        let mesh = procedural::quad(DVec3::ZERO, DVec3::X, DVec3::Y);
        let scene = Scene::new(mesh);
        let cam = frame_camera(&scene.mesh, 16, 0.0).unwrap();
        let g = rasterize_gbuffer(&scene, &cam);
        assert_eq!(g.mask.count_set(), 256);
        assert!(g.normal.pixels().all(|p| p == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn sphere_is_a_disc_with_centered_normal() {
        let scene = Scene::new(procedural::uv_sphere(DVec3::ZERO, 1.0, 64, 32));
        let cam = frame_camera(&scene.mesh, 65, 0.1).unwrap();
        let g = rasterize_gbuffer(&scene, &cam);
        let c = g.normal.pixel(32, 32);
        assert!((c[2] - 1.0).abs() < 1e-3, "{c:?}");
        assert!(!g.mask.is_set(0, 0));
        assert_eq!(g.normal.pixel(0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(g.albedo.pixel(0, 0), [0.0, 0.0, 0.0]);
        let area = g.mask.count_set() as f64;
        let r = cam.scale;
        assert!((area / (std::f64::consts::PI * r * r) - 1.0).abs() < 0.05);
    }
}
