//! Meshes, ray queries and orthographic G-buffer rasterization.

pub mod bvh;
pub mod camera;
pub mod mesh;
pub mod procedural;
pub mod raster;

use glam::DVec3;

pub use bvh::{Aabb, Bvh, Hit, Triangle};
pub use camera::{frame_camera, CameraFrame, DEFAULT_PADDING, DEFAULT_SIZE};
pub use mesh::{load_mesh, Material, Texture, TriMesh};
pub use raster::{rasterize_gbuffer, GBuffer};

/// Default shadow-ray offset as a fraction of the scene's bounding-box diagonal.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-4;

/// A mesh with its hierarchy and the shadow-ray offset derived from its size.
#[derive(Clone, Debug)]
pub struct Scene {
    pub mesh: TriMesh,
    pub bvh: Bvh,
    /// Absolute offset applied along the surface normal before shadow tests.
    pub epsilon: f64,
}

impl Scene {
    pub fn new(mesh: TriMesh) -> Scene {
        Scene::with_epsilon_scale(mesh, DEFAULT_EPSILON_SCALE)
    }

    pub fn with_epsilon_scale(mesh: TriMesh, epsilon_scale: f64) -> Scene {
        let tris: Vec<Triangle> = mesh
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| mesh.positions[i as usize]);
                Triangle::new(a, b, c)
            })
            .collect();
        let bvh = Bvh::build(&tris);
        let epsilon = epsilon_scale * bvh.bounds().diagonal();
        Scene { mesh, bvh, epsilon }
    }

    /// Whether a shadow ray leaving `origin` (offset by `epsilon` along
    /// `normal`) in direction `dir` hits anything.
    #[inline]
    pub fn occluded(&self, origin: DVec3, normal: DVec3, dir: DVec3) -> bool {
        self.bvh.occluded(origin + normal * self.epsilon, dir, f64::INFINITY)
    }

    pub fn closest_hit(&self, origin: DVec3, dir: DVec3) -> Option<Hit> {
        self.bvh.closest_hit(origin, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_face_rays() {
        let scene = Scene::new(procedural::box_mesh(DVec3::splat(-1.0), DVec3::splat(1.0)));
        let p = DVec3::new(0.2, 0.3, 1.0);
        assert!(!scene.occluded(p, DVec3::Z, DVec3::Z));
        assert!(!scene.occluded(p, DVec3::Z, DVec3::new(1.0, 0.0, 1.0).normalize()));
        // grazing its own face
        assert!(!scene.occluded(p, DVec3::Z, DVec3::X));
    }

    #[test]
    fn inside_a_closed_box_everything_is_blocked() {
        let scene = Scene::new(procedural::box_mesh(DVec3::splat(-1.0), DVec3::splat(1.0)));
        let mut rng = 0x1234_5678u64;
        for _ in 0..500 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (rng >> 11) as f64 / (1u64 << 53) as f64;
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = (rng >> 11) as f64 / (1u64 << 53) as f64;
            let d = crate::sampling::uniform_sphere(u, v);
            assert!(scene.occluded(DVec3::new(0.1, -0.2, 0.3), DVec3::Y, d));
        }
    }
}
