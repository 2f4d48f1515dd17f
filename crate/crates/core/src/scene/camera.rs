use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::{Error, Result};

pub const DEFAULT_SIZE: usize = 1024;
pub const DEFAULT_PADDING: f64 = 0.05;
pub const MAX_PADDING: f64 = 0.45;

/// Orthographic framing: the camera looks down −z with +y up, so camera
/// space and world space share axes and normals keep +z toward the viewer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    /// Square image side in pixels.
    pub size: usize,
    /// Pixels per world unit.
    pub scale: f64,
    /// World-space (x, y) that lands on the image center.
    pub center: [f64; 2],
    /// z of the primary-ray origins, in front of the whole mesh.
    pub eye_z: f64,
}

impl CameraFrame {
    /// World (x, y) at the center of pixel `(px, py)`; row 0 is the top.
    pub fn pixel_center(&self, px: usize, py: usize) -> DVec2 {
        let half = self.size as f64 * 0.5;
        DVec2::new(
            self.center[0] + (px as f64 + 0.5 - half) / self.scale,
            self.center[1] + (half - (py as f64 + 0.5)) / self.scale,
        )
    }

    /// Continuous pixel coordinates of a world point (x right, y down).
    pub fn project(&self, p: DVec3) -> DVec2 {
        let half = self.size as f64 * 0.5;
        DVec2::new(
            half + (p.x - self.center[0]) * self.scale,
            half - (p.y - self.center[1]) * self.scale,
        )
    }

    pub fn ray_origin(&self, px: usize, py: usize) -> DVec3 {
        let c = self.pixel_center(px, py);
        DVec3::new(c.x, c.y, self.eye_z)
    }
}

/// Fit the mesh so its vertical extent spans `(1 − 2·padding)` of the image
/// height, centered. A mesh wider than tall is fit by its width instead so
/// it stays inside the frame.
pub fn frame_camera(mesh: &TriMesh, size: usize, padding: f64) -> Result<CameraFrame> {
    if !(0.0..=MAX_PADDING).contains(&padding) {
        return Err(Error::invalid(format!("padding {padding} outside [0, {MAX_PADDING}]")));
    }
    if size == 0 {
        return Err(Error::invalid("image size must be positive"));
    }
    let (lo, hi) = mesh.bounds();
    let extent = hi - lo;
    if !(extent.y > 0.0) || !extent.is_finite() {
        return Err(Error::invalid("mesh has zero height; cannot frame it"));
    }
    let span = extent.y.max(extent.x);
    let scale = (1.0 - 2.0 * padding) * size as f64 / span;
    let depth_margin = extent.length().max(1e-6);
    Ok(CameraFrame {
        size,
        scale,
        center: [(lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5],
        eye_z: hi.z + depth_margin,
    })
}
