use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use glam::{DVec2, DVec3};

use crate::error::{Error, Result};
use crate::maps::srgb_to_linear;

/// Albedo used when a mesh carries neither colors nor a material.
pub const DEFAULT_ALBEDO: [f64; 3] = [0.75, 0.75, 0.75];

/// Linear-RGB diffuse texture.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub width: usize,
    pub height: usize,
    pub texels: Vec<[f32; 3]>,
}

impl Texture {
    /// Decode an sRGB image file into linear texels.
    pub fn load(path: &Path) -> Result<Texture> {
        let img = image::open(path)?.to_rgb8();
        let (width, height) = (img.width() as usize, img.height() as usize);
        let texels = img
            .pixels()
            .map(|p| p.0.map(|c| srgb_to_linear(f32::from(c) / 255.0)))
            .collect();
        Ok(Texture { width, height, texels })
    }

    fn texel(&self, x: i64, y: i64) -> [f32; 3] {
        let x = x.rem_euclid(self.width as i64) as usize;
        let y = y.rem_euclid(self.height as i64) as usize;
        self.texels[y * self.width + x]
    }

    /// Bilinear lookup with repeat wrapping. `v = 0` is the bottom row, as in OBJ.
    pub fn sample(&self, uv: DVec2) -> [f64; 3] {
        let s = uv.x * self.width as f64 - 0.5;
        let t = (1.0 - uv.y) * self.height as f64 - 0.5;
        let (x0, y0) = (s.floor(), t.floor());
        let (fx, fy) = (s - x0, t - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let mut out = [0.0; 3];
        for (dx, dy, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let t = self.texel(x0 + dx, y0 + dy);
            for c in 0..3 {
                out[c] += w * f64::from(t[c]);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    /// Linear diffuse color, used when there is no texture.
    pub diffuse: [f64; 3],
    pub texture: Option<Arc<Texture>>,
}

impl Default for Material {
    fn default() -> Self {
        Material { diffuse: DEFAULT_ALBEDO, texture: None }
    }
}

/// Indexed triangle mesh with per-vertex normals and an albedo source.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub positions: Vec<DVec3>,
    pub normals: Vec<DVec3>,
    pub triangles: Vec<[u32; 3]>,
    pub uvs: Option<Vec<DVec2>>,
    /// Linear per-vertex colors; take precedence over untextured materials.
    pub colors: Option<Vec<[f64; 3]>>,
    pub materials: Vec<Material>,
    /// Index into `materials` per triangle.
    pub material_ids: Vec<u32>,
}

impl TriMesh {
    /// A mesh with computed normals and the default gray material.
    pub fn from_triangles(positions: Vec<DVec3>, triangles: Vec<[u32; 3]>) -> Result<TriMesh> {
        let normals = area_weighted_normals(&positions, &triangles);
        let n = triangles.len();
        let mesh = TriMesh {
            positions,
            normals,
            triangles,
            uvs: None,
            colors: None,
            materials: vec![Material::default()],
            material_ids: vec![0; n],
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        let nv = self.positions.len();
        if self.normals.len() != nv {
            return Err(Error::Mesh(format!("{} normals for {nv} vertices", self.normals.len())));
        }
        if let Some(uv) = &self.uvs {
            if uv.len() != nv {
                return Err(Error::Mesh("uv count differs from vertex count".into()));
            }
        }
        if let Some(c) = &self.colors {
            if c.len() != nv {
                return Err(Error::Mesh("color count differs from vertex count".into()));
            }
        }
        if self.material_ids.len() != self.triangles.len() {
            return Err(Error::Mesh("material id count differs from triangle count".into()));
        }
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i as usize >= nv)) {
            return Err(Error::Mesh(format!("triangle {t:?} indexes past {nv} vertices")));
        }
        if self.material_ids.iter().any(|&m| m as usize >= self.materials.len()) {
            return Err(Error::Mesh("material id out of range".into()));
        }
        if let Some(n) = self.normals.iter().find(|n| (n.length() - 1.0).abs() > 1e-3) {
            return Err(Error::Mesh(format!("vertex normal {n} is not unit length")));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (DVec3, DVec3) {
        self.positions.iter().fold(
            (DVec3::splat(f64::INFINITY), DVec3::splat(f64::NEG_INFINITY)),
            |(lo, hi), &p| (lo.min(p), hi.max(p)),
        )
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Append another mesh, remapping indices and materials. Albedo sources
    /// are reconciled by baking untextured materials into vertex colors when
    /// only one side has colors.
    pub fn merge(&mut self, other: &TriMesh) {
        let base = self.positions.len() as u32;
        let mat_base = self.materials.len() as u32;
        match (&mut self.colors, &other.colors) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(a), None) => a.extend(vertex_colors_from_materials(other)),
            (None, Some(b)) => {
                let mut mine = vertex_colors_from_materials(self);
                mine.extend_from_slice(b);
                self.colors = Some(mine);
            }
            (None, None) => {}
        }
        match (&mut self.uvs, &other.uvs) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(a), None) => a.extend(std::iter::repeat_n(DVec2::ZERO, other.positions.len())),
            (None, Some(b)) => {
                let mut mine = vec![DVec2::ZERO; self.positions.len()];
                mine.extend_from_slice(b);
                self.uvs = Some(mine);
            }
            (None, None) => {}
        }
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
        self.materials.extend(other.materials.iter().cloned());
        self.material_ids.extend(other.material_ids.iter().map(|m| m + mat_base));
    }

    /// Linear albedo at barycentric `(u, v)` inside triangle `tri`.
    pub fn albedo_at(&self, tri: usize, u: f64, v: f64) -> [f64; 3] {
        let [a, b, c] = self.triangles[tri].map(|i| i as usize);
        let w = 1.0 - u - v;
        let material = &self.materials[self.material_ids[tri] as usize];
        if let (Some(tex), Some(uvs)) = (&material.texture, &self.uvs) {
            return tex.sample(uvs[a] * w + uvs[b] * u + uvs[c] * v);
        }
        if let Some(colors) = &self.colors {
            return std::array::from_fn(|k| colors[a][k] * w + colors[b][k] * u + colors[c][k] * v);
        }
        material.diffuse
    }

    /// Interpolated, renormalized shading normal.
    pub fn normal_at(&self, tri: usize, u: f64, v: f64) -> DVec3 {
        let [a, b, c] = self.triangles[tri].map(|i| i as usize);
        let n = self.normals[a] * (1.0 - u - v) + self.normals[b] * u + self.normals[c] * v;
        n.try_normalize().unwrap_or_else(|| self.face_normal(tri))
    }

    pub fn position_at(&self, tri: usize, u: f64, v: f64) -> DVec3 {
        let [a, b, c] = self.triangles[tri].map(|i| i as usize);
        self.positions[a] * (1.0 - u - v) + self.positions[b] * u + self.positions[c] * v
    }

    pub fn face_normal(&self, tri: usize) -> DVec3 {
        let [a, b, c] = self.triangles[tri].map(|i| self.positions[i as usize]);
        (b - a).cross(c - a).try_normalize().unwrap_or(DVec3::Z)
    }

    /// Write a Wavefront OBJ with positions, normals and, if present,
    /// per-vertex colors (as `v x y z r g b`).
    pub fn write_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for (i, p) in self.positions.iter().enumerate() {
                match &self.colors {
                    Some(c) => writeln!(w, "v {} {} {} {} {} {}", p.x, p.y, p.z, c[i][0], c[i][1], c[i][2])?,
                    None => writeln!(w, "v {} {} {}", p.x, p.y, p.z)?,
                }
            }
            for n in &self.normals {
                writeln!(w, "vn {} {} {}", n.x, n.y, n.z)?;
            }
            for t in &self.triangles {
                let [a, b, c] = t.map(|i| i + 1);
                writeln!(w, "f {a}//{a} {b}//{b} {c}//{c}")?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

fn vertex_colors_from_materials(mesh: &TriMesh) -> Vec<[f64; 3]> {
    let mut colors = vec![DEFAULT_ALBEDO; mesh.positions.len()];
    for (t, &m) in mesh.triangles.iter().zip(&mesh.material_ids) {
        for &i in t {
            colors[i as usize] = mesh.materials[m as usize].diffuse;
        }
    }
    colors
}

/// Vertex normals as the area-weighted sum of adjacent face normals.
pub fn area_weighted_normals(positions: &[DVec3], triangles: &[[u32; 3]]) -> Vec<DVec3> {
    let mut acc = vec![DVec3::ZERO; positions.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| positions[i as usize]);
        // the cross product's length is twice the area
        let n = (b - a).cross(c - a);
        for &i in t {
            acc[i as usize] += n;
        }
    }
    acc.into_iter().map(|n| n.try_normalize().unwrap_or(DVec3::Z)).collect()
}

/// Load an OBJ (with optional MTL) into a single triangulated mesh.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let options = tobj::LoadOptions { triangulate: true, single_index: true, ..Default::default() };
    let (models, materials) =
        tobj::load_obj(path, &options).map_err(|e| Error::Mesh(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let obj_materials = materials.unwrap_or_else(|e| {
        log::warn!("{}: ignoring materials: {e}", path.display());
        Vec::new()
    });
    let mut materials = vec![Material::default()];
    for m in &obj_materials {
        let diffuse = m.diffuse.map(|d| d.map(f64::from)).unwrap_or(DEFAULT_ALBEDO);
        let texture = match &m.diffuse_texture {
            Some(name) => Some(Arc::new(Texture::load(&base_dir.join(name))?)),
            None => None,
        };
        materials.push(Material { diffuse, texture });
    }

    let any_colors = models.iter().any(|m| !m.mesh.vertex_color.is_empty());
    let any_uvs = models.iter().any(|m| !m.mesh.texcoords.is_empty());
    let all_normals = models.iter().all(|m| m.mesh.normals.len() == m.mesh.positions.len());

    let mut mesh = TriMesh {
        positions: Vec::new(),
        normals: Vec::new(),
        triangles: Vec::new(),
        uvs: any_uvs.then(Vec::new),
        colors: any_colors.then(Vec::new),
        materials,
        material_ids: Vec::new(),
    };
    for model in &models {
        let m = &model.mesh;
        let base = mesh.positions.len() as u32;
        let nv = m.positions.len() / 3;
        mesh.positions.extend(m.positions.chunks_exact(3).map(|p| DVec3::new(p[0].into(), p[1].into(), p[2].into())));
        if all_normals {
            mesh.normals.extend(
                m.normals
                    .chunks_exact(3)
                    .map(|n| DVec3::new(n[0].into(), n[1].into(), n[2].into()).try_normalize().unwrap_or(DVec3::Z)),
            );
        }
        if let Some(uvs) = &mut mesh.uvs {
            if m.texcoords.len() == nv * 2 {
                uvs.extend(m.texcoords.chunks_exact(2).map(|t| DVec2::new(t[0].into(), t[1].into())));
            } else {
                uvs.extend(std::iter::repeat_n(DVec2::ZERO, nv));
            }
        }
        if let Some(colors) = &mut mesh.colors {
            if m.vertex_color.len() == nv * 3 {
                colors.extend(m.vertex_color.chunks_exact(3).map(|c| [c[0].into(), c[1].into(), c[2].into()]));
            } else {
                colors.extend(std::iter::repeat_n(DEFAULT_ALBEDO, nv));
            }
        }
        let material = m.material_id.map_or(0, |id| id as u32 + 1);
        for t in m.indices.chunks_exact(3) {
            mesh.triangles.push([t[0] + base, t[1] + base, t[2] + base]);
            mesh.material_ids.push(material);
        }
    }
    if !all_normals {
        mesh.normals = area_weighted_normals(&mesh.positions, &mesh.triangles);
    }
    mesh.validate()?;
    Ok(mesh)
}
