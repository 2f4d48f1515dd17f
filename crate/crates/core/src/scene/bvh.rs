//! Binned-SAH bounding volume hierarchy over triangles, with any-hit and
//! closest-hit ray queries.

use glam::DVec3;

const BINS: usize = 16;
const MAX_LEAF: usize = 4;
/// Keeps traversal stacks within their fixed size.
const MAX_DEPTH: usize = 56;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb { min: DVec3::splat(f64::INFINITY), max: DVec3::splat(f64::NEG_INFINITY) };

    pub fn grow(&mut self, p: DVec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        self.min.cmple(o.min).all() && self.max.cmpge(o.max).all()
    }

    pub fn area(&self) -> f64 {
        let d = self.max - self.min;
        if d.min_element() < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).length()
    }

    /// Slab test; returns the entry distance when the box is hit within `[0, t_max]`.
    #[inline]
    fn hit(&self, origin: DVec3, inv_dir: DVec3, t_max: f64) -> Option<f64> {
        let t0 = (self.min - origin) * inv_dir;
        let t1 = (self.max - origin) * inv_dir;
        let near = t0.min(t1).max_element().max(0.0);
        let far = t0.max(t1).min_element().min(t_max);
        // tolerate rounding on tight, axis-aligned boxes
        (near <= far * (1.0 + 4.0 * f64::EPSILON)).then_some(near)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub v0: DVec3,
    pub e1: DVec3,
    pub e2: DVec3,
}

impl Triangle {
    pub fn new(a: DVec3, b: DVec3, c: DVec3) -> Self {
        Triangle { v0: a, e1: b - a, e2: c - a }
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::EMPTY;
        b.grow(self.v0);
        b.grow(self.v0 + self.e1);
        b.grow(self.v0 + self.e2);
        b
    }

    /// Möller-Trumbore. Returns `(t, u, v)` for hits with `t > 0`; both faces count.
    #[inline]
    pub fn intersect(&self, origin: DVec3, dir: DVec3) -> Option<(f64, f64, f64)> {
        let p = dir.cross(self.e2);
        let det = self.e1.dot(p);
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - self.v0;
        let u = s.dot(p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(self.e1);
        let v = dir.dot(q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = self.e2.dot(q) * inv;
        (t > 0.0).then_some((t, u, v))
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// First primitive for leaves, left child for interior nodes.
    start: u32,
    /// Primitive count; zero marks an interior node.
    count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Index of the triangle in the original input order.
    pub triangle: usize,
    pub u: f64,
    pub v: f64,
}

/// Immutable hierarchy; safe to query from any number of threads.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Triangle>,
    /// Original index of each entry of `tris`.
    order: Vec<u32>,
}

struct BuildItem {
    bounds: Aabb,
    centroid: DVec3,
    index: u32,
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Bvh {
        let mut items: Vec<BuildItem> = triangles
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let bounds = t.bounds();
                BuildItem { bounds, centroid: (bounds.min + bounds.max) * 0.5, index: i as u32 }
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len().max(1));
        nodes.push(Node { bounds: Aabb::EMPTY, start: 0, count: 0 });
        if !items.is_empty() {
            build_node(&mut nodes, 0, &mut items, 0, 0);
        }
        let order: Vec<u32> = items.iter().map(|it| it.index).collect();
        let tris = order.iter().map(|&i| triangles[i as usize]).collect();
        Bvh { nodes, tris, order }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// True if the ray hits any triangle at `0 < t < t_max`.
    pub fn occluded(&self, origin: DVec3, dir: DVec3, t_max: f64) -> bool {
        if self.tris.is_empty() {
            return false;
        }
        let inv = dir.recip();
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(origin, inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let range = node.start as usize..(node.start + node.count) as usize;
                if self.tris[range].iter().any(|t| matches!(t.intersect(origin, dir), Some((d, _, _)) if d < t_max)) {
                    return true;
                }
            } else {
                stack[sp] = node.start;
                stack[sp + 1] = node.start + 1;
                sp += 2;
            }
        }
        false
    }

    /// Nearest hit along the ray.
    pub fn closest_hit(&self, origin: DVec3, dir: DVec3) -> Option<Hit> {
        if self.tris.is_empty() {
            return None;
        }
        let inv = dir.recip();
        let mut best: Option<Hit> = None;
        let mut t_max = f64::INFINITY;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(origin, inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                for k in node.start..node.start + node.count {
                    if let Some((t, u, v)) = self.tris[k as usize].intersect(origin, dir) {
                        // ties go to the lower original index so results do not depend on build order
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && (self.order[k as usize] as usize) < b.triangle),
                        };
                        if better {
                            t_max = t;
                            best = Some(Hit { t, triangle: self.order[k as usize] as usize, u, v });
                        }
                    }
                }
            } else {
                let (l, r) = (node.start, node.start + 1);
                let dl = self.nodes[l as usize].bounds.hit(origin, inv, t_max);
                let dr = self.nodes[r as usize].bounds.hit(origin, inv, t_max);
                // push the farther child first so the nearer one is popped next
                match (dl, dr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (l, r) } else { (r, l) };
                        stack[sp] = far;
                        stack[sp + 1] = near;
                        sp += 2;
                    }
                    (Some(_), None) => {
                        stack[sp] = l;
                        sp += 1;
                    }
                    (None, Some(_)) => {
                        stack[sp] = r;
                        sp += 1;
                    }
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Check the structural invariants: every triangle appears exactly once
    /// and every box contains its children.
    pub fn validate(&self) -> bool {
        let mut seen = vec![false; self.tris.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.count > 0 {
                for k in node.start..node.start + node.count {
                    if seen[k as usize] || !node.bounds.contains(&self.tris[k as usize].bounds()) {
                        return false;
                    }
                    seen[k as usize] = true;
                }
            } else {
                for c in [node.start as usize, node.start as usize + 1] {
                    if !node.bounds.contains(&self.nodes[c].bounds) {
                        return false;
                    }
                    stack.push(c);
                }
            }
        }
        let mut sorted = self.order.clone();
        sorted.sort_unstable();
        seen.iter().all(|&s| s) && sorted.iter().enumerate().all(|(i, &o)| o as usize == i)
    }
}

fn build_node(nodes: &mut Vec<Node>, index: usize, items: &mut [BuildItem], offset: usize, depth: usize) {
    let bounds = items.iter().fold(Aabb::EMPTY, |b, it| b.union(&it.bounds));
    nodes[index].bounds = bounds;
    let len = items.len();
    let leaf = |nodes: &mut Vec<Node>| {
        nodes[index].start = offset as u32;
        nodes[index].count = len as u32;
    };
    if items.len() <= MAX_LEAF || depth >= MAX_DEPTH {
        return leaf(nodes);
    }
    let mut cbounds = Aabb::EMPTY;
    for it in items.iter() {
        cbounds.grow(it.centroid);
    }
    let extent = cbounds.max - cbounds.min;

    let mut best: Option<(f64, usize, usize)> = None; // (cost, axis, split bin)
    for axis in 0..3 {
        if extent[axis] <= 0.0 {
            continue;
        }
        let mut counts = [0usize; BINS];
        let mut boxes = [Aabb::EMPTY; BINS];
        let scale = BINS as f64 / extent[axis];
        for it in items.iter() {
            let b = (((it.centroid[axis] - cbounds.min[axis]) * scale) as usize).min(BINS - 1);
            counts[b] += 1;
            boxes[b] = boxes[b].union(&it.bounds);
        }
        let mut right_area = [0.0; BINS];
        let mut right_count = [0usize; BINS];
        let (mut acc, mut n) = (Aabb::EMPTY, 0);
        for b in (1..BINS).rev() {
            acc = acc.union(&boxes[b]);
            n += counts[b];
            right_area[b] = acc.area();
            right_count[b] = n;
        }
        let (mut acc, mut n) = (Aabb::EMPTY, 0);
        for split in 1..BINS {
            acc = acc.union(&boxes[split - 1]);
            n += counts[split - 1];
            if n == 0 || right_count[split] == 0 {
                continue;
            }
            let cost = acc.area() * n as f64 + right_area[split] * right_count[split] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, split));
            }
        }
    }

    let parent_area = bounds.area().max(f64::MIN_POSITIVE);
    let split = best.and_then(|(cost, axis, split)| {
        let sah = TRAVERSAL_COST + INTERSECT_COST * cost / parent_area;
        let as_leaf = INTERSECT_COST * items.len() as f64;
        (sah < as_leaf || items.len() > 4 * MAX_LEAF).then_some((axis, split))
    });
    let mid = match split {
        Some((axis, split)) => {
            let scale = BINS as f64 / extent[axis];
            let lo = cbounds.min[axis];
            partition(items, |it| ((((it.centroid[axis] - lo) * scale) as usize).min(BINS - 1)) < split)
        }
        None if extent.max_element() > 0.0 => {
            // every centroid in one bin or SAH declined: median split on the widest axis
            let axis = (0..3).fold(0, |best, a| if extent[a] > extent[best] { a } else { best });
            let mid = items.len() / 2;
            items.select_nth_unstable_by(mid, |a, b| {
                a.centroid[axis].total_cmp(&b.centroid[axis]).then(a.index.cmp(&b.index))
            });
            mid
        }
        None => {
            if items.len() <= 4 * MAX_LEAF {
                return leaf(nodes);
            }
            // coincident centroids: split by count to bound leaf size
            items.len() / 2
        }
    };
    if mid == 0 || mid == items.len() {
        return leaf(nodes);
    }
    let left = nodes.len();
    nodes.push(Node { bounds: Aabb::EMPTY, start: 0, count: 0 });
    nodes.push(Node { bounds: Aabb::EMPTY, start: 0, count: 0 });
    nodes[index].start = left as u32;
    nodes[index].count = 0;
    let (l, r) = items.split_at_mut(mid);
    build_node(nodes, left, l, offset, depth + 1);
    build_node(nodes, left + 1, r, offset + mid, depth + 1);
}

fn partition<T>(items: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut i = 0;
    for j in 0..items.len() {
        if pred(&items[j]) {
            items.swap(i, j);
            i += 1;
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn soup(n: usize, seed: u64) -> Vec<Triangle> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = || DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        (0..n)
            .map(|_| {
                let c = p();
                Triangle::new(c, c + p() * 0.2, c + p() * 0.2)
            })
            .collect()
    }

    #[test]
    fn structure_is_valid() {
        for n in [1, 3, 5, 17, 1000] {
            assert!(Bvh::build(&soup(n, n as u64)).validate());
        }
    }

    #[test]
    fn degenerate_duplicates_still_build() {
        let t = Triangle::new(DVec3::ZERO, DVec3::X, DVec3::Y);
        let bvh = Bvh::build(&vec![t; 200]);
        assert!(bvh.validate());
        assert!(bvh.occluded(DVec3::new(0.2, 0.2, 1.0), -DVec3::Z, f64::INFINITY));
    }

    #[test]
    fn closest_hit_matches_brute_force() {
        let tris = soup(500, 9);
        let bvh = Bvh::build(&tris);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..2000 {
            let o = DVec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let d = crate::sampling::uniform_sphere(rng.gen(), rng.gen());
            let brute = tris
                .iter()
                .enumerate()
                .filter_map(|(i, t)| t.intersect(o, d).map(|(t, _, _)| (t, i)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let got = bvh.closest_hit(o, d).map(|h| (h.t, h.triangle));
            assert_eq!(got, brute);
        }
    }
}
