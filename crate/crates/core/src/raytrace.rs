//! Ray–mesh queries: bounding volume hierarchy, nearest-hit and occlusion
//! tests, and depth rendering.
//!
//! Hits are ordered by `(t, triangle index)`, so the BVH and the linear
//! scan in [`brute_force_intersect`] agree exactly, ties included.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::ScalarMap;
use crate::math::Vec3;
use crate::mesh::TriangleMesh;
use crate::num::Real;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    /// Unit length.
    pub direction: Vec3<T>,
    pub t_min: T,
    pub t_max: T,
}

impl<T: Real> Ray<T> {
    pub fn new(origin: Vec3<T>, direction: Vec3<T>) -> Self {
        Ray { origin, direction, t_min: T::zero(), t_max: T::infinity() }
    }

    /// Ray leaving `origin`, pushed `offset` along the direction to avoid
    /// re-hitting the surface it starts on.
    pub fn offset(origin: Vec3<T>, direction: Vec3<T>, offset: T) -> Self {
        Ray::new(origin + direction * offset, direction)
    }

    pub fn segment(origin: Vec3<T>, direction: Vec3<T>, t_max: T) -> Self {
        Ray { origin, direction, t_min: T::zero(), t_max }
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit<T> {
    pub t: T,
    pub triangle: u32,
    /// Barycentric weight of the second vertex.
    pub u: T,
    /// Barycentric weight of the third vertex.
    pub v: T,
    pub position: Vec3<T>,
    /// Interpolated vertex normal, renormalized.
    pub normal: Vec3<T>,
    pub geometric_normal: Vec3<T>,
}

impl<T: Real> Hit<T> {
    /// Shading normal flipped into the hemisphere facing `toward`.
    #[inline]
    pub fn normal_facing(&self, toward: Vec3<T>) -> Vec3<T> {
        if self.normal.dot(toward) < T::zero() {
            -self.normal
        } else {
            self.normal
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Aabb<T> {
    min: Vec3<T>,
    max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    fn empty() -> Self {
        Aabb { min: Vec3::splat(T::infinity()), max: Vec3::splat(T::neg_infinity()) }
    }

    fn grow(&mut self, p: Vec3<T>) {
        self.min = self.min.min_elem(p);
        self.max = self.max.max_elem(p);
    }

    /// Entry distance of the ray into the box, if it enters before `t_max`.
    #[inline]
    fn hit(&self, origin: Vec3<T>, inv_dir: Vec3<T>, t_min: T, t_max: T) -> Option<T> {
        let mut lo = t_min;
        let mut hi = t_max;
        for axis in 0..3 {
            let inv = inv_dir[axis];
            if inv.is_infinite() {
                // Direction parallel to this slab pair.
                if origin[axis] < self.min[axis] || origin[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let t0 = (self.min[axis] - origin[axis]) * inv;
            let t1 = (self.max[axis] - origin[axis]) * inv;
            let (near, far) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            lo = lo.max(near);
            hi = hi.min(far);
            if lo > hi {
                return None;
            }
        }
        Some(lo)
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    bounds: Aabb<T>,
    /// Leaf: first entry in `order`; interior: index of the left child.
    first: u32,
    /// Triangle count for leaves, zero for interior nodes.
    count: u32,
}

/// Bounding volume hierarchy over a triangle mesh.
///
/// Owns copies of the positions and normals it needs, so queries do not
/// borrow the mesh.
#[derive(Clone, Debug)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<u32>,
    corners: Vec<[Vec3<T>; 3]>,
    normals: Vec<[Vec3<T>; 3]>,
}

impl<T: Real> Bvh<T> {
    pub fn build(mesh: &TriangleMesh<T>) -> Result<Self> {
        if mesh.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let corners: Vec<[Vec3<T>; 3]> = mesh
            .triangles
            .iter()
            .map(|t| [0, 1, 2].map(|k| mesh.vertices[t[k] as usize]))
            .collect();
        let normals: Vec<[Vec3<T>; 3]> = mesh
            .triangles
            .iter()
            .map(|t| [0, 1, 2].map(|k| mesh.normals[t[k] as usize]))
            .collect();
        let centroids: Vec<Vec3<T>> =
            corners.iter().map(|c| (c[0] + c[1] + c[2]) / T::lit(3.0)).collect();
        let mut order: Vec<u32> = (0..corners.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * corners.len() / LEAF_SIZE + 1);
        nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
        let mut stack = vec![(0usize, 0usize, order.len())];
        while let Some((node, start, end)) = stack.pop() {
            let mut bounds = Aabb::empty();
            let mut cbounds = Aabb::empty();
            for &i in &order[start..end] {
                for c in &corners[i as usize] {
                    bounds.grow(*c);
                }
                cbounds.grow(centroids[i as usize]);
            }
            nodes[node].bounds = bounds;
            let extent = cbounds.max - cbounds.min;
            if end - start <= LEAF_SIZE || extent.max_component() <= T::zero() {
                nodes[node].first = start as u32;
                nodes[node].count = (end - start) as u32;
                continue;
            }
            let axis = extent.max_axis();
            let mid = start + (end - start) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a as usize][axis]
                    .partial_cmp(&centroids[b as usize][axis])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
            nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
            nodes[node].first = left as u32;
            nodes[node].count = 0;
            stack.push((left, start, mid));
            stack.push((left + 1, mid, end));
        }
        Ok(Bvh { nodes, order, corners, normals })
    }

    pub fn triangle_count(&self) -> usize {
        self.corners.len()
    }

    /// Nearest hit with `t` strictly inside `(t_min, t_max)`.
    pub fn intersect(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        let inv_dir = Vec3::new(T::one() / ray.direction.x, T::one() / ray.direction.y, T::one() / ray.direction.z);
        let mut best: Option<(T, u32, T, T)> = None;
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            let limit = best.map_or(ray.t_max, |b| b.0);
            if node.bounds.hit(ray.origin, inv_dir, ray.t_min, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let first = node.first as usize;
                for &tri in &self.order[first..first + node.count as usize] {
                    if let Some((t, u, v)) = intersect_triangle(&self.corners[tri as usize], ray) {
                        let better = match best {
                            None => true,
                            Some((bt, bi, _, _)) => t < bt || (t == bt && tri < bi),
                        };
                        if better {
                            best = Some((t, tri, u, v));
                        }
                    }
                }
            } else {
                let (l, r) = (node.first, node.first + 1);
                let dl = self.nodes[l as usize].bounds.hit(ray.origin, inv_dir, ray.t_min, limit);
                let dr = self.nodes[r as usize].bounds.hit(ray.origin, inv_dir, ray.t_min, limit);
                // Push the farther child first so the nearer is visited next.
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
        best.map(|(t, tri, u, v)| self.make_hit(ray, t, tri, u, v))
    }

    /// True if anything is hit inside `(t_min, t_max)`.
    pub fn occluded(&self, ray: &Ray<T>) -> bool {
        let inv_dir = Vec3::new(T::one() / ray.direction.x, T::one() / ray.direction.y, T::one() / ray.direction.z);
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(ray.origin, inv_dir, ray.t_min, ray.t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let first = node.first as usize;
                if self.order[first..first + node.count as usize]
                    .iter()
                    .any(|&tri| intersect_triangle(&self.corners[tri as usize], ray).is_some())
                {
                    return true;
                }
            } else {
                stack[sp] = node.first;
                stack[sp + 1] = node.first + 1;
                sp += 2;
            }
        }
        false
    }

    fn make_hit(&self, ray: &Ray<T>, t: T, tri: u32, u: T, v: T) -> Hit<T> {
        let c = &self.corners[tri as usize];
        let n = &self.normals[tri as usize];
        make_hit(ray, t, tri, u, v, c, n)
    }
}

fn make_hit<T: Real>(ray: &Ray<T>, t: T, tri: u32, u: T, v: T, c: &[Vec3<T>; 3], n: &[Vec3<T>; 3]) -> Hit<T> {
    let geometric_normal = (c[1] - c[0]).cross(c[2] - c[0]).normalized();
    let w = T::one() - u - v;
    let interp = n[0] * w + n[1] * u + n[2] * v;
    let normal = if interp.length_squared() > T::lit(1e-20) { interp.normalized() } else { geometric_normal };
    Hit { t, triangle: tri, u, v, position: ray.at(t), normal, geometric_normal }
}

/// Möller–Trumbore; returns `(t, u, v)` for `t` strictly inside the ray interval.
#[inline]
pub fn intersect_triangle<T: Real>(c: &[Vec3<T>; 3], ray: &Ray<T>) -> Option<(T, T, T)> {
    let e1 = c[1] - c[0];
    let e2 = c[2] - c[0];
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let inv = T::one() / det;
    let s = ray.origin - c[0];
    let u = s.dot(p) * inv;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > ray.t_min && t < ray.t_max).then_some((t, u, v))
}

/// Linear scan over every triangle; the reference the BVH must reproduce.
pub fn brute_force_intersect<T: Real>(mesh: &TriangleMesh<T>, ray: &Ray<T>) -> Option<Hit<T>> {
    let mut best: Option<(T, u32, T, T)> = None;
    for (i, tri) in mesh.triangles.iter().enumerate() {
        let c = [0, 1, 2].map(|k| mesh.vertices[tri[k] as usize]);
        if let Some((t, u, v)) = intersect_triangle(&c, ray) {
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, i as u32, u, v));
            }
        }
    }
    best.map(|(t, i, u, v)| {
        let tri = mesh.triangles[i as usize];
        let c = [0, 1, 2].map(|k| mesh.vertices[tri[k] as usize]);
        let n = [0, 1, 2].map(|k| mesh.normals[tri[k] as usize]);
        make_hit(ray, t, i, u, v, &c, &n)
    })
}

/// Per-pixel depth along the camera's z axis; misses hold `+∞`.
pub fn render_depth<T: Real>(bvh: &Bvh<T>, camera: &Camera<T>) -> ScalarMap<T> {
    ScalarMap::from_fn_par(camera.width, camera.height, |x, y| {
        let ray = camera.pixel_ray(x, y);
        match bvh.intersect(&ray) {
            Some(hit) => camera.depth_of(hit.position),
            None => T::infinity(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_triangle() -> TriangleMesh<f64> {
        TriangleMesh::new(
            vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)],
            vec![vec3(0.0, 0.0, 1.0); 3],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn ray_hits_unit_triangle_at_origin() {
        let bvh = Bvh::build(&unit_triangle()).unwrap();
        let hit = bvh.intersect(&Ray::new(vec3(0.0, 0.0, -1.0), vec3(0.0, 0.0, 1.0))).unwrap();
        assert_eq!(hit.t, 1.0);
        assert_eq!(hit.position, vec3(0.0, 0.0, 0.0));
        assert_eq!(hit.triangle, 0);
    }

    #[test]
    fn parallel_offset_ray_misses() {
        let bvh = Bvh::build(&unit_triangle()).unwrap();
        assert!(bvh.intersect(&Ray::new(vec3(0.0, 0.0, 0.5), vec3(1.0, 0.0, 0.0))).is_none());
        assert!(!bvh.occluded(&Ray::new(vec3(0.0, 0.0, 0.5), vec3(1.0, 0.0, 0.0))));
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let mesh = TriangleMesh::<f64>::new(vec![], vec![], vec![]);
        assert!(matches!(Bvh::build(&mesh), Err(Error::EmptyMesh)));
    }

    #[test]
    fn single_triangle_matches_brute_force() {
        let mesh = unit_triangle();
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let o = vec3(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), -1.0);
            let d = vec3(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 1.0).normalized();
            let ray = Ray::new(o, d);
            assert_eq!(bvh.intersect(&ray).map(|h| h.triangle), brute_force_intersect(&mesh, &ray).map(|h| h.triangle));
        }
    }

    #[test]
    fn interval_is_open() {
        let bvh = Bvh::build(&unit_triangle()).unwrap();
        let ray = Ray { origin: vec3(0.2, 0.2, -1.0), direction: vec3(0.0, 0.0, 1.0), t_min: 0.0, t_max: 1.0 };
        assert!(bvh.intersect(&ray).is_none());
        let ray = Ray { t_max: 1.0 + 1e-9, ..ray };
        assert!(bvh.intersect(&ray).is_some());
    }

    #[test]
    fn shading_normal_is_interpolated() {
        let mesh = TriangleMesh::new(
            vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)],
            vec![vec3(0.0, 0.0, 1.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 0.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let bvh = Bvh::build(&mesh).unwrap();
        let hit = bvh.intersect(&Ray::new(vec3(0.5, 0.0, -1.0), vec3(0.0, 0.0, 1.0))).unwrap();
        assert!((hit.normal - vec3(1.0, 0.0, 1.0).normalized()).length() < 1e-12);
        assert_eq!(hit.geometric_normal, vec3(0.0, 0.0, 1.0));
    }
}
