//! Indexed triangle meshes with per-vertex normals and optional albedo, plus
//! builders for the simple primitives used by fixtures and the oracle.

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};
use crate::num::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub normals: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex pseudo-albedo, when present.
    pub albedo: Option<Vec<Rgb<T>>>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, normals: Vec<Vec3<T>>, triangles: Vec<[u32; 3]>) -> Self {
        TriangleMesh { vertices, normals, triangles, albedo: None }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.normals.len() != n {
            return Err(Error::InvalidMesh(format!("{} normals for {} vertices", self.normals.len(), n)));
        }
        if let Some(a) = &self.albedo {
            if a.len() != n {
                return Err(Error::InvalidMesh(format!("{} albedo values for {} vertices", a.len(), n)));
            }
            if let Some(i) = a.iter().position(|c| !c.is_finite() || c.min_component() < T::zero()) {
                return Err(Error::InvalidMesh(format!("vertex {i}: albedo must be finite and non-negative")));
            }
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i}: non-finite position")));
        }
        let tol = T::lit(1e-4);
        if let Some(i) = self.normals.iter().position(|nm| !((nm.length() - T::one()).abs() <= tol)) {
            return Err(Error::InvalidMesh(format!("vertex {i}: normal is not unit length")));
        }
        if let Some(i) = self.triangles.iter().position(|t| t.iter().any(|&k| k as usize >= n)) {
            return Err(Error::InvalidMesh(format!("triangle {i}: vertex index out of range")));
        }
        Ok(())
    }

    pub fn triangle_area(&self, tri: usize) -> T {
        let [a, b, c] = self.triangles[tri].map(|k| self.vertices[k as usize]);
        (b - a).cross(c - a).length() * T::lit(0.5)
    }

    /// Removes zero-area triangles; returns how many were dropped.
    pub fn drop_degenerate(&mut self) -> usize {
        let before = self.triangles.len();
        let keep: Vec<bool> = (0..before).map(|i| self.triangle_area(i) > T::zero()).collect();
        let mut it = keep.iter();
        self.triangles.retain(|_| *it.next().unwrap());
        before - self.triangles.len()
    }

    pub fn bounds(&self) -> (Vec3<T>, Vec3<T>) {
        let mut lo = Vec3::splat(T::infinity());
        let mut hi = Vec3::splat(T::neg_infinity());
        for v in &self.vertices {
            lo = lo.min_elem(*v);
            hi = hi.max_elem(*v);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> T {
        if self.vertices.is_empty() {
            return T::zero();
        }
        let (lo, hi) = self.bounds();
        (hi - lo).length()
    }

    /// Sorted, deduplicated 1-ring neighbor lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Appends another mesh, offsetting its indices. Albedo is kept only if
    /// both meshes carry it.
    pub fn append(&mut self, other: &TriangleMesh<T>) {
        let offset = self.vertices.len() as u32;
        let albedo = match (self.albedo.take(), &other.albedo) {
            _ if self.vertices.is_empty() => other.albedo.clone(),
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
        self.vertices.extend_from_slice(&other.vertices);
        self.normals.extend_from_slice(&other.normals);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|k| k + offset)));
        self.albedo = albedo;
    }

    /// Planar quad `origin + s·edge_u + t·edge_v`, `s, t ∈ [0,1]`, split into
    /// `n × n` cells. Normal is `normalize(edge_u × edge_v)`.
    pub fn quad(origin: Vec3<T>, edge_u: Vec3<T>, edge_v: Vec3<T>, n: usize) -> Self {
        let n = n.max(1);
        let normal = edge_u.cross(edge_v).normalized();
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let s = T::from_usize_lossy(i) / T::from_usize_lossy(n);
                let t = T::from_usize_lossy(j) / T::from_usize_lossy(n);
                vertices.push(origin + edge_u * s + edge_v * t);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
        for j in 0..n {
            for i in 0..n {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        let normals = vec![normal; vertices.len()];
        TriangleMesh::new(vertices, normals, triangles)
    }

    /// Axis-aligned box between `lo` and `hi`, six faces with `n × n` cells
    /// each and unshared vertices. Normals face outward, or inward when
    /// `inward` is set (a room).
    pub fn aabb_box(lo: Vec3<T>, hi: Vec3<T>, n: usize, inward: bool) -> Self {
        let faces = box_faces(lo, hi);
        let mut mesh = TriangleMesh::new(Vec::new(), Vec::new(), Vec::new());
        for (origin, eu, ev) in faces {
            let (eu, ev) = if inward { (ev, eu) } else { (eu, ev) };
            mesh.append(&TriangleMesh::quad(origin, eu, ev, n));
        }
        mesh
    }

    /// Icosphere with `subdivisions` rounds of 4-way splitting; vertices lie
    /// exactly on the sphere.
    pub fn icosphere(center: Vec3<T>, radius: T, subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut dirs: Vec<[f64; 3]> = vec![
            [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
            [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
            [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
        ];
        let norm = |p: [f64; 3]| {
            let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            [p[0] / l, p[1] / l, p[2] / l]
        };
        for d in &mut dirs {
            *d = norm(*d);
        }
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut midpoint = |a: u32, b: u32, dirs: &mut Vec<[f64; 3]>| -> u32 {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let (p, q) = (dirs[a as usize], dirs[b as usize]);
                    dirs.push(norm([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                    (dirs.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let ab = midpoint(f[0], f[1], &mut dirs);
                let bc = midpoint(f[1], f[2], &mut dirs);
                let ca = midpoint(f[2], f[0], &mut dirs);
                next.extend([[f[0], ab, ca], [f[1], bc, ab], [f[2], ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let normals: Vec<Vec3<T>> = dirs.iter().map(|d| Vec3::from_f64(*d)).collect();
        let vertices = normals.iter().map(|n| center + *n * radius).collect();
        TriangleMesh::new(vertices, normals, faces)
    }
}

/// Six faces of a box as `(origin, edge_u, edge_v)` with `edge_u × edge_v`
/// pointing outward.
fn box_faces<T: Real>(lo: Vec3<T>, hi: Vec3<T>) -> [(Vec3<T>, Vec3<T>, Vec3<T>); 6] {
    let d = hi - lo;
    let z = T::zero();
    let ex = Vec3::new(d.x, z, z);
    let ey = Vec3::new(z, d.y, z);
    let ez = Vec3::new(z, z, d.z);
    [
        (lo, ez, ey),                  // -x
        (lo + ex, ey, ez),             // +x
        (lo, ex, ez),                  // -y
        (lo + ey, ez, ex),             // +y
        (lo, ey, ex),                  // -z
        (lo + ez, ex, ey),             // +z
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    #[test]
    fn box_normals_point_outward() {
        let m = TriangleMesh::<f64>::aabb_box(vec3(-1.0, -1.0, -1.0), vec3(1.0, 1.0, 1.0), 2, false);
        m.validate().unwrap();
        for (v, n) in m.vertices.iter().zip(&m.normals) {
            assert!(v.dot(*n) > 0.0);
        }
        for t in 0..m.triangles.len() {
            let [a, b, c] = m.triangles[t].map(|k| m.vertices[k as usize]);
            let g = (b - a).cross(c - a).normalized();
            assert!((g - m.normals[m.triangles[t][0] as usize]).length() < 1e-12);
        }
        let room = TriangleMesh::<f64>::aabb_box(vec3(-1.0, -1.0, -1.0), vec3(1.0, 1.0, 1.0), 2, true);
        for (v, n) in room.vertices.iter().zip(&room.normals) {
            assert!(v.dot(*n) < 0.0);
        }
        assert_eq!(m.triangles.len(), 6 * 2 * 4);
    }

    #[test]
    fn icosphere_vertices_on_sphere() {
        let m = TriangleMesh::<f64>::icosphere(vec3(1.0, 2.0, 3.0), 0.5, 2);
        m.validate().unwrap();
        assert_eq!(m.triangles.len(), 20 * 16);
        for v in &m.vertices {
            assert!(((*v - vec3(1.0, 2.0, 3.0)).length() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_errors() {
        let mut m = TriangleMesh::<f64>::quad(vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), 1);
        m.triangles.push([0, 1, 9]);
        assert!(matches!(m.validate(), Err(Error::InvalidMesh(_))));
        m.triangles.pop();
        m.normals[0] = vec3(0.0, 0.0, 2.0);
        assert!(matches!(m.validate(), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn degenerate_triangles_are_dropped() {
        let mut m = TriangleMesh::<f64>::quad(vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), 1);
        m.triangles.push([0, 0, 1]);
        assert_eq!(m.drop_degenerate(), 1);
        assert_eq!(m.triangles.len(), 2);
    }

    #[test]
    fn neighbors_of_grid_corner() {
        let m = TriangleMesh::<f64>::quad(vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), 2);
        let adj = m.vertex_neighbors();
        assert_eq!(adj[0], vec![1, 3, 4]);
        assert_eq!(adj[4].len(), 6);
    }
}
