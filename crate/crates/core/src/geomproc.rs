//! Proxy-mesh cleanup: Laplacian normal smoothing and RANSAC plane snapping.
//!
//! Both operations touch normals only; positions and connectivity are
//! preserved exactly.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;

use crate::math::Vec3;
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::rng::{stream_rng, Stream};

/// Replaces each normal by `normalize((1−λ)·n + λ·mean(1-ring normals))`,
/// `iterations` times. Isolated vertices keep their normal.
pub fn smooth_normals<T: Real>(mesh: &TriangleMesh<T>, iterations: usize, lambda: T) -> TriangleMesh<T> {
    let mut out = mesh.clone();
    if iterations == 0 {
        return out;
    }
    let neighbors = mesh.vertex_neighbors();
    for _ in 0..iterations {
        let prev = out.normals.clone();
        for (i, ring) in neighbors.iter().enumerate() {
            if ring.is_empty() {
                continue;
            }
            let mean = ring.iter().map(|&j| prev[j as usize]).sum::<Vec3<T>>() / T::from_usize_lossy(ring.len());
            let blended = prev[i] * (T::one() - lambda) + mean * lambda;
            if blended.length() > T::lit(1e-12) {
                out.normals[i] = blended.normalized();
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneSnapParams<T> {
    /// Inlier distance, meters.
    pub distance_tol: T,
    /// Minimum fraction of the remaining vertices a plane must explain.
    pub min_support: T,
    /// Normals within this angle of the plane normal are snapped, degrees.
    pub angle_tol_deg: T,
    pub max_planes: usize,
    pub trials: usize,
    pub seed: u64,
}

impl<T: Real> PlaneSnapParams<T> {
    /// Defaults scaled to the mesh: distance tolerance is 0.5% of the bbox
    /// diagonal.
    pub fn for_mesh(mesh: &TriangleMesh<T>) -> Self {
        PlaneSnapParams {
            distance_tol: T::lit(0.005) * mesh.bbox_diagonal(),
            min_support: T::lit(0.05),
            angle_tol_deg: T::lit(15.0),
            max_planes: 16,
            trials: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneFit<T> {
    /// Unit normal.
    pub normal: Vec3<T>,
    /// Plane is `normal · x = offset`.
    pub offset: T,
    pub inlier_indices: Vec<u32>,
}

/// Least-squares plane through `points`: centroid plus the direction of least
/// variance. `None` for fewer than three points.
pub fn fit_plane_least_squares<T: Real>(points: &[Vec3<T>]) -> Option<(Vec3<T>, T)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().map(|p| p.cast::<f64>()).fold(Vector3::zeros(), |a, p| a + Vector3::new(p.x, p.y, p.z)) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let p = p.cast::<f64>();
        let d = Vector3::new(p.x, p.y, p.z) - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let v = eig.eigenvectors.column(k);
    let normal = Vec3::<T>::from_f64([v[0], v[1], v[2]]).normalized();
    let offset = normal.dot(Vec3::from_f64([c[0], c[1], c[2]]));
    Some((normal, offset))
}

/// Detects planes by RANSAC over vertex positions and snaps nearly-aligned
/// inlier normals onto each accepted plane. Returns the mesh and the planes.
pub fn snap_planes<T: Real>(mesh: &TriangleMesh<T>, params: &PlaneSnapParams<T>) -> (TriangleMesh<T>, Vec<PlaneFit<T>>) {
    let mut out = mesh.clone();
    let mut planes = Vec::new();
    let mut remaining: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
    let mut rng = stream_rng(params.seed, Stream::Ransac);
    let cos_tol = params.angle_tol_deg.to_radians().cos();
    let pos = |i: u32| mesh.vertices[i as usize];

    for _ in 0..params.max_planes {
        if remaining.len() < 3 {
            break;
        }
        let needed = (params.min_support * T::from_usize_lossy(remaining.len())).ceil().to_usize().unwrap_or(usize::MAX).max(3);
        let mut best: Option<(usize, Vec3<T>, T)> = None;
        for _ in 0..params.trials {
            let a = remaining[rng.gen_range(0..remaining.len())];
            let b = remaining[rng.gen_range(0..remaining.len())];
            let c = remaining[rng.gen_range(0..remaining.len())];
            let n = (pos(b) - pos(a)).cross(pos(c) - pos(a));
            if !(n.length() > T::lit(1e-12)) {
                continue;
            }
            let n = n.normalized();
            let d = n.dot(pos(a));
            let count = remaining.iter().filter(|&&i| (n.dot(pos(i)) - d).abs() <= params.distance_tol).count();
            if best.is_none_or(|b| count > b.0) {
                best = Some((count, n, d));
            }
        }
        let Some((count, n, d)) = best else { break };
        if count < needed {
            break;
        }
        let inliers: Vec<u32> = remaining.iter().copied().filter(|&i| (n.dot(pos(i)) - d).abs() <= params.distance_tol).collect();
        let pts: Vec<Vec3<T>> = inliers.iter().map(|&i| pos(i)).collect();
        let (normal, offset) = fit_plane_least_squares(&pts).unwrap_or((n, d));
        let inliers: Vec<u32> =
            remaining.iter().copied().filter(|&i| (normal.dot(pos(i)) - offset).abs() <= params.distance_tol).collect();
        if inliers.len() < needed {
            break;
        }
        for &i in &inliers {
            let prior = out.normals[i as usize];
            let c = prior.dot(normal);
            if c.abs() >= cos_tol {
                out.normals[i as usize] = if c >= T::zero() { normal } else { -normal };
            }
        }
        let taken: std::collections::HashSet<u32> = inliers.iter().copied().collect();
        remaining.retain(|i| !taken.contains(i));
        planes.push(PlaneFit { normal, offset, inlier_indices: inliers });
    }
    (out, planes)
}
