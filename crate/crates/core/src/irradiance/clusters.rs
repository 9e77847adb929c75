use std::collections::{BTreeMap, BTreeSet};

use crate::gbuffer::render_gbuffer;
use crate::image::{Map, RgbMap};
use crate::math::{Frame, Rgb, Vec3};
use crate::num::Real;
use crate::raytrace::Ray;
use crate::rng::{hash_words, sample_rng, Stream};
use crate::sampling::{cosine_hemisphere, uniform, uniform_cone, uniform_cone_pdf};
use crate::scene::MultiViewScene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    /// Voxel edge, meters.
    pub voxel_size: f64,
    /// Fraction of a voxel's pixels that must be clipped to mark it.
    pub clip_fraction: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { voxel_size: 0.02, clip_fraction: 0.5 }
    }
}

/// A group of overexposed voxels treated as one light of constant emittance.
#[derive(Clone, Debug, PartialEq)]
pub struct LightCluster<T> {
    pub id: u32,
    pub voxel_size: T,
    pub voxels: BTreeSet<[i64; 3]>,
    /// Bounding sphere of the voxel cubes.
    pub center: Vec3<T>,
    pub radius: T,
    /// Solved intensity `α_l`, once known.
    pub intensity: Option<Rgb<T>>,
}

pub(crate) fn voxel_of<T: Real>(p: Vec3<T>, size: T) -> [i64; 3] {
    let k = |c: T| (c / size).floor().to_i64().unwrap_or(i64::MIN);
    [k(p.x), k(p.y), k(p.z)]
}

impl<T: Real> LightCluster<T> {
    /// Builds a cluster and its bounding sphere: the center and half diagonal
    /// of the voxels' axis-aligned bounds. `voxels` must be nonempty.
    pub fn from_voxels(id: u32, voxel_size: T, voxels: BTreeSet<[i64; 3]>) -> Self {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for v in &voxels {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a] + 1);
            }
        }
        let corner = |c: [i64; 3]| Vec3::new(T::lit(c[0] as f64), T::lit(c[1] as f64), T::lit(c[2] as f64)) * voxel_size;
        let (a, b) = (corner(lo), corner(hi));
        let center = (a + b) * T::lit(0.5);
        let radius = (b - a).length() * T::lit(0.5);
        LightCluster { id, voxel_size, voxels, center, radius, intensity: None }
    }

    pub fn contains_point(&self, p: Vec3<T>) -> bool {
        self.voxels.contains(&voxel_of(p, self.voxel_size))
    }

    fn spheres_touch(&self, other: &Self) -> bool {
        (self.center - other.center).length() <= self.radius + other.radius
    }
}

/// Finds overexposed light sources.
///
/// Every input pixel with geometry contributes its surface point to a sparse
/// voxel grid. Voxels whose pixels are clipped at least `clip_fraction` of
/// the time are marked; touching marked voxels are grouped, then groups are
/// merged while any two bounding spheres intersect.
pub fn detect_light_clusters<T: Real>(scene: &MultiViewScene<T>, params: &ClusterParams) -> Vec<LightCluster<T>> {
    let size = T::lit(params.voxel_size);
    let mut counts: BTreeMap<[i64; 3], (usize, usize)> = BTreeMap::new();
    for (cam, (img, depth)) in scene.cameras.iter().zip(scene.images.iter().zip(&scene.depth_maps)) {
        if !img.has_clipping() {
            continue;
        }
        for y in 0..cam.height {
            for x in 0..cam.width {
                let d = *depth.get(x, y);
                if !d.is_finite() {
                    continue;
                }
                let half = T::lit(0.5);
                let p = cam.unproject(T::from_usize_lossy(x) + half, T::from_usize_lossy(y) + half, d);
                let entry = counts.entry(voxel_of(p, size)).or_default();
                entry.0 += 1;
                if img.clipped_any(x, y) {
                    entry.1 += 1;
                }
            }
        }
    }
    let marked: Vec<[i64; 3]> = counts
        .iter()
        .filter(|(_, &(total, clipped))| clipped > 0 && clipped as f64 >= params.clip_fraction * total as f64)
        .map(|(k, _)| *k)
        .collect();
    if marked.is_empty() {
        return Vec::new();
    }

    // Union touching voxels (26-neighborhood).
    let index: BTreeMap<[i64; 3], usize> = marked.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut parent: Vec<usize> = (0..marked.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, v) in marked.iter().enumerate() {
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(&j) = index.get(&[v[0] + dx, v[1] + dy, v[2] + dz]) {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<[i64; 3]>> = BTreeMap::new();
    for (i, v) in marked.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(*v);
    }
    let mut clusters: Vec<LightCluster<T>> = groups.into_values().map(|g| LightCluster::from_voxels(0, size, g)).collect();

    'merge: loop {
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if clusters[a].spheres_touch(&clusters[b]) {
                    let absorbed = clusters.remove(b);
                    let mut voxels = std::mem::take(&mut clusters[a].voxels);
                    voxels.extend(absorbed.voxels);
                    clusters[a] = LightCluster::from_voxels(0, size, voxels);
                    continue 'merge;
                }
            }
        }
        break;
    }
    clusters.sort_by_key(|c| *c.voxels.first().expect("nonempty cluster"));
    for (i, c) in clusters.iter_mut().enumerate() {
        c.id = i as u32;
    }
    clusters
}

/// Irradiance each pixel of `view` would receive from `cluster` at unit
/// emittance, counting only directions that reach one of its voxels.
///
/// Directions are drawn uniformly in the cone subtended by the bounding
/// sphere, or cosine-weighted over the hemisphere when the receiver lies
/// inside the sphere.
pub fn cluster_irradiance<T: Real>(
    scene: &MultiViewScene<T>,
    view: usize,
    cluster: &LightCluster<T>,
    spp: usize,
    seed: u64,
) -> RgbMap<T> {
    let cam = &scene.cameras[view];
    let g = render_gbuffer(scene, cam);
    let offset = scene.ray_offset();
    let stream_view = hash_words(&[u64::from(cam.id), u64::from(cluster.id)]);
    let width = cam.width;
    Map::from_fn_par(cam.width, cam.height, |x, y| {
        let Some(s) = g.get(x, y) else { return Rgb::zero() };
        let pixel = (y * width + x) as u64;
        let to_c = cluster.center - s.position;
        let dist = to_c.length();
        let inside = dist <= cluster.radius;
        let (frame, cos_max) = if inside {
            (Frame::from_normal(s.normal), T::zero())
        } else {
            let sin_max = cluster.radius / dist;
            (Frame::from_normal(to_c / dist), (T::one() - sin_max * sin_max).max(T::zero()).sqrt())
        };
        if !inside && s.normal.dot(to_c) <= -cluster.radius {
            return Rgb::zero();
        }
        let mut sum = T::zero();
        for k in 0..spp {
            let mut rng = sample_rng(seed, Stream::ClusterIrradiance, stream_view, pixel, k as u64);
            let (u1, u2) = (uniform(&mut rng), uniform(&mut rng));
            let dir = if inside { cosine_hemisphere(&frame, u1, u2) } else { uniform_cone(&frame, cos_max, u1, u2) };
            let cos = s.normal.dot(dir);
            if cos <= T::zero() {
                continue;
            }
            let reaches = scene.trace(&Ray::offset(s.position, dir, offset)).is_some_and(|h| cluster.contains_point(h.position));
            if reaches {
                sum = sum + if inside { T::PI() } else { cos / uniform_cone_pdf(cos_max) };
            }
        }
        Rgb::splat(sum / T::from_usize_lossy(spp.max(1)))
    })
}
