//! Captured scene: cameras, linear radiance images, proxy mesh, lights, and
//! the user's lighting edit.

use std::collections::BTreeMap;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{Map, RgbMap, ScalarMap};
use crate::math::{Rgb, Vec3};
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::raytrace::{render_depth, Bvh, Hit, Ray};

/// Default relative depth tolerance for visibility tests.
pub const DEFAULT_VISIBILITY_TOL: f64 = 0.01;

/// Fraction of the white level at or above which a channel counts as clipped.
pub const CLIP_THRESHOLD: f64 = 0.99;

/// Per-pixel, per-channel sensor saturation flags.
pub type ClipMask = Map<[bool; 3]>;

#[derive(Clone, Debug, PartialEq)]
pub struct RadianceImage<T> {
    pub pixels: RgbMap<T>,
    pub clip_mask: ClipMask,
}

impl<T: Real> RadianceImage<T> {
    /// Image with nothing clipped.
    pub fn new(pixels: RgbMap<T>) -> Self {
        let clip_mask = Map::filled(pixels.width(), pixels.height(), [false; 3]);
        RadianceImage { pixels, clip_mask }
    }

    pub fn constant(width: usize, height: usize, value: Rgb<T>) -> Self {
        RadianceImage::new(Map::filled(width, height, value))
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    #[inline]
    pub fn clipped_any(&self, x: usize, y: usize) -> bool {
        self.clip_mask.get(x, y).iter().any(|&c| c)
    }

    pub fn has_clipping(&self) -> bool {
        self.clip_mask.pixels().iter().any(|c| c.iter().any(|&b| b))
    }

    fn validate(&self, camera: &Camera<T>) -> Result<()> {
        if self.width() != camera.width || self.height() != camera.height {
            return Err(Error::InvalidImage {
                camera: camera.id,
                reason: format!(
                    "image is {}x{}, camera expects {}x{}",
                    self.width(),
                    self.height(),
                    camera.width,
                    camera.height
                ),
            });
        }
        if !self.clip_mask.same_size(&self.pixels) {
            return Err(Error::InvalidImage { camera: camera.id, reason: "clip mask size differs from image".into() });
        }
        if !self.pixels.all_finite_nonnegative() {
            return Err(Error::InvalidImage { camera: camera.id, reason: "pixels must be finite and non-negative".into() });
        }
        Ok(())
    }
}

/// Flags every channel at or above `0.99 × white_level`.
pub fn detect_clipped<T: Real>(raw: &RgbMap<T>, white_level: T) -> Result<ClipMask> {
    if !(white_level > T::zero()) {
        return Err(Error::InvalidArgument("white level must be positive".into()));
    }
    let threshold = T::lit(CLIP_THRESHOLD) * white_level;
    Ok(raw.map(|p| [p.x >= threshold, p.y >= threshold, p.z >= threshold]))
}

/// Emissive parallelogram `origin + s·edge_u + t·edge_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaLight<T> {
    pub id: u32,
    pub origin: Vec3<T>,
    pub edge_u: Vec3<T>,
    pub edge_v: Vec3<T>,
    /// Radiance leaving the emitting side.
    pub emittance: Rgb<T>,
    pub two_sided: bool,
}

impl<T: Real> AreaLight<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_u.cross(self.edge_v).length() > T::zero()) {
            return Err(Error::InvalidLight { light: self.id, reason: "edges are parallel or zero".into() });
        }
        if !self.emittance.is_finite() || self.emittance.min_component() < T::zero() {
            return Err(Error::InvalidLight { light: self.id, reason: "emittance must be finite and non-negative".into() });
        }
        if !(self.origin.is_finite() && self.edge_u.is_finite() && self.edge_v.is_finite()) {
            return Err(Error::InvalidLight { light: self.id, reason: "non-finite geometry".into() });
        }
        Ok(())
    }

    /// Emitting-side normal, `normalize(edge_u × edge_v)`.
    pub fn normal(&self) -> Vec3<T> {
        self.edge_u.cross(self.edge_v).normalized()
    }

    pub fn area(&self) -> T {
        self.edge_u.cross(self.edge_v).length()
    }

    pub fn center(&self) -> Vec3<T> {
        self.origin + (self.edge_u + self.edge_v) * T::lit(0.5)
    }

    #[inline]
    pub fn point(&self, s: T, t: T) -> Vec3<T> {
        self.origin + self.edge_u * s + self.edge_v * t
    }

    /// Radiance emitted from the light along `dir` (pointing away from it).
    #[inline]
    pub fn radiance_toward(&self, dir: Vec3<T>) -> Rgb<T> {
        if self.two_sided || self.normal().dot(dir) > T::zero() {
            self.emittance
        } else {
            Vec3::zero()
        }
    }

    /// Ray–parallelogram intersection distance inside the ray interval.
    pub fn intersect(&self, ray: &Ray<T>) -> Option<T> {
        let n = self.edge_u.cross(self.edge_v);
        let denom = n.dot(ray.direction);
        if denom == T::zero() {
            return None;
        }
        let t = n.dot(self.origin - ray.origin) / denom;
        if !(t > ray.t_min && t < ray.t_max) {
            return None;
        }
        let rel = ray.at(t) - self.origin;
        // Solve rel = s·edge_u + t·edge_v in the plane.
        let uu = self.edge_u.dot(self.edge_u);
        let uv = self.edge_u.dot(self.edge_v);
        let vv = self.edge_v.dot(self.edge_v);
        let ru = rel.dot(self.edge_u);
        let rv = rel.dot(self.edge_v);
        let det = uu * vv - uv * uv;
        let s = (ru * vv - rv * uv) / det;
        let q = (rv * uu - ru * uv) / det;
        let (zero, one) = (T::zero(), T::one());
        (s >= zero && s <= one && q >= zero && q <= one).then_some(t)
    }
}

/// The user's relighting request.
#[derive(Clone, Debug, PartialEq)]
pub struct LightingEdit<T> {
    /// Fraction of the original lighting to remove, in `[0, 1]`.
    pub alpha_dim: T,
    /// Linear weight per added light id.
    pub light_weights: BTreeMap<u32, T>,
}

impl<T: Real> LightingEdit<T> {
    /// Keeps the original lighting and adds nothing.
    pub fn noop() -> Self {
        LightingEdit { alpha_dim: T::zero(), light_weights: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_dim >= T::zero() && self.alpha_dim <= T::one()) {
            return Err(Error::InvalidEdit(format!("alpha_dim {} outside [0, 1]", self.alpha_dim)));
        }
        for (id, w) in &self.light_weights {
            if !(w.is_finite() && *w >= T::zero()) {
                return Err(Error::InvalidEdit(format!("light {id}: weight {w} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn weight(&self, light: u32) -> T {
        self.light_weights.get(&light).copied().unwrap_or(T::zero())
    }
}

/// `point` projects inside `camera` and its camera depth matches `depth` at
/// the nearest pixel within `tol` relative.
#[inline]
pub fn depth_test<T: Real>(camera: &Camera<T>, depth: &ScalarMap<T>, point: Vec3<T>, tol: T) -> bool {
    let Some(p) = camera.project(point) else { return false };
    if !camera.contains(p.u, p.v) {
        return false;
    }
    match depth.nearest(p.u, p.v) {
        Some(&d) => (d - p.depth).abs() <= tol * p.depth,
        None => false,
    }
}

/// Cameras, aligned images, proxy mesh, and derived geometry.
///
/// Immutable once built; everything derived (BVH, depth maps, bbox) is
/// computed in [`MultiViewScene::new`].
#[derive(Clone, Debug)]
pub struct MultiViewScene<T> {
    pub cameras: Vec<Camera<T>>,
    pub images: Vec<RadianceImage<T>>,
    pub mesh: TriangleMesh<T>,
    pub depth_maps: Vec<ScalarMap<T>>,
    pub bbox_diagonal: T,
    bvh: Bvh<T>,
    view_order: Vec<usize>,
    centers: Vec<Vec3<T>>,
}

impl<T: Real> MultiViewScene<T> {
    pub fn new(cameras: Vec<Camera<T>>, images: Vec<RadianceImage<T>>, mut mesh: TriangleMesh<T>) -> Result<Self> {
        if cameras.len() != images.len() {
            return Err(Error::CountMismatch { cameras: cameras.len(), images: images.len() });
        }
        for (cam, img) in cameras.iter().zip(&images) {
            cam.validate()?;
            img.validate(cam)?;
        }
        let mut ids: Vec<u32> = cameras.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidCamera { camera: w[0], reason: "duplicate camera id".into() });
        }
        mesh.validate()?;
        mesh.drop_degenerate();
        let bvh = Bvh::build(&mesh)?;
        let depth_maps = cameras.iter().map(|c| render_depth(&bvh, c)).collect();
        let bbox_diagonal = mesh.bbox_diagonal();
        let mut view_order: Vec<usize> = (0..cameras.len()).collect();
        view_order.sort_by_key(|&i| cameras[i].id);
        let centers = cameras.iter().map(|c| c.center()).collect();
        Ok(MultiViewScene { cameras, images, mesh, depth_maps, bbox_diagonal, bvh, view_order, centers })
    }

    /// Same geometry and cameras with different images.
    pub fn with_images(&self, images: Vec<RadianceImage<T>>) -> Result<Self> {
        if images.len() != self.cameras.len() {
            return Err(Error::CountMismatch { cameras: self.cameras.len(), images: images.len() });
        }
        for (cam, img) in self.cameras.iter().zip(&images) {
            img.validate(cam)?;
        }
        Ok(MultiViewScene { images, ..self.clone() })
    }

    pub fn view_count(&self) -> usize {
        self.cameras.len()
    }

    /// View indices sorted by camera id; every reduction over views uses
    /// this order.
    pub fn view_order(&self) -> &[usize] {
        &self.view_order
    }

    pub fn bvh(&self) -> &Bvh<T> {
        &self.bvh
    }

    #[inline]
    pub fn trace(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        self.bvh.intersect(ray)
    }

    /// Start offset for secondary rays, `1e-4 × bbox diagonal`.
    #[inline]
    pub fn ray_offset(&self) -> T {
        T::lit(1e-4) * self.bbox_diagonal
    }

    /// Guard against vanishing distances, `1e-4 × bbox diagonal`.
    #[inline]
    pub fn distance_floor(&self) -> T {
        T::lit(1e-4) * self.bbox_diagonal
    }

    /// Depth test: `point` projects inside view `view` and its camera depth
    /// matches the depth map within `tol` relative.
    #[inline]
    pub fn visible(&self, point: Vec3<T>, view: usize, tol: T) -> bool {
        depth_test(&self.cameras[view], &self.depth_maps[view], point, tol)
    }

    /// Camera center of view `view`.
    #[inline]
    pub fn center(&self, view: usize) -> Vec3<T> {
        self.centers[view]
    }

    /// Among views passing the depth test at `point` (other than `exclude`),
    /// the one whose viewing ray `point − c_j` best aligns with `direction`.
    /// Exact ties go to the lowest camera id.
    pub fn best_view(&self, point: Vec3<T>, direction: Vec3<T>, exclude: Option<usize>, tol: T) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for &j in &self.view_order {
            if Some(j) == exclude || !self.visible(point, j, tol) {
                continue;
            }
            let score = (point - self.centers[j]).normalized().dot(direction);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn camera_index(&self, id: u32) -> Option<usize> {
        self.cameras.iter().position(|c| c.id == id)
    }
}
