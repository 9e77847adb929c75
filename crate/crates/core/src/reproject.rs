//! Novel-view compositing.
//!
//! Every novel pixel's surface point is looked up in each input view that
//! passes the depth test. The reprojected samples are reduced four ways by
//! heuristic weights (`I_1..4`), four ways by luminance rank (`I_5..8`), and
//! by inverse camera distance for irradiance. Mirror composites `M_k` reuse
//! the image weights and rank selections.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::camera::Camera;
use crate::gbuffer::{render_gbuffer, GBuffer, SurfacePoint};
use crate::image::{bilinear_taps, Map, Mask, RgbMap, ScalarMap};
use crate::irradiance::ViewIrradiance;
use crate::math::{Rgb, Vec3};
use crate::mirror::{trace_mirror_from_gbuffer, MirrorMap, MirrorTrace};
use crate::num::Real;
use crate::raytrace::render_depth;
use crate::scene::{depth_test, LightingEdit, MultiViewScene};

/// Upper bound of the reflection distance ratio, also used on mirror misses.
pub const MAX_REFLECTION_RATIO: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct WarpedView<T> {
    pub values: RgbMap<T>,
    pub valid: Mask,
    /// Source pixel coordinates and source-camera depth, where valid.
    pub source: Map<Option<(T, T, T)>>,
}

/// Backward warp of view `view` into `camera` through the proxy geometry.
pub fn warp_view<T: Real>(scene: &MultiViewScene<T>, view: usize, camera: &Camera<T>, tol: T) -> WarpedView<T> {
    let g = render_gbuffer(scene, camera);
    let cam = &scene.cameras[view];
    let source = g.map(|s| {
        let s = (*s)?;
        if !scene.visible(s.position, view, tol) {
            return None;
        }
        cam.project(s.position).map(|p| (p.u, p.v, p.depth))
    });
    let values = source.map(|p| p.map_or(Rgb::zero(), |(u, v, _)| scene.images[view].pixels.bilinear(u, v)));
    let valid = source.map(|p| p.is_some());
    WarpedView { values, valid, source }
}

/// The four heuristic blending weights of view center `c_i` for surface
/// point `x` with normal `n`, seen from `c_new`.
#[inline]
pub fn heuristic_weights<T: Real>(c_new: Vec3<T>, c_i: Vec3<T>, x: Vec3<T>, n: Vec3<T>, d_floor: T) -> [T; 4] {
    let floor2 = d_floor * d_floor;
    let w1 = T::one() / (c_new - c_i).length_squared().max(floor2);
    let to_new = (c_new - x).normalized();
    let to_i = c_i - x;
    let dist_i = to_i.length();
    let cos = to_new.dot(to_i / dist_i.max(d_floor));
    let w2 = cos * cos;
    let w3 = T::one() / to_i.length_squared().max(floor2);
    let facing = to_i.dot(n).max(T::zero());
    let w4 = (facing / (T::lit(0.1) * dist_i.max(d_floor))).exp() - T::one();
    [w1, w2, w3, w4]
}

/// Positions of `I_5..8` in a luminance-descending list of `k ≥ 1` samples:
/// highest, second highest, lower median, lowest.
#[inline]
pub fn rank_slots(k: usize) -> [usize; 4] {
    let last = k - 1;
    let second = if k == 2 { 0 } else { 1.min(last) };
    let lower_median = last - last / 2;
    [0, second, lower_median, last]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtraFeatures<T> {
    /// Inverse depth, min-max normalized over the frame.
    pub disparity: ScalarMap<T>,
    /// Camera-space shading normal.
    pub normal: Map<Vec3<T>>,
    /// Cosine between the normal and the direction to the camera, in `[0,1]`.
    pub cosine: ScalarMap<T>,
    /// `‖x − y‖ / ‖x − c‖` for mirror hit `y`, in `[0, 10]`.
    pub ratio: ScalarMap<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeSet<T> {
    /// `I_1..8`.
    pub images: [RgbMap<T>; 8],
    /// `M_1..8`.
    pub mirrors: [RgbMap<T>; 8],
    pub e_src: RgbMap<T>,
    /// Unweighted added irradiance per light id.
    pub e_add: BTreeMap<u32, RgbMap<T>>,
    /// `Σ w_l · E_add,l` under the edit.
    pub e_add_mixed: RgbMap<T>,
    pub e_rem: RgbMap<T>,
    pub extra: ExtraFeatures<T>,
    /// Number of views passing the depth test per pixel.
    pub valid_views: Map<u32>,
}

/// Per-view inputs to compositing, aligned with `scene.cameras`. Empty
/// slices contribute zeros.
#[derive(Clone, Copy, Debug)]
pub struct CompositeSources<'a, T> {
    pub mirrors: &'a [MirrorMap<T>],
    pub irradiance: &'a [ViewIrradiance<T>],
}

/// Primary hits and mirror hits of a novel camera.
#[derive(Clone, Debug)]
pub struct NovelGeometry<T> {
    pub gbuffer: GBuffer<T>,
    pub mirror: MirrorTrace<T>,
}

impl<T: Real> NovelGeometry<T> {
    pub fn new(scene: &MultiViewScene<T>, camera: &Camera<T>, tol: T) -> Self {
        let gbuffer = render_gbuffer(scene, camera);
        let mirror = trace_mirror_from_gbuffer(scene, camera, &gbuffer, tol);
        NovelGeometry { gbuffer, mirror }
    }
}

struct PixelOut<T> {
    images: [Rgb<T>; 8],
    mirrors: [Rgb<T>; 8],
    e_src: Rgb<T>,
    e_rem: Rgb<T>,
    e_add: Vec<Rgb<T>>,
    valid: u32,
}

struct Sample<T> {
    luminance: T,
    image: Rgb<T>,
    mirror: Rgb<T>,
}

#[allow(clippy::too_many_arguments)]
fn composite_pixel<T: Real>(
    scene: &MultiViewScene<T>,
    sources: &CompositeSources<'_, T>,
    light_ids: &[u32],
    alpha_dim: T,
    c_new: Vec3<T>,
    s: &SurfacePoint<T>,
    tol: T,
    scratch: &mut Vec<Sample<T>>,
) -> PixelOut<T> {
    let zero = Rgb::zero();
    let d_floor = scene.distance_floor();
    let (x, n) = (s.position, s.normal);
    scratch.clear();
    let mut sums = [zero; 4];
    let mut mirror_sums = [zero; 4];
    let mut wsum = [T::zero(); 4];
    let (mut plain, mut plain_mirror) = (zero, zero);
    let (mut e_src, mut e_rem) = (zero, zero);
    let mut e_add = vec![zero; light_ids.len()];
    let mut w_irr = T::zero();

    for &i in scene.view_order() {
        if !scene.visible(x, i, tol) {
            continue;
        }
        let cam = &scene.cameras[i];
        let Some(p) = cam.project(x) else { continue };
        let taps = bilinear_taps(cam.width, cam.height, p.u, p.v);
        let image = scene.images[i].pixels.combine_taps(&taps, |v| v);
        let mirror = sources.mirrors.get(i).map_or(zero, |m| m.values.combine_taps(&taps, |v| v));
        let c_i = scene.center(i);
        let w = heuristic_weights(c_new, c_i, x, n, d_floor);
        for k in 0..4 {
            sums[k] += image * w[k];
            mirror_sums[k] += mirror * w[k];
            wsum[k] = wsum[k] + w[k];
        }
        plain += image;
        plain_mirror += mirror;
        scratch.push(Sample { luminance: image.luminance(), image, mirror });

        if let Some(irr) = sources.irradiance.get(i) {
            let wi = T::one() / (c_new - c_i).length().max(d_floor);
            let e = irr.e_src.combine_taps(&taps, |v| v);
            e_src += e * wi;
            e_rem += e * alpha_dim * wi;
            for (slot, id) in e_add.iter_mut().zip(light_ids) {
                if let Some(m) = irr.e_add.get(id) {
                    *slot += m.combine_taps(&taps, |v| v) * wi;
                }
            }
            w_irr = w_irr + wi;
        }
    }

    let k = scratch.len();
    let mut out = PixelOut { images: [zero; 8], mirrors: [zero; 8], e_src: zero, e_rem: zero, e_add, valid: k as u32 };
    if k == 0 {
        for e in out.e_add.iter_mut() {
            *e = zero;
        }
        return out;
    }
    let count = T::from_usize_lossy(k);
    for j in 0..4 {
        if wsum[j] > T::zero() {
            out.images[j] = sums[j] / wsum[j];
            out.mirrors[j] = mirror_sums[j] / wsum[j];
        } else {
            out.images[j] = plain / count;
            out.mirrors[j] = plain_mirror / count;
        }
    }
    scratch.sort_by(|a, b| b.luminance.partial_cmp(&a.luminance).unwrap_or(std::cmp::Ordering::Equal));
    for (j, slot) in rank_slots(k).into_iter().enumerate() {
        out.images[4 + j] = scratch[slot].image;
        out.mirrors[4 + j] = scratch[slot].mirror;
    }
    if w_irr > T::zero() {
        out.e_src = e_src / w_irr;
        out.e_rem = e_rem / w_irr;
        for e in out.e_add.iter_mut() {
            *e = *e / w_irr;
        }
    }
    out
}

/// Extra per-pixel geometry features of a novel view.
pub fn extra_features<T: Real>(camera: &Camera<T>, geometry: &NovelGeometry<T>) -> ExtraFeatures<T> {
    let g = &geometry.gbuffer;
    let c = camera.center();
    let inv_depth: Vec<T> = g.pixels().iter().filter_map(|s| s.map(|s| T::one() / s.depth)).collect();
    let lo = inv_depth.iter().copied().fold(T::infinity(), T::min);
    let hi = inv_depth.iter().copied().fold(T::neg_infinity(), T::max);
    let range = hi - lo;
    // Ray-hit round-off on a flat frame counts as a degenerate range.
    let degenerate = !(range > hi.abs() * T::lit(1e-9));
    let disparity = g.map(|s| match s {
        Some(s) if !degenerate => (T::one() / s.depth - lo) / range,
        _ => T::zero(),
    });
    let normal = g.map(|s| s.map_or(Vec3::zero(), |s| camera.rotation.mul_vec(s.normal)));
    let cosine = g.map(|s| s.map_or(T::zero(), |s| s.normal.dot((c - s.position).normalized()).clamp_to(T::zero(), T::one())));
    let max_ratio = T::lit(MAX_REFLECTION_RATIO);
    let ratio = Map::from_vec(
        g.width(),
        g.height(),
        g.pixels()
            .iter()
            .zip(geometry.mirror.pixels())
            .map(|(s, m)| match (s, m) {
                (None, _) => T::zero(),
                (Some(_), None) => max_ratio,
                (Some(s), Some(m)) => ((s.position - m.point).length() / (s.position - c).length()).clamp_to(T::zero(), max_ratio),
            })
            .collect(),
    )
    .expect("aligned maps");
    ExtraFeatures { disparity, normal, cosine, ratio }
}

/// All composites for `camera` under `edit`.
pub fn render_composites<T: Real>(
    scene: &MultiViewScene<T>,
    sources: &CompositeSources<'_, T>,
    edit: &LightingEdit<T>,
    camera: &Camera<T>,
    geometry: &NovelGeometry<T>,
    tol: T,
) -> CompositeSet<T> {
    let (w, h) = (camera.width, camera.height);
    let light_ids: Vec<u32> = sources.irradiance.first().map(|v| v.e_add.keys().copied().collect()).unwrap_or_default();
    let c_new = camera.center();
    let g = &geometry.gbuffer;
    let rows: Vec<Vec<Option<PixelOut<T>>>> = (0..h)
        .into_par_iter()
        .map_init(Vec::new, |scratch, y| {
            (0..w)
                .map(|x| g.get(x, y).as_ref().map(|s| composite_pixel(scene, sources, &light_ids, edit.alpha_dim, c_new, s, tol, scratch)))
                .collect()
        })
        .collect();
    let px: Vec<&Option<PixelOut<T>>> = rows.iter().flatten().collect();
    let zero = Rgb::<T>::zero();
    let rgb = |f: &dyn Fn(&PixelOut<T>) -> Rgb<T>| {
        Map::from_vec(w, h, px.iter().map(|p| p.as_ref().map_or(zero, f)).collect()).expect("frame-sized")
    };
    let images = std::array::from_fn(|k| rgb(&|p| p.images[k]));
    let mirrors = std::array::from_fn(|k| rgb(&|p| p.mirrors[k]));
    let e_add: BTreeMap<u32, RgbMap<T>> = light_ids.iter().enumerate().map(|(l, id)| (*id, rgb(&|p| p.e_add[l]))).collect();
    let mut e_add_mixed = Map::filled(w, h, zero);
    for (id, m) in &e_add {
        let wl = edit.weight(*id);
        for (o, v) in e_add_mixed.pixels_mut().iter_mut().zip(m.pixels()) {
            *o += *v * wl;
        }
    }
    CompositeSet {
        images,
        mirrors,
        e_src: rgb(&|p| p.e_src),
        e_add,
        e_add_mixed,
        e_rem: rgb(&|p| p.e_rem),
        extra: extra_features(camera, geometry),
        valid_views: Map::from_vec(w, h, px.iter().map(|p| p.as_ref().map_or(0, |p| p.valid)).collect()).expect("frame-sized"),
    }
}

/// `I_1..4` and `M_1..4`.
pub fn heuristic_composites<T: Real>(
    scene: &MultiViewScene<T>,
    sources: &CompositeSources<'_, T>,
    camera: &Camera<T>,
    tol: T,
) -> ([RgbMap<T>; 4], [RgbMap<T>; 4]) {
    let c = render_composites(scene, sources, &LightingEdit::noop(), camera, &NovelGeometry::new(scene, camera, tol), tol);
    let [i1, i2, i3, i4, ..] = c.images;
    let [m1, m2, m3, m4, ..] = c.mirrors;
    ([i1, i2, i3, i4], [m1, m2, m3, m4])
}

/// `I_5..8` and `M_5..8`.
pub fn rank_composites<T: Real>(
    scene: &MultiViewScene<T>,
    sources: &CompositeSources<'_, T>,
    camera: &Camera<T>,
    tol: T,
) -> ([RgbMap<T>; 4], [RgbMap<T>; 4]) {
    let c = render_composites(scene, sources, &LightingEdit::noop(), camera, &NovelGeometry::new(scene, camera, tol), tol);
    let [_, _, _, _, i5, i6, i7, i8] = c.images;
    let [_, _, _, _, m5, m6, m7, m8] = c.mirrors;
    ([i5, i6, i7, i8], [m5, m6, m7, m8])
}

/// Blended `E_src`, mixed `E_add`, and `E_rem` for `camera`.
pub fn composite_irradiance<T: Real>(
    scene: &MultiViewScene<T>,
    irradiance: &[ViewIrradiance<T>],
    edit: &LightingEdit<T>,
    camera: &Camera<T>,
    tol: T,
) -> (RgbMap<T>, RgbMap<T>, RgbMap<T>) {
    let sources = CompositeSources { mirrors: &[], irradiance };
    let c = render_composites(scene, &sources, edit, camera, &NovelGeometry::new(scene, camera, tol), tol);
    (c.e_src, c.e_add_mixed, c.e_rem)
}

/// Dense correspondence from camera `a` to camera `b`, in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap<T> {
    /// `project_b(hit_a(p)) − p`.
    pub flow: Map<[T; 2]>,
    pub valid: Mask,
}

/// Flow from `a` to `b` through the proxy geometry; invalid where `a` sees
/// nothing or the point is hidden in `b`.
pub fn compute_flow<T: Real>(scene: &MultiViewScene<T>, a: &Camera<T>, b: &Camera<T>, tol: T) -> FlowMap<T> {
    let g = render_gbuffer(scene, a);
    let depth_b = render_depth(scene.bvh(), b);
    let half = T::lit(0.5);
    let flow = Map::from_fn_par(a.width, a.height, |x, y| {
        let s = (*g.get(x, y))?;
        if !depth_test(b, &depth_b, s.position, tol) {
            return None;
        }
        let p = b.project(s.position)?;
        Some([p.u - (T::from_usize_lossy(x) + half), p.v - (T::from_usize_lossy(y) + half)])
    });
    FlowMap { valid: flow.map(|f| f.is_some()), flow: flow.map(|f| f.unwrap_or([T::zero(); 2])) }
}

/// Samples `image` (seen by camera `b`) at `p + flow(p)` for every valid
/// pixel of the flow's source camera; invalid pixels are 0.
pub fn warp_by_flow<T: Real>(image: &RgbMap<T>, flow: &FlowMap<T>) -> RgbMap<T> {
    let half = T::lit(0.5);
    Map::from_fn_par(flow.flow.width(), flow.flow.height(), |x, y| {
        if !*flow.valid.get(x, y) {
            return Rgb::zero();
        }
        let f = flow.flow.get(x, y);
        image.bilinear(T::from_usize_lossy(x) + half + f[0], T::from_usize_lossy(y) + half + f[1])
    })
}
