//! Mirror images: radiance fetched along the perfect reflection direction of
//! each pixel's first surface hit, for the input views (from the photographs)
//! and for a novel view (from pseudo-relit photographs).

use crate::camera::Camera;
use crate::gbuffer::{render_gbuffer, GBuffer};
use crate::image::{bilinear_taps, Map, Mask, RgbMap, Tap};
use crate::irradiance::ViewIrradiance;
use crate::math::{Rgb, Vec3};
use crate::num::Real;
use crate::raytrace::Ray;
use crate::scene::{LightingEdit, MultiViewScene};

/// Upper bound on the pseudo-albedo `I / E`.
pub const ALBEDO_CLAMP: f64 = 4.0;

/// Where a pixel's mirror ray landed and which view serves it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorHit<T> {
    pub point: Vec3<T>,
    /// Selected view index and the projection of `point` into it.
    pub source: Option<(usize, T, T)>,
}

pub type MirrorTrace<T> = Map<Option<MirrorHit<T>>>;

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMap<T> {
    pub values: RgbMap<T>,
    pub valid: Mask,
    /// Target mirrors only: set where a bilinear tap touched a pixel whose
    /// pseudo-albedo was clamped or whose irradiance was invalid.
    pub clamped: Mask,
}

/// Traces one reflection ray per pixel of `camera` and selects the view that
/// best aligns with it.
pub fn trace_mirror<T: Real>(scene: &MultiViewScene<T>, camera: &Camera<T>, tol: T) -> MirrorTrace<T> {
    trace_mirror_from_gbuffer(scene, camera, &render_gbuffer(scene, camera), tol)
}

/// [`trace_mirror`] reusing the camera's primary hits.
pub fn trace_mirror_from_gbuffer<T: Real>(scene: &MultiViewScene<T>, camera: &Camera<T>, g: &GBuffer<T>, tol: T) -> MirrorTrace<T> {
    let offset = scene.ray_offset();
    let c = camera.center();
    Map::from_fn_par(camera.width, camera.height, |x, y| {
        let s = (*g.get(x, y))?;
        let incoming = (s.position - c).normalized();
        let dir = incoming.reflect(s.normal).normalized();
        let hit = scene.trace(&Ray::offset(s.position, dir, offset))?;
        let source = scene.best_view(hit.position, dir, None, tol).and_then(|j| {
            let p = scene.cameras[j].project(hit.position)?;
            Some((j, p.u, p.v))
        });
        Some(MirrorHit { point: hit.position, source })
    })
}

/// Source mirror image: every pixel's reflection looked up in the
/// photograph that best sees it.
pub fn compute_source_mirror<T: Real>(scene: &MultiViewScene<T>, view: usize, tol: T) -> MirrorMap<T> {
    mirror_from_trace(scene, &trace_mirror(scene, &scene.cameras[view], tol))
}

pub fn mirror_from_trace<T: Real>(scene: &MultiViewScene<T>, trace: &MirrorTrace<T>) -> MirrorMap<T> {
    let values = trace.map(|h| match h.and_then(|h| h.source) {
        Some((j, u, v)) => scene.images[j].pixels.bilinear(u, v),
        None => Rgb::zero(),
    });
    let valid = trace.map(|h| h.is_some_and(|h| h.source.is_some()));
    let clamped = Map::filled(trace.width(), trace.height(), false);
    MirrorMap { values, valid, clamped }
}

/// `Σ_l w_l · E_add,l` over the lights named in the edit, in light id order.
pub fn weighted_added<T: Real>(irr: &ViewIrradiance<T>, edit: &LightingEdit<T>, x: usize, y: usize) -> Rgb<T> {
    let mut acc = Rgb::zero();
    for (id, e) in &irr.e_add {
        let w = edit.weight(*id);
        if w != T::zero() {
            acc += *e.get(x, y) * w;
        }
    }
    acc
}

/// One pixel of a pseudo-relit view, and whether the albedo estimate was
/// clamped (division floor or upper bound) or the irradiance invalid.
#[inline]
pub fn pseudo_relit_pixel<T: Real>(image: Rgb<T>, e_src: Rgb<T>, added: Rgb<T>, alpha_dim: T, valid: bool, eps: T) -> (Rgb<T>, bool) {
    if !valid {
        return (Rgb::zero(), true);
    }
    let a_max = T::lit(ALBEDO_CLAMP);
    let mut clamped = false;
    let mut out = [T::zero(); 3];
    for c in 0..3 {
        let e = e_src[c];
        if e < eps {
            clamped = true;
        }
        let ratio = image[c] / e.max(eps);
        if ratio > a_max {
            clamped = true;
        }
        let e_rem = alpha_dim * e;
        out[c] = ratio.clamp_to(T::zero(), a_max) * (added[c] + e - e_rem);
    }
    (Rgb::from_array(out), clamped)
}

/// The photograph of `view` as it would look under `edit`:
/// `clamp(I / max(E_src, ε), 0, A_max) · (Σ w·E_add + E_src − E_rem)`.
pub fn pseudo_relit_view<T: Real>(scene: &MultiViewScene<T>, view: usize, irr: &ViewIrradiance<T>, edit: &LightingEdit<T>, eps: T) -> RgbMap<T> {
    let img = &scene.images[view].pixels;
    Map::from_fn_par(img.width(), img.height(), |x, y| {
        pseudo_relit_pixel(*img.get(x, y), *irr.e_src.get(x, y), weighted_added(irr, edit, x, y), edit.alpha_dim, *irr.valid.get(x, y), eps).0
    })
}

/// Target mirror image for `camera` under `edit`: the source mirror
/// procedure, sampling pseudo-relit views instead of the photographs.
///
/// Pseudo-relit values are evaluated only at the four bilinear taps each
/// pixel needs.
pub fn compute_target_mirror<T: Real>(
    scene: &MultiViewScene<T>,
    irradiance: &[ViewIrradiance<T>],
    edit: &LightingEdit<T>,
    camera: &Camera<T>,
    eps: T,
    tol: T,
) -> MirrorMap<T> {
    target_mirror_from_trace(scene, irradiance, edit, &trace_mirror(scene, camera, tol), eps)
}

/// [`compute_target_mirror`] on an existing mirror trace.
pub fn target_mirror_from_trace<T: Real>(
    scene: &MultiViewScene<T>,
    irradiance: &[ViewIrradiance<T>],
    edit: &LightingEdit<T>,
    trace: &MirrorTrace<T>,
    eps: T,
) -> MirrorMap<T> {
    let relit = |j: usize, t: &Tap<T>| {
        let irr = &irradiance[j];
        pseudo_relit_pixel(
            *scene.images[j].pixels.get(t.x, t.y),
            *irr.e_src.get(t.x, t.y),
            weighted_added(irr, edit, t.x, t.y),
            edit.alpha_dim,
            *irr.valid.get(t.x, t.y),
            eps,
        )
    };
    let sampled = Map::from_fn_par(trace.width(), trace.height(), |x, y| {
        let Some((j, u, v)) = trace.get(x, y).and_then(|h| h.source) else { return (Rgb::zero(), false, false) };
        let cam = &scene.cameras[j];
        let taps = bilinear_taps(cam.width, cam.height, u, v);
        let mut clamped = false;
        let mut acc = Rgb::zero();
        for (k, t) in taps.iter().enumerate() {
            let (value, c) = relit(j, t);
            clamped |= c && t.weight > T::zero();
            acc = if k == 0 { value * t.weight } else { acc + value * t.weight };
        }
        (acc, true, clamped)
    });
    MirrorMap { values: sampled.map(|s| s.0), valid: sampled.map(|s| s.1), clamped: sampled.map(|s| s.2) }
}
