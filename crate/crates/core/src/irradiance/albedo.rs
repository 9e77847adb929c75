use rayon::prelude::*;

use crate::image::{bilinear_taps, Map, Mask, RgbMap};
use crate::math::Rgb;
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::scene::MultiViewScene;

/// Proxy mesh carrying per-vertex pseudo-albedo (`ρ/π`).
#[derive(Clone, Debug, PartialEq)]
pub struct AlbedoMesh<T> {
    /// Same vertices and triangles as the scene mesh, `albedo` set.
    pub mesh: TriangleMesh<T>,
    /// False for vertices no view sees; their albedo is 0.
    pub seen: Vec<bool>,
}

impl<T: Real> AlbedoMesh<T> {
    /// Barycentric interpolation of vertex albedo.
    #[inline]
    pub fn albedo_at(&self, triangle: u32, u: T, v: T) -> Rgb<T> {
        let a = self.mesh.albedo.as_deref().expect("albedo mesh has albedo");
        let [i0, i1, i2] = self.mesh.triangles[triangle as usize];
        a[i0 as usize] * (T::one() - u - v) + a[i1 as usize] * u + a[i2 as usize] * v
    }
}

/// Division guard `ε = 1e-4 × median(E_src)` over valid pixels and channels.
pub fn division_floor<T: Real>(e_src: &[RgbMap<T>], valid: &[Mask]) -> T {
    let mut values: Vec<T> = Vec::new();
    for (e, m) in e_src.iter().zip(valid) {
        for (p, &ok) in e.pixels().iter().zip(m.pixels()) {
            if ok {
                values.extend(p.to_array());
            }
        }
    }
    if values.is_empty() {
        return T::lit(1e-12);
    }
    let mid = values.len() / 2;
    let (_, median, _) = values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite irradiance"));
    (T::lit(1e-4) * *median).max(T::lit(1e-12))
}

/// Pseudo-albedo per vertex: the inverse-distance-weighted mean over views
/// that see the vertex of `I / max(E_src, ε)` at its projection.
///
/// The ratio is interpolated bilinearly from pixels with valid irradiance;
/// taps without it are dropped and the rest renormalized.
pub fn build_albedo_mesh<T: Real>(scene: &MultiViewScene<T>, e_src: &[RgbMap<T>], valid: &[Mask], tol: T) -> AlbedoMesh<T> {
    let eps = division_floor(e_src, valid);
    let ratios: Vec<RgbMap<T>> = scene
        .images
        .iter()
        .zip(e_src)
        .map(|(img, e)| {
            Map::from_vec(
                e.width(),
                e.height(),
                img.pixels.pixels().iter().zip(e.pixels()).map(|(i, e)| i.div_elem(e.map(|c| c.max(eps)))).collect(),
            )
            .expect("aligned maps")
        })
        .collect();
    let d_floor = scene.distance_floor();
    let order = scene.view_order();

    let per_vertex: Vec<(Rgb<T>, bool)> = scene
        .mesh
        .vertices
        .par_iter()
        .map(|&v| {
            let mut acc = Rgb::zero();
            let mut wsum = T::zero();
            for &i in order {
                if !scene.visible(v, i, tol) {
                    continue;
                }
                let cam = &scene.cameras[i];
                let Some(p) = cam.project(v) else { continue };
                let taps = bilinear_taps(cam.width, cam.height, p.u, p.v);
                let (mut s, mut tw) = (Rgb::zero(), T::zero());
                for t in &taps {
                    if *valid[i].get(t.x, t.y) {
                        s += *ratios[i].get(t.x, t.y) * t.weight;
                        tw = tw + t.weight;
                    }
                }
                if tw <= T::zero() {
                    continue;
                }
                let w = T::one() / (scene.center(i) - v).length().max(d_floor);
                acc += s / tw * w;
                wsum = wsum + w;
            }
            if wsum > T::zero() {
                (acc / wsum, true)
            } else {
                (Rgb::zero(), false)
            }
        })
        .collect();

    let mut mesh = scene.mesh.clone();
    mesh.albedo = Some(per_vertex.iter().map(|p| p.0).collect());
    AlbedoMesh { mesh, seen: per_vertex.iter().map(|p| p.1).collect() }
}
