use crate::image::{Map, Mask, RgbMap, ScalarMap};
use crate::math::{Rgb, Vec3};
use crate::num::Real;

/// Cross-bilateral filter settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseParams {
    /// Spatial Gaussian σ, pixels.
    pub spatial_sigma: f64,
    /// Window half-width, pixels.
    pub radius: usize,
    /// Range σ on relative depth difference.
    pub depth_sigma: f64,
    /// Range σ on the angle between normals, degrees.
    pub normal_sigma_deg: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        DenoiseParams { spatial_sigma: 4.0, radius: 8, depth_sigma: 0.02, normal_sigma_deg: 25.0 }
    }
}

/// Cross-bilateral filter guided by depth and normals.
///
/// Only pixels in `valid` with finite depth take part, both as centers and as
/// neighbors; the rest are passed through unchanged. Weights are normalized,
/// so constant regions are reproduced exactly.
pub fn denoise_irradiance<T: Real>(
    e: &RgbMap<T>,
    depth: &ScalarMap<T>,
    normals: &Map<Vec3<T>>,
    valid: &Mask,
    params: &DenoiseParams,
) -> RgbMap<T> {
    let (w, h) = (e.width(), e.height());
    let r = params.radius as isize;
    let side = 2 * params.radius + 1;
    let inv_s = -0.5 / (params.spatial_sigma * params.spatial_sigma);
    let spatial: Vec<T> = (0..side * side)
        .map(|k| {
            let dx = (k % side) as f64 - params.radius as f64;
            let dy = (k / side) as f64 - params.radius as f64;
            T::lit(((dx * dx + dy * dy) * inv_s).exp())
        })
        .collect();
    let inv_d = T::lit(-0.5 / (params.depth_sigma * params.depth_sigma));
    let sn = params.normal_sigma_deg.to_radians();
    let inv_n = T::lit(-0.5 / (sn * sn));
    let usable = |x: usize, y: usize| *valid.get(x, y) && depth.get(x, y).is_finite();

    Map::from_fn_par(w, h, |x, y| {
        let center = *e.get(x, y);
        if !usable(x, y) {
            return center;
        }
        let d0 = *depth.get(x, y);
        let n0 = *normals.get(x, y);
        let mut acc = Rgb::zero();
        let mut wsum = T::zero();
        for dy in -r..=r {
            let yy = y as isize + dy;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            for dx in -r..=r {
                let xx = x as isize + dx;
                if xx < 0 || xx >= w as isize {
                    continue;
                }
                let (xx, yy) = (xx as usize, yy as usize);
                if !usable(xx, yy) {
                    continue;
                }
                let rel = (*depth.get(xx, yy) - d0) / d0;
                let angle = n0.dot(*normals.get(xx, yy)).clamp_to(-T::one(), T::one()).acos();
                let k = (dy + r) as usize * side + (dx + r) as usize;
                let weight = spatial[k] * (rel * rel * inv_d + angle * angle * inv_n).exp();
                acc += *e.get(xx, yy) * weight;
                wsum = wsum + weight;
            }
        }
        acc / wsum
    })
}
