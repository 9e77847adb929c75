use super::albedo::AlbedoMesh;
use super::denoise::{denoise_irradiance, DenoiseParams};
use crate::camera::Camera;
use crate::gbuffer::{depth_map, hit_mask, normal_map, render_gbuffer};
use crate::image::{Map, RgbMap};
use crate::math::{Frame, Rgb, Vec3};
use crate::num::Real;
use crate::raytrace::{Bvh, Ray};
use crate::rng::{hash_words, sample_rng, SampleRng, Stream};
use crate::sampling::{cosine_hemisphere, uniform};
use crate::scene::{AreaLight, MultiViewScene};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AddedParams {
    pub spp: usize,
    /// Number of path vertices that receive light; 1 is direct light only.
    pub max_depth: usize,
    pub seed: u64,
    /// `None` returns the raw estimate.
    pub denoise: Option<DenoiseParams>,
}

impl Default for AddedParams {
    fn default() -> Self {
        AddedParams { spp: 16, max_depth: 5, seed: 0, denoise: Some(DenoiseParams::default()) }
    }
}

/// Irradiance one area light delivers to `x` with normal `n`, from a single
/// uniform point sample on the light.
pub(crate) fn light_sample<T: Real>(bvh: &Bvh<T>, offset: T, light: &AreaLight<T>, x: Vec3<T>, n: Vec3<T>, rng: &mut SampleRng) -> Rgb<T> {
    let q = light.point(uniform(rng), uniform(rng));
    let d = q - x;
    let dist2 = d.length_squared();
    if !(dist2 > T::zero()) {
        return Rgb::zero();
    }
    let dist = dist2.sqrt();
    let w = d / dist;
    let cos_x = n.dot(w);
    if cos_x <= T::zero() {
        return Rgb::zero();
    }
    let le = light.radiance_toward(-w);
    if le.max_component() <= T::zero() {
        return Rgb::zero();
    }
    let span = dist - offset * T::lit(2.0);
    if span > T::zero() && bvh.occluded(&Ray::segment(x + w * offset, w, span)) {
        return Rgb::zero();
    }
    let cos_l = light.normal().dot(w).abs();
    le * (cos_x * cos_l * light.area() / dist2)
}

/// Path-traced irradiance from the weighted `lights` at every primary hit of
/// `camera`, bouncing off the albedo mesh.
///
/// Each vertex gathers one light sample per light; interreflections scale the
/// path by `π · albedo` (cosine-sampled Lambertian with BRDF `albedo`). Light
/// samples are seeded per light id and bounce, path samples independently of the
/// lights, so the result is exactly linear in the light weights.
pub fn compute_added_irradiance<T: Real>(
    scene: &MultiViewScene<T>,
    albedo: &AlbedoMesh<T>,
    lights: &[(AreaLight<T>, T)],
    camera: &Camera<T>,
    params: &AddedParams,
) -> RgbMap<T> {
    assert_eq!(albedo.mesh.triangles.len(), scene.mesh.triangles.len(), "albedo mesh must match the scene mesh");
    let g = render_gbuffer(scene, camera);
    let offset = scene.ray_offset();
    let width = camera.width;
    let spp = params.spp.max(1);

    let raw = Map::from_fn_par(camera.width, camera.height, |x, y| {
        let Some(s) = g.get(x, y) else { return Rgb::zero() };
        let pixel = (y * width + x) as u64;
        let mut total = Rgb::zero();
        for k in 0..spp {
            let mut path_rng = sample_rng(params.seed, Stream::AddedPath, u64::from(camera.id), pixel, k as u64);
            let (mut pos, mut n) = (s.position, s.normal);
            let mut throughput = Rgb::splat(T::one());
            for depth in 0..params.max_depth.max(1) {
                let mut direct = Rgb::zero();
                for (light, weight) in lights {
                    let stream = hash_words(&[u64::from(camera.id), u64::from(light.id), depth as u64]);
                    let mut rng = sample_rng(params.seed, Stream::AddedLight, stream, pixel, k as u64);
                    direct += light_sample(scene.bvh(), offset, light, pos, n, &mut rng) * *weight;
                }
                total += throughput.mul_elem(direct);
                if depth + 1 >= params.max_depth {
                    break;
                }
                let dir = cosine_hemisphere(&Frame::from_normal(n), uniform(&mut path_rng), uniform(&mut path_rng));
                let Some(hit) = scene.trace(&Ray::offset(pos, dir, offset)) else { break };
                let a = albedo.albedo_at(hit.triangle, hit.u, hit.v);
                throughput = throughput.mul_elem(a * T::PI());
                if throughput.max_component() <= T::zero() {
                    break;
                }
                pos = hit.position;
                n = hit.normal_facing(-dir);
            }
        }
        total / T::from_usize_lossy(spp)
    });

    match &params.denoise {
        Some(p) => denoise_irradiance(&raw, &depth_map(&g), &normal_map(&g), &hit_mask(&g), p),
        None => raw,
    }
}
