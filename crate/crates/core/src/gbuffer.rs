//! Per-pixel primary hits of a camera against the proxy mesh.

use crate::camera::Camera;
use crate::image::Map;
use crate::math::Vec3;
use crate::num::Real;
use crate::scene::MultiViewScene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint<T> {
    pub position: Vec3<T>,
    /// Shading normal oriented toward the camera.
    pub normal: Vec3<T>,
    pub triangle: u32,
    pub u: T,
    pub v: T,
    /// Camera-space z of the hit.
    pub depth: T,
}

pub type GBuffer<T> = Map<Option<SurfacePoint<T>>>;

/// Traces one ray through every pixel center of `camera`.
pub fn render_gbuffer<T: Real>(scene: &MultiViewScene<T>, camera: &Camera<T>) -> GBuffer<T> {
    Map::from_fn_par(camera.width, camera.height, |x, y| {
        let ray = camera.pixel_ray(x, y);
        scene.trace(&ray).map(|hit| SurfacePoint {
            position: hit.position,
            normal: hit.normal_facing(-ray.direction),
            triangle: hit.triangle,
            u: hit.u,
            v: hit.v,
            depth: camera.depth_of(hit.position),
        })
    })
}

/// Depth map of a G-buffer, `+∞` where nothing was hit.
pub fn depth_map<T: Real>(g: &GBuffer<T>) -> Map<T> {
    g.map(|s| s.map_or(T::infinity(), |s| s.depth))
}

/// Normal map of a G-buffer, zero where nothing was hit.
pub fn normal_map<T: Real>(g: &GBuffer<T>) -> Map<Vec3<T>> {
    g.map(|s| s.map_or(Vec3::zero(), |s| s.normal))
}

/// Hit mask of a G-buffer.
pub fn hit_mask<T: Real>(g: &GBuffer<T>) -> Map<bool> {
    g.map(|s| s.is_some())
}
