//! Pinhole cameras.
//!
//! World-to-camera: `x_cam = R·x_world + t`, camera looks down +z, image x
//! right and y down. Depth is measured along camera z.

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};
use crate::num::Real;
use crate::raytrace::Ray;

#[derive(Clone, Debug, PartialEq)]
pub struct Camera<T> {
    pub id: u32,
    pub width: usize,
    pub height: usize,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

/// Projection of a world point into a camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T> {
    pub u: T,
    pub v: T,
    /// Camera-space z.
    pub depth: T,
}

impl<T: Real> Camera<T> {
    /// Camera at `eye` looking at `target` with the given horizontal field of
    /// view; principal point at the image center.
    pub fn look_at(id: u32, width: usize, height: usize, hfov_deg: T, eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Self {
        let rotation = crate::math::look_at_rotation(eye, target, up);
        let half = T::lit(0.5);
        let f = T::from_usize_lossy(width) * half / (hfov_deg.to_radians() * half).tan();
        Camera {
            id,
            width,
            height,
            fx: f,
            fy: f,
            cx: T::from_usize_lossy(width) * half,
            cy: T::from_usize_lossy(height) * half,
            rotation,
            translation: -rotation.mul_vec(eye),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera { camera: self.id, reason: "zero-sized image".into() });
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidCamera { camera: self.id, reason: "non-positive focal length".into() });
        }
        if !(self.cx.is_finite() && self.cy.is_finite() && self.translation.is_finite()) {
            return Err(Error::InvalidCamera { camera: self.id, reason: "non-finite parameters".into() });
        }
        if !self.rotation.is_rotation(T::lit(1e-6)) {
            return Err(Error::InvalidRotation { camera: self.id });
        }
        Ok(())
    }

    /// Projection center in world space, `−Rᵀt`.
    #[inline]
    pub fn center(&self) -> Vec3<T> {
        -self.rotation.mul_vec_transposed(self.translation)
    }

    #[inline]
    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    #[inline]
    pub fn depth_of(&self, p: Vec3<T>) -> T {
        self.rotation.row(2).dot(p) + self.translation.z
    }

    /// Projects a world point; `None` when it is not in front of the camera.
    #[inline]
    pub fn project(&self, p: Vec3<T>) -> Option<Projection<T>> {
        let c = self.to_camera(p);
        if !(c.z > T::zero()) {
            return None;
        }
        Some(Projection { u: self.fx * c.x / c.z + self.cx, v: self.fy * c.y / c.z + self.cy, depth: c.z })
    }

    /// Inside the image rectangle `[0, W) × [0, H)`.
    #[inline]
    pub fn contains(&self, u: T, v: T) -> bool {
        u >= T::zero() && v >= T::zero() && u < T::from_usize_lossy(self.width) && v < T::from_usize_lossy(self.height)
    }

    /// World point at camera depth `depth` behind continuous pixel `(u, v)`.
    pub fn unproject(&self, u: T, v: T, depth: T) -> Vec3<T> {
        let c = Vec3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth);
        self.rotation.mul_vec_transposed(c - self.translation)
    }

    /// Unit world-space direction through continuous pixel `(u, v)`.
    #[inline]
    pub fn direction(&self, u: T, v: T) -> Vec3<T> {
        let c = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one());
        self.rotation.mul_vec_transposed(c).normalized()
    }

    /// Primary ray through the center of pixel `(x, y)`.
    #[inline]
    pub fn pixel_ray(&self, x: usize, y: usize) -> Ray<T> {
        let half = T::lit(0.5);
        let (u, v) = (T::from_usize_lossy(x) + half, T::from_usize_lossy(y) + half);
        Ray::new(self.center(), self.direction(u, v))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        Camera {
            id: self.id,
            width: self.width,
            height: self.height,
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            rotation: Mat3::from_row_major_f64(&self.rotation.to_row_major_f64()),
            translation: self.translation.cast(),
        }
    }
}
