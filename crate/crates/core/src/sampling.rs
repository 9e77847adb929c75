//! Direction sampling on the hemisphere and inside cones.

use rand::Rng;

use crate::math::{Frame, Vec3};
use crate::num::Real;

/// Uniform variate in `[0, 1)`.
#[inline]
pub fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.gen::<f64>())
}

/// Cosine-weighted direction around `frame.normal`; pdf `cosθ / π`.
#[inline]
pub fn cosine_hemisphere<T: Real>(frame: &Frame<T>, u1: T, u2: T) -> Vec3<T> {
    let r = u1.sqrt();
    let phi = T::TAU() * u2;
    let z = (T::one() - u1).max(T::zero()).sqrt();
    frame.to_world(Vec3::new(r * phi.cos(), r * phi.sin(), z))
}

/// Uniform direction inside the cone of half-angle `acos(cos_max)` around
/// `frame.normal`; pdf `1 / (2π (1 − cos_max))`.
#[inline]
pub fn uniform_cone<T: Real>(frame: &Frame<T>, cos_max: T, u1: T, u2: T) -> Vec3<T> {
    let cos_t = T::one() - u1 * (T::one() - cos_max);
    let sin_t = (T::one() - cos_t * cos_t).max(T::zero()).sqrt();
    let phi = T::TAU() * u2;
    frame.to_world(Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t))
}

#[inline]
pub fn uniform_cone_pdf<T: Real>(cos_max: T) -> T {
    T::one() / (T::TAU() * (T::one() - cos_max))
}
