//! Hybrid image-based / physically-based feature renderer for neural
//! relighting of multi-view captures.
//!
//! The pipeline turns calibrated photographs plus a proxy mesh into the
//! 66-channel per-pixel feature stack a relighting network consumes:
//! irradiance maps ([`irradiance`]), mirror images ([`mirror`]), novel-view
//! composites ([`reproject`]), and the packed tensor ([`featurepack`]).
//!
//! All geometry and shading code is generic over the scalar type
//! ([`Real`]: `f32` or `f64`). The aliases at the crate root fix the scalar
//! to `f64`, which is what the command line tool uses.

// Negated comparisons deliberately treat NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod featurepack;
pub mod gbuffer;
pub mod geomproc;
pub mod image;
pub mod io;
pub mod irradiance;
pub mod math;
pub mod mesh;
pub mod mirror;
pub mod num;
pub mod oracle;
pub mod pipeline;
pub mod raytrace;
pub mod reproject;
pub mod rng;
pub mod sampling;
pub mod scene;

pub use error::{Error, Result};
pub use num::Real;

/// Default scalar type.
pub type Scalar = f64;

pub type Vec3 = math::Vec3<Scalar>;
pub type Rgb = math::Rgb<Scalar>;
pub type Mat3 = math::Mat3<Scalar>;
pub type Camera = camera::Camera<Scalar>;
pub type TriangleMesh = mesh::TriangleMesh<Scalar>;
pub type RadianceImage = scene::RadianceImage<Scalar>;
pub type AreaLight = scene::AreaLight<Scalar>;
pub type LightingEdit = scene::LightingEdit<Scalar>;
pub type MultiViewScene = scene::MultiViewScene<Scalar>;
pub type RgbMap = image::RgbMap<Scalar>;
pub type ScalarMap = image::ScalarMap<Scalar>;
pub type Ray = raytrace::Ray<Scalar>;
pub type Hit = raytrace::Hit<Scalar>;
pub type Bvh = raytrace::Bvh<Scalar>;

/// Single-precision variants.
pub mod f32 {
    pub type Vec3 = crate::math::Vec3<f32>;
    pub type Camera = crate::camera::Camera<f32>;
    pub type TriangleMesh = crate::mesh::TriangleMesh<f32>;
    pub type RadianceImage = crate::scene::RadianceImage<f32>;
    pub type MultiViewScene = crate::scene::MultiViewScene<f32>;
    pub type RgbMap = crate::image::RgbMap<f32>;
}
