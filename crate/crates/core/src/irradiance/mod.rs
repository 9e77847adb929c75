//! Diffuse lighting: source irradiance from the photographs, clipped-light
//! recovery, the albedo mesh, added irradiance for new lights, and removed
//! irradiance.
//!
//! Irradiance is `E(x) = ∫ L(x, ω) cos θ dω` with no `1/π`, so the
//! pseudo-albedo `I / E` of a Lambertian surface with reflectance `ρ` is
//! `ρ / π`. Source and added irradiance share this convention, which makes
//! `(I / E_src) · E_add` the radiance the surface would reflect under the
//! added light.

mod added;
mod albedo;
mod clusters;
mod denoise;
mod solve;
mod source;

use std::collections::BTreeMap;

pub use added::{compute_added_irradiance, AddedParams};
pub(crate) use added::light_sample;
pub use albedo::{build_albedo_mesh, division_floor, AlbedoMesh};
pub use clusters::{cluster_irradiance, detect_light_clusters, ClusterParams, LightCluster};
pub use denoise::{denoise_irradiance, DenoiseParams};
pub use solve::{
    combine_source_irradiance, gather_click_samples, nnls, solve_clipped_lights, solve_light_system, AlbedoClickSet,
    ClickPoint, ClickSample, LightSolve,
};
pub use source::{estimate_source_irradiance, SourceIrradiance, SourceParams};

use crate::image::{Mask, RgbMap};
use crate::num::Real;

/// Everything known about one input view's diffuse lighting.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewIrradiance<T> {
    pub e_src: RgbMap<T>,
    pub e_src_nc: RgbMap<T>,
    /// Primary hit and at least one sample reprojected.
    pub valid: Mask,
    /// Unit-emittance irradiance per light cluster, in cluster order.
    pub e_cluster: Vec<RgbMap<T>>,
    /// Added irradiance per light id, unweighted.
    pub e_add: BTreeMap<u32, RgbMap<T>>,
}

/// Per-view irradiance for a whole scene, aligned with `scene.cameras`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IrradianceSet<T> {
    pub views: Vec<ViewIrradiance<T>>,
    pub clusters: Vec<LightCluster<T>>,
}

impl<T: Real> IrradianceSet<T> {
    pub fn e_src(&self) -> Vec<RgbMap<T>> {
        self.views.iter().map(|v| v.e_src.clone()).collect()
    }

    pub fn valid(&self) -> Vec<Mask> {
        self.views.iter().map(|v| v.valid.clone()).collect()
    }
}

/// `E_rem = α_dim · E_src`.
pub fn removed_irradiance<T: Real>(e_src: &RgbMap<T>, alpha_dim: T) -> RgbMap<T> {
    e_src.scale(alpha_dim)
}
