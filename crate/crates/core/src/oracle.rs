//! Ground truth at desk scale: procedural rooms with known materials, a
//! reference path tracer that splits diffuse from view-dependent transport,
//! hemisphere quadrature of source irradiance, and mesh degradation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::featurepack::tonemap;
use crate::image::{Map, RgbMap};
use crate::io::{pfm, save_scene_bundle, write_json, LightRecord};
use crate::irradiance::light_sample;
use crate::math::{vec3, Frame, Rgb, Vec3};
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::raytrace::{Bvh, Ray};
use crate::rng::{hash_words, sample_rng, stream_rng, SampleRng, Stream};
use crate::sampling::{cosine_hemisphere, uniform};
use crate::scene::{depth_test, detect_clipped, AreaLight, MultiViewScene, RadianceImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lobe {
    Mirror,
    /// Cosine-power lobe around the mirror direction.
    Rough { exponent: f64 },
}

fn mirror_lobe() -> Lobe {
    Lobe::Mirror
}

/// `(1 − k_s) · ρ/π + k_s · lobe`, with a white specular lobe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub albedo: [f64; 3],
    #[serde(default)]
    pub specular: f64,
    #[serde(default = "mirror_lobe")]
    pub lobe: Lobe,
}

impl Material {
    pub fn diffuse(name: &str, albedo: [f64; 3]) -> Self {
        Material { name: name.into(), albedo, specular: 0.0, lobe: Lobe::Mirror }
    }

    pub fn glossy(name: &str, albedo: [f64; 3], specular: f64, lobe: Lobe) -> Self {
        Material { name: name.into(), albedo, specular, lobe }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("material {}: {m}", self.name)));
        if !(0.0..=1.0).contains(&self.specular) {
            return bad("specular weight outside [0, 1]");
        }
        if self.albedo.iter().any(|&a| !(0.0..=1.0).contains(&a) || a * (1.0 - self.specular) > 1.0) {
            return bad("albedo outside [0, 1]");
        }
        if let Lobe::Rough { exponent } = self.lobe {
            if !(exponent > 0.0 && exponent.is_finite()) {
                return bad("lobe exponent must be positive");
            }
        }
        Ok(())
    }

    fn is_diffuse_only(&self) -> bool {
        self.specular == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ObjectShape {
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(flatten)]
    pub shape: ObjectShape,
    pub material: usize,
}

/// One-sided emitting panel, emitting toward `edge_u × edge_v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub origin: [f64; 3],
    pub edge_u: [f64; 3],
    pub edge_v: [f64; 3],
    pub emittance: [f64; 3],
}

/// Cameras evenly spaced on a horizontal circle, all looking at `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRing {
    pub count: usize,
    pub radius: f64,
    pub elevation: f64,
    pub target: [f64; 3],
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    /// Angular jitter as a fraction of the spacing.
    #[serde(default)]
    pub jitter: f64,
    /// Odd-numbered cameras look here instead of at `target`.
    #[serde(default)]
    pub alternate_target: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProceduralSceneSpec {
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    /// Cells per room face side.
    pub subdivisions: usize,
    pub materials: Vec<Material>,
    /// Material per room face: −x, +x, floor (−y), ceiling (+y), −z, +z.
    pub room_materials: [usize; 6],
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub emitters: Vec<EmitterSpec>,
    pub cameras: CameraRing,
    pub spp: usize,
    pub max_depth: usize,
    /// Sensor saturation; pixels at or above it are clipped and flagged.
    #[serde(default)]
    pub white_level: Option<f64>,
}

impl ProceduralSceneSpec {
    /// Closed gray room, one ceiling panel, twelve cameras alternating between
    /// a low and a high target.
    pub fn empty_room() -> Self {
        ProceduralSceneSpec {
            room_min: [-1.5, 0.0, -1.5],
            room_max: [1.5, 2.4, 1.5],
            subdivisions: 8,
            materials: vec![Material::diffuse("gray", [0.5, 0.5, 0.5])],
            room_materials: [0; 6],
            objects: Vec::new(),
            emitters: vec![EmitterSpec {
                origin: [-0.3, 2.39, -0.3],
                edge_u: [0.6, 0.0, 0.0],
                edge_v: [0.0, 0.0, 0.6],
                emittance: [8.0, 8.0, 8.0],
            }],
            cameras: CameraRing {
                count: 12,
                radius: 1.2,
                elevation: 1.2,
                target: [0.0, 0.5, 0.0],
                width: 64,
                height: 48,
                hfov_deg: 90.0,
                jitter: 0.0,
                alternate_target: Some([0.0, 2.0, 0.0]),
            },
            spp: 64,
            max_depth: 6,
            white_level: None,
        }
    }

    /// Every surface Lambertian with reflectance `rho`, plus a box on the
    /// floor.
    pub fn lambertian_box(rho: [f64; 3]) -> Self {
        let mut s = Self::empty_room();
        s.materials = vec![Material::diffuse("rho", rho)];
        s.objects.push(ObjectSpec { shape: ObjectShape::Box { min: [-0.35, 0.0, -0.35], max: [0.25, 0.5, 0.25] }, material: 0 });
        s
    }

    /// White room with a glossy floor that is a perfect mirror for half of
    /// its energy, a colored wall and a box.
    pub fn mirror_box() -> Self {
        let mut s = Self::empty_room();
        s.materials = vec![
            Material::diffuse("white", [0.7, 0.7, 0.7]),
            Material::glossy("floor", [0.8, 0.8, 0.8], 0.5, Lobe::Mirror),
            Material::diffuse("red", [0.7, 0.2, 0.2]),
            Material::diffuse("blue", [0.2, 0.3, 0.7]),
        ];
        s.room_materials = [2, 3, 1, 0, 0, 0];
        s.objects.push(ObjectSpec { shape: ObjectShape::Box { min: [-0.3, 0.0, -0.2], max: [0.2, 0.45, 0.3] }, material: 0 });
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if (0..3).any(|k| !(self.room_min[k] < self.room_max[k])) {
            return bad("room_min must be below room_max".into());
        }
        for m in &self.materials {
            m.validate()?;
        }
        let n = self.materials.len();
        if self.room_materials.iter().chain(self.objects.iter().map(|o| &o.material)).any(|&m| m >= n) {
            return bad(format!("material index out of range ({n} materials)"));
        }
        if self.cameras.count < 8 {
            return bad(format!("{} cameras; at least 8 are needed", self.cameras.count));
        }
        if self.emitters.is_empty() {
            return bad("no emitters".into());
        }
        if self.spp == 0 || self.max_depth == 0 || self.subdivisions == 0 {
            return bad("spp, max_depth and subdivisions must be positive".into());
        }
        for o in &self.objects {
            if let ObjectShape::Sphere { radius, .. } = o.shape {
                if !(radius > 0.0) {
                    return bad("sphere radius must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn lights<T: Real>(&self) -> Vec<AreaLight<T>> {
        self.emitters
            .iter()
            .enumerate()
            .map(|(i, e)| AreaLight {
                id: i as u32,
                origin: Vec3::from_f64(e.origin),
                edge_u: Vec3::from_f64(e.edge_u),
                edge_v: Vec3::from_f64(e.edge_v),
                emittance: Vec3::from_f64(e.emittance),
                two_sided: false,
            })
            .collect()
    }

    pub fn ring_cameras<T: Real>(&self, seed: u64) -> Vec<Camera<T>> {
        let r = &self.cameras;
        let mut rng = stream_rng(seed, Stream::Procedural);
        let step = std::f64::consts::TAU / r.count as f64;
        let target = Vec3::from_f64(r.target);
        (0..r.count)
            .map(|k| {
                let a = step * (k as f64 + r.jitter * (rng.gen::<f64>() - 0.5));
                let eye = vec3(r.target[0] + r.radius * a.cos(), r.elevation, r.target[2] + r.radius * a.sin());
                let aim = match r.alternate_target {
                    Some(t) if k % 2 == 1 => Vec3::from_f64(t),
                    _ => target,
                };
                Camera::look_at(k as u32, r.width, r.height, T::lit(r.hfov_deg), eye.cast(), aim, Vec3::new(T::zero(), T::one(), T::zero()))
            })
            .collect()
    }
}

/// What a triangle of the ground-truth mesh is made of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Material(u32),
    Emitter(u32),
}

pub struct GtScene<T> {
    pub mesh: TriangleMesh<T>,
    pub materials: Vec<Material>,
    /// Per triangle.
    pub surfaces: Vec<Surface>,
    /// Emitters present in the geometry.
    pub lights: Vec<AreaLight<T>>,
    bvh: Bvh<T>,
    offset: T,
}

impl<T: Real> GtScene<T> {
    pub fn new(mesh: TriangleMesh<T>, materials: Vec<Material>, surfaces: Vec<Surface>, lights: Vec<AreaLight<T>>) -> Result<Self> {
        if surfaces.len() != mesh.triangles.len() {
            return Err(Error::InvalidArgument(format!("{} surfaces for {} triangles", surfaces.len(), mesh.triangles.len())));
        }
        for s in &surfaces {
            match *s {
                Surface::Material(m) if m as usize >= materials.len() => {
                    return Err(Error::InvalidArgument(format!("material {m} out of range")));
                }
                Surface::Emitter(id) if !lights.iter().any(|l| l.id == id) => {
                    return Err(Error::InvalidArgument(format!("emitter {id} has no light")));
                }
                _ => {}
            }
        }
        let bvh = Bvh::build(&mesh)?;
        let offset = T::lit(1e-4) * mesh.bbox_diagonal();
        Ok(GtScene { mesh, materials, surfaces, lights, bvh, offset })
    }

    pub fn from_spec(spec: &ProceduralSceneSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.subdivisions;
        let room = TriangleMesh::aabb_box(Vec3::from_f64(spec.room_min), Vec3::from_f64(spec.room_max), n, true);
        let per_face = 2 * n * n;
        let mut surfaces: Vec<Surface> = (0..room.triangles.len()).map(|t| Surface::Material(spec.room_materials[t / per_face] as u32)).collect();
        let mut mesh = room;
        for o in &spec.objects {
            let part = match o.shape {
                ObjectShape::Box { min, max } => TriangleMesh::aabb_box(Vec3::from_f64(min), Vec3::from_f64(max), 2, false),
                ObjectShape::Sphere { center, radius } => TriangleMesh::icosphere(Vec3::from_f64(center), T::lit(radius), 3),
            };
            surfaces.extend(std::iter::repeat_n(Surface::Material(o.material as u32), part.triangles.len()));
            mesh.append(&part);
        }
        let lights = spec.lights::<T>();
        for l in &lights {
            l.validate()?;
            let part = TriangleMesh::quad(l.origin, l.edge_u, l.edge_v, 1);
            surfaces.extend(std::iter::repeat_n(Surface::Emitter(l.id), part.triangles.len()));
            mesh.append(&part);
        }
        GtScene::new(mesh, spec.materials.clone(), surfaces, lights)
    }

    /// The emitters at full strength.
    pub fn source_lighting(&self) -> Vec<(AreaLight<T>, T)> {
        self.lights.iter().map(|l| (l.clone(), T::one())).collect()
    }

    /// Emitters dimmed by `alpha_dim`, plus `added` lights with their
    /// weights. Added lights have no geometry.
    pub fn edited_lighting(&self, alpha_dim: T, added: &[(AreaLight<T>, T)]) -> Vec<(AreaLight<T>, T)> {
        let mut out: Vec<_> = self.lights.iter().map(|l| (l.clone(), T::one() - alpha_dim)).collect();
        out.extend(added.iter().cloned());
        out
    }

    pub fn all_diffuse(&self) -> bool {
        self.materials.iter().all(Material::is_diffuse_only)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtParams {
    pub spp: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for GtParams {
    fn default() -> Self {
        GtParams { spp: 256, max_depth: 8, seed: 0 }
    }
}

/// Linear ground truth split into diffuse and view-dependent transport.
#[derive(Clone, Debug, PartialEq)]
pub struct GtRender<T> {
    pub diffuse: RgbMap<T>,
    pub vdep: RgbMap<T>,
}

impl<T: Real> GtRender<T> {
    pub fn total(&self) -> RgbMap<T> {
        Map::from_vec(self.diffuse.width(), self.diffuse.height(), self.diffuse.pixels().iter().zip(self.vdep.pixels()).map(|(a, b)| *a + *b).collect())
            .expect("same size")
    }

    /// `(T(O_diffuse), T(O_diffuse + O_vdep) − T(O_diffuse))`.
    pub fn tonemapped(&self, mu: T) -> Result<(RgbMap<T>, RgbMap<T>)> {
        let tm = |p: &Rgb<T>| -> Result<Rgb<T>> { Ok(vec3(tonemap(p.x, mu)?, tonemap(p.y, mu)?, tonemap(p.z, mu)?)) };
        let mut d = Vec::with_capacity(self.diffuse.len());
        let mut v = Vec::with_capacity(self.diffuse.len());
        for (a, b) in self.diffuse.pixels().iter().zip(self.vdep.pixels()) {
            let td = tm(a)?;
            d.push(td);
            v.push(tm(&(*a + *b))? - td);
        }
        let (w, h) = (self.diffuse.width(), self.diffuse.height());
        Ok((Map::from_vec(w, h, d).expect("size"), Map::from_vec(w, h, v).expect("size")))
    }
}

fn emitted<T: Real>(lighting: &[(AreaLight<T>, T)], id: u32, toward: Vec3<T>) -> Rgb<T> {
    lighting.iter().filter(|(l, _)| l.id == id).fold(Rgb::zero(), |acc, (l, w)| acc + l.radiance_toward(toward) * *w)
}

/// Follows one camera path, reporting each radiance contribution and whether
/// the path had a specular interaction before it.
///
/// Diffuse lobes use next-event estimation and ignore emitters they hit;
/// specular lobes pick up emission on hit.
fn trace_path<T: Real>(
    gt: &GtScene<T>,
    lighting: &[(AreaLight<T>, T)],
    mut ray: Ray<T>,
    max_depth: usize,
    rng: &mut SampleRng,
    sink: &mut impl FnMut(Rgb<T>, bool),
) {
    let mut throughput = Rgb::splat(T::one());
    let mut specular = false;
    let mut count_emission = true;
    for depth in 0..max_depth {
        let Some(hit) = gt.bvh.intersect(&ray) else { return };
        let wo = -ray.direction;
        let m = match gt.surfaces[hit.triangle as usize] {
            Surface::Emitter(id) => {
                if count_emission {
                    sink(throughput.mul_elem(emitted(lighting, id, wo)), specular);
                }
                return;
            }
            Surface::Material(m) => &gt.materials[m as usize],
        };
        let n = hit.normal_facing(wo);
        let ks = T::lit(m.specular);
        let rho = Vec3::from_f64(m.albedo);
        let kd = T::one() - ks;
        if kd > T::zero() && rho.max_component() > T::zero() {
            for (light, w) in lighting {
                let e = light_sample(&gt.bvh, gt.offset, light, hit.position, n, rng);
                sink(throughput.mul_elem(rho).mul_elem(e) * (kd * *w / T::PI()), specular);
            }
        }
        if depth + 1 == max_depth {
            return;
        }
        let pick: T = uniform(rng);
        let dir = if pick < ks {
            let r = ray.direction.reflect(n).normalized();
            let (dir, weight) = match m.lobe {
                Lobe::Mirror => (r, T::one()),
                Lobe::Rough { exponent } => {
                    let e = T::lit(exponent);
                    let cos_a = uniform::<T, _>(rng).powf(T::one() / (e + T::one()));
                    let sin_a = (T::one() - cos_a * cos_a).max(T::zero()).sqrt();
                    let phi = T::TAU() * uniform::<T, _>(rng);
                    let d = Frame::from_normal(r).to_world(vec3(sin_a * phi.cos(), sin_a * phi.sin(), cos_a));
                    (d, (e + T::lit(2.0)) / (e + T::one()) * d.dot(n))
                }
            };
            if dir.dot(n) <= T::zero() {
                return;
            }
            throughput *= weight;
            specular = true;
            count_emission = true;
            dir
        } else {
            throughput = throughput.mul_elem(rho);
            count_emission = false;
            cosine_hemisphere(&Frame::from_normal(n), uniform(rng), uniform(rng))
        };
        if depth >= 3 {
            let q = throughput.max_component().min(T::lit(0.95));
            if !(uniform::<T, _>(rng) < q) {
                return;
            }
            throughput = throughput / q;
        }
        ray = Ray::offset(hit.position, dir, gt.offset);
    }
}

fn render_with<T: Real, A: Send>(
    camera: &Camera<T>,
    params: &GtParams,
    init: impl Fn() -> A + Sync,
    per_sample: impl Fn(&mut A, Ray<T>, &mut SampleRng) + Sync,
    finish: impl Fn(A, T) -> (Rgb<T>, Rgb<T>) + Sync,
) -> (RgbMap<T>, RgbMap<T>) {
    let spp = params.spp.max(1);
    let width = camera.width;
    let out = Map::from_fn_par(camera.width, camera.height, |x, y| {
        let pixel = (y * width + x) as u64;
        let mut acc = init();
        for k in 0..spp {
            let mut rng = sample_rng(params.seed, Stream::GroundTruth, u64::from(camera.id), pixel, k as u64);
            per_sample(&mut acc, camera.pixel_ray(x, y), &mut rng);
        }
        finish(acc, T::one() / T::from_usize_lossy(spp))
    });
    (out.map(|p| p.0), out.map(|p| p.1))
}

/// Path-traced ground truth through pixel centers of `camera`. Paths with
/// at least one specular interaction go to `vdep`, everything else to
/// `diffuse`.
pub fn render_ground_truth<T: Real>(gt: &GtScene<T>, camera: &Camera<T>, lighting: &[(AreaLight<T>, T)], params: &GtParams) -> GtRender<T> {
    let (diffuse, vdep) = render_with(
        camera,
        params,
        || (Rgb::zero(), Rgb::zero()),
        |acc: &mut (Rgb<T>, Rgb<T>), ray, rng| {
            trace_path(gt, lighting, ray, params.max_depth, rng, &mut |c, spec| {
                if spec {
                    acc.1 += c;
                } else {
                    acc.0 += c;
                }
            })
        },
        |acc, s| (acc.0 * s, acc.1 * s),
    );
    GtRender { diffuse, vdep }
}

/// The same estimator as [`render_ground_truth`] accumulated into one sum.
pub fn render_unsplit<T: Real>(gt: &GtScene<T>, camera: &Camera<T>, lighting: &[(AreaLight<T>, T)], params: &GtParams) -> RgbMap<T> {
    render_with(
        camera,
        params,
        Rgb::zero,
        |acc: &mut Rgb<T>, ray, rng| trace_path(gt, lighting, ray, params.max_depth, rng, &mut |c, _| *acc += c),
        |acc, s| (acc * s, Rgb::zero()),
    )
    .0
}

pub struct GeneratedScene<T> {
    pub scene: MultiViewScene<T>,
    pub gt: GtScene<T>,
    /// Unclipped renders of the input views under the source lighting.
    pub renders: Vec<GtRender<T>>,
}

/// Builds the room, renders every ring camera and packages the result as a
/// multi-view capture whose mesh is the exact geometry.
pub fn gen_procedural_scene<T: Real>(spec: &ProceduralSceneSpec, seed: u64) -> Result<GeneratedScene<T>> {
    let gt = GtScene::from_spec(spec)?;
    let cameras = spec.ring_cameras::<T>(seed);
    let params = GtParams { spp: spec.spp, max_depth: spec.max_depth, seed };
    let lighting = gt.source_lighting();
    let renders: Vec<GtRender<T>> = cameras.iter().map(|c| render_ground_truth(&gt, c, &lighting, &params)).collect();
    let mut images = Vec::with_capacity(cameras.len());
    for r in &renders {
        let total = r.total();
        let img = match spec.white_level {
            Some(white) => {
                let white = T::lit(white);
                let clipped = total.map(|p| p.map(|c| c.min(white)));
                let mut img = RadianceImage::new(clipped.clone());
                img.clip_mask = detect_clipped(&clipped, white)?;
                img
            }
            None => RadianceImage::new(total),
        };
        images.push(img);
    }
    let mut mesh = gt.mesh.clone();
    mesh.albedo = None;
    let scene = MultiViewScene::new(cameras, images, mesh)?;
    Ok(GeneratedScene { scene, gt, renders })
}

#[derive(Serialize, Deserialize)]
pub struct MaterialsRecord {
    pub materials: Vec<Material>,
    pub emitters: Vec<LightRecord>,
    pub surfaces: Vec<Surface>,
}

/// Writes a scene bundle plus `gt/NNN_diffuse.pfm`, `gt/NNN_vdep.pfm` and
/// `gt/materials.json`. `gt_renders` align with `generated.scene.cameras`.
pub fn write_oracle_outputs<T: Real>(dir: &Path, generated: &GeneratedScene<T>, gt_renders: &[GtRender<T>]) -> Result<()> {
    save_scene_bundle(dir, &generated.scene, None)?;
    let gt_dir = dir.join("gt");
    for (cam, r) in generated.scene.cameras.iter().zip(gt_renders) {
        pfm::write_rgb(&gt_dir.join(format!("{:03}_diffuse.pfm", cam.id)), &r.diffuse)?;
        pfm::write_rgb(&gt_dir.join(format!("{:03}_vdep.pfm", cam.id)), &r.vdep)?;
    }
    let record = MaterialsRecord {
        materials: generated.gt.materials.clone(),
        emitters: generated.gt.lights.iter().map(LightRecord::from_light).collect(),
        surfaces: generated.gt.surfaces.clone(),
    };
    write_json(&gt_dir.join("materials.json"), &record)
}

/// Riemann sum of `π · Σ L cosθ sinθ / Σ cosθ sinθ` over the midpoints of an
/// `n_theta × n_phi` grid on the hemisphere around `normal`. Directions
/// where `radiance` is `None` are left out of both sums; `None` if all are.
pub fn hemisphere_quadrature<T: Real>(normal: Vec3<T>, n_theta: usize, n_phi: usize, radiance: impl Fn(Vec3<T>) -> Option<Rgb<T>>) -> Option<Rgb<T>> {
    let frame = Frame::from_normal(normal);
    let d_theta = T::FRAC_PI_2() / T::from_usize_lossy(n_theta);
    let d_phi = T::TAU() / T::from_usize_lossy(n_phi);
    let half = T::lit(0.5);
    let mut acc = Rgb::zero();
    let mut wsum = T::zero();
    for i in 0..n_theta {
        let theta = (T::from_usize_lossy(i) + half) * d_theta;
        let (st, ct) = (theta.sin(), theta.cos());
        let w = st * ct;
        for j in 0..n_phi {
            let phi = (T::from_usize_lossy(j) + half) * d_phi;
            let d = frame.to_world(vec3(st * phi.cos(), st * phi.sin(), ct));
            if let Some(l) = radiance(d) {
                acc += l * w;
                wsum = wsum + w;
            }
        }
    }
    (wsum > T::zero()).then(|| acc * (T::PI() / wsum))
}

/// Source irradiance at one surface point by dense quadrature, looking up
/// incident radiance in the photographs other than `view`. Views are
/// scanned in camera id order and the best-aligned visible one wins.
pub fn brute_force_irradiance<T: Real>(
    scene: &MultiViewScene<T>,
    view: usize,
    point: Vec3<T>,
    normal: Vec3<T>,
    resolution: (usize, usize),
    tol: T,
) -> Option<Rgb<T>> {
    let mut order: Vec<usize> = (0..scene.cameras.len()).collect();
    order.sort_by_key(|&j| scene.cameras[j].id);
    let offset = scene.ray_offset();
    hemisphere_quadrature(normal, resolution.0, resolution.1, |dir| {
        let hit = scene.trace(&Ray::offset(point, dir, offset))?;
        let y = hit.position;
        let mut best: Option<(usize, T)> = None;
        for &j in &order {
            let cam = &scene.cameras[j];
            if j == view || !depth_test(cam, &scene.depth_maps[j], y, tol) {
                continue;
            }
            let score = (y - cam.center()).normalized().dot(dir);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (j, _) = best?;
        let p = scene.cameras[j].project(y)?;
        Some(scene.images[j].pixels.bilinear(p.u, p.v))
    })
}

fn displacement(seed: u64, p: [f64; 3], max: f64) -> [f64; 3] {
    let key = hash_words(&[seed, Stream::Degrade as u64, p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]);
    let mut rng = SampleRng::seed_from_u64(key);
    let z: f64 = rng.gen::<f64>() * 2.0 - 1.0;
    let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let m = rng.gen::<f64>() * max;
    [r * phi.cos() * m, r * phi.sin() * m, z * m]
}

fn area_weighted_normals<T: Real>(vertices: &[Vec3<T>], triangles: &[[u32; 3]], fallback: &[Vec3<T>]) -> Vec<Vec3<T>> {
    let mut acc = vec![Vec3::zero(); vertices.len()];
    for t in triangles {
        let [a, b, c] = t.map(|k| vertices[k as usize]);
        let n = (b - a).cross(c - a);
        for &k in t {
            acc[k as usize] += n;
        }
    }
    acc.iter()
        .enumerate()
        .map(|(i, n)| if n.length() > T::zero() { n.normalized() } else { fallback.get(i).copied().unwrap_or(Vec3::new(T::zero(), T::one(), T::zero())) })
        .collect()
}

/// Stand-in for a multi-view stereo reconstruction: every vertex moves by a
/// random offset of length at most `vertex_noise × bbox diagonal`, then
/// shortest edges are collapsed until `1 − decimation` of the triangles are
/// left. Coincident vertices receive the same offset. Normals are recomputed
/// and albedo dropped unless the mesh is returned unchanged.
pub fn degrade_mesh<T: Real>(mesh: &TriangleMesh<T>, vertex_noise: f64, decimation: f64, seed: u64) -> TriangleMesh<T> {
    if vertex_noise <= 0.0 && decimation <= 0.0 {
        return mesh.clone();
    }
    let max = vertex_noise.max(0.0) * mesh.bbox_diagonal().as_f64();
    let mut vertices: Vec<Vec3<T>> = mesh
        .vertices
        .iter()
        .map(|v| {
            if max > 0.0 {
                let d = displacement(seed, v.to_f64(), max);
                *v + Vec3::from_f64(d)
            } else {
                *v
            }
        })
        .collect();
    let mut triangles = mesh.triangles.clone();
    if decimation > 0.0 {
        let target = ((1.0 - decimation.min(1.0)) * triangles.len() as f64).round() as usize;
        (vertices, triangles) = collapse_edges(&vertices, &triangles, target);
    }
    let normals = area_weighted_normals(&vertices, &triangles, &mesh.normals);
    TriangleMesh::new(vertices, normals, triangles)
}

/// Welds coincident vertices, then greedily collapses the shortest edge to
/// its midpoint until at most `target` triangles remain.
fn collapse_edges<T: Real>(vertices: &[Vec3<T>], triangles: &[[u32; 3]], target: usize) -> (Vec<Vec3<T>>, Vec<[u32; 3]>) {
    let mut weld: HashMap<[u64; 3], u32> = HashMap::new();
    let mut pos: Vec<Vec3<T>> = Vec::new();
    let remap: Vec<u32> = vertices
        .iter()
        .map(|v| {
            let key = v.to_f64().map(f64::to_bits);
            *weld.entry(key).or_insert_with(|| {
                pos.push(*v);
                (pos.len() - 1) as u32
            })
        })
        .collect();
    let mut tris: Vec<[u32; 3]> = triangles.iter().map(|t| t.map(|k| remap[k as usize])).collect();
    let mut alive: Vec<bool> = tris.iter().map(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]).collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); pos.len()];
    for (i, t) in tris.iter().enumerate() {
        if alive[i] {
            for &k in t {
                incident[k as usize].push(i);
            }
        }
    }
    let mut live_count = alive.iter().filter(|&&a| a).count();
    let mut version = vec![0u32; pos.len()];
    let mut dead = vec![false; pos.len()];
    let key = |pos: &[Vec3<T>], a: u32, b: u32| (pos[a as usize] - pos[b as usize]).length().as_f64().to_bits();
    let mut heap = BinaryHeap::new();
    for t in &tris {
        for e in 0..3 {
            let (a, b) = (t[e].min(t[(e + 1) % 3]), t[e].max(t[(e + 1) % 3]));
            heap.push(Reverse((key(&pos, a, b), a, b, 0u32, 0u32)));
        }
    }
    while live_count > target {
        let Some(Reverse((_, a, b, va, vb))) = heap.pop() else { break };
        let (ai, bi) = (a as usize, b as usize);
        if dead[ai] || dead[bi] || version[ai] != va || version[bi] != vb {
            continue;
        }
        pos[ai] = (pos[ai] + pos[bi]) * T::lit(0.5);
        dead[bi] = true;
        let moved = std::mem::take(&mut incident[bi]);
        for ti in moved {
            if !alive[ti] {
                continue;
            }
            if tris[ti].contains(&a) {
                alive[ti] = false;
                live_count -= 1;
            } else {
                for k in tris[ti].iter_mut() {
                    if *k == b {
                        *k = a;
                    }
                }
                incident[ai].push(ti);
            }
        }
        incident[ai].retain(|&t| alive[t]);
        incident[ai].sort_unstable();
        incident[ai].dedup();
        version[ai] += 1;
        let mut neighbors: Vec<u32> = incident[ai].iter().flat_map(|&t| tris[t]).filter(|&k| k != a).collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        for n in neighbors {
            let (lo, hi) = (a.min(n), a.max(n));
            heap.push(Reverse((key(&pos, lo, hi), lo, hi, version[lo as usize], version[hi as usize])));
        }
    }
    let mut index = vec![u32::MAX; pos.len()];
    let mut out_pos = Vec::new();
    let mut out_tris = Vec::with_capacity(live_count);
    for (t, ok) in tris.iter().zip(&alive) {
        if !ok {
            continue;
        }
        out_tris.push(t.map(|k| {
            let slot = &mut index[k as usize];
            if *slot == u32::MAX {
                *slot = out_pos.len() as u32;
                out_pos.push(pos[k as usize]);
            }
            *slot
        }));
    }
    (out_pos, out_tris)
}
