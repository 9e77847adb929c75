//! Stage orchestration over a work directory.
//!
//! ```text
//! mesh.ply                          processed proxy mesh
//! irradiance/NNN_esrc.pfm           denoised source irradiance
//! irradiance/NNN_esrc_nc.pfm        same with clipped samples dropped
//! irradiance/NNN_valid.pgm
//! irradiance/NNN_cluster_CC.pfm     unit-emittance irradiance of cluster CC
//! irradiance/NNN_esrc_combined.pfm  E_nc + Σ α·E_l, after solve-lights
//! clusters.json  solve.json
//! mirror/NNN.pfm  mirror/NNN_valid.pgm
//! albedo.ply
//! added/LLL/light.json  added/LLL/NNN.pfm
//! flow/AAA_BBB.pfm                  dx, dy, valid
//! ```
//!
//! `NNN` is a camera id, `LLL` a light id. Every artifact has a sidecar
//! `<file>.json` recording its kind, seed, sample count, parameters, and a
//! hash of everything it was computed from; a stage whose sidecar hash
//! matches is skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::featurepack::{pack_features, FeatureMetadata, FeatureStack};
use crate::gbuffer::{depth_map, hit_mask, normal_map, render_gbuffer};
use crate::geomproc::{smooth_normals, snap_planes, PlaneSnapParams};
use crate::image::{Map, Mask, RgbMap};
use crate::io::{pfm, pgm, ply, read_bytes, read_json, write_json, CameraRecord, LightRecord};
use crate::irradiance::{
    build_albedo_mesh, cluster_irradiance, combine_source_irradiance, compute_added_irradiance, denoise_irradiance,
    detect_light_clusters, division_floor, estimate_source_irradiance, solve_clipped_lights, AddedParams, AlbedoClickSet, AlbedoMesh,
    ClusterParams, DenoiseParams, LightCluster, LightSolve, SourceIrradiance, SourceParams, ViewIrradiance,
};
use crate::math::Vec3;
use crate::mirror::{compute_source_mirror, target_mirror_from_trace, MirrorMap};
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::reproject::{compute_flow, render_composites, CompositeSet, CompositeSources, NovelGeometry};
use crate::scene::{AreaLight, LightingEdit, MultiViewScene, DEFAULT_VISIBILITY_TOL};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 over length-prefixed parts.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of every file of a scene bundle.
pub fn scene_digest(dir: &Path) -> Result<String> {
    let mut files = vec![dir.join("cameras.json"), dir.join("mesh.ply")];
    for sub in ["images", "clipmask"] {
        if let Ok(entries) = fs::read_dir(dir.join(sub)) {
            let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_file()).collect();
            names.sort();
            files.extend(names);
        }
    }
    let mut h = Sha256::new();
    for f in &files {
        let bytes = read_bytes(f)?;
        h.update(f.strip_prefix(dir).unwrap_or(f).to_string_lossy().as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: String,
    pub view: Option<u32>,
    pub seed: u64,
    pub spp: usize,
    pub params: serde_json::Value,
    pub input_hash: String,
    pub version: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(path: &Path) -> Option<Sidecar> {
    read_json(&sidecar_path(path)).ok()
}

/// `path` exists and its sidecar records `hash`.
pub fn is_fresh(path: &Path, hash: &str) -> bool {
    path.exists() && read_sidecar(path).is_some_and(|s| s.input_hash == hash)
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    write_json(&sidecar_path(path), sidecar)
}

/// Sidecar for an artifact written outside this module.
pub fn write_stamp(path: &Path, kind: &str, seed: u64, spp: usize, params: serde_json::Value, input_hash: &str) -> Result<()> {
    let sc = Sidecar { kind: kind.into(), view: None, seed, spp, params, input_hash: input_hash.into(), version: VERSION.into() };
    write_sidecar(path, &sc)
}

/// What a stage did.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageReport {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
}

impl StageReport {
    fn merge(&mut self, other: StageReport) {
        self.written.extend(other.written);
        self.skipped.extend(other.skipped);
    }
}

/// Paths inside a work directory.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn mesh(&self) -> PathBuf {
        self.root.join("mesh.ply")
    }
    pub fn albedo(&self) -> PathBuf {
        self.root.join("albedo.ply")
    }
    pub fn clusters(&self) -> PathBuf {
        self.root.join("clusters.json")
    }
    pub fn solve(&self) -> PathBuf {
        self.root.join("solve.json")
    }
    pub fn e_src(&self, id: u32) -> PathBuf {
        self.root.join("irradiance").join(format!("{id:03}_esrc.pfm"))
    }
    pub fn e_src_nc(&self, id: u32) -> PathBuf {
        self.root.join("irradiance").join(format!("{id:03}_esrc_nc.pfm"))
    }
    pub fn e_src_combined(&self, id: u32) -> PathBuf {
        self.root.join("irradiance").join(format!("{id:03}_esrc_combined.pfm"))
    }
    pub fn valid(&self, id: u32) -> PathBuf {
        self.root.join("irradiance").join(format!("{id:03}_valid.pgm"))
    }
    pub fn cluster(&self, id: u32, cluster: u32) -> PathBuf {
        self.root.join("irradiance").join(format!("{id:03}_cluster_{cluster:02}.pfm"))
    }
    pub fn mirror(&self, id: u32) -> PathBuf {
        self.root.join("mirror").join(format!("{id:03}.pfm"))
    }
    pub fn mirror_valid(&self, id: u32) -> PathBuf {
        self.root.join("mirror").join(format!("{id:03}_valid.pgm"))
    }
    pub fn added_light(&self, light: u32) -> PathBuf {
        self.root.join("added").join(format!("{light:03}")).join("light.json")
    }
    pub fn added(&self, light: u32, id: u32) -> PathBuf {
        self.root.join("added").join(format!("{light:03}")).join(format!("{id:03}.pfm"))
    }
    pub fn flow(&self, a: u32, b: u32) -> PathBuf {
        self.root.join("flow").join(format!("{a:03}_{b:03}.pfm"))
    }

    fn hash_of(&self, path: &Path) -> Result<String> {
        read_sidecar(path).map(|s| s.input_hash).ok_or_else(|| Error::MissingFile(sidecar_path(path)))
    }

    /// Cameras and images from `scene_dir`, proxy mesh from this workspace.
    pub fn load_scene<T: Real>(&self, scene_dir: &Path) -> Result<MultiViewScene<T>> {
        let mesh = ply::read::<T>(&self.mesh())?.mesh;
        crate::io::load_scene_bundle_with_mesh(scene_dir, mesh)
    }

    /// Path of the current `E_src` of a view.
    pub fn current_e_src(&self, id: u32) -> PathBuf {
        let combined = self.e_src_combined(id);
        if combined.exists() {
            combined
        } else {
            self.e_src(id)
        }
    }

    /// `E_src` of a view, preferring the combined estimate when present.
    pub fn load_e_src<T: Real>(&self, id: u32) -> Result<RgbMap<T>> {
        let combined = self.e_src_combined(id);
        if combined.exists() {
            pfm::read_rgb(&combined)
        } else {
            pfm::read_rgb(&self.e_src(id))
        }
    }

    /// Irradiance of every view, with added irradiance of `lights`.
    pub fn load_irradiance<T: Real>(&self, scene: &MultiViewScene<T>, lights: &[u32]) -> Result<Vec<ViewIrradiance<T>>> {
        scene
            .cameras
            .iter()
            .map(|c| {
                let mut e_add = BTreeMap::new();
                for &l in lights {
                    let path = self.added(l, c.id);
                    if !path.exists() {
                        return Err(Error::InvalidEdit(format!("no added irradiance for light {l} in camera {}; run add-light", c.id)));
                    }
                    e_add.insert(l, pfm::read_rgb(&path)?);
                }
                Ok(ViewIrradiance {
                    e_src: self.load_e_src(c.id)?,
                    e_src_nc: pfm::read_rgb(&self.e_src_nc(c.id))?,
                    valid: pgm::read_mask(&self.valid(c.id))?,
                    e_cluster: Vec::new(),
                    e_add,
                })
            })
            .collect()
    }

    pub fn load_mirrors<T: Real>(&self, scene: &MultiViewScene<T>) -> Result<Vec<MirrorMap<T>>> {
        scene
            .cameras
            .iter()
            .map(|c| {
                let valid = pgm::read_mask(&self.mirror_valid(c.id))?;
                Ok(MirrorMap {
                    values: pfm::read_rgb(&self.mirror(c.id))?,
                    clamped: Map::filled(valid.width(), valid.height(), false),
                    valid,
                })
            })
            .collect()
    }

    pub fn load_albedo<T: Real>(&self) -> Result<AlbedoMesh<T>> {
        let path = self.albedo();
        let p = ply::read::<T>(&path)?;
        if p.mesh.albedo.is_none() {
            return Err(Error::format(&path, "albedo mesh has no albedo"));
        }
        let seen = p.albedo_seen.unwrap_or_else(|| vec![true; p.mesh.vertices.len()]);
        Ok(AlbedoMesh { mesh: p.mesh, seen })
    }

    pub fn load_clusters<T: Real>(&self) -> Result<Vec<LightCluster<T>>> {
        let path = self.clusters();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let records: Vec<ClusterRecord> = read_json(&path)?;
        Ok(records.iter().map(ClusterRecord::to_cluster).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: u32,
    pub voxel_size: f64,
    pub voxels: Vec<[i64; 3]>,
    pub center: [f64; 3],
    pub radius: f64,
    pub intensity: Option<[f64; 3]>,
}

impl ClusterRecord {
    pub fn from_cluster<T: Real>(c: &LightCluster<T>) -> Self {
        ClusterRecord {
            id: c.id,
            voxel_size: c.voxel_size.as_f64(),
            voxels: c.voxels.iter().copied().collect(),
            center: c.center.to_f64(),
            radius: c.radius.as_f64(),
            intensity: c.intensity.map(|i| i.to_f64()),
        }
    }

    pub fn to_cluster<T: Real>(&self) -> LightCluster<T> {
        let mut c = LightCluster::from_voxels(self.id, T::lit(self.voxel_size), self.voxels.iter().copied().collect());
        c.intensity = self.intensity.map(Vec3::from_f64);
        c
    }
}

/// Source irradiance of one view, denoised when `denoise` is given. Both
/// estimates use the view's own depth and normals as guides.
pub fn source_irradiance_view<T: Real>(
    scene: &MultiViewScene<T>,
    view: usize,
    params: &SourceParams,
    denoise: Option<&DenoiseParams>,
) -> SourceIrradiance<T> {
    let raw = estimate_source_irradiance(scene, view, params);
    let Some(dp) = denoise else { return raw };
    let g = render_gbuffer(scene, &scene.cameras[view]);
    let (depth, normals) = (depth_map(&g), normal_map(&g));
    SourceIrradiance {
        e_src: denoise_irradiance(&raw.e_src, &depth, &normals, &raw.valid, dp),
        e_src_nc: denoise_irradiance(&raw.e_src_nc, &depth, &normals, &raw.valid_nc, dp),
        valid: raw.valid,
        valid_nc: raw.valid_nc,
    }
}

/// Denoised unit-emittance irradiance of `cluster` in `view`.
pub fn cluster_irradiance_view<T: Real>(
    scene: &MultiViewScene<T>,
    view: usize,
    cluster: &LightCluster<T>,
    spp: usize,
    seed: u64,
    denoise: Option<&DenoiseParams>,
) -> RgbMap<T> {
    let raw = cluster_irradiance(scene, view, cluster, spp, seed);
    let Some(dp) = denoise else { return raw };
    let g = render_gbuffer(scene, &scene.cameras[view]);
    denoise_irradiance(&raw, &depth_map(&g), &normal_map(&g), &hit_mask(&g), dp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessOptions {
    pub spp: usize,
    pub cluster_spp: usize,
    pub seed: u64,
    pub smooth_iters: usize,
    pub snap_planes: bool,
    pub tol: f64,
    /// Camera ids to process; all when `None`.
    pub views: Option<Vec<u32>>,
    pub denoise: Option<DenoiseParams>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            spp: 128,
            cluster_spp: 64,
            seed: 0,
            smooth_iters: 3,
            snap_planes: false,
            tol: DEFAULT_VISIBILITY_TOL,
            views: None,
            denoise: Some(DenoiseParams::default()),
        }
    }
}

fn selected<T: Real>(scene: &MultiViewScene<T>, views: &Option<Vec<u32>>) -> Result<Vec<usize>> {
    match views {
        None => Ok((0..scene.cameras.len()).collect()),
        Some(ids) => ids
            .iter()
            .map(|&id| scene.camera_index(id).ok_or_else(|| Error::InvalidArgument(format!("unknown camera {id}"))))
            .collect(),
    }
}

fn denoise_json(d: &Option<DenoiseParams>) -> serde_json::Value {
    match d {
        Some(d) => json!({"spatial_sigma": d.spatial_sigma, "radius": d.radius, "depth_sigma": d.depth_sigma, "normal_sigma_deg": d.normal_sigma_deg}),
        None => serde_json::Value::Null,
    }
}

fn write_rgb_artifact<T: Real>(path: &Path, map: &RgbMap<T>, sidecar: &Sidecar, report: &mut StageReport) -> Result<()> {
    pfm::write_rgb(path, map)?;
    write_sidecar(path, sidecar)?;
    report.written.push(path.to_path_buf());
    Ok(())
}

/// Mesh processing, source irradiance, light clusters, source mirrors and
/// the albedo mesh. The albedo mesh is built once every view has `E_src`.
pub fn preprocess<T: Real>(scene_dir: &Path, ws: &Workspace, opts: &PreprocessOptions) -> Result<StageReport> {
    let mut report = StageReport::default();
    let scene_hash = scene_digest(scene_dir)?;
    let raw_scene = crate::io::load_scene_bundle::<T>(scene_dir)?;

    let mesh_params = json!({"smooth_iters": opts.smooth_iters, "snap_planes": opts.snap_planes});
    let mesh_hash = digest(&[scene_hash.as_bytes(), b"mesh", mesh_params.to_string().as_bytes()]);
    let mesh_path = ws.mesh();
    if is_fresh(&mesh_path, &mesh_hash) {
        report.skipped.push(mesh_path.clone());
    } else {
        let mesh = process_mesh(&raw_scene.mesh, opts.smooth_iters, opts.snap_planes);
        ply::write(&mesh_path, &mesh, None)?;
        let sc = Sidecar { kind: "mesh".into(), view: None, seed: 0, spp: 0, params: mesh_params, input_hash: mesh_hash.clone(), version: VERSION.into() };
        write_sidecar(&mesh_path, &sc)?;
        report.written.push(mesh_path.clone());
    }
    let scene = ws.load_scene::<T>(scene_dir)?;
    let views = selected(&scene, &opts.views)?;
    let tol = T::lit(opts.tol);

    let src_params = SourceParams { spp: opts.spp, seed: opts.seed, tol: opts.tol };
    let src_json = json!({"tol": opts.tol, "denoise": denoise_json(&opts.denoise)});
    for &i in &views {
        let id = scene.cameras[i].id;
        let hash = digest(&[mesh_hash.as_bytes(), b"esrc", &id.to_le_bytes(), &opts.spp.to_le_bytes(), &opts.seed.to_le_bytes(), src_json.to_string().as_bytes()]);
        let (p_src, p_nc, p_valid) = (ws.e_src(id), ws.e_src_nc(id), ws.valid(id));
        if is_fresh(&p_src, &hash) && is_fresh(&p_nc, &hash) && p_valid.exists() {
            report.skipped.extend([p_src, p_nc]);
            continue;
        }
        let s = source_irradiance_view(&scene, i, &src_params, opts.denoise.as_ref());
        let sc = |kind: &str| Sidecar { kind: kind.into(), view: Some(id), seed: opts.seed, spp: opts.spp, params: src_json.clone(), input_hash: hash.clone(), version: VERSION.into() };
        pgm::write_mask(&p_valid, &s.valid)?;
        write_rgb_artifact(&p_nc, &s.e_src_nc, &sc("e_src_nc"), &mut report)?;
        write_rgb_artifact(&p_src, &s.e_src, &sc("e_src"), &mut report)?;
        let stale = ws.e_src_combined(id);
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
    }

    if scene.images.iter().any(|img| img.has_clipping()) {
        report.merge(cluster_stage(&scene, ws, &mesh_hash, &views, opts)?);
    }

    for &i in &views {
        let id = scene.cameras[i].id;
        let hash = digest(&[mesh_hash.as_bytes(), b"mirror", &id.to_le_bytes(), &opts.tol.to_le_bytes()]);
        let path = ws.mirror(id);
        if is_fresh(&path, &hash) && ws.mirror_valid(id).exists() {
            report.skipped.push(path);
            continue;
        }
        let m = compute_source_mirror(&scene, i, tol);
        pgm::write_mask(&ws.mirror_valid(id), &m.valid)?;
        let sc = Sidecar { kind: "source_mirror".into(), view: Some(id), seed: 0, spp: 1, params: json!({"tol": opts.tol}), input_hash: hash, version: VERSION.into() };
        write_rgb_artifact(&path, &m.values, &sc, &mut report)?;
    }

    if scene.cameras.iter().all(|c| ws.e_src(c.id).exists()) {
        report.merge(albedo_stage(&scene, ws, opts.tol)?);
    }
    Ok(report)
}

pub fn process_mesh<T: Real>(mesh: &TriangleMesh<T>, smooth_iters: usize, snap: bool) -> TriangleMesh<T> {
    let smoothed = smooth_normals(mesh, smooth_iters, T::lit(0.5));
    if snap {
        snap_planes(&smoothed, &PlaneSnapParams::for_mesh(&smoothed)).0
    } else {
        smoothed
    }
}

fn cluster_stage<T: Real>(scene: &MultiViewScene<T>, ws: &Workspace, mesh_hash: &str, views: &[usize], opts: &PreprocessOptions) -> Result<StageReport> {
    let mut report = StageReport::default();
    let params = ClusterParams::default();
    let hash = digest(&[mesh_hash.as_bytes(), b"clusters", &params.voxel_size.to_le_bytes(), &params.clip_fraction.to_le_bytes(), &opts.tol.to_le_bytes()]);
    let path = ws.clusters();
    let clusters: Vec<LightCluster<T>> = if is_fresh(&path, &hash) {
        report.skipped.push(path.clone());
        ws.load_clusters()?
    } else {
        let c = detect_light_clusters(scene, &params);
        write_json(&path, &c.iter().map(ClusterRecord::from_cluster).collect::<Vec<_>>())?;
        let sc = Sidecar {
            kind: "clusters".into(),
            view: None,
            seed: 0,
            spp: 0,
            params: json!({"voxel_size": params.voxel_size, "clip_fraction": params.clip_fraction}),
            input_hash: hash.clone(),
            version: VERSION.into(),
        };
        write_sidecar(&path, &sc)?;
        report.written.push(path.clone());
        c
    };
    for &i in views {
        let id = scene.cameras[i].id;
        for c in &clusters {
            let h = digest(&[hash.as_bytes(), &id.to_le_bytes(), &c.id.to_le_bytes(), &opts.cluster_spp.to_le_bytes(), &opts.seed.to_le_bytes()]);
            let p = ws.cluster(id, c.id);
            if is_fresh(&p, &h) {
                report.skipped.push(p);
                continue;
            }
            let e = cluster_irradiance_view(scene, i, c, opts.cluster_spp, opts.seed, opts.denoise.as_ref());
            let sc = Sidecar {
                kind: "e_cluster".into(),
                view: Some(id),
                seed: opts.seed,
                spp: opts.cluster_spp,
                params: json!({"cluster": c.id, "denoise": denoise_json(&opts.denoise)}),
                input_hash: h,
                version: VERSION.into(),
            };
            write_rgb_artifact(&p, &e, &sc, &mut report)?;
        }
    }
    Ok(report)
}

/// Rebuilds `albedo.ply` from the current `E_src` of every view.
pub fn albedo_stage<T: Real>(scene: &MultiViewScene<T>, ws: &Workspace, tol: f64) -> Result<StageReport> {
    let mut report = StageReport::default();
    let mut parts: Vec<String> = vec![ws.hash_of(&ws.mesh())?];
    for c in &scene.cameras {
        parts.push(ws.hash_of(&ws.current_e_src(c.id))?);
    }
    parts.push(tol.to_string());
    let refs: Vec<&[u8]> = parts.iter().map(|s| s.as_bytes()).collect();
    let hash = digest(&refs);
    let path = ws.albedo();
    if is_fresh(&path, &hash) {
        report.skipped.push(path);
        return Ok(report);
    }
    let mut e_src = Vec::new();
    let mut valid = Vec::new();
    for c in &scene.cameras {
        e_src.push(ws.load_e_src::<T>(c.id)?);
        valid.push(pgm::read_mask(&ws.valid(c.id))?);
    }
    let albedo = build_albedo_mesh(scene, &e_src, &valid, T::lit(tol));
    ply::write(&path, &albedo.mesh, Some(&albedo.seen))?;
    let unseen = albedo.seen.iter().filter(|s| !**s).count();
    let sc = Sidecar { kind: "albedo_mesh".into(), view: None, seed: 0, spp: 0, params: json!({"tol": tol, "unseen_vertices": unseen}), input_hash: hash, version: VERSION.into() };
    write_sidecar(&path, &sc)?;
    report.written.push(path);
    Ok(report)
}

/// Recovered intensities of clipped lights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub alpha: Vec<[f64; 3]>,
    pub beta: Vec<[f64; 3]>,
    pub residual: [f64; 3],
    pub condition: [f64; 3],
}

impl SolveRecord {
    pub fn from_solve<T: Real>(s: &LightSolve<T>) -> Self {
        SolveRecord {
            alpha: s.alpha.iter().map(|a| a.to_f64()).collect(),
            beta: s.beta.iter().map(|b| b.to_f64()).collect(),
            residual: s.residual.to_f64(),
            condition: s.condition,
        }
    }
}

/// Solves for cluster intensities from clicked equal-albedo points, writes
/// the combined `E_src` of every view and rebuilds the albedo mesh.
pub fn solve_lights<T: Real>(scene_dir: &Path, ws: &Workspace, clicks_path: &Path, tol: f64) -> Result<(LightSolve<T>, StageReport)> {
    let mut report = StageReport::default();
    let scene = ws.load_scene::<T>(scene_dir)?;
    let mut clusters = ws.load_clusters::<T>()?;
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no light clusters; preprocess a scene with clip masks first".into()));
    }
    let clicks = AlbedoClickSet::from_record(&crate::io::load_clicks(clicks_path)?);
    let mut e_nc = Vec::new();
    let mut e_cluster: Vec<Vec<RgbMap<T>>> = vec![Vec::new(); clusters.len()];
    for c in &scene.cameras {
        e_nc.push(pfm::read_rgb::<T>(&ws.e_src_nc(c.id))?);
        for (k, cl) in clusters.iter().enumerate() {
            e_cluster[k].push(pfm::read_rgb::<T>(&ws.cluster(c.id, cl.id))?);
        }
    }
    let solve = solve_clipped_lights(&scene, &e_nc, &e_cluster, &clicks)?;
    let record = SolveRecord::from_solve(&solve);
    let clicks_bytes = read_bytes(clicks_path)?;
    let mut inputs: Vec<String> = vec![ws.hash_of(&ws.clusters())?, digest(&[&clicks_bytes])];
    for c in &scene.cameras {
        inputs.push(ws.hash_of(&ws.e_src_nc(c.id))?);
    }
    let refs: Vec<&[u8]> = inputs.iter().map(|s| s.as_bytes()).collect();
    let hash = digest(&refs);
    write_json(&ws.solve(), &record)?;
    let sc = Sidecar { kind: "light_solve".into(), view: None, seed: 0, spp: 0, params: json!({}), input_hash: hash.clone(), version: VERSION.into() };
    write_sidecar(&ws.solve(), &sc)?;
    report.written.push(ws.solve());

    for (cl, a) in clusters.iter_mut().zip(&solve.alpha) {
        cl.intensity = Some(*a);
    }
    write_json(&ws.clusters(), &clusters.iter().map(ClusterRecord::from_cluster).collect::<Vec<_>>())?;

    for (i, c) in scene.cameras.iter().enumerate() {
        let refs: Vec<&RgbMap<T>> = e_cluster.iter().map(|v| &v[i]).collect();
        let combined = combine_source_irradiance(&e_nc[i], &refs, &solve.alpha);
        let sc = Sidecar {
            kind: "e_src_combined".into(),
            view: Some(c.id),
            seed: 0,
            spp: 0,
            params: json!({"alpha": record.alpha}),
            input_hash: digest(&[hash.as_bytes(), &c.id.to_le_bytes()]),
            version: VERSION.into(),
        };
        write_rgb_artifact(&ws.e_src_combined(c.id), &combined, &sc, &mut report)?;
    }
    report.merge(albedo_stage(&scene, ws, tol)?);
    Ok((solve, report))
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct AddLightOptions {
    pub params: AddedParams,
    pub views: Option<Vec<u32>>,
}

/// Added irradiance of each light, unweighted, in every selected view.
pub fn add_lights<T: Real>(scene_dir: &Path, ws: &Workspace, lights: &[AreaLight<T>], opts: &AddLightOptions) -> Result<StageReport> {
    let mut report = StageReport::default();
    let scene = ws.load_scene::<T>(scene_dir)?;
    let albedo = ws.load_albedo::<T>()?;
    let albedo_hash = ws.hash_of(&ws.albedo())?;
    let views = selected(&scene, &opts.views)?;
    let p = &opts.params;
    for light in lights {
        light.validate()?;
        let record = LightRecord::from_light(light);
        let light_json = serde_json::to_string(&record).expect("light serializes");
        write_json(&ws.added_light(light.id), &record)?;
        for &i in &views {
            let cam = &scene.cameras[i];
            let hash = digest(&[
                albedo_hash.as_bytes(),
                light_json.as_bytes(),
                &cam.id.to_le_bytes(),
                &p.spp.to_le_bytes(),
                &p.max_depth.to_le_bytes(),
                &p.seed.to_le_bytes(),
                denoise_json(&p.denoise).to_string().as_bytes(),
            ]);
            let path = ws.added(light.id, cam.id);
            if is_fresh(&path, &hash) {
                report.skipped.push(path);
                continue;
            }
            let e = compute_added_irradiance(&scene, &albedo, &[(light.clone(), T::one())], cam, p);
            let sc = Sidecar {
                kind: "e_add".into(),
                view: Some(cam.id),
                seed: p.seed,
                spp: p.spp,
                params: json!({"light": record, "max_depth": p.max_depth, "denoise": denoise_json(&p.denoise)}),
                input_hash: hash,
                version: VERSION.into(),
            };
            write_rgb_artifact(&path, &e, &sc, &mut report)?;
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub seed: u64,
    pub mu: f64,
    pub tol: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { seed: 0, mu: crate::featurepack::DEFAULT_MU, tol: DEFAULT_VISIBILITY_TOL }
    }
}

pub struct RenderOutput<T> {
    pub stack: FeatureStack,
    pub composites: CompositeSet<T>,
    pub target_mirror: MirrorMap<T>,
}

/// The full feature stack for `camera` under `edit`.
pub fn render_features<T: Real>(
    scene: &MultiViewScene<T>,
    irradiance: &[ViewIrradiance<T>],
    mirrors: &[MirrorMap<T>],
    edit: &LightingEdit<T>,
    camera: &Camera<T>,
    opts: &RenderOptions,
) -> Result<RenderOutput<T>> {
    edit.validate()?;
    camera.validate()?;
    for id in edit.light_weights.keys() {
        if irradiance.iter().any(|v| !v.e_add.contains_key(id)) {
            return Err(Error::InvalidEdit(format!("no added irradiance for light {id}")));
        }
    }
    let tol = T::lit(opts.tol);
    let geometry = NovelGeometry::new(scene, camera, tol);
    let sources = CompositeSources { mirrors, irradiance };
    let composites = render_composites(scene, &sources, edit, camera, &geometry, tol);
    let e_src: Vec<RgbMap<T>> = irradiance.iter().map(|v| v.e_src.clone()).collect();
    let valid: Vec<Mask> = irradiance.iter().map(|v| v.valid.clone()).collect();
    let eps = division_floor(&e_src, &valid);
    let target_mirror = target_mirror_from_trace(scene, irradiance, edit, &geometry.mirror, eps);
    let metadata = FeatureMetadata {
        camera: CameraRecord::from_camera(camera),
        alpha_dim: edit.alpha_dim.as_f64(),
        light_weights: edit.light_weights.iter().map(|(k, v)| (*k, v.as_f64())).collect(),
        mu: opts.mu,
        seed: opts.seed,
    };
    let stack = pack_features(&composites, &target_mirror, &metadata)?;
    Ok(RenderOutput { stack, composites, target_mirror })
}

/// Writes `features.ften` and linear previews into `dir`.
pub fn write_render_output<T: Real>(dir: &Path, out: &RenderOutput<T>, input_hash: &str) -> Result<StageReport> {
    let mut report = StageReport::default();
    let ften = dir.join("features.ften");
    crate::featurepack::write_tensor(&ften, &out.stack)?;
    let sc = Sidecar { kind: "features".into(), view: None, seed: out.stack.metadata["seed"].as_u64().unwrap_or(0), spp: 0, params: out.stack.metadata.clone(), input_hash: input_hash.into(), version: VERSION.into() };
    write_sidecar(&ften, &sc)?;
    report.written.push(ften);
    let c = &out.composites;
    let previews: [(&str, &RgbMap<T>); 6] =
        [("I1", &c.images[0]), ("M1", &c.mirrors[0]), ("Mtgt", &out.target_mirror.values), ("Esrc", &c.e_src), ("Eadd", &c.e_add_mixed), ("Erem", &c.e_rem)];
    for (name, map) in previews {
        let p = dir.join("preview").join(format!("{name}.pfm"));
        pfm::write_rgb(&p, map)?;
        report.written.push(p);
    }
    Ok(report)
}

/// Hash of every input `render-features` reads.
pub fn render_input_hash<T: Real>(scene_dir: &Path, ws: &Workspace, scene: &MultiViewScene<T>, edit_json: &str, camera_json: &str, opts: &RenderOptions) -> Result<String> {
    let mut parts = vec![scene_digest(scene_dir)?, ws.hash_of(&ws.mesh())?, edit_json.to_string(), camera_json.to_string(), format!("{opts:?}")];
    for c in &scene.cameras {
        parts.push(ws.hash_of(&ws.current_e_src(c.id))?);
        parts.push(ws.hash_of(&ws.mirror(c.id))?);
    }
    if let Ok(entries) = fs::read_dir(ws.root.join("added")) {
        let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        dirs.sort();
        for d in dirs {
            for c in &scene.cameras {
                if let Some(s) = read_sidecar(&d.join(format!("{:03}.pfm", c.id))) {
                    parts.push(s.input_hash);
                }
            }
        }
    }
    let refs: Vec<&[u8]> = parts.iter().map(|s| s.as_bytes()).collect();
    Ok(digest(&refs))
}

/// Flow for each ordered pair, stored as a 3-channel PFM `(dx, dy, valid)`.
pub fn write_flows<T: Real>(scene_dir: &Path, ws: &Workspace, pairs: &[(u32, u32)], tol: f64) -> Result<StageReport> {
    let mut report = StageReport::default();
    let scene = ws.load_scene::<T>(scene_dir)?;
    let mesh_hash = ws.hash_of(&ws.mesh())?;
    for &(a, b) in pairs {
        let ia = scene.camera_index(a).ok_or_else(|| Error::InvalidArgument(format!("unknown camera {a}")))?;
        let ib = scene.camera_index(b).ok_or_else(|| Error::InvalidArgument(format!("unknown camera {b}")))?;
        let hash = digest(&[mesh_hash.as_bytes(), &a.to_le_bytes(), &b.to_le_bytes(), &tol.to_le_bytes()]);
        let path = ws.flow(a, b);
        if is_fresh(&path, &hash) {
            report.skipped.push(path);
            continue;
        }
        let f = compute_flow(&scene, &scene.cameras[ia], &scene.cameras[ib], T::lit(tol));
        let packed: RgbMap<T> = Map::from_vec(
            f.flow.width(),
            f.flow.height(),
            f.flow.pixels().iter().zip(f.valid.pixels()).map(|(d, &v)| Vec3::new(d[0], d[1], if v { T::one() } else { T::zero() })).collect(),
        )
        .expect("same size");
        let sc = Sidecar { kind: "flow".into(), view: Some(a), seed: 0, spp: 1, params: json!({"from": a, "to": b, "tol": tol}), input_hash: hash, version: VERSION.into() };
        write_rgb_artifact(&path, &packed, &sc, &mut report)?;
    }
    Ok(report)
}

/// Inverse of the flow packing in [`write_flows`].
pub fn read_flow<T: Real>(path: &Path) -> Result<crate::reproject::FlowMap<T>> {
    let m = pfm::read_rgb::<T>(path)?;
    Ok(crate::reproject::FlowMap { flow: m.map(|p| [p.x, p.y]), valid: m.map(|p| p.z > T::lit(0.5)) })
}
