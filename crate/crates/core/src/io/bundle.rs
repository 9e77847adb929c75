//! Scene bundle directory layout:
//!
//! ```text
//! cameras.json          array of camera records, row-major rotation
//! mesh.ply              binary little-endian PLY
//! images/NNN.pfm        one linear RGB image per camera, NNN = camera id
//! clipmask/NNN.pgm      optional, 255 = clipped on any channel
//! clipmask/NNN.ppm      optional per-channel refinement
//! lights.json           optional added area lights
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{pfm, pgm, ply, read_json, write_json};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::Map;
use crate::math::{Mat3, Vec3};
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::scene::{AreaLight, MultiViewScene, RadianceImage};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CameraRecord {
    pub id: u32,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl CameraRecord {
    pub fn from_camera<T: Real>(c: &Camera<T>) -> Self {
        CameraRecord {
            id: c.id,
            width: c.width,
            height: c.height,
            fx: c.fx.as_f64(),
            fy: c.fy.as_f64(),
            cx: c.cx.as_f64(),
            cy: c.cy.as_f64(),
            rotation: c.rotation.to_row_major_f64(),
            translation: c.translation.to_f64(),
        }
    }

    pub fn to_camera<T: Real>(&self) -> Camera<T> {
        Camera {
            id: self.id,
            width: self.width,
            height: self.height,
            fx: T::lit(self.fx),
            fy: T::lit(self.fy),
            cx: T::lit(self.cx),
            cy: T::lit(self.cy),
            rotation: Mat3::from_row_major_f64(&self.rotation),
            translation: Vec3::from_f64(self.translation),
        }
    }
}

fn unit_emittance() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LightRecord {
    pub id: u32,
    pub origin: [f64; 3],
    pub edge_u: [f64; 3],
    pub edge_v: [f64; 3],
    #[serde(default = "unit_emittance")]
    pub emittance: [f64; 3],
    #[serde(default)]
    pub two_sided: bool,
}

impl LightRecord {
    pub fn from_light<T: Real>(l: &AreaLight<T>) -> Self {
        LightRecord {
            id: l.id,
            origin: l.origin.to_f64(),
            edge_u: l.edge_u.to_f64(),
            edge_v: l.edge_v.to_f64(),
            emittance: l.emittance.to_f64(),
            two_sided: l.two_sided,
        }
    }

    pub fn to_light<T: Real>(&self) -> AreaLight<T> {
        AreaLight {
            id: self.id,
            origin: Vec3::from_f64(self.origin),
            edge_u: Vec3::from_f64(self.edge_u),
            edge_v: Vec3::from_f64(self.edge_v),
            emittance: Vec3::from_f64(self.emittance),
            two_sided: self.two_sided,
        }
    }
}

/// `clicks.json`: `{groups: [{points: [{view, x, y}, ...]}, ...]}`; `view`
/// is a camera id.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClicksRecord {
    pub groups: Vec<ClickGroupRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClickGroupRecord {
    pub points: Vec<ClickPointRecord>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClickPointRecord {
    pub view: u32,
    pub x: usize,
    pub y: usize,
}

pub fn read_cameras<T: Real>(path: &Path) -> Result<Vec<Camera<T>>> {
    let records: Vec<CameraRecord> = read_json(path)?;
    Ok(records.iter().map(CameraRecord::to_camera).collect())
}

pub fn write_cameras<T: Real>(path: &Path, cameras: &[Camera<T>]) -> Result<()> {
    let records: Vec<CameraRecord> = cameras.iter().map(CameraRecord::from_camera).collect();
    write_json(path, &records)
}

pub fn load_lights<T: Real>(path: &Path) -> Result<Vec<AreaLight<T>>> {
    let records: Vec<LightRecord> = read_json(path)?;
    let lights: Vec<AreaLight<T>> = records.iter().map(LightRecord::to_light).collect();
    for l in &lights {
        l.validate()?;
    }
    Ok(lights)
}

pub fn save_lights<T: Real>(path: &Path, lights: &[AreaLight<T>]) -> Result<()> {
    let records: Vec<LightRecord> = lights.iter().map(LightRecord::from_light).collect();
    write_json(path, &records)
}

pub fn load_clicks(path: &Path) -> Result<ClicksRecord> {
    read_json(path)
}

pub(crate) fn image_name(id: u32) -> String {
    format!("{id:03}")
}

/// Loads and validates a bundle, then renders its depth maps.
pub fn load_scene_bundle<T: Real>(dir: &Path) -> Result<MultiViewScene<T>> {
    let mesh_path = dir.join("mesh.ply");
    if !mesh_path.exists() {
        return Err(Error::MissingFile(mesh_path));
    }
    let mesh = ply::read::<T>(&mesh_path)?.mesh;
    load_scene_bundle_with_mesh(dir, mesh)
}

/// Loads cameras and images from a bundle but substitutes `mesh`.
pub fn load_scene_bundle_with_mesh<T: Real>(dir: &Path, mesh: TriangleMesh<T>) -> Result<MultiViewScene<T>> {
    let cameras: Vec<Camera<T>> = read_cameras(&dir.join("cameras.json"))?;
    let image_dir = dir.join("images");
    let image_count = match fs::read_dir(&image_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "pfm"))
            .count(),
        Err(_) => return Err(Error::MissingFile(image_dir)),
    };
    if image_count != cameras.len() {
        return Err(Error::CountMismatch { cameras: cameras.len(), images: image_count });
    }
    for c in &cameras {
        c.validate()?;
    }
    let mut images = Vec::with_capacity(cameras.len());
    for c in &cameras {
        let name = image_name(c.id);
        let pixels = pfm::read_rgb::<T>(&image_dir.join(format!("{name}.pfm")))?;
        let mut img = RadianceImage::new(pixels);
        let ppm = dir.join("clipmask").join(format!("{name}.ppm"));
        let pgm_path = dir.join("clipmask").join(format!("{name}.pgm"));
        if ppm.exists() {
            img.clip_mask = pgm::read_channel_mask(&ppm)?;
        } else if pgm_path.exists() {
            img.clip_mask = pgm::read_mask(&pgm_path)?.map(|&b| [b; 3]);
        }
        images.push(img);
    }
    MultiViewScene::new(cameras, images, mesh)
}

/// Writes a bundle that [`load_scene_bundle`] reads back losslessly.
pub fn save_scene_bundle<T: Real>(dir: &Path, scene: &MultiViewScene<T>, lights: Option<&[AreaLight<T>]>) -> Result<()> {
    write_cameras(&dir.join("cameras.json"), &scene.cameras)?;
    ply::write(&dir.join("mesh.ply"), &scene.mesh, None)?;
    for (cam, img) in scene.cameras.iter().zip(&scene.images) {
        let name = image_name(cam.id);
        pfm::write_rgb(&dir.join("images").join(format!("{name}.pfm")), &img.pixels)?;
        if img.has_clipping() {
            let any: Map<bool> = img.clip_mask.map(|c| c.iter().any(|&b| b));
            pgm::write_mask(&dir.join("clipmask").join(format!("{name}.pgm")), &any)?;
            let mixed = img.clip_mask.pixels().iter().any(|c| c.iter().any(|&b| b) && !c.iter().all(|&b| b));
            if mixed {
                pgm::write_channel_mask(&dir.join("clipmask").join(format!("{name}.ppm")), &img.clip_mask)?;
            }
        }
    }
    if let Some(lights) = lights {
        save_lights(&dir.join("lights.json"), lights)?;
    }
    Ok(())
}
