//! File formats: PFM images, PGM/PPM masks, binary PLY meshes, and the
//! directory-based scene bundle.

mod bundle;
pub mod pfm;
pub mod pgm;
pub mod ply;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use bundle::{
    load_clicks, load_lights, load_scene_bundle, load_scene_bundle_with_mesh, read_cameras, save_lights, save_scene_bundle, write_cameras,
    CameraRecord, ClickGroupRecord, ClickPointRecord, ClicksRecord, LightRecord,
};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<V: serde::Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<V: serde::de::DeserializeOwned>(path: &Path) -> Result<V> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}
