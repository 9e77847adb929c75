//! Tonemapping, the 66-channel network input, and the `.ften` container.
//!
//! ```text
//! "FTEN"  u32 version=1  u32 H  u32 W  u32 C          (little endian)
//! C channel names, NUL-terminated ASCII
//! C planes of H×W f32 little endian, row-major
//! u32 n  n bytes of UTF-8 JSON metadata
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Map, RgbMap};
use crate::io::{read_bytes, write_atomic, CameraRecord};
use crate::math::Vec3;
use crate::mirror::MirrorMap;
use crate::num::Real;
use crate::reproject::CompositeSet;

pub const MAGIC: &[u8; 4] = b"FTEN";
pub const VERSION: u32 = 1;
pub const DEFAULT_MU: f64 = 64.0;
pub const CHANNELS: usize = 66;

/// `log(1 + μx) / log(1 + μ)`.
pub fn tonemap<T: Real>(x: T, mu: T) -> Result<T> {
    if x < T::zero() || x.is_nan() {
        return Err(Error::NegativeInput(x.to_f64().unwrap_or(f64::NAN)));
    }
    Ok((mu * x).ln_1p() / mu.ln_1p())
}

/// `((1 + μ)^y − 1) / μ`.
pub fn inverse_tonemap<T: Real>(y: T, mu: T) -> T {
    (y * mu.ln_1p()).exp_m1() / mu
}

/// Channel names in stack order.
pub fn channel_names() -> Vec<String> {
    let mut names = Vec::with_capacity(CHANNELS);
    let rgb = |names: &mut Vec<String>, base: &str| {
        for c in ["r", "g", "b"] {
            names.push(format!("{base}.{c}"));
        }
    };
    for k in 1..=8 {
        rgb(&mut names, &format!("I{k}"));
    }
    for k in 1..=8 {
        rgb(&mut names, &format!("M{k}"));
    }
    for base in ["Mtgt", "Esrc", "Eadd", "Erem"] {
        rgb(&mut names, base);
    }
    names.push("disparity".into());
    for c in ["x", "y", "z"] {
        names.push(format!("normal.{c}"));
    }
    names.push("cosine".into());
    names.push("ratio".into());
    names
}

/// Render-time settings recorded next to the tensor.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FeatureMetadata {
    pub camera: CameraRecord,
    pub alpha_dim: f64,
    pub light_weights: std::collections::BTreeMap<u32, f64>,
    pub mu: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    pub height: usize,
    pub width: usize,
    pub names: Vec<String>,
    /// Planar, channel-major.
    pub data: Vec<f32>,
    pub metadata: serde_json::Value,
}

impl FeatureStack {
    pub fn channel_count(&self) -> usize {
        self.names.len()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&[f32]> {
        self.names.iter().position(|n| n == name).map(|c| self.channel(c))
    }
}

/// Assembles the 66 channels. Radiance maps are tonemapped per channel,
/// irradiance maps and geometry features are stored as they are.
pub fn pack_features<T: Real>(composites: &CompositeSet<T>, target: &MirrorMap<T>, metadata: &FeatureMetadata) -> Result<FeatureStack> {
    let (w, h) = (composites.e_src.width(), composites.e_src.height());
    let check = |m: (usize, usize)| {
        if m != (w, h) {
            Err(Error::ResolutionMismatch { expected: (w, h), found: m })
        } else {
            Ok(())
        }
    };
    for m in composites.images.iter().chain(&composites.mirrors).chain([&target.values, &composites.e_add_mixed, &composites.e_rem]) {
        check((m.width(), m.height()))?;
    }
    let x = &composites.extra;
    check((x.disparity.width(), x.disparity.height()))?;

    let n = w * h;
    let mut data: Vec<f32> = Vec::with_capacity(CHANNELS * n);
    let mu = T::lit(metadata.mu);
    let push_rgb = |data: &mut Vec<f32>, m: &RgbMap<T>, tone: bool| -> Result<()> {
        for c in 0..3 {
            for p in m.pixels() {
                let v = if tone { tonemap(p[c], mu)? } else { p[c] };
                data.push(v.as_f32());
            }
        }
        Ok(())
    };
    for m in composites.images.iter().chain(&composites.mirrors).chain([&target.values]) {
        push_rgb(&mut data, m, true)?;
    }
    for m in [&composites.e_src, &composites.e_add_mixed, &composites.e_rem] {
        push_rgb(&mut data, m, false)?;
    }
    data.extend(x.disparity.pixels().iter().map(|v| v.as_f32()));
    let normals: &Map<Vec3<T>> = &x.normal;
    for c in 0..3 {
        data.extend(normals.pixels().iter().map(|v| v[c].as_f32()));
    }
    data.extend(x.cosine.pixels().iter().map(|v| v.as_f32()));
    data.extend(x.ratio.pixels().iter().map(|v| v.as_f32()));
    debug_assert_eq!(data.len(), CHANNELS * n);
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite feature in channel {}", channel_names()[i / n.max(1)])));
    }
    Ok(FeatureStack {
        height: h,
        width: w,
        names: channel_names(),
        data,
        metadata: serde_json::to_value(metadata).expect("metadata serializes"),
    })
}

pub fn encode(stack: &FeatureStack) -> Vec<u8> {
    let meta = serde_json::to_vec(&stack.metadata).expect("json value serializes");
    let mut out = Vec::with_capacity(20 + stack.data.len() * 4 + meta.len() + 4);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, stack.height as u32, stack.width as u32, stack.names.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for name in &stack.names {
        out.extend_from_slice(name.as_bytes());
        out.push(0);
    }
    for v in &stack.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("{what}: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<FeatureStack> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("header")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let height = r.u32("header")? as usize;
    let width = r.u32("header")? as usize;
    let channels = r.u32("header")? as usize;
    let mut names = Vec::with_capacity(channels.min(1024));
    for _ in 0..channels {
        let rest = &bytes[r.pos..];
        let len = rest.iter().position(|&b| b == 0).ok_or_else(|| Error::Truncated("channel names".into()))?;
        let name = std::str::from_utf8(&rest[..len]).map_err(|_| Error::format(path, "channel name is not UTF-8"))?;
        names.push(name.to_string());
        r.pos += len + 1;
    }
    let count = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .ok_or_else(|| Error::format(path, "tensor dimensions overflow"))?;
    let payload = r.take(count.checked_mul(4).ok_or_else(|| Error::format(path, "tensor dimensions overflow"))?, "payload")?;
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let meta_len = r.u32("metadata length")? as usize;
    let meta = r.take(meta_len, "metadata")?;
    let metadata = serde_json::from_slice(meta).map_err(|e| Error::format(path, format!("metadata: {e}")))?;
    if r.pos != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(FeatureStack { height, width, names, data, metadata })
}

pub fn write_tensor(path: &Path, stack: &FeatureStack) -> Result<()> {
    write_atomic(path, &encode(stack))
}

pub fn read_tensor(path: &Path) -> Result<FeatureStack> {
    decode(&read_bytes(path)?, path)
}
