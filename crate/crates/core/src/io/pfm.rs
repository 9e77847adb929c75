//! Portable float map: `PF` (RGB) or `Pf` (gray), `W H`, scale whose sign
//! gives endianness (negative = little-endian), rows stored bottom to top.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Map, RgbMap, ScalarMap};
use crate::math::Vec3;
use crate::num::Real;

/// Decoded PFM payload, rows top to bottom, channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

pub fn encode(img: &Pfm) -> Vec<u8> {
    let magic = if img.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row_len = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for y in (0..img.height).rev() {
        for v in &img.data[y * row_len..(y + 1) * row_len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Pfm> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PFM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::format(path, format!("bad PFM magic {other:?}"))),
    };
    let parse_dim = |s: String| s.parse::<usize>().map_err(|_| Error::format(path, format!("bad PFM dimension {s:?}")));
    let width = parse_dim(token()?)?;
    let height = parse_dim(token()?)?;
    let scale_tok = token()?;
    let scale: f64 = scale_tok.parse().map_err(|_| Error::format(path, format!("bad PFM scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, "PFM scale must be non-zero"));
    }
    let little = scale < 0.0;
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let count = width * height * channels;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < count * 4 {
        return Err(Error::format(path, format!("PFM payload has {} bytes, expected {}", payload.len(), count * 4)));
    }
    let row_len = width * channels;
    let mut data = vec![0f32; count];
    for (i, chunk) in payload[..count * 4].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let file_row = i / row_len;
        let y = height - 1 - file_row;
        data[y * row_len + i % row_len] = v;
    }
    Ok(Pfm { width, height, channels, data })
}

pub fn read(path: &Path) -> Result<Pfm> {
    decode(&super::read_bytes(path)?, path)
}

pub fn write(path: &Path, img: &Pfm) -> Result<()> {
    super::write_atomic(path, &encode(img))
}

pub fn from_rgb<T: Real>(map: &RgbMap<T>) -> Pfm {
    let data = map.pixels().iter().flat_map(|p| [p.x.as_f32(), p.y.as_f32(), p.z.as_f32()]).collect();
    Pfm { width: map.width(), height: map.height(), channels: 3, data }
}

pub fn from_scalar<T: Real>(map: &ScalarMap<T>) -> Pfm {
    Pfm { width: map.width(), height: map.height(), channels: 1, data: map.pixels().iter().map(|v| v.as_f32()).collect() }
}

pub fn to_rgb<T: Real>(img: &Pfm, path: &Path) -> Result<RgbMap<T>> {
    let px: Vec<Vec3<T>> = match img.channels {
        3 => img.data.chunks_exact(3).map(|c| Vec3::new(T::lit(c[0] as f64), T::lit(c[1] as f64), T::lit(c[2] as f64))).collect(),
        1 => img.data.iter().map(|&v| Vec3::splat(T::lit(v as f64))).collect(),
        _ => return Err(Error::format(path, "unsupported channel count")),
    };
    Ok(Map::from_vec(img.width, img.height, px).expect("decoded size"))
}

pub fn to_scalar<T: Real>(img: &Pfm, path: &Path) -> Result<ScalarMap<T>> {
    if img.channels != 1 {
        return Err(Error::format(path, "expected single-channel PFM"));
    }
    Ok(Map::from_vec(img.width, img.height, img.data.iter().map(|&v| T::lit(v as f64)).collect()).expect("decoded size"))
}

pub fn read_rgb<T: Real>(path: &Path) -> Result<RgbMap<T>> {
    to_rgb(&read(path)?, path)
}

pub fn write_rgb<T: Real>(path: &Path, map: &RgbMap<T>) -> Result<()> {
    write(path, &from_rgb(map))
}

pub fn read_scalar<T: Real>(path: &Path) -> Result<ScalarMap<T>> {
    to_scalar(&read(path)?, path)
}

pub fn write_scalar<T: Real>(path: &Path, map: &ScalarMap<T>) -> Result<()> {
    write(path, &from_scalar(map))
}
