//! Binary PGM (`P5`) and PPM (`P6`) with 8-bit samples, used for masks:
//! 255 marks a set pixel (or channel), 0 an unset one.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Map, Mask};

fn encode_raw(magic: &str, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(payload);
    out
}

fn decode_raw(bytes: &[u8], path: &Path, magic: &str, channels: usize) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != magic {
        return Err(Error::format(path, format!("expected {magic}, found {:?}", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, format!("bad header field {s:?}")));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(path, "only 8-bit samples are supported"));
    }
    pos += 1;
    let n = w * h * channels;
    let payload = bytes.get(pos..pos + n).ok_or_else(|| Error::format(path, "truncated payload"))?;
    Ok((w, h, payload.to_vec()))
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let payload: Vec<u8> = mask.pixels().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_raw("P5", mask.width(), mask.height(), &payload)
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<Mask> {
    let (w, h, data) = decode_raw(bytes, path, "P5", 1)?;
    Ok(Map::from_vec(w, h, data.iter().map(|&v| v >= 128).collect()).expect("decoded size"))
}

pub fn encode_channel_mask(mask: &Map<[bool; 3]>) -> Vec<u8> {
    let payload: Vec<u8> = mask.pixels().iter().flat_map(|c| c.map(|b| if b { 255u8 } else { 0 })).collect();
    encode_raw("P6", mask.width(), mask.height(), &payload)
}

pub fn decode_channel_mask(bytes: &[u8], path: &Path) -> Result<Map<[bool; 3]>> {
    let (w, h, data) = decode_raw(bytes, path, "P6", 3)?;
    let px = data.chunks_exact(3).map(|c| [c[0] >= 128, c[1] >= 128, c[2] >= 128]).collect();
    Ok(Map::from_vec(w, h, px).expect("decoded size"))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_mask(&super::read_bytes(path)?, path)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    super::write_atomic(path, &encode_mask(mask))
}

pub fn read_channel_mask(path: &Path) -> Result<Map<[bool; 3]>> {
    decode_channel_mask(&super::read_bytes(path)?, path)
}

pub fn write_channel_mask(path: &Path, mask: &Map<[bool; 3]>) -> Result<()> {
    super::write_atomic(path, &encode_channel_mask(mask))
}
