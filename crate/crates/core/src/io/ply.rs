//! Binary little-endian PLY meshes.
//!
//! Vertices carry `x y z nx ny nz`, optionally `ar ag ab` (albedo) and
//! `albedo_seen`; faces are index lists, fan-triangulated on read. Missing
//! normals are rebuilt from area-weighted face normals.

use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mesh::TriangleMesh;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// A mesh plus the optional per-vertex "seen" flags of an albedo mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct PlyMesh<T> {
    pub mesh: TriangleMesh<T>,
    pub albedo_seen: Option<Vec<bool>>,
}

pub fn decode<T: Real>(bytes: &[u8], path: &Path) -> Result<PlyMesh<T>> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let header_end = find_header_end(bytes).ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("header is not ASCII"))?;
    let mut lines = header.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(bad(&format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count).ok_or_else(|| bad("bad list count type"))?,
                    item: Scalar::parse(item).ok_or_else(|| bad("bad list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| bad("bad property type"))?,
                });
            }
            _ => return Err(bad(&format!("unrecognized header line {line:?}"))),
        }
    }

    let mut pos = header_end;
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut albedo = Vec::new();
    let mut seen = Vec::new();
    let mut triangles = Vec::new();
    let (mut has_normals, mut has_albedo, mut has_seen) = (false, false, false);
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes.get(*pos..*pos + n).ok_or_else(|| Error::format(path, "truncated PLY payload"))?;
        *pos += n;
        Ok(s)
    };

    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let names: Vec<&str> = el
                    .props
                    .iter()
                    .map(|p| match p {
                        Property::Scalar { name, .. } | Property::List { name, .. } => name.as_str(),
                    })
                    .collect();
                has_normals = ["nx", "ny", "nz"].iter().all(|n| names.contains(n));
                has_albedo = ["ar", "ag", "ab"].iter().all(|n| names.contains(n));
                has_seen = names.contains(&"albedo_seen");
                for _ in 0..el.count {
                    let mut vals = std::collections::HashMap::new();
                    for p in &el.props {
                        match p {
                            Property::Scalar { name, ty } => {
                                let v = ty.read(take(&mut pos, ty.size())?);
                                vals.insert(name.as_str(), v);
                            }
                            Property::List { count, item, .. } => {
                                let n = count.read(take(&mut pos, count.size())?) as usize;
                                take(&mut pos, n * item.size())?;
                            }
                        }
                    }
                    let get = |k: &str| vals.get(k).copied().unwrap_or(0.0);
                    vertices.push(Vec3::from_f64([get("x"), get("y"), get("z")]));
                    if has_normals {
                        normals.push(Vec3::from_f64([get("nx"), get("ny"), get("nz")]));
                    }
                    if has_albedo {
                        albedo.push(Vec3::from_f64([get("ar"), get("ag"), get("ab")]));
                    }
                    if has_seen {
                        seen.push(get("albedo_seen") != 0.0);
                    }
                }
            }
            "face" => {
                for _ in 0..el.count {
                    for p in &el.props {
                        match p {
                            Property::List { name, count, item } if name == "vertex_indices" || name == "vertex_index" => {
                                let n = count.read(take(&mut pos, count.size())?) as usize;
                                let raw = take(&mut pos, n * item.size())?;
                                let idx: Vec<u32> = raw.chunks_exact(item.size()).map(|c| item.read(c) as u32).collect();
                                for k in 1..n.saturating_sub(1) {
                                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                                }
                            }
                            Property::List { count, item, .. } => {
                                let n = count.read(take(&mut pos, count.size())?) as usize;
                                take(&mut pos, n * item.size())?;
                            }
                            Property::Scalar { ty, .. } => {
                                take(&mut pos, ty.size())?;
                            }
                        }
                    }
                }
            }
            _ => {
                for _ in 0..el.count {
                    for p in &el.props {
                        match p {
                            Property::Scalar { ty, .. } => {
                                take(&mut pos, ty.size())?;
                            }
                            Property::List { count, item, .. } => {
                                let n = count.read(take(&mut pos, count.size())?) as usize;
                                take(&mut pos, n * item.size())?;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut mesh = TriangleMesh::new(vertices, normals, triangles);
    if !has_normals {
        mesh.normals = face_weighted_normals(&mesh);
    }
    if has_albedo {
        mesh.albedo = Some(albedo);
    }
    Ok(PlyMesh { mesh, albedo_seen: has_seen.then_some(seen) })
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let needle = b"end_header";
    let at = bytes.windows(needle.len()).position(|w| w == needle)?;
    let mut end = at + needle.len();
    if bytes.get(end) == Some(&b'\r') {
        end += 1;
    }
    (bytes.get(end) == Some(&b'\n')).then_some(end + 1)
}

fn face_weighted_normals<T: Real>(mesh: &TriangleMesh<T>) -> Vec<Vec3<T>> {
    let mut acc = vec![Vec3::zero(); mesh.vertices.len()];
    for t in &mesh.triangles {
        if t.iter().any(|&k| k as usize >= mesh.vertices.len()) {
            continue;
        }
        let [a, b, c] = t.map(|k| mesh.vertices[k as usize]);
        let n = (b - a).cross(c - a);
        for &k in t {
            acc[k as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| if n.length() > T::zero() { n.normalized() } else { Vec3::new(T::zero(), T::zero(), T::one()) })
        .collect()
}

pub fn encode<T: Real>(mesh: &TriangleMesh<T>, albedo_seen: Option<&[bool]>) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", mesh.vertices.len());
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        header += &format!("property float {p}\n");
    }
    if mesh.albedo.is_some() {
        for p in ["ar", "ag", "ab"] {
            header += &format!("property float {p}\n");
        }
    }
    if albedo_seen.is_some() {
        header += "property uchar albedo_seen\n";
    }
    header += &format!("element face {}\nproperty list uchar int vertex_indices\nend_header\n", mesh.triangles.len());
    let mut out = header.into_bytes();
    for i in 0..mesh.vertices.len() {
        let mut push = |v: Vec3<T>| {
            for c in v.to_array() {
                out.extend_from_slice(&c.as_f32().to_le_bytes());
            }
        };
        push(mesh.vertices[i]);
        push(mesh.normals[i]);
        if let Some(a) = &mesh.albedo {
            push(a[i]);
        }
        if let Some(s) = albedo_seen {
            out.push(s[i] as u8);
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for k in t {
            out.extend_from_slice(&(*k as i32).to_le_bytes());
        }
    }
    out
}

pub fn read<T: Real>(path: &Path) -> Result<PlyMesh<T>> {
    decode(&super::read_bytes(path)?, path)
}

pub fn write<T: Real>(path: &Path, mesh: &TriangleMesh<T>, albedo_seen: Option<&[bool]>) -> Result<()> {
    super::write_atomic(path, &encode(mesh, albedo_seen))
}
