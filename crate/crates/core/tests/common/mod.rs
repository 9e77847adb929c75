#![allow(dead_code)]

use relight::camera::Camera;
use relight::math::{vec3, Rgb, Vec3};
use relight::mesh::TriangleMesh;
use relight::oracle::{gen_procedural_scene, EmitterSpec, GeneratedScene, Material, ObjectShape, ObjectSpec, ProceduralSceneSpec};
use relight::scene::{MultiViewScene, RadianceImage};

pub const ROOM_MIN: [f64; 3] = [-1.5, 0.0, -1.5];
pub const ROOM_MAX: [f64; 3] = [1.5, 2.4, 1.5];

pub fn gray(v: f64) -> Rgb<f64> {
    vec3(v, v, v)
}

pub fn up() -> Vec3<f64> {
    vec3(0.0, 1.0, 0.0)
}

/// Closed room with inward normals.
pub fn room(subdivisions: usize) -> TriangleMesh<f64> {
    TriangleMesh::aabb_box(Vec3::from_f64(ROOM_MIN), Vec3::from_f64(ROOM_MAX), subdivisions, true)
}

/// `count` cameras on a horizontal circle looking at `target`.
pub fn ring(count: usize, width: usize, height: usize, radius: f64, elevation: f64, target: Vec3<f64>) -> Vec<Camera<f64>> {
    (0..count)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / count as f64;
            let eye = vec3(target.x + radius * a.cos(), elevation, target.z + radius * a.sin());
            Camera::look_at(k as u32, width, height, 75.0, eye, target, up())
        })
        .collect()
}

/// Every photograph the constant `value`.
pub fn constant_scene(mesh: TriangleMesh<f64>, cameras: Vec<Camera<f64>>, value: Rgb<f64>) -> MultiViewScene<f64> {
    let images = cameras.iter().map(|c| RadianceImage::constant(c.width, c.height, value)).collect();
    MultiViewScene::new(cameras, images, mesh).unwrap()
}

/// Uniformly glowing closed room seen by eight cameras.
pub fn furnace(width: usize, height: usize, radiance: f64) -> MultiViewScene<f64> {
    constant_scene(room(4), ring(8, width, height, 1.0, 1.2, vec3(0.0, 1.0, 0.0)), gray(radiance))
}

/// Colored room holding two boxes, rendered by the oracle.
pub fn two_box_spec() -> ProceduralSceneSpec {
    let mut s = ProceduralSceneSpec::empty_room();
    s.materials = vec![
        Material::diffuse("gray", [0.5, 0.5, 0.5]),
        Material::diffuse("red", [0.7, 0.2, 0.2]),
        Material::diffuse("blue", [0.2, 0.3, 0.7]),
    ];
    s.room_materials = [1, 2, 0, 0, 0, 0];
    s.objects = vec![
        ObjectSpec { shape: ObjectShape::Box { min: [-0.5, 0.0, -0.4], max: [-0.1, 0.6, 0.0] }, material: 1 },
        ObjectSpec { shape: ObjectShape::Box { min: [0.1, 0.0, 0.05], max: [0.45, 0.35, 0.4] }, material: 2 },
    ];
    s.spp = 16;
    s
}

/// Replaces the emitters with one dim panel covering most of the ceiling.
pub fn broad_light(mut s: ProceduralSceneSpec) -> ProceduralSceneSpec {
    s.emitters = vec![EmitterSpec { origin: [-1.2, 2.39, -1.2], edge_u: [2.4, 0.0, 0.0], edge_v: [0.0, 0.0, 2.4], emittance: [1.5, 1.5, 1.5] }];
    s
}

pub fn generate(spec: &ProceduralSceneSpec, seed: u64) -> GeneratedScene<f64> {
    gen_procedural_scene(spec, seed).unwrap()
}

/// Relative error with a floor on the denominator.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[(v.len() - 1) / 2]
}

pub fn percentile(v: &mut [f64], p: f64) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[((v.len() - 1) as f64 * p).round() as usize]
}

/// Per-pixel mirror lookup by brute force: all-triangle intersection for the
/// primary and reflected rays, exhaustive search over views in id order, and
/// the depth predicate evaluated from each view's own pixel ray. Samples
/// `images[j]` bilinearly; returns the chosen view and value.
pub fn mirror_oracle(
    scene: &MultiViewScene<f64>,
    camera: &relight::camera::Camera<f64>,
    images: &[relight::image::RgbMap<f64>],
    tol: f64,
) -> Vec<Option<(usize, Rgb<f64>)>> {
    use relight::raytrace::{brute_force_intersect, Ray};
    let offset = 1e-4 * scene.mesh.bbox_diagonal();
    let mut order: Vec<usize> = (0..scene.cameras.len()).collect();
    order.sort_by_key(|&j| scene.cameras[j].id);
    let mut out = Vec::with_capacity(camera.width * camera.height);
    for py in 0..camera.height {
        for px in 0..camera.width {
            let ray = camera.pixel_ray(px, py);
            let found = brute_force_intersect(&scene.mesh, &ray).and_then(|hit| {
                let n = if hit.normal.dot(ray.direction) > 0.0 { -hit.normal } else { hit.normal };
                let i = (hit.position - camera.center()).normalized();
                let r = (i - n * (2.0 * i.dot(n))).normalized();
                let y = brute_force_intersect(&scene.mesh, &Ray::new(hit.position + r * offset, r))?.position;
                let mut best: Option<(usize, f64, f64, f64)> = None;
                for &j in &order {
                    let cam = &scene.cameras[j];
                    let z = cam.depth_of(y);
                    let Some(p) = cam.project(y) else { continue };
                    if !(z > 0.0 && p.u >= 0.0 && p.v >= 0.0 && p.u < cam.width as f64 && p.v < cam.height as f64) {
                        continue;
                    }
                    let seen = brute_force_intersect(&scene.mesh, &cam.pixel_ray(p.u as usize, p.v as usize)).map(|h| cam.depth_of(h.position));
                    if !seen.is_some_and(|d| (d - z).abs() <= tol * z) {
                        continue;
                    }
                    let score = (y - cam.center()).normalized().dot(r);
                    if best.is_none_or(|b| score > b.1) {
                        best = Some((j, score, p.u, p.v));
                    }
                }
                best.map(|(j, _, u, v)| (j, images[j].bilinear(u, v)))
            });
            out.push(found);
        }
    }
    out
}

/// Smooth procedural radiance of a surface point.
pub fn texture(p: Vec3<f64>) -> Rgb<f64> {
    vec3(0.5 + 0.3 * (2.0 * p.x).sin() * (2.0 * p.y).cos(), 0.4 + 0.2 * (1.5 * p.y).sin(), 0.3 + 0.1 * p.x.cos())
}

/// Photographs of `mesh` painted with [`texture`], one sample per pixel
/// center.
pub fn textured_scene(mesh: TriangleMesh<f64>, cameras: Vec<relight::camera::Camera<f64>>) -> MultiViewScene<f64> {
    painted_scene(mesh, cameras, texture)
}

/// Photographs whose radiance is `paint` of the visible world point.
pub fn painted_scene(mesh: TriangleMesh<f64>, cameras: Vec<Camera<f64>>, paint: impl Fn(Vec3<f64>) -> Rgb<f64>) -> MultiViewScene<f64> {
    let blank = constant_scene(mesh, cameras.clone(), gray(0.0));
    let images = cameras
        .iter()
        .map(|c| {
            let g = relight::gbuffer::render_gbuffer(&blank, c);
            RadianceImage::new(g.map(|s| s.map_or(Rgb::zero(), |s| paint(s.position))))
        })
        .collect();
    blank.with_images(images).unwrap()
}
