mod common;

use std::collections::BTreeSet;

use common::*;
use relight::camera::Camera;
use relight::gbuffer::render_gbuffer;
use relight::image::{Map, RgbMap};
use relight::irradiance::{
    cluster_irradiance, compute_added_irradiance, detect_light_clusters, AddedParams, AlbedoMesh, ClusterParams, LightCluster,
};
use relight::math::{vec3, Rgb, Vec3};
use relight::mesh::TriangleMesh;
use relight::scene::{AreaLight, MultiViewScene, RadianceImage};

fn with_albedo(mesh: &TriangleMesh<f64>, a: f64) -> AlbedoMesh<f64> {
    let mut m = mesh.clone();
    m.albedo = Some(vec![gray(a); m.vertices.len()]);
    AlbedoMesh { seen: vec![true; m.vertices.len()], mesh: m }
}

fn light(id: u32, origin: Vec3<f64>, edge_u: Vec3<f64>, edge_v: Vec3<f64>, emittance: f64) -> AreaLight<f64> {
    AreaLight { id, origin, edge_u, edge_v, emittance: gray(emittance), two_sided: false }
}

fn ceiling_light(id: u32, x: f64, emittance: f64) -> AreaLight<f64> {
    light(id, vec3(x - 0.2, 2.3, -0.2), vec3(0.4, 0.0, 0.0), vec3(0.0, 0.0, 0.4), emittance)
}

fn mean_x(m: &RgbMap<f64>) -> f64 {
    m.pixels().iter().map(|p| p.x).sum::<f64>() / m.len() as f64
}

#[test]
fn direct_term_of_a_small_quad_is_area_over_distance_squared() {
    let plane = TriangleMesh::quad(vec3(-2.0, -2.0, 0.0), vec3(4.0, 0.0, 0.0), vec3(0.0, 4.0, 0.0), 1);
    let cam = Camera::look_at(0, 4, 4, 2.0, vec3(0.0, 0.0, 0.5), Vec3::zero(), up());
    let scene = constant_scene(plane.clone(), vec![cam.clone()], gray(0.0));
    let (s, d) = (0.1, 1.0);
    let l = light(0, vec3(-s / 2.0, -s / 2.0, d), vec3(0.0, s, 0.0), vec3(s, 0.0, 0.0), 1.0);
    assert!(l.normal().z < 0.0);
    let params = AddedParams { spp: 4096, max_depth: 1, seed: 3, denoise: None };
    let e = compute_added_irradiance(&scene, &with_albedo(&plane, 0.0), &[(l, 1.0)], &cam, &params);
    let want = s * s / (d * d);
    assert!(rel(mean_x(&e), want) < 0.03, "{} vs {want}", mean_x(&e));
}

#[test]
fn fully_occluded_light_adds_nothing() {
    let mesh = room(2);
    let cams = ring(2, 16, 12, 1.0, 1.2, vec3(0.0, 1.0, 0.0));
    let scene = constant_scene(mesh.clone(), cams.clone(), gray(0.1));
    let above = light(0, vec3(-0.2, 2.6, -0.2), vec3(0.4, 0.0, 0.0), vec3(0.0, 0.0, 0.4), 5.0);
    assert!(above.normal().y < 0.0);
    let e = compute_added_irradiance(&scene, &with_albedo(&mesh, 0.0), &[(above, 1.0)], &cams[0], &AddedParams::default());
    assert!(e.pixels().iter().all(|p| *p == Rgb::zero()));
}

#[test]
fn added_irradiance_superposes() {
    let spec = two_box_spec();
    let gt = relight::oracle::GtScene::<f64>::from_spec(&spec).unwrap();
    let cams = ring(2, 32, 24, 1.1, 1.3, vec3(0.0, 0.6, 0.0));
    let scene = constant_scene(gt.mesh.clone(), cams.clone(), gray(0.1));
    let albedo = with_albedo(&scene.mesh, 0.5 / std::f64::consts::PI);
    let (l1, l2) = (ceiling_light(1, -0.6, 4.0), ceiling_light(2, 0.7, 2.0));
    let p = AddedParams { spp: 8, max_depth: 3, seed: 9, denoise: Some(Default::default()) };
    let e1 = compute_added_irradiance(&scene, &albedo, &[(l1.clone(), 1.0)], &cams[0], &p);
    let e2 = compute_added_irradiance(&scene, &albedo, &[(l2.clone(), 1.0)], &cams[0], &p);
    let both = compute_added_irradiance(&scene, &albedo, &[(l1, 0.3), (l2, 0.7)], &cams[0], &p);
    let mut worst = 0.0f64;
    for ((a, b), c) in e1.pixels().iter().zip(e2.pixels()).zip(both.pixels()) {
        worst = worst.max((*a * 0.3 + *b * 0.7 - *c).map(|v| v.abs()).max_component());
    }
    assert!(worst < 1e-6, "{worst:e}");
    assert!(mean_x(&both) > 0.0);
}

#[test]
fn interreflections_only_add_light_in_a_white_box() {
    let mesh = room(3);
    let cams = ring(1, 24, 18, 1.0, 1.2, vec3(0.0, 1.0, 0.0));
    let scene = constant_scene(mesh.clone(), cams.clone(), gray(0.1));
    let albedo = with_albedo(&mesh, 0.9 / std::f64::consts::PI);
    let l = [(ceiling_light(0, 0.0, 3.0), 1.0)];
    let full = compute_added_irradiance(&scene, &albedo, &l, &cams[0], &AddedParams { spp: 16, max_depth: 5, seed: 1, denoise: None });
    let direct = compute_added_irradiance(&scene, &albedo, &l, &cams[0], &AddedParams { spp: 16, max_depth: 1, seed: 1, denoise: None });
    for (f, d) in full.pixels().iter().zip(direct.pixels()) {
        for c in 0..3 {
            assert!(f[c] >= d[c] - 1e-12, "{} < {}", f[c], d[c]);
        }
    }
    assert!(mean_x(&full) > 1.2 * mean_x(&direct));
}

/// Room with emissive panels just below the ceiling; panel pixels are
/// saturated in every photograph.
fn clipped_panel_scene(panels: &[Vec3<f64>], cams: Vec<Camera<f64>>) -> (MultiViewScene<f64>, Vec<[Vec3<f64>; 4]>) {
    let mut mesh = room(4);
    let base = mesh.triangles.len();
    let mut corners = Vec::new();
    for &o in panels {
        let (u, v) = (vec3(0.1, 0.0, 0.0), vec3(0.0, 0.0, 0.1));
        mesh.append(&TriangleMesh::quad(o, u, v, 2));
        corners.push([o, o + u, o + v, o + u + v]);
    }
    let scene = constant_scene(mesh.clone(), cams.clone(), gray(0.2));
    let images = cams
        .iter()
        .map(|c| {
            let g = render_gbuffer(&scene, c);
            let mut img = RadianceImage::constant(c.width, c.height, gray(0.2));
            for (i, s) in g.pixels().iter().enumerate() {
                if s.is_some_and(|s| s.triangle as usize >= base) {
                    img.pixels.pixels_mut()[i] = gray(1.0);
                    img.clip_mask.pixels_mut()[i] = [true; 3];
                }
            }
            img
        })
        .collect();
    (scene.with_images(images).unwrap(), corners)
}

fn looking_up(n: usize, target: Vec3<f64>) -> Vec<Camera<f64>> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let eye = vec3(target.x + 0.5 * a.cos(), 1.2, target.z + 0.5 * a.sin());
            Camera::look_at(k as u32, 160, 120, 50.0, eye, target, vec3(0.0, 0.0, 1.0))
        })
        .collect()
}

fn inside_sphere(c: &LightCluster<f64>, p: Vec3<f64>) -> bool {
    (p - c.center).length() <= c.radius + 1e-12
}

#[test]
fn one_clipped_panel_gives_one_enclosing_cluster() {
    let panel = vec3(0.0, 2.3, 0.0);
    let (scene, corners) = clipped_panel_scene(&[panel], looking_up(3, panel + vec3(0.05, 0.0, 0.05)));
    let clusters = detect_light_clusters(&scene, &ClusterParams::default());
    assert_eq!(clusters.len(), 1);
    for p in corners[0] {
        assert!(inside_sphere(&clusters[0], p), "{p:?} outside sphere {:?} r {}", clusters[0].center, clusters[0].radius);
    }
    assert!(clusters[0].radius < 0.12);
}

#[test]
fn distant_panels_stay_separate() {
    let (a, b) = (vec3(-0.5, 2.3, 0.0), vec3(0.5, 2.3, 0.0));
    let (scene, corners) = clipped_panel_scene(&[a, b], looking_up(3, vec3(0.05, 2.3, 0.05)));
    let clusters = detect_light_clusters(&scene, &ClusterParams::default());
    assert_eq!(clusters.len(), 2);
    assert!((clusters[0].center - clusters[1].center).length() > clusters[0].radius + clusters[1].radius);
    for (c, k) in clusters.iter().zip(corners) {
        assert!(k.iter().all(|p| inside_sphere(c, *p)));
    }
}

#[test]
fn unclipped_scene_has_no_clusters() {
    let scene = furnace(16, 12, 0.5);
    assert!(detect_light_clusters(&scene, &ClusterParams::default()).is_empty());
}

#[test]
fn voxelized_sphere_irradiance_matches_the_cone_formula() {
    let (r, d) = (0.2, 1.0);
    let center = vec3(0.0, 0.0, d);
    let mut mesh = TriangleMesh::quad(vec3(-2.0, -2.0, 0.0), vec3(4.0, 0.0, 0.0), vec3(0.0, 4.0, 0.0), 1);
    mesh.append(&TriangleMesh::icosphere(center, r, 4));
    let size = 0.02;
    let mut voxels = BTreeSet::new();
    let k = |c: f64| (c / size).floor() as i64;
    for x in k(-r - 0.05)..=k(r + 0.05) {
        for y in k(-r - 0.05)..=k(r + 0.05) {
            for z in k(d - r - 0.05)..=k(d + r + 0.05) {
                let lo = vec3(x as f64, y as f64, z as f64) * size;
                let hi = lo + vec3(size, size, size);
                let near = vec3(center.x.clamp(lo.x, hi.x), center.y.clamp(lo.y, hi.y), center.z.clamp(lo.z, hi.z));
                let far = vec3(
                    if center.x - lo.x > hi.x - center.x { lo.x } else { hi.x },
                    if center.y - lo.y > hi.y - center.y { lo.y } else { hi.y },
                    if center.z - lo.z > hi.z - center.z { lo.z } else { hi.z },
                );
                if (near - center).length() <= r && (far - center).length() >= r - 0.01 {
                    voxels.insert([x, y, z]);
                }
            }
        }
    }
    let cluster = LightCluster::from_voxels(0, size, voxels);
    let cam = Camera::look_at(0, 4, 4, 2.0, vec3(0.0, 0.0, 0.5), Vec3::zero(), up());
    let scene = constant_scene(mesh, vec![cam], gray(0.0));
    let e = cluster_irradiance(&scene, 0, &cluster, 4096, 5);
    let want = std::f64::consts::PI * r * r / (d * d);
    assert!(rel(mean_x(&e), want) < 0.03, "{} vs {want}", mean_x(&e));
}

#[test]
fn cluster_irradiance_is_zero_behind_the_receiver() {
    let mut mesh = TriangleMesh::quad(vec3(-2.0, -2.0, 0.0), vec3(4.0, 0.0, 0.0), vec3(0.0, 4.0, 0.0), 1);
    mesh.append(&TriangleMesh::aabb_box(vec3(-0.1, -0.1, -1.2), vec3(0.1, 0.1, -1.0), 1, false));
    let cluster = LightCluster::from_voxels(0, 0.02, (-5..5).flat_map(|x| (-5..5).map(move |y| [x, y, -51])).collect());
    let cam = Camera::look_at(0, 4, 4, 2.0, vec3(0.0, 0.0, 0.5), Vec3::zero(), up());
    let scene = constant_scene(mesh, vec![cam], gray(0.0));
    let e: Map<Rgb<f64>> = cluster_irradiance(&scene, 0, &cluster, 64, 5);
    assert!(e.pixels().iter().all(|p| *p == Rgb::zero()));
}
