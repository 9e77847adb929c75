mod common;

use std::collections::BTreeMap;

use common::*;
use relight::camera::Camera;
use relight::image::{Map, RgbMap};
use relight::irradiance::ViewIrradiance;
use relight::math::{vec3, Rgb, Vec3};
use relight::mesh::TriangleMesh;
use relight::mirror::{compute_source_mirror, trace_mirror};
use relight::raytrace::brute_force_intersect;
use relight::reproject::{compute_flow, composite_irradiance, extra_features, render_composites, warp_by_flow, warp_view, CompositeSources, NovelGeometry};
use relight::scene::{LightingEdit, DEFAULT_VISIBILITY_TOL as TOL};

fn plane_z0() -> TriangleMesh<f64> {
    TriangleMesh::quad(vec3(-3.0, -3.0, 0.0), vec3(6.0, 0.0, 0.0), vec3(0.0, 6.0, 0.0), 2)
}

fn down_camera(id: u32, eye: Vec3<f64>, w: usize, h: usize, hfov: f64) -> Camera<f64> {
    Camera::look_at(id, w, h, hfov, eye, eye - vec3(0.0, 0.0, 1.0), up())
}

#[test]
fn source_mirror_matches_brute_force_in_a_textured_room() {
    let cams = ring(8, 48, 36, 1.0, 1.2, vec3(0.0, 0.4, 0.0));
    let scene = textured_scene(room(6), cams);
    let images: Vec<RgbMap<f64>> = scene.images.iter().map(|i| i.pixels.clone()).collect();
    let mut agree = 0;
    let mut total = 0;
    for v in [0, 3] {
        let cam = &scene.cameras[v];
        let oracle = mirror_oracle(&scene, cam, &images, TOL);
        let trace = trace_mirror(&scene, cam, TOL);
        let m = compute_source_mirror(&scene, v, TOL);
        for (i, o) in oracle.iter().enumerate() {
            let mine = trace.pixels()[i].and_then(|h| h.source).map(|s| (s.0, m.values.pixels()[i]));
            if o.is_none() && mine.is_none() {
                continue;
            }
            total += 1;
            if let (Some((j, a)), Some((k, b))) = (o, mine) {
                if *j == k && (*a - b).map(|c| c.abs()).max_component() <= 1e-9 {
                    agree += 1;
                }
            }
        }
    }
    assert!(total > 1000);
    assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");
}

#[test]
fn floor_reflects_the_ceiling_at_the_mirrored_point() {
    let cams = ring(8, 48, 36, 1.0, 1.2, vec3(0.0, 0.4, 0.0));
    let scene = textured_scene(room(6), cams);
    let cam = &scene.cameras[0];
    let trace = trace_mirror(&scene, cam, TOL);
    let c = cam.center();
    let mut checked = 0;
    for y in 0..cam.height {
        for x in 0..cam.width {
            let Some(h) = brute_force_intersect(&scene.mesh, &cam.pixel_ray(x, y)) else { continue };
            let Some(m) = trace.get(x, y) else { continue };
            if h.position.y.abs() > 1e-9 {
                continue;
            }
            // Mirror image of the eye below the floor, through the floor point.
            let eye = vec3(c.x, -c.y, c.z);
            let d = (h.position - eye).normalized();
            let t = (ROOM_MAX[1] - h.position.y) / d.y;
            let on_ceiling = h.position + d * t;
            if on_ceiling.x.abs() < ROOM_MAX[0] - 0.05 && on_ceiling.z.abs() < ROOM_MAX[2] - 0.05 {
                assert!((m.point - on_ceiling).length() < 1e-6, "{:?} vs {on_ceiling:?}", m.point);
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn escaping_mirror_rays_are_invalid_and_constant_images_give_the_constant() {
    let scene = constant_scene(plane_z0(), vec![down_camera(0, vec3(0.0, 0.0, 1.0), 8, 8, 60.0)], gray(0.7));
    let m = compute_source_mirror(&scene, 0, TOL);
    assert!(m.valid.pixels().iter().all(|v| !v));
    assert!(m.values.pixels().iter().all(|v| *v == Rgb::zero()));

    let s = constant_scene(room(4), ring(8, 24, 18, 1.0, 1.2, vec3(0.0, 1.0, 0.0)), gray(0.7));
    let m = compute_source_mirror(&s, 2, TOL);
    assert!(m.valid.pixels().iter().any(|v| *v));
    for (v, ok) in m.values.pixels().iter().zip(m.valid.pixels()) {
        if *ok {
            assert!((*v - gray(0.7)).map(|c| c.abs()).max_component() < 1e-12);
        }
    }
}

#[test]
fn identity_warp_reproduces_the_photograph() {
    let scene = textured_scene(room(4), ring(8, 32, 24, 1.0, 1.2, vec3(0.0, 1.0, 0.0)));
    for v in [0, 5] {
        let w = warp_view(&scene, v, &scene.cameras[v], TOL);
        assert!(w.valid.pixels().iter().all(|b| *b));
        for (a, b) in w.values.pixels().iter().zip(scene.images[v].pixels.pixels()) {
            assert!((*a - *b).map(|c| c.abs()).max_component() <= 1e-6);
        }
    }
}

#[test]
fn translated_warp_matches_brute_force() {
    let scene = textured_scene(room(4), ring(8, 32, 24, 1.0, 1.2, vec3(0.0, 1.0, 0.0)));
    let novel = Camera::look_at(99, 40, 30, 70.0, vec3(0.2, 1.1, 0.3), vec3(-0.5, 0.8, -1.0), up());
    for v in 0..scene.cameras.len() {
        let w = warp_view(&scene, v, &novel, TOL);
        let cam = &scene.cameras[v];
        for y in 0..novel.height {
            for x in 0..novel.width {
                let want = brute_force_intersect(&scene.mesh, &novel.pixel_ray(x, y)).and_then(|h| {
                    let z = cam.depth_of(h.position);
                    let p = cam.project(h.position)?;
                    if !(z > 0.0 && p.u >= 0.0 && p.v >= 0.0 && p.u < cam.width as f64 && p.v < cam.height as f64) {
                        return None;
                    }
                    let d = brute_force_intersect(&scene.mesh, &cam.pixel_ray(p.u as usize, p.v as usize)).map(|s| cam.depth_of(s.position))?;
                    ((d - z).abs() <= TOL * z).then(|| scene.images[v].pixels.bilinear(p.u, p.v))
                });
                assert_eq!(*w.valid.get(x, y), want.is_some(), "view {v} pixel ({x}, {y})");
                if let Some(want) = want {
                    assert!((*w.values.get(x, y) - want).map(|c| c.abs()).max_component() < 1e-12);
                }
            }
        }
    }
}

fn irradiance_of(e: f64, w: usize, h: usize) -> ViewIrradiance<f64> {
    let m: RgbMap<f64> = Map::filled(w, h, gray(e));
    ViewIrradiance { e_src: m.clone(), e_src_nc: m, valid: Map::filled(w, h, true), e_cluster: Vec::new(), e_add: BTreeMap::new() }
}

#[test]
fn irradiance_blend_uses_inverse_camera_distance() {
    let c_new = vec3(0.0, 0.0, 2.0);
    let cams = vec![down_camera(0, c_new + vec3(1.0, 0.0, 0.0), 16, 16, 140.0), down_camera(1, c_new + vec3(-3.0, 0.0, 0.0), 16, 16, 140.0)];
    let scene = constant_scene(plane_z0(), cams, gray(0.5));
    let irr = vec![irradiance_of(1.0, 16, 16), irradiance_of(0.0, 16, 16)];
    let novel = down_camera(9, c_new, 4, 4, 5.0);
    let (e_src, _, e_rem) = composite_irradiance(&scene, &irr, &LightingEdit::noop(), &novel, TOL);
    for p in e_src.pixels() {
        assert!((p.x - 0.75).abs() < 1e-12, "{}", p.x);
    }
    let edit = LightingEdit { alpha_dim: 0.5, light_weights: BTreeMap::new() };
    let (_, _, half) = composite_irradiance(&scene, &irr, &edit, &novel, TOL);
    assert!(e_rem.pixels().iter().all(|p| *p == Rgb::zero()));
    assert!(half.pixels().iter().all(|p| (p.x - 0.375).abs() < 1e-12));
}

#[test]
fn extra_features_in_hand_built_geometry() {
    let mut mesh = TriangleMesh::aabb_box(vec3(-2.0, 0.0, -2.0), vec3(2.0, 2.0, 2.0), 2, true);
    mesh.drop_degenerate();
    let cam = Camera::look_at(0, 3, 3, 10.0, vec3(0.0, 1.0, 0.0), vec3(0.0, 0.0, 0.0), vec3(0.0, 0.0, 1.0));
    let scene = constant_scene(mesh, vec![cam.clone()], gray(0.5));
    let f = extra_features(&cam, &NovelGeometry::new(&scene, &cam, TOL));
    assert!((f.ratio.get(1, 1) - 2.0).abs() < 1e-9, "{}", f.ratio.get(1, 1));
    assert!((f.cosine.get(1, 1) - 1.0).abs() < 1e-12);

    let wall = constant_scene(plane_z0(), vec![down_camera(0, vec3(0.0, 0.0, 1.0), 6, 4, 30.0)], gray(0.5));
    let f = extra_features(&wall.cameras[0], &NovelGeometry::new(&wall, &wall.cameras[0], TOL));
    assert!(f.disparity.pixels().iter().all(|d| *d == 0.0));
    assert!(f.ratio.pixels().iter().all(|r| *r == 10.0));
}

#[test]
fn flow_is_zero_for_one_camera_and_stereo_disparity_for_a_baseline() {
    let d = 2.0;
    let a = down_camera(0, vec3(0.0, 0.0, d), 32, 24, 50.0);
    let b = down_camera(1, vec3(0.15, 0.0, d), 32, 24, 50.0);
    let scene = textured_scene(plane_z0(), vec![a.clone(), b.clone()]);
    let same = compute_flow(&scene, &a, &a, TOL);
    assert!(same.valid.pixels().iter().all(|v| *v));
    assert!(same.flow.pixels().iter().all(|f| f[0].abs() < 1e-9 && f[1].abs() < 1e-9));

    let ab = compute_flow(&scene, &a, &b, TOL);
    let want = a.fx * 0.15 / d;
    let mut n = 0;
    for (f, ok) in ab.flow.pixels().iter().zip(ab.valid.pixels()) {
        if *ok {
            assert!((f[0].abs() - want).abs() < 1e-9 && f[1].abs() < 1e-9, "{f:?} vs {want}");
            n += 1;
        }
    }
    assert!(n > 32 * 20);

    let warped = warp_by_flow(&scene.images[1].pixels, &ab);
    for ((w, g), ok) in warped.pixels().iter().zip(scene.images[0].pixels.pixels()).zip(ab.valid.pixels()) {
        if *ok {
            assert!((*w - *g).map(|c| c.abs()).max_component() < 1e-3);
        }
    }
}

#[test]
fn flow_warp_reproduces_ground_truth_in_a_room() {
    let cams = ring(8, 64, 48, 1.0, 1.2, vec3(0.0, 1.0, 0.0));
    let scene = textured_scene(room(4), cams);
    let (a, b) = (&scene.cameras[0], &scene.cameras[1]);
    let f = compute_flow(&scene, a, b, TOL);
    let warped = warp_by_flow(&scene.images[1].pixels, &f);
    let mut errs = Vec::new();
    for ((w, g), ok) in warped.pixels().iter().zip(scene.images[0].pixels.pixels()).zip(f.valid.pixels()) {
        if *ok {
            errs.push((*w - *g).map(|c| c.abs()).max_component());
        }
    }
    assert!(errs.len() > 500);
    assert!(median(&mut errs) < 1e-3);
}

fn composites(scene: &relight::scene::MultiViewScene<f64>, cam: &Camera<f64>) -> relight::reproject::CompositeSet<f64> {
    let sources = CompositeSources { mirrors: &[], irradiance: &[] };
    render_composites(scene, &sources, &LightingEdit::noop(), cam, &NovelGeometry::new(scene, cam, TOL), TOL)
}

#[test]
fn one_view_fills_every_composite() {
    let cam = Camera::look_at(0, 24, 18, 70.0, vec3(0.3, 1.0, 0.2), vec3(0.0, 0.5, -1.5), up());
    let scene = textured_scene(room(4), vec![cam]);
    let novel = Camera::look_at(1, 16, 12, 50.0, vec3(0.25, 1.0, 0.15), vec3(0.0, 0.5, -1.5), up());
    let c = composites(&scene, &novel);
    let w = warp_view(&scene, 0, &novel, TOL);
    let mut n = 0;
    for i in 0..w.valid.len() {
        if w.valid.pixels()[i] {
            n += 1;
            for m in &c.images {
                assert!((m.pixels()[i] - w.values.pixels()[i]).map(f64::abs).max_component() < 1e-12);
            }
        }
    }
    assert!(n > 100);
}

#[test]
fn identical_views_collapse_all_composites() {
    let scene = constant_scene(room(4), ring(8, 24, 18, 1.0, 1.2, vec3(0.0, 1.0, 0.0)), vec3(0.2, 0.4, 0.6));
    let novel = Camera::look_at(9, 20, 15, 70.0, vec3(0.1, 1.1, 0.1), vec3(0.5, 0.6, -1.0), up());
    let c = composites(&scene, &novel);
    for i in 0..c.valid_views.len() {
        if c.valid_views.pixels()[i] > 0 {
            for m in &c.images {
                assert!((m.pixels()[i] - vec3(0.2, 0.4, 0.6)).map(f64::abs).max_component() < 1e-12);
            }
        }
    }
}

#[test]
fn distance_and_angle_composites_vary_continuously_with_the_camera() {
    let scene = textured_scene(room(4), ring(8, 32, 24, 1.0, 1.2, vec3(0.0, 1.0, 0.0)));
    let at = |dx: f64| Camera::look_at(9, 24, 18, 60.0, vec3(0.1 + dx, 1.1, 0.2), vec3(0.1 + dx, 0.8, -1.5), up());
    let base = composites(&scene, &at(0.0));
    let change = |d: f64| {
        let moved = composites(&scene, &at(d));
        let mut worst = 0.0f64;
        for i in 0..base.valid_views.len() {
            if base.valid_views.pixels()[i] == 0 || base.valid_views.pixels()[i] != moved.valid_views.pixels()[i] {
                continue;
            }
            for k in 0..2 {
                worst = worst.max((base.images[k].pixels()[i] - moved.images[k].pixels()[i]).map(f64::abs).max_component());
            }
        }
        worst
    };
    let (coarse, fine) = (change(1e-3), change(1e-6));
    assert!(fine < 1e-4 && fine < 0.01 * coarse.max(1e-9) + 1e-9, "{coarse:e} -> {fine:e}");
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
    #[test]
    fn heuristic_composites_stay_in_the_hull(x in -1.0f64..1.0, y in 0.4f64..2.0, z in -1.0f64..1.0, yaw in 0.0f64..std::f64::consts::TAU) {
        let scene = textured_scene(room(4), ring(8, 24, 18, 1.0, 1.2, vec3(0.0, 1.0, 0.0)));
        let eye = vec3(x, y, z);
        let novel = Camera::look_at(9, 16, 12, 70.0, eye, eye + vec3(yaw.cos(), -0.2, yaw.sin()), up());
        let c = composites(&scene, &novel);
        let warped: Vec<_> = (0..8).map(|v| warp_view(&scene, v, &novel, TOL)).collect();
        for i in 0..c.valid_views.len() {
            let s: Vec<Rgb<f64>> = warped.iter().filter(|w| w.valid.pixels()[i]).map(|w| w.values.pixels()[i]).collect();
            proptest::prop_assert_eq!(s.len(), c.valid_views.pixels()[i] as usize);
            for m in &c.images[..4] {
                for ch in 0..3 {
                    let lo = s.iter().map(|v| v[ch]).fold(f64::INFINITY, f64::min);
                    let hi = s.iter().map(|v| v[ch]).fold(f64::NEG_INFINITY, f64::max);
                    let p = m.pixels()[i][ch];
                    proptest::prop_assert!(s.is_empty() && p == 0.0 || (p >= lo - 1e-12 && p <= hi + 1e-12));
                }
            }
        }
    }
}
