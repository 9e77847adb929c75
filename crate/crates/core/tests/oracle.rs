mod common;

use common::*;
use relight::math::{vec3, Rgb, Vec3};
use relight::oracle::{
    brute_force_irradiance, degrade_mesh, gen_procedural_scene, render_ground_truth, render_unsplit, GtParams, GtScene, Lobe, Material,
    ObjectShape, ObjectSpec, ProceduralSceneSpec, Surface,
};
use relight::raytrace::brute_force_intersect;
use relight::scene::DEFAULT_VISIBILITY_TOL as TOL;

fn small(mut s: ProceduralSceneSpec, w: usize, h: usize, spp: usize) -> ProceduralSceneSpec {
    s.cameras.width = w;
    s.cameras.height = h;
    s.spp = spp;
    s
}

#[test]
fn empty_room_is_closed_with_one_emitter_and_at_least_eight_cameras() {
    let g = generate(&small(ProceduralSceneSpec::empty_room(), 8, 6, 2), 3);
    assert!(g.scene.cameras.len() >= 8);
    assert_eq!(g.gt.lights.len(), 1);
    let room_tris = 6 * 2 * 8 * 8;
    let room = relight::mesh::TriangleMesh::<f64>::aabb_box(Vec3::from_f64([-1.5, 0.0, -1.5]), Vec3::from_f64([1.5, 2.4, 1.5]), 8, true);
    assert_eq!(room.triangles.len(), room_tris);
    let mut room_edges = std::collections::HashMap::new();
    for t in &room.triangles {
        for k in 0..3 {
            let (a, b) = (room.vertices[t[k] as usize].to_f64(), room.vertices[t[(k + 1) % 3] as usize].to_f64());
            let key = if a < b { (a.map(f64::to_bits), b.map(f64::to_bits)) } else { (b.map(f64::to_bits), a.map(f64::to_bits)) };
            *room_edges.entry(key).or_insert(0) += 1;
        }
    }
    assert!(room_edges.values().all(|c| *c == 2), "room shell is watertight");
}

#[test]
fn generation_is_deterministic_per_seed() {
    let spec = small(two_box_spec(), 12, 9, 4);
    let a = generate(&spec, 11);
    let b = generate(&spec, 11);
    assert_eq!(a.scene.cameras, b.scene.cameras);
    assert_eq!(a.scene.mesh, b.scene.mesh);
    for (x, y) in a.scene.images.iter().zip(&b.scene.images) {
        assert_eq!(x.pixels, y.pixels);
    }
    assert_eq!(a.renders, b.renders);
}

#[test]
fn sphere_surface_is_within_one_percent_of_its_radius() {
    let mut spec = small(ProceduralSceneSpec::empty_room(), 4, 3, 1);
    let (c, r) = ([0.2, 0.5, -0.1], 0.3);
    spec.objects.push(ObjectSpec { shape: ObjectShape::Sphere { center: c, radius: r }, material: 0 });
    let gt = GtScene::<f64>::from_spec(&spec).unwrap();
    let center = Vec3::from_f64(c);
    let sphere = Surface::Material(0);
    let room_tris = 6 * 2 * spec.subdivisions * spec.subdivisions;
    let mut worst = 0.0f64;
    for (i, t) in gt.mesh.triangles.iter().enumerate().skip(room_tris) {
        if gt.surfaces[i] != sphere {
            continue;
        }
        let p = t.map(|k| gt.mesh.vertices[k as usize]);
        let centroid = (p[0] + p[1] + p[2]) / 3.0;
        for q in [p[0], p[1], p[2], centroid] {
            worst = worst.max(((q - center).length() - r).abs() / r);
        }
    }
    assert!(worst < 0.01, "worst relative deviation {worst}");
}

#[test]
fn furnace_radiance_is_bounded_by_the_geometric_series() {
    let spec = small(ProceduralSceneSpec::empty_room(), 24, 18, 32);
    let g = generate(&spec, 0);
    let bound = 8.0 / (1.0 - 0.5);
    for r in &g.renders {
        for p in r.total().pixels() {
            assert!(p.max_component() <= bound, "{p:?}");
        }
    }
}

#[test]
fn all_diffuse_scene_has_no_view_dependent_part() {
    let g = generate(&small(two_box_spec(), 16, 12, 8), 1);
    assert!(g.gt.all_diffuse());
    for r in &g.renders {
        assert!(r.vdep.pixels().iter().all(|p| *p == Rgb::zero()));
        assert!(r.diffuse.pixels().iter().any(|p| p.max_component() > 0.0));
    }
}

#[test]
fn mirror_walls_leave_only_the_emitter_in_the_diffuse_part() {
    let mut spec = small(ProceduralSceneSpec::empty_room(), 24, 18, 8);
    spec.materials = vec![Material::glossy("mirror", [0.9, 0.9, 0.9], 1.0, Lobe::Mirror)];
    let gt = GtScene::<f64>::from_spec(&spec).unwrap();
    let cam = &spec.ring_cameras::<f64>(0)[0];
    let r = render_ground_truth(&gt, cam, &gt.source_lighting(), &GtParams { spp: 8, max_depth: 6, seed: 0 });
    let mut lit = 0;
    for y in 0..cam.height {
        for x in 0..cam.width {
            let on_emitter = brute_force_intersect(&gt.mesh, &cam.pixel_ray(x, y))
                .is_some_and(|h| matches!(gt.surfaces[h.triangle as usize], Surface::Emitter(_)));
            if !on_emitter {
                assert_eq!(*r.diffuse.get(x, y), Rgb::zero(), "({x}, {y})");
            }
        }
    }
    for p in r.vdep.pixels() {
        lit += (p.max_component() > 0.0) as usize;
    }
    assert!(lit > 0);
}

#[test]
fn split_sum_matches_the_unsplit_render() {
    let spec = small(ProceduralSceneSpec::mirror_box(), 16, 12, 1);
    let gt = GtScene::<f64>::from_spec(&spec).unwrap();
    let cam = &spec.ring_cameras::<f64>(0)[2];
    let params = GtParams { spp: 256, max_depth: 6, seed: 5 };
    let split = render_ground_truth(&gt, cam, &gt.source_lighting(), &params).total();
    let unsplit = render_unsplit(&gt, cam, &gt.source_lighting(), &params);
    for (a, b) in split.pixels().iter().zip(unsplit.pixels()) {
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() <= 0.02 * b[c].abs().max(1e-9), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn tonemapped_residual_is_non_negative() {
    let g = generate(&small(ProceduralSceneSpec::mirror_box(), 24, 18, 16), 2);
    let mut glossy = 0;
    for r in &g.renders {
        let (_, res) = r.tonemapped(64.0).unwrap();
        for p in res.pixels() {
            assert!(p.min_component() >= -1e-6, "{p:?}");
            glossy += (p.max_component() > 0.0) as usize;
        }
    }
    assert!(glossy > 0);
}

#[test]
fn quadrature_of_a_constant_enclosure_is_pi_l() {
    let l = 0.5;
    let scene = furnace(48, 36, l);
    let none = scene.cameras.len();
    for (p, n) in [(vec3(0.0, 0.0, 0.0), up()), (vec3(0.3, 1.0, -0.2), vec3(0.0, 0.0, 1.0))] {
        let e = brute_force_irradiance(&scene, none, p, n.normalized(), (64, 256), TOL).unwrap();
        assert!(rel(e.x, std::f64::consts::PI * l) < 1e-3, "{e:?}");
    }
}

#[test]
fn quadrature_of_a_half_bright_hemisphere_is_half() {
    let l = 0.8;
    let cams = ring(8, 192, 144, 1.0, 1.2, vec3(0.0, 1.0, 0.0));
    let scene = painted_scene(room(4), cams, |p| if p.x > 0.0 { gray(l) } else { Rgb::zero() });
    let e = brute_force_irradiance(&scene, scene.cameras.len(), vec3(0.0, 0.0, 0.0), up(), (64, 256), TOL).unwrap();
    let want = std::f64::consts::PI * l / 2.0;
    assert!(rel(e.x, want) < 5e-3, "{} vs {want}", e.x);
}

#[test]
fn degrade_mesh_is_identity_bounded_and_decimates() {
    let mesh = room(8);
    assert_eq!(degrade_mesh(&mesh, 0.0, 0.0, 1), mesh);

    let noisy = degrade_mesh(&mesh, 0.002, 0.0, 1);
    let bound = 0.002 * mesh.bbox_diagonal();
    assert_eq!(noisy.vertices.len(), mesh.vertices.len());
    let mut moved = 0.0f64;
    for (a, b) in noisy.vertices.iter().zip(&mesh.vertices) {
        moved = moved.max((*a - *b).length());
    }
    assert!(moved <= bound * (1.0 + 1e-12) && moved > 0.0, "{moved} vs {bound}");

    let half = degrade_mesh(&mesh, 0.0, 0.5, 1);
    let want = mesh.triangles.len() as f64 / 2.0;
    assert!((half.triangles.len() as f64 - want).abs() <= 0.05 * want, "{} vs {want}", half.triangles.len());
}

#[test]
fn procedural_scene_rejects_implausible_materials() {
    let mut spec = small(ProceduralSceneSpec::empty_room(), 4, 3, 1);
    spec.materials[0].albedo = [1.5, 0.5, 0.5];
    assert!(gen_procedural_scene::<f64>(&spec, 0).is_err());
}
