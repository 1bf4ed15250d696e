mod common;

use attnwarp::splat::{filter_indices, view_normal};
use attnwarp::synth::Surface;
use attnwarp::{render_depth, Camera, CameraExtrinsics, DepthMap, FilterConfig, Splat, SplatSet};
use common::*;
use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;
use rand::Rng;

fn random_splats(r: &mut rand::rngs::StdRng, n: usize) -> SplatSet {
    let splats = (0..n)
        .map(|_| {
            let p = Vector3::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5), r.random_range(1.0..6.0));
            let nrm = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
                + Vector3::new(0.0, 0.0, 1e-3);
            let s = r.random_range(0.005..0.08);
            Splat::new(p, nrm.normalize(), Vector2::new(s, s * r.random_range(0.5..1.0)), r.random_range(0.0..1.0))
                .unwrap()
        })
        .collect();
    SplatSet::new(splats).unwrap()
}

fn brute_render(set: &SplatSet, cam: &Camera) -> DepthMap {
    let k = cam.intrinsics;
    let f = (k.fx + k.fy) / 2.0;
    DepthMap::from_fn(k.width, k.height, |x, y| {
        let mut best = 0.0f32;
        for s in set.splats() {
            if s.opacity < 0.05 {
                continue;
            }
            let p = cam.extrinsics.world_to_camera(&s.position);
            if p.z <= 0.0 {
                continue;
            }
            let (u, v) = (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy);
            let rad = f * s.scale.x.max(s.scale.y) / p.z;
            let (dx, dy) = (x as f64 + 0.5 - u, y as f64 + 0.5 - v);
            if dx * dx + dy * dy <= rad * rad && (best == 0.0 || (p.z as f32) < best) {
                best = p.z as f32;
            }
        }
        best
    })
    .unwrap()
}

#[test]
fn render_matches_brute_force_zbuffer() {
    let mut r = rng(61);
    for _ in 0..10 {
        let set = random_splats(&mut r, 150);
        let (cam, _) = random_pair(&mut r, 32, 24);
        assert_eq!(render_depth(&set, &cam), brute_render(&set, &cam));
    }
}

#[test]
fn filter_matches_scalar_loop() {
    let mut r = rng(62);
    for _ in 0..20 {
        let set = random_splats(&mut r, 200);
        let (a, b) = random_pair(&mut r, 16, 16);
        let theta = r.random_range(5.0..175.0);
        let cfg = FilterConfig::new(theta).unwrap();
        let expected: Vec<usize> = (0..set.len())
            .filter(|&i| {
                let s = &set.splats()[i];
                let facing = |cam: &Camera| {
                    let n = cam.extrinsics.rotation() * s.normal;
                    let p = cam.extrinsics.world_to_camera(&s.position);
                    if n.dot(&p) > 0.0 { -n } else { n }
                };
                facing(&a).dot(&facing(&b)) >= theta.to_radians().cos()
            })
            .collect();
        assert_eq!(filter_indices(&set, &a, &b, &cfg).unwrap(), expected);
    }
}

#[test]
fn dense_fronto_plane_renders_its_depth() {
    let z = 3.0;
    let cam = Camera::new(intrinsics(64, 64, 60.0), CameraExtrinsics::identity());
    let splats = Surface::Plane { z, tilt_deg: 0.0, half_extent: 2.0 }.sample_splats(0.02).unwrap();
    let d = render_depth(&splats, &cam);
    let covered: Vec<f32> = d.data().iter().copied().filter(|&v| v > 0.0).collect();
    assert!(covered.len() == 64 * 64);
    let good = covered.iter().filter(|&&v| (v as f64 - z).abs() <= 1e-3).count();
    assert!(good as f64 >= 0.99 * covered.len() as f64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filter_is_symmetric_in_the_cameras(seed in any::<u64>()) {
        let mut r = rng(seed);
        let set = random_splats(&mut r, 60);
        let (a, b) = random_pair(&mut r, 8, 8);
        let cfg = FilterConfig::default();
        prop_assert_eq!(filter_indices(&set, &a, &b, &cfg).unwrap(), filter_indices(&set, &b, &a, &cfg).unwrap());
    }

    #[test]
    fn wider_threshold_keeps_a_superset(seed in any::<u64>(), t1 in 1.0f64..179.0, t2 in 1.0f64..179.0) {
        let mut r = rng(seed);
        let set = random_splats(&mut r, 60);
        let (a, b) = random_pair(&mut r, 8, 8);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let narrow = filter_indices(&set, &a, &b, &FilterConfig::new(lo).unwrap()).unwrap();
        let wide = filter_indices(&set, &a, &b, &FilterConfig::new(hi).unwrap()).unwrap();
        prop_assert!(narrow.iter().all(|i| wide.contains(i)));
    }

    #[test]
    fn view_normals_stay_unit(seed in any::<u64>()) {
        let mut r = rng(seed);
        let set = random_splats(&mut r, 20);
        let (a, _) = random_pair(&mut r, 8, 8);
        for s in set.splats() {
            prop_assert!((view_normal(s, &a).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn render_ignores_splat_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let set = random_splats(&mut r, 40);
        let (cam, _) = random_pair(&mut r, 16, 12);
        let mut rev: Vec<Splat> = set.splats().to_vec();
        rev.reverse();
        prop_assert_eq!(render_depth(&set, &cam), render_depth(&SplatSet::new(rev).unwrap(), &cam));
    }

    #[test]
    fn splat_table_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let set = random_splats(&mut r, 12);
        let t = set.to_tensor().unwrap();
        let back = SplatSet::from_tensor(&t).unwrap().to_tensor().unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        for (a, b) in back.data().chunks(9).zip(t.data().chunks(9)) {
            // normals are renormalised on load, everything else is stored as is
            for col in [0, 1, 2, 6, 7, 8] {
                prop_assert_eq!(a[col], b[col]);
            }
            for col in 3..6 {
                prop_assert!((a[col] - b[col]).abs() <= 1e-6);
            }
        }
    }
}
