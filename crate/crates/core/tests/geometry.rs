mod common;

use attnwarp::geometry::{camera_to_world, world_to_camera};
use attnwarp::{compute_warp_field, project, unproject, Camera, CameraExtrinsics, DepthMap};
use common::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn project_unproject_round_trip_10k() {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = attnwarp::CameraIntrinsics::new(
            r.random_range(20.0..2000.0),
            r.random_range(20.0..2000.0),
            r.random_range(0.0..640.0),
            r.random_range(0.0..480.0),
            640,
            480,
        )
        .unwrap();
        let pix = (r.random_range(-100.0..740.0), r.random_range(-100.0..580.0));
        let d = r.random_range(1e-3..1e3);
        let p = project(&unproject(pix, d, &k).unwrap(), &k).unwrap();
        worst = worst.max((p.u - pix.0).abs()).max((p.v - pix.1).abs());
        assert!((p.depth - d).abs() <= 1e-9 * d);
    }
    assert!(worst <= 1e-9, "worst {worst}");
}

#[test]
fn rotation_about_z_matches_matrix() {
    // camera frame rotated 90° about z relative to the world
    let rz = nalgebra::Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let e = CameraExtrinsics::from_rotation_translation(rz, Vector3::zeros()).unwrap();
    let w = camera_to_world(&Vector3::new(1.0, 0.0, 0.0), &e);
    assert!((w - rz.transpose() * Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    assert!((w - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
}

proptest! {
    #[test]
    fn world_camera_round_trip(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, ang in -3.1f64..3.1,
        t in prop::array::uniform3(-10.0f64..10.0),
        p in prop::array::uniform3(-100.0f64..100.0),
    ) {
        let axis = nalgebra::Unit::new_normalize(Vector3::new(ax, ay, az));
        let r = *nalgebra::Rotation3::from_axis_angle(&axis, ang).matrix();
        let e = CameraExtrinsics::from_rotation_translation(r, Vector3::from(t)).unwrap();
        let p = Vector3::from(p);
        let back = camera_to_world(&world_to_camera(&p, &e), &e);
        prop_assert!((back - p).norm() <= 1e-9 * (1.0 + p.norm()));
    }

    #[test]
    fn camera_json_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, _) = random_pair(&mut r, 37, 23);
        let back = Camera::from_json(&a.to_json()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn depth_tensor_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_depth(&mut r, w, h);
        prop_assert_eq!(DepthMap::from_tensor(&d.to_tensor()).unwrap(), d);
    }
}

#[test]
fn fronto_plane_disparity_is_uniform() {
    for &(z, tx) in &[(2.0, 0.1), (5.0, -0.25), (1.5, 0.05)] {
        let k = intrinsics(64, 48, 70.0);
        let tgt = Camera::new(k, CameraExtrinsics::identity());
        // source camera centre moved by -tx along x: points shift by +fx·tx/z
        let src = camera_at(k, nalgebra::Matrix3::identity(), Vector3::new(-tx, 0.0, 0.0));
        let depth = DepthMap::from_fn(64, 48, |_, _| z as f32).unwrap();
        let field = compute_warp_field(&depth, &tgt, &src).unwrap();
        for y in 0..48 {
            for x in 0..64 {
                let i = y * 64 + x;
                let zf = z as f32 as f64;
                let expected = x as f64 + 0.5 + 70.0 * tx / zf;
                assert!((field.u()[i] - expected).abs() < 1e-6, "{z} {tx} {x}");
                assert!((field.v()[i] - (y as f64 + 0.5)).abs() < 1e-9);
                let inside = (0.0..64.0).contains(&expected);
                assert_eq!(field.valid().data()[i] == 1.0, inside);
            }
        }
    }
}

#[test]
fn warp_field_matches_per_pixel_reprojection() {
    let mut r = rng(5);
    for _ in 0..20 {
        let (src, tgt) = random_pair(&mut r, 40, 30);
        let depth = random_depth(&mut r, 40, 30);
        let field = compute_warp_field(&depth, &tgt, &src).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let i = y * 40 + x;
                let d = depth.get(x, y) as f64;
                if d <= 0.0 {
                    assert_eq!(field.valid().data()[i], 0.0);
                    continue;
                }
                let (u, v, zs) = reproject(&tgt, &src, x, y, d);
                if zs > 0.0 {
                    assert!((field.u()[i] - u).abs() < 1e-8);
                    assert!((field.v()[i] - v).abs() < 1e-8);
                }
            }
        }
    }
}
