#![allow(dead_code)]

use attnwarp::{Camera, CameraExtrinsics, CameraIntrinsics, DepthMap, FeatureMap};
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn intrinsics(w: usize, h: usize, f: f64) -> CameraIntrinsics {
    CameraIntrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
}

pub fn camera_at(k: CameraIntrinsics, rotation: Matrix3<f64>, center: Vector3<f64>) -> Camera {
    // world→camera: p_cam = R (p - c)
    Camera::new(k, CameraExtrinsics::from_rotation_translation(rotation, -(rotation * center)).unwrap())
}

pub fn rot_y(deg: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::y_axis(), deg.to_radians()).matrix()
}

pub fn random_rotation(r: &mut StdRng, max_deg: f64) -> Matrix3<f64> {
    let axis = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let axis = nalgebra::Unit::new_normalize(axis + Vector3::new(0.0, 0.0, 1e-3));
    *Rotation3::from_axis_angle(&axis, r.random_range(-max_deg..max_deg).to_radians()).matrix()
}

/// Random camera pair with shared-ish intrinsics and a random relative pose.
pub fn random_pair(r: &mut StdRng, w: usize, h: usize) -> (Camera, Camera) {
    let f = r.random_range(0.6..1.4) * w as f64;
    let ks = CameraIntrinsics::new(
        f,
        f * r.random_range(0.9..1.1),
        w as f64 * r.random_range(0.4..0.6),
        h as f64 * r.random_range(0.4..0.6),
        w,
        h,
    )
    .unwrap();
    let kt = intrinsics(w, h, r.random_range(0.6..1.4) * w as f64);
    let src = camera_at(ks, random_rotation(r, 15.0), Vector3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), 0.0));
    let tgt = camera_at(kt, random_rotation(r, 15.0), Vector3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), r.random_range(-0.3..0.3)));
    (src, tgt)
}

/// Depth in [1, 5] with some zero (hole) pixels.
pub fn random_depth(r: &mut StdRng, w: usize, h: usize) -> DepthMap {
    let data = (0..w * h)
        .map(|_| if r.random_bool(0.05) { 0.0 } else { r.random_range(1.0f32..5.0) })
        .collect();
    DepthMap::new(w, h, data).unwrap()
}

pub fn random_features(r: &mut StdRng, c: usize, h: usize, w: usize) -> FeatureMap {
    let data = (0..c * h * w).map(|_| r.random_range(-1.0f32..1.0)).collect();
    FeatureMap::new(c, h, w, data).unwrap()
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).abs()).fold(0.0, f64::max)
}

/// Straightforward per-pixel reprojection, target pixel → source (u, v, z).
pub fn reproject(tgt: &Camera, src: &Camera, x: usize, y: usize, d: f64) -> (f64, f64, f64) {
    let k = tgt.intrinsics;
    let pc = Vector3::new((x as f64 + 0.5 - k.cx) * d / k.fx, (y as f64 + 0.5 - k.cy) * d / k.fy, d);
    let world = tgt.extrinsics.rotation().transpose() * (pc - tgt.extrinsics.translation());
    let ps = src.extrinsics.rotation() * world + src.extrinsics.translation();
    let ks = src.intrinsics;
    (ks.fx * ps.x / ps.z + ks.cx, ks.fy * ps.y / ps.z + ks.cy, ps.z)
}

/// Scalar bilinear reference under the texel-centre convention: a sample at
/// continuous `(u, v)` reads texels `(u - 0.5, v - 0.5)` and needs its whole
/// non-zero-weight footprint inside the image.
pub fn bilinear_reference(plane: &[f32], w: usize, h: usize, u: f64, v: f64) -> Option<f64> {
    let axis = |c: f64| -> (i64, f64) {
        let t = c - 0.5;
        let b = t.floor();
        let f = t - b;
        if f < 1e-6 {
            (b as i64, 0.0)
        } else if f > 1.0 - 1e-6 {
            (b as i64 + 1, 0.0)
        } else {
            (b as i64, f)
        }
    };
    let (x0, fx) = axis(u);
    let (y0, fy) = axis(v);
    let mut acc = 0.0;
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            let wgt = wx * wy;
            if wgt == 0.0 {
                continue;
            }
            let (xx, yy) = (x0 + dx, y0 + dy);
            if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                return None;
            }
            acc += wgt * plane[yy as usize * w + xx as usize] as f64;
        }
    }
    Some(acc)
}
