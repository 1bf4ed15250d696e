//! Pinhole cameras and the target→source warp field.
//!
//! Conventions used throughout the crate:
//!
//! * Extrinsics are world→camera, row-major, right-handed; the camera looks
//!   down +z with +x right and +y down.
//! * Integer pixel `(i, j)` is centred at the continuous coordinate
//!   `(i + 0.5, j + 0.5)`. Principal points and warp coordinates are
//!   continuous coordinates.
//! * A depth of `0` means "no geometry" and never produces a valid warp.

use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::blend::Mask;
use crate::error::{Error, Result};
use crate::par;
use crate::tensor_io::{self, Tensor};

const RIGID_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("image size must be at least 1×1"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::config(format!(
                "cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::config(format!(
                "cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// Intrinsics of the same camera observed at a different raster size.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            self.cx * sx,
            self.cy * sy,
            width,
            height,
        )
    }

    pub fn mean_focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }
}

/// A world→camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    matrix: Matrix4<f64>,
}

impl CameraExtrinsics {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix4::identity(),
        }
    }

    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("extrinsics"));
        }
        let last = matrix.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::config("extrinsics last row must be (0, 0, 0, 1)"));
        }
        let r: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let gram = r.transpose() * r;
        if (gram - Matrix3::identity()).amax() > RIGID_TOL {
            return Err(Error::config("extrinsics rotation block is not orthonormal"));
        }
        if (r.determinant() - 1.0).abs() > RIGID_TOL {
            return Err(Error::config("extrinsics rotation block has det != +1"));
        }
        Ok(Self { matrix })
    }

    pub fn from_rotation_translation(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self::from_matrix(m)
    }

    /// Row-major 4×4 matrix.
    pub fn from_row_major(values: &[f64; 16]) -> Result<Self> {
        Self::from_matrix(Matrix4::from_row_slice(values))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.matrix[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.matrix.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Camera centre in world coordinates, `-Rᵀt`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.translation())
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    /// Applies the inverse rigid transform, `Rᵀ(p - t)`.
    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (p - self.translation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    world_to_camera: [f64; 16],
}

impl Camera {
    pub fn new(intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics) -> Self {
        Self {
            intrinsics,
            extrinsics,
        }
    }

    /// A camera at `eye` looking at `target`, with image +y aligned to world +y.
    pub fn look_at(intrinsics: CameraIntrinsics, eye: Vector3<f64>, target: Vector3<f64>) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::config("look_at eye and target coincide"))?;
        let down = Vector3::new(0.0, 1.0, 0.0);
        let right = down
            .cross(&forward)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::config("look_at direction parallel to the y axis"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Ok(Self::new(
            intrinsics,
            CameraExtrinsics::from_rotation_translation(rotation, translation)?,
        ))
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Same pose, intrinsics scaled to a new raster size.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self> {
        Ok(Self::new(self.intrinsics.rescaled(width, height)?, self.extrinsics))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CameraJson = serde_json::from_str(text)?;
        Ok(Self::new(
            CameraIntrinsics::new(raw.fx, raw.fy, raw.cx, raw.cy, raw.width, raw.height)?,
            CameraExtrinsics::from_row_major(&raw.world_to_camera)?,
        ))
    }

    pub fn to_json(&self) -> String {
        let raw = CameraJson {
            fx: self.intrinsics.fx,
            fy: self.intrinsics.fy,
            cx: self.intrinsics.cx,
            cy: self.intrinsics.cy,
            width: self.intrinsics.width,
            height: self.intrinsics.height,
            world_to_camera: self.extrinsics.to_row_major(),
        };
        serde_json::to_string_pretty(&raw).expect("camera serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(Error::at(path))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(Error::at(path))?;
        Ok(())
    }
}

/// Metric depth along camera +z, one value per pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("depth map must be at least 1×1"));
        }
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "depth data has {} values, expected {}×{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("depth map"));
        }
        if data.iter().any(|&d| d < 0.0) {
            return Err(Error::OutOfRange("depth map holds negative values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.height, self.width], self.data.clone()).expect("valid dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match *t.dims() {
            [h, w] | [1, h, w] => Self::new(w, h, t.data().to_vec()),
            _ => Err(Error::dims(format!(
                "depth tensor must be [H, W], got {:?}",
                t.dims()
            ))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(&tensor_io::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tensor_io::save(path, &self.to_tensor())
    }
}

/// Continuous pixel coordinate of the centre of integer pixel `(x, y)`.
#[inline]
pub fn pixel_center(x: usize, y: usize) -> (f64, f64) {
    (x as f64 + 0.5, y as f64 + 0.5)
}

/// Lifts a continuous pixel coordinate at metric depth into the camera frame.
pub fn unproject(pix: (f64, f64), depth: f64, intr: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if depth.is_nan() || depth <= 0.0 || !depth.is_finite() {
        return Err(Error::InvalidSample(format!(
            "unproject needs positive finite depth, got {depth}"
        )));
    }
    Ok(Vector3::new(
        (pix.0 - intr.cx) / intr.fx * depth,
        (pix.1 - intr.cy) / intr.fy * depth,
        depth,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl Projection {
    pub fn behind_camera(&self) -> bool {
        self.depth <= 0.0
    }
}

/// Pinhole projection; points with `z < 0` are returned and flagged via
/// [`Projection::behind_camera`].
pub fn project(point: &Vector3<f64>, intr: &CameraIntrinsics) -> Result<Projection> {
    if point.z == 0.0 {
        return Err(Error::ProjectionSingularity);
    }
    Ok(Projection {
        u: intr.fx * point.x / point.z + intr.cx,
        v: intr.fy * point.y / point.z + intr.cy,
        depth: point.z,
    })
}

pub fn camera_to_world(point: &Vector3<f64>, extr: &CameraExtrinsics) -> Vector3<f64> {
    extr.camera_to_world(point)
}

pub fn world_to_camera(point: &Vector3<f64>, extr: &CameraExtrinsics) -> Vector3<f64> {
    extr.world_to_camera(point)
}

/// Backward warp field: for each target pixel, the continuous source-image
/// coordinate it samples from.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) src_width: usize,
    pub(crate) src_height: usize,
    pub(crate) u: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) valid: Mask,
}

impl WarpField {
    /// Builds a field from raw parts. Validity is the caller's responsibility
    /// but must be binary and must only mark in-bounds coordinates.
    pub fn from_parts(
        width: usize,
        height: usize,
        src_width: usize,
        src_height: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        valid: Mask,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 || src_width == 0 || src_height == 0 {
            return Err(Error::config("warp field sizes must be positive"));
        }
        if u.len() != n || v.len() != n || valid.width() != width || valid.height() != height {
            return Err(Error::dims("warp field components disagree in size"));
        }
        if !valid.is_binary() {
            return Err(Error::OutOfRange("warp validity must be binary".into()));
        }
        for i in 0..n {
            if valid.data()[i] == 1.0
                && !(u[i] >= 0.0
                    && u[i] < src_width as f64
                    && v[i] >= 0.0
                    && v[i] < src_height as f64)
            {
                return Err(Error::OutOfRange(format!(
                    "pixel {i} marked valid with out-of-bounds coordinate ({}, {})",
                    u[i], v[i]
                )));
            }
        }
        Ok(Self {
            width,
            height,
            src_width,
            src_height,
            u,
            v,
            valid,
        })
    }

    /// The field that maps every pixel to its own centre.
    pub fn identity(width: usize, height: usize) -> Result<Self> {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (px, py) = pixel_center(x, y);
                u.push(px);
                v.push(py);
            }
        }
        Self::from_parts(width, height, width, height, u, v, Mask::ones(width, height)?)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn src_width(&self) -> usize {
        self.src_width
    }

    pub fn src_height(&self) -> usize {
        self.src_height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn valid(&self) -> &Mask {
        &self.valid
    }

    /// `[3, H, W]` tensor of `(u, v, valid)` planes.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(3 * self.u.len());
        data.extend(self.u.iter().map(|&x| x as f32));
        data.extend(self.v.iter().map(|&x| x as f32));
        data.extend_from_slice(self.valid.data());
        Tensor::new(vec![3, self.height, self.width], data).expect("valid dims")
    }
}

/// Computes, for every target pixel with positive depth, where it lands in
/// the source image: unproject with the target intrinsics, move through
/// world space into the source camera, project with the source intrinsics.
pub fn compute_warp_field(tgt_depth: &DepthMap, tgt_cam: &Camera, src_cam: &Camera) -> Result<WarpField> {
    let (w, h) = (tgt_cam.width(), tgt_cam.height());
    if tgt_depth.width() != w || tgt_depth.height() != h {
        return Err(Error::config(format!(
            "depth map is {}×{} but target camera is {}×{}",
            tgt_depth.width(),
            tgt_depth.height(),
            w,
            h
        )));
    }
    let (src_w, src_h) = (src_cam.width() as f64, src_cam.height() as f64);
    // target camera frame → world → source camera frame, folded into one
    // rigid transform: p_src = R_s R_tᵀ (p_tgt - t_t) + t_s
    let rot = src_cam.extrinsics.rotation() * tgt_cam.extrinsics.rotation().transpose();
    let trans = src_cam.extrinsics.translation() - rot * tgt_cam.extrinsics.translation();
    let ki = tgt_cam.intrinsics;
    let ks = src_cam.intrinsics;

    let rows = par::flat_map_indexed(h, |y| {
        let mut row = Vec::with_capacity(w);
        for x in 0..w {
            let d = tgt_depth.get(x, y) as f64;
            if d <= 0.0 {
                row.push((0.0, 0.0, 0.0f32));
                continue;
            }
            let pix = pixel_center(x, y);
            let p_tgt = Vector3::new((pix.0 - ki.cx) / ki.fx * d, (pix.1 - ki.cy) / ki.fy * d, d);
            let p_src = rot * p_tgt + trans;
            if p_src.z.is_nan() || p_src.z <= 0.0 {
                row.push((0.0, 0.0, 0.0));
                continue;
            }
            let u = ks.fx * p_src.x / p_src.z + ks.cx;
            let v = ks.fy * p_src.y / p_src.z + ks.cy;
            let ok = u >= 0.0 && u < src_w && v >= 0.0 && v < src_h;
            row.push((u, v, if ok { 1.0 } else { 0.0 }));
        }
        row
    });

    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for (a, b, m) in rows {
        u.push(a);
        v.push(b);
        valid.push(m);
    }
    Ok(WarpField {
        width: w,
        height: h,
        src_width: src_cam.width(),
        src_height: src_cam.height(),
        u,
        v,
        valid: Mask::new(w, h, valid)?,
    })
}
