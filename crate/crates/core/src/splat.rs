//! Surfel ("splat") primitives, normal-angle filtering between two views and
//! a hard-disk z-buffer depth renderer.

use std::path::Path;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Camera, DepthMap};
use crate::tensor_io::{self, Tensor};

/// Columns of the on-disk splat table.
pub const SPLAT_COLUMNS: usize = 9;

/// Splats fainter than this never reach the depth buffer.
pub const MIN_RENDER_OPACITY: f64 = 0.05;

const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub scale: Vector2<f64>,
    pub opacity: f64,
}

impl Splat {
    pub fn new(position: Vector3<f64>, normal: Vector3<f64>, scale: Vector2<f64>, opacity: f64) -> Result<Self> {
        let s = Self {
            position,
            normal,
            scale,
            opacity,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.position.iter().chain(self.normal.iter()).chain(self.scale.iter()).any(|v| !v.is_finite())
            || !self.opacity.is_finite()
        {
            return Err(Error::NonFinite("splat"));
        }
        if (self.normal.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::OutOfRange(format!("splat normal has norm {}", self.normal.norm())));
        }
        if self.scale.x <= 0.0 || self.scale.y <= 0.0 {
            return Err(Error::OutOfRange("splat scales must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::OutOfRange(format!("splat opacity {} outside [0, 1]", self.opacity)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatSet {
    splats: Vec<Splat>,
}

impl SplatSet {
    pub fn new(splats: Vec<Splat>) -> Result<Self> {
        for s in &splats {
            s.validate()?;
        }
        Ok(Self { splats })
    }

    pub fn splats(&self) -> &[Splat] {
        &self.splats
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            splats: indices.iter().map(|&i| self.splats[i]).collect(),
        }
    }

    /// `N×9` table: `px py pz nx ny nz sx sy opacity`.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let mut data = Vec::with_capacity(self.splats.len() * SPLAT_COLUMNS);
        for s in &self.splats {
            data.extend(
                [
                    s.position.x,
                    s.position.y,
                    s.position.z,
                    s.normal.x,
                    s.normal.y,
                    s.normal.z,
                    s.scale.x,
                    s.scale.y,
                    s.opacity,
                ]
                .map(|v| v as f32),
            );
        }
        Tensor::new(vec![self.splats.len(), SPLAT_COLUMNS], data)
    }

    /// Parses an `N×9` table. Normals are renormalised after the f32 round
    /// trip; anything farther than 1e-3 from unit length is rejected.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let n = match *t.dims() {
            [n, SPLAT_COLUMNS] => n,
            _ => {
                return Err(Error::dims(format!(
                    "splat table must be [N, {SPLAT_COLUMNS}], got {:?}",
                    t.dims()
                )))
            }
        };
        let mut splats = Vec::with_capacity(n);
        for row in t.data().chunks_exact(SPLAT_COLUMNS) {
            let r: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            let normal = Vector3::new(r[3], r[4], r[5]);
            let norm = normal.norm();
            if (norm - 1.0).abs() > 1e-3 {
                return Err(Error::OutOfRange(format!("splat normal has norm {norm}")));
            }
            splats.push(Splat::new(
                Vector3::new(r[0], r[1], r[2]),
                normal / norm,
                Vector2::new(r[6], r[7]),
                r[8],
            )?);
        }
        Ok(Self { splats })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(&tensor_io::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tensor_io::save(path, &self.to_tensor()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterConfig {
    /// Maximum angle between the two view-facing normals, in degrees.
    pub theta_max_deg: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { theta_max_deg: 60.0 }
    }
}

impl FilterConfig {
    pub fn new(theta_max_deg: f64) -> Result<Self> {
        let cfg = Self { theta_max_deg };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_max_deg > 0.0 && self.theta_max_deg <= 180.0) {
            return Err(Error::OutOfRange(format!(
                "theta_max={} outside (0, 180]",
                self.theta_max_deg
            )));
        }
        Ok(())
    }

    /// Smallest dot product between view normals that is still kept.
    pub fn min_dot(&self) -> f64 {
        cos_deg(self.theta_max_deg)
    }
}

/// Cosine of an angle in degrees, exact at multiples of 60° and 90°.
pub fn cos_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    let exact = [
        (0.0, 1.0),
        (60.0, 0.5),
        (90.0, 0.0),
        (120.0, -0.5),
        (180.0, -1.0),
        (240.0, -0.5),
        (270.0, 0.0),
        (300.0, 0.5),
    ];
    for (a, c) in exact {
        if r == a {
            return c;
        }
    }
    r.to_radians().cos()
}

/// The splat normal rotated into the camera frame, negated if it points
/// away from the camera.
pub fn view_normal(splat: &Splat, cam: &Camera) -> Vector3<f64> {
    let n = cam.extrinsics.rotation() * splat.normal;
    let p = cam.extrinsics.world_to_camera(&splat.position);
    if n.dot(&p) > 0.0 {
        -n
    } else {
        n
    }
}

/// Indices of splats whose view-facing normals in the two cameras differ by
/// at most `theta_max`.
pub fn filter_indices(set: &SplatSet, src_cam: &Camera, tgt_cam: &Camera, cfg: &FilterConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let min_dot = cfg.min_dot();
    Ok(set
        .splats
        .iter()
        .enumerate()
        .filter(|(_, s)| view_normal(s, src_cam).dot(&view_normal(s, tgt_cam)) >= min_dot)
        .map(|(i, _)| i)
        .collect())
}

pub fn filter_splats(set: &SplatSet, src_cam: &Camera, tgt_cam: &Camera, cfg: &FilterConfig) -> Result<SplatSet> {
    Ok(set.subset(&filter_indices(set, src_cam, tgt_cam, cfg)?))
}

/// Hard-disk z-buffer: each splat covers the pixels whose centres lie within
/// `f_mean · max(scale) / depth` pixels of its projected centre and writes
/// its centre depth wherever it is nearer than the current value.
/// Uncovered pixels stay 0. Splats behind the camera are skipped.
pub fn render_depth(set: &SplatSet, cam: &Camera) -> DepthMap {
    let k = &cam.intrinsics;
    let (w, h) = (k.width, k.height);
    let f_mean = k.mean_focal();
    let mut depth = DepthMap::zeros(w, h);
    let buf = depth.data_mut();
    for s in &set.splats {
        if s.opacity < MIN_RENDER_OPACITY {
            continue;
        }
        let p = cam.extrinsics.world_to_camera(&s.position);
        if p.z.is_nan() || p.z <= 0.0 {
            continue;
        }
        let u = k.fx * p.x / p.z + k.cx;
        let v = k.fy * p.y / p.z + k.cy;
        let r = f_mean * s.scale.x.max(s.scale.y) / p.z;
        let r2 = r * r;
        // pixel x covers centre x + 0.5
        let x_lo = (u - r - 0.5).ceil().max(0.0);
        let x_hi = (u + r - 0.5).floor().min(w as f64 - 1.0);
        let y_lo = (v - r - 0.5).ceil().max(0.0);
        let y_hi = (v + r - 0.5).floor().min(h as f64 - 1.0);
        if x_lo > x_hi || y_lo > y_hi {
            continue;
        }
        let z = p.z as f32;
        for y in y_lo as usize..=y_hi as usize {
            let dy = y as f64 + 0.5 - v;
            for x in x_lo as usize..=x_hi as usize {
                let dx = x as f64 + 0.5 - u;
                if dx * dx + dy * dy <= r2 {
                    let cell = &mut buf[y * w + x];
                    if *cell == 0.0 || z < *cell {
                        *cell = z;
                    }
                }
            }
        }
    }
    depth
}
