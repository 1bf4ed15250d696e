//! Synthetic scenes with analytic depth: a (tilted) plane or a sphere seen
//! by a rig of pinhole cameras. Used as the test substrate for everything
//! geometric and by the `synth` CLI command.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pixel_center, Camera, CameraIntrinsics, DepthMap};
use crate::par;
use crate::pipeline::{DepthSource, ViewRecord};
use crate::splat::{Splat, SplatSet};
use crate::warp::{FeatureMap, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Surface {
    /// Plane through `(0, 0, z)` with normal `(sin t, 0, -cos t)`, i.e.
    /// rotated by `tilt_deg` about the world y axis.
    Plane {
        z: f64,
        #[serde(default)]
        tilt_deg: f64,
        /// Half side length of the square patch sampled into splats.
        #[serde(default = "default_half_extent")]
        half_extent: f64,
    },
    Sphere { center: [f64; 3], radius: f64 },
}

fn default_half_extent() -> f64 {
    4.0
}

impl Surface {
    pub fn plane(z: f64, tilt_deg: f64) -> Self {
        Surface::Plane {
            z,
            tilt_deg,
            half_extent: default_half_extent(),
        }
    }

    fn plane_frame(z: f64, tilt_deg: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (s, c) = tilt_deg.to_radians().sin_cos();
        let origin = Vector3::new(0.0, 0.0, z);
        let normal = Vector3::new(s, 0.0, -c);
        let e1 = Vector3::new(c, 0.0, s);
        let e2 = Vector3::new(0.0, 1.0, 0.0);
        (origin, normal, e1, e2)
    }

    /// Nearest positive ray parameter along `origin + t·dir`.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Surface::Plane { z, tilt_deg, .. } => {
                let (p0, n, _, _) = Self::plane_frame(z, tilt_deg);
                let denom = n.dot(dir);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = n.dot(&(p0 - origin)) / denom;
                (t > 0.0).then_some(t)
            }
            Surface::Sphere { center, radius } => {
                let oc = origin - Vector3::from(center);
                let a = dir.dot(dir);
                let b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t0 = (-b - sq) / a;
                let t1 = (-b + sq) / a;
                if t0 > 0.0 {
                    Some(t0)
                } else if t1 > 0.0 {
                    Some(t1)
                } else {
                    None
                }
            }
        }
    }

    /// Analytic z-depth of a continuous pixel, or `None` when the ray misses.
    pub fn depth_at(&self, cam: &Camera, pix: (f64, f64)) -> Option<f64> {
        let k = &cam.intrinsics;
        // camera-frame direction with unit z, so the ray parameter is the z-depth
        let d_cam = Vector3::new((pix.0 - k.cx) / k.fx, (pix.1 - k.cy) / k.fy, 1.0);
        let dir = cam.extrinsics.rotation().transpose() * d_cam;
        self.intersect(&cam.extrinsics.center(), &dir)
    }

    /// Analytic depth map; pixels whose ray misses hold 0.
    pub fn depth_map(&self, cam: &Camera) -> DepthMap {
        let (w, h) = (cam.width(), cam.height());
        let data = par::flat_map_indexed(h, |y| {
            (0..w)
                .map(|x| self.depth_at(cam, pixel_center(x, y)).unwrap_or(0.0) as f32)
                .collect()
        });
        DepthMap::new(w, h, data).expect("analytic depth is finite and non-negative")
    }

    /// Surface samples with analytic normals and disk scales equal to the
    /// sample spacing.
    pub fn sample_splats(&self, spacing: f64) -> Result<SplatSet> {
        if spacing.is_nan() || spacing <= 0.0 {
            return Err(Error::config("splat spacing must be positive"));
        }
        let scale = Vector2::new(spacing, spacing);
        let mut splats = Vec::new();
        match *self {
            Surface::Plane {
                z,
                tilt_deg,
                half_extent,
            } => {
                let (p0, n, e1, e2) = Self::plane_frame(z, tilt_deg);
                let steps = (half_extent / spacing).floor() as i64;
                for j in -steps..=steps {
                    for i in -steps..=steps {
                        let p = p0 + e1 * (i as f64 * spacing) + e2 * (j as f64 * spacing);
                        splats.push(Splat::new(p, n, scale, 1.0)?);
                    }
                }
            }
            Surface::Sphere { center, radius } => {
                let c = Vector3::from(center);
                let count = ((4.0 * PI * radius * radius) / (spacing * spacing)).ceil().max(1.0) as usize;
                let golden = PI * (3.0 - 5f64.sqrt());
                for i in 0..count {
                    let y = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - y * y).sqrt();
                    let phi = golden * i as f64;
                    let n = Vector3::new(r * phi.cos(), y, r * phi.sin());
                    splats.push(Splat::new(c + n * radius, n, scale, 1.0)?);
                }
            }
        }
        SplatSet::new(splats)
    }

    /// Procedural colour at a surface point: a soft checkerboard on a
    /// colour gradient, values in `[0, 1]`.
    pub fn texture(&self, p: &Vector3<f64>) -> [f32; 3] {
        let (a, b) = match *self {
            Surface::Plane { z, tilt_deg, .. } => {
                let (p0, _, e1, e2) = Self::plane_frame(z, tilt_deg);
                let q = p - p0;
                (q.dot(&e1), q.dot(&e2))
            }
            Surface::Sphere { center, radius } => {
                let q = (p - Vector3::from(center)) / radius;
                (q.x.atan2(q.z) * radius, q.y.clamp(-1.0, 1.0).asin() * radius)
            }
        };
        let period = 0.5;
        let check = ((a / period * PI).sin() * (b / period * PI).sin()).tanh() * 0.5 + 0.5;
        let g = |v: f64| (0.5 + 0.25 * v.tanh()) as f32;
        [
            (0.2 + 0.6 * check) as f32 * g(a),
            g(b),
            (0.8 - 0.6 * check) as f32,
        ]
    }

    /// Renders the procedural texture; misses are black.
    pub fn render_texture(&self, cam: &Camera) -> Result<Image> {
        let (w, h) = (cam.width(), cam.height());
        let rows = par::flat_map_indexed(h, |y| {
            (0..w)
                .map(|x| match self.depth_at(cam, pixel_center(x, y)) {
                    Some(d) => {
                        let k = &cam.intrinsics;
                        let (px, py) = pixel_center(x, y);
                        let d_cam = Vector3::new((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0) * d;
                        self.texture(&cam.extrinsics.camera_to_world(&d_cam))
                    }
                    None => [0.0; 3],
                })
                .collect()
        });
        FeatureMap::from_fn(3, h, w, |c, y, x| rows[y * w + x][c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Rig {
    /// `count` cameras on a horizontal arc around `target`, yaw spread
    /// evenly over `[-half_angle_deg, +half_angle_deg]`, all looking at
    /// `target`. Yaw 0 sits at `target - (0, 0, radius)`.
    Arc {
        count: usize,
        half_angle_deg: f64,
        radius: f64,
        target: [f64; 3],
        width: usize,
        height: usize,
        fov_deg: f64,
    },
    /// Explicit cameras, each a path to a camera JSON file.
    Files { cameras: Vec<PathBuf> },
}

impl Rig {
    pub fn cameras(&self, base: Option<&Path>) -> Result<Vec<Camera>> {
        match self {
            Rig::Arc {
                count,
                half_angle_deg,
                radius,
                target,
                width,
                height,
                fov_deg,
            } => {
                if *count == 0 {
                    return Err(Error::config("arc rig needs at least one camera"));
                }
                if !(*fov_deg > 0.0 && *fov_deg < 180.0) {
                    return Err(Error::config("fov_deg must lie in (0, 180)"));
                }
                let f = *width as f64 / 2.0 / (fov_deg.to_radians() / 2.0).tan();
                let k = CameraIntrinsics::new(f, f, *width as f64 / 2.0, *height as f64 / 2.0, *width, *height)?;
                let target = Vector3::from(*target);
                (0..*count)
                    .map(|i| {
                        let yaw = if *count == 1 {
                            0.0
                        } else {
                            -half_angle_deg + 2.0 * half_angle_deg * i as f64 / (*count - 1) as f64
                        };
                        let (s, c) = yaw.to_radians().sin_cos();
                        let eye = target + Vector3::new(-s, 0.0, -c) * *radius;
                        Camera::look_at(k, eye, target)
                    })
                    .collect()
            }
            Rig::Files { cameras } => cameras
                .iter()
                .map(|p| match base {
                    Some(b) if p.is_relative() => Camera::load(b.join(p)),
                    _ => Camera::load(p),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub surface: Surface,
    pub rig: Rig,
    pub splat_spacing: f64,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plane `z = depth` seen by `count` cameras over a ±`half_angle_deg` arc.
    pub fn plane_arc(depth: f64, count: usize, half_angle_deg: f64, size: usize) -> Self {
        Self {
            surface: Surface::plane(depth, 0.0),
            rig: Rig::Arc {
                count,
                half_angle_deg,
                radius: depth,
                target: [0.0, 0.0, depth],
                width: size,
                height: size,
                fov_deg: 50.0,
            },
            splat_spacing: 0.02,
        }
    }
}

/// A realised scene: cameras plus their analytic depth maps.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub surface: Surface,
    pub cameras: Vec<Camera>,
    pub depths: Vec<DepthMap>,
    pub splat_spacing: f64,
}

impl SyntheticScene {
    pub fn build(spec: &SceneSpec, base: Option<&Path>) -> Result<Self> {
        let cameras = spec.rig.cameras(base)?;
        let depths: Vec<DepthMap> = cameras.iter().map(|c| spec.surface.depth_map(c)).collect();
        for (i, d) in depths.iter().enumerate() {
            if !d.data().iter().any(|&z| z > 0.0) {
                return Err(Error::config(format!("camera {i} does not see the surface")));
            }
        }
        Ok(Self {
            surface: spec.surface,
            cameras,
            depths,
            splat_spacing: spec.splat_spacing,
        })
    }

    pub fn splats(&self) -> Result<SplatSet> {
        self.surface.sample_splats(self.splat_spacing)
    }

    /// One record per camera with the procedural texture as its image.
    /// Depth comes from the analytic maps or is left to the splat renderer.
    pub fn view_records(&self, analytic_depth: bool) -> Result<Vec<ViewRecord>> {
        self.cameras
            .iter()
            .zip(&self.depths)
            .enumerate()
            .map(|(i, (cam, depth))| {
                let source = if analytic_depth {
                    DepthSource::Precomputed(depth.clone())
                } else {
                    DepthSource::Splats
                };
                ViewRecord::new(Self::view_id(i), *cam, self.surface.render_texture(cam)?, source)
            })
            .collect()
    }

    pub fn view_id(i: usize) -> String {
        format!("view_{i:03}")
    }

    /// Writes `camera_XXX.json`, `depth_XXX.fwt`, `image_XXX.fwt` per
    /// camera, `splats.fwt`, and a `views.json` index.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out)?;
        let mut written = Vec::new();
        let mut index = Vec::new();
        for (i, (cam, depth)) in self.cameras.iter().zip(&self.depths).enumerate() {
            let cam_file = format!("camera_{i:03}.json");
            let depth_file = format!("depth_{i:03}.fwt");
            let image_file = format!("image_{i:03}.fwt");
            cam.save(out.join(&cam_file))?;
            depth.save(out.join(&depth_file))?;
            self.surface.render_texture(cam)?.save(out.join(&image_file))?;
            index.push(serde_json::json!({
                "id": Self::view_id(i),
                "camera": cam_file,
                "depth": depth_file,
                "image": image_file,
            }));
            written.extend([cam_file, depth_file, image_file].map(|f| out.join(f)));
        }
        self.splats()?.save(out.join("splats.fwt"))?;
        written.push(out.join("splats.fwt"));
        std::fs::write(
            out.join("views.json"),
            serde_json::to_string_pretty(&serde_json::json!({ "views": index }))?,
        )?;
        written.push(out.join("views.json"));
        Ok(written)
    }
}
