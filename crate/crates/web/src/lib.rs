//! Browser demo for `attnwarp`.
//!
//! [`Demo`] holds a textured sphere seen by a fixed source camera and
//! renders three views for a target camera orbiting it: the warped source
//! texture with its validity mask, the normal-filtered splat depth, and the
//! masked blend of a warped edit into the target's own render. The
//! `wasm` wrapper [`WebDemo`] hands those to JavaScript as RGBA bytes.

use attnwarp::editors::StampEditor;
use attnwarp::synth::Surface;
use attnwarp::{
    alpha_at, blend_masked, compute_warp_field, filter_splats, render_depth, warp_feature_map, BlendSchedule, Camera,
    CameraIntrinsics, DepthMap, FeatureMap, FilterConfig, Image, Mask, Result, Sampling, SplatSet,
};
use nalgebra::Vector3;
use wasm_bindgen::prelude::*;

const CENTER: [f64; 3] = [0.0, 0.0, 4.0];
const RADIUS: f64 = 1.0;
const ORBIT: f64 = 4.0;
const FOV_DEG: f64 = 40.0;
const SPLAT_SPACING: f64 = 0.03;

/// Scene state shared by all three views.
#[derive(Debug, Clone)]
pub struct Demo {
    size: usize,
    surface: Surface,
    source: Camera,
    source_image: Image,
    edited_source: Image,
    splats: SplatSet,
}

/// Warped source texture and where it is defined.
#[derive(Debug, Clone)]
pub struct WarpView {
    pub warped: Image,
    pub mask: Mask,
}

/// Depth of the splats that survive the normal filter.
#[derive(Debug, Clone)]
pub struct FilterView {
    pub depth: DepthMap,
    pub kept: usize,
    pub total: usize,
}

impl Demo {
    /// Square views of `size` pixels; the source camera sits at yaw 0.
    pub fn new(size: usize) -> Result<Self> {
        let surface = Surface::Sphere { center: CENTER, radius: RADIUS };
        let source = orbit_camera(size, 0.0)?;
        let source_image = surface.render_texture(&source)?;
        let c = size as f64 / 2.0;
        let stamp = StampEditor::new([c * 0.8, c * 0.9], size as f64 * 0.18);
        let ind = stamp.indicator(size, size, size, size)?;
        let edited_source = FeatureMap::from_fn(3, size, size, |ch, y, x| {
            let a = ind.get(0, y, x);
            let base = source_image.get(ch, y, x);
            base + a * (stamp.color[ch] - base)
        })?;
        let splats = surface.sample_splats(SPLAT_SPACING)?;
        Ok(Self {
            size,
            surface,
            source,
            source_image,
            edited_source,
            splats,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn source_image(&self) -> &Image {
        &self.source_image
    }

    /// The source view with the demo edit painted in.
    pub fn edited_source(&self) -> &Image {
        &self.edited_source
    }

    pub fn splat_count(&self) -> usize {
        self.splats.len()
    }

    /// Camera on the orbit at `yaw_deg`, looking at the sphere centre.
    pub fn target(&self, yaw_deg: f64) -> Result<Camera> {
        orbit_camera(self.size, yaw_deg)
    }

    fn field(&self, yaw_deg: f64) -> Result<(Camera, attnwarp::WarpField)> {
        let tgt = self.target(yaw_deg)?;
        let depth = self.surface.depth_map(&tgt);
        let field = compute_warp_field(&depth, &tgt, &self.source)?;
        Ok((tgt, field))
    }

    pub fn warp_view(&self, yaw_deg: f64, sampling: Sampling) -> Result<WarpView> {
        let (_, field) = self.field(yaw_deg)?;
        let (warped, mask) = warp_feature_map(&self.source_image, &field, sampling)?;
        Ok(WarpView { warped, mask })
    }

    pub fn filter_view(&self, yaw_deg: f64, theta_max_deg: f64) -> Result<FilterView> {
        let tgt = self.target(yaw_deg)?;
        let kept = filter_splats(&self.splats, &self.source, &tgt, &FilterConfig::new(theta_max_deg)?)?;
        Ok(FilterView {
            depth: render_depth(&kept, &tgt),
            kept: kept.len(),
            total: self.splats.len(),
        })
    }

    /// The edited source warped into the target and blended into the
    /// target's own render with the weight of denoising step `step`.
    pub fn blend_view(&self, yaw_deg: f64, step: u32, total_steps: u32, alpha0: f64) -> Result<(Image, f64)> {
        let (tgt, field) = self.field(yaw_deg)?;
        let fresh = self.surface.render_texture(&tgt)?;
        let (warped, mask) = warp_feature_map(&self.edited_source, &field, Sampling::Bilinear)?;
        let alpha = alpha_at(&BlendSchedule::new(alpha0, total_steps)?, step)?;
        Ok((blend_masked(&warped, &fresh, &mask, alpha)?, alpha))
    }
}

fn orbit_camera(size: usize, yaw_deg: f64) -> Result<Camera> {
    let f = size as f64 / 2.0 / (FOV_DEG.to_radians() / 2.0).tan();
    let c = size as f64 / 2.0;
    let k = CameraIntrinsics::new(f, f, c, c, size, size)?;
    let (s, co) = yaw_deg.to_radians().sin_cos();
    let target = Vector3::from(CENTER);
    Camera::look_at(k, target + Vector3::new(-s, 0.0, -co) * ORBIT, target)
}

fn byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// RGBA bytes of a 3-channel image; pixels where `mask` is 0 are dimmed.
pub fn image_rgba(img: &Image, mask: Option<&Mask>) -> Vec<u8> {
    let (_, h, w) = img.shape();
    let mut out = Vec::with_capacity(4 * w * h);
    for y in 0..h {
        for x in 0..w {
            let keep = mask.is_none_or(|m| m.get(x, y) == 1.0);
            for ch in 0..3 {
                let v = img.get(ch.min(img.channels() - 1), y, x);
                out.push(if keep { byte(v) } else { byte(0.15 * v) });
            }
            out.push(255);
        }
    }
    out
}

/// Mask as an opaque overlay: valid white, invalid dark red.
pub fn mask_rgba(m: &Mask) -> Vec<u8> {
    m.data()
        .iter()
        .flat_map(|&v| if v == 1.0 { [255, 255, 255, 255] } else { [90, 10, 10, 255] })
        .collect()
}

/// Nearer is brighter; empty pixels are black.
pub fn depth_rgba(d: &DepthMap) -> Vec<u8> {
    let (lo, hi) = d
        .data()
        .iter()
        .filter(|&&v| v > 0.0)
        .fold((f32::INFINITY, 0.0f32), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-6);
    d.data()
        .iter()
        .flat_map(|&v| {
            if v > 0.0 {
                let g = byte(0.25 + 0.75 * (hi - v) / span);
                [g, g, g, 255]
            } else {
                [0, 0, 0, 255]
            }
        })
        .collect()
}

fn js(e: attnwarp::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// JavaScript handle; every method returns `size × size × 4` RGBA bytes.
#[wasm_bindgen]
pub struct WebDemo {
    demo: Demo,
    last: String,
}

#[wasm_bindgen]
impl WebDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize) -> Result<WebDemo, JsError> {
        Ok(WebDemo {
            demo: Demo::new(size).map_err(js)?,
            last: String::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.demo.size()
    }

    pub fn source(&self) -> Vec<u8> {
        image_rgba(self.demo.source_image(), None)
    }

    pub fn edited_source(&self) -> Vec<u8> {
        image_rgba(self.demo.edited_source(), None)
    }

    /// Warped source texture, invalid pixels dimmed.
    pub fn warp(&mut self, yaw_deg: f64, nearest: bool) -> Result<Vec<u8>, JsError> {
        let s = if nearest { Sampling::Nearest } else { Sampling::Bilinear };
        let v = self.demo.warp_view(yaw_deg, s).map_err(js)?;
        self.last = format!("valid {:.1}%", 100.0 * v.mask.coverage());
        Ok(image_rgba(&v.warped, Some(&v.mask)))
    }

    pub fn warp_mask(&mut self, yaw_deg: f64) -> Result<Vec<u8>, JsError> {
        let v = self.demo.warp_view(yaw_deg, Sampling::Bilinear).map_err(js)?;
        Ok(mask_rgba(&v.mask))
    }

    pub fn filter(&mut self, yaw_deg: f64, theta_max_deg: f64) -> Result<Vec<u8>, JsError> {
        let v = self.demo.filter_view(yaw_deg, theta_max_deg).map_err(js)?;
        self.last = format!("{} of {} splats kept", v.kept, v.total);
        Ok(depth_rgba(&v.depth))
    }

    pub fn blend(&mut self, yaw_deg: f64, step: u32, total_steps: u32, alpha0: f64) -> Result<Vec<u8>, JsError> {
        let (img, alpha) = self.demo.blend_view(yaw_deg, step, total_steps, alpha0).map_err(js)?;
        self.last = format!("alpha {alpha:.3}");
        Ok(image_rgba(&img, None))
    }

    /// One-line summary of the most recent view.
    pub fn status(&self) -> String {
        self.last.clone()
    }
}
