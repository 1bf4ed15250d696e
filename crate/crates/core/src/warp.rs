//! Applying warp fields to multi-channel attention feature maps.
//!
//! Sampling follows the pixel-centre convention of [`crate::geometry`]: a
//! continuous coordinate `u` addresses texel column `u - 0.5`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blend::Mask;
use crate::error::{Error, Result};
use crate::geometry::WarpField;
use crate::par;
use crate::tensor_io::{self, Tensor};

/// Offsets closer than this (in texels) to a texel centre sample that texel
/// alone, so float noise in an identity warp does not widen the footprint.
pub const SNAP_EPS: f64 = 1e-6;

/// `C×H×W` row-major feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// Images travel as 3-channel feature maps with values in `[0, 1]`.
pub type Image = FeatureMap;

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::config("feature map dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(Error::dims(format!(
                "feature data has {} values, expected {}×{}×{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    /// `(channels, height, width)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.channels, self.height, self.width], self.data.clone()).expect("valid dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match *t.dims() {
            [c, h, w] => Self::new(c, h, w, t.data().to_vec()),
            [h, w] => Self::new(1, h, w, t.data().to_vec()),
            _ => Err(Error::dims(format!(
                "feature tensor must be [C, H, W] or [H, W], got {:?}",
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Nearest,
    #[default]
    Bilinear,
}

/// Nearest source pixels along one axis for each destination index. A
/// destination centre that falls exactly between two source centres keeps
/// both (the tie is resolved by averaging, never by picking a side).
fn nearest_taps(src: usize, dst: usize) -> Vec<(usize, Option<usize>)> {
    let (src_i, dst_i) = (src as i64, dst as i64);
    let d = 2 * dst_i;
    (0..dst_i)
        .map(|i| {
            // source index space position of the destination centre, times d
            let q = (2 * i + 1) * src_i - dst_i;
            let floor = q.div_euclid(d);
            let rem = q.rem_euclid(d);
            let clamp = |k: i64| k.clamp(0, src_i - 1) as usize;
            if 2 * rem == d {
                let (a, b) = (clamp(floor), clamp(floor + 1));
                (a, if a == b { None } else { Some(b) })
            } else {
                (clamp(floor + i64::from(2 * rem > d)), None)
            }
        })
        .collect()
}

/// Resamples a warp field onto a `new_w × new_h` grid and rescales its
/// coordinates by `(new_w / W, new_h / H)`. Grid values come from the
/// nearest source pixel; exact ties average the tied pixels and are valid
/// only if every tied pixel is valid.
pub fn resample_warp_field(field: &WarpField, new_h: usize, new_w: usize) -> Result<WarpField> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::config("resample target size must be at least 1×1"));
    }
    if new_h == field.height && new_w == field.width {
        return Ok(field.clone());
    }
    let sx = new_w as f64 / field.width as f64;
    let sy = new_h as f64 / field.height as f64;
    let new_src_w = ((field.src_width as f64 * sx).round() as usize).max(1);
    let new_src_h = ((field.src_height as f64 * sy).round() as usize).max(1);
    let xs = nearest_taps(field.width, new_w);
    let ys = nearest_taps(field.height, new_h);

    let mut u = Vec::with_capacity(new_w * new_h);
    let mut v = Vec::with_capacity(new_w * new_h);
    let mut valid = Vec::with_capacity(new_w * new_h);
    for &(y0, y1) in &ys {
        for &(x0, x1) in &xs {
            let mut su = 0.0;
            let mut sv = 0.0;
            let mut n = 0.0;
            let mut all_valid = true;
            for yy in std::iter::once(y0).chain(y1) {
                for xx in std::iter::once(x0).chain(x1) {
                    let k = yy * field.width + xx;
                    su += field.u[k];
                    sv += field.v[k];
                    n += 1.0;
                    all_valid &= field.valid.data()[k] == 1.0;
                }
            }
            let (cu, cv) = (su / n * sx, sv / n * sy);
            let inside = cu >= 0.0 && cu < new_src_w as f64 && cv >= 0.0 && cv < new_src_h as f64;
            u.push(cu);
            v.push(cv);
            valid.push(if all_valid && inside { 1.0 } else { 0.0 });
        }
    }
    WarpField::from_parts(new_w, new_h, new_src_w, new_src_h, u, v, Mask::new(new_w, new_h, valid)?)
}

/// Texel footprint of a bilinear sample along one axis: base index, second
/// index weight (0 when the sample sits on a texel centre).
#[inline]
fn bilinear_axis(coord: f64) -> (i64, f64) {
    let t = coord - 0.5;
    let base = t.floor();
    let frac = t - base;
    if frac < SNAP_EPS {
        (base as i64, 0.0)
    } else if frac > 1.0 - SNAP_EPS {
        (base as i64 + 1, 0.0)
    } else {
        (base as i64, frac)
    }
}

#[inline]
fn nearest_axis(coord: f64) -> i64 {
    (coord - 0.5 + 0.5).floor() as i64
}

/// Per-pixel sample plan shared by every channel.
#[derive(Clone, Copy)]
enum Tap {
    Skip,
    Nearest(usize),
    Bilinear { base: usize, wx: f64, wy: f64 },
}

fn plan_taps(src_w: usize, src_h: usize, field: &WarpField, sampling: Sampling) -> Vec<Tap> {
    let (sw, sh) = (src_w as i64, src_h as i64);
    (0..field.width * field.height)
        .map(|i| {
            if field.valid.data()[i] != 1.0 {
                return Tap::Skip;
            }
            let (u, v) = (field.u[i], field.v[i]);
            match sampling {
                Sampling::Nearest => {
                    let (x, y) = (nearest_axis(u), nearest_axis(v));
                    if x < 0 || x >= sw || y < 0 || y >= sh {
                        Tap::Skip
                    } else {
                        Tap::Nearest(y as usize * src_w + x as usize)
                    }
                }
                Sampling::Bilinear => {
                    let (x0, wx) = bilinear_axis(u);
                    let (y0, wy) = bilinear_axis(v);
                    let x1 = if wx > 0.0 { x0 + 1 } else { x0 };
                    let y1 = if wy > 0.0 { y0 + 1 } else { y0 };
                    if x0 < 0 || y0 < 0 || x1 >= sw || y1 >= sh {
                        Tap::Skip
                    } else {
                        Tap::Bilinear {
                            base: y0 as usize * src_w + x0 as usize,
                            wx,
                            wy,
                        }
                    }
                }
            }
        })
        .collect()
}

#[inline]
fn apply_tap(plane: &[f32], src_w: usize, tap: Tap) -> f32 {
    match tap {
        Tap::Skip => 0.0,
        Tap::Nearest(k) => plane[k],
        Tap::Bilinear { base, wx, wy } => {
            let p00 = plane[base] as f64;
            let mut top = p00;
            if wx > 0.0 {
                top = (1.0 - wx) * p00 + wx * plane[base + 1] as f64;
            }
            if wy > 0.0 {
                let p10 = plane[base + src_w] as f64;
                let bottom = if wx > 0.0 {
                    (1.0 - wx) * p10 + wx * plane[base + src_w + 1] as f64
                } else {
                    p10
                };
                ((1.0 - wy) * top + wy * bottom) as f32
            } else {
                top as f32
            }
        }
    }
}

/// Samples every channel of `src` through `field`. Returns the warped map
/// (zero where invalid) and the mask of pixels that were actually sampled:
/// field-valid and with an in-bounds footprint for the chosen kernel.
pub fn warp_feature_map(src: &FeatureMap, field: &WarpField, sampling: Sampling) -> Result<(FeatureMap, Mask)> {
    if src.width != field.src_width || src.height != field.src_height {
        return Err(Error::dims(format!(
            "source map is {}×{} but the field addresses a {}×{} source",
            src.height, src.width, field.src_height, field.src_width
        )));
    }
    if !src.is_finite() {
        return Err(Error::NonFinite("source feature map"));
    }
    let taps = plan_taps(src.width, src.height, field, sampling);
    let out_plane = field.width * field.height;
    let data = par::flat_map_indexed(src.channels, |c| {
        let plane = src.channel(c);
        taps.iter().map(|&t| apply_tap(plane, src.width, t)).collect()
    });
    let mask: Vec<f32> = taps
        .iter()
        .map(|t| if matches!(t, Tap::Skip) { 0.0 } else { 1.0 })
        .collect();
    debug_assert_eq!(mask.len(), out_plane);
    Ok((
        FeatureMap::new(src.channels, field.height, field.width, data)?,
        Mask::new(field.width, field.height, mask)?,
    ))
}

/// Carries a source-view mask into the target view with nearest sampling.
/// Pixels the field cannot sample come out as 0.
pub fn warp_mask(mask: &Mask, field: &WarpField) -> Result<Mask> {
    let fm = FeatureMap::new(1, mask.height(), mask.width(), mask.data().to_vec())?;
    let (out, _) = warp_feature_map(&fm, field, Sampling::Nearest)?;
    Mask::new(field.width, field.height, out.data().to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub id: String,
    pub self_attn: FeatureMap,
    pub cross_attn: Option<FeatureMap>,
}

impl AttentionLayer {
    /// `(height, width)` of the layer's maps.
    pub fn resolution(&self) -> (usize, usize) {
        (self.self_attn.height, self.self_attn.width)
    }
}

/// Per-layer self/cross attention maps captured during one edit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionBundle {
    layers: Vec<AttentionLayer>,
}

pub const DEFAULT_RESOLUTIONS: [usize; 2] = [32, 64];

impl AttentionBundle {
    pub fn new(layers: Vec<AttentionLayer>) -> Result<Self> {
        let mut seen = HashSet::new();
        for layer in &layers {
            if !seen.insert(layer.id.as_str()) {
                return Err(Error::config(format!("duplicate layer id {:?}", layer.id)));
            }
            if let Some(cross) = &layer.cross_attn {
                if (cross.height, cross.width) != layer.resolution() {
                    return Err(Error::dims(format!(
                        "layer {:?}: cross map {}×{} vs self map {}×{}",
                        layer.id,
                        cross.height,
                        cross.width,
                        layer.self_attn.height,
                        layer.self_attn.width
                    )));
                }
            }
        }
        Ok(Self { layers })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn layers(&self) -> &[AttentionLayer] {
        &self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, id: &str) -> Option<&AttentionLayer> {
        self.layers.iter().find(|l| l.id == id)
    }

    /// Distinct `(height, width)` resolutions, ascending.
    pub fn resolutions(&self) -> Vec<(usize, usize)> {
        let mut r: Vec<_> = self.layers.iter().map(|l| l.resolution()).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Checks every layer's height and width against an allow-list.
    pub fn check_resolutions(&self, allowed: &[usize]) -> Result<()> {
        for layer in &self.layers {
            let (h, w) = layer.resolution();
            if !allowed.contains(&h) || !allowed.contains(&w) {
                return Err(Error::config(format!(
                    "layer {:?} resolution {h}×{w} not in allow-list {allowed:?}",
                    layer.id
                )));
            }
        }
        Ok(())
    }
}

/// Masks keyed by `(height, width)`.
pub type ResolutionMasks = BTreeMap<(usize, usize), Mask>;

/// Warps every layer of a bundle with one full-resolution field, resampled
/// once per distinct layer resolution. Self and cross maps of a layer share
/// the same resampled field.
pub fn warp_bundle(bundle: &AttentionBundle, field: &WarpField) -> Result<(AttentionBundle, ResolutionMasks)> {
    warp_bundle_with(bundle, field, Sampling::Bilinear)
}

pub fn warp_bundle_with(
    bundle: &AttentionBundle,
    field: &WarpField,
    sampling: Sampling,
) -> Result<(AttentionBundle, ResolutionMasks)> {
    let mut fields = BTreeMap::new();
    for (h, w) in bundle.resolutions() {
        fields.insert((h, w), resample_warp_field(field, h, w)?);
    }
    let mut masks = ResolutionMasks::new();
    let mut layers = Vec::with_capacity(bundle.layers.len());
    for layer in &bundle.layers {
        let f = &fields[&layer.resolution()];
        let (self_attn, mask) = warp_feature_map(&layer.self_attn, f, sampling)?;
        let cross_attn = match &layer.cross_attn {
            Some(c) => Some(warp_feature_map(c, f, sampling)?.0),
            None => None,
        };
        masks.entry(layer.resolution()).or_insert(mask);
        layers.push(AttentionLayer {
            id: layer.id.clone(),
            self_attn,
            cross_attn,
        });
    }
    Ok((AttentionBundle { layers }, masks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[serde(rename = "self")]
    SelfAttn,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub layer: String,
    pub role: Role,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub file: String,
}

/// `manifest.json` of a bundle directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `manifest.json` plus one `.fwt` per map. Layer order is preserved.
pub fn save_bundle(bundle: &AttentionBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, layer) in bundle.layers.iter().enumerate() {
        let maps = std::iter::once((Role::SelfAttn, &layer.self_attn))
            .chain(layer.cross_attn.as_ref().map(|c| (Role::Cross, c)));
        for (role, map) in maps {
            let file = format!(
                "{i:03}_{}.fwt",
                match role {
                    Role::SelfAttn => "self",
                    Role::Cross => "cross",
                }
            );
            map.save(dir.join(&file))?;
            entries.push(ManifestEntry {
                layer: layer.id.clone(),
                role,
                channels: map.channels,
                height: map.height,
                width: map.width,
                file,
            });
        }
    }
    let manifest = BundleManifest { version: 1, entries };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<AttentionBundle> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(&path).map_err(Error::at(&path))?)?;
    if manifest.version != 1 {
        return Err(Error::config(format!("unsupported bundle version {}", manifest.version)));
    }
    let mut layers: Vec<AttentionLayer> = Vec::new();
    let mut pending: Vec<(String, Option<FeatureMap>, Option<FeatureMap>)> = Vec::new();
    for entry in &manifest.entries {
        if entry.file.contains('/') || entry.file.contains('\\') || entry.file.contains("..") {
            return Err(Error::config(format!("bundle file {:?} escapes the bundle directory", entry.file)));
        }
        let map = FeatureMap::load(dir.join(&entry.file))?;
        if map.shape() != (entry.channels, entry.height, entry.width) {
            return Err(Error::dims(format!(
                "{}: manifest says {}×{}×{}, file holds {:?}",
                entry.file,
                entry.channels,
                entry.height,
                entry.width,
                map.shape()
            )));
        }
        let slot = match pending.iter().position(|(id, _, _)| *id == entry.layer) {
            Some(k) => k,
            None => {
                pending.push((entry.layer.clone(), None, None));
                pending.len() - 1
            }
        };
        let target = match entry.role {
            Role::SelfAttn => &mut pending[slot].1,
            Role::Cross => &mut pending[slot].2,
        };
        if target.replace(map).is_some() {
            return Err(Error::config(format!(
                "layer {:?} lists role {:?} twice",
                entry.layer, entry.role
            )));
        }
    }
    for (id, self_attn, cross_attn) in pending {
        let self_attn = self_attn.ok_or_else(|| Error::config(format!("layer {id:?} has no self map")))?;
        layers.push(AttentionLayer {
            id,
            self_attn,
            cross_attn,
        });
    }
    AttentionBundle::new(layers)
}
