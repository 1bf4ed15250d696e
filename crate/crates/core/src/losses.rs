//! Loss kernels for splat fine-tuning: L1, normal consistency and depth
//! distortion. Perceptual losses plug in through [`ExternalLoss`].
//!
//! Ray-based losses are averaged over rays so their magnitude does not
//! depend on image resolution. All reductions use a fixed pairwise tree so
//! results do not depend on thread scheduling.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{pixel_center, unproject, Camera, DepthMap};
use crate::par;
use crate::tensor_io::{self, Tensor};
use crate::warp::FeatureMap;

/// One ray-splat intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub weight: f64,
    pub depth: f64,
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    /// Pixel the ray was cast through, `(x, y)`.
    pub pixel: (usize, usize),
    pub hits: Vec<Hit>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RayIntersections {
    rays: Vec<Ray>,
}

impl RayIntersections {
    pub fn new(rays: Vec<Ray>) -> Result<Self> {
        for ray in &rays {
            for hit in &ray.hits {
                if !(hit.weight.is_finite() && hit.weight >= 0.0) {
                    return Err(Error::OutOfRange(format!("hit weight {} must be finite and >= 0", hit.weight)));
                }
                if !(hit.depth.is_finite() && hit.depth > 0.0) {
                    return Err(Error::OutOfRange(format!("hit depth {} must be positive", hit.depth)));
                }
                if hit.normal.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("hit normal"));
                }
            }
        }
        Ok(Self { rays })
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// Ragged layout as three tensors:
    /// `rays [N, 3]` = (hit count, pixel x, pixel y),
    /// `weights [M]`, `hits [M, 4]` = (depth, nx, ny, nz).
    pub fn to_tensors(&self) -> Result<[Tensor; 3]> {
        let exact = |v: usize| -> Result<f32> {
            if v > (1 << 24) {
                return Err(Error::OutOfRange(format!("{v} not exactly representable in f32")));
            }
            Ok(v as f32)
        };
        let mut index = Vec::with_capacity(self.rays.len() * 3);
        let mut weights = Vec::new();
        let mut table = Vec::new();
        for ray in &self.rays {
            index.extend([exact(ray.hits.len())?, exact(ray.pixel.0)?, exact(ray.pixel.1)?]);
            for h in &ray.hits {
                weights.push(h.weight as f32);
                table.extend([h.depth, h.normal.x, h.normal.y, h.normal.z].map(|v| v as f32));
            }
        }
        let m = weights.len();
        Ok([
            Tensor::new(vec![self.rays.len(), 3], index)?,
            Tensor::new(vec![m], weights)?,
            Tensor::new(vec![m, 4], table)?,
        ])
    }

    pub fn from_tensors(index: &Tensor, weights: &Tensor, table: &Tensor) -> Result<Self> {
        let [n, 3] = *index.dims() else {
            return Err(Error::dims(format!("ray index must be [N, 3], got {:?}", index.dims())));
        };
        let [m] = *weights.dims() else {
            return Err(Error::dims(format!("weights must be [M], got {:?}", weights.dims())));
        };
        if table.dims() != [m, 4] {
            return Err(Error::dims(format!("hit table must be [{m}, 4], got {:?}", table.dims())));
        }
        let counts: Vec<usize> = index.data().chunks_exact(3).map(|r| r[0] as usize).collect();
        let total: usize = counts.iter().sum();
        if total != m {
            return Err(Error::dims(format!("ray counts sum to {total} but {m} hits stored")));
        }
        let mut rays = Vec::with_capacity(n);
        let mut cursor = 0;
        for (r, row) in index.data().chunks_exact(3).enumerate() {
            let count = counts[r];
            let hits = (cursor..cursor + count)
                .map(|k| {
                    let t = &table.data()[k * 4..k * 4 + 4];
                    Hit {
                        weight: weights.data()[k] as f64,
                        depth: t[0] as f64,
                        normal: Vector3::new(t[1] as f64, t[2] as f64, t[3] as f64),
                    }
                })
                .collect();
            cursor += count;
            rays.push(Ray {
                pixel: (row[1] as usize, row[2] as usize),
                hits,
            });
        }
        Self::new(rays)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let [index, weights, table] = self.to_tensors()?;
        tensor_io::save(dir.join("rays.fwt"), &index)?;
        tensor_io::save(dir.join("weights.fwt"), &weights)?;
        tensor_io::save(dir.join("hits.fwt"), &table)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::from_tensors(
            &tensor_io::load(dir.join("rays.fwt"))?,
            &tensor_io::load(dir.join("weights.fwt"))?,
            &tensor_io::load(dir.join("hits.fwt"))?,
        )
    }
}

/// Depth-gradient normals; `None` marks pixels where no normal is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    normals: Vec<Option<Vector3<f64>>>,
}

impl NormalMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.normals[y * self.width + x]
    }

    pub fn defined_count(&self) -> usize {
        self.normals.iter().filter(|n| n.is_some()).count()
    }
}

/// Sum in a fixed balanced-tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean absolute difference over all elements.
pub fn l1_loss(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dims(format!("l1 operands {:?} vs {:?}", a.shape(), b.shape())));
    }
    let diffs: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .collect();
    Ok(pairwise_sum(&diffs) / diffs.len() as f64)
}

/// Unprojects each pixel and its +x/+y neighbours and takes the normalised
/// cross product of the two tangents, oriented toward the camera. Pixels on
/// the last row/column or touching a zero depth stay undefined.
pub fn normals_from_depth(depth: &DepthMap, cam: &Camera) -> NormalMap {
    let (w, h) = (depth.width(), depth.height());
    let k = cam.intrinsics;
    let point = |x: usize, y: usize| -> Option<Vector3<f64>> {
        let d = depth.get(x, y) as f64;
        unproject(pixel_center(x, y), d, &k).ok()
    };
    let normals = par::flat_map_indexed(h, |y| {
        (0..w)
            .map(|x| {
                if x + 1 >= w || y + 1 >= h {
                    return None;
                }
                let p = point(x, y)?;
                let tx = point(x + 1, y)? - p;
                let ty = point(x, y + 1)? - p;
                let n = tx.cross(&ty).try_normalize(1e-15)?;
                Some(if n.dot(&p) > 0.0 { -n } else { n })
            })
            .collect()
    });
    NormalMap {
        width: w,
        height: h,
        normals,
    }
}

/// `Σ_i ω_i (1 − n_i·N)` per ray, averaged over the rays that land on a
/// pixel with a defined normal. Rays without such a pixel are skipped.
pub fn normal_consistency_loss(rays: &RayIntersections, normals: &NormalMap) -> f64 {
    let per_ray: Vec<Option<f64>> = par::map_indexed(rays.rays.len(), |r| {
        let ray = &rays.rays[r];
        let n_ref = normals.get(ray.pixel.0, ray.pixel.1)?;
        let terms: Vec<f64> = ray.hits.iter().map(|h| h.weight * (1.0 - h.normal.dot(&n_ref))).collect();
        Some(pairwise_sum(&terms))
    });
    let contributing: Vec<f64> = per_ray.into_iter().flatten().collect();
    if contributing.is_empty() {
        return 0.0;
    }
    pairwise_sum(&contributing) / contributing.len() as f64
}

fn ray_distortion(hits: &[Hit]) -> f64 {
    let terms: Vec<f64> = hits
        .iter()
        .flat_map(|a| hits.iter().map(move |b| a.weight * b.weight * (a.depth - b.depth).abs()))
        .collect();
    pairwise_sum(&terms)
}

/// `Σ_{i,j} ω_i ω_j |z_i − z_j|` over ordered pairs per ray, averaged over
/// all rays.
pub fn depth_distortion_loss(rays: &RayIntersections) -> f64 {
    if rays.rays.is_empty() {
        return 0.0;
    }
    let per_ray = par::map_indexed(rays.rays.len(), |r| ray_distortion(&rays.rays[r].hits));
    pairwise_sum(&per_ray) / rays.rays.len() as f64
}

/// Subgradient of [`depth_distortion_loss`] with respect to every hit depth,
/// laid out ray by ray. Ties (`z_i = z_j`) contribute zero.
pub fn depth_distortion_grad(rays: &RayIntersections) -> Vec<Vec<f64>> {
    let n = rays.rays.len().max(1) as f64;
    rays.rays
        .iter()
        .map(|ray| {
            ray.hits
                .iter()
                .map(|a| {
                    let terms: Vec<f64> = ray
                        .hits
                        .iter()
                        .map(|b| 2.0 * a.weight * b.weight * sign(a.depth - b.depth))
                        .collect();
                    pairwise_sum(&terms) / n
                })
                .collect()
        })
        .collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

type LossFn = dyn Fn(&FeatureMap, &FeatureMap) -> Result<f64> + Send + Sync;

/// A caller-provided image loss (e.g. a perceptual metric backed by a
/// network this crate does not ship).
pub struct ExternalLoss {
    pub name: String,
    pub weight: f64,
    func: Box<LossFn>,
}

impl ExternalLoss {
    pub fn new(
        name: impl Into<String>,
        weight: f64,
        func: impl Fn(&FeatureMap, &FeatureMap) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            weight,
            func: Box::new(func),
        }
    }

    pub fn eval(&self, rendered: &FeatureMap, target: &FeatureMap) -> Result<f64> {
        (self.func)(rendered, target)
    }
}

impl std::fmt::Debug for ExternalLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalLoss")
            .field("name", &self.name)
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

/// Caller-chosen weights; there are no defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub l1: f64,
    pub normal: f64,
    pub distortion: f64,
}

/// Loss kernels handed to fine-tuning callbacks.
#[derive(Debug)]
pub struct LossSet {
    pub weights: LossWeights,
    pub external: Vec<ExternalLoss>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub terms: Vec<(String, f64)>,
    pub total: f64,
}

impl LossSet {
    pub fn new(weights: LossWeights) -> Self {
        Self {
            weights,
            external: Vec::new(),
        }
    }

    pub fn with_external(mut self, loss: ExternalLoss) -> Self {
        self.external.push(loss);
        self
    }

    /// Weighted image terms (L1 plus external hooks) for one view.
    pub fn image_terms(&self, rendered: &FeatureMap, target: &FeatureMap) -> Result<LossBreakdown> {
        let mut terms = vec![("l1".to_string(), l1_loss(rendered, target)?)];
        let mut total = self.weights.l1 * terms[0].1;
        for ext in &self.external {
            let v = ext.eval(rendered, target)?;
            total += ext.weight * v;
            terms.push((ext.name.clone(), v));
        }
        Ok(LossBreakdown { terms, total })
    }

    /// Weighted geometric terms for one view's ray set.
    pub fn geometry_terms(&self, rays: &RayIntersections, normals: &NormalMap) -> LossBreakdown {
        let ln = normal_consistency_loss(rays, normals);
        let ld = depth_distortion_loss(rays);
        LossBreakdown {
            total: self.weights.normal * ln + self.weights.distortion * ld,
            terms: vec![("normal".into(), ln), ("distortion".into(), ld)],
        }
    }
}
