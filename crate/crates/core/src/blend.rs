//! Masked blending of warped and freshly computed attention maps with a
//! linearly decaying coefficient.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor_io::{self, Tensor};
use crate::warp::FeatureMap;

/// `H×W` weights in `[0, 1]`. Binary masks hold only `0` and `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("mask must be at least 1×1"));
        }
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "mask data has {} values, expected {}×{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::OutOfRange("mask entries must lie in [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn ones(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![1.0; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
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

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&m| m == 0.0 || m == 1.0)
    }

    /// Fraction of the mask's total weight, `mean(M)`.
    pub fn coverage(&self) -> f64 {
        self.data.iter().map(|&m| m as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|&&m| m == 1.0).count()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.height, self.width], self.data.clone()).expect("valid dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match *t.dims() {
            [h, w] | [1, h, w] => Self::new(w, h, t.data().to_vec()),
            _ => Err(Error::dims(format!("mask tensor must be [H, W], got {:?}", t.dims()))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(&tensor_io::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tensor_io::save(path, &self.to_tensor())
    }
}

/// `α_t = α₀ · (T − t) / T`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlendSchedule {
    pub alpha0: f64,
    pub total_steps: u32,
}

impl Default for BlendSchedule {
    fn default() -> Self {
        Self {
            alpha0: 0.9,
            total_steps: 50,
        }
    }
}

impl BlendSchedule {
    pub fn new(alpha0: f64, total_steps: u32) -> Result<Self> {
        let s = Self {
            alpha0,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha0) {
            return Err(Error::OutOfRange(format!("alpha0={} outside [0, 1]", self.alpha0)));
        }
        if self.total_steps == 0 {
            return Err(Error::OutOfRange("total_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn alpha_at(&self, t: u32) -> Result<f64> {
        alpha_at(self, t)
    }
}

pub fn alpha_at(schedule: &BlendSchedule, t: u32) -> Result<f64> {
    schedule.validate()?;
    if t > schedule.total_steps {
        return Err(Error::OutOfRange(format!(
            "step {t} beyond total_steps {}",
            schedule.total_steps
        )));
    }
    let remaining = (schedule.total_steps - t) as f64 / schedule.total_steps as f64;
    Ok(schedule.alpha0 * remaining)
}

/// `out = fresh + α·M·(warped − fresh)`, the closed form of masking the
/// warped map into the fresh one and mixing the result back with weight α.
pub fn blend_masked(warped: &FeatureMap, fresh: &FeatureMap, mask: &Mask, alpha: f64) -> Result<FeatureMap> {
    if warped.shape() != fresh.shape() {
        return Err(Error::dims(format!(
            "warped {:?} vs fresh {:?}",
            warped.shape(),
            fresh.shape()
        )));
    }
    let (_, h, w) = fresh.shape();
    if mask.width() != w || mask.height() != h {
        return Err(Error::dims(format!(
            "mask {}×{} vs feature map {}×{}",
            mask.height(),
            mask.width(),
            h,
            w
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha={alpha} outside [0, 1]")));
    }
    if !warped.is_finite() || !fresh.is_finite() {
        return Err(Error::NonFinite("blend input"));
    }
    let plane = h * w;
    let m = mask.data();
    let data = warped
        .data()
        .iter()
        .zip(fresh.data())
        .enumerate()
        .map(|(i, (&a, &b))| {
            let gate = alpha * m[i % plane] as f64;
            if gate == 0.0 {
                b
            } else if gate == 1.0 {
                a
            } else {
                (b as f64 + gate * (a as f64 - b as f64)) as f32
            }
        })
        .collect();
    FeatureMap::new(fresh.channels(), h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(c: usize, h: usize, w: usize, f: impl Fn(usize) -> f32) -> FeatureMap {
        FeatureMap::new(c, h, w, (0..c * h * w).map(f).collect()).unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        let s = BlendSchedule::new(0.9, 100).unwrap();
        assert_eq!(s.alpha_at(0).unwrap(), 0.9);
        assert_eq!(s.alpha_at(100).unwrap(), 0.0);
        assert_eq!(s.alpha_at(50).unwrap(), 0.45);
        assert!(matches!(s.alpha_at(101), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn schedule_validation() {
        assert!(BlendSchedule::new(1.5, 10).is_err());
        assert!(BlendSchedule::new(0.5, 0).is_err());
        assert_eq!(BlendSchedule::default().alpha0, 0.9);
    }

    #[test]
    fn blend_endpoints_exact() {
        let warped = fm(2, 3, 4, |i| i as f32 * 0.37 - 1.0);
        let fresh = fm(2, 3, 4, |i| (i as f32).sin());
        let ones = Mask::ones(4, 3).unwrap();
        let zeros = Mask::zeros(4, 3).unwrap();
        assert_eq!(blend_masked(&warped, &fresh, &ones, 0.0).unwrap(), fresh);
        assert_eq!(blend_masked(&warped, &fresh, &ones, 1.0).unwrap(), warped);
        for alpha in [0.0, 0.3, 1.0] {
            assert_eq!(blend_masked(&warped, &fresh, &zeros, alpha).unwrap(), fresh);
        }
    }

    #[test]
    fn blend_errors() {
        let a = fm(1, 2, 2, |_| 0.0);
        let b = fm(1, 2, 3, |_| 0.0);
        let m = Mask::ones(2, 2).unwrap();
        assert!(matches!(blend_masked(&a, &b, &m, 0.5), Err(Error::DimensionMismatch(_))));
        assert!(matches!(
            blend_masked(&a, &a, &Mask::ones(3, 2).unwrap(), 0.5),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(blend_masked(&a, &a, &m, 1.5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn mask_rejects_out_of_range() {
        assert!(Mask::new(1, 1, vec![1.5]).is_err());
        assert!(Mask::new(1, 1, vec![-0.1]).is_err());
        assert!(Mask::new(1, 1, vec![f32::NAN]).is_err());
        assert!(!Mask::new(2, 1, vec![0.5, 1.0]).unwrap().is_binary());
    }
}
