//! Built-in editor plug-ins: a passthrough, a procedural "stamp" editor
//! whose edit region is known analytically, and an adapter that runs an
//! external command over a work directory.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::blend::{blend_masked, Mask};
use crate::error::{Error, Result};
use crate::pipeline::{ConcurrentEditor, EditOutput, EditRequest, EditorPlugin};
use crate::warp::{self, AttentionBundle, AttentionLayer, FeatureMap, Image, DEFAULT_RESOLUTIONS};

/// Returns the input image untouched and an empty bundle.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityEditor;

impl ConcurrentEditor for IdentityEditor {
    fn name(&self) -> &str {
        "identity"
    }

    fn edit(&self, req: &EditRequest<'_>) -> Result<EditOutput> {
        Ok(EditOutput {
            image: req.image.clone(),
            bundle: AttentionBundle::empty(),
        })
    }
}

impl EditorPlugin for IdentityEditor {
    fn name(&self) -> &str {
        "identity"
    }

    fn edit(&mut self, req: &EditRequest<'_>) -> Result<EditOutput> {
        ConcurrentEditor::edit(self, req)
    }
}

/// Paints a solid disk into the source view and reports the disk's
/// coverage indicator as its attention. Target views receive no disk of
/// their own: their edit is whatever the warped indicator says.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StampEditor {
    /// Disk centre in source-image continuous pixel coordinates.
    pub center: [f64; 2],
    /// Disk radius in source-image pixels.
    pub radius: f64,
    #[serde(default = "default_color")]
    pub color: [f32; 3],
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    /// Sub-samples per axis used for coverage.
    #[serde(default = "default_supersample")]
    pub supersample: usize,
}

fn default_color() -> [f32; 3] {
    [1.0, 0.2, 0.1]
}

fn default_resolutions() -> Vec<usize> {
    DEFAULT_RESOLUTIONS.to_vec()
}

fn default_supersample() -> usize {
    4
}

/// Threshold above which an indicator pixel counts as inside the edit.
pub const STAMP_THRESHOLD: f32 = 0.5;

impl StampEditor {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Self {
            center,
            radius,
            color: default_color(),
            resolutions: default_resolutions(),
            supersample: default_supersample(),
        }
    }

    /// Fraction of each cell of an `out_h × out_w` raster covered by the
    /// disk, where the raster spans the same field of view as an
    /// `img_w × img_h` image.
    pub fn indicator(&self, img_w: usize, img_h: usize, out_h: usize, out_w: usize) -> Result<FeatureMap> {
        let (sx, sy) = (img_w as f64 / out_w as f64, img_h as f64 / out_h as f64);
        let ss = self.supersample.max(1);
        let r2 = self.radius * self.radius;
        FeatureMap::from_fn(1, out_h, out_w, |_, y, x| {
            let mut inside = 0;
            for j in 0..ss {
                for i in 0..ss {
                    let px = (x as f64 + (i as f64 + 0.5) / ss as f64) * sx;
                    let py = (y as f64 + (j as f64 + 0.5) / ss as f64) * sy;
                    let (dx, dy) = (px - self.center[0], py - self.center[1]);
                    if dx * dx + dy * dy <= r2 {
                        inside += 1;
                    }
                }
            }
            inside as f32 / (ss * ss) as f32
        })
    }

    fn paint(&self, image: &Image, weight: impl Fn(usize, usize) -> f32) -> Result<Image> {
        let (c, h, w) = image.shape();
        FeatureMap::from_fn(c, h, w, |ch, y, x| {
            let a = weight(x, y);
            let base = image.get(ch, y, x);
            let col = self.color[ch.min(2)];
            base + a * (col - base)
        })
    }

    fn source_edit(&self, req: &EditRequest<'_>) -> Result<EditOutput> {
        let (_, h, w) = req.image.shape();
        let full = self.indicator(w, h, h, w)?;
        let image = self.paint(req.image, |x, y| full.get(0, y, x))?;
        let mut layers = Vec::new();
        for &n in &self.resolutions {
            let ind = self.indicator(w, h, n, n)?;
            layers.push(AttentionLayer {
                id: format!("stamp.{n}"),
                self_attn: ind.clone(),
                cross_attn: Some(ind),
            });
        }
        Ok(EditOutput {
            image,
            bundle: AttentionBundle::new(layers)?,
        })
    }

    fn target_edit(&self, req: &EditRequest<'_>, guidance: &crate::pipeline::Guidance<'_>) -> Result<EditOutput> {
        let (_, h, w) = req.image.shape();
        let alpha = guidance.schedule.alpha_at(0)?;
        let mut layers = Vec::new();
        let mut finest: Option<(FeatureMap, Mask)> = None;
        for layer in guidance.bundle.layers() {
            let (lh, lw) = layer.resolution();
            let mask = guidance
                .masks
                .get(&(lh, lw))
                .ok_or_else(|| Error::Plugin(format!("no mask for {lh}×{lw}")))?;
            let fresh = FeatureMap::zeros(layer.self_attn.channels(), lh, lw)?;
            let blended = blend_masked(&layer.self_attn, &fresh, mask, alpha)?;
            if finest.as_ref().is_none_or(|(f, _)| f.width() < lw) {
                finest = Some((layer.self_attn.clone(), mask.clone()));
            }
            layers.push(AttentionLayer {
                id: layer.id.clone(),
                cross_attn: Some(blended.clone()),
                self_attn: blended,
            });
        }
        let image = match finest {
            Some((ind, mask)) => {
                let (iw, ih) = (ind.width(), ind.height());
                self.paint(req.image, |x, y| {
                    let fx = ((x * iw) / w).min(iw - 1);
                    let fy = ((y * ih) / h).min(ih - 1);
                    if mask.get(fx, fy) == 1.0 && ind.get(0, fy, fx) >= STAMP_THRESHOLD {
                        1.0
                    } else {
                        0.0
                    }
                })?
            }
            None => req.image.clone(),
        };
        Ok(EditOutput {
            image,
            bundle: AttentionBundle::new(layers)?,
        })
    }
}

impl ConcurrentEditor for StampEditor {
    fn name(&self) -> &str {
        "stamp"
    }

    fn edit(&self, req: &EditRequest<'_>) -> Result<EditOutput> {
        match &req.guidance {
            None => self.source_edit(req),
            Some(g) => self.target_edit(req, g),
        }
    }
}

impl EditorPlugin for StampEditor {
    fn name(&self) -> &str {
        "stamp"
    }

    fn edit(&mut self, req: &EditRequest<'_>) -> Result<EditOutput> {
        ConcurrentEditor::edit(self, req)
    }
}

/// `request.json` written for an external editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRequest {
    pub view: String,
    pub prompt: String,
    pub steps: u32,
    pub alpha0: Option<f64>,
    pub total_steps: Option<u32>,
    pub has_conditioning: bool,
    pub has_guidance: bool,
}

/// Runs `program args... <work_dir>` for every edit.
///
/// Inputs written to `<work_dir>`: `request.json`, `image.fwt`,
/// `conditioning.fwt` (view depth, when available), and for guided edits
/// `guidance/bundle/` plus `guidance/mask_{h}x{w}.fwt`.
/// The command must write `edited.fwt` and a `bundle/` directory back into
/// the same work directory and exit with status 0.
#[derive(Debug, Clone)]
pub struct CommandEditor {
    pub program: String,
    pub args: Vec<String>,
    pub work_root: PathBuf,
}

impl CommandEditor {
    pub fn new(argv: &[String], work_root: impl Into<PathBuf>) -> Result<Self> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::config("editor command must not be empty"))?;
        Ok(Self {
            program: program.clone(),
            args: args.to_vec(),
            work_root: work_root.into(),
        })
    }

    fn prepare(&self, dir: &Path, req: &EditRequest<'_>) -> Result<()> {
        if dir.exists() {
            std::fs::remove_dir_all(dir)?;
        }
        std::fs::create_dir_all(dir)?;
        let request = CommandRequest {
            view: req.view_id.to_string(),
            prompt: req.prompt.to_string(),
            steps: req.steps,
            alpha0: req.guidance.map(|g| g.schedule.alpha0),
            total_steps: req.guidance.map(|g| g.schedule.total_steps),
            has_conditioning: req.conditioning.is_some(),
            has_guidance: req.guidance.is_some(),
        };
        std::fs::write(dir.join("request.json"), serde_json::to_string_pretty(&request)?)?;
        req.image.save(dir.join("image.fwt"))?;
        if let Some(d) = req.conditioning {
            d.save(dir.join("conditioning.fwt"))?;
        }
        if let Some(g) = &req.guidance {
            let gdir = dir.join("guidance");
            warp::save_bundle(g.bundle, gdir.join("bundle"))?;
            for (&(h, w), m) in g.masks {
                m.save(gdir.join(format!("mask_{h}x{w}.fwt")))?;
            }
        }
        Ok(())
    }
}

impl EditorPlugin for CommandEditor {
    fn name(&self) -> &str {
        &self.program
    }

    fn edit(&mut self, req: &EditRequest<'_>) -> Result<EditOutput> {
        let dir = self.work_root.join(req.view_id);
        self.prepare(&dir, req)?;
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(&dir)
            .env("ATTNWARP_WORKDIR", &dir)
            .output()
            .map_err(|e| Error::Plugin(format!("cannot start {:?}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(Error::Plugin(format!(
                "{:?} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let image = Image::load(dir.join("edited.fwt"))
            .map_err(|e| Error::Plugin(format!("reading edited.fwt: {e}")))?;
        if image.shape() != req.image.shape() {
            return Err(Error::Plugin(format!(
                "edited image {:?} differs from input {:?}",
                image.shape(),
                req.image.shape()
            )));
        }
        let bundle = warp::load_bundle(dir.join("bundle")).map_err(|e| Error::Plugin(format!("reading bundle: {e}")))?;
        Ok(EditOutput { image, bundle })
    }
}
