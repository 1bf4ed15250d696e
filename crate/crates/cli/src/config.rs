//! Pipeline config for `attnwarp run`.
//!
//! ```json
//! {
//!   "views": "views.json",
//!   "source": "view_000",
//!   "splats": "splats.fwt",
//!   "depth": "splats",
//!   "editor": { "stamp": { "center": [64, 64], "radius": 32 } },
//!   "stages": { "num_stages": 3, "subset_size": 40, "seed": 0 },
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths resolve against the config file's directory. `views` is
//! either a path to a `{"views": [...]}` index (as written by `synth`) or
//! the list itself; each entry names `id`, `camera`, `image` and optionally
//! `depth`.

use std::path::{Path, PathBuf};

use attnwarp::editors::{CommandEditor, IdentityEditor, StampEditor};
use attnwarp::pipeline::{
    run_pipeline, ConcurrentEditor, DepthSource, Editor, RunManifest, RunOptions, SceneGeometry, StageConfig,
    ViewRecord,
};
use attnwarp::warp::DEFAULT_RESOLUTIONS;
use attnwarp::{BlendSchedule, Camera, DepthMap, Error, FilterConfig, Image, Result, SplatSet};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub id: String,
    pub camera: PathBuf,
    pub image: PathBuf,
    #[serde(default)]
    pub depth: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Views {
    File(PathBuf),
    Inline(Vec<ViewEntry>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewIndex {
    views: Vec<ViewEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthMode {
    /// Per-view depth files.
    #[default]
    Files,
    /// Normal-filtered renders of the splat table.
    Splats,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum EditorSpec {
    Identity,
    Stamp(StampEditor),
    /// `argv` of an external editor, called once per view with its work directory.
    Command(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub views: Views,
    pub source: String,
    pub editor: EditorSpec,
    #[serde(default)]
    pub splats: Option<PathBuf>,
    #[serde(default)]
    pub depth: DepthMode,
    #[serde(default = "default_theta")]
    pub theta_max_deg: f64,
    #[serde(default)]
    pub stages: StageConfig,
    #[serde(default)]
    pub schedule: BlendSchedule,
    #[serde(default = "default_steps")]
    pub steps: u32,
    #[serde(default)]
    pub prompt: String,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    /// Concurrent editor calls per stage; external commands always run one at a time.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Scratch space for the command editor; defaults to `<output_dir>/work`.
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
}

fn default_theta() -> f64 {
    60.0
}

fn default_steps() -> u32 {
    50
}

fn default_resolutions() -> Vec<usize> {
    DEFAULT_RESOLUTIONS.to_vec()
}

fn default_parallelism() -> usize {
    1
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn records(&self, base: &Path) -> Result<Vec<ViewRecord>> {
        let (entries, dir) = match &self.views {
            Views::Inline(v) => (v.clone(), base.to_path_buf()),
            Views::File(p) => {
                let p = resolve(base, p);
                let index: ViewIndex = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
                (index.views, p.parent().unwrap_or(base).to_path_buf())
            }
        };
        entries
            .iter()
            .map(|e| {
                let depth = match (self.depth, &e.depth) {
                    (DepthMode::Splats, _) => DepthSource::Splats,
                    (DepthMode::Files, Some(d)) => DepthSource::Precomputed(DepthMap::load(resolve(&dir, d))?),
                    (DepthMode::Files, None) => {
                        return Err(Error::Config(format!("view {:?} has no depth file", e.id)));
                    }
                };
                ViewRecord::new(
                    e.id.clone(),
                    Camera::load(resolve(&dir, &e.camera))?,
                    Image::load(resolve(&dir, &e.image))?,
                    depth,
                )
            })
            .collect()
    }

    pub fn execute(&self, base: &Path, out: Option<PathBuf>, timing: bool) -> Result<RunManifest> {
        let mut records = self.records(base)?;
        let splats = match &self.splats {
            Some(p) => Some(SplatSet::load(resolve(base, p))?),
            None if self.depth == DepthMode::Splats => {
                return Err(Error::Config("depth mode \"splats\" needs a splats file".into()));
            }
            None => None,
        };
        let geometry = SceneGeometry {
            splats,
            filter: FilterConfig::new(self.theta_max_deg)?,
        };
        let output_dir = out.or_else(|| self.output_dir.as_ref().map(|p| resolve(base, p)));
        let opts = RunOptions {
            prompt: self.prompt.clone(),
            steps: self.steps,
            schedule: self.schedule,
            resolutions: self.resolutions.clone(),
            output_dir: output_dir.clone(),
            timing,
        };
        let n = self.parallelism.max(1);
        let run = |editor: &mut Editor<'_>, records: &mut [ViewRecord]| {
            run_pipeline(records, &self.source, editor, &self.stages, &geometry, &opts, None).map(|r| r.manifest)
        };
        match &self.editor {
            EditorSpec::Identity => {
                let mut ed = IdentityEditor;
                if n > 1 {
                    run(&mut Editor::Concurrent(&ed as &dyn ConcurrentEditor, n), &mut records)
                } else {
                    run(&mut Editor::Serial(&mut ed), &mut records)
                }
            }
            EditorSpec::Stamp(stamp) => {
                let mut ed = stamp.clone();
                if n > 1 {
                    run(&mut Editor::Concurrent(&ed as &dyn ConcurrentEditor, n), &mut records)
                } else {
                    run(&mut Editor::Serial(&mut ed), &mut records)
                }
            }
            EditorSpec::Command(argv) => {
                let work = match (&self.work_dir, &output_dir) {
                    (Some(w), _) => resolve(base, w),
                    (None, Some(o)) => o.join("work"),
                    (None, None) => return Err(Error::Config("the command editor needs output_dir or work_dir".into())),
                };
                let mut ed = CommandEditor::new(argv, work)?;
                run(&mut Editor::Serial(&mut ed), &mut records)
            }
        }
    }
}
