//! Staged multi-view editing: pick unedited views, warp the source view's
//! attention into each, hand the result to an editor plug-in.
//!
//! The loop is:
//!
//! 1. edit the source view without guidance and keep its attention bundle;
//! 2. for each stage, draw a subset of still-unedited views;
//! 3. for each selected view obtain its depth (normal-filtered splat render
//!    or a precomputed map), build the backward warp field into the source,
//!    warp the source bundle at every layer resolution and call the editor;
//! 4. after the stage, call the optional fine-tuning hook once with every
//!    image edited in that stage.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::blend::{BlendSchedule, Mask};
use crate::error::{Error, Result};
use crate::geometry::{compute_warp_field, Camera, DepthMap, WarpField};
use crate::losses::LossSet;
use crate::par;
use crate::rng::StageRng;
use crate::splat::{filter_splats, render_depth, FilterConfig, SplatSet};
use crate::warp::{self, AttentionBundle, Image, ResolutionMasks, DEFAULT_RESOLUTIONS};

#[derive(Debug, Clone, PartialEq)]
pub enum DepthSource {
    /// Render from the normal-filtered splat set.
    Splats,
    Precomputed(DepthMap),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub id: String,
    pub camera: Camera,
    pub image: Image,
    pub depth: DepthSource,
    edited: bool,
}

impl ViewRecord {
    pub fn new(id: impl Into<String>, camera: Camera, image: Image, depth: DepthSource) -> Result<Self> {
        let id = id.into();
        check_view_id(&id)?;
        if image.width() != camera.width() || image.height() != camera.height() {
            return Err(Error::dims(format!(
                "view {id:?}: image {}×{} vs camera {}×{}",
                image.height(),
                image.width(),
                camera.height(),
                camera.width()
            )));
        }
        if let DepthSource::Precomputed(d) = &depth {
            if d.width() != camera.width() || d.height() != camera.height() {
                return Err(Error::dims(format!("view {id:?}: depth size differs from camera")));
            }
        }
        Ok(Self {
            id,
            camera,
            image,
            depth,
            edited: false,
        })
    }

    pub fn edited(&self) -> bool {
        self.edited
    }

    /// Edits are permanent; there is no way to clear the flag.
    pub fn mark_edited(&mut self) {
        self.edited = true;
    }
}

/// View ids double as directory names in run outputs.
fn check_view_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("view id {id:?} must match [A-Za-z0-9_.-]+")))
    }
}

fn check_unique(records: &[ViewRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::config(format!("duplicate view id {:?}", r.id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageConfig {
    pub num_stages: usize,
    pub subset_size: usize,
    pub seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            num_stages: 3,
            subset_size: 40,
            seed: 0,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_stages == 0 || self.subset_size == 0 {
            return Err(Error::config("num_stages and subset_size must be positive"));
        }
        Ok(())
    }
}

/// Uniform draw without replacement from the unedited views, of size
/// `min(subset_size, remaining)`. A pure function of the seed, the stage
/// index and the set of unedited ids.
pub fn select_subset(records: &[ViewRecord], cfg: &StageConfig, stage: usize) -> Result<Vec<String>> {
    cfg.validate()?;
    if stage >= cfg.num_stages {
        return Err(Error::OutOfRange(format!(
            "stage {stage} beyond num_stages {}",
            cfg.num_stages
        )));
    }
    let mut candidates: Vec<&str> = records.iter().filter(|r| !r.edited).map(|r| r.id.as_str()).collect();
    candidates.sort_unstable();
    let mut rng = StageRng::new(cfg.seed, stage as u64);
    Ok(rng
        .sample(&candidates, cfg.subset_size)
        .into_iter()
        .map(str::to_owned)
        .collect())
}

/// Warped source attention handed to the editor for one target view.
#[derive(Debug, Clone, Copy)]
pub struct Guidance<'a> {
    pub bundle: &'a AttentionBundle,
    pub masks: &'a ResolutionMasks,
    pub schedule: BlendSchedule,
}

#[derive(Debug, Clone, Copy)]
pub struct EditRequest<'a> {
    pub view_id: &'a str,
    pub image: &'a Image,
    /// Structural conditioning (the view's depth) when available.
    pub conditioning: Option<&'a DepthMap>,
    pub prompt: &'a str,
    pub guidance: Option<Guidance<'a>>,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutput {
    pub image: Image,
    pub bundle: AttentionBundle,
}

/// Stand-in for the diffusion model. Implementations may keep state, so
/// calls are made one at a time.
pub trait EditorPlugin {
    fn name(&self) -> &str;
    fn edit(&mut self, req: &EditRequest<'_>) -> Result<EditOutput>;
}

/// An editor that is safe to call from several threads at once.
pub trait ConcurrentEditor: Sync {
    fn name(&self) -> &str;
    fn edit(&self, req: &EditRequest<'_>) -> Result<EditOutput>;
}

/// How plug-in calls are scheduled within a stage.
pub enum Editor<'a> {
    Serial(&'a mut dyn EditorPlugin),
    /// At most `parallelism` concurrent calls.
    Concurrent(&'a dyn ConcurrentEditor, usize),
}

impl Editor<'_> {
    fn name(&self) -> &str {
        match self {
            Editor::Serial(p) => p.name(),
            Editor::Concurrent(p, _) => p.name(),
        }
    }

    fn edit_one(&mut self, req: &EditRequest<'_>) -> Result<EditOutput> {
        match self {
            Editor::Serial(p) => p.edit(req),
            Editor::Concurrent(p, _) => p.edit(req),
        }
    }

    fn edit_all(&mut self, reqs: &[EditRequest<'_>]) -> Vec<Result<EditOutput>> {
        match self {
            Editor::Serial(p) => reqs.iter().map(|r| p.edit(r)).collect(),
            Editor::Concurrent(p, n) => {
                let p: &dyn ConcurrentEditor = *p;
                let mut out = Vec::with_capacity(reqs.len());
                for chunk in reqs.chunks((*n).max(1)) {
                    let results: Vec<Result<EditOutput>> = std::thread::scope(|s| {
                        let handles: Vec<_> = chunk.iter().map(|r| s.spawn(move || p.edit(r))).collect();
                        handles
                            .into_iter()
                            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Plugin("editor panicked".into()))))
                            .collect()
                    });
                    out.extend(results);
                }
                out
            }
        }
    }
}

/// Geometry available to the run.
#[derive(Debug, Clone, Default)]
pub struct SceneGeometry {
    pub splats: Option<SplatSet>,
    pub filter: FilterConfig,
}

/// Everything an after-stage fine-tuning callback gets to see.
pub struct StageContext<'a> {
    pub stage: usize,
    /// `(view id, camera, edited image)` for every view edited this stage.
    pub edited: Vec<(&'a str, &'a Camera, &'a Image)>,
    pub splats: Option<&'a SplatSet>,
    pub losses: &'a LossSet,
}

/// Fine-tuning step run once per stage. Returning a splat set replaces the
/// geometry used by later stages.
pub trait StageHook {
    fn after_stage(&mut self, ctx: &StageContext<'_>) -> Result<Option<SplatSet>>;
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub prompt: String,
    pub steps: u32,
    pub schedule: BlendSchedule,
    /// Allowed attention resolutions (height and width each).
    pub resolutions: Vec<usize>,
    /// Where per-view artifacts and the manifest go; nothing is written when unset.
    pub output_dir: Option<PathBuf>,
    /// Record wall-clock timings in the manifest.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            prompt: String::new(),
            steps: 50,
            schedule: BlendSchedule::default(),
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            output_dir: None,
            timing: true,
        }
    }
}

/// Per-target products of a stage.
#[derive(Debug, Clone)]
pub struct ViewOutput {
    pub id: String,
    pub depth: DepthMap,
    pub field: WarpField,
    pub warped: AttentionBundle,
    pub masks: ResolutionMasks,
    pub result: std::result::Result<EditOutput, ViewError>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewError {
    pub view: String,
    pub stage: Option<usize>,
    pub kind: String,
    pub message: String,
}

impl ViewError {
    fn new(view: &str, stage: Option<usize>, err: &Error) -> Self {
        Self {
            view: view.to_string(),
            stage,
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

/// The source view's edit, captured before any stage runs.
#[derive(Debug, Clone)]
pub struct SourceEdit {
    pub id: String,
    pub output: EditOutput,
}

fn resolution_key((h, w): (usize, usize)) -> String {
    format!("{h}x{w}")
}

fn depth_for(record: &ViewRecord, src_cam: &Camera, geometry: &SceneGeometry) -> Result<DepthMap> {
    match &record.depth {
        DepthSource::Precomputed(d) => Ok(d.clone()),
        DepthSource::Splats => {
            let splats = geometry
                .splats
                .as_ref()
                .ok_or_else(|| Error::config(format!("view {:?} needs splats but none were given", record.id)))?;
            let kept = filter_splats(splats, src_cam, &record.camera, &geometry.filter)?;
            Ok(render_depth(&kept, &record.camera))
        }
    }
}

/// Depth for the source view itself: its precomputed map or an unfiltered render.
fn source_depth(record: &ViewRecord, geometry: &SceneGeometry) -> Option<DepthMap> {
    match &record.depth {
        DepthSource::Precomputed(d) => Some(d.clone()),
        DepthSource::Splats => geometry.splats.as_ref().map(|s| render_depth(s, &record.camera)),
    }
}

/// Edits the source view without guidance and validates its bundle.
pub fn edit_source(
    records: &mut [ViewRecord],
    source_id: &str,
    editor: &mut Editor<'_>,
    geometry: &SceneGeometry,
    opts: &RunOptions,
) -> Result<SourceEdit> {
    check_unique(records)?;
    let idx = records
        .iter()
        .position(|r| r.id == source_id)
        .ok_or_else(|| Error::config(format!("unknown source view {source_id:?}")))?;
    let depth = source_depth(&records[idx], geometry);
    let record = &records[idx];
    let output = editor.edit_one(&EditRequest {
        view_id: &record.id,
        image: &record.image,
        conditioning: depth.as_ref(),
        prompt: &opts.prompt,
        guidance: None,
        steps: opts.steps,
    })?;
    output.bundle.check_resolutions(&opts.resolutions)?;
    records[idx].mark_edited();
    Ok(SourceEdit {
        id: source_id.to_string(),
        output,
    })
}

/// Runs one stage over an explicit target list.
pub fn run_stage(
    records: &mut [ViewRecord],
    source: &SourceEdit,
    targets: &[String],
    stage: usize,
    editor: &mut Editor<'_>,
    geometry: &SceneGeometry,
    opts: &RunOptions,
) -> Result<Vec<ViewOutput>> {
    check_unique(records)?;
    opts.schedule.validate()?;
    let src_idx = records
        .iter()
        .position(|r| r.id == source.id)
        .ok_or_else(|| Error::config(format!("unknown source view {:?}", source.id)))?;
    if !records[src_idx].edited {
        return Err(Error::config("source view must be edited before running a stage"));
    }
    let mut indices = Vec::with_capacity(targets.len());
    for t in targets {
        if *t == source.id {
            return Err(Error::config(format!("source view {t:?} cannot be its own target")));
        }
        let i = records
            .iter()
            .position(|r| r.id == *t)
            .ok_or_else(|| Error::config(format!("unknown target view {t:?}")))?;
        if records[i].edited {
            return Err(Error::config(format!("view {t:?} was already edited")));
        }
        if indices.contains(&i) {
            return Err(Error::config(format!("view {t:?} listed twice")));
        }
        indices.push(i);
    }

    let src_cam = records[src_idx].camera;
    let src_bundle = &source.output.bundle;
    let view_records: &[ViewRecord] = records;

    // geometry for every target, independent of the editor
    let prepared = par::map_indexed(indices.len(), |k| -> Result<(DepthMap, WarpField, AttentionBundle, ResolutionMasks, f64)> {
        let start = Instant::now();
        let rec = &view_records[indices[k]];
        let depth = depth_for(rec, &src_cam, geometry)?;
        let field = compute_warp_field(&depth, &rec.camera, &src_cam)?;
        let (warped, masks) = warp::warp_bundle(src_bundle, &field)?;
        Ok((depth, field, warped, masks, start.elapsed().as_secs_f64() * 1e3))
    });

    let mut outputs = Vec::with_capacity(indices.len());
    let mut requests = Vec::new();
    let mut request_slots = Vec::new();
    let mut geometry_errors = Vec::new();
    let mut ready = Vec::new();
    for (k, p) in prepared.into_iter().enumerate() {
        match p {
            Ok(v) => ready.push((k, v)),
            Err(e) => geometry_errors.push((k, e)),
        }
    }
    for (k, (depth, _, warped, masks, _)) in &ready {
        let rec = &view_records[indices[*k]];
        request_slots.push(*k);
        requests.push(EditRequest {
            view_id: &rec.id,
            image: &rec.image,
            conditioning: Some(depth),
            prompt: &opts.prompt,
            guidance: Some(Guidance {
                bundle: warped,
                masks,
                schedule: opts.schedule,
            }),
            steps: opts.steps,
        });
    }
    let started = Instant::now();
    let results = editor.edit_all(&requests);
    let per_edit_ms = started.elapsed().as_secs_f64() * 1e3 / requests.len().max(1) as f64;
    drop(requests);

    let mut by_slot: BTreeMap<usize, ViewOutput> = BTreeMap::new();
    for ((k, (depth, field, warped, masks, geo_ms)), result) in ready.into_iter().zip(results) {
        let id = &view_records[indices[k]].id;
        let result = result.and_then(|out| {
            out.bundle.check_resolutions(&opts.resolutions)?;
            Ok(out)
        });
        by_slot.insert(
            k,
            ViewOutput {
                id: id.clone(),
                result: result.map_err(|e| ViewError::new(id, Some(stage), &e)),
                depth,
                field,
                warped,
                masks,
                elapsed_ms: geo_ms + per_edit_ms,
            },
        );
    }
    for (k, e) in geometry_errors {
        let rec = &view_records[indices[k]];
        let (w, h) = (rec.camera.width(), rec.camera.height());
        by_slot.insert(
            k,
            ViewOutput {
                id: rec.id.clone(),
                depth: DepthMap::zeros(w, h),
                field: WarpField::from_parts(w, h, w, h, vec![0.0; w * h], vec![0.0; w * h], Mask::zeros(w, h)?)?,
                warped: AttentionBundle::empty(),
                masks: ResolutionMasks::new(),
                result: Err(ViewError::new(&rec.id, Some(stage), &e)),
                elapsed_ms: 0.0,
            },
        );
    }
    outputs.extend(by_slot.into_values());

    for out in &outputs {
        if out.result.is_ok() {
            if let Some(r) = records.iter_mut().find(|r| r.id == out.id) {
                r.mark_edited();
            }
        }
    }
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub index: usize,
    pub views: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSummary {
    pub id: String,
    pub stage: usize,
    pub status: String,
    /// Fraction of valid pixels in the warp mask, keyed `"{h}x{w}"`.
    pub mask_coverage: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub source_ms: f64,
    pub total_ms: f64,
}

/// Run manifest, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub editor: String,
    pub source: String,
    pub seed: u64,
    pub num_stages: usize,
    pub subset_size: usize,
    pub stages: Vec<StageSummary>,
    pub views: Vec<ViewSummary>,
    pub errors: Vec<ViewError>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Full result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct RunResult {
    pub manifest: RunManifest,
    pub source: SourceEdit,
    pub stages: Vec<Vec<ViewOutput>>,
}

/// Executes the source edit followed by `num_stages` sequential stages.
pub fn run_pipeline(
    records: &mut [ViewRecord],
    source_id: &str,
    editor: &mut Editor<'_>,
    cfg: &StageConfig,
    geometry: &SceneGeometry,
    opts: &RunOptions,
    mut hook: Option<(&mut dyn StageHook, &LossSet)>,
) -> Result<RunResult> {
    cfg.validate()?;
    check_unique(records)?;
    if records.iter().any(|r| r.edited) {
        return Err(Error::config("records must start unedited"));
    }
    let t0 = Instant::now();
    let source = edit_source(records, source_id, editor, geometry, opts)?;
    let source_ms = t0.elapsed().as_secs_f64() * 1e3;
    if let Some(dir) = &opts.output_dir {
        let d = dir.join("source");
        std::fs::create_dir_all(&d)?;
        source.output.image.save(d.join("edited.fwt"))?;
        warp::save_bundle(&source.output.bundle, d.join("bundle"))?;
    }

    let mut geometry = geometry.clone();
    let mut stage_summaries = Vec::new();
    let mut view_summaries = Vec::new();
    let mut errors = Vec::new();
    let mut all_outputs = Vec::new();

    for stage in 0..cfg.num_stages {
        let ts = Instant::now();
        let targets = select_subset(records, cfg, stage)?;
        let outputs = run_stage(records, &source, &targets, stage, editor, &geometry, opts)?;
        if let Some(dir) = &opts.output_dir {
            for out in &outputs {
                write_view_output(&dir.join("views").join(&out.id), out)?;
            }
        }
        for out in &outputs {
            view_summaries.push(ViewSummary {
                id: out.id.clone(),
                stage,
                status: if out.result.is_ok() { "edited" } else { "failed" }.to_string(),
                mask_coverage: out.masks.iter().map(|(&k, m)| (resolution_key(k), m.coverage())).collect(),
                elapsed_ms: opts.timing.then_some(out.elapsed_ms),
            });
            if let Err(e) = &out.result {
                errors.push(e.clone());
            }
        }
        if let Some((h, losses)) = hook.as_mut() {
            let edited: Vec<(&str, &Camera, &Image)> = outputs
                .iter()
                .filter_map(|o| {
                    let img = &o.result.as_ref().ok()?.image;
                    let cam = &records.iter().find(|r| r.id == o.id)?.camera;
                    Some((o.id.as_str(), cam, img))
                })
                .collect();
            let ctx = StageContext {
                stage,
                edited,
                splats: geometry.splats.as_ref(),
                losses,
            };
            match h.after_stage(&ctx) {
                Ok(Some(updated)) => geometry.splats = Some(updated),
                Ok(None) => {}
                Err(e) => errors.push(ViewError::new("", Some(stage), &e)),
            }
        }
        stage_summaries.push(StageSummary {
            index: stage,
            views: targets,
            elapsed_ms: opts.timing.then(|| ts.elapsed().as_secs_f64() * 1e3),
        });
        all_outputs.push(outputs);
    }

    let manifest = RunManifest {
        version: 1,
        editor: editor.name().to_string(),
        source: source_id.to_string(),
        seed: cfg.seed,
        num_stages: cfg.num_stages,
        subset_size: cfg.subset_size,
        stages: stage_summaries,
        views: view_summaries,
        errors,
        timing: opts.timing.then(|| Timing {
            source_ms,
            total_ms: t0.elapsed().as_secs_f64() * 1e3,
        }),
    };
    if let Some(dir) = &opts.output_dir {
        std::fs::write(dir.join("manifest.json"), manifest.to_json())?;
    }
    Ok(RunResult {
        manifest,
        source,
        stages: all_outputs,
    })
}

/// Serialises one target's products:
/// `depth.fwt`, `warp_field.fwt` (`[3, H, W]` = u, v, valid),
/// `mask_{h}x{w}.fwt`, `warped_bundle/`, and on success `edited.fwt` + `bundle/`.
pub fn write_view_output(dir: &Path, out: &ViewOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    out.depth.save(dir.join("depth.fwt"))?;
    crate::tensor_io::save(dir.join("warp_field.fwt"), &out.field.to_tensor())?;
    for (&k, m) in &out.masks {
        m.save(dir.join(format!("mask_{}.fwt", resolution_key(k))))?;
    }
    warp::save_bundle(&out.warped, dir.join("warped_bundle"))?;
    if let Ok(edit) = &out.result {
        edit.image.save(dir.join("edited.fwt"))?;
        warp::save_bundle(&edit.bundle, dir.join("bundle"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraExtrinsics, CameraIntrinsics};

    fn records(n: usize) -> Vec<ViewRecord> {
        let k = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        (0..n)
            .map(|i| {
                ViewRecord::new(
                    format!("view_{i:03}"),
                    Camera::new(k, CameraExtrinsics::identity()),
                    Image::zeros(3, 4, 4).unwrap(),
                    DepthSource::Precomputed(DepthMap::from_fn(4, 4, |_, _| 1.0).unwrap()),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn subsets_partition_and_clamp() {
        let mut recs = records(120);
        let cfg = StageConfig {
            seed: 42,
            ..StageConfig::default()
        };
        let mut seen = HashSet::new();
        for stage in 0..3 {
            let s = select_subset(&recs, &cfg, stage).unwrap();
            assert_eq!(s.len(), 40);
            for id in &s {
                assert!(seen.insert(id.clone()));
                recs.iter_mut().find(|r| r.id == *id).unwrap().mark_edited();
            }
        }
        assert_eq!(seen.len(), 120);

        let mut recs = records(50);
        let first = select_subset(&recs, &cfg, 0).unwrap();
        for id in &first {
            recs.iter_mut().find(|r| r.id == *id).unwrap().mark_edited();
        }
        assert_eq!(select_subset(&recs, &cfg, 1).unwrap().len(), 10);
        for r in recs.iter_mut() {
            r.mark_edited();
        }
        assert!(select_subset(&recs, &cfg, 2).unwrap().is_empty());
        assert!(select_subset(&recs, &cfg, 3).is_err());
    }

    #[test]
    fn subset_independent_of_record_order() {
        let recs = records(30);
        let mut rev = recs.clone();
        rev.reverse();
        let cfg = StageConfig {
            seed: 9,
            subset_size: 7,
            num_stages: 1,
        };
        assert_eq!(select_subset(&recs, &cfg, 0).unwrap(), select_subset(&rev, &cfg, 0).unwrap());
    }

    #[test]
    fn view_id_rules() {
        let k = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        let cam = Camera::new(k, CameraExtrinsics::identity());
        let img = Image::zeros(3, 4, 4).unwrap();
        assert!(ViewRecord::new("../x", cam, img.clone(), DepthSource::Splats).is_err());
        assert!(ViewRecord::new("", cam, img.clone(), DepthSource::Splats).is_err());
        assert!(ViewRecord::new("cam-01.a", cam, img.clone(), DepthSource::Splats).is_ok());
        let wrong = Image::zeros(3, 5, 4).unwrap();
        assert!(ViewRecord::new("a", cam, wrong, DepthSource::Splats).is_err());
    }
}
