//! Frame rendering and the batch drivers behind the command-line tool.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corridor::build_shifted_corridor;
use crate::elevation::{build_height_map, query_height, HeightMap, DEFAULT_HEIGHT_RESOLUTION, MAX_LIFT_EDGE};
use crate::error::{Error, Result};
use crate::geometry::{leveled_to_map_2d, Point2, Polygon2, Polygon3};
use crate::mask::Mask;
use crate::metrics::{batch_means, format_csv, weighted_aggregate, OverlapCounts, ScenarioBatch};
use crate::objects::cut_corridor;
use crate::occlusion::occluded_polygons_within;
use crate::oracle::{render_reference, ReferenceSettings};
use crate::projection::{project_polygon, rasterize_mask, TiltState, DEFAULT_Z_NEAR};
use crate::scene::{list_scene_files, HeightSource, SceneFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub resample_step: f64,
    pub max_range: f64,
    /// Degrees.
    pub ahead_angle_threshold: f64,
    pub height_resolution: f64,
    pub z_near: f64,
    pub shift: bool,
    pub objects: bool,
    pub occlusion: bool,
    pub elevation: bool,
    pub tilt: bool,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            resample_step: 0.5,
            max_range: 100.0,
            ahead_angle_threshold: 45.0,
            height_resolution: DEFAULT_HEIGHT_RESOLUTION,
            z_near: DEFAULT_Z_NEAR,
            shift: true,
            objects: true,
            occlusion: true,
            elevation: true,
            tilt: true,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.resample_step, self.max_range, self.height_resolution, self.z_near];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("step, range, height resolution and z_near must be positive".into()));
        }
        if !(self.ahead_angle_threshold > 0.0 && self.ahead_angle_threshold < 90.0) {
            return Err(Error::InvalidParameter("ahead angle threshold must lie in (0°, 90°)".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    pub fn reference_settings(&self) -> ReferenceSettings {
        ReferenceSettings {
            step: self.resample_step,
            max_range: self.max_range,
            ahead_threshold: self.ahead_angle_threshold.to_radians(),
            z_near: self.z_near,
            shift: self.shift,
            objects: self.objects,
            occlusion: self.occlusion,
            elevation: self.elevation,
            tilt: self.tilt,
        }
    }
}

/// Wall time spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub corridor: Duration,
    pub objects: Duration,
    pub occlusion: Duration,
    pub elevation: Duration,
    pub projection: Duration,
    pub raster: Duration,
}

impl std::ops::AddAssign for StageTimings {
    fn add_assign(&mut self, o: Self) {
        self.corridor += o.corridor;
        self.objects += o.objects;
        self.occlusion += o.occlusion;
        self.elevation += o.elevation;
        self.projection += o.projection;
        self.raster += o.raster;
    }
}

fn lap(t: &mut Instant) -> Duration {
    let now = Instant::now();
    let d = now - *t;
    *t = now;
    d
}

/// Image-space polygons of one frame: the visible corridor and the hidden
/// cells to stamp out of it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FramePolygons {
    pub add: Vec<Vec<Point2>>,
    pub subtract: Vec<Vec<Point2>>,
}

/// Renders one frame. `terrain` is the frame's height map, if any.
pub fn render_frame(scene: &SceneFrame, terrain: Option<&HeightMap>, cfg: &PipelineConfig) -> Result<(Mask, StageTimings)> {
    let (polys, mut timings) = project_frame(scene, terrain, cfg)?;
    let clock = Instant::now();
    let mask = rasterize_mask(&polys.add, &polys.subtract, &scene.camera.intrinsics);
    timings.raster = clock.elapsed();
    Ok((mask, timings))
}

/// Every stage up to and including projection.
pub fn project_frame(scene: &SceneFrame, terrain: Option<&HeightMap>, cfg: &PipelineConfig) -> Result<(FramePolygons, StageTimings)> {
    let mut timings = StageTimings::default();
    let mut clock = Instant::now();
    let tilt = if cfg.tilt { scene.tilt } else { TiltState::default() };
    let ego = scene.ego;

    let shift = cfg.shift.then_some(&scene.shift);
    let corridor = build_shifted_corridor(&scene.bounds, shift, cfg.resample_step, cfg.max_range)?.to_leveled(&ego)?;
    timings.corridor = lap(&mut clock);

    let region = if cfg.objects {
        cut_corridor(&corridor, &scene.objects, Point2::new(0.0, 0.0), cfg.ahead_angle_threshold.to_radians())
    } else {
        Some(corridor.polygon.clone())
    };
    timings.objects = lap(&mut clock);
    let Some(region) = region else {
        return Ok((FramePolygons::default(), timings));
    };

    let hidden = match (&scene.grid, cfg.occlusion) {
        (Some(grid), true) => occluded_polygons_within(grid, scene.camera.ground_position(&tilt), &region)?,
        _ => Vec::new(),
    };
    timings.occlusion = lap(&mut clock);

    let ground = terrain.filter(|_| cfg.elevation);
    let lift = |poly: &Polygon2| -> Polygon3 {
        let dense = poly.densified(MAX_LIFT_EDGE);
        let vertices = dense
            .vertices()
            .iter()
            .map(|&p| {
                let z = ground.map_or(0.0, |map| {
                    query_height(map, leveled_to_map_2d(&ego, p), ego.position.z) - ego.position.z
                });
                p.with_z(z)
            })
            .collect();
        Polygon3 { vertices }
    };
    let lifted_region = lift(&region);
    let lifted_hidden: Vec<Polygon3> = hidden.iter().map(lift).collect();
    timings.elevation = lap(&mut clock);

    let project = |p: &Polygon3| project_polygon(&p.vertices, &scene.camera, &tilt, cfg.z_near);
    let add: Vec<Vec<Point2>> = project(&lifted_region).into_iter().collect();
    let subtract: Vec<Vec<Point2>> = lifted_hidden.iter().filter_map(project).collect();
    timings.projection = lap(&mut clock);
    Ok((FramePolygons { add, subtract }, timings))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFailure {
    pub frame_id: String,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub processed: usize,
    pub failed: Vec<FrameFailure>,
    pub wall_time: Duration,
    pub stage_timings: StageTimings,
    pub outputs: Vec<PathBuf>,
}

/// Height maps for a batch of frames. Map files are loaded once and shared;
/// `shared` overrides every frame's own height data.
#[derive(Debug, Default)]
pub struct TerrainCache {
    shared: Option<HeightMap>,
    files: HashMap<PathBuf, HeightMap>,
}

impl TerrainCache {
    pub fn prepare(scenes: &[SceneFrame], shared: Option<HeightMap>) -> Result<Self> {
        let mut files = HashMap::new();
        if shared.is_none() {
            for s in scenes {
                if let HeightSource::MapFile(p) = &s.height {
                    if !files.contains_key(p) {
                        files.insert(p.clone(), HeightMap::load(p)?);
                    }
                }
            }
        }
        Ok(Self { shared, files })
    }

    /// The frame's map; sample lists are stitched on demand.
    pub fn resolve(&self, scene: &SceneFrame, resolution: f64) -> Result<Option<std::borrow::Cow<'_, HeightMap>>> {
        use std::borrow::Cow;
        if let Some(m) = &self.shared {
            return Ok(Some(Cow::Borrowed(m)));
        }
        Ok(match &scene.height {
            HeightSource::Flat => None,
            HeightSource::Samples(s) => Some(Cow::Owned(build_height_map(s, resolution)?)),
            HeightSource::MapFile(p) => Some(Cow::Borrowed(&self.files[p])),
        })
    }
}

/// Loads every scene in `dir`; any schema error aborts.
pub fn load_scenes(dir: &Path) -> Result<Vec<SceneFrame>> {
    list_scene_files(dir)?.iter().map(|p| SceneFrame::load(p)).collect()
}

pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

type Renderer<'a> = dyn Fn(&SceneFrame, Option<&HeightMap>) -> Result<(Mask, StageTimings)> + Sync + 'a;

fn run_batch(scenes: &[SceneFrame], cache: &TerrainCache, cfg: &PipelineConfig, out_dir: &Path, render: &Renderer) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let results: Vec<Result<(PathBuf, StageTimings)>> = with_workers(cfg.workers, || {
        scenes
            .par_iter()
            .map(|scene| {
                let terrain = cache.resolve(scene, cfg.height_resolution)?;
                let (mask, t) = render(scene, terrain.as_deref())?;
                let path = out_dir.join(format!("{}.pgm", scene.frame_id));
                mask.write_pgm(&path)?;
                Ok((path, t))
            })
            .collect()
    })?;
    let mut report = RunReport::default();
    for (scene, r) in scenes.iter().zip(results) {
        match r {
            Ok((path, t)) => {
                report.processed += 1;
                report.stage_timings += t;
                report.outputs.push(path);
            }
            Err(e) => report.failed.push(FrameFailure {
                frame_id: scene.frame_id.clone(),
                kind: e.kind(),
                message: e.to_string(),
            }),
        }
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Renders in-memory scenes into `<out_dir>/<frame_id>.pgm`.
pub fn generate_scenes(scenes: &[SceneFrame], cache: &TerrainCache, cfg: &PipelineConfig, out_dir: &Path) -> Result<RunReport> {
    run_batch(scenes, cache, cfg, out_dir, &|s, t| render_frame(s, t, cfg))
}

pub fn generate(scene_dir: &Path, cfg: &PipelineConfig, out_dir: &Path, shared_map: Option<HeightMap>) -> Result<RunReport> {
    cfg.validate()?;
    let scenes = load_scenes(scene_dir)?;
    let cache = TerrainCache::prepare(&scenes, shared_map)?;
    generate_scenes(&scenes, &cache, cfg, out_dir)
}

/// Same as [`generate`], through the reference renderer.
pub fn run_oracle(scene_dir: &Path, cfg: &PipelineConfig, out_dir: &Path, shared_map: Option<HeightMap>) -> Result<RunReport> {
    cfg.validate()?;
    let scenes = load_scenes(scene_dir)?;
    let cache = TerrainCache::prepare(&scenes, shared_map)?;
    let settings = cfg.reference_settings();
    run_batch(&scenes, &cache, cfg, out_dir, &|s, t| Ok((render_reference(s, t, &settings), StageTimings::default())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<ScenarioBatch>,
    pub weighted: ScenarioBatch,
    pub csv: String,
    /// Frame ids present in only one directory.
    pub skipped: Vec<String>,
}

fn mask_ids(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "pgm") {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_owned(), p);
            }
        }
    }
    Ok(out)
}

/// Reads a `{frame_id: scenario}` JSON object.
pub fn load_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Pairs masks by frame id, scores them, and builds one row per scenario.
/// Frames of a scenario are split in id order into batches of `batch_size`;
/// the row count is the number of batches and the row values are means of
/// batch means. Frames missing from the manifest go to `unlabeled`.
pub fn evaluate(dir_a: &Path, dir_b: &Path, batch_size: usize, manifest: Option<&BTreeMap<String, String>>, workers: usize) -> Result<Evaluation> {
    let (a, b) = (mask_ids(dir_a)?, mask_ids(dir_b)?);
    let skipped: Vec<String> = a.keys().filter(|k| !b.contains_key(*k)).chain(b.keys().filter(|k| !a.contains_key(*k))).cloned().collect();
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = a.iter().filter_map(|(k, pa)| b.get(k).map(|pb| (k, pa, pb))).collect();
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let scores: Vec<(f64, f64)> = with_workers(workers, || {
        pairs
            .par_iter()
            .map(|(_, pa, pb)| {
                let c = OverlapCounts::from_masks(&Mask::read_pgm(pa)?, &Mask::read_pgm(pb)?)?;
                Ok((c.dice(), c.jaccard()))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut groups: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for ((id, _, _), s) in pairs.iter().zip(scores) {
        let name = manifest.and_then(|m| m.get(*id)).map_or("unlabeled", String::as_str);
        groups.entry(name).or_default().push(s);
    }
    let rows = groups
        .into_iter()
        .map(|(name, s)| {
            let r = batch_means(&s, batch_size)?;
            Ok(ScenarioBatch::new(name, r.batches.len(), r.dice, r.jaccard))
        })
        .collect::<Result<Vec<_>>>()?;
    let weighted = weighted_aggregate(&rows)?;
    let csv = format_csv(&rows, &weighted);
    Ok(Evaluation { rows, weighted, csv, skipped })
}
