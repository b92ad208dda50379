//! End-to-end orchestration: dataset simulation, the staged
//! pre-process → detect → track → refine pipeline, evaluation and run
//! comparison.
//!
//! Stateless per-frame work (scanning, fusion, pre-processing, detection) runs
//! frame-parallel in batches; results are consumed in frame order, so outputs
//! do not depend on the thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Family, Mode, RunConfig};
use crate::detector::detect_and_filter;
use crate::error::{Error, Result};
use crate::eval::{evaluate, CoverageMaps, EvalParams, EvalReport, HeatMap};
use crate::fusion::{fuse, intensity_max, preprocess, RoiSpec, DEFAULT_SYNC_TOLERANCE};
use crate::geometry::{count_in_box, transform_points, PointCloudFrame, Pose, FUSED_SENSOR_ID};
use crate::io::{self, Dataset, DatasetManifest, SensorEntry, TrackRow};
use crate::noise::{perturb_points, perturb_pose, NoiseSpec};
use crate::refine::{refine, RefineParams, Trajectory, TrajectoryFrame};
use crate::sim::{build_scenario, export_gt, step_actors, time_of, GroundTruthRecord, Scanner, Scene, ScenarioConfig, Surface};
use crate::tracker::Tracker;
use crate::{Detection, ObjectClass};

/// Frames handled per parallel batch.
const BATCH: usize = 16;

/// Pipeline stages that can be (re)started from staged inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Preprocess,
    Detect,
    Track,
    Refine,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Detect => "detect",
            Stage::Track => "track",
            Stage::Refine => "refine",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Stage::Preprocess, Stage::Detect, Stage::Track, Stage::Refine]
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown stage `{s}` (expected preprocess, detect, track or refine)")))
    }
}

/// One sensor's cloud in its own frame and the pose used to place it in the world.
pub type SensorFrame = (PointCloudFrame<f64>, Pose<f64>);

/// A simulated recording: scene, scanners and noise model.
pub struct Simulation {
    pub scene: Scene,
    scanners: Vec<Scanner>,
    pub noise: NoiseSpec,
    frame_count: u64,
}

impl Simulation {
    pub fn new(scenario: &ScenarioConfig, noise: &NoiseSpec) -> Result<Self> {
        noise.validate()?;
        let scene = build_scenario(scenario)?;
        let scanners = scene.sensors.iter().map(|s| Scanner::new(&scene, s)).collect();
        Ok(Self { scene, scanners, noise: *noise, frame_count: scenario.frame_count() })
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn rate(&self) -> f64 {
        self.scene.rate
    }

    pub fn sensor_ids(&self) -> Vec<u32> {
        self.scanners.iter().map(|s| s.sensor().id).collect()
    }

    /// Pose handed to fusion for `sensor` at `frame` (perturbed when noisy).
    pub fn fusion_pose(&self, sensor: u32, frame: u64) -> Option<Pose<f64>> {
        self.scanners
            .iter()
            .find(|s| s.sensor().id == sensor)
            .map(|s| perturb_pose(&s.sensor().pose, &self.noise, sensor, frame))
    }

    /// Noisy sensor-frame clouds of every sensor at `frame`, with fusion poses.
    pub fn scan(&self, frame: u64) -> Vec<SensorFrame> {
        let t = time_of(self.rate(), frame);
        self.scanners
            .iter()
            .map(|sc| {
                let mut f = sc.scan(&self.scene, t);
                f.frame_index = frame;
                f.timestamp = t;
                let id = sc.sensor().id;
                (perturb_points(&f, &self.noise), perturb_pose(&sc.sensor().pose, &self.noise, id, frame))
            })
            .collect()
    }

    pub fn ground_truth(&self, frame: u64) -> Vec<GroundTruthRecord> {
        step_actors(&self.scene, time_of(self.rate(), frame))
    }
}

/// Upper bound of the simulated raw intensity, used when no calibration pass
/// over a stored dataset is available.
pub fn simulated_intensity_max() -> f64 {
    ObjectClass::ALL
        .iter()
        .map(|&c| Surface::Actor(c).reflectance())
        .chain([Surface::Ground.reflectance(), Surface::Building.reflectance()])
        .fold(0.0, f64::max)
}

/// The world-frame cloud a run works on: all sensors fused, or one sensor
/// transformed by its pose.
pub fn world_frame(inputs: &[SensorFrame], mode: Mode, sensor: u32) -> Result<PointCloudFrame<f64>> {
    match mode {
        Mode::Fused => fuse(inputs, DEFAULT_SYNC_TOLERANCE),
        Mode::Single => {
            let (frame, pose) = inputs
                .iter()
                .find(|(f, _)| f.sensor_id == sensor)
                .ok_or_else(|| Error::validation(format!("sensor {sensor} is not part of the recording")))?;
            transform_points(pose, frame)
        }
    }
}

/// Outputs of one processed stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub detections: Vec<Detection>,
    pub tracks: Vec<TrackRow>,
    /// Points inside each reported track box, keyed by (frame, track id).
    pub points_in_box: BTreeMap<(u64, u64), usize>,
    pub trajectories: Vec<Trajectory<f64>>,
}

impl RunOutput {
    pub fn mot_objects(&self) -> Vec<crate::eval::MotObject> {
        self.tracks.iter().map(TrackRow::to_mot).collect()
    }
}

/// Pre-processing, detection and tracking of one stream of world-frame clouds.
pub struct StreamProcessor {
    roi: RoiSpec,
    detector: crate::detector::DetectorParams,
    refine: RefineParams,
    seed: u64,
    intensity_max: f64,
    rate: f64,
    tracker: Tracker<f64>,
    out: RunOutput,
}

impl StreamProcessor {
    pub fn new(cfg: &RunConfig, intensity_max: f64, rate: f64) -> Result<Self> {
        let tracker = Tracker::new(crate::tracker::TrackerParams { rate, ..cfg.tracker.clone() })?;
        Ok(Self {
            roi: cfg.roi,
            detector: cfg.detector.clone(),
            refine: cfg.refine,
            seed: cfg.seed,
            intensity_max,
            rate,
            tracker,
            out: RunOutput::default(),
        })
    }

    pub fn preprocess(&self, world: &PointCloudFrame<f64>) -> Result<PointCloudFrame<f64>> {
        preprocess(world, &self.roi, self.seed, self.intensity_max).map_err(|e| e.in_stage("preprocess", world.frame_index))
    }

    pub fn detect(&self, cloud: &PointCloudFrame<f64>) -> Vec<Detection> {
        detect_and_filter(cloud, &self.roi, &self.detector)
    }

    /// Tracks one frame's detections. `cloud` (the pre-processed frame) is
    /// used to count the points inside each reported box.
    pub fn track(&mut self, frame: u64, dets: Vec<Detection>, cloud: Option<&PointCloudFrame<f64>>) -> Result<()> {
        let states = self.tracker.step(frame, &dets).map_err(|e| e.in_stage("track", frame))?;
        for s in &states {
            let row = TrackRow::from_state(s);
            let n = cloud.map_or(0, |c| count_in_box(&c.points, &row.bbox));
            self.out.points_in_box.insert((frame, row.track_id), n);
            self.out.tracks.push(row);
        }
        self.out.detections.extend(dets);
        Ok(())
    }

    /// Full per-frame chain on a world-frame cloud.
    pub fn push(&mut self, world: &PointCloudFrame<f64>) -> Result<()> {
        let pre = self.preprocess(world)?;
        let dets = self.detect(&pre);
        self.track(world.frame_index, dets, Some(&pre))
    }

    /// Builds and refines the trajectories.
    pub fn finish(mut self) -> Result<RunOutput> {
        let raw = build_trajectories(&self.out.tracks, &self.out.points_in_box, self.rate)?;
        self.out.trajectories = raw.iter().map(|t| refine(t, &self.refine)).collect();
        Ok(self.out)
    }
}

/// Groups per-frame track rows into trajectories.
pub fn build_trajectories(rows: &[TrackRow], counts: &BTreeMap<(u64, u64), usize>, rate: f64) -> Result<Vec<Trajectory<f64>>> {
    let mut by_id: BTreeMap<u64, (ObjectClass, Vec<TrajectoryFrame<f64>>)> = BTreeMap::new();
    for r in rows {
        let entry = by_id.entry(r.track_id).or_insert((r.class, Vec::new()));
        entry.1.push(TrajectoryFrame {
            frame_index: r.frame_index,
            t: time_of(rate, r.frame_index),
            position: r.bbox.center,
            velocity: r.velocity,
            acceleration: crate::Vec3::zeros(),
            yaw: r.bbox.yaw,
            dims: r.bbox.dims(),
            points_in_box: counts.get(&(r.frame_index, r.track_id)).copied().unwrap_or(0),
        });
    }
    by_id
        .into_iter()
        .map(|(id, (class, frames))| Trajectory::new(id, class, frames))
        .collect()
}

fn short_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())[..8].to_string()
}

/// Default dataset directory: `<output_dir>/<family>-data-<hash8>`.
pub fn dataset_dir(cfg: &RunConfig) -> PathBuf {
    let scenario = serde_json::to_vec(&cfg.scenario).expect("scenario serializes");
    let noise = serde_json::to_vec(&cfg.noise).expect("noise serializes");
    cfg.output_dir
        .join(format!("{}-data-{}", cfg.variant.family.tag(), short_hash(&[&scenario, &noise])))
}

/// Simulates the configured scenario and writes per-sensor frames, ground
/// truth and the manifest into `out` (default [`dataset_dir`]). Returns the
/// manifest path.
pub fn simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<(PathBuf, DatasetManifest)> {
    if cfg.variant.family == Family::R {
        return Err(Error::validation("variant r denotes recorded data; it cannot be simulated"));
    }
    cfg.validate()?;
    let dir = out.map_or_else(|| dataset_dir(cfg), Path::to_path_buf);
    let sim = Simulation::new(&cfg.scenario, &cfg.noise)?;
    let ids = sim.sensor_ids();
    let n = sim.frame_count();
    let mut imax = 0.0f64;
    let frames: Vec<u64> = (0..n).collect();
    for batch in frames.chunks(BATCH) {
        let written: Vec<Result<f64>> = batch
            .par_iter()
            .map(|&f| {
                let scans = sim.scan(f);
                for (cloud, _) in &scans {
                    io::write_frame(&dir.join("frames").join(io::frame_file_name(cloud.sensor_id, f)), cloud)?;
                }
                Ok(intensity_max(scans.iter().map(|(c, _)| c)))
            })
            .collect();
        for w in written {
            imax = imax.max(w?);
        }
    }
    io::write_gt(&dir.join("gt.csv"), &export_gt(&sim.scene, 0..n))?;
    let sensors = ids
        .iter()
        .map(|&id| SensorEntry {
            id,
            pose: sim.fusion_pose(id, 0).expect("sensor exists"),
            true_pose: sim.scene.sensor(id).map(|s| s.pose),
            frame_poses: if cfg.noise.per_frame_pose {
                (0..n).map(|f| sim.fusion_pose(id, f).expect("sensor exists")).collect()
            } else {
                Vec::new()
            },
            frames: (0..n).map(|f| format!("frames/{}", io::frame_file_name(id, f))).collect(),
        })
        .collect();
    let manifest = DatasetManifest {
        variant: cfg.variant.family.tag().to_string(),
        layout: Some(cfg.scenario.layout),
        rate: cfg.scenario.rate,
        frame_count: n,
        intensity_max: imax,
        roi: cfg.roi,
        noise: cfg.variant.family.is_noisy().then_some(cfg.noise),
        gt: Some("gt.csv".into()),
        sensors,
    };
    let path = dir.join("manifest.json");
    io::write_json(&path, &manifest)?;
    Ok((path, manifest))
}

/// Provenance record written next to the artifacts of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub variant: String,
    pub mode: Mode,
    /// Sensor processed in single mode.
    pub sensor: Option<u32>,
    pub rate: f64,
    pub frame_count: u64,
    /// Hash of the resolved configuration.
    pub config_hash: String,
    /// Hash of the manifest the run consumed.
    pub dataset_hash: String,
    pub config: RunConfig,
}

/// Paths of a finished pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub detections: PathBuf,
    pub tracks: PathBuf,
    pub refined: PathBuf,
    pub dims: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            detections: dir.join("detect").join("detections.csv"),
            tracks: dir.join("track").join("tracks.csv"),
            refined: dir.join("refine").join("refined.csv"),
            dims: dir.join("refine").join("dims.csv"),
        }
    }

    pub fn preprocess_dir(&self) -> PathBuf {
        self.dir.join("preprocess")
    }

    pub fn counts(&self) -> PathBuf {
        self.dir.join("track").join("points_in_box.csv")
    }

    pub fn info(&self) -> PathBuf {
        self.dir.join("run.json")
    }
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    frame: u64,
    track_id: u64,
    points: usize,
}

/// Runs the pipeline on a dataset, starting at `from` (earlier stages are
/// read from the run directory). Output goes to
/// `<out_root>/<variant>[-s<id>]-<hash8>`, with `out_root` defaulting to the
/// configured output directory.
pub fn run_pipeline(manifest_path: &Path, cfg: &RunConfig, from: Stage, out_root: Option<&Path>) -> Result<RunArtifacts> {
    cfg.validate()?;
    let ds = Dataset::load(manifest_path)?;
    let m = &ds.manifest;
    if m.variant != cfg.variant.family.tag() {
        return Err(Error::validation(format!(
            "dataset family `{}` does not match variant {}",
            m.variant, cfg.variant
        )));
    }
    let mode = cfg.variant.mode;
    let sensor = match mode {
        Mode::Fused => None,
        Mode::Single => Some(match cfg.sensor {
            Some(id) if m.sensor(id).is_some() => id,
            Some(id) => return Err(Error::validation(format!("sensor {id} is not in the manifest"))),
            None => m
                .sensors
                .iter()
                .map(|s| s.id)
                .min()
                .ok_or_else(|| Error::validation("manifest lists no sensors"))?,
        }),
    };
    if mode == Mode::Fused && m.sensors.is_empty() && m.frame_count > 0 {
        return Err(Error::validation("manifest lists no sensors"));
    }

    let manifest_bytes = std::fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let dataset_hash = short_hash(&[&manifest_bytes]);
    let config_hash = cfg.hash();
    let hash8 = short_hash(&[config_hash.as_bytes(), dataset_hash.as_bytes()]);
    let name = match sensor {
        Some(id) => format!("{}-s{id}-{hash8}", cfg.variant),
        None => format!("{}-{hash8}", cfg.variant),
    };
    let root = out_root.unwrap_or(&cfg.output_dir);
    let art = RunArtifacts::in_dir(&root.join(name));
    io::write_json(
        &art.info(),
        &RunInfo {
            variant: cfg.variant.to_string(),
            mode,
            sensor,
            rate: m.rate,
            frame_count: m.frame_count,
            config_hash,
            dataset_hash,
            config: cfg.clone(),
        },
    )?;

    let mut proc = StreamProcessor::new(cfg, m.intensity_max, m.rate)?;
    let stream_id = sensor.unwrap_or(FUSED_SENSOR_ID);
    let staged_cloud = |f: u64| art.preprocess_dir().join(io::frame_file_name(stream_id, f));
    let frames: Vec<u64> = (0..m.frame_count).collect();
    match from {
        Stage::Preprocess | Stage::Detect => {
            if from == Stage::Detect && !cfg.write_frames {
                return Err(Error::validation("restarting at detect needs staged frames (write_frames = true)"));
            }
            for batch in frames.chunks(BATCH) {
                let results: Vec<Result<(PointCloudFrame<f64>, Vec<Detection>)>> = batch
                    .par_iter()
                    .map(|&f| {
                        let pre = if from == Stage::Preprocess {
                            let world = load_world_frame(&ds, mode, sensor, f)?;
                            let pre = proc.preprocess(&world)?;
                            if cfg.write_frames {
                                io::write_frame(&staged_cloud(f), &pre).map_err(|e| e.in_stage("preprocess", f))?;
                            }
                            pre
                        } else {
                            io::read_frame(&staged_cloud(f), stream_id, f, ds.timestamp(f)).map_err(|e| e.in_stage("detect", f))?
                        };
                        let dets = proc.detect(&pre);
                        Ok((pre, dets))
                    })
                    .collect();
                for (&f, r) in batch.iter().zip(results) {
                    let (pre, dets) = r?;
                    proc.track(f, dets, Some(&pre))?;
                }
            }
            io::write_detections(&art.detections, &proc.out.detections).map_err(|e| e.in_stage("detect", 0))?;
        }
        Stage::Track => {
            let dets = io::read_detections(&art.detections).map_err(|e| e.in_stage("track", 0))?;
            let mut by_frame: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
            for d in dets {
                by_frame.entry(d.frame_index).or_default().push(d);
            }
            if let Some((&f, _)) = by_frame.range(m.frame_count..).next() {
                return Err(Error::validation(format!("detection frame {f} is beyond the recording")).in_stage("track", f));
            }
            for f in frames {
                let cloud = staged_cloud(f);
                let pre = if cloud.is_file() { Some(io::read_frame(&cloud, stream_id, f, ds.timestamp(f))?) } else { None };
                proc.track(f, by_frame.remove(&f).unwrap_or_default(), pre.as_ref())?;
            }
        }
        Stage::Refine => {
            proc.out.tracks = io::read_tracks(&art.tracks).map_err(|e| e.in_stage("refine", 0))?;
            let counts: Vec<(u64, CountRow)> = read_counts(&art.counts()).map_err(|e| e.in_stage("refine", 0))?;
            proc.out.points_in_box = counts.into_iter().map(|(_, r)| ((r.frame, r.track_id), r.points)).collect();
        }
    }
    if from <= Stage::Track {
        io::write_tracks(&art.tracks, &proc.out.tracks).map_err(|e| e.in_stage("track", 0))?;
        let rows = proc.out.points_in_box.iter().map(|(&(frame, track_id), &points)| CountRow { frame, track_id, points });
        write_counts(&art.counts(), rows).map_err(|e| e.in_stage("track", 0))?;
    }
    let out = proc.finish().map_err(|e| e.in_stage("refine", 0))?;
    io::write_refined(&art.refined, &out.trajectories).map_err(|e| e.in_stage("refine", 0))?;
    io::write_dims(&art.dims, &out.trajectories).map_err(|e| e.in_stage("refine", 0))?;
    Ok(art)
}

const COUNT_HEADER: [&str; 3] = ["frame", "track_id", "points"];

fn write_counts(path: &Path, rows: impl Iterator<Item = CountRow>) -> Result<()> {
    let mut text = COUNT_HEADER.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r.frame, r.track_id, r.points));
    }
    io::write_text(path, &text)
}

fn read_counts(path: &Path) -> Result<Vec<(u64, CountRow)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == COUNT_HEADER.join(",") => {}
        _ => return Err(Error::Parse { path: path.to_path_buf(), line: 1, msg: "unexpected header".into() }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i as u64 + 1;
            let bad = || Error::Parse { path: path.to_path_buf(), line, msg: format!("malformed row `{l}`") };
            let mut it = l.split(',').map(str::trim);
            let mut next = || it.next().ok_or_else(bad);
            let row = CountRow {
                frame: next()?.parse().map_err(|_| bad())?,
                track_id: next()?.parse().map_err(|_| bad())?,
                points: next()?.parse().map_err(|_| bad())?,
            };
            Ok((line, row))
        })
        .collect()
}

fn load_world_frame(ds: &Dataset, mode: Mode, sensor: Option<u32>, f: u64) -> Result<PointCloudFrame<f64>> {
    let pose_of = |s: &SensorEntry| s.frame_poses.get(f as usize).copied().unwrap_or(s.pose);
    let wrap = |e: Error| e.in_stage(if mode == Mode::Fused { "fuse" } else { "load" }, f);
    let inputs: Vec<SensorFrame> = ds
        .manifest
        .sensors
        .iter()
        .filter(|s| sensor.is_none_or(|id| id == s.id))
        .map(|s| Ok((ds.read_frame(s.id, f)?, pose_of(s))))
        .collect::<Result<_>>()
        .map_err(wrap)?;
    world_frame(&inputs, mode, sensor.unwrap_or(FUSED_SENSOR_ID)).map_err(wrap)
}

/// Inputs of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInputs {
    pub gt: PathBuf,
    pub tracks: PathBuf,
    pub refined: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    /// Directory of pre-processed frames, used for the heat maps.
    pub frames: Option<PathBuf>,
    /// Stream id of the staged frames (0 for fused).
    pub stream_id: u32,
    pub rate: f64,
}

impl EvalInputs {
    /// Inputs taken from a pipeline run directory.
    pub fn from_run(dir: &Path, gt: &Path) -> Result<Self> {
        let art = RunArtifacts::in_dir(dir);
        let info: RunInfo = io::read_json(&art.info())?;
        let frames = art.preprocess_dir();
        Ok(Self {
            gt: gt.to_path_buf(),
            tracks: art.tracks.clone(),
            refined: Some(art.refined.clone()),
            detections: Some(art.detections.clone()),
            frames: frames.is_dir().then_some(frames),
            stream_id: info.sensor.unwrap_or(FUSED_SENSOR_ID),
            rate: info.rate,
        })
    }
}

/// Frame indices of `hyp` that fall outside the GT frame range.
pub fn misaligned_frames(hyp: impl IntoIterator<Item = u64>, gt: &[GroundTruthRecord]) -> Vec<u64> {
    let lo = gt.iter().map(|g| g.frame_index).min();
    let hi = gt.iter().map(|g| g.frame_index).max();
    let mut bad: Vec<u64> = hyp
        .into_iter()
        .filter(|&f| lo.zip(hi).is_none_or(|(lo, hi)| f < lo || f > hi))
        .collect();
    bad.sort_unstable();
    bad.dedup();
    bad
}

fn alignment_error(what: &str, bad: &[u64]) -> Error {
    let shown: Vec<String> = bad.iter().take(20).map(u64::to_string).collect();
    let more = if bad.len() > 20 { format!(" (+{} more)", bad.len() - 20) } else { String::new() };
    Error::validation(format!("{what} frames outside the ground-truth range: {}{more}", shown.join(", ")))
}

/// Heat-map grids written by an evaluation, keyed by file stem.
pub fn heatmaps(maps: &CoverageMaps) -> [(&'static str, &HeatMap); 4] {
    [("points", &maps.points), ("width", &maps.width), ("length", &maps.length), ("height", &maps.height)]
}

/// Evaluates a run and writes `report.json` plus `heatmap_<name>.csv` grids
/// (when pre-processed frames are available) into `out`.
pub fn evaluate_run(inputs: &EvalInputs, params: &EvalParams, out: &Path) -> Result<EvalReport> {
    let gt = io::read_gt(&inputs.gt)?;
    let tracks = io::read_tracks(&inputs.tracks)?;
    let bad = misaligned_frames(tracks.iter().map(|t| t.frame_index), &gt);
    if !bad.is_empty() {
        return Err(alignment_error("track", &bad));
    }
    let detections = inputs.detections.as_deref().map(io::read_detections).transpose()?;
    if let Some(d) = &detections {
        let bad = misaligned_frames(d.iter().map(|d| d.frame_index), &gt);
        if !bad.is_empty() {
            return Err(alignment_error("detection", &bad));
        }
    }
    let trajectories = match &inputs.refined {
        Some(p) => io::read_refined(p, inputs.rate)?,
        None => Vec::new(),
    };
    let mot: Vec<_> = tracks.iter().map(TrackRow::to_mot).collect();
    let report = evaluate(detections.as_deref(), &mot, &trajectories, &gt, params)?;
    io::write_json(&out.join("report.json"), &report)?;

    if let Some(dir) = &inputs.frames {
        let mut maps = CoverageMaps::new(&params.grid)?;
        let mut by_frame: BTreeMap<u64, Vec<&GroundTruthRecord>> = BTreeMap::new();
        for g in &gt {
            by_frame.entry(g.frame_index).or_default().push(g);
        }
        let missing: Vec<u64> = by_frame
            .keys()
            .copied()
            .filter(|&f| !dir.join(io::frame_file_name(inputs.stream_id, f)).is_file())
            .collect();
        if !missing.is_empty() {
            return Err(alignment_error("ground-truth", &missing).in_stage("evaluate", missing[0]));
        }
        for (f, records) in by_frame {
            let cloud = io::read_frame(&dir.join(io::frame_file_name(inputs.stream_id, f)), inputs.stream_id, f, time_of(inputs.rate, f))?;
            maps.add_frame(records, &cloud);
        }
        for (name, map) in heatmaps(&maps) {
            io::write_text(&out.join(format!("heatmap_{name}.csv")), &map.to_csv())?;
        }
    }
    Ok(report)
}

/// Per-stream results of an in-memory experiment.
#[derive(Debug, Clone)]
pub struct StreamResult {
    pub output: RunOutput,
    pub report: EvalReport,
    pub coverage: CoverageMaps,
}

/// Fused and single-sensor runs over one simulated recording.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub gt: Vec<GroundTruthRecord>,
    pub fused: StreamResult,
    pub singles: BTreeMap<u32, StreamResult>,
}

/// Simulates the configured scenario once and feeds every frame to a fused
/// stream and to one single-sensor stream per sensor, without touching the
/// disk. Each stream is evaluated against the ground truth.
pub fn run_experiment(cfg: &RunConfig) -> Result<Experiment> {
    cfg.validate()?;
    let sim = Simulation::new(&cfg.scenario, &cfg.noise)?;
    let ids = sim.sensor_ids();
    let imax = simulated_intensity_max();
    let rate = sim.rate();
    let new_stream = || -> Result<(StreamProcessor, CoverageMaps)> {
        Ok((StreamProcessor::new(cfg, imax, rate)?, CoverageMaps::new(&cfg.eval.grid)?))
    };
    let mut fused = new_stream()?;
    let mut singles: BTreeMap<u32, (StreamProcessor, CoverageMaps)> =
        ids.iter().map(|&id| Ok((id, new_stream()?))).collect::<Result<_>>()?;
    let mut gt = Vec::new();
    let frames: Vec<u64> = (0..sim.frame_count()).collect();

    type FrameWork = (Vec<GroundTruthRecord>, Vec<(u32, PointCloudFrame<f64>, Vec<Detection>)>);
    for batch in frames.chunks(BATCH) {
        let results: Vec<Result<FrameWork>> = batch
            .par_iter()
            .map(|&f| {
                let scans = sim.scan(f);
                let mut streams = Vec::with_capacity(ids.len() + 1);
                for (key, mode) in std::iter::once((FUSED_SENSOR_ID, Mode::Fused)).chain(ids.iter().map(|&id| (id, Mode::Single))) {
                    let world = world_frame(&scans, mode, key)?;
                    let proc = if mode == Mode::Fused { &fused.0 } else { &singles[&key].0 };
                    let pre = proc.preprocess(&world)?;
                    let dets = proc.detect(&pre);
                    streams.push((key, pre, dets));
                }
                Ok((sim.ground_truth(f), streams))
            })
            .collect();
        for (&f, r) in batch.iter().zip(results) {
            let (frame_gt, streams) = r?;
            for (key, pre, dets) in streams {
                let (proc, cov) = if key == FUSED_SENSOR_ID { &mut fused } else { singles.get_mut(&key).expect("stream exists") };
                cov.add_frame(&frame_gt, &pre);
                proc.track(f, dets, Some(&pre))?;
            }
            gt.extend(frame_gt);
        }
    }
    let finish = |(proc, coverage): (StreamProcessor, CoverageMaps)| -> Result<StreamResult> {
        let output = proc.finish()?;
        let report = evaluate(Some(&output.detections), &output.mot_objects(), &output.trajectories, &gt, &cfg.eval)?;
        Ok(StreamResult { output, report, coverage })
    };
    let fused = finish(fused)?;
    let singles = singles.into_iter().map(|(id, s)| Ok((id, finish(s)?))).collect::<Result<_>>()?;
    Ok(Experiment { gt, fused, singles })
}
