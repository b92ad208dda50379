//! CSV and JSON file formats: sensor frames, ground truth, detections, tracks,
//! refined trajectories and the dataset manifest.
//!
//! Floats are written in shortest round-trip form, so writing and reading a
//! file reproduces the values bit for bit and reruns produce identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MotObject;
use crate::fusion::RoiSpec;
use crate::geometry::{ObjectClass, OrientedBox, Point, PointCloudFrame, Pose, Vec3};
use crate::noise::NoiseSpec;
use crate::refine::{Trajectory, TrajectoryFrame};
use crate::sim::{time_of, GroundTruthRecord, Layout};
use crate::tracker::TrackState;
use crate::Detection;

pub const FRAME_HEADER: [&str; 4] = ["x", "y", "z", "intensity"];
/// Fused frames carry the originating sensor of every point.
pub const FUSED_FRAME_HEADER: [&str; 5] = ["x", "y", "z", "intensity", "sensor"];
pub const GT_HEADER: [&str; 16] = [
    "frame", "actor_id", "class", "cx", "cy", "cz", "l", "w", "h", "yaw", "vx", "vy", "vz", "ax", "ay", "az",
];
pub const DETECTION_HEADER: [&str; 10] = ["frame", "class", "score", "cx", "cy", "cz", "l", "w", "h", "yaw"];
pub const TRACK_HEADER: [&str; 13] = [
    "frame", "track_id", "class", "cx", "cy", "cz", "l", "w", "h", "yaw", "vx", "vy", "vz",
];
pub const REFINED_HEADER: [&str; 16] = [
    "frame", "track_id", "class", "cx", "cy", "cz", "l", "w", "h", "yaw", "vx", "vy", "vz", "ax", "ay", "az",
];
pub const DIMS_HEADER: [&str; 5] = ["track_id", "class", "l", "w", "h"];

/// `s<ID>_f<FRAME:06>.csv`
pub fn frame_file_name(sensor_id: u32, frame_index: u64) -> String {
    format!("s{sensor_id}_f{frame_index:06}.csv")
}

/// Inverse of [`frame_file_name`].
pub fn parse_frame_file_name(name: &str) -> Option<(u32, u64)> {
    let stem = name.strip_prefix('s')?.strip_suffix(".csv")?;
    let (s, f) = stem.split_once("_f")?;
    Some((s.parse().ok()?, f.parse().ok()?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: match kind {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                other => format!("{other:?}"),
            },
        },
    }
}

fn write_rows<S: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads all rows, checking the header. Each row comes with its line number.
fn read_rows<R: DeserializeOwned>(path: &Path, headers: &[&[&str]]) -> Result<Vec<(u64, R)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if !headers.iter().any(|h| found.iter().eq(h.iter().copied())) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("unexpected header `{}`, expected `{}`", found.iter().collect::<Vec<_>>().join(","), headers[0].join(",")),
        });
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                let row = record.deserialize(Some(&found)).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: e.to_string(),
                })?;
                out.push((line, row));
            }
            Err(e) => return Err(csv_error(path, e)),
        }
    }
    Ok(out)
}

fn parse_err(path: &Path, line: u64, e: Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

fn make_box(c: [f64; 3], l: f64, w: f64, h: f64, yaw: f64) -> Result<OrientedBox<f64>> {
    OrientedBox::new(Vec3::from_array(c), l, w, h, yaw)
}

#[derive(Serialize, Deserialize)]
struct FrameRow {
    x: f64,
    y: f64,
    z: f64,
    intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sensor: Option<u32>,
}

/// Writes a frame; fused frames get the extra `sensor` column.
pub fn write_frame(path: &Path, frame: &PointCloudFrame<f64>) -> Result<()> {
    let fused = !frame.provenance.is_empty();
    let header: &[&str] = if fused { &FUSED_FRAME_HEADER } else { &FRAME_HEADER };
    let rows = frame.points.iter().enumerate().map(|(i, p)| FrameRow {
        x: p.x,
        y: p.y,
        z: p.z,
        intensity: p.intensity,
        sensor: fused.then(|| frame.provenance[i]),
    });
    write_rows(path, header, rows)
}

pub fn read_frame(path: &Path, sensor_id: u32, frame_index: u64, timestamp: f64) -> Result<PointCloudFrame<f64>> {
    let rows: Vec<(u64, FrameRow)> = read_rows(path, &[&FRAME_HEADER, &FUSED_FRAME_HEADER])?;
    let mut frame = PointCloudFrame::new(sensor_id, frame_index, timestamp, Vec::with_capacity(rows.len()));
    for (line, r) in rows {
        let p = Point::new(r.x, r.y, r.z, r.intensity);
        if !p.is_finite() {
            return Err(parse_err(path, line, Error::validation("non-finite point")));
        }
        frame.points.push(p);
        if let Some(s) = r.sensor {
            frame.provenance.push(s);
        }
    }
    if !frame.provenance.is_empty() && frame.provenance.len() != frame.points.len() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "`sensor` column is only partially filled".into(),
        });
    }
    Ok(frame)
}

#[derive(Serialize, Deserialize)]
struct GtRow {
    frame: u64,
    actor_id: u32,
    class: ObjectClass,
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    ax: f64,
    ay: f64,
    az: f64,
}

pub fn write_gt(path: &Path, records: &[GroundTruthRecord]) -> Result<()> {
    let rows = records.iter().map(|r| {
        let b = &r.bbox;
        GtRow {
            frame: r.frame_index,
            actor_id: r.actor_id,
            class: r.class,
            cx: b.center.x,
            cy: b.center.y,
            cz: b.center.z,
            l: b.length,
            w: b.width,
            h: b.height,
            yaw: b.yaw,
            vx: r.velocity.x,
            vy: r.velocity.y,
            vz: r.velocity.z,
            ax: r.acceleration.x,
            ay: r.acceleration.y,
            az: r.acceleration.z,
        }
    });
    write_rows(path, &GT_HEADER, rows)
}

pub fn read_gt(path: &Path) -> Result<Vec<GroundTruthRecord>> {
    read_rows::<GtRow>(path, &[&GT_HEADER])?
        .into_iter()
        .map(|(line, r)| {
            let bbox = make_box([r.cx, r.cy, r.cz], r.l, r.w, r.h, r.yaw).map_err(|e| parse_err(path, line, e))?;
            Ok(GroundTruthRecord {
                frame_index: r.frame,
                actor_id: r.actor_id,
                class: r.class,
                bbox,
                velocity: Vec3::new(r.vx, r.vy, r.vz),
                acceleration: Vec3::new(r.ax, r.ay, r.az),
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct DetectionRow {
    frame: u64,
    class: ObjectClass,
    score: f64,
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
}

pub fn write_detections(path: &Path, dets: &[Detection]) -> Result<()> {
    let rows = dets.iter().map(|d| {
        let b = &d.bbox;
        DetectionRow {
            frame: d.frame_index,
            class: d.class,
            score: d.score,
            cx: b.center.x,
            cy: b.center.y,
            cz: b.center.z,
            l: b.length,
            w: b.width,
            h: b.height,
            yaw: b.yaw,
        }
    });
    write_rows(path, &DETECTION_HEADER, rows)
}

/// Reads detections, including ones produced by an external detector.
pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    read_rows::<DetectionRow>(path, &[&DETECTION_HEADER])?
        .into_iter()
        .map(|(line, r)| {
            let bbox = make_box([r.cx, r.cy, r.cz], r.l, r.w, r.h, r.yaw).map_err(|e| parse_err(path, line, e))?;
            if !r.score.is_finite() {
                return Err(parse_err(path, line, Error::validation("score must be finite")));
            }
            Ok(Detection {
                bbox,
                class: r.class,
                score: r.score,
                frame_index: r.frame,
                n_points: 0,
            })
        })
        .collect()
}

/// One reported track at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame_index: u64,
    pub track_id: u64,
    pub class: ObjectClass,
    pub bbox: OrientedBox<f64>,
    pub velocity: Vec3<f64>,
}

impl TrackRow {
    pub fn from_state(s: &TrackState<f64>) -> Self {
        Self {
            frame_index: s.frame_index,
            track_id: s.id,
            class: s.class,
            bbox: s.bbox(),
            velocity: s.velocity(),
        }
    }

    pub fn to_mot(&self) -> MotObject {
        MotObject {
            frame_index: self.frame_index,
            id: self.track_id,
            class: self.class,
            center: self.bbox.center,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrackCsvRow {
    frame: u64,
    track_id: u64,
    class: ObjectClass,
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
    vx: f64,
    vy: f64,
    vz: f64,
}

pub fn write_tracks(path: &Path, rows: &[TrackRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        let b = &r.bbox;
        TrackCsvRow {
            frame: r.frame_index,
            track_id: r.track_id,
            class: r.class,
            cx: b.center.x,
            cy: b.center.y,
            cz: b.center.z,
            l: b.length,
            w: b.width,
            h: b.height,
            yaw: b.yaw,
            vx: r.velocity.x,
            vy: r.velocity.y,
            vz: r.velocity.z,
        }
    });
    write_rows(path, &TRACK_HEADER, rows)
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow>> {
    read_rows::<TrackCsvRow>(path, &[&TRACK_HEADER])?
        .into_iter()
        .map(|(line, r)| {
            Ok(TrackRow {
                frame_index: r.frame,
                track_id: r.track_id,
                class: r.class,
                bbox: make_box([r.cx, r.cy, r.cz], r.l, r.w, r.h, r.yaw).map_err(|e| parse_err(path, line, e))?,
                velocity: Vec3::new(r.vx, r.vy, r.vz),
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RefinedRow {
    frame: u64,
    track_id: u64,
    class: ObjectClass,
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    ax: f64,
    ay: f64,
    az: f64,
}

#[derive(Serialize, Deserialize)]
struct DimsRow {
    track_id: u64,
    class: ObjectClass,
    l: f64,
    w: f64,
    h: f64,
}

/// Writes refined trajectories ordered by frame, then track id.
pub fn write_refined(path: &Path, trajectories: &[Trajectory<f64>]) -> Result<()> {
    let mut rows: Vec<RefinedRow> = trajectories
        .iter()
        .flat_map(|t| {
            t.frames.iter().map(move |f| RefinedRow {
                frame: f.frame_index,
                track_id: t.track_id,
                class: t.class,
                cx: f.position.x,
                cy: f.position.y,
                cz: f.position.z,
                l: f.dims[0],
                w: f.dims[1],
                h: f.dims[2],
                yaw: f.yaw,
                vx: f.velocity.x,
                vy: f.velocity.y,
                vz: f.velocity.z,
                ax: f.acceleration.x,
                ay: f.acceleration.y,
                az: f.acceleration.z,
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.frame, r.track_id));
    write_rows(path, &REFINED_HEADER, rows)
}

/// Reads refined trajectories; `rate` restores frame timestamps.
/// Point counts are not stored and read back as 0.
pub fn read_refined(path: &Path, rate: f64) -> Result<Vec<Trajectory<f64>>> {
    let mut by_id: BTreeMap<u64, (ObjectClass, Vec<TrajectoryFrame<f64>>)> = BTreeMap::new();
    for (line, r) in read_rows::<RefinedRow>(path, &[&REFINED_HEADER])? {
        make_box([r.cx, r.cy, r.cz], r.l, r.w, r.h, r.yaw).map_err(|e| parse_err(path, line, e))?;
        let entry = by_id.entry(r.track_id).or_insert((r.class, Vec::new()));
        if entry.0 != r.class {
            return Err(parse_err(path, line, Error::validation(format!("track {} changes class", r.track_id))));
        }
        entry.1.push(TrajectoryFrame {
            frame_index: r.frame,
            t: time_of(rate, r.frame),
            position: Vec3::new(r.cx, r.cy, r.cz),
            velocity: Vec3::new(r.vx, r.vy, r.vz),
            acceleration: Vec3::new(r.ax, r.ay, r.az),
            yaw: r.yaw,
            dims: [r.l, r.w, r.h],
            points_in_box: 0,
        });
    }
    by_id
        .into_iter()
        .map(|(id, (class, frames))| Trajectory::new(id, class, frames).map_err(|e| parse_err(path, 0, e)))
        .collect()
}

/// Per-track fixed dimensions (first frame of each refined trajectory).
pub fn write_dims(path: &Path, trajectories: &[Trajectory<f64>]) -> Result<()> {
    let rows = trajectories.iter().filter_map(|t| {
        t.frames.first().map(|f| DimsRow {
            track_id: t.track_id,
            class: t.class,
            l: f.dims[0],
            w: f.dims[1],
            h: f.dims[2],
        })
    });
    write_rows(path, &DIMS_HEADER, rows)
}

pub fn read_dims(path: &Path) -> Result<BTreeMap<u64, (ObjectClass, [f64; 3])>> {
    Ok(read_rows::<DimsRow>(path, &[&DIMS_HEADER])?
        .into_iter()
        .map(|(_, r)| (r.track_id, (r.class, [r.l, r.w, r.h])))
        .collect())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub id: u32,
    /// Extrinsic pose used for fusion (perturbed in noisy variants).
    pub pose: Pose<f64>,
    /// Exact mounting pose, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_pose: Option<Pose<f64>>,
    /// Per-frame fusion poses, when the extrinsics drift during the recording.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frame_poses: Vec<Pose<f64>>,
    /// Frame files relative to the manifest, in frame order from 0.
    pub frames: Vec<String>,
}

/// Index of a recorded or simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Dataset family tag (`b`, `n`, `t` or `r`).
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
    pub rate: f64,
    pub frame_count: u64,
    /// Maximum raw intensity over all frames of all sensors.
    pub intensity_max: f64,
    pub roi: RoiSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    /// Ground-truth file relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
    pub sensors: Vec<SensorEntry>,
}

/// A manifest together with the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::validation("manifest rate must be > 0"));
        }
        if !(self.intensity_max >= 0.0) || !self.intensity_max.is_finite() {
            return Err(Error::validation("manifest intensity_max must be finite and >= 0"));
        }
        self.roi.validate()?;
        let mut ids: Vec<u32> = self.sensors.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("manifest lists a sensor twice"));
        }
        for s in &self.sensors {
            s.pose.validate()?;
            if !s.frame_poses.is_empty() && s.frame_poses.len() as u64 != self.frame_count {
                return Err(Error::validation(format!("sensor {} lists a pose for only some frames", s.id)));
            }
            if s.frames.len() as u64 != self.frame_count {
                return Err(Error::validation(format!(
                    "sensor {} lists {} frames, manifest declares {}",
                    s.id,
                    s.frames.len(),
                    self.frame_count
                )));
            }
        }
        Ok(())
    }

    pub fn sensor(&self, id: u32) -> Option<&SensorEntry> {
        self.sensors.iter().find(|s| s.id == id)
    }
}

impl Dataset {
    /// Loads and validates a manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest: DatasetManifest = read_json(path)?;
        manifest.validate().map_err(|e| parse_err(path, 0, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let ds = Self { manifest, root };
        let files = ds.manifest.sensors.iter().flat_map(|s| s.frames.iter()).chain(ds.manifest.gt.iter());
        for f in files {
            let p = ds.root.join(f);
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "file listed in manifest is missing")));
            }
        }
        Ok(ds)
    }

    pub fn timestamp(&self, frame_index: u64) -> f64 {
        time_of(self.manifest.rate, frame_index)
    }

    pub fn read_frame(&self, sensor_id: u32, frame_index: u64) -> Result<PointCloudFrame<f64>> {
        let s = self
            .manifest
            .sensor(sensor_id)
            .ok_or_else(|| Error::validation(format!("sensor {sensor_id} is not in the manifest")))?;
        let name = s
            .frames
            .get(frame_index as usize)
            .ok_or_else(|| Error::validation(format!("frame {frame_index} is beyond the recording")))?;
        read_frame(&self.root.join(name), sensor_id, frame_index, self.timestamp(frame_index))
    }

    pub fn gt_path(&self) -> Option<PathBuf> {
        self.manifest.gt.as_ref().map(|g| self.root.join(g))
    }
}
