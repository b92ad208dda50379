//! Multi-object tracker: constant-velocity Kalman filter per track, Hungarian
//! association with class gating, and a birth/death lifecycle.

mod kalman;

pub use kalman::{yaw_innovation, TrackRecord, TrackState, MEAS_DIM, STATE_DIM};

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::detector::Detection;
use crate::error::{Error, Result};
use crate::geometry::bev_iou;
use crate::linalg::Matrix;
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMetric {
    BevIou,
    CentroidDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    pub min_hits: u32,
    pub max_age: u32,
    pub match_metric: MatchMetric,
    /// Minimum IoU or maximum center distance (meters) of an accepted match;
    /// `None` selects 0.1 or 2.0 by metric.
    pub match_threshold: Option<f64>,
    /// Per-frame process noise variances, state order x y z yaw l w h vx vy vz.
    pub process_noise: [f64; STATE_DIM],
    /// Measurement noise variances, order x y z yaw l w h.
    pub measurement_noise: [f64; MEAS_DIM],
    pub initial_variance: [f64; STATE_DIM],
    /// Frame rate used to turn frame gaps into seconds.
    pub rate: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            min_hits: 3,
            max_age: 2,
            match_metric: MatchMetric::CentroidDistance,
            match_threshold: None,
            process_noise: [0.01, 0.01, 0.01, 0.05, 0.01, 0.01, 0.01, 0.1, 0.1, 0.01],
            measurement_noise: [0.05, 0.05, 0.05, 0.1, 0.2, 0.2, 0.1],
            initial_variance: [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 100.0, 100.0, 100.0],
            rate: 20.0,
        }
    }
}

impl TrackerParams {
    pub fn threshold(&self) -> f64 {
        self.match_threshold.unwrap_or(match self.match_metric {
            MatchMetric::BevIou => 0.1,
            MatchMetric::CentroidDistance => 2.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_hits == 0 {
            return Err(Error::validation("tracker min_hits must be at least 1"));
        }
        if !(self.rate > 0.0) {
            return Err(Error::validation("tracker rate must be positive"));
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.measurement_noise) || !positive(&self.initial_variance) {
            return Err(Error::validation("tracker measurement and initial variances must be positive"));
        }
        if !self.process_noise.iter().all(|x| *x >= 0.0 && x.is_finite()) {
            return Err(Error::validation("tracker process noise must be >= 0"));
        }
        let t = self.threshold();
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::validation("tracker match_threshold must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    /// (track index, detection index), sorted by track index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

/// Cost of pairs that must not match (class mismatch or outside the gate).
/// Large but finite so the assignment still maximizes the number of valid pairs.
const FORBIDDEN: f64 = 1e6;

/// Optimal track-to-detection assignment. Pairs of different classes or
/// outside the match threshold are never matched.
pub fn associate<T: Real>(tracks: &[TrackState<T>], dets: &[Detection<T>], params: &TrackerParams) -> Association {
    let (nt, nd) = (tracks.len(), dets.len());
    if nt == 0 || nd == 0 {
        return Association { matches: Vec::new(), unmatched_tracks: (0..nt).collect(), unmatched_dets: (0..nd).collect() };
    }
    let threshold = params.threshold();
    let mut cost = Matrix::<f64>::zeros(nt, nd);
    for (i, t) in tracks.iter().enumerate() {
        let tb = t.bbox();
        for (j, d) in dets.iter().enumerate() {
            cost[(i, j)] = if t.class != d.class {
                FORBIDDEN
            } else {
                match params.match_metric {
                    MatchMetric::CentroidDistance => {
                        let dist = to_f64((tb.center - d.bbox.center).norm());
                        if dist <= threshold { dist } else { FORBIDDEN }
                    }
                    MatchMetric::BevIou => {
                        let iou = bev_iou(&tb, &d.bbox).map(to_f64).unwrap_or(0.0);
                        if iou >= threshold { -iou } else { FORBIDDEN }
                    }
                }
            };
        }
    }
    let solution = assignment::solve(&cost);
    let mut out = Association::default();
    let mut det_used = vec![false; nd];
    for (i, col) in solution.row_to_col.iter().enumerate() {
        match col {
            Some(j) if cost[(i, *j)] < FORBIDDEN => {
                out.matches.push((i, *j));
                det_used[*j] = true;
            }
            _ => out.unmatched_tracks.push(i),
        }
    }
    out.unmatched_dets = (0..nd).filter(|&j| !det_used[j]).collect();
    out
}

/// Tracker over one stream of frames.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    pub params: TrackerParams,
    tracks: Vec<TrackState<T>>,
    next_id: u64,
    frames_seen: u32,
    last_frame: Option<u64>,
    /// Number of covariance repairs (diagnostic).
    pub repairs: u32,
}

impl<T: Real> Tracker<T> {
    pub fn new(params: TrackerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, tracks: Vec::new(), next_id: 1, frames_seen: 0, last_frame: None, repairs: 0 })
    }

    /// All live tracks, confirmed or not.
    pub fn tracks(&self) -> &[TrackState<T>] {
        &self.tracks
    }

    /// Processes the detections of `frame_index` and returns the tracks to
    /// report for this frame: updated this frame and either confirmed by
    /// `min_hits` updates or still within the start-up grace period.
    pub fn step(&mut self, frame_index: u64, dets: &[Detection<T>]) -> Result<Vec<TrackState<T>>> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(Error::validation(format!(
                    "tracker received frame {frame_index} after frame {last}; frames must be strictly increasing"
                )));
            }
        }
        if let Some(d) = dets.iter().find(|d| d.frame_index != frame_index) {
            return Err(Error::validation(format!(
                "detection of frame {} passed to tracker step for frame {frame_index}",
                d.frame_index
            )));
        }
        if let Some(last) = self.last_frame {
            let dt = lit::<T>((frame_index - last) as f64 / self.params.rate);
            let q: Vec<T> = self.params.process_noise.iter().map(|&v| lit(v)).collect();
            for t in &mut self.tracks {
                if t.predict(dt, &q) {
                    self.repairs += 1;
                }
                t.frame_index = frame_index;
            }
        }
        self.last_frame = Some(frame_index);
        self.frames_seen += 1;

        let assoc = associate(&self.tracks, dets, &self.params);
        let r: Vec<T> = self.params.measurement_noise.iter().map(|&v| lit(v)).collect();
        for &(ti, di) in &assoc.matches {
            self.tracks[ti].update(&dets[di], &r)?;
        }
        for &di in &assoc.unmatched_dets {
            self.tracks.push(TrackState::from_detection(self.next_id, &dets[di], &self.params));
            self.next_id += 1;
        }
        let max_age = self.params.max_age;
        self.tracks.retain(|t| t.time_since_update <= max_age);

        let grace = self.frames_seen <= self.params.min_hits;
        Ok(self
            .tracks
            .iter()
            .filter(|t| t.time_since_update == 0 && (t.hits >= self.params.min_hits || grace))
            .cloned()
            .collect())
    }
}

#[cfg(test)]
mod tests;
