//! Geometric object detector: density clustering, minimum-area box fitting,
//! dimension-gate classification, ROI filtering and duplicate suppression.

mod classify;
mod cluster;
mod fit;
mod ground;

pub use classify::{classify, ClassGate, ClassGates, Range};
pub use cluster::cluster_points;
pub use fit::{convex_hull, fit_box, fit_box_trimmed, MIN_EXTENT};
pub use ground::{fit_ground_plane, fit_ground_planes, heights_above_ground, GroundPlane};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::RoiSpec;
use crate::geometry::{bev_iou, ObjectClass, OrientedBox, Point, PointCloudFrame, Vec3};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub bbox: OrientedBox<T>,
    pub class: ObjectClass,
    pub score: f64,
    pub frame_index: u64,
    /// Points supporting the detection; 0 when unknown (ingested detections).
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub cluster_radius: f64,
    pub min_cluster_points: usize,
    /// Neighbors (excluding the point itself) a point needs to be a core point.
    pub min_core_neighbors: usize,
    /// Points lower than this above the ground are residual ground and are
    /// not clustered.
    pub min_point_height: f64,
    /// Measure heights from a robust per-source ground plane fit instead of
    /// z = 0. Compensates tilted ground from miscalibrated extrinsics.
    pub fit_ground: bool,
    /// Clusters whose lowest point is below this height are assumed to stand
    /// on the ground and their box is extended down to z = 0. Clusters that
    /// float higher are discarded.
    pub ground_snap_height: f64,
    /// Fraction of a cluster's points allowed outside each face of its box.
    pub extent_trim: f64,
    pub duplicate_iou: f64,
    pub gates: ClassGates,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            cluster_radius: 0.7,
            min_cluster_points: 5,
            min_core_neighbors: 2,
            min_point_height: 0.3,
            fit_ground: true,
            ground_snap_height: 1.0,
            extent_trim: 0.02,
            duplicate_iou: 0.1,
            gates: ClassGates::default(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cluster_radius > 0.0 && self.cluster_radius.is_finite()) {
            return Err(Error::validation("detector cluster_radius must be positive"));
        }
        if self.min_cluster_points == 0 {
            return Err(Error::validation("detector min_cluster_points must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.duplicate_iou) {
            return Err(Error::validation("detector duplicate_iou must lie in [0, 1]"));
        }
        if !(0.0..0.5).contains(&self.extent_trim) {
            return Err(Error::validation("detector extent_trim must lie in [0, 0.5)"));
        }
        if !self.min_point_height.is_finite() || !self.ground_snap_height.is_finite() {
            return Err(Error::validation("detector heights must be finite"));
        }
        self.gates.validate()
    }
}

/// Point subsets found by density clustering, as index lists into the frame.
pub fn cluster<T: Real>(frame: &PointCloudFrame<T>, params: &DetectorParams) -> Vec<Vec<usize>> {
    cluster_with_heights(frame, params).0
}

fn cluster_with_heights<T: Real>(frame: &PointCloudFrame<T>, params: &DetectorParams) -> (Vec<Vec<usize>>, Vec<f64>) {
    let heights: Vec<f64> = if params.fit_ground {
        heights_above_ground(frame)
    } else {
        frame.points.iter().map(|p| to_f64(p.z)).collect()
    };
    let clusters = cluster_points(
        frame,
        params.cluster_radius,
        params.min_core_neighbors,
        params.min_cluster_points,
        |i| heights[i] >= params.min_point_height,
    );
    (clusters, heights)
}

/// Unfiltered detections of one frame, in cluster order.
pub fn detect<T: Real>(frame: &PointCloudFrame<T>, params: &DetectorParams) -> Vec<Detection<T>> {
    let (clusters, heights) = cluster_with_heights(frame, params);
    let mut out = Vec::new();
    let mut members: Vec<Point<T>> = Vec::new();
    for idx in clusters {
        let clearance = idx.iter().map(|&i| heights[i]).fold(f64::INFINITY, f64::min);
        if clearance > params.ground_snap_height {
            continue;
        }
        members.clear();
        members.extend(idx.iter().map(|&i| frame.points[i]));
        let Some(mut bbox) = fit_box_trimmed(&members, params.extent_trim) else { continue };
        let top = bbox.z_max();
        if bbox.z_min() > T::zero() {
            bbox.height = top;
            bbox.center = Vec3::new(bbox.center.x, bbox.center.y, top * lit(0.5));
        }
        if let Some((class, score)) = classify(&bbox, idx.len(), &params.gates) {
            out.push(Detection { bbox, class, score, frame_index: frame.frame_index, n_points: idx.len() });
        }
    }
    out
}

/// Drops detections centered outside the ROI, then greedily keeps the
/// highest-scoring detections and removes any whose BEV IoU with an already
/// kept detection exceeds `duplicate_iou`. Equal scores keep input order.
pub fn filter_detections<T: Real>(dets: Vec<Detection<T>>, roi: &RoiSpec, params: &DetectorParams) -> Vec<Detection<T>> {
    let mut dets: Vec<Detection<T>> = dets
        .into_iter()
        .filter(|d| roi.contains_xy(to_f64(d.bbox.center.x), to_f64(d.bbox.center.y)))
        .collect();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let limit = lit::<T>(params.duplicate_iou);
    let mut kept: Vec<Detection<T>> = Vec::with_capacity(dets.len());
    for d in dets {
        let duplicate = kept
            .iter()
            .any(|k| bev_iou(&k.bbox, &d.bbox).map(|iou| iou > limit).unwrap_or(false));
        if !duplicate {
            kept.push(d);
        }
    }
    kept
}

/// Detection followed by ROI filtering and duplicate suppression.
pub fn detect_and_filter<T: Real>(frame: &PointCloudFrame<T>, roi: &RoiSpec, params: &DetectorParams) -> Vec<Detection<T>> {
    filter_detections(detect(frame, params), roi, params)
}
