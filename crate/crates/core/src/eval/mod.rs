//! Evaluation: heat maps of point counts and box coverage, average precision,
//! CLEAR-MOT, frame-weighted trajectory deviations and the synchronization
//! error bound.

mod ap;
mod coverage;
mod deviation;
mod heatmap;
mod mot;

pub use ap::{ap_from_flags, average_precision, ApInterpolation};
pub use coverage::{coverage_heatmap, coverage_maps, point_count_heatmap, CoverageMaps};
pub use deviation::{group_gt, mae_deviation, match_trajectory, Deviation, DeviationReport, GtTrajectory, SelectionParams};
pub use heatmap::{GridSpec, HeatMap};
pub use mot::{clear_mot, match_frame, MotObject, MotResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::error::{Error, Result};
use crate::geometry::{ClassGroup, ObjectClass};
use crate::refine::Trajectory;
use crate::sim::GroundTruthRecord;

/// Largest position error caused by a timestamp offset `dt` for objects up to
/// `v_max`: `v_max * dt`.
pub fn sync_error(v_max: f64, dt: f64) -> Result<f64> {
    if !(v_max >= 0.0) || !(dt >= 0.0) {
        return Err(Error::validation("sync_error needs v_max >= 0 and dt >= 0"));
    }
    Ok(v_max * dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// Heat-map grid; its x/y ranges also bound the evaluated region.
    pub grid: GridSpec,
    pub selection: SelectionParams,
    /// CLEAR-MOT center-distance gates, meters.
    pub gate_vehicle: f64,
    pub gate_vru: f64,
    /// BEV IoU thresholds for AP.
    pub iou_vehicle: f64,
    pub iou_vru: f64,
    pub ap_interpolation: ApInterpolation,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            selection: SelectionParams::default(),
            gate_vehicle: 2.0,
            gate_vru: 1.0,
            iou_vehicle: 0.5,
            iou_vru: 0.25,
            ap_interpolation: ApInterpolation::Points41,
        }
    }
}

impl EvalParams {
    pub fn gate(&self, class: ObjectClass) -> f64 {
        match class.group() {
            ClassGroup::Vehicle => self.gate_vehicle,
            ClassGroup::Vru => self.gate_vru,
        }
    }

    pub fn iou(&self, class: ObjectClass) -> f64 {
        match class.group() {
            ClassGroup::Vehicle => self.iou_vehicle,
            ClassGroup::Vru => self.iou_vru,
        }
    }

    pub fn in_region(&self, x: f64, y: f64) -> bool {
        let g = &self.grid;
        x >= g.x_range[0] && x <= g.x_range[1] && y >= g.y_range[0] && y <= g.y_range[1]
    }

    pub fn validate(&self) -> Result<()> {
        HeatMap::new(&self.grid)?;
        for (name, v) in [("gate_vehicle", self.gate_vehicle), ("gate_vru", self.gate_vru)] {
            if !(v > 0.0) {
                return Err(Error::validation(format!("eval {name} must be positive")));
            }
        }
        for (name, v) in [("iou_vehicle", self.iou_vehicle), ("iou_vru", self.iou_vru)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::validation(format!("eval {name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub ap: Option<f64>,
    pub mot: Option<MotResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: BTreeMap<ObjectClass, ClassMetrics>,
    /// Class-agnostic CLEAR-MOT over all objects.
    pub overall: Option<MotResult>,
    pub deviation: DeviationReport,
    pub selection: SelectionParams,
}

/// Evaluates one run. `tracks` are the per-frame tracker outputs used for
/// CLEAR-MOT, `trajectories` the refined trajectories used for deviations and
/// `detections` (optional) the filtered detections used for AP. Objects
/// centered outside the evaluation region are ignored.
pub fn evaluate(
    detections: Option<&[Detection<f64>]>,
    tracks: &[MotObject],
    trajectories: &[Trajectory<f64>],
    gt: &[GroundTruthRecord],
    params: &EvalParams,
) -> Result<EvalReport> {
    params.validate()?;
    let gt: Vec<GroundTruthRecord> = gt
        .iter()
        .filter(|g| params.in_region(g.bbox.center.x, g.bbox.center.y))
        .copied()
        .collect();
    let tracks: Vec<MotObject> = tracks.iter().filter(|t| params.in_region(t.center.x, t.center.y)).copied().collect();
    let gt_objects: Vec<MotObject> = gt
        .iter()
        .map(|g| MotObject { frame_index: g.frame_index, id: g.actor_id as u64, class: g.class, center: g.bbox.center })
        .collect();

    let ap = detections.map(|d| {
        let d: Vec<Detection<f64>> =
            d.iter().filter(|d| params.in_region(d.bbox.center.x, d.bbox.center.y)).cloned().collect();
        average_precision(&d, &gt, |c| params.iou(c), params.ap_interpolation)
    });
    let mut classes = BTreeMap::new();
    for class in ObjectClass::ALL {
        let g: Vec<MotObject> = gt_objects.iter().filter(|o| o.class == class).copied().collect();
        let h: Vec<MotObject> = tracks.iter().filter(|o| o.class == class).copied().collect();
        let mot = if g.is_empty() { None } else { Some(clear_mot(&h, &g, |c| params.gate(c))?) };
        let ap = ap.as_ref().and_then(|m| m[&class]);
        classes.insert(class, ClassMetrics { ap, mot });
    }
    let overall = if gt_objects.is_empty() { None } else { Some(clear_mot(&tracks, &gt_objects, |c| params.gate(c))?) };
    Ok(EvalReport {
        classes,
        overall,
        deviation: mae_deviation(trajectories, &gt, &params.selection),
        selection: params.selection,
    })
}

/// One metric of two runs side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub first: Option<f64>,
    pub second: Option<f64>,
    /// `second - first`.
    pub delta: Option<f64>,
}

fn report_metrics(r: &EvalReport) -> Vec<(String, Option<f64>)> {
    let mut out = Vec::new();
    for (class, m) in &r.classes {
        out.push((format!("{class}.ap"), m.ap));
        out.push((format!("{class}.mota"), m.mot.map(|x| x.mota)));
        out.push((format!("{class}.motp"), m.mot.and_then(|x| x.motp)));
    }
    out.push(("overall.mota".into(), r.overall.map(|x| x.mota)));
    out.push(("overall.motp".into(), r.overall.and_then(|x| x.motp)));
    out.push(("overall.motp_m".into(), r.overall.and_then(|x| x.motp_distance)));
    for (name, d) in [("all", r.deviation.all), ("vehicle", r.deviation.vehicle), ("vru", r.deviation.vru)] {
        out.push((format!("d_{name}.position"), d.position));
        out.push((format!("d_{name}.velocity"), d.velocity));
        out.push((format!("d_{name}.acceleration"), d.acceleration));
    }
    out
}

/// Metric-by-metric comparison of two reports (e.g. single vs fused).
pub fn compare(first: &EvalReport, second: &EvalReport) -> Vec<ComparisonRow> {
    report_metrics(first)
        .into_iter()
        .zip(report_metrics(second))
        .map(|((metric, a), (_, b))| ComparisonRow {
            metric,
            first: a,
            second: b,
            delta: a.zip(b).map(|(a, b)| b - a),
        })
        .collect()
}
