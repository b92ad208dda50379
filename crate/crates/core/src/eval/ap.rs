use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::geometry::{bev_iou, ObjectClass};
use crate::sim::GroundTruthRecord;

/// Recall sampling of the interpolated precision curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    /// 41 recall points 0, 0.025, ..., 1.
    Points41,
    /// 11 recall points 0, 0.1, ..., 1.
    Points11,
}

impl ApInterpolation {
    fn samples(self) -> usize {
        match self {
            ApInterpolation::Points41 => 41,
            ApInterpolation::Points11 => 11,
        }
    }
}

/// Average precision of one class from score-ordered true/false positive
/// flags and the number of GT objects.
pub fn ap_from_flags(tp_flags: &[bool], n_gt: usize, interp: ApInterpolation) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(tp_flags.len());
    for (k, &hit) in tp_flags.iter().enumerate() {
        if hit {
            tp += 1;
        }
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // interpolated precision: best precision at any recall >= r
    let mut best_from = vec![0.0f64; curve.len() + 1];
    for k in (0..curve.len()).rev() {
        best_from[k] = best_from[k + 1].max(curve[k].1);
    }
    let n = interp.samples();
    let mut total = 0.0;
    for i in 0..n {
        let r = i as f64 / (n - 1) as f64;
        let k = curve.partition_point(|&(rec, _)| rec < r - 1e-12);
        total += best_from[k];
    }
    total / n as f64
}

/// Per-class AP with greedy score-ordered matching: each detection takes the
/// unmatched GT box of its class and frame with the highest BEV IoU, provided
/// the IoU reaches the class threshold. Classes absent from GT map to `None`.
pub fn average_precision(
    dets: &[Detection<f64>],
    gt: &[GroundTruthRecord],
    iou_threshold: impl Fn(ObjectClass) -> f64,
    interp: ApInterpolation,
) -> BTreeMap<ObjectClass, Option<f64>> {
    let mut out = BTreeMap::new();
    for class in ObjectClass::ALL {
        let mut gt_by_frame: HashMap<u64, Vec<&GroundTruthRecord>> = HashMap::new();
        let mut n_gt = 0;
        for g in gt.iter().filter(|g| g.class == class) {
            gt_by_frame.entry(g.frame_index).or_default().push(g);
            n_gt += 1;
        }
        if n_gt == 0 {
            out.insert(class, None);
            continue;
        }
        let mut ds: Vec<&Detection<f64>> = dets.iter().filter(|d| d.class == class).collect();
        ds.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.frame_index.cmp(&b.frame_index)));
        let thr = iou_threshold(class);
        let mut used: HashMap<u64, Vec<bool>> = gt_by_frame.iter().map(|(k, v)| (*k, vec![false; v.len()])).collect();
        let flags: Vec<bool> = ds
            .iter()
            .map(|d| {
                let Some(cands) = gt_by_frame.get(&d.frame_index) else { return false };
                let taken = used.get_mut(&d.frame_index).unwrap();
                let mut best: Option<(usize, f64)> = None;
                for (k, g) in cands.iter().enumerate() {
                    if taken[k] {
                        continue;
                    }
                    let iou = bev_iou(&d.bbox, &g.bbox).unwrap_or(0.0);
                    if iou >= thr && best.map_or(true, |(_, b)| iou > b) {
                        best = Some((k, iou));
                    }
                }
                match best {
                    Some((k, _)) => {
                        taken[k] = true;
                        true
                    }
                    None => false,
                }
            })
            .collect();
        out.insert(class, Some(ap_from_flags(&flags, n_gt, interp)));
    }
    out
}
