use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::geometry::{ObjectClass, Vec3};
use crate::linalg::Matrix;

/// One object (track or GT) in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotObject {
    pub frame_index: u64,
    pub id: u64,
    pub class: ObjectClass,
    pub center: Vec3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotResult {
    pub mota: f64,
    /// Mean of `1 - d / gate` over matches; 1 is perfect.
    pub motp: Option<f64>,
    /// Mean matched center distance, meters.
    pub motp_distance: Option<f64>,
    pub false_positives: usize,
    pub misses: usize,
    pub id_switches: usize,
    pub matches: usize,
    pub gt_objects: usize,
}

const MATCH: f64 = 1e6;
const KEEP: f64 = 1e3;

/// Optimal matching of one frame: the most matches within the gate, then the
/// most continued correspondences, then the smallest total distance.
/// Returns (gt index, hypothesis index) pairs sorted by gt index.
pub fn match_frame(
    gt: &[MotObject],
    hyp: &[MotObject],
    gate: &impl Fn(ObjectClass) -> f64,
    previous: &HashMap<u64, u64>,
) -> Vec<(usize, usize)> {
    if gt.is_empty() || hyp.is_empty() {
        return Vec::new();
    }
    let mut cost = Matrix::<f64>::zeros(gt.len(), hyp.len());
    for (i, g) in gt.iter().enumerate() {
        for (j, h) in hyp.iter().enumerate() {
            let d = (g.center - h.center).norm();
            if d <= gate(g.class) {
                let keep = if previous.get(&g.id) == Some(&h.id) { KEEP } else { 0.0 };
                cost[(i, j)] = d - MATCH - keep;
            }
        }
    }
    let sol = assignment::solve(&cost);
    sol.pairs().filter(|&(i, j)| cost[(i, j)] < 0.0).collect()
}

/// CLEAR-MOT over all frames present in `gt` or `hyp`. An identity switch is
/// counted when a GT object is matched to a different hypothesis than at its
/// previous match.
pub fn clear_mot(hyp: &[MotObject], gt: &[MotObject], gate: impl Fn(ObjectClass) -> f64) -> Result<MotResult> {
    if gt.is_empty() {
        return Err(Error::validation("CLEAR-MOT needs at least one GT object"));
    }
    let mut frames: BTreeMap<u64, (Vec<MotObject>, Vec<MotObject>)> = BTreeMap::new();
    for g in gt {
        frames.entry(g.frame_index).or_default().0.push(*g);
    }
    for h in hyp {
        frames.entry(h.frame_index).or_default().1.push(*h);
    }
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let (mut fp, mut misses, mut idsw, mut matches) = (0, 0, 0, 0);
    let (mut dist_sum, mut score_sum) = (0.0, 0.0);
    for (g, h) in frames.values() {
        let pairs = match_frame(g, h, &gate, &last_match);
        matches += pairs.len();
        misses += g.len() - pairs.len();
        fp += h.len() - pairs.len();
        for &(i, j) in &pairs {
            let d = (g[i].center - h[j].center).norm();
            dist_sum += d;
            score_sum += 1.0 - d / gate(g[i].class);
            if let Some(prev) = last_match.insert(g[i].id, h[j].id) {
                if prev != h[j].id {
                    idsw += 1;
                }
            }
        }
    }
    let n = gt.len();
    Ok(MotResult {
        mota: 1.0 - (fp + misses + idsw) as f64 / n as f64,
        motp: (matches > 0).then(|| score_sum / matches as f64),
        motp_distance: (matches > 0).then(|| dist_sum / matches as f64),
        false_positives: fp,
        misses,
        id_switches: idsw,
        matches,
        gt_objects: n,
    })
}
