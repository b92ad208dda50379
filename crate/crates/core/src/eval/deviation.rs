use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{ClassGroup, Vec3};
use crate::refine::Trajectory;
use crate::sim::GroundTruthRecord;

/// Mean deviations of one trajectory set; `None` when the set is empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deviation {
    pub position: Option<f64>,
    pub velocity: Option<f64>,
    pub acceleration: Option<f64>,
    pub trajectories: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviationReport {
    pub all: Deviation,
    pub vehicle: Deviation,
    pub vru: Deviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionParams {
    /// Trajectories must be longer than this, meters.
    pub min_length: f64,
    /// Trajectories must have more frames than this.
    pub min_frames: usize,
    /// Largest mean center distance at which an estimate may match a GT
    /// trajectory, meters.
    pub match_distance: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self { min_length: 10.0, min_frames: 50, match_distance: 2.0 }
    }
}

/// GT records of one actor keyed by frame.
pub type GtTrajectory = BTreeMap<u64, GroundTruthRecord>;

pub fn group_gt(gt: &[GroundTruthRecord]) -> BTreeMap<u32, GtTrajectory> {
    let mut out: BTreeMap<u32, GtTrajectory> = BTreeMap::new();
    for g in gt {
        out.entry(g.actor_id).or_default().insert(g.frame_index, *g);
    }
    out
}

/// GT actor with the largest frame overlap among those whose mean center
/// distance over the overlap is within `match_distance`; ties go to the
/// smaller mean distance, then the smaller id.
pub fn match_trajectory(traj: &Trajectory<f64>, gt: &BTreeMap<u32, GtTrajectory>, match_distance: f64) -> Option<u32> {
    let mut best: Option<(usize, f64, u32)> = None;
    for (&id, frames) in gt {
        let (mut n, mut sum) = (0usize, 0.0);
        for f in &traj.frames {
            if let Some(g) = frames.get(&f.frame_index) {
                n += 1;
                sum += (f.position - g.bbox.center).norm();
            }
        }
        if n == 0 {
            continue;
        }
        let mean = sum / n as f64;
        if mean > match_distance {
            continue;
        }
        let better = match best {
            None => true,
            Some((bn, bm, _)) => n > bn || (n == bn && mean < bm),
        };
        if better {
            best = Some((n, mean, id));
        }
    }
    best.map(|b| b.2)
}

#[derive(Default)]
struct Acc {
    pos: f64,
    vel: f64,
    acc: f64,
    frames: usize,
    trajectories: usize,
}

impl Acc {
    fn finish(&self) -> Deviation {
        let mean = |s: f64| (self.frames > 0).then(|| s / self.frames as f64);
        Deviation {
            position: mean(self.pos),
            velocity: mean(self.vel),
            acceleration: mean(self.acc),
            trajectories: self.trajectories,
            frames: self.frames,
        }
    }
}

fn deviation(a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    (a - b).norm()
}

/// Frame-weighted mean deviation of the selected trajectories from their GT:
/// the sum of per-frame deviations over all trajectories divided by the total
/// number of evaluated frames. Trajectories are selected by their own length
/// and frame count, matched to GT by [`match_trajectory`], and grouped by the
/// class of the matched GT actor, so misclassifications do not matter.
pub fn mae_deviation(
    trajs: &[Trajectory<f64>],
    gt: &[GroundTruthRecord],
    selection: &SelectionParams,
) -> DeviationReport {
    let grouped = group_gt(gt);
    let (mut all, mut veh, mut vru) = (Acc::default(), Acc::default(), Acc::default());
    for t in trajs {
        if !(t.length() > selection.min_length && t.n_frames() > selection.min_frames) {
            continue;
        }
        let Some(id) = match_trajectory(t, &grouped, selection.match_distance) else { continue };
        let frames = &grouped[&id];
        let class = frames.values().next().map(|g| g.class).unwrap();
        let group = if class.group() == ClassGroup::Vehicle { &mut veh } else { &mut vru };
        for acc in [&mut all, group] {
            acc.trajectories += 1;
        }
        for f in &t.frames {
            let Some(g) = frames.get(&f.frame_index) else { continue };
            let d = [
                deviation(f.position, g.bbox.center),
                deviation(f.velocity, g.velocity),
                deviation(f.acceleration, g.acceleration),
            ];
            let group = if class.group() == ClassGroup::Vehicle { &mut veh } else { &mut vru };
            for acc in [&mut all, group] {
                acc.pos += d[0];
                acc.vel += d[1];
                acc.acc += d[2];
                acc.frames += 1;
            }
        }
    }
    DeviationReport { all: all.finish(), vehicle: veh.finish(), vru: vru.finish() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObjectClass, OrientedBox};
    use crate::refine::TrajectoryFrame;
    use proptest::prelude::*;

    const SPEED: f64 = 5.0;

    fn gt_actor(id: u32, class: ObjectClass, y: f64, frames: u64) -> Vec<GroundTruthRecord> {
        (0..frames)
            .map(|i| GroundTruthRecord {
                frame_index: i,
                actor_id: id,
                class,
                bbox: OrientedBox::new(Vec3::new(SPEED * 0.05 * i as f64, y, 0.8), 4.5, 1.8, 1.6, 0.0).unwrap(),
                velocity: Vec3::new(SPEED, 0.0, 0.0),
                acceleration: Vec3::zeros(),
            })
            .collect()
    }

    fn offset_track(id: u64, gt: &[GroundTruthRecord], offset: impl Fn(u64) -> f64) -> Trajectory<f64> {
        let frames = gt
            .iter()
            .map(|g| TrajectoryFrame {
                frame_index: g.frame_index,
                t: g.frame_index as f64 * 0.05,
                position: g.bbox.center + Vec3::new(0.0, offset(g.frame_index), 0.0),
                velocity: g.velocity,
                acceleration: g.acceleration,
                yaw: 0.0,
                dims: g.bbox.dims(),
                points_in_box: 1,
            })
            .collect();
        Trajectory::new(id, ObjectClass::Car, frames).unwrap()
    }

    #[test]
    fn identical_tracks_have_zero_deviation() {
        let gt = gt_actor(1, ObjectClass::Car, 0.0, 80);
        let r = mae_deviation(&[offset_track(1, &gt, |_| 0.0)], &gt, &SelectionParams::default());
        assert_eq!(r.all.position, Some(0.0));
        assert_eq!(r.all.velocity, Some(0.0));
        assert_eq!(r.vru.position, None);
    }

    #[test]
    fn constant_offset() {
        let gt = gt_actor(1, ObjectClass::Car, 0.0, 60);
        let r = mae_deviation(&[offset_track(1, &gt, |_| 0.2)], &gt, &SelectionParams::default());
        assert!((r.all.position.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn frame_weighting() {
        let a = gt_actor(1, ObjectClass::Car, 0.0, 100);
        let b = gt_actor(2, ObjectClass::Pedestrian, 20.0, 60);
        let gt: Vec<_> = a.iter().chain(&b).copied().collect();
        let trajs = [offset_track(1, &a, |_| 0.1), offset_track(2, &b, |_| 0.4)];
        let r = mae_deviation(&trajs, &gt, &SelectionParams::default());
        let expected = (100.0 * 0.1 + 60.0 * 0.4) / 160.0;
        assert!((r.all.position.unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.2125).abs() < 1e-15);
        // the per-trajectory mean would be 0.25
        assert!((r.vehicle.position.unwrap() - 0.1).abs() < 1e-12);
        assert!((r.vru.position.unwrap() - 0.4).abs() < 1e-12);
        assert_eq!((r.all.trajectories, r.all.frames), (2, 160));
    }

    #[test]
    fn selection_thresholds() {
        let gt = gt_actor(1, ObjectClass::Car, 0.0, 50);
        let r = mae_deviation(&[offset_track(1, &gt, |_| 0.1)], &gt, &SelectionParams::default());
        assert_eq!(r.all.trajectories, 0);
        assert_eq!(r.all.position, None);
        let gt = gt_actor(1, ObjectClass::Car, 0.0, 51);
        let r = mae_deviation(&[offset_track(1, &gt, |_| 0.1)], &gt, &SelectionParams { min_length: 0.0, ..Default::default() });
        assert_eq!(r.all.trajectories, 1);
    }

    #[test]
    fn distant_tracks_do_not_match() {
        let gt = gt_actor(1, ObjectClass::Car, 0.0, 80);
        let r = mae_deviation(&[offset_track(1, &gt, |_| 2.5)], &gt, &SelectionParams::default());
        assert_eq!(r.all.trajectories, 0);
    }

    proptest! {
        #[test]
        fn weighted_mean_between_extremes(
            specs in prop::collection::vec((51u64..150, 0.0f64..1.5), 1..5),
        ) {
            let mut gt = Vec::new();
            let mut trajs = Vec::new();
            let mut means = Vec::new();
            for (k, &(n, off)) in specs.iter().enumerate() {
                let g = gt_actor(k as u32 + 1, ObjectClass::Car, 30.0 * k as f64, n);
                trajs.push(offset_track(k as u64, &g, |i| off * (1.0 + (i % 3) as f64) / 2.0));
                let mean = (0..n).map(|i| off * (1.0 + (i % 3) as f64) / 2.0).sum::<f64>() / n as f64;
                means.push(mean);
                gt.extend(g);
            }
            let r = mae_deviation(&trajs, &gt, &SelectionParams::default());
            let d = r.all.position.unwrap();
            let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = means.iter().cloned().fold(0.0, f64::max);
            prop_assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
        }
    }
}
