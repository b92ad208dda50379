use super::*;
use crate::geometry::{ObjectClass, OrientedBox, Vec3};
use proptest::prelude::*;

fn det(frame: u64, class: ObjectClass, x: f64, y: f64) -> Detection<f64> {
    Detection {
        bbox: OrientedBox::new(Vec3::new(x, y, 0.8), 4.5, 1.8, 1.6, 0.0).unwrap(),
        class,
        score: 0.9,
        frame_index: frame,
        n_points: 50,
    }
}

fn car(frame: u64, x: f64, y: f64) -> Detection<f64> {
    det(frame, ObjectClass::Car, x, y)
}

fn track_at(x: f64, v: [f64; 3]) -> TrackState<f64> {
    let mut t = TrackState::from_detection(1, &car(0, x, 0.0), &TrackerParams::default());
    t.state[7..10].copy_from_slice(&v);
    t
}

#[test]
fn predict_uniform_motion() {
    let mut t = track_at(0.0, [2.0, 0.0, 0.0]);
    t.predict(0.05, &[0.0; STATE_DIM]);
    assert!((t.state[0] - 0.1).abs() < 1e-12);
    assert_eq!(t.state[1], 0.0);
    assert_eq!((t.age, t.time_since_update), (1, 1));
}

#[test]
fn predict_static_without_process_noise() {
    let mut t = track_at(3.0, [0.0; 3]);
    // zero velocity variance keeps the position block fixed as well
    t.covariance = Matrix::from_diag(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    let (s0, p0) = (t.state, t.covariance.clone());
    t.predict(0.05, &[0.0; STATE_DIM]);
    assert_eq!(t.state, s0);
    assert_eq!(t.covariance, p0);
}

#[test]
fn predict_grows_trace() {
    let mut t = track_at(0.0, [1.0, 1.0, 0.0]);
    let q = TrackerParams::default().process_noise;
    let mut last = t.covariance.trace();
    for _ in 0..10 {
        t.predict(0.05, &q);
        let tr = t.covariance.trace();
        assert!(tr > last);
        last = tr;
    }
}

#[test]
fn update_with_exact_measurement() {
    let mut t = track_at(5.0, [0.0; 3]);
    let before = t.state;
    let tr = t.covariance.trace();
    t.update(&car(1, 5.0, 0.0), &[0.05; MEAS_DIM]).unwrap();
    for k in 0..STATE_DIM {
        assert!((t.state[k] - before[k]).abs() < 1e-12);
    }
    assert!(t.covariance.trace() < tr);
    assert_eq!((t.hits, t.time_since_update), (2, 0));
}

#[test]
fn update_with_huge_measurement_noise_keeps_prediction() {
    let mut t = track_at(0.0, [0.0; 3]);
    t.update(&car(1, 3.0, -2.0), &[1e6; MEAS_DIM]).unwrap();
    assert!(t.state[0].abs() < 1e-5 && t.state[1].abs() < 1e-5);
}

#[test]
fn scalar_gain_matches_closed_form() {
    // diagonal covariance decouples the axes into 1D filters
    let (p, r, z) = (0.7, 0.2, 1.3);
    let mut t = track_at(0.0, [0.0; 3]);
    t.covariance = Matrix::from_diag(&[p; STATE_DIM]);
    t.update(&car(1, z, 0.0), &[r; MEAS_DIM]).unwrap();
    let gain = p / (p + r);
    assert!((t.state[0] - gain * z).abs() < 1e-12);
    assert!((t.covariance[(0, 0)] - (1.0 - gain) * p).abs() < 1e-12);
    assert_eq!(t.state[7], 0.0);
}

#[test]
fn yaw_flip_correction() {
    let pi = std::f64::consts::PI;
    assert!((yaw_innovation(pi - 0.1 + 0.3, 0.3) + 0.1).abs() < 1e-12);
    assert!((yaw_innovation(0.2f64, 0.1) - 0.1).abs() < 1e-12);
    assert!((yaw_innovation(-pi + 0.05, pi - 0.05) - 0.1).abs() < 1e-12);
    let mut t = track_at(0.0, [0.0; 3]);
    let mut d = car(1, 0.0, 0.0);
    d.bbox.yaw = pi - 0.02;
    t.update(&d, &[0.05; MEAS_DIM]).unwrap();
    assert!(t.state[3] < 0.0 && t.state[3] > -0.02);
}

#[test]
fn associate_empty_and_obvious() {
    let p = TrackerParams::default();
    let dets = vec![car(0, 0.0, 0.0), car(0, 10.0, 0.0)];
    let a = associate::<f64>(&[], &dets, &p);
    assert_eq!(a.unmatched_dets, vec![0, 1]);
    let tracks = vec![track_at(10.3, [0.0; 3]), track_at(0.2, [0.0; 3])];
    let a = associate(&tracks, &dets, &p);
    assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
    assert!(a.unmatched_tracks.is_empty() && a.unmatched_dets.is_empty());
}

#[test]
fn associate_gates_class_and_distance() {
    let p = TrackerParams::default();
    let tracks = vec![track_at(0.0, [0.0; 3])];
    let a = associate(&tracks, &[det(0, ObjectClass::Truck, 0.0, 0.0)], &p);
    assert!(a.matches.is_empty());
    let a = associate(&tracks, &[car(0, 2.5, 0.0)], &p);
    assert!(a.matches.is_empty());
    let iou = TrackerParams { match_metric: MatchMetric::BevIou, ..p };
    assert_eq!(associate(&tracks, &[car(0, 1.0, 0.0)], &iou).matches, vec![(0, 0)]);
    assert!(associate(&tracks, &[car(0, 4.4, 0.0)], &iou).matches.is_empty());
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #[test]
    fn association_cost_is_brute_force_minimum(
        xs in prop::collection::vec(-0.7f64..0.7, 12),
    ) {
        // 6 tracks and 6 dets, all pairs inside the 2 m gate
        let tracks: Vec<_> = (0..6).map(|i| track_at(xs[i], [0.0; 3])).collect();
        let dets: Vec<_> = (0..6).map(|j| car(0, xs[6 + j], 0.0)).collect();
        let a = associate(&tracks, &dets, &TrackerParams::default());
        prop_assert_eq!(a.matches.len(), 6);
        let dist = |i: usize, j: usize| (xs[i] - xs[6 + j]).abs();
        let got: f64 = a.matches.iter().map(|&(i, j)| dist(i, j)).sum();
        let best = permutations(6)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| dist(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((got - best).abs() < 1e-9);
    }

    #[test]
    fn ids_unique_and_matches_consistent(
        stream in prop::collection::vec(prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 0..6), 1..25),
    ) {
        let mut tracker = Tracker::<f64>::new(TrackerParams::default()).unwrap();
        let mut retired = std::collections::BTreeSet::new();
        let mut seen = std::collections::BTreeSet::new();
        for (f, objs) in stream.iter().enumerate() {
            let dets: Vec<_> = objs.iter().map(|&(x, y)| car(f as u64, x, y)).collect();
            let live_before: std::collections::BTreeSet<u64> = tracker.tracks().iter().map(|t| t.id).collect();
            let out = tracker.step(f as u64, &dets).unwrap();
            let live: std::collections::BTreeSet<u64> = tracker.tracks().iter().map(|t| t.id).collect();
            for id in live_before.difference(&live) {
                retired.insert(*id);
            }
            for id in &live {
                prop_assert!(!retired.contains(id));
                seen.insert(*id);
            }
            prop_assert!(out.len() <= dets.len());
            for t in tracker.tracks() {
                prop_assert!(t.time_since_update <= 2);
                prop_assert!(t.covariance.is_symmetric(1e-9) && t.covariance.is_positive_definite());
            }
        }
    }
}

#[test]
fn confirmation_after_min_hits() {
    let mut tr = Tracker::<f64>::new(TrackerParams::default()).unwrap();
    for f in 0..5 {
        assert!(tr.step(f, &[]).unwrap().is_empty());
    }
    assert!(tr.step(5, &[car(5, 0.0, 0.0)]).unwrap().is_empty());
    assert!(tr.step(6, &[car(6, 0.1, 0.0)]).unwrap().is_empty());
    let out = tr.step(7, &[car(7, 0.2, 0.0)]).unwrap();
    assert_eq!(out.len(), 1);
    let id = out[0].id;
    let out = tr.step(8, &[car(8, 0.3, 0.0)]).unwrap();
    assert_eq!(out[0].id, id);
}

#[test]
fn death_after_max_age_misses() {
    let mut tr = Tracker::<f64>::new(TrackerParams::default()).unwrap();
    for f in 0..4 {
        tr.step(f, &[car(f, 0.0, 0.0)]).unwrap();
    }
    tr.step(4, &[]).unwrap();
    tr.step(5, &[]).unwrap();
    assert_eq!(tr.tracks().len(), 1);
    tr.step(6, &[]).unwrap();
    assert!(tr.tracks().is_empty());
    // a returning object gets a fresh id
    tr.step(7, &[car(7, 0.0, 0.0)]).unwrap();
    assert_eq!(tr.tracks()[0].id, 2);
}

#[test]
fn out_of_order_frame_rejected() {
    let mut tr = Tracker::<f64>::new(TrackerParams::default()).unwrap();
    tr.step(3, &[]).unwrap();
    assert!(tr.step(3, &[]).is_err());
    assert!(tr.step(2, &[]).is_err());
}

#[test]
fn crossing_targets_keep_ids() {
    let mut tr = Tracker::<f64>::new(TrackerParams::default()).unwrap();
    let mut ids = std::collections::BTreeMap::new();
    for f in 0..60u64 {
        let t = f as f64 * 0.05;
        // a car heading east and a pedestrian heading west cross at t = 1.5 s
        let dets = vec![
            det(f, ObjectClass::Car, -15.0 + 10.0 * t, 0.0),
            det(f, ObjectClass::Pedestrian, 2.25 - 1.5 * t, 0.3),
        ];
        for trk in tr.step(f, &dets).unwrap() {
            let prev = ids.insert(trk.class, trk.id);
            if let Some(p) = prev {
                assert_eq!(p, trk.id, "{} changed id", trk.class);
            }
        }
    }
    assert_eq!(ids.len(), 2);
}

#[test]
fn constant_velocity_error_vanishes() {
    let params = TrackerParams::default();
    let mut tr = Tracker::<f64>::new(params).unwrap();
    let mut errs = Vec::new();
    for f in 0..40u64 {
        let x = 3.0 + 8.0 * f as f64 * 0.05;
        let out = tr.step(f, &[car(f, x, 0.0)]).unwrap();
        let t = &tr.tracks()[0];
        assert_eq!(t.id, 1);
        if !out.is_empty() {
            errs.push((t.state[0] - x).abs());
        }
    }
    let rms = |s: &[f64]| (s.iter().map(|e| e * e).sum::<f64>() / s.len() as f64).sqrt();
    let windows: Vec<f64> = errs.chunks(5).map(rms).collect();
    for w in windows.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{windows:?}");
    }
    assert!(*errs.last().unwrap() < 0.05, "{errs:?}");
}
