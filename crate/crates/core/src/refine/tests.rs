use super::*;
use crate::noise::normal_pair;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn frame(i: u64, p: [f64; 3], yaw: f64) -> TrajectoryFrame<f64> {
    TrajectoryFrame {
        frame_index: i,
        t: i as f64 * 0.05,
        position: Vec3::from_array(p),
        velocity: Vec3::zeros(),
        acceleration: Vec3::zeros(),
        yaw,
        dims: [4.5, 1.8, 1.6],
        points_in_box: 10,
    }
}

fn line(n: u64) -> Trajectory<f64> {
    let frames = (0..n).map(|i| frame(i, [1.0 + 0.4 * i as f64, -2.0 + 0.1 * i as f64, 0.8], 0.0)).collect();
    Trajectory::new(1, ObjectClass::Car, frames).unwrap()
}

#[test]
fn length_and_count() {
    let t = line(11);
    assert_eq!(t.n_frames(), 11);
    assert!((t.length() - 10.0 * (0.16f64 + 0.01).sqrt()).abs() < 1e-12);
}

#[test]
fn duplicate_frames_rejected() {
    assert!(Trajectory::new(1, ObjectClass::Car, vec![frame(1, [0.0; 3], 0.0), frame(1, [0.0; 3], 0.0)]).is_err());
}

#[test]
fn smoothing_linear_track_keeps_it() {
    let t = line(60);
    let s = smooth(&t, &SmoothingModel::default());
    assert_eq!(s.n_frames(), t.n_frames());
    for (a, b) in s.frames.iter().zip(&t.frames) {
        assert!((a.position - b.position).norm() < 1e-6);
        assert!((a.velocity - Vec3::new(8.0, 2.0, 0.0)).norm() < 1e-4);
        assert_eq!(a.frame_index, b.frame_index);
    }
}

#[test]
fn single_frame_unchanged() {
    let t = line(1);
    assert_eq!(smooth(&t, &SmoothingModel::default()), t);
    assert_eq!(refine(&t, &RefineParams::default()), t);
}

#[test]
fn smoother_beats_filter_on_most_seeds() {
    let n = 100;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
    let mut wins = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = times.iter().map(|&t| 3.0 + 5.0 * t).collect();
        let z: Vec<f64> = truth.iter().map(|x| x + 0.3 * normal_pair(&mut rng).0).collect();
        let est = rts_axis(&times, &z, 1.0, 0.09);
        let rmse = |v: &[[f64; 3]]| (v.iter().zip(&truth).map(|(e, x)| (e[0] - x).powi(2)).sum::<f64>() / n as f64).sqrt();
        if rmse(&est.smoothed) < rmse(&est.filtered) {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins}");
}

#[test]
fn static_object_speed_near_zero() {
    // positions of a parked car as the tracker reports them
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frames = (0..200)
        .map(|i| {
            let (a, b) = normal_pair(&mut rng);
            let (c, _) = normal_pair(&mut rng);
            frame(i, [4.0 + 0.05 * a, -3.0 + 0.05 * b, 0.8 + 0.05 * c], 0.0)
        })
        .collect();
    let t = Trajectory::new(1, ObjectClass::Car, frames).unwrap();
    let s = smooth(&t, &SmoothingModel::default());
    let mean = s.frames.iter().map(|f| f.velocity.norm()).sum::<f64>() / s.n_frames() as f64;
    assert!(mean < 0.05, "mean speed {mean}");
}

#[test]
fn dims_from_best_covered_frame() {
    let mut t = line(3);
    for (f, (n, l)) in t.frames.iter_mut().zip([(3, 4.0), (50, 4.4), (7, 3.0)]) {
        f.points_in_box = n;
        f.dims = [l, 1.8, 1.5];
    }
    assert_eq!(fix_dimensions(&t), Some([4.4, 1.8, 1.5]));
    for f in &mut t.frames {
        f.points_in_box = 9;
    }
    assert_eq!(fix_dimensions(&t), Some([4.0, 1.8, 1.5]));
    assert!(apply_fixed_dimensions(&t).frames.iter().all(|f| f.dims == [4.0, 1.8, 1.5]));
}

#[test]
fn heading_window_one_is_identity() {
    let mut t = line(10);
    for (i, f) in t.frames.iter_mut().enumerate() {
        f.yaw = 0.3 * (i as f64).sin();
    }
    assert_eq!(smooth_heading(&t, 1), t);
}

#[test]
fn constant_heading_unchanged() {
    let mut t = line(10);
    for f in &mut t.frames {
        f.yaw = -2.5;
    }
    for f in smooth_heading(&t, 7).frames {
        assert!((f.yaw + 2.5).abs() < 1e-12);
    }
}

#[test]
fn seam_crossing_stays_continuous() {
    let mut t = line(30);
    for (i, f) in t.frames.iter_mut().enumerate() {
        f.yaw = wrap_angle(PI - 0.3 + 0.02 * i as f64 + if i % 2 == 0 { 0.01 } else { -0.01 });
    }
    let max_step = |tr: &Trajectory<f64>| {
        tr.frames.windows(2).map(|w| wrap_angle(w[1].yaw - w[0].yaw).abs()).fold(0.0, f64::max)
    };
    let s = smooth_heading(&t, 7);
    assert!(max_step(&s) < max_step(&t));
    for f in &s.frames {
        assert!(f.yaw > -PI && f.yaw <= PI);
    }
    // naive averaging across the seam would land near zero
    assert!(s.frames.iter().all(|f| f.yaw.abs() > 2.5));
}

#[test]
fn heading_follows_velocity() {
    let mut t = line(20);
    for f in &mut t.frames {
        f.yaw = 0.1 + PI;
    }
    let r = refine(&t, &RefineParams::default());
    for f in &r.frames {
        assert!((f.yaw - 0.1).abs() < 0.2, "{}", f.yaw);
    }
}

#[test]
fn slow_object_keeps_heading() {
    let frames = (0..10).map(|i| frame(i, [0.0, 0.0, 0.8], 2.0)).collect();
    let t = Trajectory::new(1, ObjectClass::Pedestrian, frames).unwrap();
    let r = resolve_heading(&t, 0.5);
    assert!(r.frames.iter().all(|f| f.yaw == 2.0));
}

proptest! {
    #[test]
    fn kernel_weights_sum_to_one(half in 0usize..6, len in 1usize..30, c in 0usize..30) {
        prop_assume!(c < len);
        let (lo, w) = triangular_weights::<f64>(2 * half + 1, c, len);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(lo + w.len() <= len);
        prop_assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn refinement_preserves_frames(n in 1u64..40, noise in prop::collection::vec(-0.3f64..0.3, 40)) {
        let frames = (0..n).map(|i| frame(i, [0.5 * i as f64 + noise[i as usize], noise[(i as usize + 7) % 40], 0.8], noise[i as usize])).collect();
        let t = Trajectory::new(3, ObjectClass::Bicycle, frames).unwrap();
        let r = refine(&t, &RefineParams::default());
        prop_assert_eq!(r.n_frames(), t.n_frames());
        for (a, b) in r.frames.iter().zip(&t.frames) {
            prop_assert_eq!(a.frame_index, b.frame_index);
        }
    }
}
