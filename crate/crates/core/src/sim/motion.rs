use super::scene::{Actor, Scene};
use crate::geometry::{ObjectClass, OrientedBox, Vec3};

/// Half-window of the central difference used for accelerations, seconds.
pub const FD_STEP: f64 = 0.05;

/// Exact kinematic state of one actor at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord {
    pub frame_index: u64,
    pub actor_id: u32,
    pub class: ObjectClass,
    pub bbox: OrientedBox<f64>,
    pub velocity: Vec3<f64>,
    pub acceleration: Vec3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub position: [f64; 2],
    pub heading: f64,
    pub velocity: [f64; 2],
}

impl Actor {
    fn segment(&self, k: usize) -> ([f64; 2], [f64; 2], f64) {
        let (a, b) = (self.path[k], self.path[k + 1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        (a, [(b[0] - a[0]) / len, (b[1] - a[1]) / len], len)
    }

    /// Time needed to finish the path; infinite if some segment has speed 0.
    pub fn travel_time(&self) -> f64 {
        (0..self.speeds.len())
            .map(|k| self.segment(k).2 / self.speeds[k])
            .sum()
    }

    /// Samples the path `tau` seconds after spawning. Outside `[0, travel_time]`
    /// the segment velocity is extrapolated but `None` marks absence.
    fn sample_clamped(&self, tau: f64) -> PathSample {
        let mut remaining = tau.max(0.0);
        let last = self.speeds.len() - 1;
        for k in 0..=last {
            let (a, dir, len) = self.segment(k);
            let speed = self.speeds[k];
            let dur = len / speed;
            if remaining < dur || k == last {
                let s = (remaining * speed).min(len);
                let s = if speed == 0.0 { 0.0 } else { s };
                return PathSample {
                    position: [a[0] + dir[0] * s, a[1] + dir[1] * s],
                    heading: dir[1].atan2(dir[0]),
                    velocity: [dir[0] * speed, dir[1] * speed],
                };
            }
            remaining -= dur;
        }
        unreachable!("path has at least one segment")
    }

    pub fn sample(&self, t: f64) -> Option<PathSample> {
        let tau = t - self.spawn_time;
        if tau < 0.0 || tau > self.travel_time() + 1e-9 {
            return None;
        }
        Some(self.sample_clamped(tau))
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.sample(t).is_some()
    }

    pub fn state_at(&self, t: f64, frame_index: u64) -> Option<GroundTruthRecord> {
        let s = self.sample(t)?;
        let tau = t - self.spawn_time;
        let before = self.sample_clamped(tau - FD_STEP).velocity;
        let after = self.sample_clamped(tau + FD_STEP).velocity;
        let [l, w, h] = self.dims;
        Some(GroundTruthRecord {
            frame_index,
            actor_id: self.id,
            class: self.class,
            bbox: OrientedBox::new_unchecked(Vec3::new(s.position[0], s.position[1], h / 2.0), l, w, h, s.heading),
            velocity: Vec3::new(s.velocity[0], s.velocity[1], 0.0),
            acceleration: Vec3::new(
                (after[0] - before[0]) / (2.0 * FD_STEP),
                (after[1] - before[1]) / (2.0 * FD_STEP),
                0.0,
            ),
        })
    }
}

/// Ground truth of every active actor at time `t` (seconds).
pub fn step_actors(scene: &Scene, t: f64) -> Vec<GroundTruthRecord> {
    let frame = frame_at(scene.rate, t);
    scene.actors.iter().filter_map(|a| a.state_at(t, frame)).collect()
}

pub fn frame_at(rate: f64, t: f64) -> u64 {
    (t.max(0.0) * rate).round() as u64
}

pub fn time_of(rate: f64, frame: u64) -> f64 {
    frame as f64 / rate
}

/// Ground truth for every frame in `frames`, ordered by frame then actor.
pub fn export_gt(scene: &Scene, frames: std::ops::Range<u64>) -> Vec<GroundTruthRecord> {
    frames
        .flat_map(|f| {
            let t = time_of(scene.rate, f);
            scene.actors.iter().filter_map(move |a| a.state_at(t, f))
        })
        .collect()
}
