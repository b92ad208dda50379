use crate::error::{Error, Result};
use crate::geometry::{ObjectClass, OrientedBox, Vec3};
use crate::linalg::Matrix;
use crate::scalar::{lit, wrap_angle, Real};

use super::TrackerParams;
use crate::detector::{Detection, MIN_EXTENT};

/// State layout: x, y, z, yaw, l, w, h, vx, vy, vz.
pub const STATE_DIM: usize = 10;
/// Measured components: x, y, z, yaw, l, w, h.
pub const MEAS_DIM: usize = 7;

const YAW: usize = 3;

/// Filtered state of a track at one updated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord<T> {
    pub frame_index: u64,
    pub state: [T; STATE_DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState<T> {
    pub id: u64,
    pub class: ObjectClass,
    pub state: [T; STATE_DIM],
    pub covariance: Matrix<T>,
    pub hits: u32,
    /// Frames since birth.
    pub age: u32,
    pub time_since_update: u32,
    pub history: Vec<TrackRecord<T>>,
    /// Frame of the last prediction or update.
    pub frame_index: u64,
}

/// No eigenvalue below zero beyond rounding. Exactly singular covariances
/// (a perfectly known component) are left alone.
fn is_semidefinite<T: Real>(p: &Matrix<T>) -> bool {
    let (eig, _) = p.symmetric_eigen();
    let scale = eig.iter().fold(T::one(), |m, e| m.max(e.abs()));
    eig.iter().all(|&e| e >= -lit::<T>(1e-12) * scale)
}

/// Wraps into `(-pi/2, pi/2]`.
fn wrap_half<T: Real>(a: T) -> T {
    let mut a = wrap_angle(a);
    if a > T::FRAC_PI_2() {
        a -= T::PI();
    } else if a <= -T::FRAC_PI_2() {
        a += T::PI();
    }
    a
}

/// Yaw innovation after the orientation-flip correction: a detection facing
/// the opposite way (more than a quarter turn off) is turned around first.
pub fn yaw_innovation<T: Real>(measured: T, predicted: T) -> T {
    let mut d = wrap_angle(measured - predicted);
    if d.abs() > T::FRAC_PI_2() {
        d = wrap_angle(d + T::PI());
    }
    wrap_half(d)
}

impl<T: Real> TrackState<T> {
    pub fn from_detection(id: u64, det: &Detection<T>, params: &TrackerParams) -> Self {
        let b = &det.bbox;
        let state = [
            b.center.x,
            b.center.y,
            b.center.z,
            b.yaw,
            b.length,
            b.width,
            b.height,
            T::zero(),
            T::zero(),
            T::zero(),
        ];
        let p0: Vec<T> = params.initial_variance.iter().map(|&v| lit(v)).collect();
        let mut t = Self {
            id,
            class: det.class,
            state,
            covariance: Matrix::from_diag(&p0),
            hits: 1,
            age: 0,
            time_since_update: 0,
            history: Vec::new(),
            frame_index: det.frame_index,
        };
        t.record();
        t
    }

    fn record(&mut self) {
        self.history.push(TrackRecord { frame_index: self.frame_index, state: self.state });
    }

    pub fn position(&self) -> Vec3<T> {
        Vec3::new(self.state[0], self.state[1], self.state[2])
    }

    pub fn velocity(&self) -> Vec3<T> {
        Vec3::new(self.state[7], self.state[8], self.state[9])
    }

    pub fn bbox(&self) -> OrientedBox<T> {
        let s = &self.state;
        let min = lit::<T>(MIN_EXTENT);
        OrientedBox::new_unchecked(self.position(), s[4].max(min), s[5].max(min), s[6].max(min), s[3])
    }

    /// Constant-velocity prediction by `dt` seconds. Returns `true` when the
    /// propagated covariance had a negative eigenvalue and was repaired
    /// (eigenvalues clamped at 1e-9).
    pub fn predict(&mut self, dt: T, process_noise: &[T]) -> bool {
        debug_assert!(dt > T::zero());
        for k in 0..3 {
            self.state[k] += self.state[7 + k] * dt;
        }
        let mut f = Matrix::identity(STATE_DIM);
        for k in 0..3 {
            f[(k, 7 + k)] = dt;
        }
        let q = Matrix::from_diag(process_noise);
        let p = &(&(&f * &self.covariance) * &f.transpose()) + &q;
        let p = p.symmetrized();
        let (p, repaired) = if p.is_positive_definite() || is_semidefinite(&p) {
            (p, false)
        } else {
            p.clamp_to_pd(lit(1e-9))
        };
        if repaired {
            log::warn!("track {}: covariance lost positive definiteness and was repaired", self.id);
        }
        self.covariance = p;
        self.age += 1;
        self.time_since_update += 1;
        repaired
    }

    /// Kalman measurement update with a detection box.
    pub fn update(&mut self, det: &Detection<T>, measurement_noise: &[T]) -> Result<()> {
        let b = &det.bbox;
        let z = [b.center.x, b.center.y, b.center.z, b.yaw, b.length, b.width, b.height];
        let mut y = [T::zero(); MEAS_DIM];
        for k in 0..MEAS_DIM {
            y[k] = z[k] - self.state[k];
        }
        y[YAW] = yaw_innovation(z[YAW], self.state[YAW]);

        let mut h = Matrix::zeros(MEAS_DIM, STATE_DIM);
        for k in 0..MEAS_DIM {
            h[(k, k)] = T::one();
        }
        let r = Matrix::from_diag(measurement_noise);
        let ph = &self.covariance * &h.transpose();
        let s = &(&h * &ph) + &r;
        let s_inv = s
            .inverse()
            .ok_or_else(|| Error::Numerical(format!("track {}: singular innovation covariance", self.id)))?;
        let k = &ph * &s_inv;
        for i in 0..STATE_DIM {
            let mut acc = T::zero();
            for j in 0..MEAS_DIM {
                acc += k[(i, j)] * y[j];
            }
            self.state[i] += acc;
        }
        self.state[YAW] = wrap_angle(self.state[YAW]);
        let min = lit::<T>(MIN_EXTENT);
        for i in 4..7 {
            self.state[i] = self.state[i].max(min);
        }
        // Joseph form keeps the covariance symmetric positive definite
        let ikh = &Matrix::identity(STATE_DIM) - &(&k * &h);
        let p = &(&(&ikh * &self.covariance) * &ikh.transpose()) + &(&(&k * &r) * &k.transpose());
        self.covariance = p.symmetrized();
        self.hits += 1;
        self.time_since_update = 0;
        self.frame_index = det.frame_index;
        self.record();
        Ok(())
    }
}
