use crate::linalg::Matrix;
use crate::scalar::{lit, Real};

/// Per-frame estimates of one axis: position, velocity, acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisEstimate<T> {
    pub filtered: Vec<[T; 3]>,
    pub filtered_cov: Vec<Matrix<T>>,
    pub smoothed: Vec<[T; 3]>,
    pub smoothed_cov: Vec<Matrix<T>>,
}

/// Constant-acceleration transition over `dt`.
fn transition<T: Real>(dt: T) -> Matrix<T> {
    let half = lit::<T>(0.5);
    Matrix::from_rows(&[
        &[T::one(), dt, half * dt * dt],
        &[T::zero(), T::one(), dt],
        &[T::zero(), T::zero(), T::one()],
    ])
}

/// Discretized white-jerk process noise with spectral density `q`.
fn process_noise<T: Real>(dt: T, q: T) -> Matrix<T> {
    let d2 = dt * dt;
    let d3 = d2 * dt;
    let d4 = d3 * dt;
    let d5 = d4 * dt;
    Matrix::from_rows(&[
        &[d5 / lit(20.0), d4 / lit(8.0), d3 / lit(6.0)],
        &[d4 / lit(8.0), d3 / lit(3.0), d2 / lit(2.0)],
        &[d3 / lit(6.0), d2 / lit(2.0), dt],
    ])
    .scale(q)
}

fn mat_vec<T: Real>(m: &Matrix<T>, v: &[T; 3]) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for (r, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|c| m[(r, c)] * v[c]).fold(T::zero(), |a, b| a + b);
    }
    out
}

/// Vague prior variance on the initial velocity and acceleration.
const DIFFUSE: f64 = 1e6;

/// Forward Kalman filter and backward Rauch-Tung-Striebel pass over
/// position measurements `z` at strictly increasing times `t`.
pub fn rts_axis<T: Real>(t: &[T], z: &[T], jerk_psd: T, meas_var: T) -> AxisEstimate<T> {
    let n = z.len();
    assert_eq!(t.len(), n);
    let mut filtered = Vec::with_capacity(n);
    let mut filtered_cov = Vec::with_capacity(n);
    let mut predicted: Vec<([T; 3], Matrix<T>)> = Vec::with_capacity(n);
    if n == 0 {
        return AxisEstimate { filtered, filtered_cov, smoothed: Vec::new(), smoothed_cov: Vec::new() };
    }
    let mut x = [z[0], T::zero(), T::zero()];
    let mut p = Matrix::from_diag(&[meas_var, lit(DIFFUSE), lit(DIFFUSE)]);
    predicted.push((x, p.clone()));
    filtered.push(x);
    filtered_cov.push(p.clone());
    for k in 1..n {
        let dt = t[k] - t[k - 1];
        let f = transition(dt);
        let xp = mat_vec(&f, &x);
        let pp = (&(&(&f * &p) * &f.transpose()) + &process_noise(dt, jerk_psd)).symmetrized();
        predicted.push((xp, pp.clone()));
        // scalar measurement of position
        let s = pp[(0, 0)] + meas_var;
        let gain = [pp[(0, 0)] / s, pp[(1, 0)] / s, pp[(2, 0)] / s];
        let innov = z[k] - xp[0];
        x = [xp[0] + gain[0] * innov, xp[1] + gain[1] * innov, xp[2] + gain[2] * innov];
        let mut ikh = Matrix::identity(3);
        for r in 0..3 {
            ikh[(r, 0)] -= gain[r];
        }
        let mut kr = Matrix::zeros(3, 3);
        for r in 0..3 {
            for c in 0..3 {
                kr[(r, c)] = gain[r] * gain[c] * meas_var;
            }
        }
        p = (&(&(&ikh * &pp) * &ikh.transpose()) + &kr).symmetrized();
        filtered.push(x);
        filtered_cov.push(p.clone());
    }

    let mut smoothed = filtered.clone();
    let mut smoothed_cov = filtered_cov.clone();
    for k in (0..n - 1).rev() {
        let f = transition(t[k + 1] - t[k]);
        let (xp, pp) = &predicted[k + 1];
        let Some(pp_inv) = pp.inverse() else { continue };
        let c = &(&filtered_cov[k] * &f.transpose()) * &pp_inv;
        let dx = [smoothed[k + 1][0] - xp[0], smoothed[k + 1][1] - xp[1], smoothed[k + 1][2] - xp[2]];
        let corr = mat_vec(&c, &dx);
        smoothed[k] = [filtered[k][0] + corr[0], filtered[k][1] + corr[1], filtered[k][2] + corr[2]];
        let dp = &smoothed_cov[k + 1] - pp;
        smoothed_cov[k] = (&filtered_cov[k] + &(&(&c * &dp) * &c.transpose())).symmetrized();
    }
    AxisEstimate { filtered, filtered_cov, smoothed, smoothed_cov }
}
