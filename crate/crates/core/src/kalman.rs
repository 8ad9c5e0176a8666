//! Constant-velocity Kalman filter over the box state `(x, y, u, v, w, h)`:
//! center, velocity in pixels per frame, and size.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::raster::BoundingBox;

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix4 = SMatrix<f64, 4, 4>;
pub type Matrix4x6 = SMatrix<f64, 4, 6>;
pub type Matrix6x4 = SMatrix<f64, 6, 4>;
pub type Vector6 = SVector<f64, 6>;
pub type Vector4 = SVector<f64, 4>;

pub const DEFAULT_Q: f64 = 0.01;
pub const DEFAULT_R: f64 = 0.1;

/// Smallest width or height the filter will report.
const MIN_SIZE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionState {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub h: f64,
}

impl MotionState {
    pub fn to_vector(&self) -> Vector6 {
        Vector6::new(self.x, self.y, self.u, self.v, self.w, self.h)
    }

    pub fn from_vector(s: &Vector6) -> Self {
        MotionState {
            x: s[0],
            y: s[1],
            u: s[2],
            v: s[3],
            w: s[4],
            h: s[5],
        }
    }

    pub fn to_box(&self) -> BoundingBox {
        BoundingBox::new(self.x, self.y, self.w, self.h)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// A detected box fed to the correction step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Measurement {
    pub fn to_vector(&self) -> Vector4 {
        Vector4::new(self.x, self.y, self.w, self.h)
    }
}

impl From<BoundingBox> for Measurement {
    fn from(b: BoundingBox) -> Self {
        Measurement {
            x: b.cx,
            y: b.cy,
            w: b.w,
            h: b.h,
        }
    }
}

/// 6x6 state covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateCovariance(pub Matrix6);

impl StateCovariance {
    pub fn identity() -> Self {
        StateCovariance(Matrix6::identity())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanModel {
    /// State transition.
    pub transition: Matrix6,
    /// Measurement matrix selecting `(x, y, w, h)`.
    pub measurement: Matrix4x6,
    pub process_noise: Matrix6,
    pub measurement_noise: Matrix4,
}

impl KalmanModel {
    /// Constant-velocity model with `dt = 1` frame and diagonal noise.
    pub fn constant_velocity(q: f64, r: f64) -> Result<Self> {
        if !(q >= 0.0 && r >= 0.0 && q.is_finite() && r.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise diagonals must be finite and >= 0 (q={q}, r={r})"
            )));
        }
        let mut transition = Matrix6::identity();
        transition[(0, 2)] = 1.0;
        transition[(1, 3)] = 1.0;
        let mut measurement = Matrix4x6::zeros();
        measurement[(0, 0)] = 1.0;
        measurement[(1, 1)] = 1.0;
        measurement[(2, 4)] = 1.0;
        measurement[(3, 5)] = 1.0;
        Ok(KalmanModel {
            transition,
            measurement,
            process_noise: Matrix6::identity() * q,
            measurement_noise: Matrix4::identity() * r,
        })
    }
}

impl Default for KalmanModel {
    fn default() -> Self {
        KalmanModel::constant_velocity(DEFAULT_Q, DEFAULT_R).expect("default noise is valid")
    }
}

/// A-priori state and covariance for the next frame.
pub fn predict(
    state: &MotionState,
    cov: &StateCovariance,
    model: &KalmanModel,
) -> Result<(MotionState, StateCovariance)> {
    if !state.is_finite() {
        return Err(Error::Numeric(format!("non-finite state {state:?}")));
    }
    let h = &model.transition;
    let s = h * state.to_vector();
    let g = h * cov.0 * h.transpose() + model.process_noise;
    Ok((MotionState::from_vector(&s), StateCovariance(g)))
}

/// Kalman gain `G C^T (C G C^T + R)^-1`, computed with a Cholesky solve of
/// the innovation covariance (LU as a fallback for indefinite inputs).
pub fn gain(cov_prior: &StateCovariance, model: &KalmanModel) -> Result<Matrix6x4> {
    let c = &model.measurement;
    let pht = cov_prior.0 * c.transpose();
    let innovation = c * pht + model.measurement_noise;
    // K S = P C^T  <=>  S^T K^T = (P C^T)^T, and S is symmetric.
    let rhs = pht.transpose();
    let kt = match innovation.cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => innovation
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular innovation covariance".into()))?,
    };
    let k = kt.transpose();
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Kalman gain".into()));
    }
    Ok(k)
}

/// Folds a measurement into the a-priori estimate.
pub fn correct(
    state_prior: &MotionState,
    cov_prior: &StateCovariance,
    meas: &Measurement,
    model: &KalmanModel,
) -> Result<(MotionState, StateCovariance)> {
    let k = gain(cov_prior, model)?;
    let c = &model.measurement;
    let prior = state_prior.to_vector();
    let residual = meas.to_vector() - c * prior;
    let mut s = MotionState::from_vector(&(prior + k * residual));
    s.w = s.w.max(MIN_SIZE);
    s.h = s.h.max(MIN_SIZE);
    let g = (Matrix6::identity() - k * c) * cov_prior.0;
    let g = (g + g.transpose()) * 0.5;
    Ok((s, StateCovariance(g)))
}

/// Filter start from a first detection: zero velocity, identity covariance.
pub fn init_filter(b: &BoundingBox) -> (MotionState, StateCovariance) {
    (
        MotionState {
            x: b.cx,
            y: b.cy,
            u: 0.0,
            v: 0.0,
            w: b.w,
            h: b.h,
        },
        StateCovariance::identity(),
    )
}
