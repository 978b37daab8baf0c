//! Constant-velocity Kalman filter over the `(u, v, gamma, h)` box state.
//!
//! Process and measurement noise scale with the box height, so a target
//! twice as tall is allowed twice the positional spread. The aspect ratio
//! slots use small fixed standard deviations instead.

use nalgebra::{Cholesky, SMatrix, Vector4};

use crate::error::{Error, Result};
use crate::model::{Measurement, StateVector};

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Matrix4 = SMatrix<f64, 4, 4>;

const ASPECT_STD_INIT: f64 = 1e-2;
const ASPECT_VEL_STD_INIT: f64 = 1e-5;
const ASPECT_STD_PROCESS: f64 = 1e-2;
const ASPECT_VEL_STD_PROCESS: f64 = 1e-5;
const ASPECT_STD_MEASUREMENT: f64 = 1e-1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
        }
    }
}

impl NoiseProfile {
    pub fn is_valid(&self) -> bool {
        self.std_weight_position > 0.0
            && self.std_weight_position.is_finite()
            && self.std_weight_velocity > 0.0
            && self.std_weight_velocity.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub mean: StateVector,
    pub covariance: Matrix8,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KalmanFilter {
    noise: NoiseProfile,
}

fn diagonal8(std: [f64; 8]) -> Matrix8 {
    Matrix8::from_diagonal(&std.map(|s| s * s).into())
}

fn symmetrize8(m: &Matrix8) -> Matrix8 {
    (m + m.transpose()) * 0.5
}

impl KalmanFilter {
    pub fn new(noise: NoiseProfile) -> Self {
        Self { noise }
    }

    pub fn noise(&self) -> &NoiseProfile {
        &self.noise
    }

    pub fn initiate(&self, measurement: &Measurement) -> TrackState {
        let h = measurement[3];
        let pos = 2.0 * self.noise.std_weight_position * h;
        let vel = 10.0 * self.noise.std_weight_velocity * h;
        TrackState {
            mean: StateVector::from_measurement(measurement),
            covariance: diagonal8([
                pos,
                pos,
                ASPECT_STD_INIT,
                pos,
                vel,
                vel,
                ASPECT_VEL_STD_INIT,
                vel,
            ]),
        }
    }

    fn process_noise(&self, h: f64) -> Matrix8 {
        let pos = self.noise.std_weight_position * h;
        let vel = self.noise.std_weight_velocity * h;
        diagonal8([
            pos,
            pos,
            ASPECT_STD_PROCESS,
            pos,
            vel,
            vel,
            ASPECT_VEL_STD_PROCESS,
            vel,
        ])
    }

    fn measurement_noise(&self, h: f64) -> Matrix4 {
        let pos = self.noise.std_weight_position * h;
        let std = Vector4::new(pos, pos, ASPECT_STD_MEASUREMENT, pos);
        Matrix4::from_diagonal(&std.component_mul(&std))
    }

    /// Advances the state by one frame.
    pub fn predict(&self, state: &TrackState) -> TrackState {
        let mut transition = Matrix8::identity();
        for i in 0..4 {
            transition[(i, i + 4)] = 1.0;
        }
        let q = self.process_noise(state.mean.height());
        TrackState {
            mean: StateVector(transition * state.mean.0),
            covariance: transition * state.covariance * transition.transpose() + q,
        }
    }

    /// Projects the state into measurement space, returning the positional
    /// mean and the innovation covariance `H P Hᵀ + R`.
    pub fn project(&self, state: &TrackState) -> (Measurement, Matrix4) {
        let mean = state.mean.position();
        let cov = state.covariance.fixed_view::<4, 4>(0, 0).into_owned()
            + self.measurement_noise(state.mean.height());
        (mean, cov)
    }

    pub fn update(&self, state: &TrackState, measurement: &Measurement) -> Result<TrackState> {
        let (projected_mean, projected_cov) = self.project(state);
        let chol = Cholesky::new(projected_cov).ok_or_else(|| {
            Error::NumericDegeneracy("innovation covariance is not positive definite".into())
        })?;
        // P Hᵀ is the left 8x4 block of P.
        let cross = state.covariance.fixed_view::<8, 4>(0, 0).into_owned();
        let gain = chol.solve(&cross.transpose()).transpose();
        let innovation = measurement - projected_mean;

        let mean = state.mean.0 + gain * innovation;
        let covariance = state.covariance - gain * projected_cov * gain.transpose();
        Ok(TrackState {
            mean: StateVector(mean),
            covariance: symmetrize8(&covariance),
        })
    }

    /// Squared Mahalanobis distance of each measurement to the projected state.
    pub fn gating_distance(
        &self,
        state: &TrackState,
        measurements: &[Measurement],
    ) -> Result<Vec<f64>> {
        let (mean, cov) = self.project(state);
        squared_mahalanobis(&mean, &cov, measurements)
    }
}

/// Squared Mahalanobis distances `(m - mean)ᵀ cov⁻¹ (m - mean)`, evaluated
/// through the lower Cholesky factor of `cov`.
pub fn squared_mahalanobis(
    mean: &Measurement,
    cov: &Matrix4,
    measurements: &[Measurement],
) -> Result<Vec<f64>> {
    let chol = Cholesky::new(*cov).ok_or_else(|| {
        Error::NumericDegeneracy("projected covariance is not positive definite".into())
    })?;
    let lower = chol.l();
    measurements
        .iter()
        .map(|m| {
            let z = lower
                .solve_lower_triangular(&(m - mean))
                .ok_or_else(|| Error::NumericDegeneracy("singular Cholesky factor".into()))?;
            Ok(z.norm_squared())
        })
        .collect()
}
