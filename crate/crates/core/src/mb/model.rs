//! Linear-Gaussian motion and sensor models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::scalar::Real;

/// Axis-aligned surveillance rectangle (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn square(half_width: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area() > 0.0) || !self.area().is_finite() {
            return Err(FusionError::InvalidConfig(format!(
                "region {self:?} has no positive finite area"
            )));
        }
        Ok(())
    }
}

/// `x_k = F x_{k-1} + v`, `v ~ N(0, Q)`, survival probability `P_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel<T: Real> {
    pub transition: DMatrix<T>,
    pub process_noise: DMatrix<T>,
    pub survival: T,
    /// Sampling period (s).
    pub dt: T,
}

impl<T: Real> MotionModel<T> {
    /// Nearly-constant-velocity model on `[px, py, vx, vy]`.
    ///
    /// `Q = σ_v² [[Δ⁴/4 I, Δ³/2 I], [Δ³/2 I, Δ² I]]`, the discretized
    /// white-acceleration form.
    pub fn constant_velocity(dt: T, sigma_v: T, survival: T) -> Self {
        let mut f = DMatrix::identity(4, 4);
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let s2 = sigma_v * sigma_v;
        let dt2 = dt * dt;
        let (a, b, c) = (
            s2 * dt2 * dt2 / T::lit(4.0),
            s2 * dt2 * dt / T::lit(2.0),
            s2 * dt2,
        );
        let q = DMatrix::from_row_slice(
            4,
            4,
            &[
                a,
                T::zero(),
                b,
                T::zero(),
                T::zero(),
                a,
                T::zero(),
                b,
                b,
                T::zero(),
                c,
                T::zero(),
                T::zero(),
                b,
                T::zero(),
                c,
            ],
        );
        Self {
            transition: f,
            process_noise: q,
            survival,
            dt,
        }
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn predict_state(&self, x: &DVector<T>) -> DVector<T> {
        &self.transition * x
    }
}

/// `z = H x + w`, `w ~ N(0, R)`, constant detection probability and
/// Poisson clutter uniform over `region`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel<T: Real> {
    pub observation: DMatrix<T>,
    pub noise: DMatrix<T>,
    pub detection: T,
    /// Expected clutter reports per scan.
    pub clutter_rate: T,
    pub region: Region,
}

impl<T: Real> SensorModel<T> {
    /// Position-only sensor on the `[px, py, vx, vy]` state, `R = σ² I`.
    pub fn position(sigma: T, detection: T, clutter_rate: T, region: Region) -> Self {
        let mut h = DMatrix::zeros(2, 4);
        h[(0, 0)] = T::one();
        h[(1, 1)] = T::one();
        Self {
            observation: h,
            noise: DMatrix::identity(2, 2) * (sigma * sigma),
            detection,
            clutter_rate,
            region,
        }
    }

    pub fn measurement_dim(&self) -> usize {
        self.observation.nrows()
    }

    /// Clutter intensity `κ(z) = λ / area`.
    pub fn clutter_intensity(&self) -> T {
        self.clutter_rate / T::lit(self.region.area())
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if !(self.detection >= T::zero() && self.detection <= T::one()) {
            return Err(FusionError::InvalidConfig(format!(
                "detection probability {} outside [0, 1]",
                self.detection
            )));
        }
        if !(self.clutter_rate >= T::zero()) {
            return Err(FusionError::InvalidConfig(format!(
                "clutter rate {} is negative",
                self.clutter_rate
            )));
        }
        crate::gm::cholesky(&self.noise).map(|_| ())
    }
}
