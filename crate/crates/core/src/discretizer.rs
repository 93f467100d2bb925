//! Exact zero-order-hold discretization for a per-step sampling period.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::matseries::{self, SeriesOptions};
use crate::plant::{MotorParams, PlantState};

pub(crate) fn to_dynamic(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

pub(crate) fn from_dynamic(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

/// `Φ(M)` for a 3×3 argument with default truncation.
pub(crate) fn phi3(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    matseries::phi(&to_dynamic(m)).map(|p| from_dynamic(&p))
}

/// One step of `x_{k+1} = F x_k + G u_k`, with `Φ(A h)` kept for the
/// controller's energy terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub f: Matrix3<f64>,
    pub g: Vector3<f64>,
    pub phi: Matrix3<f64>,
    pub h: f64,
}

impl DiscreteModel {
    pub fn step(&self, x: &PlantState, u: f64) -> PlantState {
        PlantState::from_vector(&(self.f * x.to_vector() + self.g * u))
    }

    /// Row of `F` predicting θ̇ at the next sample (without the input part).
    pub fn rotational_row(&self) -> Vector3<f64> {
        self.f.row(1).transpose()
    }

    /// `F_m · x`.
    pub fn predicted_omega(&self, x: &PlantState) -> f64 {
        self.rotational_row().dot(&x.to_vector())
    }
}

/// Discretize `(A, B)` directly; `p` only supplies the matrices.
pub fn discretize_matrices(
    a: &Matrix3<f64>,
    b: &Vector3<f64>,
    h: f64,
    opts: &SeriesOptions,
) -> Result<DiscreteModel> {
    let ah = to_dynamic(&(a * h));
    let pe = matseries::phi_exp_with(&ah, opts)?;
    let phi = from_dynamic(&pe.phi);
    // F = I + A h Φ(A h)
    let f = Matrix3::identity() + a * h * phi;
    let g = phi * b * h;
    Ok(DiscreteModel { f, g, phi, h })
}

/// ZOH model of the motor for period `h`. Periods below `eps_h` are rejected.
pub fn discretize(p: &MotorParams, h: f64, eps_h: f64) -> Result<DiscreteModel> {
    discretize_with(p, h, eps_h, &SeriesOptions::default())
}

pub fn discretize_with(
    p: &MotorParams,
    h: f64,
    eps_h: f64,
    opts: &SeriesOptions,
) -> Result<DiscreteModel> {
    if !h.is_finite() || h < eps_h || h <= 0.0 {
        return Err(Error::SamplingTooSmall { h, eps_h });
    }
    let (a, b) = p.continuous_matrices();
    discretize_matrices(&a, &b, h, opts)
}
