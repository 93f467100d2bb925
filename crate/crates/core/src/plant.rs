//! DC motor driving an elastic load: continuous model, energy matrix and the
//! energy functions used by the controller.
//!
//! State ordering is `x = [I, θ̇, θ]` throughout.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::discretizer::{self, DiscreteModel};
use crate::error::{Error, Result};

/// Which version of the state matrix to build.
///
/// `PaperLiteral` keeps the printed third row `[0, 0, 1]` and input column
/// `-1/L`. `Corrected` uses the kinematic row `[0, 1, 0]` (θ integrates θ̇)
/// and `+1/L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fidelity {
    PaperLiteral,
    #[default]
    Corrected,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::PaperLiteral => "paper_literal",
            Fidelity::Corrected => "corrected",
        })
    }
}

impl FromStr for Fidelity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" => Ok(Fidelity::PaperLiteral),
            "corrected" => Ok(Fidelity::Corrected),
            other => Err(Error::InvalidConfig(format!("unknown fidelity `{other}`"))),
        }
    }
}

/// Physical constants of the motor and load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    /// Armature resistance, Ω.
    pub r: f64,
    /// Armature inductance, H.
    pub l: f64,
    /// Back-EMF constant, V·s/rad.
    pub k_b: f64,
    /// Torque constant, N·m/A.
    pub k_m: f64,
    /// Combined motor and load inertia, kg·m².
    pub j: f64,
    /// Combined viscous friction, N·m·s/rad.
    pub b_f: f64,
    /// Load stiffness. Also the third diagonal entry of the energy matrix.
    pub k_l: f64,
    pub fidelity: Fidelity,
}

/// Stiffness-like constant listed alongside the motor data but absent from
/// the dynamics. Kept for reference only.
pub const UNUSED_K: f64 = 0.7;

impl MotorParams {
    /// Reference motor: 1.3 Ω, 1 mH, K_b = K_m = 0.5, J = 0.004, B = 0.04, K_L = 0.4.
    pub fn table_one() -> Self {
        Self {
            r: 1.3,
            l: 0.001,
            k_b: 0.5,
            k_m: 0.5,
            j: 0.004,
            b_f: 0.04,
            k_l: 0.4,
            fidelity: Fidelity::Corrected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("R", self.r),
            ("L", self.l),
            ("K_b", self.k_b),
            ("K_m", self.k_m),
            ("J", self.j),
            ("B_f", self.b_f),
            ("K_L", self.k_l),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "params.{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Continuous-time `(A, B)`.
    pub fn continuous_matrices(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let p = self;
        let third_row = match p.fidelity {
            Fidelity::PaperLiteral => [0.0, 0.0, 1.0],
            Fidelity::Corrected => [0.0, 1.0, 0.0],
        };
        #[rustfmt::skip]
        let a = Matrix3::new(
            -p.r / p.l,  -p.k_b / p.l, 0.0,
            p.k_m / p.j, -p.b_f / p.j, -p.k_l / p.j,
            third_row[0], third_row[1], third_row[2],
        );
        let sign = match p.fidelity {
            Fidelity::PaperLiteral => -1.0,
            Fidelity::Corrected => 1.0,
        };
        (a, Vector3::new(sign / p.l, 0.0, 0.0))
    }

    /// `D = diag(L, J, K_L)`.
    pub fn energy_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.l, self.j, self.k_l))
    }
}

/// Plant state `[I, θ̇, θ]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub current: f64,
    pub omega: f64,
    pub theta: f64,
}

impl PlantState {
    pub const fn new(current: f64, omega: f64, theta: f64) -> Self {
        Self {
            current,
            omega,
            theta,
        }
    }

    /// Initial condition of the reference experiment: I = 0.4, θ̇ = 5, θ = 0.1.
    pub const fn reference_initial() -> Self {
        Self::new(0.4, 5.0, 0.1)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.current, self.omega, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.current.is_finite() && self.omega.is_finite() && self.theta.is_finite()
    }

    /// Largest absolute component.
    pub fn magnitude(&self) -> f64 {
        self.current
            .abs()
            .max(self.omega.abs())
            .max(self.theta.abs())
    }
}

/// Setpoint for the controller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DesiredState {
    pub theta_d: f64,
    pub omega_d: f64,
    pub current_d: f64,
}

impl DesiredState {
    /// θ_d = 2 rad at rest.
    pub const fn reference() -> Self {
        Self {
            theta_d: 2.0,
            omega_d: 0.0,
            current_d: 0.0,
        }
    }
}

/// Stored energy `E = ½ xᵀ D x`.
pub fn energy(x: &PlantState, p: &MotorParams) -> f64 {
    0.5 * (p.l * x.current * x.current + p.j * x.omega * x.omega + p.k_l * x.theta * x.theta)
}

/// Discrete energy rate `E′ = xᵀ D Φ(A h) (A x + B u)` for a prepared model.
pub fn energy_rate_for(x: &PlantState, u: f64, model: &DiscreteModel, p: &MotorParams) -> f64 {
    let (a, b) = p.continuous_matrices();
    let xv = x.to_vector();
    let drift = a * xv + b * u;
    (xv.transpose() * p.energy_matrix() * model.phi * drift)[(0, 0)]
}

/// Discrete energy rate at sampling period `h`.
pub fn energy_rate(x: &PlantState, u: f64, h: f64, p: &MotorParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::SamplingTooSmall { h, eps_h: 0.0 });
    }
    let (a, b) = p.continuous_matrices();
    let phi = discretizer::phi3(&(a * h))?;
    let xv = x.to_vector();
    Ok((xv.transpose() * p.energy_matrix() * phi * (a * xv + b * u))[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretizer::discretize;

    fn ones(fidelity: Fidelity) -> MotorParams {
        MotorParams {
            r: 1.0,
            l: 1.0,
            k_b: 1.0,
            k_m: 1.0,
            j: 1.0,
            b_f: 1.0,
            k_l: 1.0,
            fidelity,
        }
    }

    #[test]
    fn table_one_corrected_matrices() {
        let (a, b) = MotorParams::table_one().continuous_matrices();
        #[rustfmt::skip]
        let expected = Matrix3::new(
            -1300.0, -500.0, 0.0,
            125.0, -10.0, -100.0,
            0.0, 1.0, 0.0,
        );
        assert!((a - expected).amax() < 1e-9);
        assert!((b - Vector3::new(1000.0, 0.0, 0.0)).amax() < 1e-9);
    }

    #[test]
    fn table_one_paper_literal_matrices() {
        let p = MotorParams {
            fidelity: Fidelity::PaperLiteral,
            ..MotorParams::table_one()
        };
        let (a, b) = p.continuous_matrices();
        let (ac, _) = MotorParams::table_one().continuous_matrices();
        assert_eq!(a.fixed_rows::<2>(0), ac.fixed_rows::<2>(0));
        assert_eq!(a.row(2), Matrix3::identity().row(2));
        assert!((b - Vector3::new(-1000.0, 0.0, 0.0)).amax() < 1e-9);
    }

    #[test]
    fn unit_params() {
        for fid in [Fidelity::Corrected, Fidelity::PaperLiteral] {
            let (a, _) = ones(fid).continuous_matrices();
            assert_eq!(a[(0, 0)], -1.0);
            assert_eq!(a[(0, 1)], -1.0);
            assert_eq!(a[(1, 0)], 1.0);
            assert_eq!(a[(1, 1)], -1.0);
            assert_eq!(a[(1, 2)], -1.0);
            assert_eq!(ones(fid).energy_matrix(), Matrix3::identity());
        }
    }

    #[test]
    fn energy_matrix_table_one() {
        let d = MotorParams::table_one().energy_matrix();
        assert_eq!(d, Matrix3::from_diagonal(&Vector3::new(0.001, 0.004, 0.4)));
    }

    #[test]
    fn energy_values() {
        let p = MotorParams::table_one();
        assert_eq!(energy(&PlantState::default(), &p), 0.0);
        let e = energy(&PlantState::reference_initial(), &p);
        assert!((e - 0.05208).abs() < 1e-12);
        let doubled = PlantState::new(0.8, 10.0, 0.2);
        assert!((energy(&doubled, &p) - 4.0 * e).abs() < 1e-12);
        let flipped = PlantState::new(-0.4, -5.0, -0.1);
        assert_eq!(energy(&flipped, &p), e);
    }

    #[test]
    fn energy_rate_zero_state() {
        let p = MotorParams::table_one();
        assert_eq!(energy_rate(&PlantState::default(), 12.0, 0.1, &p).unwrap(), 0.0);
    }

    #[test]
    fn energy_rate_residual_identity() {
        // E′h − (E_{k+1} − E_k) = −½ Δxᵀ D Δx
        let p = MotorParams::table_one();
        let x = PlantState::reference_initial();
        for (u, h) in [(3.0, 0.11), (-20.0, 0.05), (0.0, 0.2), (7.5, 0.013)] {
            let m = discretize(&p, h, 1e-4).unwrap();
            let next = m.step(&x, u);
            let dx = next.to_vector() - x.to_vector();
            let lhs = energy_rate(&x, u, h, &p).unwrap() * h - (energy(&next, &p) - energy(&x, &p));
            let rhs = -0.5 * (dx.transpose() * p.energy_matrix() * dx)[(0, 0)];
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn energy_rate_small_h_limit() {
        let p = MotorParams::table_one();
        let x = PlantState::reference_initial();
        let (a, b) = p.continuous_matrices();
        let xv = x.to_vector();
        let u = 4.0;
        let continuous = (xv.transpose() * p.energy_matrix() * (a * xv + b * u))[(0, 0)];
        let h = 1e-6;
        let discrete = energy_rate(&x, u, h, &p).unwrap();
        // first-order term of Φ(Ah) is Ah/2
        let bound = h * (a.amax() + 1.0) * continuous.abs().max(1.0) * 10.0;
        assert!((discrete - continuous).abs() < bound);
    }

    #[test]
    fn energy_rate_linear_in_input() {
        let p = MotorParams::table_one();
        let x = PlantState::new(1.2, -3.0, 0.7);
        let e0 = energy_rate(&x, 0.0, 0.08, &p).unwrap();
        let e1 = energy_rate(&x, 1.0, 0.08, &p).unwrap();
        let e5 = energy_rate(&x, 5.0, 0.08, &p).unwrap();
        assert!((e5 - (e0 + 5.0 * (e1 - e0))).abs() < 1e-9 * e5.abs().max(1.0));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = MotorParams::table_one();
        p.j = 0.0;
        assert!(p.validate().is_err());
        assert!(MotorParams::table_one().validate().is_ok());
    }
}
