//! Lyapunov candidate, its discrete rate, the stability inequality and its
//! split into position/damping (`V1`) and drift/input (`V2`) parts, and
//! sweeps of the `V1` margin over period and speed.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::controller::GainSet;
use crate::discretizer::{self, DiscreteModel};
use crate::error::{Error, Result};
use crate::plant::{self, DesiredState, MotorParams, PlantState};

/// `V = ½k_E E² + ½k_D(θ̇ − θ̇_d)² + ½k_P(θ − θ_d)²`.
pub fn lyapunov(
    x: &PlantState,
    d: &DesiredState,
    energy: f64,
    gains: &GainSet,
    k_e_used: f64,
) -> f64 {
    let dw = x.omega - d.omega_d;
    let dth = x.theta - d.theta_d;
    0.5 * k_e_used * energy * energy + 0.5 * gains.k_d * dw * dw + 0.5 * gains.k_p * dth * dth
}

/// The three additive parts of the discrete Lyapunov rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VPrimeTerms {
    /// `k_E E_k xᵀDΦ(Ah)(Ax + Bu)`.
    pub energy: f64,
    /// `(k_D/h)(θ̇ − θ̇_d)(F_m x − θ̇)`.
    pub damping: f64,
    /// `k_P(θ − θ_d)θ̇`.
    pub position: f64,
}

impl VPrimeTerms {
    pub fn total(&self) -> f64 {
        self.energy + self.damping + self.position
    }

    pub fn abs_sum(&self) -> f64 {
        self.energy.abs() + self.damping.abs() + self.position.abs()
    }
}

pub fn v_prime_terms(
    x: &PlantState,
    d: &DesiredState,
    u: f64,
    model: &DiscreteModel,
    gains: &GainSet,
    k_e_used: f64,
    p: &MotorParams,
) -> VPrimeTerms {
    let e = plant::energy(x, p);
    VPrimeTerms {
        energy: k_e_used * e * plant::energy_rate_for(x, u, model, p),
        damping: gains.k_d / model.h
            * (x.omega - d.omega_d)
            * (model.predicted_omega(x) - x.omega),
        position: gains.k_p * (x.theta - d.theta_d) * x.omega,
    }
}

/// Discrete Lyapunov rate `V′` in its reordered form.
pub fn v_prime(
    x: &PlantState,
    d: &DesiredState,
    u: f64,
    model: &DiscreteModel,
    gains: &GainSet,
    k_e_used: f64,
    p: &MotorParams,
) -> f64 {
    v_prime_terms(x, d, u, model, gains, k_e_used, p).total()
}

/// Relative slack used when judging `V′ ≤ 0`; the control law drives `V′` to
/// zero, so the sign of the remainder is roundoff.
pub const V_PRIME_REL_TOL: f64 = 1e-7;

/// Per-step stability diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSample {
    pub v: f64,
    pub v_prime: f64,
    pub terms: VPrimeTerms,
    /// `V′ ≤ 0` up to [`V_PRIME_REL_TOL`].
    pub condition_main: bool,
    pub v1_margin: f64,
    pub v1_ok: bool,
    /// Components of `Bu + Ax`.
    pub v2_components: Vector3<f64>,
    pub v2_ok: bool,
    pub boundary_low_ok: bool,
    pub boundary_high_ok: bool,
}

impl LyapunovSample {
    /// Largest component of `Bu + Ax`; `≤ 0` iff `V2` holds componentwise.
    pub fn v2_max_margin(&self) -> f64 {
        self.v2_components.max()
    }
}

/// Left-hand side of `V1`, with `F*_m = −F_m`:
/// `k_P(θ − θ_d)θ̇ − (k_D/h)(θ̇ − θ̇_d)(F*_m x − θ̇)`.
pub fn v1_margin(x: &PlantState, d: &DesiredState, model: &DiscreteModel, gains: &GainSet) -> f64 {
    let f_star_x = -model.predicted_omega(x);
    gains.k_p * (x.theta - d.theta_d) * x.omega
        - gains.k_d / model.h * (x.omega - d.omega_d) * (f_star_x - x.omega)
}

pub fn check_conditions(
    x: &PlantState,
    d: &DesiredState,
    u: f64,
    model: &DiscreteModel,
    gains: &GainSet,
    k_e_used: f64,
    p: &MotorParams,
) -> LyapunovSample {
    let terms = v_prime_terms(x, d, u, model, gains, k_e_used, p);
    let v_prime = terms.total();
    let energy = plant::energy(x, p);
    let (a, b) = p.continuous_matrices();
    let xv = x.to_vector();
    let ax = a * xv;
    let bu = b * u;
    let v2 = bu + ax;
    let v1 = v1_margin(x, d, model, gains);
    let low = gains.k_d * (x.omega - d.omega_d) * (model.predicted_omega(x) - x.omega);
    LyapunovSample {
        v: lyapunov(x, d, energy, gains, k_e_used),
        v_prime,
        terms,
        condition_main: v_prime <= V_PRIME_REL_TOL * (1.0 + terms.abs_sum()),
        v1_margin: v1,
        v1_ok: v1 <= 0.0,
        v2_components: v2,
        v2_ok: v2.iter().all(|c| *c <= 0.0),
        boundary_low_ok: low <= 0.0,
        boundary_high_ok: (-ax).iter().zip(bu.iter()).all(|(l, r)| l <= r),
    }
}

/// Grid axes and the frozen part of the state for a `V1` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub h_values: Vec<f64>,
    /// Values of `|θ̇|`; the sweep uses `θ̇ = +|θ̇|`.
    pub omega_values: Vec<f64>,
    /// Held current, A.
    pub current: f64,
    /// Held angle, rad.
    pub theta: f64,
    pub desired: DesiredState,
    pub eps_h: f64,
}

impl MapSpec {
    /// `n_h × n_w` evenly spaced grid including both ends.
    pub fn linear(
        (h_min, h_max, n_h): (f64, f64, usize),
        (w_min, w_max, n_w): (f64, f64, usize),
        current: f64,
        theta: f64,
        desired: DesiredState,
        eps_h: f64,
    ) -> Self {
        Self {
            h_values: linspace(h_min, h_max, n_h),
            omega_values: linspace(w_min, w_max, n_w),
            current,
            theta,
            desired,
            eps_h,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub axis1_name: String,
    pub axis1: Vec<f64>,
    pub axis2_name: String,
    pub axis2: Vec<f64>,
    /// `values[i][j]` is the `V1` margin at `(axis1[i], axis2[j])`.
    pub values: Vec<Vec<f64>>,
}

impl StabilityGrid {
    /// Cells with margin `≤ 0`.
    pub fn stable_cells(&self) -> usize {
        self.values.iter().flatten().filter(|v| **v <= 0.0).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "axis1,axis2,V1_margin")?;
        for (i, a1) in self.axis1.iter().enumerate() {
            for (j, a2) in self.axis2.iter().enumerate() {
                writeln!(w, "{a1},{a2},{}", self.values[i][j])?;
            }
        }
        Ok(())
    }
}

/// `V1` margin over (h, |θ̇|) with current and angle held.
pub fn stability_map(p: &MotorParams, gains: &GainSet, spec: &MapSpec) -> Result<StabilityGrid> {
    if spec.h_values.is_empty() || spec.omega_values.is_empty() {
        return Err(Error::InvalidConfig("stability map axes must be non-empty".into()));
    }
    let values = spec
        .h_values
        .par_iter()
        .map(|&h| {
            let model = discretizer::discretize(p, h, spec.eps_h)?;
            Ok(spec
                .omega_values
                .iter()
                .map(|w| {
                    let x = PlantState::new(spec.current, w.abs(), spec.theta);
                    v1_margin(&x, &spec.desired, &model, gains)
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(StabilityGrid {
        axis1_name: "h".into(),
        axis1: spec.h_values.clone(),
        axis2_name: "abs_omega".into(),
        axis2: spec.omega_values.clone(),
        values,
    })
}
