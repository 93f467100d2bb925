//! Energy-based control input with sampling-period dependent gain retuning.
//!
//! The input is the value of `u` that makes the discrete Lyapunov rate
//!
//! ```text
//! V′ = k_E E_k xᵀDΦ(Ah)(Ax + Bu) + (k_D/h)(θ̇ − θ̇_d)(F_m x − θ̇) + k_P(θ − θ_d)θ̇
//! ```
//!
//! vanish, then clamped to `±u_sat`.

use std::fmt;
use std::str::FromStr;

use crate::discretizer::{self, DiscreteModel};
use crate::error::{Error, Result};
use crate::plant::{self, DesiredState, MotorParams, PlantState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    #[default]
    Dynamic,
    Constant,
}

impl fmt::Display for GainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainMode::Dynamic => "dynamic",
            GainMode::Constant => "constant",
        })
    }
}

impl FromStr for GainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(GainMode::Dynamic),
            "constant" => Ok(GainMode::Constant),
            other => Err(Error::InvalidConfig(format!("unknown gain mode `{other}`"))),
        }
    }
}

/// Controller gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    /// Energy gain at the standard period.
    pub k_e_s: f64,
    pub k_p: f64,
    pub k_d: f64,
    /// Offset added to the retuned energy gain; also its lower clamp.
    pub k_c: f64,
    /// Standard sampling period, s.
    pub h_s: f64,
    /// Input saturation, V.
    pub u_sat: f64,
    pub gain_mode: GainMode,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            k_e_s: 725.0,
            k_p: 565.0,
            k_d: 0.07,
            k_c: 610.0,
            h_s: 0.11,
            u_sat: 45.0,
            gain_mode: GainMode::Dynamic,
        }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_E_s", self.k_e_s),
            ("k_P", self.k_p),
            ("k_D", self.k_d),
            ("h_s", self.h_s),
            ("u_sat", self.u_sat),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "gains.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.k_c >= 0.0) || !self.k_c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gains.K_c must be nonnegative, got {}",
                self.k_c
            )));
        }
        Ok(())
    }
}

/// Singularity floors and retuning limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardSet {
    /// Smallest admissible sampling period, s.
    pub eps_h: f64,
    /// Energy below which the plant is treated as at rest, J.
    pub eps_c: f64,
    /// Floor on `|k_E E xᵀDΦB|`.
    pub eps_den: f64,
    /// Floor on `|E′(h_k)|` for the gain ratio, W.
    pub eps_eprime: f64,
    pub k_e_max: f64,
}

impl Default for GuardSet {
    fn default() -> Self {
        Self {
            eps_h: 1e-4,
            eps_c: 1e-6,
            eps_den: 1e-9,
            eps_eprime: 1e-9,
            k_e_max: 1e6,
        }
    }
}

impl GuardSet {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eps_h", self.eps_h),
            ("eps_c", self.eps_c),
            ("eps_den", self.eps_den),
            ("eps_Eprime", self.eps_eprime),
            ("k_E_max", self.k_e_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "guards.{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardEvent {
    #[default]
    None,
    EnergyFloor,
    DenominatorFloor,
    GainFallback,
}

impl GuardEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            GuardEvent::None => "none",
            GuardEvent::EnergyFloor => "energy_floor",
            GuardEvent::DenominatorFloor => "denominator_floor",
            GuardEvent::GainFallback => "gain_fallback",
        }
    }
}

impl fmt::Display for GuardEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of the energy-gain retuning rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDecision {
    pub k_e: f64,
    /// `|E′(h_k)|` fell below the floor and `k_E_s` was used.
    pub fallback: bool,
    /// The raw ratio fell outside `[K_c, k_E_max]`.
    pub clamped: bool,
}

/// Energy gain for the current period:
/// `k_E = k_E_s · E′(h_s) / E′(h_k) + K_c`, clamped to `[K_c, k_E_max]`.
///
/// Both rates are evaluated at the current state with the previous input.
pub fn dynamic_gain(
    x: &PlantState,
    u_prev: f64,
    model: &DiscreteModel,
    gains: &GainSet,
    guards: &GuardSet,
    p: &MotorParams,
) -> Result<GainDecision> {
    if model.h < guards.eps_h {
        return Err(Error::SamplingTooSmall {
            h: model.h,
            eps_h: guards.eps_h,
        });
    }
    let fixed = |fallback| GainDecision {
        k_e: gains.k_e_s,
        fallback,
        clamped: false,
    };
    if gains.gain_mode == GainMode::Constant {
        return Ok(fixed(false));
    }
    let rate_k = plant::energy_rate_for(x, u_prev, model, p);
    if !(rate_k.abs() >= guards.eps_eprime) {
        return Ok(fixed(true));
    }
    let rate_s = if model.h == gains.h_s {
        rate_k
    } else {
        let (a, _) = p.continuous_matrices();
        let standard = DiscreteModel {
            phi: discretizer::phi3(&(a * gains.h_s))?,
            ..model.clone()
        };
        plant::energy_rate_for(x, u_prev, &standard, p)
    };
    let raw = gains.k_e_s * rate_s / rate_k + gains.k_c;
    let k_e = raw.clamp(gains.k_c, guards.k_e_max);
    Ok(GainDecision {
        k_e,
        fallback: false,
        clamped: k_e != raw,
    })
}

/// Result of one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    /// Unclamped law value; equals `u` under a guard.
    pub u_raw: f64,
    pub k_e_used: f64,
    pub saturated: bool,
    pub guard_event: GuardEvent,
    pub gain_clamped: bool,
}

/// Energy-based control input for one step.
#[allow(clippy::too_many_arguments)]
pub fn control_input(
    x: &PlantState,
    d: &DesiredState,
    model: &DiscreteModel,
    gains: &GainSet,
    guards: &GuardSet,
    p: &MotorParams,
    u_prev: f64,
) -> Result<ControlOutput> {
    if !(model.h >= guards.eps_h) {
        return Err(Error::SamplingTooSmall {
            h: model.h,
            eps_h: guards.eps_h,
        });
    }
    if !x.is_finite() || !u_prev.is_finite() {
        return Err(Error::NonFinite("controller input"));
    }
    let gain = dynamic_gain(x, u_prev, model, gains, guards, p)?;
    let k_e = gain.k_e;
    let mut out = ControlOutput {
        u: 0.0,
        u_raw: 0.0,
        k_e_used: k_e,
        saturated: false,
        guard_event: if gain.fallback {
            GuardEvent::GainFallback
        } else {
            GuardEvent::None
        },
        gain_clamped: gain.clamped,
    };

    let energy = plant::energy(x, p);
    if energy <= guards.eps_c {
        out.guard_event = GuardEvent::EnergyFloor;
        return Ok(out);
    }

    let (a, b) = p.continuous_matrices();
    let xv = x.to_vector();
    let weighted = xv.transpose() * p.energy_matrix() * model.phi;
    let den = k_e * energy * (weighted * b)[(0, 0)];
    if !(den.abs() >= guards.eps_den) {
        let held = u_prev.clamp(-gains.u_sat, gains.u_sat);
        out.u = held;
        out.u_raw = held;
        out.saturated = held != u_prev;
        out.guard_event = GuardEvent::DenominatorFloor;
        return Ok(out);
    }

    let drift = k_e * energy * (weighted * a * xv)[(0, 0)];
    let damping = gains.k_d / model.h * (x.omega - d.omega_d) * (model.predicted_omega(x) - x.omega);
    let position = gains.k_p * (x.theta - d.theta_d) * x.omega;
    let u_raw = -(drift + damping + position) / den;
    if !u_raw.is_finite() {
        return Err(Error::NonFinite("control law"));
    }
    let u = u_raw.clamp(-gains.u_sat, gains.u_sat);
    out.u = u;
    out.u_raw = u_raw;
    out.saturated = u != u_raw;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretizer::discretize;
    use crate::stability;
    use rand::{Rng, SeedableRng};

    fn setup(h: f64) -> (MotorParams, GainSet, GuardSet, DiscreteModel) {
        let p = MotorParams::table_one();
        let m = discretize(&p, h, 1e-4).unwrap();
        (p, GainSet::default(), GuardSet::default(), m)
    }

    #[test]
    fn standard_period_gain_is_sum() {
        let (p, gains, guards, m) = setup(0.11);
        let x = PlantState::reference_initial();
        let d = dynamic_gain(&x, 3.0, &m, &gains, &guards, &p).unwrap();
        assert!(!d.fallback);
        assert!((d.k_e - 1335.0).abs() < 1e-9);
    }

    #[test]
    fn constant_mode_gain() {
        let (p, mut gains, guards, m) = setup(0.07);
        gains.gain_mode = GainMode::Constant;
        let d = dynamic_gain(&PlantState::reference_initial(), 0.0, &m, &gains, &guards, &p).unwrap();
        assert_eq!(d.k_e, 725.0);
    }

    #[test]
    fn zero_state_falls_back() {
        let (p, gains, guards, m) = setup(0.07);
        let d = dynamic_gain(&PlantState::default(), 0.0, &m, &gains, &guards, &p).unwrap();
        assert!(d.fallback);
        assert_eq!(d.k_e, 725.0);
    }

    #[test]
    fn dynamic_gain_never_below_offset() {
        let (p, gains, guards, _) = setup(0.11);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let h = rng.gen_range(0.05..0.2);
            let m = discretize(&p, h, 1e-4).unwrap();
            let x = PlantState::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let d = dynamic_gain(&x, rng.gen_range(-45.0..45.0), &m, &gains, &guards, &p).unwrap();
            if !d.fallback {
                assert!(d.k_e >= gains.k_c);
                assert!(d.k_e <= guards.k_e_max);
            }
        }
    }

    #[test]
    fn rest_at_origin_gives_zero_input() {
        let (p, gains, guards, m) = setup(0.1);
        let d = DesiredState::default();
        let out = control_input(&PlantState::default(), &d, &m, &gains, &guards, &p, 0.0).unwrap();
        assert_eq!(out.guard_event, GuardEvent::EnergyFloor);
        assert_eq!(out.u, 0.0);
    }

    #[test]
    fn large_error_saturates() {
        // |θ − θ_d| = 10 with the speed pointing away from the target
        let (p, gains, guards, m) = setup(0.11);
        let d = DesiredState::reference();
        let x = PlantState::new(0.0, 50.0, -8.0);
        let out = control_input(&x, &d, &m, &gains, &guards, &p, 0.0).unwrap();
        assert!(out.u_raw.abs() > 45.0, "u_raw = {}", out.u_raw);
        assert_eq!(out.u, -45.0);
        assert!(out.saturated);
    }

    #[test]
    fn small_period_is_an_error() {
        let p = MotorParams::table_one();
        let m = discretize(&p, 5e-5, 1e-6).unwrap();
        let r = control_input(
            &PlantState::reference_initial(),
            &DesiredState::reference(),
            &m,
            &GainSet::default(),
            &GuardSet::default(),
            &p,
            0.0,
        );
        assert!(matches!(r, Err(Error::SamplingTooSmall { .. })));
    }

    #[test]
    fn denominator_guard_holds_previous_input() {
        let (p, gains, mut guards, m) = setup(0.1);
        guards.eps_den = 1e300;
        let x = PlantState::reference_initial();
        let out = control_input(&x, &DesiredState::reference(), &m, &gains, &guards, &p, 12.5).unwrap();
        assert_eq!(out.guard_event, GuardEvent::DenominatorFloor);
        assert_eq!(out.u, 12.5);
        let out = control_input(&x, &DesiredState::reference(), &m, &gains, &guards, &p, 99.0).unwrap();
        assert_eq!(out.u, 45.0);
    }

    #[test]
    fn closure_identity_random_states() {
        let p = MotorParams::table_one();
        let gains = GainSet::default();
        let guards = GuardSet::default();
        let d = DesiredState::reference();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let h = rng.gen_range(0.05..0.2);
            let m = discretize(&p, h, guards.eps_h).unwrap();
            let x = PlantState::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let out = control_input(&x, &d, &m, &gains, &guards, &p, rng.gen_range(-10.0..10.0)).unwrap();
            if out.saturated || out.guard_event != GuardEvent::None {
                continue;
            }
            let terms = stability::v_prime_terms(&x, &d, out.u, &m, &gains, out.k_e_used, &p);
            assert!(terms.total().abs() <= 1e-7 * (1.0 + terms.abs_sum()), "{terms:?}");
            checked += 1;
        }
    }

    #[test]
    fn deterministic() {
        let (p, gains, guards, m) = setup(0.13);
        let x = PlantState::new(1.0, 2.0, 3.0);
        let a = control_input(&x, &DesiredState::reference(), &m, &gains, &guards, &p, 1.0).unwrap();
        let b = control_input(&x, &DesiredState::reference(), &m, &gains, &guards, &p, 1.0).unwrap();
        assert_eq!(a.u.to_bits(), b.u.to_bits());
        assert_eq!(a.k_e_used.to_bits(), b.k_e_used.to_bits());
    }
}
