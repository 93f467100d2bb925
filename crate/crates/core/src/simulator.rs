//! Closed-loop simulation with per-step rediscretization.
//!
//! Each step draws `h_k`, rebuilds `(F_k, G_k)`, retunes `k_E`, evaluates the
//! control law, logs diagnostics for the pre-update state, and advances
//! `x_{k+1} = F_k x_k + G_k u_k`.

use std::io::Write;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::controller::{self, GainMode, GainSet, GuardEvent, GuardSet};
use crate::discretizer;
use crate::error::{Error, Result};
use crate::oracle;
use crate::plant::{self, DesiredState, MotorParams, PlantState};
use crate::scheduler::{ScheduleSpec, Scheduler};
use crate::stability::{self, LyapunovSample};

/// States with any component beyond this are reported as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: MotorParams,
    pub gains: GainSet,
    pub guards: GuardSet,
    pub desired: DesiredState,
    pub initial: PlantState,
    pub schedule: ScheduleSpec,
    /// Simulated horizon, s.
    pub duration: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: MotorParams::table_one(),
            gains: GainSet::default(),
            guards: GuardSet::default(),
            desired: DesiredState::reference(),
            initial: PlantState::reference_initial(),
            schedule: ScheduleSpec::default(),
            duration: 10.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gains.validate()?;
        self.guards.validate()?;
        self.schedule.validate(self.guards.eps_h)?;
        if !self.initial.is_finite() {
            return Err(Error::InvalidConfig("initial state must be finite".into()));
        }
        let d = &self.desired;
        if !(d.theta_d.is_finite() && d.omega_d.is_finite() && d.current_d.is_finite()) {
            return Err(Error::InvalidConfig("desired state must be finite".into()));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.schedule.seed = seed;
        self
    }

    pub fn with_gain_mode(mut self, mode: GainMode) -> Self {
        self.gains.gain_mode = mode;
        self
    }
}

/// One logged step: the state at `t` and what the controller did with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub t: f64,
    pub h_k: f64,
    pub state: PlantState,
    pub u: f64,
    pub energy: f64,
    pub k_e: f64,
    pub saturated: bool,
    pub guard_event: GuardEvent,
    pub gain_clamped: bool,
    pub lyapunov: LyapunovSample,
}

pub const TRACE_HEADER: &str =
    "k,t,h_k,I,omega,theta,u,E,k_E,V,V_prime,saturated,guard_event,V1_ok,V2_ok,cond_main";

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// State after the last logged step.
    pub final_state: PlantState,
    pub final_time: f64,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            let s = &r.lyapunov;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.t,
                r.h_k,
                r.state.current,
                r.state.omega,
                r.state.theta,
                r.u,
                r.energy,
                r.k_e,
                s.v,
                s.v_prime,
                r.saturated as u8,
                r.guard_event,
                s.v1_ok as u8,
                s.v2_ok as u8,
                s.condition_main as u8,
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Hex SHA-256 over the bit patterns of the `h_k` column.
    pub fn schedule_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for r in &self.records {
            hasher.update(r.h_k.to_bits().to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn max_abs_input(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.u.abs()))
    }
}

/// Runs the closed loop until `t ≥ duration`.
pub fn run(cfg: &SimConfig) -> Result<Trace> {
    cfg.validate()?;
    let mut scheduler = Scheduler::new(cfg.schedule);
    let mut x = cfg.initial;
    let mut t = 0.0;
    let mut u_prev = 0.0;
    let mut records = Vec::new();
    let mut k = 0;
    while t < cfg.duration {
        let h = scheduler.next_period();
        let model = discretizer::discretize(&cfg.params, h, cfg.guards.eps_h)?;
        let out = controller::control_input(
            &x,
            &cfg.desired,
            &model,
            &cfg.gains,
            &cfg.guards,
            &cfg.params,
            u_prev,
        )?;
        let lyapunov = stability::check_conditions(
            &x,
            &cfg.desired,
            out.u,
            &model,
            &cfg.gains,
            out.k_e_used,
            &cfg.params,
        );
        records.push(TraceRecord {
            k,
            t,
            h_k: h,
            state: x,
            u: out.u,
            energy: plant::energy(&x, &cfg.params),
            k_e: out.k_e_used,
            saturated: out.saturated,
            guard_event: out.guard_event,
            gain_clamped: out.gain_clamped,
            lyapunov,
        });
        x = model.step(&x, out.u);
        t += h;
        u_prev = out.u;
        let magnitude = x.magnitude();
        if !x.is_finite() || magnitude > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                step: k,
                magnitude,
                trace: Box::new(Trace {
                    records,
                    final_state: x,
                    final_time: t,
                }),
            });
        }
        k += 1;
    }
    Ok(Trace {
        records,
        final_state: x,
        final_time: t,
    })
}

/// Final tracking errors of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalErrors {
    pub theta: f64,
    pub omega: f64,
}

impl FinalErrors {
    pub fn of(trace: &Trace, d: &DesiredState) -> Self {
        Self {
            theta: (trace.final_state.theta - d.theta_d).abs(),
            omega: (trace.final_state.omega - d.omega_d).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub seed: u64,
    pub schedule_hash: String,
    pub dynamic: FinalErrors,
    pub constant: FinalErrors,
}

pub const SUMMARY_HEADER: &str =
    "seed,schedule_hash,dynamic_theta_err,dynamic_omega_err,constant_theta_err,constant_omega_err";

impl ComparisonSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.seed,
            self.schedule_hash,
            self.dynamic.theta,
            self.dynamic.omega,
            self.constant.theta,
            self.constant.omega
        )
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub dynamic: Trace,
    pub constant: Trace,
    pub summary: ComparisonSummary,
}

/// Runs both gain modes on the same period sequence.
pub fn compare_gain_modes(cfg: &SimConfig) -> Result<Comparison> {
    let dynamic = run(&cfg.with_gain_mode(GainMode::Dynamic))?;
    let constant = run(&cfg.with_gain_mode(GainMode::Constant))?;
    let schedule_hash = dynamic.schedule_hash();
    debug_assert_eq!(schedule_hash, constant.schedule_hash());
    let summary = ComparisonSummary {
        seed: cfg.schedule.seed,
        schedule_hash,
        dynamic: FinalErrors::of(&dynamic, &cfg.desired),
        constant: FinalErrors::of(&constant, &cfg.desired),
    };
    Ok(Comparison {
        dynamic,
        constant,
        summary,
    })
}

/// Paired comparisons for several seeds, evaluated in parallel.
pub fn compare_seeds(cfg: &SimConfig, seeds: &[u64]) -> Result<Vec<Comparison>> {
    seeds
        .par_iter()
        .map(|&s| compare_gain_modes(&cfg.with_seed(s)))
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[ComparisonSummary], mut w: W) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Agreement between the ZOH trajectory and a fine RK4 integration of the
/// continuous model under the same held inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub samples: usize,
    /// Max over samples of `‖x_zoh − x_rk4‖_∞ / max(‖x_rk4‖_∞, 1)`.
    pub max_rel_error: f64,
}

pub const CROSSCHECK_STEP: f64 = 1e-5;

/// Replays `window` seconds of a closed-loop run through RK4 at `max_step`.
pub fn crosscheck(cfg: &SimConfig, window: f64, max_step: f64) -> Result<CrossCheck> {
    let mut short = *cfg;
    short.duration = window;
    let trace = run(&short)?;
    let (a, b) = cfg.params.continuous_matrices();
    let mut x = cfg.initial.to_vector();
    let mut worst: f64 = 0.0;
    let n = trace.records.len();
    for (i, r) in trace.records.iter().enumerate() {
        x = oracle::rk4_hold(&a, &b, x, r.u, r.h_k, max_step);
        let zoh = if i + 1 < n {
            trace.records[i + 1].state
        } else {
            trace.final_state
        }
        .to_vector();
        let rel = (zoh - x).amax() / x.amax().max(1.0);
        worst = worst.max(rel);
    }
    Ok(CrossCheck {
        samples: n,
        max_rel_error: worst,
    })
}
