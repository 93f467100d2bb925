//! Discretized energy-based control of a DC motor with an elastic load when
//! the sampling period switches arbitrarily between steps.
//!
//! The pipeline per step is: draw a period ([`scheduler`]), build the exact
//! ZOH model ([`discretizer`], on top of [`matseries`]), retune the energy
//! gain and compute the input ([`controller`]), evaluate the Lyapunov
//! diagnostics ([`stability`]) and advance the plant ([`simulator`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod discretizer;
pub mod error;
pub mod matseries;
pub mod oracle;
pub mod plant;
pub mod scheduler;
pub mod simulator;
pub mod stability;
pub mod validation;

pub use controller::{ControlOutput, GainMode, GainSet, GuardEvent, GuardSet};
pub use discretizer::DiscreteModel;
pub use error::{Error, Result};
pub use matseries::SeriesOptions;
pub use plant::{DesiredState, Fidelity, MotorParams, PlantState};
pub use scheduler::{ScheduleMode, ScheduleSpec, Scheduler};
pub use simulator::{SimConfig, Trace, TraceRecord};
