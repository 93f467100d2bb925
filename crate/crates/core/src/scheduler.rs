//! Seeded generators of non-uniform sampling-period sequences.
//!
//! Generator contract: `ChaCha8Rng::seed_from_u64(seed)` from `rand_chacha`
//! 0.3. A uniform period is `h_min + (h_max − h_min)·(next_u64 >> 11)·2⁻⁵³`.
//! In `random_hold` mode each redraw takes the period first, then the hold
//! count `1 + next_u64 mod hold_max`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleMode {
    /// Draw a period and hold it for a random number of steps.
    #[default]
    RandomHold,
    /// Fresh period every step.
    PerStep,
    /// Always `h_min`.
    Fixed,
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleMode::RandomHold => "random_hold",
            ScheduleMode::PerStep => "per_step",
            ScheduleMode::Fixed => "fixed",
        })
    }
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_hold" => Ok(ScheduleMode::RandomHold),
            "per_step" => Ok(ScheduleMode::PerStep),
            "fixed" => Ok(ScheduleMode::Fixed),
            other => Err(Error::InvalidConfig(format!("unknown schedule mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub h_min: f64,
    pub h_max: f64,
    pub seed: u64,
    pub hold_max: u32,
    pub mode: ScheduleMode,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            h_min: 0.05,
            h_max: 0.2,
            seed: 0,
            hold_max: 10,
            mode: ScheduleMode::RandomHold,
        }
    }
}

impl ScheduleSpec {
    /// Constant period `h`.
    pub fn fixed(h: f64) -> Self {
        Self {
            h_min: h,
            h_max: h,
            mode: ScheduleMode::Fixed,
            ..Self::default()
        }
    }

    pub fn validate(&self, eps_h: f64) -> Result<()> {
        if !self.h_min.is_finite() || !self.h_max.is_finite() {
            return Err(Error::InvalidConfig("schedule bounds must be finite".into()));
        }
        if self.h_min < eps_h {
            return Err(Error::InvalidConfig(format!(
                "schedule.h_min = {} is below eps_h = {eps_h}",
                self.h_min
            )));
        }
        if self.h_min > self.h_max {
            return Err(Error::InvalidConfig(format!(
                "schedule.h_min = {} exceeds schedule.h_max = {}",
                self.h_min, self.h_max
            )));
        }
        if self.hold_max < 1 {
            return Err(Error::InvalidConfig("schedule.hold_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stateful period source for one run.
#[derive(Debug, Clone)]
pub struct Scheduler {
    spec: ScheduleSpec,
    rng: ChaCha8Rng,
    current: f64,
    remaining: u32,
}

impl Scheduler {
    pub fn new(spec: ScheduleSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            current: spec.h_min,
            remaining: 0,
            spec,
        }
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    fn uniform(&mut self) -> f64 {
        let unit = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let h = self.spec.h_min + (self.spec.h_max - self.spec.h_min) * unit;
        h.clamp(self.spec.h_min, self.spec.h_max)
    }

    pub fn next_period(&mut self) -> f64 {
        match self.spec.mode {
            ScheduleMode::Fixed => self.spec.h_min,
            ScheduleMode::PerStep => self.uniform(),
            ScheduleMode::RandomHold => {
                if self.remaining == 0 {
                    self.current = self.uniform();
                    self.remaining = 1 + (self.rng.next_u64() % self.spec.hold_max as u64) as u32;
                }
                self.remaining -= 1;
                self.current
            }
        }
    }
}

impl Iterator for Scheduler {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_period())
    }
}

/// Writes `k,t,h_k` rows covering `[0, duration)`.
pub fn write_schedule_csv<W: Write>(spec: &ScheduleSpec, duration: f64, mut w: W) -> Result<()> {
    writeln!(w, "k,t,h_k")?;
    let mut t = 0.0;
    for (k, h) in Scheduler::new(*spec).enumerate() {
        if t >= duration {
            break;
        }
        writeln!(w, "{k},{t},{h}")?;
        t += h;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_mode() {
        let mut s = Scheduler::new(ScheduleSpec::fixed(0.11));
        assert!(s.by_ref().take(100).all(|h| h == 0.11));
    }

    #[test]
    fn same_seed_same_sequence() {
        let spec = ScheduleSpec {
            seed: 42,
            ..Default::default()
        };
        let a: Vec<u64> = Scheduler::new(spec).take(500).map(f64::to_bits).collect();
        let b: Vec<u64> = Scheduler::new(spec).take(500).map(f64::to_bits).collect();
        assert_eq!(a, b);
        let other: Vec<u64> = Scheduler::new(ScheduleSpec { seed: 43, ..spec })
            .take(500)
            .map(f64::to_bits)
            .collect();
        assert_ne!(a, other);
    }

    #[test]
    fn per_step_statistics() {
        let spec = ScheduleSpec {
            mode: ScheduleMode::PerStep,
            seed: 7,
            ..Default::default()
        };
        let draws: Vec<f64> = Scheduler::new(spec).take(10_000).collect();
        assert!(draws.iter().all(|h| (0.05..=0.2).contains(h)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.125).abs() <= 0.005, "mean {mean}");
    }

    #[test]
    fn hold_runs_bounded() {
        let spec = ScheduleSpec {
            seed: 9,
            hold_max: 4,
            ..Default::default()
        };
        let draws: Vec<f64> = Scheduler::new(spec).take(2000).collect();
        let mut run = 1;
        for w in draws.windows(2) {
            if w[0] == w[1] {
                run += 1;
                assert!(run <= 4);
            } else {
                run = 1;
            }
        }
    }

    #[test]
    fn validation() {
        let bad = ScheduleSpec {
            h_min: 0.3,
            h_max: 0.2,
            ..Default::default()
        };
        assert!(bad.validate(1e-4).is_err());
        let tiny = ScheduleSpec {
            h_min: 1e-5,
            ..Default::default()
        };
        assert!(tiny.validate(1e-4).is_err());
        assert!(ScheduleSpec::default().validate(1e-4).is_ok());
    }

    #[test]
    fn schedule_csv() {
        let mut buf = Vec::new();
        write_schedule_csv(&ScheduleSpec::fixed(0.25), 1.0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "k,t,h_k\n0,0,0.25\n1,0.25,0.25\n2,0.5,0.25\n3,0.75,0.25\n");
    }

    proptest! {
        #[test]
        fn periods_within_bounds(
            seed in any::<u64>(),
            lo in 1e-4f64..0.5,
            width in 0.0f64..0.5,
            hold in 1u32..20,
            per_step in any::<bool>(),
        ) {
            let spec = ScheduleSpec {
                h_min: lo,
                h_max: lo + width,
                seed,
                hold_max: hold,
                mode: if per_step { ScheduleMode::PerStep } else { ScheduleMode::RandomHold },
            };
            for h in Scheduler::new(spec).take(200) {
                prop_assert!(h >= spec.h_min && h <= spec.h_max && h >= 1e-4);
            }
        }
    }
}
