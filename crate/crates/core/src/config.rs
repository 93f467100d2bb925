//! Flat `key = value` configuration files and run manifests.
//!
//! ```text
//! # reference motor, slower schedule
//! params.R = 1.3
//! schedule.h_max = 0.15
//! gains.gain_mode = constant
//! ```
//!
//! Keys mirror the struct fields, using the physical symbols
//! (`params.K_L`, `gains.k_E_s`, `guards.eps_Eprime`, ...). Unknown keys are
//! rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulator::SimConfig;

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{value}`")))
}

/// Applies one assignment to `cfg`.
pub fn set_key(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let f = |v: &str| parse_num::<f64>(key, v);
    match key {
        "params.R" => cfg.params.r = f(value)?,
        "params.L" => cfg.params.l = f(value)?,
        "params.K_b" => cfg.params.k_b = f(value)?,
        "params.K_m" => cfg.params.k_m = f(value)?,
        "params.J" => cfg.params.j = f(value)?,
        "params.B_f" => cfg.params.b_f = f(value)?,
        "params.K_L" => cfg.params.k_l = f(value)?,
        "params.fidelity" => cfg.params.fidelity = value.parse()?,
        "gains.k_E_s" => cfg.gains.k_e_s = f(value)?,
        "gains.k_P" => cfg.gains.k_p = f(value)?,
        "gains.k_D" => cfg.gains.k_d = f(value)?,
        "gains.K_c" => cfg.gains.k_c = f(value)?,
        "gains.h_s" => cfg.gains.h_s = f(value)?,
        "gains.u_sat" => cfg.gains.u_sat = f(value)?,
        "gains.gain_mode" => cfg.gains.gain_mode = value.parse()?,
        "guards.eps_h" => cfg.guards.eps_h = f(value)?,
        "guards.eps_c" => cfg.guards.eps_c = f(value)?,
        "guards.eps_den" => cfg.guards.eps_den = f(value)?,
        "guards.eps_Eprime" => cfg.guards.eps_eprime = f(value)?,
        "guards.k_E_max" => cfg.guards.k_e_max = f(value)?,
        "desired.theta_d" => cfg.desired.theta_d = f(value)?,
        "desired.omega_d" => cfg.desired.omega_d = f(value)?,
        "desired.current_d" => cfg.desired.current_d = f(value)?,
        "initial.current_I" => cfg.initial.current = f(value)?,
        "initial.omega" => cfg.initial.omega = f(value)?,
        "initial.theta" => cfg.initial.theta = f(value)?,
        "schedule.h_min" => cfg.schedule.h_min = f(value)?,
        "schedule.h_max" => cfg.schedule.h_max = f(value)?,
        "schedule.seed" => cfg.schedule.seed = parse_num(key, value)?,
        "schedule.hold_max" => cfg.schedule.hold_max = parse_num(key, value)?,
        "schedule.mode" => cfg.schedule.mode = value.parse()?,
        "duration" => cfg.duration = f(value)?,
        other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Applies every assignment in `text` on top of `cfg`.
pub fn apply_text(cfg: &mut SimConfig, text: &str) -> Result<()> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        set_key(cfg, key.trim(), value.trim())
            .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(())
}

pub fn load_file(cfg: &mut SimConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    apply_text(cfg, &text)
}

/// Every key with its resolved value; feeding this back through
/// [`apply_text`] reproduces `cfg` exactly.
pub fn to_text(cfg: &SimConfig) -> String {
    let p = &cfg.params;
    let g = &cfg.gains;
    let gd = &cfg.guards;
    let d = &cfg.desired;
    let x = &cfg.initial;
    let s = &cfg.schedule;
    let entries: [(&str, String); 32] = [
        ("params.R", p.r.to_string()),
        ("params.L", p.l.to_string()),
        ("params.K_b", p.k_b.to_string()),
        ("params.K_m", p.k_m.to_string()),
        ("params.J", p.j.to_string()),
        ("params.B_f", p.b_f.to_string()),
        ("params.K_L", p.k_l.to_string()),
        ("params.fidelity", p.fidelity.to_string()),
        ("gains.k_E_s", g.k_e_s.to_string()),
        ("gains.k_P", g.k_p.to_string()),
        ("gains.k_D", g.k_d.to_string()),
        ("gains.K_c", g.k_c.to_string()),
        ("gains.h_s", g.h_s.to_string()),
        ("gains.u_sat", g.u_sat.to_string()),
        ("gains.gain_mode", g.gain_mode.to_string()),
        ("guards.eps_h", gd.eps_h.to_string()),
        ("guards.eps_c", gd.eps_c.to_string()),
        ("guards.eps_den", gd.eps_den.to_string()),
        ("guards.eps_Eprime", gd.eps_eprime.to_string()),
        ("guards.k_E_max", gd.k_e_max.to_string()),
        ("desired.theta_d", d.theta_d.to_string()),
        ("desired.omega_d", d.omega_d.to_string()),
        ("desired.current_d", d.current_d.to_string()),
        ("initial.current_I", x.current.to_string()),
        ("initial.omega", x.omega.to_string()),
        ("initial.theta", x.theta.to_string()),
        ("schedule.h_min", s.h_min.to_string()),
        ("schedule.h_max", s.h_max.to_string()),
        ("schedule.seed", s.seed.to_string()),
        ("schedule.hold_max", s.hold_max.to_string()),
        ("schedule.mode", s.mode.to_string()),
        ("duration", cfg.duration.to_string()),
    ];
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: SimConfig) -> Self {
        Self {
            command: command.to_string(),
            config,
            seeds: vec![config.schedule.seed],
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Metadata as comments followed by the resolved configuration, so the
    /// manifest itself is a valid `--config` file.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool = flexctl {}", self.version);
        let _ = writeln!(out, "# command = {}", self.command);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "# seeds = {}", seeds.join(" "));
        for o in &self.outputs {
            let _ = writeln!(out, "# output = {o}");
        }
        out.push_str(&to_text(&self.config));
        out
    }
}
