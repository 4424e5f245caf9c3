//! Scenario files.
//!
//! A TOML document with the sections `link`, `platform`, `mission` and
//! `scp` (all required) plus optional per-command sections. Every key is
//! checked before anything is solved; missing, mistyped, out-of-range and
//! unknown keys are all reported together.

use std::collections::BTreeSet;
use std::fmt;

use fsotraj_core::baselines::{BaselineKind, BaselineSpec};
use fsotraj_core::channel::{db_to_linear, Atmosphere, FsoLink, LinkParams};
use fsotraj_core::dynamics::{BoundaryConditions, UavPlatform};
use fsotraj_core::planner::{Scenario, ScenarioParams};
use fsotraj_core::scp::ScpSettings;
use fsotraj_core::Vec2;
use thiserror::Error;
use toml::{Table, Value};

/// The shipped reference configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Parse(String),
    #[error("{}", Listing(.0))]
    Invalid(Vec<String>),
}

struct Listing<'a>(&'a [String]);

impl fmt::Display for Listing<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub visibility_km: f64,
    pub wavelength_nm: f64,
    pub gamma_linear: f64,
    pub alpha: f64,
    pub bandwidth_hz: f64,
    pub h_uav_m: f64,
    pub h_term_m: f64,
}

impl LinkConfig {
    pub fn at_visibility(&self, visibility_km: f64) -> Result<FsoLink, String> {
        let atmosphere = Atmosphere::new(visibility_km, self.wavelength_nm).map_err(|e| e.to_string())?;
        FsoLink::new(LinkParams {
            atmosphere,
            gamma_linear: self.gamma_linear,
            alpha: self.alpha,
            bandwidth_hz: self.bandwidth_hz,
            h_uav_m: self.h_uav_m,
            h_term_m: self.h_term_m,
        })
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionConfig {
    pub dt_s: f64,
    pub bc: BoundaryConditions,
    pub rate_threshold_bps: f64,
    pub energy_budget_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowComplexityConfig {
    pub n_prime: usize,
    /// `None` sweeps a fixed set of angles.
    pub theta_rad: Option<f64>,
    pub rotations: u32,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub link: LinkConfig,
    pub platform: UavPlatform,
    pub mission: MissionConfig,
    pub scp: ScpSettings,
    pub visibilities_km: Option<Vec<f64>>,
    pub low_complexity: Option<LowComplexityConfig>,
    pub efficiency_steps: Option<usize>,
    pub data_demand_bits: Option<f64>,
    pub baseline: Option<BaselineSpec>,
}

const SECTIONS: &[&str] = &["link", "platform", "mission", "scp", "boundary", "low_complexity", "efficiency", "operation_time", "baseline"];

/// Typed access to one section, recording every problem.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    used: BTreeSet<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn open(root: &'a Table, name: &'static str, required: bool, errors: &'a mut Vec<String>) -> Section<'a> {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors.push(format!("[{name}]: expected a table"));
                None
            }
            None => {
                if required {
                    errors.push(format!("[{name}]: missing section"));
                }
                None
            }
        };
        Section { name, table, used: BTreeSet::new(), errors }
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn raw(&mut self, key: &'static str, required: bool) -> Option<&'a Value> {
        self.used.insert(key);
        let table = self.table?;
        let v = table.get(key);
        if v.is_none() && required {
            self.errors.push(format!("{}.{key}: missing", self.name));
        }
        v
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn real_opt(&mut self, key: &'static str, required: bool) -> Option<f64> {
        match self.raw(key, required)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.fail(key, format_args!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn real(&mut self, key: &'static str) -> Option<f64> {
        self.real_opt(key, true)
    }

    /// A required real that must satisfy `ok`.
    fn real_where(&mut self, key: &'static str, what: &str, ok: impl Fn(f64) -> bool) -> Option<f64> {
        let x = self.real(key)?;
        if !x.is_finite() || !ok(x) {
            self.fail(key, format_args!("must be {what}, got {x}"));
            return None;
        }
        Some(x)
    }

    fn positive(&mut self, key: &'static str) -> Option<f64> {
        self.real_where(key, "positive", |x| x > 0.0)
    }

    fn count(&mut self, key: &'static str, min: i64) -> Option<i64> {
        match self.raw(key, true)? {
            Value::Integer(i) if *i >= min => Some(*i),
            Value::Integer(i) => {
                self.fail(key, format_args!("must be at least {min}, got {i}"));
                None
            }
            other => {
                self.fail(key, format_args!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn vec2(&mut self, key: &'static str) -> Option<Vec2> {
        match self.raw(key, true)? {
            Value::Array(a) if a.len() == 2 => {
                let num = |v: &Value| match v {
                    Value::Float(x) if x.is_finite() => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                };
                match (num(&a[0]), num(&a[1])) {
                    (Some(x), Some(y)) => Some(Vec2::new(x, y)),
                    _ => {
                        self.fail(key, "expected two finite numbers");
                        None
                    }
                }
            }
            _ => {
                self.fail(key, "expected an array [x, y]");
                None
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.raw(key, true)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.fail(key, format_args!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn finish(self) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.used.contains(key.as_str()) {
                    self.errors.push(format!("{}.{key}: unknown key", self.name));
                }
            }
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        let mut errors = Vec::new();
        for key in root.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                errors.push(format!("[{key}]: unknown section"));
            }
        }

        let mut s = Section::open(&root, "link", true, &mut errors);
        let visibility_km = s.positive("visibility_km");
        let wavelength_nm = s.positive("wavelength_nm");
        let gamma = match (s.real_opt("gamma_db", false), s.real_opt("gamma_linear", false)) {
            (Some(db), None) if db.is_finite() => Some(db_to_linear(db)),
            (None, Some(lin)) if lin > 0.0 && lin.is_finite() => Some(lin),
            (None, Some(lin)) => {
                s.fail("gamma_linear", format_args!("must be positive, got {lin}"));
                None
            }
            (Some(_), Some(_)) => {
                s.fail("gamma_db", "give either gamma_db or gamma_linear, not both");
                None
            }
            (None, None) if s.present() => {
                s.fail("gamma_db", "missing (or give gamma_linear)");
                None
            }
            _ => None,
        };
        let alpha = s.real_where("alpha", "in (0, 1)", |a| a > 0.0 && a < 1.0);
        let bandwidth_hz = s.positive("bandwidth_hz");
        let h_uav_m = s.real("h_uav_m");
        let h_term_m = s.real("h_term_m");
        s.finish();

        let mut s = Section::open(&root, "platform", true, &mut errors);
        let c1 = s.positive("c1");
        let c2 = s.positive("c2");
        let mass_kg = s.positive("mass_kg");
        let g = s.positive("g");
        let v_min = s.positive("v_min");
        let v_max = s.positive("v_max");
        let a_max = s.positive("a_max");
        s.finish();

        let mut s = Section::open(&root, "mission", true, &mut errors);
        let dt_s = s.positive("dt_s");
        let q_initial = s.vec2("q_initial");
        let q_final = s.vec2("q_final");
        let v_initial = s.vec2("v_initial");
        let v_final = s.vec2("v_final");
        let rate_threshold_bps = s.positive("rate_threshold_bps");
        let energy_budget_j = s.positive("energy_budget_j");
        s.finish();

        let mut s = Section::open(&root, "scp", true, &mut errors);
        let relative_tolerance = s.positive("relative_tolerance");
        let max_outer_iterations = s.count("max_outer_iterations", 1);
        let subproblem_tolerance = s.positive("subproblem_tolerance");
        s.finish();

        let mut s = Section::open(&root, "boundary", false, &mut errors);
        let visibilities_km = if s.present() {
            match s.raw("visibilities_km", true) {
                Some(Value::Array(a)) if !a.is_empty() => {
                    let vals: Option<Vec<f64>> = a
                        .iter()
                        .map(|v| match v {
                            Value::Float(x) if *x > 0.0 && x.is_finite() => Some(*x),
                            Value::Integer(i) if *i > 0 => Some(*i as f64),
                            _ => None,
                        })
                        .collect();
                    if vals.is_none() {
                        s.fail("visibilities_km", "entries must be positive numbers");
                    }
                    vals
                }
                Some(_) => {
                    s.fail("visibilities_km", "expected a non-empty array");
                    None
                }
                None => None,
            }
        } else {
            None
        };
        s.finish();

        let mut s = Section::open(&root, "low_complexity", false, &mut errors);
        let low_complexity = if s.present() {
            let n_prime = s.count("n_prime", 2);
            let theta = s.real_opt("theta_rad", false);
            let rotations = s.count("rotations", 0);
            match (n_prime, rotations) {
                (Some(n), Some(r)) => Some(LowComplexityConfig { n_prime: n as usize, theta_rad: theta, rotations: r as u32 }),
                _ => None,
            }
        } else {
            None
        };
        s.finish();

        let mut s = Section::open(&root, "efficiency", false, &mut errors);
        let efficiency_steps = if s.present() { s.count("steps", 1).map(|n| n as usize) } else { None };
        s.finish();

        let mut s = Section::open(&root, "operation_time", false, &mut errors);
        let data_demand_bits = if s.present() { s.real_where("data_demand_bits", "non-negative", |x| x >= 0.0) } else { None };
        s.finish();

        let mut s = Section::open(&root, "baseline", false, &mut errors);
        let baseline = if s.present() {
            let kind = match s.string("kind") {
                Some("circular") => Some(BaselineKind::Circular),
                Some("straight") => Some(BaselineKind::Straight),
                Some(other) => {
                    s.fail("kind", format_args!("expected \"circular\" or \"straight\", got {other:?}"));
                    None
                }
                None => None,
            };
            let speed = s.positive("speed_mps");
            let radius = s.positive("radius_m");
            let duration = s.count("duration_slots", 1);
            match (kind, speed, radius, duration) {
                (Some(kind), Some(speed_mps), Some(radius_m), Some(d)) => {
                    Some(BaselineSpec { kind, speed_mps, radius_m, duration_slots: d as usize })
                }
                _ => None,
            }
        } else {
            None
        };
        s.finish();

        let (
            Some(visibility_km),
            Some(wavelength_nm),
            Some(gamma_linear),
            Some(alpha),
            Some(bandwidth_hz),
            Some(h_uav_m),
            Some(h_term_m),
            Some(c1),
            Some(c2),
            Some(mass_kg),
            Some(g),
            Some(v_min),
            Some(v_max),
            Some(a_max),
            Some(dt_s),
            Some(q_initial),
            Some(q_final),
            Some(v_initial),
            Some(v_final),
            Some(rate_threshold_bps),
            Some(energy_budget_j),
            Some(relative_tolerance),
            Some(max_outer_iterations),
            Some(subproblem_tolerance),
        ) = (
            visibility_km,
            wavelength_nm,
            gamma,
            alpha,
            bandwidth_hz,
            h_uav_m,
            h_term_m,
            c1,
            c2,
            mass_kg,
            g,
            v_min,
            v_max,
            a_max,
            dt_s,
            q_initial,
            q_final,
            v_initial,
            v_final,
            rate_threshold_bps,
            energy_budget_j,
            relative_tolerance,
            max_outer_iterations,
            subproblem_tolerance,
        )
        else {
            return Err(ConfigError::Invalid(errors));
        };

        let config = Config {
            link: LinkConfig { visibility_km, wavelength_nm, gamma_linear, alpha, bandwidth_hz, h_uav_m, h_term_m },
            platform: UavPlatform { c1, c2, mass_kg, g, v_min, v_max, a_max },
            mission: MissionConfig {
                dt_s,
                bc: BoundaryConditions { q_initial, v_initial, q_final: Some(q_final), v_final: Some(v_final) },
                rate_threshold_bps,
                energy_budget_j,
            },
            scp: ScpSettings {
                relative_tolerance,
                max_outer_iterations: max_outer_iterations as usize,
                subproblem_tolerance,
                clock: None,
            },
            visibilities_km,
            low_complexity,
            efficiency_steps,
            data_demand_bits,
            baseline,
        };
        // Cross-field checks run through the library constructors.
        if let Err(e) = config.scenario_at(config.link.visibility_km) {
            errors.push(e);
        }
        if let Some(list) = &config.visibilities_km {
            for &v in list {
                if let Err(e) = config.scenario_at(v) {
                    errors.push(format!("boundary.visibilities_km ({v} km): {e}"));
                }
            }
        }
        if let Some(b) = &config.baseline {
            if let Err(e) = b.validate(&config.platform) {
                errors.push(format!("baseline: {e}"));
            }
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn reference() -> Config {
        Config::from_toml_str(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    pub fn scenario(&self) -> Result<Scenario, String> {
        self.scenario_at(self.link.visibility_km)
    }

    /// The mission with the link evaluated at another visibility.
    pub fn scenario_at(&self, visibility_km: f64) -> Result<Scenario, String> {
        let link = self.link.at_visibility(visibility_km)?;
        Scenario::new(ScenarioParams {
            link,
            platform: self.platform,
            dt_s: self.mission.dt_s,
            bc: self.mission.bc,
            rate_threshold_bps: self.mission.rate_threshold_bps,
            energy_budget_j: self.mission.energy_budget_j,
        })
        .map_err(|e| e.to_string())
    }
}
