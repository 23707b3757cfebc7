//! Run configuration: a flat JSON object with a `params` block.
//!
//! Every key has a default, and the fully resolved config is what gets
//! written to the manifest, so a manifest alone reproduces a run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sirwave_core::pde_sim::{PulseSpec, SimConfig, TimeStep};
use sirwave_core::verification::{Level, DEFAULT_SEED};
use sirwave_core::wave_profile::{recommended_half_width, FixedPointOptions};
use sirwave_core::{lambda0, Grid, ModelParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Picard,
    Newton,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepTask {
    Profile,
    Simulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ModelParams,

    /// Wave speed for `profile` and `verify`.
    pub c: f64,
    /// Speeds tabulated by `analyze`.
    pub c_values: Vec<f64>,
    /// Upper end of the Phi(lambda) sample range.
    pub phi_lambda_max: f64,
    pub phi_samples: usize,
    pub phi_csv: bool,

    /// Profile window [-half_width, half_width].
    pub half_width: f64,
    /// Widen the profile window until exp(lambda0 x_min) <= 1e-10.
    pub auto_half_width: bool,
    pub dx: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub solver: Solver,
    pub anderson_depth: usize,
    pub alpha_floor_factor: f64,
    pub newton_max_steps: usize,
    pub newton_step_tol: f64,
    pub force: bool,

    pub sim_half_width: f64,
    pub sim_dx: f64,
    pub t_end: f64,
    /// Fixed time step; `null` picks the stable step automatically.
    pub dt: Option<f64>,
    pub pulse: PulseSpec,
    pub front_threshold: f64,
    pub output_interval: f64,
    pub fit_window: f64,
    /// Snapshot spacing; 0 writes only the initial and final states.
    pub snapshot_interval: f64,

    pub level: Level,
    pub seed: u64,
    pub gamma_samples: usize,

    pub sweep_task: SweepTask,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            c: 2.5,
            c_values: vec![2.1, 2.5, 3.0, 4.0],
            phi_lambda_max: 4.0,
            phi_samples: 200,
            phi_csv: false,
            half_width: 60.0,
            auto_half_width: false,
            dx: 0.05,
            tol: 1e-8,
            max_iter: 20_000,
            solver: Solver::Picard,
            anderson_depth: 0,
            alpha_floor_factor: 1.0,
            newton_max_steps: 50,
            newton_step_tol: 1e-10,
            force: false,
            sim_half_width: 200.0,
            sim_dx: 0.1,
            t_end: 80.0,
            dt: None,
            pulse: PulseSpec::default(),
            front_threshold: 1e-4,
            output_interval: 0.25,
            fit_window: 0.5,
            snapshot_interval: 10.0,
            level: Level::Quick,
            seed: DEFAULT_SEED,
            gamma_samples: 100,
            sweep_task: SweepTask::Profile,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{field}` = {v}: must be finite and strictly positive")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Field-level validation of everything a command might touch.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| CliError::Config(format!("params: {e}")))?;
        positive("c", self.c)?;
        for &c in &self.c_values {
            positive("c_values[]", c)?;
        }
        positive("phi_lambda_max", self.phi_lambda_max)?;
        positive("half_width", self.half_width)?;
        positive("dx", self.dx)?;
        positive("tol", self.tol)?;
        positive("alpha_floor_factor", self.alpha_floor_factor)?;
        positive("newton_step_tol", self.newton_step_tol)?;
        positive("sim_half_width", self.sim_half_width)?;
        positive("sim_dx", self.sim_dx)?;
        positive("t_end", self.t_end)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        positive("pulse.width", self.pulse.width)?;
        positive("front_threshold", self.front_threshold)?;
        positive("output_interval", self.output_interval)?;
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return Err(CliError::Config(format!(
                "`fit_window` = {}: must lie in (0, 1]",
                self.fit_window
            )));
        }
        if !(self.snapshot_interval.is_finite() && self.snapshot_interval >= 0.0) {
            return Err(CliError::Config(format!(
                "`snapshot_interval` = {}: must be finite and nonnegative",
                self.snapshot_interval
            )));
        }
        if self.phi_samples == 0 {
            return Err(CliError::Config("`phi_samples` must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(CliError::Config("`max_iter` must be at least 1".into()));
        }
        Ok(())
    }

    /// Half-width actually used for the profile window.
    pub fn effective_half_width(&self) -> f64 {
        match lambda0(self.c, &self.params) {
            Ok(r) if self.auto_half_width => recommended_half_width(r.lambda0, self.half_width),
            _ => self.half_width,
        }
    }

    pub fn profile_grid(&self) -> Result<Grid, CliError> {
        Grid::symmetric(self.effective_half_width(), self.dx)
            .map_err(|e| CliError::Config(format!("profile grid: {e}")))
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            anderson_depth: self.anderson_depth,
            alpha_floor_factor: self.alpha_floor_factor,
            ..FixedPointOptions::default()
        }
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        if self.snapshot_interval == 0.0 {
            return vec![0.0, self.t_end];
        }
        let n = (self.t_end / self.snapshot_interval).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * self.snapshot_interval).collect();
        if times.last().is_some_and(|t| (self.t_end - t).abs() > 1e-9 * self.t_end) {
            times.push(self.t_end);
        }
        times
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let grid = Grid::symmetric(self.sim_half_width, self.sim_dx)
            .map_err(|e| CliError::Config(format!("simulation grid: {e}")))?;
        let mut cfg = SimConfig::new(self.params, grid, self.t_end);
        cfg.dt = self.dt.map_or(TimeStep::Auto, TimeStep::Fixed);
        cfg.ic = sirwave_core::pde_sim::InitialCondition::Pulse(self.pulse);
        cfg.front_threshold = self.front_threshold;
        cfg.output_interval = self.output_interval;
        cfg.fit_window = self.fit_window;
        cfg.snapshot_times = self.snapshot_times();
        Ok(cfg)
    }

    /// Set a numeric key, looking first in `params` and then at top level.
    pub fn set_numeric(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let mut v = serde_json::to_value(&*self).map_err(|e| CliError::Config(e.to_string()))?;
        let obj = v.as_object_mut().expect("config serializes to an object");
        let number = serde_json::Number::from_f64(value)
            .ok_or_else(|| CliError::Config(format!("`{key}` = {value}: not a finite number")))?;
        let in_params = obj["params"].as_object().is_some_and(|p| p.contains_key(key));
        let slot = if in_params {
            obj.get_mut("params").and_then(|p| p.get_mut(key))
        } else {
            obj.get_mut(key)
        };
        match slot {
            // Integer keys (iteration counts, seeds) take integral values only.
            Some(s) if s.is_u64() => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(CliError::Config(format!("`{key}` = {value}: expected a nonnegative integer")));
                }
                *s = serde_json::Value::from(value as u64)
            }
            Some(s) if s.is_number() || (s.is_null() && key == "dt") => *s = serde_json::Value::Number(number),
            Some(_) => return Err(CliError::Config(format!("`{key}` is not a numeric key"))),
            None => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        *self = serde_json::from_value(v).map_err(|e| CliError::Config(format!("`{key}` = {value}: {e}")))?;
        Ok(())
    }
}
