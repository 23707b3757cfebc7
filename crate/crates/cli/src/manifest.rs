//! Run manifests: what ran, with which fully resolved inputs, and what it wrote.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sirwave_core::verification::{SuiteReport, Status};
use sirwave_core::wave_profile::WaveSetup;
use sirwave_core::{c_star, ModelParams};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{inventory, write_json, FileEntry, MANIFEST_NAME};
use crate::sweep::SweepSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Analyze,
    Profile,
    Simulate,
    Sweep,
    Verify,
}

/// Constants derived from the resolved config at its wave speed `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub r0: f64,
    pub wave_regime: bool,
    pub c: f64,
    pub c_star: Option<f64>,
    pub lambda0: Option<f64>,
    pub lambda0_plus: Option<f64>,
    pub alphas: Option<[f64; 3]>,
    pub mu: Option<f64>,
    pub bounds: Option<serde_json::Value>,
    /// Why the wave constants are missing, if they are.
    pub note: Option<String>,
    /// Resolved PDE time step (simulate only).
    pub dt: Option<f64>,
}

impl Derived {
    pub fn compute(cfg: &RunConfig) -> Self {
        let p: &ModelParams = &cfg.params;
        let mut d = Self {
            r0: p.r_naught(),
            wave_regime: p.wave_regime(),
            c: cfg.c,
            c_star: c_star(p),
            lambda0: None,
            lambda0_plus: None,
            alphas: None,
            mu: None,
            bounds: None,
            note: None,
            dt: None,
        };
        let setup = cfg
            .profile_grid()
            .map_err(|e| e.to_string())
            .and_then(|g| WaveSetup::new(p, cfg.c, &g, cfg.alpha_floor_factor).map_err(|e| e.to_string()));
        match setup {
            Ok(s) => {
                d.lambda0 = Some(s.roots.lambda0);
                d.lambda0_plus = Some(s.roots.lambda0_plus);
                d.alphas = Some(s.specs.map(|sp| sp.alpha));
                d.mu = Some(s.norm.mu);
                d.bounds = serde_json::to_value(s.gamma.bounds).ok();
            }
            Err(e) => d.note = Some(e),
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub passed: bool,
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

impl SuiteSummary {
    pub fn of(r: &SuiteReport) -> Self {
        let count = |s: Status| r.checks.iter().filter(|c| c.status == s).count();
        Self {
            passed: r.passed(),
            pass: count(Status::Pass),
            fail: count(Status::Fail),
            skipped: count(Status::Skipped),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub command: CommandKind,
    pub config: RunConfig,
    pub sweep: Option<SweepSpec>,
    pub derived: Derived,
    pub outputs: Vec<FileEntry>,
    /// Command-specific headline results (outcome tags, speeds, residuals).
    pub summary: serde_json::Value,
    pub suite: Option<SuiteSummary>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Inventory `dir` and write its manifest. Call after every other output exists.
pub fn write_manifest(
    dir: &Path,
    command: CommandKind,
    config: &RunConfig,
    sweep: Option<SweepSpec>,
    derived: Derived,
    summary: serde_json::Value,
    suite: Option<SuiteSummary>,
) -> Result<RunManifest, CliError> {
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        command,
        config: config.clone(),
        sweep,
        derived,
        outputs: inventory(dir)?,
        summary,
        suite,
    };
    write_json(&dir.join(MANIFEST_NAME), &m)?;
    Ok(m)
}
