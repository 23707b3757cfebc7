//! The single-run subcommands: analyze, profile, simulate and verify.
//!
//! Each command writes into its own directory and finishes by writing the
//! manifest, so a directory holding a manifest is a completed run.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sirwave_core::linear_analysis::{check_d3_condition, phi_table, D3Check};
use sirwave_core::numerics::LinearFit;
use sirwave_core::pde_sim::{self, Outcome, SimError, SimRun, ThresholdFit};
use sirwave_core::verification::{diagnostic_checks, run_suite, CheckResult, Status, SuiteOptions};
use sirwave_core::wave_profile::{
    align_profiles, profile_diagnostics, solve_bvp_newton, solve_fixed_point_with, Alignment, BoundSet,
    FixedPointReport, NewtonOptions, NewtonReport, ProfileDiagnostics, WaveSetup,
};
use sirwave_core::{c_star, lambda0, minimal_speed, ModelParams, SpeedAnalysis};

use crate::config::{RunConfig, Solver};
use crate::error::{CliError, RunStatus};
use crate::manifest::{write_manifest, CommandKind, Derived, SuiteSummary};
use crate::output::{ensure_dir, fmt_f64, fmt_opt, write_csv, write_json, write_profile_csv, MANIFEST_NAME};

/// Prepare a fresh output directory. A directory left by an earlier run
/// (recognised by its manifest) is replaced; any other non-empty directory
/// is refused rather than clobbered.
pub fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        if entries.next().is_some() {
            if !dir.join(MANIFEST_NAME).is_file() {
                return Err(CliError::Config(format!(
                    "output directory {} is not empty and holds no manifest; refusing to overwrite it",
                    dir.display()
                )));
            }
            fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    ensure_dir(dir)
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda0Row {
    pub c: f64,
    pub lambda0: Option<f64>,
    pub lambda0_plus: Option<f64>,
    pub degenerate: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub params: ModelParams,
    pub r0: f64,
    pub r0_above_one: bool,
    pub wave_regime: bool,
    /// Absent (null) when R0 <= 1.
    pub c_star: Option<f64>,
    pub lambda_star: Option<f64>,
    pub minimal_speed: Option<SpeedAnalysis>,
    pub note: Option<String>,
    pub lambda0_table: Vec<Lambda0Row>,
    pub d3_condition: D3Check,
    pub phi_samples: Vec<(f64, f64)>,
}

pub fn analyze_report(cfg: &RunConfig) -> AnalyzeReport {
    let p = &cfg.params;
    let speed = minimal_speed(p);
    let note = match (&speed, p.r_naught() > 1.0) {
        (Err(e), _) => Some(format!("{e}; no traveling wave for R0 <= 1")),
        (Ok(_), true) => None,
        (Ok(_), false) => Some("R0 <= 1".into()),
    };
    let lambda0_table = cfg
        .c_values
        .iter()
        .map(|&c| match lambda0(c, p) {
            Ok(r) => Lambda0Row {
                c,
                lambda0: Some(r.lambda0),
                lambda0_plus: Some(r.lambda0_plus),
                degenerate: r.degenerate,
                note: None,
            },
            Err(e) => Lambda0Row {
                c,
                lambda0: None,
                lambda0_plus: None,
                degenerate: false,
                note: Some(e.to_string()),
            },
        })
        .collect();
    let speed = speed.ok();
    AnalyzeReport {
        params: *p,
        r0: p.r_naught(),
        r0_above_one: p.r_naught() > 1.0,
        wave_regime: p.wave_regime(),
        c_star: speed.as_ref().map(|s| s.c_star),
        lambda_star: speed.as_ref().map(|s| s.lambda_star),
        minimal_speed: speed,
        note,
        lambda0_table,
        d3_condition: check_d3_condition(p, cfg.c),
        phi_samples: phi_table(p, cfg.phi_lambda_max, cfg.phi_samples),
    }
}

pub fn analyze(cfg: &RunConfig, out: &Path) -> Result<RunStatus, CliError> {
    cfg.validate()?;
    prepare_out_dir(out)?;
    let report = analyze_report(cfg);
    write_json(&out.join("analyze.json"), &report)?;
    if cfg.phi_csv {
        write_csv(
            &out.join("phi.csv"),
            &["lambda", "phi"],
            report.phi_samples.iter().map(|&(l, f)| vec![fmt_f64(l), fmt_f64(f)]),
        )?;
    }
    println!("R0 = {}", report.r0);
    match report.c_star {
        Some(c) => println!("c* = {c}"),
        None => println!("c* absent (R0 <= 1)"),
    }
    println!("d3 condition: {} ({})", report.d3_condition.holds, report.d3_condition.note);
    let summary = json!({
        "r0": report.r0,
        "c_star": report.c_star,
        "d3_condition": report.d3_condition.holds,
    });
    write_manifest(out, CommandKind::Analyze, cfg, None, Derived::compute(cfg), summary, None)?;
    Ok(RunStatus::Ok)
}

// ---------------------------------------------------------------- profile

/// Refuse to solve where no wave exists, unless forced.
pub fn wave_gate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.force {
        return Ok(());
    }
    let p = &cfg.params;
    if p.r_naught() <= 1.0 {
        return Err(CliError::Refused(format!(
            "R0 = {} <= 1: there is no traveling wave below the epidemic threshold; pass --force to attempt anyway",
            p.r_naught()
        )));
    }
    if p.d3 >= 2.0 * p.d2 {
        return Err(CliError::Refused(format!(
            "d3 = {} is not strictly below 2 d2 = {}; the wave construction requires it; pass --force to attempt anyway",
            p.d3,
            2.0 * p.d2
        )));
    }
    let cs = c_star(p).expect("R0 > 1 gives a minimal speed");
    if cfg.c < cs {
        return Err(CliError::Refused(format!(
            "c = {} is below the minimal speed c* = {cs}: by the nonexistence result no traveling wave \
             with c < c* exists; pass --force to attempt anyway",
            cfg.c
        )));
    }
    if cfg.c == cs {
        return Err(CliError::Refused(format!(
            "c = c* = {cs}: the fixed-point construction needs c > c*; pass --force to attempt anyway"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileOutput {
    pub c: f64,
    pub half_width: f64,
    pub solver: Solver,
    pub converged: bool,
    /// True when the written profile did not meet the convergence test.
    pub partial: bool,
    pub fixed_point: Option<FixedPointReport>,
    pub newton: Option<NewtonReport>,
    pub newton_error: Option<String>,
    /// Picard against Newton after phase alignment (solver = both).
    pub agreement: Option<Alignment>,
    pub bounds: BoundSet,
    /// Largest excursion of the written profile outside Gamma.
    pub gamma_excess: Option<f64>,
    pub diagnostics: Option<ProfileDiagnostics>,
    pub diagnostics_error: Option<String>,
    pub checks: Vec<CheckResult>,
    pub diagnostics_pass: Option<bool>,
}

/// Solve for the profile and write `profile.csv` and `diagnostics.json`.
pub fn solve_profile(cfg: &RunConfig, out: &Path) -> Result<ProfileOutput, CliError> {
    let p = cfg.params;
    let grid = cfg.profile_grid()?;
    let setup = WaveSetup::new(&p, cfg.c, &grid, cfg.alpha_floor_factor).map_err(numerical)?;
    let newton_opts = NewtonOptions {
        max_steps: cfg.newton_max_steps,
        step_tol: cfg.newton_step_tol,
    };

    let fixed_point = match cfg.solver {
        Solver::Picard | Solver::Both => {
            Some(solve_fixed_point_with(&setup, &setup.f_map(), &cfg.fixed_point_options()).map_err(numerical)?)
        }
        Solver::Newton => None,
    };
    let (newton, newton_error) = match cfg.solver {
        Solver::Picard => (None, None),
        Solver::Newton | Solver::Both => {
            let init = fixed_point.as_ref().map_or_else(|| setup.gamma.midpoint(), |fp| fp.profile.clone());
            match solve_bvp_newton(&p, cfg.c, &init, &newton_opts) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    let agreement = match (&fixed_point, &newton) {
        (Some(fp), Some(nw)) => Some(align_profiles(&fp.profile, &nw.profile, 2.0 * grid.x_max / 3.0)),
        _ => None,
    };
    let converged = match cfg.solver {
        Solver::Picard => fixed_point.as_ref().is_some_and(|f| f.converged),
        Solver::Newton => newton.is_some(),
        Solver::Both => fixed_point.as_ref().is_some_and(|f| f.converged) && newton.is_some(),
    };

    let primary = fixed_point.as_ref().map(|f| &f.profile).or(newton.as_ref().map(|n| &n.profile));
    if let Some(u) = primary {
        write_profile_csv(&out.join("profile.csv"), u)?;
    }
    if let (Solver::Both, Some(nw)) = (cfg.solver, &newton) {
        write_profile_csv(&out.join("profile_newton.csv"), &nw.profile)?;
    }
    let (diagnostics, diagnostics_error) = match primary.map(|u| profile_diagnostics(u, &p, cfg.c)) {
        Some(Ok(d)) => (Some(d), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some("no profile".into())),
    };
    let note = if converged { "" } else { " (not converged)" };
    let checks = diagnostics.as_ref().map(|d| diagnostic_checks(d, note)).unwrap_or_default();
    let gamma_excess = primary.map(|u| setup.gamma.excess(u).worst());
    let result = ProfileOutput {
        c: cfg.c,
        half_width: grid.x_max,
        solver: cfg.solver,
        converged,
        partial: !converged,
        diagnostics_pass: diagnostics.as_ref().map(|_| checks.iter().all(|c| c.status == Status::Pass)),
        fixed_point,
        newton,
        newton_error,
        agreement,
        bounds: setup.gamma.bounds,
        gamma_excess,
        diagnostics,
        diagnostics_error,
        checks,
    };
    write_json(&out.join("diagnostics.json"), &result)?;
    Ok(result)
}

pub fn profile_summary(r: &ProfileOutput) -> serde_json::Value {
    json!({
        "converged": r.converged,
        "partial": r.partial,
        "iterations": r.fixed_point.as_ref().map(|f| f.iterations),
        "residual": r.fixed_point.as_ref().map(|f| f.residual),
        "newton_steps": r.newton.as_ref().map(|n| n.steps),
        "s_inf": r.fixed_point.as_ref().map(|f| f.s_inf).or(r.diagnostics.as_ref().map(|d| d.s_inf)),
        "aligned_max_diff": r.agreement.map(|a| a.aligned_max_diff),
        "diagnostics_pass": r.diagnostics_pass,
    })
}

pub fn profile(cfg: &RunConfig, out: &Path) -> Result<RunStatus, CliError> {
    cfg.validate()?;
    wave_gate(cfg)?;
    prepare_out_dir(out)?;
    let r = solve_profile(cfg, out)?;
    if let Some(fp) = &r.fixed_point {
        println!(
            "fixed point: {} after {} iterations, residual {:.3e}",
            if fp.converged { "converged" } else { "NOT converged" },
            fp.iterations,
            fp.residual
        );
    }
    if let Some(nw) = &r.newton {
        println!("newton: {} steps, residual {:.3e}", nw.steps, nw.residual);
    }
    if let Some(e) = &r.newton_error {
        println!("newton failed: {e}");
    }
    if let Some(a) = r.agreement {
        println!("agreement after alignment: {:.3e} (shift {:.3e})", a.aligned_max_diff, a.shift);
    }
    if let Some(pass) = r.diagnostics_pass {
        println!("diagnostics: {}", if pass { "pass" } else { "FAIL" });
    }
    write_manifest(out, CommandKind::Profile, cfg, None, Derived::compute(cfg), profile_summary(&r), None)?;
    Ok(if r.converged { RunStatus::Ok } else { RunStatus::NotConverged })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryHit {
    pub time: f64,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub outcome: Outcome,
    pub speed: Option<f64>,
    pub speed_stderr: Option<f64>,
    /// Standard error of the slope relative to the slope.
    pub speed_rel_stderr: Option<f64>,
    pub speed_fit: Option<LinearFit>,
    /// Speeds measured at alternative front levels.
    pub threshold_sensitivity: Vec<ThresholdFit>,
    pub c_star: Option<f64>,
    pub dt: f64,
    pub dt_auto: bool,
    pub stability_bound: f64,
    pub steps: usize,
    pub t_final: f64,
    pub initial_max_i: f64,
    pub final_max_i: f64,
    pub mass_drift: f64,
    pub clipped_total: f64,
    pub clipped_max_step_rel: f64,
    /// Set when the run stopped early; outputs then cover [0, time] only.
    pub front_hit_boundary: Option<BoundaryHit>,
    pub partial: bool,
    pub snapshots: Vec<SnapshotEntry>,
}

/// Run the PDE and write snapshots, front and mass traces and `summary.json`.
pub fn run_simulation(cfg: &RunConfig, out: &Path) -> Result<SimSummary, CliError> {
    let sc = cfg.sim_config()?;
    let stability_bound = sc.stability_bound();
    let (run, hit): (SimRun, Option<BoundaryHit>) = match pde_sim::run(&sc) {
        Ok(r) => (r, None),
        Err(SimError::FrontHitBoundary {
            time,
            position,
            partial,
        }) => (*partial, Some(BoundaryHit { time, position })),
        Err(e @ (SimError::StabilityViolated { .. } | SimError::InvalidConfig(_) | SimError::Model(_))) => {
            return Err(CliError::Config(e.to_string()))
        }
        Err(e) => return Err(numerical(e)),
    };

    let snap_dir = out.join("snapshots");
    ensure_dir(&snap_dir)?;
    let mut snapshots = Vec::new();
    for (k, s) in run.snapshots.iter().enumerate() {
        let file = format!("snapshots/snapshot_{k:04}.csv");
        write_profile_csv(&out.join(&file), &s.state)?;
        snapshots.push(SnapshotEntry { file, time: s.time });
    }
    write_csv(
        &out.join("front.csv"),
        &["t", "x_front"],
        run.front
            .times
            .iter()
            .zip(&run.front.positions)
            .map(|(t, x)| vec![fmt_f64(*t), fmt_opt(*x)]),
    )?;
    let m = &run.mass;
    write_csv(
        &out.join("mass.csv"),
        &["t", "S", "I", "R", "total", "max_I", "clipped"],
        (0..m.times.len()).map(|k| {
            [m.times[k], m.s[k], m.i[k], m.r[k], m.total[k], m.max_i[k], m.clipped[k]]
                .into_iter()
                .map(fmt_f64)
                .collect()
        }),
    )?;
    let fit = run.front.speed_fit;
    let summary = SimSummary {
        outcome: run.outcome,
        speed: fit.map(|f| f.slope),
        speed_stderr: fit.map(|f| f.slope_stderr),
        speed_rel_stderr: fit.map(|f| f.slope_stderr / f.slope.abs()),
        speed_fit: fit,
        threshold_sensitivity: run.front.sensitivity.clone(),
        c_star: c_star(&cfg.params),
        dt: run.dt,
        dt_auto: cfg.dt.is_none(),
        stability_bound,
        steps: run.steps,
        t_final: run.t_final,
        initial_max_i: run.initial_max_i(),
        final_max_i: run.final_max_i(),
        mass_drift: m.total_drift(),
        clipped_total: run.clipped_total,
        clipped_max_step_rel: run.clipped_max_step_rel,
        partial: hit.is_some(),
        front_hit_boundary: hit,
        snapshots,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn outcome_tag(o: Outcome) -> &'static str {
    match o {
        Outcome::Wave => "wave",
        Outcome::Extinction => "extinction",
        Outcome::Undetermined => "undetermined",
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<RunStatus, CliError> {
    cfg.validate()?;
    prepare_out_dir(out)?;
    let s = run_simulation(cfg, out)?;
    println!(
        "dt = {:e}{} over {} steps; outcome {}",
        s.dt,
        if s.dt_auto { " (auto)" } else { "" },
        s.steps,
        outcome_tag(s.outcome)
    );
    if let (Some(v), Some(e)) = (s.speed, s.speed_stderr) {
        println!("front speed {v:.6} +/- {e:.2e}");
    }
    if let Some(h) = &s.front_hit_boundary {
        println!("front reached the right boundary at t = {} (x = {}); outputs are partial", h.time, h.position);
    }
    let mut derived = Derived::compute(cfg);
    derived.dt = Some(s.dt);
    let summary = json!({
        "outcome": outcome_tag(s.outcome),
        "speed": s.speed,
        "speed_stderr": s.speed_stderr,
        "dt": s.dt,
        "dt_auto": s.dt_auto,
        "partial": s.partial,
    });
    write_manifest(out, CommandKind::Simulate, cfg, None, derived, summary, None)?;
    Ok(if s.partial { RunStatus::NotConverged } else { RunStatus::Ok })
}

// ---------------------------------------------------------------- verify

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<RunStatus, CliError> {
    cfg.validate()?;
    prepare_out_dir(out)?;
    let mut opts = SuiteOptions::new(cfg.level);
    opts.seed = cfg.seed;
    opts.gamma_samples = cfg.gamma_samples;
    let report = run_suite(&cfg.params, cfg.c, &opts);
    let table = report.table();
    print!("{table}");
    write_json(&out.join("report.json"), &report)?;
    fs::write(out.join("report.txt"), &table).map_err(|e| CliError::io(out.join("report.txt"), e))?;
    let suite = SuiteSummary::of(&report);
    println!(
        "{} passed, {} failed, {} skipped",
        suite.pass, suite.fail, suite.skipped
    );
    write_manifest(
        out,
        CommandKind::Verify,
        cfg,
        None,
        Derived::compute(cfg),
        json!({ "passed": suite.passed }),
        Some(suite),
    )?;
    Ok(if suite.passed { RunStatus::Ok } else { RunStatus::VerifyFailed })
}
