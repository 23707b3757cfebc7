//! The consolidated check suite: every testable claim about the wave problem as
//! one deterministic, ordered list of pass/fail results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear_analysis::{c_star, lambda0, CharRoots};
use crate::model::{Grid, GridFunction, ModelParams, Tail};
use crate::pde_sim::{self, SimConfig};
use crate::resolvent::{apply_delta, apply_delta_inverse, choose_alphas, delta_inverse_piecewise_g, ResolventSpec};
use crate::wave_profile::{
    align_profiles, profile_diagnostics, ProfileDiagnostics, recommended_half_width, solve_bvp_newton, solve_fixed_point_with,
    verify_sub_inequalities, BoundSet, FixedPointOptions, FixedPointReport, NewtonOptions, WaveSetup, M_SAFETY,
};

/// Per-check tolerances. A check passes when its worst margin is at least
/// minus the tolerance.
pub mod tolerances {
    /// Round trip of the second-order differencing and the second-order
    /// product quadrature at dx = 0.01.
    pub const INVERSION: f64 = 1e-6;
    /// Accepted window for the observed order of the round trip; the scheme is second order.
    pub const ORDER_LO: f64 = 1.8;
    pub const ORDER_HI: f64 = 2.2;
    /// Piecewise-exponential domination. The pieces are integrated exactly
    /// except at the kink, where the error is one-sided and O(dx).
    pub const PIECEWISE_G: f64 = 1e-8;
    /// Closed-form differential inequalities; only rounding remains.
    pub const SUB_SOLUTION: f64 = 1e-10;
    /// Pointwise slack for F(u) in Gamma; absorbs the O(dx^2) quadrature error.
    pub const GAMMA: f64 = 1e-6;
    /// Weighted fixed-point residual, the solver stopping tolerance.
    pub const FIXED_POINT: f64 = 1e-8;
    /// Max-norm gap between the two solvers after alignment; both are O(dx^2) at dx = 0.025.
    pub const SOLVER_AGREEMENT: f64 = 1e-5;
    /// Wrong-sign increments of monotone components.
    pub const MONOTONE: f64 = 1e-10;
    /// Relative error of the fitted left decay rate on the leftmost quarter.
    pub const LEFT_DECAY: f64 = 0.02;
    /// Spread of the three integral-identity values; trapezoid plus window truncation at L = 60.
    pub const INTEGRAL_IDENTITY: f64 = 0.005;
    /// R at the right end against its limit; the window end is not yet at +inf.
    pub const R_END: f64 = 0.01;
    /// R rebuilt from I by the kernel formula; O(dx^2) quadrature.
    pub const R_RECONSTRUCTION: f64 = 1e-4;
    /// max J against the total drop.
    pub const J_BOUND: f64 = 1e-8;
    /// Measured PDE speed against c*, relative.
    pub const SPEED: f64 = 0.05;
    /// Standard error of the fitted speed, relative.
    pub const SPEED_STDERR: f64 = 0.01;
    /// max I at the end of a sub-threshold run, relative to its start.
    pub const EXTINCTION: f64 = 1e-8;
}

/// Default seed of the sampling checks.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("check `{0}` has no anchor")]
    MissingAnchor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    /// Suite position, 1 to 7.
    pub group: u8,
    pub name: String,
    /// The mathematical statement the check exercises.
    pub anchor: String,
    pub status: Status,
    /// Signed slack, positive when satisfied. Absent when nothing could be measured.
    pub worst_margin: Option<f64>,
    pub tolerance: f64,
    pub details: String,
}

/// A registered check: name, anchor and tolerance, waiting for a margin.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSpec {
    group: u8,
    name: &'static str,
    anchor: &'static str,
    tolerance: f64,
}

impl CheckSpec {
    /// Refuses checks without an anchor.
    pub fn new(group: u8, name: &'static str, anchor: &'static str, tolerance: f64) -> Result<Self, VerifyError> {
        if anchor.trim().is_empty() {
            return Err(VerifyError::MissingAnchor(name.to_string()));
        }
        Ok(Self {
            group,
            name,
            anchor,
            tolerance,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn evaluate(&self, margin: Option<f64>, details: impl Into<String>) -> CheckResult {
        // adding +0 turns a negated zero into +0 so reports stay canonical
        let margin = margin.map(|m| m + 0.0);
        let pass = margin.is_some_and(|m| m >= -self.tolerance);
        self.result(if pass { Status::Pass } else { Status::Fail }, margin, details.into())
    }

    pub fn skip(&self, why: impl Into<String>) -> CheckResult {
        self.result(Status::Skipped, None, why.into())
    }

    fn result(&self, status: Status, worst_margin: Option<f64>, details: String) -> CheckResult {
        CheckResult {
            group: self.group,
            name: self.name.to_string(),
            anchor: self.anchor.to_string(),
            status,
            worst_margin,
            tolerance: self.tolerance,
            details,
        }
    }
}

use tolerances as tol;

/// Every check the suite can emit, in report order.
const CHECKS: &[(u8, &str, &str, f64)] = &[
    (1, "resolvent_inversion", "Delta_i^{-1}(Delta_i h) = h for decaying smooth h", tol::INVERSION),
    (1, "resolvent_inversion_order", "the round-trip error is second order in dx", 0.0),
    (2, "piecewise_g_domination", "Delta_i^{-1}(Delta_i g) >= g for g = max(e^{lx}(1 - M e^{ex}), 0)", tol::PIECEWISE_G),
    (3, "sub_super_inequalities", "the sub-solutions satisfy their differential inequalities left of the crossovers", tol::SUB_SOLUTION),
    (3, "sub_super_undershoot_detected", "halving M1 below its admissible threshold breaks the S inequality", 0.0),
    (4, "gamma_invariance", "F maps the sandwich set Gamma into itself", tol::GAMMA),
    (5, "fixed_point_residual", "projected Picard iteration reaches a fixed point of F", tol::FIXED_POINT),
    (5, "solver_agreement", "the fixed point of F and the Newton solution of the wave ODEs coincide up to translation", tol::SOLVER_AGREEMENT),
    (6, "profile_monotone", "S decreases and R increases along the wave", tol::MONOTONE),
    (6, "profile_infective_bounds", "0 <= I <= S(-inf) - S(+inf)", tol::MONOTONE),
    (6, "left_decay_rate", "I ~ e^{lambda0 x} as x -> -inf", tol::LEFT_DECAY),
    (6, "integral_identity", "int (gamma+delta) I = int beta S I / N = c (S(-inf) - S(+inf))", tol::INTEGRAL_IDENTITY),
    (6, "r_limit", "R(+inf) = gamma (S(-inf) - S(+inf)) / (gamma + delta)", tol::R_END),
    (6, "r_reconstruction", "R is the gamma/c-weighted kernel integral of I", tol::R_RECONSTRUCTION),
    (6, "j_bound", "J is nondecreasing, I <= J and max J <= S(-inf) - S(+inf)", tol::J_BOUND),
    (7, "pde_speed", "compact outbreaks spread at the minimal speed c*", tol::SPEED),
    (7, "pde_speed_stderr", "the late-time front position is linear in t", tol::SPEED_STDERR),
    (7, "extinction", "no wave exists when R0 <= 1: infection dies out", tol::EXTINCTION),
    (7, "extinction_monotone", "max I decays monotonically at late times when R0 <= 1", 0.0),
    (7, "subcritical_seed", "no wave travels below c*: a slow seed relaxes to c*", 0.0),
];

fn spec(name: &str) -> CheckSpec {
    let &(group, name, anchor, tolerance) = CHECKS.iter().find(|c| c.1 == name).expect("check is registered");
    CheckSpec::new(group, name, anchor, tolerance).expect("registered checks carry anchors")
}

/// The full registration table; fails if any entry lacks an anchor.
pub fn registered_checks() -> Result<Vec<CheckSpec>, VerifyError> {
    CHECKS.iter().map(|&(g, n, a, t)| CheckSpec::new(g, n, a, t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub level: Level,
    pub seed: u64,
    /// Random profiles drawn from Gamma.
    pub gamma_samples: usize,
    /// Mutation hook: evaluate the checks against F with the incidence sign
    /// in F2 flipped.
    #[doc(hidden)]
    pub flip_f2: bool,
}

impl SuiteOptions {
    pub fn new(level: Level) -> Self {
        Self {
            level,
            seed: DEFAULT_SEED,
            gamma_samples: 100,
            flip_f2: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub params: ModelParams,
    pub c: f64,
    pub level: Level,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    /// True iff no non-skipped check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<3} {:<30} {:<8} {:>14} {:>10}\n", "#", "check", "status", "margin", "tol");
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "skip",
            };
            let margin = c.worst_margin.map_or("-".to_string(), |m| format!("{m:.3e}"));
            out.push_str(&format!(
                "{:<3} {:<30} {:<8} {:>14} {:>10.1e}  {}\n",
                c.group, c.name, status, margin, c.tolerance, c.details
            ));
        }
        out
    }
}

/// Name, function and its left/right tails.
pub type TestFunction = (&'static str, fn(f64) -> f64, Tail, Tail);

/// Smooth decaying test functions for the inversion oracle, with exact
/// tails on [-L, L].
pub fn inversion_test_functions() -> [TestFunction; 3] {
    fn gauss(x: f64) -> f64 {
        (-x * x).exp()
    }
    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }
    fn wave_packet(x: f64) -> f64 {
        (3.0 * x).sin() * (-x * x).exp()
    }
    [
        ("gaussian", gauss, Tail::Zero, Tail::Zero),
        ("sech", sech, Tail::ExpGrowth(1.0), Tail::ExpGrowth(-1.0)),
        ("modulated_gaussian", wave_packet, Tail::Zero, Tail::Zero),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrip {
    pub function: &'static str,
    pub operator: usize,
    pub dx: f64,
    pub error: f64,
}

/// Max error of Delta^{-1}(Delta h) - h over |x| <= 0.9 L for every test
/// function and operator.
pub fn inversion_roundtrips(specs: &[ResolventSpec; 3], half_width: f64, dx: f64) -> Vec<RoundTrip> {
    let grid = Grid::symmetric(half_width, dx).expect("valid oracle grid");
    let mut out = Vec::new();
    for (name, f, lt, rt) in inversion_test_functions() {
        let h = GridFunction::from_fn(grid, lt, rt, f);
        for s in specs {
            let error = apply_delta(&h, s)
                .and_then(|dh| apply_delta_inverse(&dh, s))
                .map(|back| {
                    (0..grid.n)
                        .filter(|&k| grid.x(k).abs() <= 0.9 * half_width)
                        .map(|k| (back.values[k] - h.values[k]).abs())
                        .fold(0.0, f64::max)
                })
                .unwrap_or(f64::INFINITY);
            out.push(RoundTrip {
                function: name,
                operator: s.index,
                dx,
                error,
            });
        }
    }
    out
}

/// Observed orders log2(e(dx) / e(dx/2)), pairwise over matching entries.
pub fn observed_orders(coarse: &[RoundTrip], fine: &[RoundTrip]) -> Vec<f64> {
    coarse.iter().zip(fine).map(|(a, b)| (a.error / b.error).log2()).collect()
}

/// Grid of the inversion oracle.
pub const INVERSION_HALF_WIDTH: f64 = 20.0;
pub const INVERSION_DX: f64 = 0.01;
/// Grid of the profile diagnostics.
pub const PROFILE_HALF_WIDTH: f64 = 60.0;
pub const PROFILE_DX: f64 = 0.05;
/// Spacing of the two-solver comparison.
pub const AGREEMENT_DX: f64 = 0.025;

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn check_inversion(specs: &[ResolventSpec; 3]) -> Vec<CheckResult> {
    let coarse = inversion_roundtrips(specs, INVERSION_HALF_WIDTH, INVERSION_DX);
    let fine = inversion_roundtrips(specs, INVERSION_HALF_WIDTH, INVERSION_DX / 2.0);
    let err = worst(coarse.iter().map(|r| r.error));
    let at = coarse.iter().max_by(|a, b| a.error.total_cmp(&b.error)).expect("nine cases");
    let orders = observed_orders(&coarse, &fine);
    let (lo, hi) = orders
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), o| (l.min(*o), h.max(*o)));
    let order_margin = (lo - tol::ORDER_LO).min(tol::ORDER_HI - hi);
    vec![
        spec("resolvent_inversion").evaluate(
            Some(-err),
            format!("max error {err:.3e} ({} with Delta_{}) at dx = {INVERSION_DX}", at.function, at.operator),
        ),
        spec("resolvent_inversion_order").evaluate(
            order_margin.is_finite().then_some(order_margin),
            format!("observed orders in [{lo:.3}, {hi:.3}] under dx halving"),
        ),
    ]
}

fn check_piecewise_g(specs: &[ResolventSpec; 3], b: &BoundSet) -> CheckResult {
    let grid = Grid::symmetric(INVERSION_HALF_WIDTH, INVERSION_DX).expect("valid grid");
    let mut cases: Vec<(usize, f64, f64)> = (0..3).map(|j| (j, b.eps[j], b.m[j])).collect();
    cases.push((1, 0.1, 1.0));
    let mut margin = f64::INFINITY;
    let mut notes = Vec::new();
    for (j, eps, m) in cases {
        match delta_inverse_piecewise_g(&grid, b.lambda0, eps, m, &specs[j]) {
            Ok(rep) => margin = margin.min(rep.min_margin),
            Err(e) => notes.push(format!("Delta_{}: {e}", j + 1)),
        }
    }
    let ok = notes.is_empty();
    spec("piecewise_g_domination").evaluate(
        ok.then_some(margin),
        if ok {
            format!("min (result - g) = {margin:.3e} over 4 cases")
        } else {
            notes.join("; ")
        },
    )
}

fn check_sub_super(p: &ModelParams, roots: &CharRoots, b: &BoundSet) -> Vec<CheckResult> {
    let grid = Grid::symmetric(PROFILE_HALF_WIDTH, 0.01).expect("valid grid");
    let rep = verify_sub_inequalities(b, p, &grid);
    let weak = BoundSet::from_constants(p, roots, b.eps, [b.m[0] / M_SAFETY / 2.0, b.m[1], b.m[2]]);
    let weak_rep = verify_sub_inequalities(&weak, p, &grid);
    vec![
        spec("sub_super_inequalities").evaluate(
            Some(rep.min_margin()),
            format!(
                "worst margins S {:.3e}, I {:.3e}, R {:.3e}",
                rep.worst_margin[0], rep.worst_margin[1], rep.worst_margin[2]
            ),
        ),
        spec("sub_super_undershoot_detected").evaluate(
            Some(-weak_rep.worst_margin[0]),
            format!("S margin with M1 halved below threshold: {:.3e}", weak_rep.worst_margin[0]),
        ),
    ]
}

fn check_gamma(setup: &WaveSetup, flip: bool, opts: &SuiteOptions) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let f = if flip { setup.f_map().with_flipped_f2_sign() } else { setup.f_map() };
    let mut excess = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..opts.gamma_samples {
        let u = setup.gamma.sample(&mut rng);
        match f.apply(&u) {
            Ok(fu) => excess = excess.max(setup.gamma.excess(&fu).worst()),
            Err(_) => failures += 1,
        }
    }
    let ok = failures == 0;
    spec("gamma_invariance").evaluate(
        ok.then_some(-excess),
        format!(
            "{} samples (seed {:#x}), worst excursion outside Gamma {excess:.3e}{}",
            opts.gamma_samples,
            opts.seed,
            if ok { String::new() } else { format!(", {failures} evaluations failed") }
        ),
    )
}

/// The three stopping conditions in units of the residual tolerance: the
/// result is at most tol exactly when the solver reports convergence.
fn convergence_excess(fp: &FixedPointReport, opts: &FixedPointOptions) -> f64 {
    fp.residual
        .max(fp.ode_residual / 10.0)
        .max(opts.tol * fp.clamp_fraction / opts.clamp_budget)
}

/// Iteration budget of the suite's solves; converging runs need a few hundred.
pub const SUITE_MAX_ITER: usize = 5000;

fn fixed_point(setup: &WaveSetup, flip: bool, opts: &FixedPointOptions) -> Option<FixedPointReport> {
    let f = if flip { setup.f_map().with_flipped_f2_sign() } else { setup.f_map() };
    solve_fixed_point_with(setup, &f, opts).ok()
}

fn check_solvers(p: &ModelParams, c: f64, flip: bool) -> Vec<CheckResult> {
    let setup = lambda0(c, p).ok().and_then(|roots| {
        let half = recommended_half_width(roots.lambda0, PROFILE_HALF_WIDTH);
        let grid = Grid::symmetric(half, AGREEMENT_DX).ok()?;
        WaveSetup::new(p, c, &grid, 1.0).ok()
    });
    let Some(setup) = setup else {
        return vec![
            spec("fixed_point_residual").evaluate(None, "setup failed"),
            spec("solver_agreement").evaluate(None, "setup failed"),
        ];
    };
    let opts = FixedPointOptions {
        anderson_depth: 3,
        max_iter: SUITE_MAX_ITER,
        ..Default::default()
    };
    let Some(fp) = fixed_point(&setup, flip, &opts) else {
        return vec![
            spec("fixed_point_residual").evaluate(None, "fixed-point iteration errored"),
            spec("solver_agreement").evaluate(None, "no fixed point to compare"),
        ];
    };
    let g = setup.gamma.grid();
    let residual = spec("fixed_point_residual").evaluate(
        Some(-convergence_excess(&fp, &opts)),
        format!(
            "L = {}, dx = {AGREEMENT_DX}: {} iterations, weighted residual {:.3e}, ODE residual {:.3e}, clamp fraction {:.3e}, converged {}",
            g.x_max, fp.iterations, fp.residual, fp.ode_residual, fp.clamp_fraction, fp.converged
        ),
    );
    let agreement = match solve_bvp_newton(p, c, &fp.profile, &NewtonOptions::default()) {
        Ok(nw) => {
            let a = align_profiles(&fp.profile, &nw.profile, 40.0);
            spec("solver_agreement").evaluate(
                Some(-a.aligned_max_diff),
                format!(
                    "Newton {} steps; aligned max diff {:.3e} at shift {:.3e} (raw {:.3e})",
                    nw.steps, a.aligned_max_diff, a.shift, a.raw_max_diff
                ),
            )
        }
        Err(e) => spec("solver_agreement").evaluate(None, format!("Newton failed: {e}")),
    };
    vec![residual, agreement]
}

fn check_diagnostics(p: &ModelParams, c: f64, flip: bool) -> Vec<CheckResult> {
    const NAMES: [&str; 7] = [
        "profile_monotone",
        "profile_infective_bounds",
        "left_decay_rate",
        "integral_identity",
        "r_limit",
        "r_reconstruction",
        "j_bound",
    ];
    let grid = Grid::symmetric(PROFILE_HALF_WIDTH, PROFILE_DX).expect("valid grid");
    let fp = WaveSetup::new(p, c, &grid, 1.0)
        .ok()
        .and_then(|setup| {
            let opts = FixedPointOptions {
                max_iter: SUITE_MAX_ITER,
                ..Default::default()
            };
            fixed_point(&setup, flip, &opts)
        });
    let Some(fp) = fp else {
        return NAMES.iter().map(|n| spec(n).evaluate(None, "no profile")).collect();
    };
    let d = match profile_diagnostics(&fp.profile, p, c) {
        Ok(d) => d,
        Err(e) => return NAMES.iter().map(|n| spec(n).evaluate(None, format!("{e}"))).collect(),
    };
    let note = if fp.converged { "" } else { " (iteration did not converge)" };
    diagnostic_checks(&d, note)
}

/// Group-6 checks evaluated on precomputed profile diagnostics; `note` is
/// appended to every details string.
pub fn diagnostic_checks(d: &ProfileDiagnostics, note: &str) -> Vec<CheckResult> {
    vec![
        spec("profile_monotone").evaluate(
            Some(-d.s_max_increase.max(d.r_max_decrease)),
            format!(
                "max S increment {:.3e}, max R decrement {:.3e}{note}",
                d.s_max_increase, d.r_max_decrease
            ),
        ),
        spec("profile_infective_bounds").evaluate(
            Some(d.i_min.min(d.drop - d.i_max)),
            format!("I in [{:.3e}, {:.6}], drop {:.6}{note}", d.i_min, d.i_max, d.drop),
        ),
        spec("left_decay_rate").evaluate(
            Some(-d.left_decay_rel_err),
            format!("fit {:.6} vs lambda0 {:.6}{note}", d.left_decay_fit, d.lambda0),
        ),
        spec("integral_identity").evaluate(
            Some(-d.identity_spread),
            format!(
                "removal {:.6}, incidence {:.6}, flux {:.6}{note}",
                d.removal_integral, d.incidence_integral, d.flux
            ),
        ),
        spec("r_limit").evaluate(
            Some(-d.r_end_rel_err),
            format!("R(x_max) {:.6} vs {:.6}{note}", d.r_end, d.r_target),
        ),
        spec("r_reconstruction").evaluate(
            Some(-d.r_reconstruction_err),
            format!("max |R - R_rebuilt| {:.3e}{note}", d.r_reconstruction_err),
        ),
        spec("j_bound").evaluate(
            Some((-d.j_max_decrease).min(-d.i_minus_j_max).min(d.drop - d.j_max)),
            format!(
                "max J {:.9} vs drop {:.9}, max J decrement {:.3e}, max (I - J) {:.3e}{note}",
                d.j_max, d.drop, d.j_max_decrease, d.i_minus_j_max
            ),
        ),
    ]
}

/// Configuration of the spreading-speed run: L = 200, dx = 0.1, t_end = 80.
pub fn speed_run_config(p: &ModelParams) -> SimConfig {
    SimConfig::new(*p, Grid::symmetric(200.0, 0.1).expect("valid grid"), 80.0)
}

/// Configuration of the sub-threshold decay run: as the speed run with t_end = 100.
pub fn extinction_run_config(p: &ModelParams) -> SimConfig {
    SimConfig::new(*p, Grid::symmetric(200.0, 0.1).expect("valid grid"), 100.0)
}

/// The parameter set with beta lowered so that R0 = 0.9.
pub fn sub_threshold_variant(p: &ModelParams) -> ModelParams {
    ModelParams {
        beta: 0.9 * (p.gamma + p.delta),
        ..*p
    }
}

/// Speed of the subcritical seed.
pub const SUBCRITICAL_TARGET: f64 = 1.0;

fn check_pde(p: &ModelParams) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let cs = c_star(p);
    match cs {
        Some(cs) => match pde_sim::run(&speed_run_config(p)) {
            Ok(run) => {
                let fit = run.front.speed_fit;
                out.push(spec("pde_speed").evaluate(
                    fit.map(|f| -(f.slope - cs).abs() / cs),
                    fit.map_or("no front".to_string(), |f| format!("speed {:.6} vs c* {cs:.6}", f.slope)),
                ));
                out.push(spec("pde_speed_stderr").evaluate(
                    fit.map(|f| -f.slope_stderr / f.slope.abs()),
                    fit.map_or("no front".to_string(), |f| format!("stderr {:.3e}", f.slope_stderr)),
                ));
            }
            Err(e) => {
                out.push(spec("pde_speed").evaluate(None, format!("{e}")));
                out.push(spec("pde_speed_stderr").evaluate(None, format!("{e}")));
            }
        },
        None => {
            out.push(spec("pde_speed").skip("R0 <= 1: no minimal speed"));
            out.push(spec("pde_speed_stderr").skip("R0 <= 1: no minimal speed"));
        }
    }
    let sub = if p.r_naught() <= 1.0 { *p } else { sub_threshold_variant(p) };
    match pde_sim::run(&extinction_run_config(&sub)) {
        Ok(run) => {
            let ratio = run.final_max_i() / run.initial_max_i();
            let late = run.max_i_late_increase(0.5 * run.t_final);
            out.push(spec("extinction").evaluate(
                Some(-ratio),
                format!("R0 = {:.3}: max I(t = {}) / max I(0) = {ratio:.3e}", sub.r_naught(), run.t_final),
            ));
            out.push(spec("extinction_monotone").evaluate(
                Some(-late),
                format!("largest late increase of max I {late:.3e}"),
            ));
        }
        Err(e) => {
            out.push(spec("extinction").evaluate(None, format!("{e}")));
            out.push(spec("extinction_monotone").evaluate(None, format!("{e}")));
        }
    }
    let subcrit = match pde_sim::subcritical_falsification(&speed_run_config(p), SUBCRITICAL_TARGET) {
        Ok(rep) => {
            let margin = match (rep.c_star, rep.measured_speed) {
                (Some(cs), Some(f)) => Some(tol::SPEED * cs - (f.slope - cs).abs()),
                (None, _) => Some(if rep.outcome == pde_sim::Outcome::Extinction { 0.0 } else { -1.0 }),
                _ => None,
            };
            spec("subcritical_seed").evaluate(
                margin,
                format!(
                    "seed rate {:.3} for c = {SUBCRITICAL_TARGET}: measured {}, outcome {:?}",
                    rep.seed_rate,
                    rep.measured_speed.map_or("none".to_string(), |f| format!("{:.6}", f.slope)),
                    rep.outcome
                ),
            )
        }
        Err(e) => spec("subcritical_seed").evaluate(None, format!("{e}")),
    };
    out.push(subcrit);
    out
}

/// Run checks 1 to 6 (and 7 at full level) in order. Wave checks are skipped
/// outside the wave regime or for c <= c*; failures are results, not errors.
pub fn run_suite(p: &ModelParams, c: f64, opts: &SuiteOptions) -> SuiteReport {
    let mut checks = Vec::new();
    let wave_ready = p
        .validate()
        .ok()
        .filter(|_| p.wave_regime())
        .and_then(|_| lambda0(c, p).ok())
        .and_then(|roots| Some((roots, choose_alphas(p, &roots).ok()?, BoundSet::new(p, &roots).ok()?)));
    match wave_ready {
        Some((roots, specs, bounds)) => {
            checks.extend(check_inversion(&specs));
            checks.push(check_piecewise_g(&specs, &bounds));
            checks.extend(check_sub_super(p, &roots, &bounds));
            let grid = Grid::symmetric(PROFILE_HALF_WIDTH, PROFILE_DX).expect("valid grid");
            match WaveSetup::new(p, c, &grid, 1.0) {
                Ok(setup) => checks.push(check_gamma(&setup, opts.flip_f2, opts)),
                Err(e) => checks.push(spec("gamma_invariance").evaluate(None, format!("{e}"))),
            }
            checks.extend(check_solvers(p, c, opts.flip_f2));
            checks.extend(check_diagnostics(p, c, opts.flip_f2));
        }
        None => {
            let why = if p.wave_regime() {
                format!("c = {c} is not above c*")
            } else {
                format!("outside the wave regime (R0 = {:.3}, d3 = {}, 2 d2 = {})", p.r_naught(), p.d3, 2.0 * p.d2)
            };
            checks.extend(CHECKS.iter().filter(|c| c.0 <= 6).map(|c| spec(c.1).skip(why.clone())));
        }
    }
    if opts.level == Level::Full {
        checks.extend(check_pde(p));
    }
    SuiteReport {
        params: *p,
        c,
        level: opts.level,
        seed: opts.seed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchorless_checks_are_refused() {
        assert_eq!(
            CheckSpec::new(1, "nameless", "  ", 0.0),
            Err(VerifyError::MissingAnchor("nameless".into()))
        );
        let all = registered_checks().unwrap();
        assert_eq!(all.len(), CHECKS.len());
        let mut groups: Vec<u8> = all.iter().map(|c| c.group).collect();
        let sorted = {
            let mut g = groups.clone();
            g.sort();
            g
        };
        assert_eq!(groups, sorted, "table is in suite order");
        groups.dedup();
        assert_eq!(groups, vec![1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn status_follows_margin_and_tolerance() {
        let s = CheckSpec::new(1, "x", "a claim", 1e-3).unwrap();
        assert_eq!(s.evaluate(Some(-1e-3), "").status, Status::Pass);
        assert_eq!(s.evaluate(Some(-2e-3), "").status, Status::Fail);
        assert_eq!(s.evaluate(None, "").status, Status::Fail);
        assert_eq!(s.skip("").status, Status::Skipped);
    }

    #[test]
    fn sub_threshold_skips_wave_checks() {
        let mut p = ModelParams::reference();
        p.beta = 0.9;
        let rep = run_suite(&p, 2.5, &SuiteOptions::new(Level::Quick));
        assert!(rep.checks.iter().all(|c| c.status == Status::Skipped));
        assert!(rep.passed());
    }
}
