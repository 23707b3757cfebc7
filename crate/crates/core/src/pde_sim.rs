//! Method-of-lines simulation of the reaction-diffusion system on a closed window.
//!
//! The window convention follows the rest of the crate: `L` is the half-width
//! of `[-L, L]`. The PDE front is launched near the left end and travels to the
//! right, so the simulated front is the mirror image of a wave profile `U(x + ct)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear_analysis::{c_star, lambda0};
use crate::model::{incidence, Grid, GridFunction, ModelError, ModelParams, Profile, Tail, INCIDENCE_GUARD};
use crate::numerics::{linear_fit, trapezoid, LinearFit, UniformSpline};
use crate::wave_profile::{solve_fixed_point, FixedPointOptions, WaveError};

/// Safety factor applied to the explicit diffusion limit dx^2 / (2 max d).
pub const DT_SAFETY: f64 = 0.4;
/// The front may not come closer than this many cells to x_max.
pub const BOUNDARY_GUARD_CELLS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StabilityViolated { dt: f64, bound: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("front reached x = {position} within {BOUNDARY_GUARD_CELLS} cells of x_max at t = {time}")]
    FrontHitBoundary {
        time: f64,
        position: f64,
        partial: Box<SimRun>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryCondition {
    NoFlux,
}

/// Gaussian pulse of infectives, `I = a exp(-(x - x0)^2 / w^2)`, with `S = S(-inf) - I`
/// and `R = 0`. Missing fields resolve to `x0 = x_min + L/4` and `a = 0.01 S(-inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub amplitude: Option<f64>,
}

fn default_width() -> f64 {
    2.0
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            center: None,
            width: default_width(),
            amplitude: None,
        }
    }
}

impl PulseSpec {
    pub fn resolved_center(&self, grid: &Grid) -> f64 {
        self.center.unwrap_or(grid.x_min + 0.5 * grid.length() / 4.0)
    }

    pub fn resolved_amplitude(&self, p: &ModelParams) -> f64 {
        self.amplitude.unwrap_or(0.01 * p.s_minus_inf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Pulse(PulseSpec),
    Custom(Profile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub t_end: f64,
    pub dt: TimeStep,
    pub ic: InitialCondition,
    pub bc: BoundaryCondition,
    /// Front level as a fraction of S(-inf).
    pub front_threshold: f64,
    /// Time between front/mass samples.
    pub output_interval: f64,
    /// Fraction of the trace (by time, counted from the end) used for the speed fit.
    pub fit_window: f64,
    pub snapshot_times: Vec<f64>,
}

impl SimConfig {
    pub fn new(params: ModelParams, grid: Grid, t_end: f64) -> Self {
        Self {
            params,
            grid,
            t_end,
            dt: TimeStep::Auto,
            ic: InitialCondition::Pulse(PulseSpec::default()),
            bc: BoundaryCondition::NoFlux,
            front_threshold: 1e-4,
            output_interval: 0.25,
            fit_window: 0.5,
            snapshot_times: Vec::new(),
        }
    }

    /// Explicit limit dx^2 / (2 max d) scaled by [`DT_SAFETY`].
    pub fn stability_bound(&self) -> f64 {
        DT_SAFETY * self.grid.dx * self.grid.dx / (2.0 * self.params.max_diffusion())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.front_threshold > 0.0 && self.front_threshold < 1.0) {
            return bad(format!("front_threshold = {} must lie in (0, 1)", self.front_threshold));
        }
        if !(self.output_interval > 0.0 && self.output_interval.is_finite()) {
            return bad(format!("output_interval = {} must be positive", self.output_interval));
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return bad(format!("fit_window = {} must lie in (0, 1]", self.fit_window));
        }
        match &self.ic {
            InitialCondition::Pulse(pulse) => {
                let a = pulse.resolved_amplitude(&self.params);
                if !(a > 0.0 && a.is_finite()) {
                    return bad(format!("pulse amplitude {a} must be positive"));
                }
                if !(pulse.width > 0.0 && pulse.width.is_finite()) {
                    return bad(format!("pulse width {} must be positive", pulse.width));
                }
                let x0 = pulse.resolved_center(&self.grid);
                if x0 - 5.0 * pulse.width < self.grid.x_min || x0 + 5.0 * pulse.width > self.grid.x_max {
                    return bad(format!(
                        "pulse at {x0} with width {} is not well inside [{}, {}]",
                        pulse.width, self.grid.x_min, self.grid.x_max
                    ));
                }
            }
            InitialCondition::Custom(u) => {
                if u.grid() != self.grid {
                    return Err(ModelError::GridMismatch.into());
                }
                if !u.is_nonnegative(0.0) {
                    return bad("custom initial state has negative entries".into());
                }
            }
        }
        self.resolved_dt().map(|_| ())
    }

    /// The step actually taken: at most the requested (or automatic) step and
    /// dividing t_end into a whole number of steps.
    pub fn resolved_dt(&self) -> Result<f64, SimError> {
        let bound = self.stability_bound();
        let target = match self.dt {
            TimeStep::Auto => bound,
            TimeStep::Fixed(dt) => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(SimError::InvalidConfig(format!("dt = {dt} must be positive")));
                }
                if dt > bound {
                    return Err(SimError::StabilityViolated { dt, bound });
                }
                dt
            }
        };
        let steps = (self.t_end / target).ceil().max(1.0);
        Ok(self.t_end / steps)
    }

    pub fn initial_state(&self) -> Result<Profile, SimError> {
        match &self.ic {
            InitialCondition::Custom(u) => Ok(u.clone()),
            InitialCondition::Pulse(pulse) => {
                let g = self.grid;
                let a = pulse.resolved_amplitude(&self.params);
                let x0 = pulse.resolved_center(&g);
                let w = pulse.width;
                let i: Vec<f64> = g.points().iter().map(|x| a * (-((x - x0) / w).powi(2)).exp()).collect();
                let s: Vec<f64> = i.iter().map(|v| self.params.s_minus_inf - v).collect();
                Ok(state_from_vecs(&g, s, i, vec![0.0; g.n])?)
            }
        }
    }
}

fn state_from_vecs(g: &Grid, s: Vec<f64>, i: Vec<f64>, r: Vec<f64>) -> Result<Profile, ModelError> {
    let f = |v| GridFunction::new(*g, v, Tail::Constant, Tail::Constant);
    Profile::new(f(s)?, f(i)?, f(r)?)
}

/// Work buffers for RK4 on the semi-discrete system.
struct Stepper {
    p: ModelParams,
    n: usize,
    inv_dx2: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(p: ModelParams, grid: &Grid) -> Self {
        let n = grid.n;
        let z = || vec![0.0; 3 * n];
        Self {
            p,
            n,
            inv_dx2: 1.0 / (grid.dx * grid.dx),
            k: [z(), z(), z(), z()],
            tmp: z(),
        }
    }

    /// Right-hand side on the packed state [S | I | R] with mirror ghosts.
    fn rhs(p: &ModelParams, n: usize, inv_dx2: f64, u: &[f64], out: &mut [f64]) {
        let (s, rest) = u.split_at(n);
        let (i, r) = rest.split_at(n);
        let (os, orest) = out.split_at_mut(n);
        let (oi, or) = orest.split_at_mut(n);
        let lap = |v: &[f64], k: usize| -> f64 {
            let left = if k == 0 { v[1] } else { v[k - 1] };
            let right = if k == n - 1 { v[n - 2] } else { v[k + 1] };
            (left - 2.0 * v[k] + right) * inv_dx2
        };
        let removal = p.gamma + p.delta;
        for k in 0..n {
            let inc = incidence(s[k], i[k], r[k], p.beta, INCIDENCE_GUARD);
            os[k] = p.d1 * lap(s, k) - inc;
            oi[k] = p.d2 * lap(i, k) + inc - removal * i[k];
            or[k] = p.d3 * lap(r, k) + p.gamma * i[k];
        }
    }

    /// One RK4 step in place; returns the clipped (negative) mass.
    fn step(&mut self, u: &mut [f64], dt: f64, dx: f64) -> f64 {
        let (p, n, c) = (self.p, self.n, self.inv_dx2);
        Self::rhs(&p, n, c, u, &mut self.k[0]);
        for stage in 1..4 {
            let h = if stage == 3 { dt } else { 0.5 * dt };
            let (prev, next) = self.k.split_at_mut(stage);
            for (t, (x, k)) in self.tmp.iter_mut().zip(u.iter().zip(&prev[stage - 1])) {
                *t = x + h * k;
            }
            Self::rhs(&p, n, c, &self.tmp, &mut next[0]);
        }
        let mut clipped = 0.0;
        for (j, x) in u.iter_mut().enumerate() {
            *x += dt / 6.0 * (self.k[0][j] + 2.0 * self.k[1][j] + 2.0 * self.k[2][j] + self.k[3][j]);
            if *x < 0.0 {
                let k = j % n;
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                clipped -= w * dx * *x;
                *x = 0.0;
            }
        }
        clipped
    }
}

fn pack(u: &Profile) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * u.grid().n);
    for c in u.components() {
        v.extend_from_slice(&c.values);
    }
    v
}

fn unpack(g: &Grid, v: &[f64]) -> Result<Profile, ModelError> {
    let n = g.n;
    state_from_vecs(g, v[..n].to_vec(), v[n..2 * n].to_vec(), v[2 * n..].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: Profile,
    pub clipped_mass: f64,
}

/// A single explicit RK4 step with the configured dt.
pub fn step(state: &Profile, cfg: &SimConfig) -> Result<StepOutput, SimError> {
    let dt = cfg.resolved_dt()?;
    let g = state.grid();
    let mut v = pack(state);
    let mut st = Stepper::new(cfg.params, &g);
    let clipped_mass = st.step(&mut v, dt, g.dx);
    Ok(StepOutput {
        state: unpack(&g, &v)?,
        clipped_mass,
    })
}

/// Rightmost crossing of `level` by `values`, linearly interpolated between
/// the bracketing nodes. `None` when no node reaches the level.
pub fn front_position(values: &[f64], grid: &Grid, level: f64) -> Option<f64> {
    let k = values.iter().rposition(|&v| v >= level)?;
    if k + 1 == values.len() {
        return Some(grid.x_max);
    }
    let (a, b) = (values[k], values[k + 1]);
    Some(grid.x(k) + grid.dx * (a - level) / (a - b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<Option<f64>>,
    /// Absolute level used for tracking.
    pub level: f64,
    pub fit_window: f64,
    pub speed_fit: Option<LinearFit>,
    /// Speed fits at the alternative levels of [`SENSITIVITY_THRESHOLDS`].
    pub sensitivity: Vec<ThresholdFit>,
}

/// Front levels (fractions of S(-inf)) tracked alongside the main one to
/// show how much the measured speed depends on the choice of level.
pub const SENSITIVITY_THRESHOLDS: [f64; 2] = [1e-3, 1e-5];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub speed_fit: Option<LinearFit>,
}

impl FrontTrace {
    /// Positions with times at or after `t_from` that are defined.
    pub fn defined_after(&self, t_from: f64) -> (Vec<f64>, Vec<f64>) {
        self.times
            .iter()
            .zip(&self.positions)
            .filter_map(|(&t, p)| p.filter(|_| t >= t_from).map(|x| (t, x)))
            .unzip()
    }

    /// Largest backward step of the front after `t_from` (0 when monotone).
    pub fn max_retreat_after(&self, t_from: f64) -> f64 {
        let (_, x) = self.defined_after(t_from);
        x.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassTrace {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub total: Vec<f64>,
    pub max_i: Vec<f64>,
    /// Cumulative clipped mass up to each sample.
    pub clipped: Vec<f64>,
}

impl MassTrace {
    /// Max over interior samples of |dN/dt + delta int I| by three-point differences
    /// of the total, relative to the initial total.
    pub fn budget_defect(&self, delta: f64) -> f64 {
        let n0 = self.total.first().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
        (1..self.times.len().saturating_sub(1))
            .map(|k| {
                // three-point derivative, second order on uneven spacing
                let (h1, h2) = (self.times[k] - self.times[k - 1], self.times[k + 1] - self.times[k]);
                let n = &self.total;
                let dndt = -h2 / (h1 * (h1 + h2)) * n[k - 1]
                    + (h2 - h1) / (h1 * h2) * n[k]
                    + h1 / (h2 * (h1 + h2)) * n[k + 1];
                (dndt + delta * self.i[k]).abs() / n0
            })
            .fold(0.0, f64::max)
    }

    /// Largest relative change of the total population over the run.
    pub fn total_drift(&self) -> f64 {
        let n0 = self.total.first().copied().unwrap_or(0.0);
        self.total.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max) / n0.abs().max(f64::MIN_POSITIVE)
    }

    /// Largest decrease of the R mass between consecutive samples (0 when nondecreasing).
    pub fn r_max_decrease(&self) -> f64 {
        self.r.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Wave,
    Extinction,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: Profile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub final_state: Profile,
    pub front: FrontTrace,
    pub mass: MassTrace,
    pub snapshots: Vec<Snapshot>,
    pub clipped_total: f64,
    /// Largest single-step clipped mass relative to the initial total.
    pub clipped_max_step_rel: f64,
    pub outcome: Outcome,
}

impl SimRun {
    pub fn initial_max_i(&self) -> f64 {
        self.mass.max_i.first().copied().unwrap_or(0.0)
    }

    pub fn final_max_i(&self) -> f64 {
        self.mass.max_i.last().copied().unwrap_or(0.0)
    }

    /// Largest increase of max_x I between consecutive samples after `t_from`.
    pub fn max_i_late_increase(&self, t_from: f64) -> f64 {
        let m = &self.mass;
        let late: Vec<f64> = m
            .times
            .iter()
            .zip(&m.max_i)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, v)| *v)
            .collect();
        late.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Largest pointwise increase of S between consecutive snapshots.
    pub fn s_max_increase(&self) -> f64 {
        self.snapshots
            .windows(2)
            .map(|w| {
                w[0].state
                    .s
                    .values
                    .iter()
                    .zip(&w[1].state.s.values)
                    .map(|(a, b)| b - a)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn classify(run_front: &FrontTrace, mass: &MassTrace, t_end: f64, fit_window: f64) -> Outcome {
    let first = mass.max_i.first().copied().unwrap_or(0.0);
    let last = mass.max_i.last().copied().unwrap_or(0.0);
    let t_from = t_end * (1.0 - fit_window);
    let late_monotone = mass
        .times
        .iter()
        .zip(mass.max_i.windows(2))
        .filter(|(t, _)| **t >= t_from)
        .all(|(_, w)| w[1] <= w[0]);
    if last <= 1e-3 * first && late_monotone {
        return Outcome::Extinction;
    }
    match run_front.speed_fit {
        Some(fit) if fit.slope > 0.0 && last >= first => Outcome::Wave,
        _ => Outcome::Undetermined,
    }
}

/// Integrate to t_end, sampling the front and the masses every output interval.
pub fn run(cfg: &SimConfig) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let g = cfg.grid;
    let dt = cfg.resolved_dt()?;
    let steps = (cfg.t_end / dt).round() as usize;
    let every = ((cfg.output_interval / dt).round() as usize).max(1);
    let level = cfg.front_threshold * cfg.params.s_minus_inf;
    let guard = g.x_max - BOUNDARY_GUARD_CELLS * g.dx;

    let init = cfg.initial_state()?;
    let mut u = pack(&init);
    let n = g.n;
    let mut stepper = Stepper::new(cfg.params, &g);
    let mut front = FrontTrace {
        times: Vec::new(),
        positions: Vec::new(),
        level,
        fit_window: cfg.fit_window,
        speed_fit: None,
        sensitivity: Vec::new(),
    };
    let alt_levels = SENSITIVITY_THRESHOLDS.map(|t| t * cfg.params.s_minus_inf);
    let mut alt_positions: [Vec<Option<f64>>; 2] = Default::default();
    let mut mass = MassTrace {
        times: Vec::new(),
        s: Vec::new(),
        i: Vec::new(),
        r: Vec::new(),
        total: Vec::new(),
        max_i: Vec::new(),
        clipped: Vec::new(),
    };
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|t| *t <= cfg.t_end).collect();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let mut clipped_total = 0.0;
    let mut clipped_max = 0.0f64;

    let mut record = |t: f64, u: &[f64], clipped_total: f64, front: &mut FrontTrace, mass: &mut MassTrace| {
        let (s, i, r) = (&u[..n], &u[n..2 * n], &u[2 * n..]);
        let ms = trapezoid(s, g.dx);
        let mi = trapezoid(i, g.dx);
        let mr = trapezoid(r, g.dx);
        mass.times.push(t);
        mass.s.push(ms);
        mass.i.push(mi);
        mass.r.push(mr);
        mass.total.push(ms + mi + mr);
        mass.max_i.push(i.iter().copied().fold(0.0, f64::max));
        mass.clipped.push(clipped_total);
        let pos = front_position(i, &g, level);
        for (trace, &l) in alt_positions.iter_mut().zip(&alt_levels) {
            trace.push(front_position(i, &g, l));
        }
        front.times.push(t);
        front.positions.push(pos);
        pos
    };

    record(0.0, &u, 0.0, &mut front, &mut mass);
    let n0 = mass.total[0].abs().max(f64::MIN_POSITIVE);
    while pending.last().is_some_and(|t| *t <= 0.0) {
        pending.pop();
        snapshots.push(Snapshot {
            time: 0.0,
            state: init.clone(),
        });
    }

    let mut hit = None;
    for step_no in 1..=steps {
        let c = stepper.step(&mut u, dt, g.dx);
        clipped_total += c;
        clipped_max = clipped_max.max(c / n0);
        let t = step_no as f64 * dt;
        while pending.last().is_some_and(|ts| *ts <= t + 0.5 * dt) {
            pending.pop();
            snapshots.push(Snapshot {
                time: t,
                state: unpack(&g, &u)?,
            });
        }
        if step_no % every == 0 || step_no == steps {
            let pos = record(t, &u, clipped_total, &mut front, &mut mass);
            if let Some(x) = pos.filter(|x| *x >= guard) {
                hit = Some((t, x));
                break;
            }
        }
    }

    let t_final = *mass.times.last().expect("at least the initial sample");
    let t_from = t_final * (1.0 - cfg.fit_window);
    let (tt, xx) = front.defined_after(t_from);
    front.speed_fit = linear_fit(&tt, &xx);
    front.sensitivity = SENSITIVITY_THRESHOLDS
        .iter()
        .zip(&alt_positions)
        .map(|(&threshold, positions)| {
            let (t, x): (Vec<f64>, Vec<f64>) = front
                .times
                .iter()
                .zip(positions)
                .filter_map(|(&t, p)| p.filter(|_| t >= t_from).map(|x| (t, x)))
                .unzip();
            ThresholdFit {
                threshold,
                speed_fit: linear_fit(&t, &x),
            }
        })
        .collect();
    let outcome = classify(&front, &mass, t_final, cfg.fit_window);
    let result = SimRun {
        dt,
        steps: (t_final / dt).round() as usize,
        t_final,
        final_state: unpack(&g, &u)?,
        front,
        mass,
        snapshots,
        clipped_total,
        clipped_max_step_rel: clipped_max,
        outcome,
    };
    match hit {
        Some((time, position)) => Err(SimError::FrontHitBoundary {
            time,
            position,
            partial: Box::new(result),
        }),
        None => Ok(result),
    }
}

/// Decay rate the leading edge of a wave with speed `c` should show: lambda0(c)
/// above the minimal speed and the double root c*/(2 d2) at or below it.
pub fn expected_edge_rate(p: &ModelParams, c: f64) -> Option<f64> {
    let cs = c_star(p)?;
    if c > cs {
        lambda0(c, p).ok().map(|r| r.lambda0)
    } else {
        Some(cs / (2.0 * p.d2))
    }
}

/// Least-squares slope of -ln I to the right of the front, over nodes with
/// I between `lo` and `hi` (absolute levels).
pub fn leading_edge_rate(i: &[f64], grid: &Grid, front: f64, lo: f64, hi: f64) -> Option<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..grid.n)
        .filter(|&k| grid.x(k) > front && i[k] >= lo && i[k] <= hi)
        .map(|k| (grid.x(k), -i[k].ln()))
        .unzip();
    linear_fit(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub measured_speed: Option<LinearFit>,
    pub expected_speed: f64,
    pub sample_times: Vec<f64>,
    /// Max over snapshot pairs of the max-norm difference after translating by
    /// the measured speed, relative to max I.
    pub max_misalignment: f64,
    pub edge_rate: Option<LinearFit>,
    pub expected_edge_rate: Option<f64>,
    pub edge_rate_rel_err: Option<f64>,
}

/// Co-moving comparison window, relative to the front: [-BEHIND, AHEAD].
const FRAME_BEHIND: f64 = 30.0;
const FRAME_AHEAD: f64 = 10.0;

/// Run `cfg` with late snapshots and check that I propagates with fixed shape.
pub fn traveling_frame_check(cfg: &SimConfig, c_expected: f64) -> Result<FrameReport, SimError> {
    let mut cfg = cfg.clone();
    let t = cfg.t_end;
    let sample_times: Vec<f64> = [0.7, 0.8, 0.9, 1.0].iter().map(|f| f * t).collect();
    cfg.snapshot_times = sample_times.clone();
    let run = run(&cfg)?;
    Ok(frame_report(&run, &cfg, c_expected))
}

fn frame_report(run: &SimRun, cfg: &SimConfig, c_expected: f64) -> FrameReport {
    let g = cfg.grid;
    let p = cfg.params;
    let speed = run.front.speed_fit;
    let snaps = &run.snapshots;
    let mut worst = f64::NAN;
    let mut edge_rate = None;
    if let (Some(fit), Some(first)) = (speed, snaps.first()) {
        let c_hat = fit.slope;
        let level = run.front.level;
        worst = 0.0;
        let splines: Vec<UniformSpline> = snaps.iter().map(|s| UniformSpline::new(g.x_min, g.dx, &s.state.i.values)).collect();
        let t0 = first.time;
        if let Some(x_f) = front_position(&first.state.i.values, &g, level) {
            let scale = first.state.i.max_abs().max(f64::MIN_POSITIVE);
            let lo = (x_f - FRAME_BEHIND).max(g.x_min);
            let hi = x_f + FRAME_AHEAD;
            let pts: Vec<f64> = g.points().into_iter().filter(|x| *x >= lo && *x <= hi).collect();
            for a in 0..snaps.len() {
                for b in a + 1..snaps.len() {
                    let (sa, sb) = (c_hat * (snaps[a].time - t0), c_hat * (snaps[b].time - t0));
                    for &x in &pts {
                        let (xa, xb) = (x + sa, x + sb);
                        if xa > g.x_max || xb > g.x_max {
                            continue;
                        }
                        let d = (splines[a].eval(xa) - splines[b].eval(xb)).abs() / scale;
                        worst = worst.max(d);
                    }
                }
            }
        }
        let last = &run.final_state.i.values;
        if let Some(x_f) = front_position(last, &g, level) {
            edge_rate = leading_edge_rate(last, &g, x_f, 1e-9 * p.s_minus_inf, 1e-5 * p.s_minus_inf);
        }
    }
    let expected = speed.and_then(|f| expected_edge_rate(&p, f.slope));
    let rel = match (edge_rate, expected) {
        (Some(fit), Some(e)) => Some((fit.slope - e).abs() / e),
        _ => None,
    };
    FrameReport {
        measured_speed: speed,
        expected_speed: c_expected,
        sample_times: snaps.iter().map(|s| s.time).collect(),
        max_misalignment: worst,
        edge_rate,
        expected_edge_rate: expected,
        edge_rate_rel_err: rel,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeededWaveReport {
    pub c: f64,
    pub measured_speed: Option<LinearFit>,
    pub rel_err: Option<f64>,
    pub fixed_point_converged: bool,
}

/// Seed the simulator with the mirrored fixed-point profile at speed `c` and
/// measure how fast it travels. The profile is computed on `[-profile_half_width,
/// profile_half_width]` with spacing equal to the simulation grid spacing; ahead
/// of it I keeps decaying at lambda0(c), behind it the far-right plateau is held.
pub fn seeded_wave_check(cfg: &SimConfig, c: f64, profile_half_width: f64) -> Result<SeededWaveReport, SimError> {
    let p = cfg.params;
    let g = cfg.grid;
    let roots = lambda0(c, &p).map_err(WaveError::from)?;
    let pg = Grid::symmetric(profile_half_width, g.dx)?;
    let opts = FixedPointOptions {
        anderson_depth: 3,
        ..Default::default()
    };
    let fp = solve_fixed_point(&p, c, &pg, &opts)?;
    let u = &fp.profile;
    let xs = g.x_min + 0.5 * g.length() / 4.0;
    let spl: Vec<UniformSpline> = u.components().iter().map(|f| UniformSpline::new(pg.x_min, pg.dx, &f.values)).collect();
    let last = pg.n - 1;
    let (mut s, mut i, mut r) = (Vec::with_capacity(g.n), Vec::with_capacity(g.n), Vec::with_capacity(g.n));
    for x in g.points() {
        // Wave coordinate: xi = xs - x, so x -> +inf is the unburnt side.
        let xi = xs - x;
        if xi < pg.x_min {
            let decay = (roots.lambda0 * (xi - pg.x_min)).exp();
            s.push(p.s_minus_inf - (p.s_minus_inf - u.s.values[0]) * decay);
            i.push(u.i.values[0] * decay);
            r.push(u.r.values[0] * decay);
        } else if xi > pg.x_max {
            s.push(u.s.values[last]);
            i.push(0.0);
            r.push(u.r.values[last]);
        } else {
            s.push(spl[0].eval(xi).max(0.0));
            i.push(spl[1].eval(xi).max(0.0));
            r.push(spl[2].eval(xi).max(0.0));
        }
    }
    let mut sim = cfg.clone();
    sim.ic = InitialCondition::Custom(state_from_vecs(&g, s, i, r)?);
    let out = run(&sim)?;
    let rel = out.front.speed_fit.map(|f| (f.slope - c).abs() / c);
    Ok(SeededWaveReport {
        c,
        measured_speed: out.front.speed_fit,
        rel_err: rel,
        fixed_point_converged: fp.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcriticalReport {
    pub c_target: f64,
    pub c_star: Option<f64>,
    pub seed_rate: f64,
    pub measured_speed: Option<LinearFit>,
    pub outcome: Outcome,
    pub initial_max_i: f64,
    pub final_max_i: f64,
    /// True when the front neither travels at c_target nor survives below c*:
    /// the measured speed is within 5% of c*, or I collapses when there is no c*.
    pub falsified: bool,
}

/// Width of the exponential part of the subcritical seed.
pub const SEED_WIDTH: f64 = 10.0;

/// Seed with a truncated front decaying at c_target/(2 d2), the decay rate
/// (real part of the complex characteristic roots) a wave of speed c_target
/// would need, and report the speed actually selected.
pub fn subcritical_falsification(cfg: &SimConfig, c_target: f64) -> Result<SubcriticalReport, SimError> {
    let p = cfg.params;
    let g = cfg.grid;
    let rate = c_target.max(0.0) / (2.0 * p.d2);
    let amp = match &cfg.ic {
        InitialCondition::Pulse(ps) => ps.resolved_amplitude(&p),
        InitialCondition::Custom(_) => 0.01 * p.s_minus_inf,
    };
    let xs = g.x_min + 0.5 * g.length() / 4.0;
    let i: Vec<f64> = g
        .points()
        .iter()
        .map(|&x| {
            let z = x - xs;
            if (-SEED_WIDTH..0.0).contains(&z) {
                amp
            } else if (0.0..=SEED_WIDTH).contains(&z) {
                amp * (-rate * z).exp()
            } else {
                0.0
            }
        })
        .collect();
    let s: Vec<f64> = i.iter().map(|v| p.s_minus_inf - v).collect();
    let mut sim = cfg.clone();
    sim.ic = InitialCondition::Custom(state_from_vecs(&g, s, i, vec![0.0; g.n])?);
    let out = run(&sim)?;
    let cs = c_star(&p);
    let falsified = match (cs, out.front.speed_fit) {
        (Some(cs), Some(fit)) if out.outcome == Outcome::Wave => (fit.slope - cs).abs() <= 0.05 * cs,
        (None, _) => out.outcome == Outcome::Extinction,
        _ => false,
    };
    Ok(SubcriticalReport {
        c_target,
        c_star: cs,
        seed_rate: rate,
        measured_speed: out.front.speed_fit,
        outcome: out.outcome,
        initial_max_i: out.initial_max_i(),
        final_max_i: out.final_max_i(),
        falsified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p: ModelParams, t_end: f64) -> SimConfig {
        SimConfig::new(p, Grid::symmetric(40.0, 0.2).unwrap(), t_end)
    }

    #[test]
    fn disease_free_state_is_stationary() {
        let p = ModelParams::reference();
        let g = Grid::symmetric(10.0, 0.1).unwrap();
        let mut cfg = SimConfig::new(p, g, 1.0);
        let u = state_from_vecs(&g, vec![p.s_minus_inf; g.n], vec![0.0; g.n], vec![0.0; g.n]).unwrap();
        cfg.ic = InitialCondition::Custom(u.clone());
        let out = step(&u, &cfg).unwrap();
        assert_eq!(out.state, u);
        assert_eq!(out.clipped_mass, 0.0);
    }

    #[test]
    fn auto_dt_respects_bound_and_divides_t_end() {
        let cfg = small(ModelParams::reference(), 3.0);
        let dt = cfg.resolved_dt().unwrap();
        assert!(dt <= cfg.stability_bound());
        let steps = cfg.t_end / dt;
        assert!((steps - steps.round()).abs() < 1e-9);
    }

    #[test]
    fn oversized_dt_is_rejected() {
        let mut cfg = small(ModelParams::reference(), 1.0);
        cfg.dt = TimeStep::Fixed(2.0 * cfg.stability_bound());
        assert!(matches!(cfg.resolved_dt(), Err(SimError::StabilityViolated { .. })));
    }

    #[test]
    fn pulse_must_sit_inside_window() {
        let mut cfg = small(ModelParams::reference(), 1.0);
        cfg.ic = InitialCondition::Pulse(PulseSpec {
            center: Some(39.0),
            ..Default::default()
        });
        assert!(matches!(cfg.validate(), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn front_position_interpolates() {
        let g = Grid::new(-1.0, 1.0, 5).unwrap();
        let v = [1.0, 1.0, 0.5, 0.1, 0.0];
        // crossing of 0.3 between x=0 (0.5) and x=0.5 (0.1)
        let x = front_position(&v, &g, 0.3).unwrap();
        assert!((x - 0.25).abs() < 1e-15);
        assert_eq!(front_position(&v, &g, 2.0), None);
    }

    #[test]
    fn mass_conserved_without_deaths() {
        let mut p = ModelParams::reference();
        p.delta = 0.0;
        let out = run(&small(p, 5.0)).unwrap();
        assert!(out.mass.total_drift() < 1e-10, "{}", out.mass.total_drift());
    }

    #[test]
    fn mass_budget_with_deaths() {
        // The central difference of the total is second order in the sample spacing.
        let defect = |h: f64| {
            let mut cfg = small(ModelParams::reference(), 5.0);
            cfg.output_interval = h;
            let out = run(&cfg).unwrap();
            assert!(out.mass.r_max_decrease() <= 0.0);
            out.mass.budget_defect(0.5)
        };
        let (coarse, fine) = (defect(0.05), defect(0.025));
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
        assert!(fine < 1e-4, "{fine}");
    }

    #[test]
    fn front_hitting_the_boundary_is_reported() {
        let p = ModelParams::reference();
        let mut cfg = SimConfig::new(p, Grid::symmetric(20.0, 0.2).unwrap(), 40.0);
        cfg.ic = InitialCondition::Pulse(PulseSpec {
            center: Some(-10.0),
            ..Default::default()
        });
        match run(&cfg) {
            Err(SimError::FrontHitBoundary { partial, position, .. }) => {
                assert!(position >= 20.0 - 10.0 * 0.2);
                assert!(partial.t_final < 40.0);
            }
            other => panic!("expected boundary hit, got {other:?}"),
        }
    }

    #[test]
    fn edge_rate_expectation() {
        let p = ModelParams::reference();
        assert_eq!(expected_edge_rate(&p, 1.5), Some(1.0));
        assert!((expected_edge_rate(&p, 2.5).unwrap() - 0.5).abs() < 1e-14);
    }
}
