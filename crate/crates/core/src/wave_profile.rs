//! Super/sub-solutions, the invariant set Gamma, the fixed-point map F and the
//! two profile solvers (projected Picard on F, Newton on the ODE boundary
//! value problem), plus the diagnostics of a converged profile.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linear_analysis::{characteristic_f, lambda0, CharRoots, LinearError};
use crate::model::{
    incidence, reaction_terms, Grid, GridFunction, ModelError, ModelParams, Profile, Tail,
    INCIDENCE_GUARD,
};
use crate::numerics::{golden_section, linear_fit, trapezoid, UniformSpline};
use crate::resolvent::{
    choose_alphas_scaled, choose_mu, delta_inverse_with_derivatives, kernel_integrals,
    weighted_norm_profile, ResolventError, ResolventSpec, WeightedNormContext,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parameters outside the wave regime (R0 = {r0}, d3 = {d3}, 2 d2 = {two_d2})")]
    NotWaveRegime { r0: f64, d3: f64, two_d2: f64 },
    #[error("no admissible epsilons: {0}")]
    InadmissibleEpsilons(String),
    #[error("no M{which} <= 1e12 satisfies its inequality")]
    SearchExhausted { which: usize },
    #[error("M{which} = {value} fails its inequality on re-check")]
    InequalityRecheck { which: usize, value: f64 },
    #[error("singular Jacobian block at node {node}")]
    SingularJacobian { node: usize },
    #[error("Newton did not converge after {steps} steps (residual {residual:e})")]
    NotConverged { steps: usize, residual: f64 },
}

/// Upper end of the M search interval.
pub const M_SEARCH_MAX: f64 = 1e12;
/// Safety factor applied to each bisection threshold.
pub const M_SAFETY: f64 = 1.1;

/// Constants of the super/sub-solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSet {
    pub c: f64,
    pub lambda0: f64,
    pub lambda0_plus: f64,
    pub eps: [f64; 3],
    pub m: [f64; 3],
    /// Crossover points x_j = -ln M_j / eps_j.
    pub x_cross: [f64; 3],
    /// c lambda0 - d3 lambda0^2.
    pub k: f64,
    pub s_minus_inf: f64,
    pub gamma: f64,
}

/// eps1 = min(lambda0, c/d1)/2, eps2 = min(eps1, lambda0+ - lambda0)/2,
/// eps3 = min(eps2, c/d3 - lambda0)/2.
pub fn select_epsilons(p: &ModelParams, roots: &CharRoots) -> Result<[f64; 3], WaveError> {
    let (c, l0) = (roots.c, roots.lambda0);
    let e1 = 0.5 * l0.min(c / p.d1);
    let e2 = 0.5 * e1.min(roots.lambda0_plus - l0);
    let e3 = 0.5 * e2.min(c / p.d3 - l0);
    let ok = 0.0 < e3
        && e3 < e2
        && e2 < e1
        && e1 < l0
        && e1 < c / p.d1
        && characteristic_f(l0 + e2, c, p) > 0.0
        && c - p.d3 * (l0 + e3) > 0.0;
    if !ok {
        return Err(WaveError::InadmissibleEpsilons(format!(
            "eps = ({e1}, {e2}, {e3}) at c = {c}, lambda0 = {l0}"
        )));
    }
    Ok([e1, e2, e3])
}

/// Smallest M in [1, M_SEARCH_MAX] with `pred(M)`, by bisection on ln M.
fn smallest_m(pred: impl Fn(f64) -> bool, which: usize) -> Result<f64, WaveError> {
    if pred(1.0) {
        return Ok(1.0);
    }
    if !pred(M_SEARCH_MAX) {
        return Err(WaveError::SearchExhausted { which });
    }
    let (mut lo, mut hi) = (0.0_f64, M_SEARCH_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pred(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

struct MInequalities<'a> {
    p: &'a ModelParams,
    c: f64,
    l0: f64,
    eps: [f64; 3],
    k: f64,
}

impl MInequalities<'_> {
    fn first(&self, m1: f64) -> bool {
        let (p, e1) = (self.p, self.eps[0]);
        m1 * e1 * (self.c - p.d1 * e1) * p.s_minus_inf >= p.beta * m1.powf(-(self.l0 - e1) / e1)
    }

    fn second(&self, m1: f64, m2: f64) -> bool {
        let (p, [e1, e2, _]) = (self.p, self.eps);
        if m2 <= m1.powf(e2 / e1) {
            return false;
        }
        let f = characteristic_f(self.l0 + e2, self.c, p);
        let lhs = m2 * f * p.s_minus_inf * (1.0 - m1 * m2.powf(-e1 / e2));
        lhs >= p.beta * (p.gamma + self.k) / self.k * m2.powf(-(self.l0 - e2) / e2)
    }

    fn third(&self, m2: f64, m3: f64) -> bool {
        let (p, [_, e2, e3]) = (self.p, self.eps);
        let l = self.l0 + e3;
        (self.c * l - p.d3 * l * l) / self.k * m3 >= m2 * m3.powf(-(e2 - e3) / e3)
    }
}

/// Each M_j is 1.1 times the bisection threshold of its inequality; M2 also
/// keeps x2 < x1.
pub fn select_ms(p: &ModelParams, roots: &CharRoots, eps: [f64; 3]) -> Result<[f64; 3], WaveError> {
    let l0 = roots.lambda0;
    let k = roots.c * l0 - p.d3 * l0 * l0;
    let ineq = MInequalities {
        p,
        c: roots.c,
        l0,
        eps,
        k,
    };
    let m1 = M_SAFETY * smallest_m(|m| ineq.first(m), 1)?;
    let m2 = M_SAFETY * smallest_m(|m| ineq.second(m1, m), 2)?;
    let m3 = M_SAFETY * smallest_m(|m| ineq.third(m2, m), 3)?;
    for (which, ok, value) in [
        (1, ineq.first(m1), m1),
        (2, ineq.second(m1, m2), m2),
        (3, ineq.third(m2, m3), m3),
    ] {
        if !ok {
            return Err(WaveError::InequalityRecheck { which, value });
        }
    }
    Ok([m1, m2, m3])
}

impl BoundSet {
    pub fn new(p: &ModelParams, roots: &CharRoots) -> Result<Self, WaveError> {
        let eps = select_epsilons(p, roots)?;
        let m = select_ms(p, roots, eps)?;
        Ok(Self::from_constants(p, roots, eps, m))
    }

    /// Assemble a bound set from explicit constants (no admissibility checks).
    pub fn from_constants(p: &ModelParams, roots: &CharRoots, eps: [f64; 3], m: [f64; 3]) -> Self {
        let l0 = roots.lambda0;
        Self {
            c: roots.c,
            lambda0: l0,
            lambda0_plus: roots.lambda0_plus,
            eps,
            m,
            x_cross: [0, 1, 2].map(|j| -m[j].ln() / eps[j]),
            k: roots.c * l0 - p.d3 * l0 * l0,
            s_minus_inf: p.s_minus_inf,
            gamma: p.gamma,
        }
    }

    pub fn s_plus(&self, _x: f64) -> f64 {
        self.s_minus_inf
    }

    pub fn s_minus(&self, x: f64) -> f64 {
        (self.s_minus_inf * (1.0 - self.m[0] * (self.eps[0] * x).exp())).max(0.0)
    }

    pub fn i_plus(&self, x: f64) -> f64 {
        (self.lambda0 * x).exp()
    }

    pub fn i_minus(&self, x: f64) -> f64 {
        ((self.lambda0 * x).exp() * (1.0 - self.m[1] * (self.eps[1] * x).exp())).max(0.0)
    }

    pub fn r_plus(&self, x: f64) -> f64 {
        self.gamma / self.k * (self.lambda0 * x).exp()
    }

    pub fn r_minus(&self, x: f64) -> f64 {
        (self.r_plus(x) * (1.0 - self.m[2] * (self.eps[2] * x).exp())).max(0.0)
    }
}

/// Super- and sub-solution profiles on `grid`.
pub fn eval_bounds(b: &BoundSet, grid: &Grid) -> (Profile, Profile) {
    let l0 = b.lambda0;
    let exp_tails = (Tail::ExpGrowth(l0), Tail::ExpGrowth(l0));
    let sup = Profile {
        s: GridFunction::from_fn(*grid, Tail::Constant, Tail::Constant, |x| b.s_plus(x)),
        i: GridFunction::from_fn(*grid, exp_tails.0, exp_tails.1, |x| b.i_plus(x)),
        r: GridFunction::from_fn(*grid, exp_tails.0, exp_tails.1, |x| b.r_plus(x)),
    };
    let sub = Profile {
        s: GridFunction::from_fn(*grid, Tail::Constant, Tail::Zero, |x| b.s_minus(x)),
        i: GridFunction::from_fn(*grid, Tail::ExpGrowth(l0), Tail::Zero, |x| b.i_minus(x)),
        r: GridFunction::from_fn(*grid, Tail::ExpGrowth(l0), Tail::Zero, |x| b.r_minus(x)),
    };
    (sup, sub)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubInequalityReport {
    /// Worst (smallest) margin of the S, I and R inequalities.
    pub worst_margin: [f64; 3],
    pub worst_x: [f64; 3],
    pub points_checked: [usize; 3],
}

impl SubInequalityReport {
    pub fn min_margin(&self) -> f64 {
        self.worst_margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Pointwise check of the three sub-solution differential inequalities on
/// the grid points strictly left of each crossover, with exact derivatives.
pub fn verify_sub_inequalities(b: &BoundSet, p: &ModelParams, grid: &Grid) -> SubInequalityReport {
    let (c, l0) = (b.c, b.lambda0);
    let [e1, e2, e3] = b.eps;
    let [m1, m2, m3] = b.m;
    let mut worst = [f64::INFINITY; 3];
    let mut worst_x = [f64::NAN; 3];
    let mut checked = [0usize; 3];
    let mut record = |j: usize, x: f64, margin: f64| {
        checked[j] += 1;
        if margin < worst[j] {
            worst[j] = margin;
            worst_x[j] = x;
        }
    };
    for k in 0..grid.n {
        let x = grid.x(k);
        let (el, e_1, e_2, e_3) = ((l0 * x).exp(), (e1 * x).exp(), (e2 * x).exp(), (e3 * x).exp());
        if x < b.x_cross[0] {
            // S_- = S(1 - M1 e^{e1 x}):  -d1 S'' + c S' = -S M1 e1 (c - d1 e1) e^{e1 x}.
            let lhs = -p.beta * b.i_plus(x);
            let rhs = -b.s_minus_inf * m1 * e1 * (c - p.d1 * e1) * e_1;
            record(0, x, lhs - rhs);
        }
        if x < b.x_cross[1] {
            let im = el * (1.0 - m2 * e_2);
            let s = b.s_minus(x);
            let lhs = p.beta * s * im / (s + b.i_plus(x) + b.r_plus(x)) - (p.gamma + p.delta) * im;
            let sym = |l: f64| -p.d2 * l * l + c * l;
            let rhs = sym(l0) * el - m2 * sym(l0 + e2) * el * e_2;
            record(1, x, lhs - rhs);
        }
        if x < b.x_cross[2] {
            let im = el * (1.0 - m2 * e_2);
            let sym = |l: f64| -p.d3 * l * l + c * l;
            let rhs = b.gamma / b.k * (sym(l0) * el - m3 * sym(l0 + e3) * el * e_3);
            record(2, x, p.gamma * im.max(0.0) - rhs);
        }
    }
    SubInequalityReport {
        worst_margin: worst,
        worst_x,
        points_checked: checked,
    }
}

/// Pointwise excess of a profile over Gamma's envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaExcess {
    /// Largest amount by which each component exceeds its super-solution.
    pub above: [f64; 3],
    /// Largest amount by which each component falls below its sub-solution.
    pub below: [f64; 3],
}

impl GammaExcess {
    pub fn worst(&self) -> f64 {
        self.above
            .iter()
            .chain(&self.below)
            .copied()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampStats {
    /// Grid points where some component moved by more than the slack.
    pub points_beyond_slack: usize,
    pub fraction: f64,
    pub max_excursion: f64,
}

/// The convex set of profiles between the sub- and super-solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub bounds: BoundSet,
    pub sup: Profile,
    pub sub: Profile,
}

impl GammaSet {
    pub fn new(bounds: BoundSet, grid: &Grid) -> Self {
        let (sup, sub) = eval_bounds(&bounds, grid);
        Self { bounds, sup, sub }
    }

    pub fn grid(&self) -> Grid {
        self.sup.grid()
    }

    pub fn excess(&self, u: &Profile) -> GammaExcess {
        let mut above = [0.0f64; 3];
        let mut below = [0.0f64; 3];
        for (j, ((v, hi), lo)) in u
            .components()
            .iter()
            .zip(self.sup.components())
            .zip(self.sub.components())
            .enumerate()
        {
            for k in 0..v.values.len() {
                above[j] = above[j].max(v.values[k] - hi.values[k]);
                below[j] = below[j].max(lo.values[k] - v.values[k]);
            }
        }
        GammaExcess { above, below }
    }

    pub fn contains(&self, u: &Profile, slack: f64) -> bool {
        self.excess(u).worst() <= slack
    }

    /// Componentwise projection onto Gamma.
    pub fn clamp(&self, u: &mut Profile, slack: f64) -> ClampStats {
        let n = u.grid().n;
        let mut flagged = vec![false; n];
        let mut max_excursion = 0.0f64;
        let sup = self.sup.components();
        let sub = self.sub.components();
        for (j, v) in u.components_mut().into_iter().enumerate() {
            for k in 0..n {
                let (lo, hi) = (sub[j].values[k], sup[j].values[k]);
                let x = v.values[k];
                let y = x.clamp(lo, hi);
                let moved = (x - y).abs();
                if moved > slack {
                    flagged[k] = true;
                }
                max_excursion = max_excursion.max(moved);
                v.values[k] = y;
            }
        }
        let points_beyond_slack = flagged.iter().filter(|f| **f).count();
        ClampStats {
            points_beyond_slack,
            fraction: points_beyond_slack as f64 / n as f64,
            max_excursion,
        }
    }

    /// Geometric midpoint of the envelopes where the sub-solution is positive,
    /// arithmetic midpoint elsewhere.
    pub fn midpoint(&self) -> Profile {
        let mut out = self.sup.clone();
        let sub = self.sub.components();
        let sup = self.sup.components();
        for (j, v) in out.components_mut().into_iter().enumerate() {
            for k in 0..v.values.len() {
                let (lo, hi) = (sub[j].values[k], sup[j].values[k]);
                v.values[k] = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            }
        }
        out
    }

    /// Random member: independent convex weights per point and component.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Profile {
        let mut out = self.sup.clone();
        let sub = self.sub.components();
        let sup = self.sup.components();
        for (j, v) in out.components_mut().into_iter().enumerate() {
            for k in 0..v.values.len() {
                let t: f64 = rng.random();
                let (lo, hi) = (sub[j].values[k], sup[j].values[k]);
                v.values[k] = lo + t * (hi - lo);
            }
        }
        out
    }
}

/// Decay rate kappa > 0 of I ahead of the wave, from the linearisation at the
/// right end of `u`; `None` if I would not decay there.
pub fn right_decay_rate(u: &Profile, p: &ModelParams, c: f64) -> Option<f64> {
    let n = u.grid().n;
    let (s, i, r) = (u.s.values[n - 1], u.i.values[n - 1], u.r.values[n - 1]);
    let total = s + i + r;
    if total <= INCIDENCE_GUARD {
        return None;
    }
    let a = p.beta * s / total - p.gamma - p.delta;
    if a >= 0.0 {
        return None;
    }
    let disc = c * c - 4.0 * p.d2 * a;
    // Positive root of d2 k^2 + c k + a = 0, written without cancellation.
    Some(-2.0 * a / (c + disc.sqrt()))
}

/// Image of F together with the kernel derivatives of each component.
#[derive(Debug, Clone)]
pub struct FImage {
    pub value: Profile,
    pub first: [Vec<f64>; 3],
    pub second: [Vec<f64>; 3],
}

/// The fixed-point map F = (F1, F2, F3).
#[derive(Debug, Clone)]
pub struct FMap {
    pub params: ModelParams,
    pub roots: CharRoots,
    pub specs: [ResolventSpec; 3],
    flip_f2: bool,
}

impl FMap {
    pub fn new(params: ModelParams, roots: CharRoots, specs: [ResolventSpec; 3]) -> Self {
        Self {
            params,
            roots,
            specs,
            flip_f2: false,
        }
    }

    /// Deliberately broken variant used to check that the verification suite
    /// notices a sign error in the incidence term of F2.
    #[doc(hidden)]
    pub fn with_flipped_f2_sign(mut self) -> Self {
        self.flip_f2 = true;
        self
    }

    pub fn c(&self) -> f64 {
        self.roots.c
    }

    pub fn apply(&self, u: &Profile) -> Result<Profile, WaveError> {
        Ok(self.apply_full(u)?.value)
    }

    /// F(u). F1 is evaluated as S(-inf) - Delta_1^{-1}[alpha_1 (S(-inf) - S) + inc],
    /// which equals Delta_1^{-1}[alpha_1 S - inc] on the line because
    /// Delta_1^{-1} maps the constant alpha_1 S(-inf) to S(-inf); the deficit
    /// form keeps the far-left level pinned on a finite window.
    pub fn apply_full(&self, u: &Profile) -> Result<FImage, WaveError> {
        let p = &self.params;
        let grid = u.grid();
        let n = grid.n;
        let l0 = self.roots.lambda0;
        let [a1, a2, a3] = self.specs.map(|s| s.alpha);
        let sign = if self.flip_f2 { -1.0 } else { 1.0 };
        let mut deficit = Vec::with_capacity(n);
        let mut h2 = Vec::with_capacity(n);
        let mut h3 = Vec::with_capacity(n);
        for k in 0..n {
            let (s, i, r) = (u.s.values[k], u.i.values[k], u.r.values[k]);
            let inc = incidence(s, i, r, p.beta, INCIDENCE_GUARD);
            deficit.push(a1 * (p.s_minus_inf - s) + inc);
            h2.push(a2 * i + sign * inc - (p.gamma + p.delta) * i);
            h3.push(a3 * r + p.gamma * i);
        }
        let i_right = match right_decay_rate(u, p, self.c()) {
            Some(kappa) => Tail::ExpGrowth(-kappa),
            None => Tail::Zero,
        };
        let left = Tail::ExpGrowth(l0);
        let hs = [
            GridFunction::new(grid, deficit, left, Tail::Constant)?,
            GridFunction::new(grid, h2, left, i_right)?,
            GridFunction::new(grid, h3, left, Tail::Constant)?,
        ];
        let mut comps = Vec::with_capacity(3);
        let mut first = Vec::with_capacity(3);
        let mut second = Vec::with_capacity(3);
        for (j, h) in hs.iter().enumerate() {
            let [mut v, mut d1, mut d2] = delta_inverse_with_derivatives(h, &self.specs[j])?;
            if j == 0 {
                for x in v.values.iter_mut() {
                    *x = p.s_minus_inf - *x;
                }
                d1.values.iter_mut().for_each(|x| *x = -*x);
                d2.values.iter_mut().for_each(|x| *x = -*x);
            }
            comps.push(v);
            first.push(d1.values);
            second.push(d2.values);
        }
        let mut comps = comps.into_iter();
        let mut s = comps.next().expect("three components");
        let mut i = comps.next().expect("three components");
        let mut r = comps.next().expect("three components");
        s.left_tail = Tail::Constant;
        s.right_tail = Tail::Constant;
        i.left_tail = left;
        i.right_tail = i_right;
        r.left_tail = left;
        r.right_tail = Tail::Constant;
        let mut first = first.into_iter();
        let mut second = second.into_iter();
        let take3 = |it: &mut std::vec::IntoIter<Vec<f64>>| {
            [
                it.next().expect("three"),
                it.next().expect("three"),
                it.next().expect("three"),
            ]
        };
        Ok(FImage {
            value: Profile { s, i, r },
            first: take3(&mut first),
            second: take3(&mut second),
        })
    }
}

/// Max-norm residual of the traveling-wave ODEs -d v'' + c v' = reaction(v),
/// using the exact kernel derivatives of an F image.
pub fn ode_residual_of_image(img: &FImage, p: &ModelParams, c: f64) -> f64 {
    let v = &img.value;
    let d = [p.d1, p.d2, p.d3];
    let mut worst = 0.0f64;
    for k in 0..v.grid().n {
        let react = reaction_terms(v.s.values[k], v.i.values[k], v.r.values[k], p);
        let react = [react.0, react.1, react.2];
        for j in 0..3 {
            let res = -d[j] * img.second[j][k] + c * img.first[j][k] - react[j];
            worst = worst.max(res.abs());
        }
    }
    worst
}

/// Max-norm residual of the ODEs on interior nodes with centered differences.
pub fn ode_residual_fd(u: &Profile, p: &ModelParams, c: f64) -> f64 {
    let g = u.grid();
    let dx = g.dx;
    let d = [p.d1, p.d2, p.d3];
    let comps = u.components();
    let mut worst = 0.0f64;
    for k in 1..g.n - 1 {
        let react = reaction_terms(u.s.values[k], u.i.values[k], u.r.values[k], p);
        let react = [react.0, react.1, react.2];
        for j in 0..3 {
            let v = &comps[j].values;
            let d2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (dx * dx);
            let d1 = (v[k + 1] - v[k - 1]) / (2.0 * dx);
            worst = worst.max((-d[j] * d2 + c * d1 - react[j]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    /// Bound on the weighted residual |F(u) - u|_mu; the kernel ODE residual
    /// must also fall below 10 tol.
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson mixing depth; 0 is plain projected Picard.
    pub anderson_depth: usize,
    /// Multiplier on the alpha floors.
    pub alpha_floor_factor: f64,
    /// Largest admissible share of clamped points at the final step.
    pub clamp_budget: f64,
    /// Projection moves smaller than this are rounding, not clamping.
    pub clamp_slack: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            anderson_depth: 0,
            alpha_floor_factor: 1.0,
            clamp_budget: 0.01,
            clamp_slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    #[serde(skip)]
    pub profile: Profile,
    pub iterations: usize,
    /// Weighted norm of F(u) - u at the final iterate.
    pub residual: f64,
    /// Max norm of F(u) - u at the final iterate.
    pub max_residual: f64,
    /// ODE residual of F(u) from the kernel derivatives.
    pub ode_residual: f64,
    pub clamp: ClampStats,
    pub clamp_fraction: f64,
    /// Tail-corrected estimate of S(+inf).
    pub s_inf: f64,
    /// Mean of S over the rightmost 10% of the window.
    pub s_inf_plateau: f64,
    pub converged: bool,
    pub bounds: BoundSet,
    pub alphas: [f64; 3],
    pub mu: f64,
    pub warnings: Vec<String>,
}

/// Everything needed to run F on one grid.
#[derive(Debug, Clone)]
pub struct WaveSetup {
    pub params: ModelParams,
    pub roots: CharRoots,
    pub specs: [ResolventSpec; 3],
    pub norm: WeightedNormContext,
    pub gamma: GammaSet,
}

impl WaveSetup {
    pub fn new(p: &ModelParams, c: f64, grid: &Grid, alpha_floor_factor: f64) -> Result<Self, WaveError> {
        p.validate()?;
        if !p.wave_regime() {
            return Err(WaveError::NotWaveRegime {
                r0: p.r_naught(),
                d3: p.d3,
                two_d2: 2.0 * p.d2,
            });
        }
        let roots = lambda0(c, p)?;
        let bounds = BoundSet::new(p, &roots)?;
        let specs = choose_alphas_scaled(p, &roots, alpha_floor_factor)?;
        let norm = choose_mu(&specs, roots.lambda0)?;
        Ok(Self {
            params: *p,
            roots,
            specs,
            norm,
            gamma: GammaSet::new(bounds, grid),
        })
    }

    pub fn f_map(&self) -> FMap {
        FMap::new(self.params, self.roots, self.specs)
    }
}

fn flatten(u: &Profile) -> Vec<f64> {
    u.components().iter().flat_map(|c| c.values.iter().copied()).collect()
}

fn unflatten(into: &mut Profile, flat: &[f64]) {
    let n = into.grid().n;
    for (j, c) in into.components_mut().into_iter().enumerate() {
        c.values.copy_from_slice(&flat[j * n..(j + 1) * n]);
    }
}

/// Anderson mixing on the projected map G = clamp o F.
struct Anderson {
    depth: usize,
    iterates: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            iterates: Vec::new(),
            residuals: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.iterates.clear();
        self.residuals.clear();
    }

    /// Next iterate from the current `u` and `g = G(u)`.
    fn step(&mut self, u: &[f64], g: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = g.iter().zip(u).map(|(a, b)| a - b).collect();
        self.iterates.push(u.to_vec());
        self.residuals.push(f.clone());
        if self.iterates.len() > self.depth + 1 {
            self.iterates.remove(0);
            self.residuals.remove(0);
        }
        let m = self.iterates.len() - 1;
        if m == 0 {
            return g.to_vec();
        }
        let len = u.len();
        let mut df = DMatrix::zeros(len, m);
        let mut dg = DMatrix::zeros(len, m);
        for j in 0..m {
            for k in 0..len {
                let (f0, f1) = (self.residuals[j][k], self.residuals[j + 1][k]);
                let (x0, x1) = (self.iterates[j][k], self.iterates[j + 1][k]);
                df[(k, j)] = f1 - f0;
                dg[(k, j)] = (x1 + f1) - (x0 + f0);
            }
        }
        let rhs = DVector::from_vec(f);
        let svd = df.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let Ok(coef) = svd.solve(&rhs, cutoff) else {
            self.reset();
            return g.to_vec();
        };
        let correction = dg * coef;
        g.iter().zip(correction.iter()).map(|(a, b)| a - b).collect()
    }
}

/// Tail-corrected S(+inf): integrates the S equation from x_max to infinity
/// assuming the incidence decays like exp(-kappa x) there.
pub fn tail_corrected_s_inf(u: &Profile, p: &ModelParams, c: f64) -> f64 {
    let n = u.grid().n;
    let dx = u.grid().dx;
    let s = &u.s.values;
    let ds = (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * dx);
    let inc = incidence(s[n - 1], u.i.values[n - 1], u.r.values[n - 1], p.beta, INCIDENCE_GUARD);
    let tail = match right_decay_rate(u, p, c) {
        Some(kappa) => inc / kappa,
        None => 0.0,
    };
    s[n - 1] - p.d1 * ds / c - tail / c
}

/// Mean of S over the rightmost 10% of the window.
pub fn plateau_s_inf(u: &Profile) -> f64 {
    let n = u.grid().n;
    let start = n - (n / 10).max(1);
    let tail = &u.s.values[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Smallest half-width, at least `min_half_width`, for which the left
/// truncation exp(-lambda0 L) stays below 1e-10. Rounded up to a multiple of 10.
pub fn recommended_half_width(lambda0: f64, min_half_width: f64) -> f64 {
    let need = 10f64.ln() * 10.0 / lambda0;
    (need.max(min_half_width) / 10.0).ceil() * 10.0
}

fn window_warnings(u: &Profile, roots: &CharRoots) -> Vec<String> {
    let g = u.grid();
    let mut w = Vec::new();
    let left = (roots.lambda0 * g.x_min).exp();
    if left >= 1e-10 {
        w.push(format!(
            "left truncation: exp(lambda0 x_min) = {left:e} >= 1e-10; widen the window"
        ));
    }
    let total = trapezoid(&u.i.values, g.dx);
    if total > 0.0 {
        let mut acc = 0.0;
        let mut reached = None;
        for k in 1..g.n {
            acc += 0.5 * (u.i.values[k] + u.i.values[k - 1]) * g.dx;
            if acc >= 0.999 * total {
                reached = Some(g.x(k));
                break;
            }
        }
        if reached.is_none_or(|x| x >= g.x_max) {
            w.push("right truncation: 99.9% of the infected mass is not inside the window".into());
        }
    }
    w
}

/// Projected Picard iteration u <- clamp_Gamma(F(u)), optionally with
/// Anderson mixing, from the midpoint of Gamma.
pub fn solve_fixed_point(
    p: &ModelParams,
    c: f64,
    grid: &Grid,
    opts: &FixedPointOptions,
) -> Result<FixedPointReport, WaveError> {
    let setup = WaveSetup::new(p, c, grid, opts.alpha_floor_factor)?;
    solve_fixed_point_with(&setup, &setup.f_map(), opts)
}

/// As [`solve_fixed_point`] with an explicit setup and map.
pub fn solve_fixed_point_with(
    setup: &WaveSetup,
    f: &FMap,
    opts: &FixedPointOptions,
) -> Result<FixedPointReport, WaveError> {
    let p = &setup.params;
    let c = setup.roots.c;
    let gamma = &setup.gamma;
    let mut u = gamma.midpoint();
    let mut anderson = (opts.anderson_depth > 0).then(|| Anderson::new(opts.anderson_depth));
    let mut iterations = 0;
    let mut last_res = f64::INFINITY;
    loop {
        let img = f.apply_full(&u)?;
        let mut diff = img.value.clone();
        for (dst, src) in diff.components_mut().into_iter().zip(u.components()) {
            for (a, b) in dst.values.iter_mut().zip(&src.values) {
                *a -= b;
            }
        }
        let residual = weighted_norm_profile(&diff, &setup.norm);
        let max_residual = diff
            .components()
            .iter()
            .map(|c| c.max_abs())
            .fold(0.0, f64::max);
        let mut g = img.value.clone();
        let clamp = gamma.clamp(&mut g, opts.clamp_slack);
        let done = residual <= opts.tol && {
            let ode = ode_residual_of_image(&img, p, c);
            ode <= 10.0 * opts.tol
        };
        if done || iterations >= opts.max_iter {
            let ode_residual = ode_residual_of_image(&img, p, c);
            let converged = residual <= opts.tol
                && ode_residual <= 10.0 * opts.tol
                && clamp.fraction <= opts.clamp_budget;
            let warnings = window_warnings(&g, &setup.roots);
            return Ok(FixedPointReport {
                s_inf: tail_corrected_s_inf(&g, p, c),
                s_inf_plateau: plateau_s_inf(&g),
                profile: g,
                iterations,
                residual,
                max_residual,
                ode_residual,
                clamp_fraction: clamp.fraction,
                clamp,
                converged,
                bounds: gamma.bounds,
                alphas: setup.specs.map(|s| s.alpha),
                mu: setup.norm.mu,
                warnings,
            });
        }
        iterations += 1;
        match anderson.as_mut() {
            None => u = g,
            Some(acc) => {
                if max_residual > 1e3 * last_res {
                    acc.reset();
                }
                let next = acc.step(&flatten(&u), &flatten(&g));
                let mut mixed = g;
                unflatten(&mut mixed, &next);
                gamma.clamp(&mut mixed, f64::INFINITY);
                u = mixed;
            }
        }
        last_res = last_res.min(max_residual);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub max_steps: usize,
    /// Stop once the max-norm Newton update falls below this.
    pub step_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_steps: 50,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    #[serde(skip)]
    pub profile: Profile,
    pub steps: usize,
    pub max_update: f64,
    /// Max-norm residual of the discrete system (interior plus boundary rows).
    pub residual: f64,
}

/// Left boundary values from the leading-order asymptotics at x -> -inf.
pub fn left_asymptotic_values(p: &ModelParams, roots: &CharRoots, x: f64) -> Option<[f64; 3]> {
    let (c, l0) = (roots.c, roots.lambda0);
    let k = c * l0 - p.d3 * l0 * l0;
    let denom = l0 * (c - p.d1 * l0);
    if !(k > 0.0 && denom > 0.0) {
        return None;
    }
    let e = (l0 * x).exp();
    Some([p.s_minus_inf - p.beta * e / denom, e, p.gamma / k * e])
}

struct BvpSystem<'a> {
    p: &'a ModelParams,
    c: f64,
    dx: f64,
    left: [f64; 3],
}

impl BvpSystem<'_> {
    fn diffusion(&self) -> [f64; 3] {
        [self.p.d1, self.p.d2, self.p.d3]
    }

    fn kappa(&self, u: &[Vector3<f64>]) -> f64 {
        let last = u[u.len() - 1];
        let total = last.x + last.y + last.z;
        if total <= INCIDENCE_GUARD {
            return 0.0;
        }
        let a = self.p.beta * last.x / total - self.p.gamma - self.p.delta;
        if a >= 0.0 {
            return 0.0;
        }
        -2.0 * a / (self.c + (self.c * self.c - 4.0 * self.p.d2 * a).sqrt())
    }

    fn source(&self, v: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let p = self.p;
        let (s, i, r) = (v.x, v.y, v.z);
        let n = s + i + r;
        let (inc, js, ji, jr) = if n > INCIDENCE_GUARD {
            let n2 = n * n;
            (
                p.beta * s * i / n,
                p.beta * i * (i + r) / n2,
                p.beta * s * (s + r) / n2,
                -p.beta * s * i / n2,
            )
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        let g = p.gamma + p.delta;
        let src = Vector3::new(-inc, inc - g * i, p.gamma * i);
        let jac = Matrix3::new(-js, -ji, -jr, js, ji - g, jr, 0.0, p.gamma, 0.0);
        (src, jac)
    }

    fn residual(&self, u: &[Vector3<f64>], kappa: f64) -> Vec<Vector3<f64>> {
        let n = u.len();
        let d = self.diffusion();
        let (dx, c) = (self.dx, self.c);
        let kap = [0.0, kappa, 0.0];
        let mut out = vec![Vector3::zeros(); n];
        out[0] = u[0] - Vector3::from(self.left);
        for k in 1..n {
            let (src, _) = self.source(&u[k]);
            let mut row = Vector3::zeros();
            for j in 0..3 {
                let (lap, grad) = if k < n - 1 {
                    (
                        (u[k + 1][j] - 2.0 * u[k][j] + u[k - 1][j]) / (dx * dx),
                        (u[k + 1][j] - u[k - 1][j]) / (2.0 * dx),
                    )
                } else {
                    // Ghost node from v' = -kappa v.
                    (
                        (2.0 * u[k - 1][j] - 2.0 * u[k][j] - 2.0 * dx * kap[j] * u[k][j]) / (dx * dx),
                        -kap[j] * u[k][j],
                    )
                };
                row[j] = d[j] * lap - c * grad + src[j];
            }
            out[k] = row;
        }
        out
    }

    /// Newton update from the block-tridiagonal Jacobian (block Thomas).
    fn update(&self, u: &[Vector3<f64>], res: &[Vector3<f64>], kappa: f64) -> Result<Vec<Vector3<f64>>, WaveError> {
        let n = u.len();
        let d = self.diffusion();
        let (dx, c) = (self.dx, self.c);
        let kap = [0.0, kappa, 0.0];
        let mut cp: Vec<Matrix3<f64>> = Vec::with_capacity(n);
        let mut rp: Vec<Vector3<f64>> = Vec::with_capacity(n);
        cp.push(Matrix3::zeros());
        rp.push(-res[0]);
        for k in 1..n {
            let (_, jac) = self.source(&u[k]);
            let (a, b, cc) = if k < n - 1 {
                let lo = Vector3::from_fn(|j, _| d[j] / (dx * dx) + c / (2.0 * dx));
                let mid = Vector3::from_fn(|j, _| -2.0 * d[j] / (dx * dx));
                let hi = Vector3::from_fn(|j, _| d[j] / (dx * dx) - c / (2.0 * dx));
                (
                    Matrix3::from_diagonal(&lo),
                    Matrix3::from_diagonal(&mid) + jac,
                    Matrix3::from_diagonal(&hi),
                )
            } else {
                let lo = Vector3::from_fn(|j, _| 2.0 * d[j] / (dx * dx));
                let mid = Vector3::from_fn(|j, _| {
                    d[j] * (-2.0 - 2.0 * dx * kap[j]) / (dx * dx) + c * kap[j]
                });
                (
                    Matrix3::from_diagonal(&lo),
                    Matrix3::from_diagonal(&mid) + jac,
                    Matrix3::zeros(),
                )
            };
            let m = b - a * cp[k - 1];
            let inv = m.try_inverse().ok_or(WaveError::SingularJacobian { node: k })?;
            cp.push(inv * cc);
            rp.push(inv * (-res[k] - a * rp[k - 1]));
        }
        let mut du = vec![Vector3::zeros(); n];
        du[n - 1] = rp[n - 1];
        for k in (0..n - 1).rev() {
            du[k] = rp[k] - cp[k] * du[k + 1];
        }
        Ok(du)
    }
}

fn max_norm(v: &[Vector3<f64>]) -> f64 {
    v.iter().map(|x| x.amax()).fold(0.0, f64::max)
}

/// Damped Newton on the centered-difference discretisation of the wave ODEs.
/// Left: Dirichlet values from the leading-order asymptotics (this also pins
/// the phase through I(x_min)); right: S' = R' = 0 and I' = -kappa I.
pub fn solve_bvp_newton(
    p: &ModelParams,
    c: f64,
    init: &Profile,
    opts: &NewtonOptions,
) -> Result<NewtonReport, WaveError> {
    let roots = lambda0(c, p)?;
    let grid = init.grid();
    let mut u: Vec<Vector3<f64>> = (0..grid.n)
        .map(|k| Vector3::new(init.s.values[k], init.i.values[k], init.r.values[k]))
        .collect();
    let left = left_asymptotic_values(p, &roots, grid.x_min).unwrap_or([u[0].x, u[0].y, u[0].z]);
    let sys = BvpSystem {
        p,
        c,
        dx: grid.dx,
        left,
    };
    let mut kappa = sys.kappa(&u);
    let mut res = sys.residual(&u, kappa);
    let mut res_norm = max_norm(&res);
    let mut max_update = f64::INFINITY;
    for step in 1..=opts.max_steps {
        let du = sys.update(&u, &res, kappa)?;
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1.0 / 1024.0 {
            let trial: Vec<Vector3<f64>> = u.iter().zip(&du).map(|(a, b)| a + b * t).collect();
            let k_trial = sys.kappa(&trial);
            let r_trial = sys.residual(&trial, k_trial);
            let n_trial = max_norm(&r_trial);
            if n_trial < res_norm || n_trial <= 1e-13 {
                accepted = Some((trial, k_trial, r_trial, n_trial));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, k_trial, r_trial, n_trial)) = accepted else {
            // No decrease: the iterate is at rounding level or stuck.
            max_update = max_norm(&du);
            if max_update < opts.step_tol {
                return Ok(finish_newton(&grid, &u, roots.lambda0, kappa, step, max_update, res_norm));
            }
            return Err(WaveError::NotConverged {
                steps: step,
                residual: res_norm,
            });
        };
        max_update = max_norm(&du) * t;
        u = trial;
        kappa = k_trial;
        res = r_trial;
        res_norm = n_trial;
        if max_update < opts.step_tol {
            return Ok(finish_newton(&grid, &u, roots.lambda0, kappa, step, max_update, res_norm));
        }
    }
    Err(WaveError::NotConverged {
        steps: opts.max_steps,
        residual: res_norm.max(max_update),
    })
}

fn finish_newton(
    grid: &Grid,
    u: &[Vector3<f64>],
    lambda0: f64,
    kappa: f64,
    steps: usize,
    max_update: f64,
    residual: f64,
) -> NewtonReport {
    let comp = |j: usize, lt: Tail, rt: Tail| GridFunction {
        grid: *grid,
        values: u.iter().map(|v| v[j]).collect(),
        left_tail: lt,
        right_tail: rt,
    };
    let l0 = Tail::ExpGrowth(lambda0);
    let i_right = if kappa > 0.0 {
        Tail::ExpGrowth(-kappa)
    } else {
        Tail::Zero
    };
    NewtonReport {
        profile: Profile {
            s: comp(0, Tail::Constant, Tail::Constant),
            i: comp(1, l0, i_right),
            r: comp(2, l0, Tail::Constant),
        },
        steps,
        max_update,
        residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alignment {
    /// Shift s minimising max |other(x + s) - reference(x)|.
    pub shift: f64,
    pub aligned_max_diff: f64,
    pub raw_max_diff: f64,
}

/// Align `other` to `reference` by a translation, comparing on |x| <= half_window.
pub fn align_profiles(reference: &Profile, other: &Profile, half_window: f64) -> Alignment {
    let og = other.grid();
    let splines: Vec<UniformSpline> = other
        .components()
        .iter()
        .map(|c| UniformSpline::new(og.x_min, og.dx, &c.values))
        .collect();
    let rg = reference.grid();
    let xs: Vec<(usize, f64)> = (0..rg.n)
        .map(|k| (k, rg.x(k)))
        .filter(|(_, x)| x.abs() <= half_window)
        .collect();
    let refs = reference.components();
    let mismatch = |shift: f64| {
        let mut worst = 0.0f64;
        for (j, sp) in splines.iter().enumerate() {
            for &(k, x) in &xs {
                worst = worst.max((sp.eval(x + shift) - refs[j].values[k]).abs());
            }
        }
        worst
    };
    let raw = if rg == og {
        reference.max_diff(other)
    } else {
        mismatch(0.0)
    };
    let span = 1.0;
    let steps = 80;
    let (mut best, mut best_val) = (0.0, mismatch(0.0));
    for j in 0..=steps {
        let s = -span + 2.0 * span * j as f64 / steps as f64;
        let v = mismatch(s);
        if v < best_val {
            best = s;
            best_val = v;
        }
    }
    let h = 2.0 * span / steps as f64;
    let (shift, val) = golden_section(mismatch, best - h, best + h, 1e-12);
    let (shift, aligned) = if val < best_val { (shift, val) } else { (best, best_val) };
    Alignment {
        shift,
        aligned_max_diff: aligned,
        raw_max_diff: raw,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileDiagnostics {
    /// Largest increase of S between neighbours (should be <= 0).
    pub s_max_increase: f64,
    /// Largest decrease of R between neighbours (should be <= 0).
    pub r_max_decrease: f64,
    pub s_inf: f64,
    pub s_inf_plateau: f64,
    /// S(-inf) - S(+inf).
    pub drop: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub left_decay_fit: f64,
    pub lambda0: f64,
    pub left_decay_rel_err: f64,
    pub right_decay_fit: f64,
    /// Integral of (gamma + delta) I.
    pub removal_integral: f64,
    /// Integral of beta S I / N.
    pub incidence_integral: f64,
    /// c (S(-inf) - S(+inf)).
    pub flux: f64,
    /// (max - min) / flux over the three numbers above.
    pub identity_spread: f64,
    pub r_end: f64,
    pub r_target: f64,
    pub r_end_rel_err: f64,
    /// Max |R - R reconstructed from I|.
    pub r_reconstruction_err: f64,
    pub j_max: f64,
    /// Largest decrease of J between neighbours (should be <= 0).
    pub j_max_decrease: f64,
    /// max(I - J) (should be <= 0).
    pub i_minus_j_max: f64,
}

/// Integrals of `values` against exp(a (x - y)) on each half line, with
/// exponential tails of rate `left_rate` (x -> -inf) and `-right_decay`.
fn half_line_integrals(
    values: &[f64],
    grid: &Grid,
    left_rate: f64,
    right_decay: Option<f64>,
    lp: f64,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    let rt = right_decay.map_or(Tail::Zero, |k| Tail::ExpGrowth(-k));
    Ok(kernel_integrals(values, grid, Tail::ExpGrowth(left_rate), rt, 0.0, lp)?)
}

pub fn profile_diagnostics(u: &Profile, p: &ModelParams, c: f64) -> Result<ProfileDiagnostics, WaveError> {
    let roots = lambda0(c, p)?;
    let g = u.grid();
    let n = g.n;
    let (s, i, r) = (&u.s.values, &u.i.values, &u.r.values);
    let s_max_increase = s.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let r_max_decrease = r.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let s_inf = tail_corrected_s_inf(u, p, c);
    let drop = p.s_minus_inf - s_inf;
    let i_min = i.iter().copied().fold(f64::INFINITY, f64::min);
    let i_max = i.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let fit_on = |range: std::ops::Range<usize>| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = range
            .filter(|&k| i[k] > 0.0)
            .map(|k| (g.x(k), i[k].ln()))
            .unzip();
        linear_fit(&xs, &ys).map_or(f64::NAN, |f| f.slope)
    };
    let quarter = (n / 4).max(3);
    let left_decay_fit = fit_on(0..quarter);
    let right_decay_fit = fit_on(n - quarter..n);

    let kappa = right_decay_rate(u, p, c);
    let l0 = roots.lambda0;
    let tails = |h0: f64, h1: f64| h0 / l0 + kappa.map_or(0.0, |k| h1 / k);
    let gd = p.gamma + p.delta;
    let removal_integral = gd * (trapezoid(i, g.dx) + tails(i[0], i[n - 1]));
    let inc: Vec<f64> = (0..n)
        .map(|k| incidence(s[k], i[k], r[k], p.beta, INCIDENCE_GUARD))
        .collect();
    let incidence_integral = trapezoid(&inc, g.dx) + tails(inc[0], inc[n - 1]);
    let flux = c * drop;
    let trio = [removal_integral, incidence_integral, flux];
    let hi = trio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = trio.iter().copied().fold(f64::INFINITY, f64::min);

    let r_end = r[n - 1];
    let r_target = p.gamma * drop / gd;

    let (cum, ahead3) = half_line_integrals(i, &g, l0, kappa, c / p.d3)?;
    let r_rec_err = (0..n)
        .map(|k| (p.gamma / c * (cum[k] + ahead3[k]) - r[k]).abs())
        .fold(0.0, f64::max);
    let (_, ahead2) = half_line_integrals(i, &g, l0, kappa, c / p.d2)?;
    let j: Vec<f64> = (0..n).map(|k| i[k] + gd / c * (cum[k] + ahead2[k])).collect();
    let j_max = j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let j_max_decrease = j.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let i_minus_j_max = (0..n).map(|k| i[k] - j[k]).fold(f64::NEG_INFINITY, f64::max);

    Ok(ProfileDiagnostics {
        s_max_increase,
        r_max_decrease,
        s_inf,
        s_inf_plateau: plateau_s_inf(u),
        drop,
        i_min,
        i_max,
        left_decay_fit,
        lambda0: l0,
        left_decay_rel_err: (left_decay_fit - l0).abs() / l0,
        right_decay_fit,
        removal_integral,
        incidence_integral,
        flux,
        identity_spread: (hi - lo) / flux.abs(),
        r_end,
        r_target,
        r_end_rel_err: (r_end - r_target).abs() / r_target,
        r_reconstruction_err: r_rec_err,
        j_max,
        j_max_decrease,
        i_minus_j_max,
    })
}
