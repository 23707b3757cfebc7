//! The operators Delta_i = -d_i D^2 + c D + alpha_i and their exponential-kernel
//! inverses.
//!
//! `apply_delta_inverse` integrates the exact kernels against the piecewise
//! linear interpolant of the samples (product integration), so each half-line
//! integral obeys a first-order recursion and the whole operator costs O(n).

use serde::Serialize;
use thiserror::Error;

use crate::linear_analysis::CharRoots;
use crate::model::{Grid, GridFunction, ModelParams, Profile, Tail};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolventError {
    #[error("finite differences need at least 5 points, got {0}")]
    GridTooSmall(usize),
    #[error("{side} tail rate {rate} outside the kernel window ({lambda_minus}, {lambda_plus})")]
    TailIncompatible {
        side: &'static str,
        rate: f64,
        lambda_minus: f64,
        lambda_plus: f64,
    },
    #[error("need lambda_minus < lambda < lambda + eps < lambda_plus, got {lambda_minus} < {lambda} < {upper} < {lambda_plus}")]
    ExponentOrdering {
        lambda_minus: f64,
        lambda: f64,
        upper: f64,
        lambda_plus: f64,
    },
    #[error("invalid resolvent constants: {0}")]
    InvalidConstants(String),
}

/// Kernel constants of one operator Delta_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventSpec {
    pub index: usize,
    pub alpha: f64,
    pub d: f64,
    pub c: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// sqrt(c^2 + 4 d alpha).
    pub rho: f64,
    /// d (lambda_plus - lambda_minus); equals `rho` up to rounding.
    pub rho_from_roots: f64,
}

impl ResolventSpec {
    pub fn new(index: usize, d: f64, c: f64, alpha: f64) -> Result<Self, ResolventError> {
        if !(d > 0.0 && alpha > 0.0 && c.is_finite()) {
            return Err(ResolventError::InvalidConstants(format!(
                "d = {d}, alpha = {alpha}, c = {c}"
            )));
        }
        let rho = (c * c + 4.0 * d * alpha).sqrt();
        // Larger root directly, smaller one through the product -alpha/d (no cancellation).
        let lambda_plus = if c >= 0.0 {
            (c + rho) / (2.0 * d)
        } else {
            2.0 * alpha / (rho - c)
        };
        let lambda_minus = -alpha / (d * lambda_plus);
        Ok(Self {
            index,
            alpha,
            d,
            c,
            lambda_minus,
            lambda_plus,
            rho,
            rho_from_roots: d * (lambda_plus - lambda_minus),
        })
    }

    /// Symbol f_i(lambda) = -d lambda^2 + c lambda + alpha.
    pub fn symbol(&self, lambda: f64) -> f64 {
        -self.d * lambda * lambda + self.c * lambda + self.alpha
    }
}

/// Default lower bounds for alpha_1, alpha_2, alpha_3.
pub fn alpha_floors(p: &ModelParams) -> [f64; 3] {
    [p.beta, p.gamma + p.delta, 1.0]
}

/// alpha_i = 2 max(floor_i, d_i lambda0^2 + c lambda0).
pub fn choose_alphas(
    p: &ModelParams,
    roots: &CharRoots,
) -> Result<[ResolventSpec; 3], ResolventError> {
    choose_alphas_scaled(p, roots, 1.0)
}

/// As [`choose_alphas`] with every floor multiplied by `floor_factor`.
pub fn choose_alphas_scaled(
    p: &ModelParams,
    roots: &CharRoots,
    floor_factor: f64,
) -> Result<[ResolventSpec; 3], ResolventError> {
    let (c, l0) = (roots.c, roots.lambda0);
    let floors = alpha_floors(p);
    let mut specs = Vec::with_capacity(3);
    for i in 1..=3 {
        let d = p.diffusion(i);
        let alpha = 2.0 * (floor_factor * floors[i - 1]).max(d * l0 * l0 + c * l0);
        let spec = ResolventSpec::new(i, d, c, alpha)?;
        if -spec.lambda_minus <= l0 {
            return Err(ResolventError::InvalidConstants(format!(
                "|lambda_{i}^-| = {} does not exceed lambda0 = {l0}",
                -spec.lambda_minus
            )));
        }
        specs.push(spec);
    }
    if specs[0].alpha <= p.beta || specs[1].alpha <= p.gamma + p.delta {
        return Err(ResolventError::InvalidConstants(
            "alpha_1 > beta and alpha_2 > gamma + delta required".into(),
        ));
    }
    Ok([specs[0], specs[1], specs[2]])
}

/// Exponent of the weighted sup-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormContext {
    pub mu: f64,
}

/// mu halfway between lambda0 and the smallest |lambda_i^-|.
pub fn choose_mu(specs: &[ResolventSpec], lambda0: f64) -> Result<WeightedNormContext, ResolventError> {
    let min_neg = specs
        .iter()
        .map(|s| -s.lambda_minus)
        .fold(f64::INFINITY, f64::min);
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN is rejected too
    if !(min_neg > lambda0) {
        return Err(ResolventError::InvalidConstants(format!(
            "min |lambda_i^-| = {min_neg} must exceed lambda0 = {lambda0}"
        )));
    }
    let mu = 0.5 * (lambda0 + min_neg);
    debug_assert!(specs.iter().all(|s| s.lambda_minus < -mu && mu < s.lambda_plus));
    Ok(WeightedNormContext { mu })
}

/// sup_k exp(-mu |x_k|) |u(x_k)|.
pub fn weighted_norm(u: &GridFunction, ctx: &WeightedNormContext) -> f64 {
    let g = u.grid;
    u.values
        .iter()
        .enumerate()
        .map(|(k, v)| (-ctx.mu * g.x(k).abs()).exp() * v.abs())
        .fold(0.0, f64::max)
}

pub fn weighted_norm_profile(u: &Profile, ctx: &WeightedNormContext) -> f64 {
    u.components()
        .iter()
        .map(|c| weighted_norm(c, ctx))
        .fold(0.0, f64::max)
}

/// -d h'' + c h' + alpha h by second-order finite differences, one-sided at the ends.
pub fn apply_delta(h: &GridFunction, spec: &ResolventSpec) -> Result<GridFunction, ResolventError> {
    let n = h.grid.n;
    if n < 5 {
        return Err(ResolventError::GridTooSmall(n));
    }
    let v = &h.values;
    let dx = h.grid.dx;
    let (idx2, idx) = (1.0 / (dx * dx), 0.5 / dx);
    let mut out = vec![0.0; n];
    for k in 1..n - 1 {
        let d2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) * idx2;
        let d1 = (v[k + 1] - v[k - 1]) * idx;
        out[k] = -spec.d * d2 + spec.c * d1 + spec.alpha * v[k];
    }
    let edge = |a: f64, b: f64, c: f64, d: f64, sign: f64| {
        let d1 = sign * (-3.0 * a + 4.0 * b - c) * idx;
        let d2 = (2.0 * a - 5.0 * b + 4.0 * c - d) * idx2;
        -spec.d * d2 + spec.c * d1 + spec.alpha * a
    };
    out[0] = edge(v[0], v[1], v[2], v[3], 1.0);
    out[n - 1] = edge(v[n - 1], v[n - 2], v[n - 3], v[n - 4], -1.0);
    Ok(GridFunction {
        grid: h.grid,
        values: out,
        left_tail: h.left_tail,
        right_tail: h.right_tail,
    })
}

/// Product-integration weights for a kernel exp(a s), s in [0, dx], against a
/// linear function: (weight of the node at s = 0, weight of the node at s = dx).
pub fn cell_weights(a: f64, dx: f64) -> (f64, f64) {
    let z = a * dx;
    let (e0, e1) = if z.abs() < 0.5 {
        // Series: e0 = sum z^k/(k+1)!, e1 = sum (k+1) z^k/(k+2)!.
        let (mut e0, mut e1) = (0.0, 0.0);
        let mut term = 1.0; // z^k / (k+1)!
        for k in 0..18 {
            e0 += term;
            e1 += term * (k + 1) as f64 / (k + 2) as f64;
            term *= z / (k + 2) as f64;
        }
        (e0, e1)
    } else {
        (z.exp_m1() / z, (z.exp() * (z - 1.0) + 1.0) / (z * z))
    };
    (dx * (e0 - e1), dx * e1)
}

/// Closed-form integral of a tail model against exp(a s), s >= 0, where the
/// tail decays away from the boundary as exp(-rate_outward s).
fn tail_integral(h0: f64, tail: Tail, a: f64) -> Option<f64> {
    match tail.rate() {
        None => Some(0.0),
        Some(r) => {
            let decay = r - a;
            (decay > 0.0).then(|| h0 / decay)
        }
    }
}

/// The two half-line integrals
/// `lower[k] = int_{-inf}^{x_k} e^{lm (x_k - y)} h(y) dy` and
/// `upper[k] = int_{x_k}^{inf} e^{lp (x_k - y)} h(y) dy`
/// with the tails closed analytically.
pub fn kernel_integrals(
    values: &[f64],
    grid: &Grid,
    left_tail: Tail,
    right_tail: Tail,
    lm: f64,
    lp: f64,
) -> Result<(Vec<f64>, Vec<f64>), ResolventError> {
    let n = values.len();
    let dx = grid.dx;
    // Left tail: s = x_min - y >= 0, h = h0 exp(-r s), kernel exp(lm s).
    let left = tail_integral(values[0], left_tail, lm).ok_or(ResolventError::TailIncompatible {
        side: "left",
        rate: left_tail.rate().unwrap_or(0.0),
        lambda_minus: lm,
        lambda_plus: lp,
    })?;
    // Right tail: s = y - x_max >= 0, h = h0 exp(r s), kernel exp(-lp s).
    let right = match right_tail.rate() {
        None => 0.0,
        Some(r) if r < lp => values[n - 1] / (lp - r),
        Some(r) => {
            return Err(ResolventError::TailIncompatible {
                side: "right",
                rate: r,
                lambda_minus: lm,
                lambda_plus: lp,
            })
        }
    };
    let mut lower = vec![0.0; n];
    let (near, far) = cell_weights(lm, dx);
    let decay = (lm * dx).exp();
    lower[0] = left;
    for k in 1..n {
        lower[k] = decay * lower[k - 1] + near * values[k] + far * values[k - 1];
    }
    let mut upper = vec![0.0; n];
    let (near, far) = cell_weights(-lp, dx);
    let decay = (-lp * dx).exp();
    upper[n - 1] = right;
    for k in (0..n - 1).rev() {
        upper[k] = decay * upper[k + 1] + near * values[k] + far * values[k + 1];
    }
    Ok((lower, upper))
}

/// Tail model of Delta^{-1} h given the tails of h.
fn output_tails(h: &GridFunction, spec: &ResolventSpec) -> (Tail, Tail) {
    let left = match h.left_tail {
        Tail::Zero => Tail::ExpGrowth(spec.lambda_plus),
        t => t,
    };
    let right = match h.right_tail {
        Tail::Zero => Tail::ExpGrowth(spec.lambda_minus),
        t => t,
    };
    (left, right)
}

pub fn apply_delta_inverse(
    h: &GridFunction,
    spec: &ResolventSpec,
) -> Result<GridFunction, ResolventError> {
    let (lower, upper) = kernel_integrals(
        &h.values,
        &h.grid,
        h.left_tail,
        h.right_tail,
        spec.lambda_minus,
        spec.lambda_plus,
    )?;
    let inv_rho = 1.0 / spec.rho;
    let values = lower.iter().zip(&upper).map(|(l, u)| (l + u) * inv_rho).collect();
    let (left_tail, right_tail) = output_tails(h, spec);
    Ok(GridFunction {
        grid: h.grid,
        values,
        left_tail,
        right_tail,
    })
}

/// Delta^{-1} h together with its first and second derivatives from the
/// differentiated kernels; the second derivative carries the local term -h/d.
pub fn delta_inverse_with_derivatives(
    h: &GridFunction,
    spec: &ResolventSpec,
) -> Result<[GridFunction; 3], ResolventError> {
    let (lower, upper) = kernel_integrals(
        &h.values,
        &h.grid,
        h.left_tail,
        h.right_tail,
        spec.lambda_minus,
        spec.lambda_plus,
    )?;
    let (lm, lp, r) = (spec.lambda_minus, spec.lambda_plus, spec.rho);
    let n = h.grid.n;
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    let mut ddu = Vec::with_capacity(n);
    for k in 0..n {
        let (l, up) = (lower[k], upper[k]);
        u.push((l + up) / r);
        du.push((lm * l + lp * up) / r);
        ddu.push((lm * lm * l + lp * lp * up) / r - h.values[k] / spec.d);
    }
    let (lt, rt) = output_tails(h, spec);
    let wrap = |values| GridFunction {
        grid: h.grid,
        values,
        left_tail: lt,
        right_tail: rt,
    };
    Ok([wrap(u), wrap(du), wrap(ddu)])
}

/// First and second derivatives of Delta^{-1} h.
pub fn delta_inverse_derivatives(
    h: &GridFunction,
    spec: &ResolventSpec,
) -> Result<(GridFunction, GridFunction), ResolventError> {
    let [_, d1, d2] = delta_inverse_with_derivatives(h, spec)?;
    Ok((d1, d2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseGReport {
    pub x_star: f64,
    /// Delta^{-1}(Delta g) by quadrature.
    pub result: GridFunction,
    pub g: GridFunction,
    /// Closed-form value of Delta^{-1}(Delta g).
    pub exact: GridFunction,
    /// min over the grid of result - g.
    pub min_margin: f64,
    /// max |result - exact|.
    pub max_quadrature_error: f64,
}

/// Delta^{-1} applied to the classical (piecewise) Delta g of
/// g = max(e^{lambda x}(1 - M e^{eps x}), 0), compared with g itself.
pub fn delta_inverse_piecewise_g(
    grid: &Grid,
    lambda: f64,
    eps: f64,
    m: f64,
    spec: &ResolventSpec,
) -> Result<PiecewiseGReport, ResolventError> {
    let upper = lambda + eps;
    if !(spec.lambda_minus < lambda && eps > 0.0 && upper < spec.lambda_plus && m > 0.0) {
        return Err(ResolventError::ExponentOrdering {
            lambda_minus: spec.lambda_minus,
            lambda,
            upper,
            lambda_plus: spec.lambda_plus,
        });
    }
    let x_star = -m.ln() / eps;
    let below = |x: f64| x < x_star;
    // Delta g is a difference of two pure exponentials left of x*; treat each
    // separately so that the left tail closure is exact.
    let part = |rate: f64, coeff: f64| {
        GridFunction::from_fn(*grid, Tail::ExpGrowth(rate), Tail::Zero, |x| {
            if below(x) {
                coeff * (rate * x).exp()
            } else {
                0.0
            }
        })
    };
    let a = apply_delta_inverse(&part(lambda, spec.symbol(lambda)), spec)?;
    let b = apply_delta_inverse(&part(upper, -m * spec.symbol(upper)), spec)?;
    let values: Vec<f64> = a.values.iter().zip(&b.values).map(|(p, q)| p + q).collect();
    let g = GridFunction::from_fn(*grid, Tail::ExpGrowth(lambda), Tail::Zero, |x| {
        ((lambda * x).exp() * (1.0 - m * (eps * x).exp())).max(0.0)
    });
    let amp = eps / (spec.lambda_plus - spec.lambda_minus);
    let exact = GridFunction::from_fn(*grid, Tail::ExpGrowth(lambda), Tail::Zero, |x| {
        let lead = lambda * x_star;
        if x >= x_star {
            amp * (lead + spec.lambda_minus * (x - x_star)).exp()
        } else {
            (lambda * x).exp() * (1.0 - m * (eps * x).exp())
                + amp * (lead + spec.lambda_plus * (x - x_star)).exp()
        }
    });
    let min_margin = values
        .iter()
        .zip(&g.values)
        .map(|(r, g)| r - g)
        .fold(f64::INFINITY, f64::min);
    let max_quadrature_error = values
        .iter()
        .zip(&exact.values)
        .map(|(r, e)| (r - e).abs())
        .fold(0.0, f64::max);
    Ok(PiecewiseGReport {
        x_star,
        result: GridFunction {
            grid: *grid,
            values,
            left_tail: Tail::ExpGrowth(lambda),
            right_tail: Tail::ExpGrowth(spec.lambda_minus),
        },
        g,
        exact,
        min_margin,
        max_quadrature_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_analysis::lambda0;

    fn p0_specs() -> [ResolventSpec; 3] {
        let p = ModelParams::reference();
        choose_alphas(&p, &lambda0(2.5, &p).unwrap()).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let s = p0_specs();
        assert_eq!(s[0].alpha, 4.0);
        assert_eq!(s[1].alpha, 3.0);
        assert_eq!(s[2].alpha, 3.0);
        // Independent root of -l^2 + 2.5 l + 4 = 0.
        let oracle = (2.5 - (2.5f64 * 2.5 + 16.0).sqrt()) / 2.0;
        assert!((s[0].lambda_minus - oracle).abs() < 1e-14);
        assert!((s[0].lambda_minus + 1.10850).abs() < 1e-5);
        assert!((s[1].lambda_minus + 0.88600).abs() < 1e-5);
        for spec in &s {
            assert!(spec.symbol(spec.lambda_minus).abs() < 1e-10);
            assert!(spec.symbol(spec.lambda_plus).abs() < 1e-10);
            assert!(((spec.rho - spec.rho_from_roots) / spec.rho).abs() < 1e-12);
            assert!(-spec.lambda_minus > 0.5);
        }
    }

    #[test]
    fn mu_examples() {
        let s = p0_specs();
        let ctx = choose_mu(&s, 0.5).unwrap();
        assert!((ctx.mu - 0.5 * (0.5 + 0.886001)).abs() < 1e-5);
        for spec in &s {
            assert!(spec.lambda_minus < -ctx.mu);
        }
        let near = ResolventSpec {
            lambda_minus: -0.6,
            ..s[0]
        };
        assert!((choose_mu(&[near], 0.5).unwrap().mu - 0.55).abs() < 1e-15);
        assert!(choose_mu(&[ResolventSpec { lambda_minus: -0.4, ..s[0] }], 0.5).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let g = Grid::symmetric(20.0, 0.1).unwrap();
        let ctx = WeightedNormContext { mu: 0.693 };
        assert_eq!(weighted_norm(&GridFunction::constant(g, 1.0), &ctx), 1.0);
        let e = GridFunction::from_fn(g, Tail::ExpGrowth(0.5), Tail::ExpGrowth(0.5), |x| (0.5 * x).exp());
        assert!((weighted_norm(&e, &ctx) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_examples() {
        let g = Grid::symmetric(5.0, 0.01).unwrap();
        let s = p0_specs()[1];
        let k = GridFunction::constant(g, 2.0);
        let out = apply_delta(&k, &s).unwrap();
        assert!(out.values.iter().all(|v| (v - 6.0).abs() < 1e-9));
        let lin = GridFunction::from_fn(g, Tail::Constant, Tail::Constant, |x| x);
        let out = apply_delta(&lin, &s).unwrap();
        for k in 1..g.n - 1 {
            assert!((out.values[k] - (2.5 + 3.0 * g.x(k))).abs() < 1e-9);
        }
        let e = GridFunction::from_fn(g, Tail::Zero, Tail::Zero, |x| (0.5 * x).exp());
        let out = apply_delta(&e, &s).unwrap();
        for k in 0..g.n {
            let x = g.x(k);
            assert!((out.values[k] - s.symbol(0.5) * (0.5 * x).exp()).abs() < 1e-3 * (0.5 * x).exp());
        }
        let tiny = Grid::new(-1.0, 1.0, 4).unwrap();
        assert_eq!(
            apply_delta(&GridFunction::constant(tiny, 1.0), &s),
            Err(ResolventError::GridTooSmall(4))
        );
    }

    #[test]
    fn constant_inverts_exactly() {
        let g = Grid::symmetric(10.0, 0.05).unwrap();
        for spec in p0_specs() {
            let out = apply_delta_inverse(&GridFunction::constant(g, 3.0), &spec).unwrap();
            for v in &out.values {
                assert!((v - 3.0 / spec.alpha).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pure_exponential_matches_symbol() {
        let g = Grid::symmetric(20.0, 0.01).unwrap();
        let spec = p0_specs()[1];
        let h = GridFunction::from_fn(g, Tail::ExpGrowth(0.5), Tail::ExpGrowth(0.5), |x| (0.5 * x).exp());
        let out = apply_delta_inverse(&h, &spec).unwrap();
        let f = -0.25 + 2.5 * 0.5 + 3.0;
        for k in 0..g.n {
            let x = g.x(k);
            let exact = (0.5 * x).exp() / f;
            assert!((out.values[k] - exact).abs() < 1e-5 * exact, "x={x}");
        }
    }

    #[test]
    fn recursion_matches_direct_summation() {
        let g = Grid::new(-1.0, 1.5, 26).unwrap();
        let spec = p0_specs()[0];
        let h: Vec<f64> = (0..g.n).map(|k| (1.3 * g.x(k)).sin() + 2.0).collect();
        let lt = Tail::ExpGrowth(0.3);
        let rt = Tail::Constant;
        let (lower, upper) =
            kernel_integrals(&h, &g, lt, rt, spec.lambda_minus, spec.lambda_plus).unwrap();
        let dx = g.dx;
        let (lm, lp) = (spec.lambda_minus, spec.lambda_plus);
        let (ln, lf) = cell_weights(lm, dx);
        let (un, uf) = cell_weights(-lp, dx);
        for k in 0..g.n {
            let mut l = h[0] / (0.3 - lm) * (lm * (g.x(k) - g.x_min)).exp();
            for j in 0..k {
                l += (lm * (g.x(k) - g.x(j + 1))).exp() * (ln * h[j + 1] + lf * h[j]);
            }
            let mut u = h[g.n - 1] / lp * (lp * (g.x(k) - g.x_max)).exp();
            for j in k..g.n - 1 {
                u += (lp * (g.x(k) - g.x(j))).exp() * (un * h[j] + uf * h[j + 1]);
            }
            assert!((lower[k] - l).abs() < 1e-13 * (1.0 + l.abs()));
            assert!((upper[k] - u).abs() < 1e-13 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn cell_weights_continuous_across_series_switch() {
        let dx = 0.1;
        for a in [0.0, 1e-4, 4.999, 5.001, -4.999, -5.001, 0.01, -20.0] {
            let (n, f) = cell_weights(a, dx);
            // Exact values by fine midpoint quadrature.
            let m = 200_000;
            let (mut en, mut ef) = (0.0, 0.0);
            for j in 0..m {
                let s = (j as f64 + 0.5) * dx / m as f64;
                let k = (a * s).exp() * dx / m as f64;
                en += k * (1.0 - s / dx);
                ef += k * s / dx;
            }
            assert!((n - en).abs() < 1e-11 * (1.0 + en), "a={a}");
            assert!((f - ef).abs() < 1e-11 * (1.0 + ef), "a={a}");
        }
    }

    #[test]
    fn incompatible_tails_rejected() {
        let g = Grid::symmetric(5.0, 0.1).unwrap();
        let spec = p0_specs()[0];
        let h = GridFunction::from_fn(g, Tail::ExpGrowth(-2.0), Tail::Zero, |_| 1.0);
        assert!(matches!(
            apply_delta_inverse(&h, &spec),
            Err(ResolventError::TailIncompatible { side: "left", .. })
        ));
        let h = GridFunction::from_fn(g, Tail::Zero, Tail::ExpGrowth(5.0), |_| 1.0);
        assert!(matches!(
            apply_delta_inverse(&h, &spec),
            Err(ResolventError::TailIncompatible { side: "right", .. })
        ));
    }

    #[test]
    fn derivatives_of_constant_vanish() {
        let g = Grid::symmetric(10.0, 0.05).unwrap();
        for spec in p0_specs() {
            let (d1, d2) = delta_inverse_derivatives(&GridFunction::constant(g, 1.7), &spec).unwrap();
            assert!(d1.max_abs() < 1e-12);
            assert!(d2.max_abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences_and_ode() {
        let g = Grid::symmetric(15.0, 0.01).unwrap();
        let h = GridFunction::from_fn(g, Tail::Zero, Tail::Zero, |x| 1.0 / x.cosh());
        for spec in p0_specs() {
            let [u, d1, d2] = delta_inverse_with_derivatives(&h, &spec).unwrap();
            let dx = g.dx;
            for k in 1..g.n - 1 {
                let fd1 = (u.values[k + 1] - u.values[k - 1]) / (2.0 * dx);
                let fd2 = (u.values[k + 1] - 2.0 * u.values[k] + u.values[k - 1]) / (dx * dx);
                assert!((fd1 - d1.values[k]).abs() < 1e-4);
                assert!((fd2 - d2.values[k]).abs() < 1e-3);
                let ode = -spec.d * d2.values[k] + spec.c * d1.values[k] + spec.alpha * u.values[k];
                assert!((ode - h.values[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn piecewise_g_closed_forms() {
        let g = Grid::symmetric(20.0, 0.01).unwrap();
        let spec = p0_specs()[1];
        let rep = delta_inverse_piecewise_g(&g, 0.5, 0.1, 1.0, &spec).unwrap();
        assert_eq!(rep.x_star, 0.0);
        assert!(rep.min_margin >= -1e-8, "{}", rep.min_margin);
        // Delta g jumps at x*, so the linear interpolant is first order there.
        let jump = (spec.symbol(0.5) - spec.symbol(0.6)).abs();
        assert!(rep.max_quadrature_error < jump * g.dx / spec.rho * 2.0);
        assert!(matches!(
            delta_inverse_piecewise_g(&g, 0.5, 10.0, 1.0, &spec),
            Err(ResolventError::ExponentOrdering { .. })
        ));
    }
}
