//! Linearisation at the disease-free state: characteristic function, decay
//! rates, the matrix A_lambda, Phi and the minimal wave speed.

use nalgebra::Matrix3;
use serde::Serialize;
use thiserror::Error;

use crate::model::ModelParams;
use crate::numerics::{golden_section, real_cubic_roots};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("no real decay rate for c = {c}: discriminant {discriminant} < 0 (c below c* = {c_star})")]
    ComplexRoots {
        c: f64,
        c_star: f64,
        discriminant: f64,
    },
    #[error("R0 = {r0} <= 1: beta - gamma - delta = {growth} admits no positive wave speed")]
    SubThreshold { r0: f64, growth: f64 },
    #[error("Phi is defined for lambda > 0 only, got {0}")]
    NonPositiveLambda(f64),
    #[error("golden-section minimum {golden} disagrees with closed form {closed} (relative {rel:e})")]
    MinimizerDisagreement { golden: f64, closed: f64, rel: f64 },
}

/// Relative agreement required between golden-section and closed-form c*.
pub const GOLDEN_AGREEMENT: f64 = 1e-8;

/// f(lambda) = -d2 lambda^2 + c lambda - (beta - gamma - delta).
pub fn characteristic_f(lambda: f64, c: f64, p: &ModelParams) -> f64 {
    -p.d2 * lambda * lambda + c * lambda - p.net_growth()
}

/// Closed-form minimal speed 2 sqrt(d2 (beta - gamma - delta)); `None` when R0 <= 1.
pub fn c_star(p: &ModelParams) -> Option<f64> {
    let a = p.net_growth();
    (a > 0.0).then(|| 2.0 * (p.d2 * a).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharRoots {
    pub c: f64,
    pub lambda0: f64,
    pub lambda0_plus: f64,
    /// Set when c equals c* to rounding and the two roots coincide.
    pub degenerate: bool,
}

/// Roots of f for speed `c`, computed in the cancellation-free form.
pub fn lambda0(c: f64, p: &ModelParams) -> Result<CharRoots, LinearError> {
    let a = p.net_growth();
    if a <= 0.0 {
        return Err(LinearError::SubThreshold {
            r0: p.r_naught(),
            growth: a,
        });
    }
    let disc = c * c - 4.0 * p.d2 * a;
    let scale = 64.0 * f64::EPSILON * c * c;
    if disc < -scale {
        return Err(LinearError::ComplexRoots {
            c,
            c_star: 2.0 * (p.d2 * a).sqrt(),
            discriminant: disc,
        });
    }
    let degenerate = disc.abs() <= scale;
    let root = if degenerate { 0.0 } else { disc.sqrt() };
    // q = d2 * lambda0_plus; the product of the roots is a / d2.
    let q = 0.5 * (c + root);
    Ok(CharRoots {
        c,
        lambda0: a / q,
        lambda0_plus: q / p.d2,
        degenerate,
    })
}

/// Jacobian of the reaction terms at (S(-inf), 0, 0).
pub fn jacobian_dfe(p: &ModelParams) -> Matrix3<f64> {
    Matrix3::new(
        0.0,
        -p.beta,
        0.0,
        0.0,
        p.beta - p.gamma - p.delta,
        0.0,
        0.0,
        p.gamma,
        0.0,
    )
}

/// diag(d_i lambda^2) + Jacobian.
pub fn a_lambda(lambda: f64, p: &ModelParams) -> Matrix3<f64> {
    let l2 = lambda * lambda;
    Matrix3::from_diagonal(&nalgebra::Vector3::new(p.d1 * l2, p.d2 * l2, p.d3 * l2)) + jacobian_dfe(p)
}

/// Eigenvalues of A_lambda in equation order, from the closed form.
pub fn a_lambda_eigenvalues(lambda: f64, p: &ModelParams) -> [f64; 3] {
    let l2 = lambda * lambda;
    [p.d1 * l2, p.d2 * l2 + p.net_growth(), p.d3 * l2]
}

/// Eigenvalues of any 3x3 matrix with real spectrum via its characteristic
/// polynomial, ascending.
pub fn eigenvalues_via_char_poly(m: &Matrix3<f64>) -> [f64; 3] {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    real_cubic_roots(-tr, minors, -m.determinant())
}

/// Phi(lambda) = spectral radius of A_lambda / lambda.
pub fn phi(lambda: f64, p: &ModelParams) -> Result<f64, LinearError> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN is rejected too
    if !(lambda > 0.0) {
        return Err(LinearError::NonPositiveLambda(lambda));
    }
    let e = a_lambda_eigenvalues(lambda, p);
    Ok(e[0].max(e[1]).max(e[2]) / lambda)
}

/// The I-branch (d2 lambda^2 + beta - gamma - delta) / lambda.
pub fn phi_i_branch(lambda: f64, p: &ModelParams) -> f64 {
    (p.d2 * lambda * lambda + p.net_growth()) / lambda
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedAnalysis {
    pub c_star: f64,
    pub lambda_star: f64,
    /// Golden-section minimum of the I-branch and its minimiser.
    pub golden_c_star: f64,
    pub golden_lambda: f64,
    /// Golden-section minimum of the full Phi (all three branches).
    pub full_phi_min: f64,
    pub full_phi_argmin: f64,
    /// Whether the I-branch is the largest eigenvalue at lambda*.
    pub i_branch_active: bool,
    pub phi_samples: Vec<(f64, f64)>,
}

/// Lower end of the golden-section bracket.
pub const LAMBDA_LO: f64 = 1e-6;

pub fn golden_bracket_hi(lambda_star: f64) -> f64 {
    10.0 * lambda_star.max(1.0)
}

pub fn minimal_speed(p: &ModelParams) -> Result<SpeedAnalysis, LinearError> {
    let a = p.net_growth();
    if a <= 0.0 {
        return Err(LinearError::SubThreshold {
            r0: p.r_naught(),
            growth: a,
        });
    }
    let c_star = 2.0 * (p.d2 * a).sqrt();
    let lambda_star = (a / p.d2).sqrt();
    let hi = golden_bracket_hi(lambda_star);
    let (golden_lambda, golden_c_star) =
        golden_section(|l| phi_i_branch(l, p), LAMBDA_LO, hi, 1e-12);
    let rel = (golden_c_star - c_star).abs() / c_star;
    if rel > GOLDEN_AGREEMENT {
        return Err(LinearError::MinimizerDisagreement {
            golden: golden_c_star,
            closed: c_star,
            rel,
        });
    }
    // Phi is the max of three convex-in-lambda branches divided by lambda;
    // each branch over lambda is unimodal, and so is their max.
    let full = |l: f64| phi(l, p).unwrap_or(f64::INFINITY);
    let (full_phi_argmin, full_phi_min) = golden_section(full, LAMBDA_LO, hi, 1e-12);
    let e = a_lambda_eigenvalues(lambda_star, p);
    Ok(SpeedAnalysis {
        c_star,
        lambda_star,
        golden_c_star,
        golden_lambda,
        full_phi_min,
        full_phi_argmin,
        i_branch_active: e[1] >= e[0] && e[1] >= e[2],
        phi_samples: Vec::new(),
    })
}

/// Phi at `count` points spaced evenly on (0, hi].
pub fn phi_table(p: &ModelParams, hi: f64, count: usize) -> Vec<(f64, f64)> {
    (1..=count)
        .map(|k| {
            let l = hi * k as f64 / count as f64;
            (l, phi(l, p).expect("positive lambda"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D3Check {
    pub holds: bool,
    pub d3: f64,
    pub two_d2: f64,
    pub lambda0: Option<f64>,
    /// c - d3 lambda0, when lambda0 exists.
    pub c_minus_d3_lambda0: Option<f64>,
    pub implied_holds: Option<bool>,
    pub note: String,
}

pub fn check_d3_condition(p: &ModelParams, c: f64) -> D3Check {
    let holds = p.d3 < 2.0 * p.d2;
    let roots = lambda0(c, p).ok();
    let gap = roots.map(|r| c - p.d3 * r.lambda0);
    let note = match (holds, gap) {
        (true, Some(g)) if g > 0.0 => "d3 < 2 d2 and c - d3 lambda0 > 0".to_string(),
        (true, Some(_)) => "d3 < 2 d2 but c - d3 lambda0 <= 0".to_string(),
        (false, _) => format!(
            "d3 = {} is not strictly below 2 d2 = {}; the wave construction requires the strict inequality",
            p.d3,
            2.0 * p.d2
        ),
        (true, None) => "no real lambda0 at this speed".to_string(),
    };
    D3Check {
        holds,
        d3: p.d3,
        two_d2: 2.0 * p.d2,
        lambda0: roots.map(|r| r.lambda0),
        c_minus_d3_lambda0: gap,
        implied_holds: gap.map(|g| g > 0.0),
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p0() -> ModelParams {
        ModelParams::reference()
    }

    #[test]
    fn characteristic_examples() {
        assert_eq!(characteristic_f(0.0, 3.0, &p0()), -1.0);
        assert_eq!(characteristic_f(0.5, 2.5, &p0()), 0.0);
        assert_eq!(characteristic_f(1.0, 2.0, &p0()), 0.0);
    }

    #[test]
    fn lambda0_examples() {
        let r = lambda0(2.5, &p0()).unwrap();
        assert!((r.lambda0 - 0.5).abs() < 1e-15);
        assert!((r.lambda0_plus - 2.0).abs() < 1e-15);
        assert!(!r.degenerate);
        let r = lambda0(2.0, &p0()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.lambda0, 1.0);
        assert_eq!(r.lambda0_plus, 1.0);
        assert!(matches!(lambda0(1.9, &p0()), Err(LinearError::ComplexRoots { .. })));
    }

    #[test]
    fn lambda0_is_stable_for_fast_waves() {
        let c = 1e8;
        let r = lambda0(c, &p0()).unwrap();
        // lambda0 ~ a / c for c >> c*.
        assert!((r.lambda0 * c - 1.0).abs() < 1e-12);
        assert!(characteristic_f(r.lambda0, c, &p0()).abs() < 1e-12);
    }

    #[test]
    fn jacobian_examples() {
        let j = jacobian_dfe(&p0());
        assert_eq!(j[(1, 1)], 1.0);
        assert_eq!(j[(0, 1)], -2.0);
        assert_eq!(j[(2, 1)], 0.5);
        for r in 0..3 {
            assert_eq!(j[(r, 0)], 0.0);
            assert_eq!(j[(r, 2)], 0.0);
        }
        let q = ModelParams {
            beta: 1.0,
            gamma: 1.0,
            delta: 0.0,
            ..p0()
        };
        assert_eq!(jacobian_dfe(&q)[(1, 1)], 0.0);
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(a_lambda_eigenvalues(1.0, &p0()), [1.0, 2.0, 1.0]);
        assert_eq!(a_lambda_eigenvalues(0.0, &p0()), [0.0, 1.0, 0.0]);
        let q = ModelParams { d1: 3.0, ..p0() };
        assert_eq!(a_lambda_eigenvalues(2.0, &q), [12.0, 5.0, 4.0]);
        let generic = eigenvalues_via_char_poly(&a_lambda(2.0, &q));
        for (a, b) in generic.iter().zip([4.0, 5.0, 12.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(1.0, &p0()).unwrap(), 2.0);
        assert!(matches!(phi(0.0, &p0()), Err(LinearError::NonPositiveLambda(_))));
        assert!(matches!(phi(-1.0, &p0()), Err(LinearError::NonPositiveLambda(_))));
        let q = ModelParams {
            d2: 1e-3,
            d3: 1e-3,
            beta: 1.0 + 1e-3,
            gamma: 0.5,
            delta: 0.5,
            ..p0()
        };
        let v = phi(10.0, &q).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn minimal_speed_examples() {
        let s = minimal_speed(&p0()).unwrap();
        assert_eq!(s.c_star, 2.0);
        assert_eq!(s.lambda_star, 1.0);
        assert!((s.golden_c_star - 2.0).abs() < 2e-8);
        let q = ModelParams {
            d2: 4.0,
            beta: 3.0,
            gamma: 1.0,
            delta: 1.0,
            ..p0()
        };
        let s = minimal_speed(&q).unwrap();
        assert_eq!(s.c_star, 4.0);
        assert_eq!(s.lambda_star, 0.5);
        let sub = ModelParams { beta: 0.9, ..p0() };
        assert!(matches!(minimal_speed(&sub), Err(LinearError::SubThreshold { .. })));
    }

    #[test]
    fn full_phi_reported_when_other_branch_dominates() {
        let q = ModelParams { d1: 4.0, ..p0() };
        let s = minimal_speed(&q).unwrap();
        assert!(!s.i_branch_active);
        assert!(s.full_phi_min > s.c_star);
    }

    #[test]
    fn d3_condition_examples() {
        let d = check_d3_condition(&p0(), 2.5);
        assert!(d.holds);
        assert_eq!(d.c_minus_d3_lambda0, Some(2.0));
        let d = check_d3_condition(&ModelParams { d3: 2.0, ..p0() }, 2.5);
        assert!(!d.holds);
        let d = check_d3_condition(&ModelParams { d3: 1.9, ..p0() }, 2.01);
        assert!(d.holds);
        assert!(d.c_minus_d3_lambda0.unwrap() > 0.0);
    }
}
