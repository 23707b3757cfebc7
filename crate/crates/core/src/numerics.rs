//! Small numerical helpers shared across modules.

use serde::Serialize;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs().max(d.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Composite trapezoidal rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub samples: usize,
}

/// Ordinary least squares y = a + b x with the standard error of b.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 3 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        samples: n,
    })
}

/// Natural cubic spline through uniformly spaced samples.
#[derive(Debug, Clone)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n >= 3 {
            // Thomas algorithm on the (1, 4, 1) system for interior second derivatives.
            let k = n - 2;
            let mut cp = vec![0.0; k];
            let mut dp = vec![0.0; k];
            for j in 0..k {
                let rhs = 6.0 * (y[j + 2] - 2.0 * y[j + 1] + y[j]) / (h * h);
                let denom = if j == 0 { 4.0 } else { 4.0 - cp[j - 1] };
                cp[j] = 1.0 / denom;
                dp[j] = if j == 0 { rhs / denom } else { (rhs - dp[j - 1]) / denom };
            }
            for j in (0..k).rev() {
                m[j + 1] = if j + 1 == k { dp[j] } else { dp[j] - cp[j] * m[j + 2] };
            }
        }
        Self {
            x0,
            h,
            y: y.to_vec(),
            m,
        }
    }

    /// Value at `x`, clamped to the sampled interval.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let t = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let k = (t.floor() as usize).min(n - 2);
        let a = t - k as f64;
        let b = 1.0 - a;
        let h2 = self.h * self.h;
        b * self.y[k]
            + a * self.y[k + 1]
            + ((b * b * b - b) * self.m[k] + (a * a * a - a) * self.m[k + 1]) * h2 / 6.0
    }
}

/// Real roots of the monic cubic t^3 + a t^2 + b t + c, assuming all three are real.
/// Returned in ascending order.
pub fn real_cubic_roots(a: f64, b: f64, c: f64) -> [f64; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let scale = a.abs().max(b.abs().sqrt()).max(c.abs().cbrt()).max(1e-300);
    let mut roots = if p.abs() <= 1e-14 * scale * scale {
        let t = (-q).cbrt();
        [t, t, t]
    } else if p < 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        [
            r * phi.cos(),
            r * (phi - two_pi_3).cos(),
            r * (phi - 2.0 * two_pi_3).cos(),
        ]
    } else {
        // p > 0 admits a single real root; only reached through rounding.
        let s = (p / 3.0).sqrt();
        let t = -2.0 * s * ((3.0 * q / (2.0 * p * s)).asinh() / 3.0).sinh();
        [t, t, t]
    };
    for r in roots.iter_mut() {
        *r += shift;
        // One Newton polish step on the original polynomial.
        let f = ((*r + a) * *r + b) * *r + c;
        let df = (3.0 * *r + 2.0 * a) * *r + b;
        if df.abs() > 1e-12 {
            *r -= f / df;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}
