//! Parameters, grids, grid functions and the standard-incidence reaction terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Population level below which incidence is taken to be zero.
pub const INCIDENCE_GUARD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{field}` = {value}: {reason}")]
    InvalidParam {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid function has {got} values, grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("profile components live on different grids")]
    GridMismatch,
}

/// Diffusion and epidemiological rates plus the susceptible level ahead of the wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub s_minus_inf: f64,
}

impl ModelParams {
    pub fn new(
        d1: f64,
        d2: f64,
        d3: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        s_minus_inf: f64,
    ) -> Result<Self, ModelError> {
        let p = Self {
            d1,
            d2,
            d3,
            beta,
            gamma,
            delta,
            s_minus_inf,
        };
        p.validate()?;
        Ok(p)
    }

    /// The reference parameter set used throughout the tests: unit diffusion,
    /// beta = 2, gamma = delta = 0.5, S(-inf) = 1.
    pub fn reference() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
            beta: 2.0,
            gamma: 0.5,
            delta: 0.5,
            s_minus_inf: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("s_minus_inf", self.s_minus_inf),
        ];
        for (field, value) in positive {
            if !value.is_finite() {
                return Err(ModelError::InvalidParam {
                    field,
                    value,
                    reason: "must be finite",
                });
            }
            if value <= 0.0 {
                return Err(ModelError::InvalidParam {
                    field,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(ModelError::InvalidParam {
                field: "delta",
                value: self.delta,
                reason: "must be finite and nonnegative",
            });
        }
        Ok(())
    }

    pub fn r_naught(&self) -> f64 {
        r_naught(self)
    }

    /// beta - gamma - delta, the linear growth rate of I at the disease-free state.
    pub fn net_growth(&self) -> f64 {
        self.beta - self.gamma - self.delta
    }

    /// True iff R0 > 1 and d3 < 2 d2.
    pub fn wave_regime(&self) -> bool {
        self.r_naught() > 1.0 && self.d3 < 2.0 * self.d2
    }

    /// Diffusion rate of equation `i` (1-based: 1 = S, 2 = I, 3 = R).
    pub fn diffusion(&self, i: usize) -> f64 {
        match i {
            1 => self.d1,
            2 => self.d2,
            3 => self.d3,
            _ => panic!("equation index {i} out of range 1..=3"),
        }
    }

    pub fn max_diffusion(&self) -> f64 {
        self.d1.max(self.d2).max(self.d3)
    }
}

pub fn r_naught(p: &ModelParams) -> f64 {
    p.beta / (p.gamma + p.delta)
}

/// beta*s*i/(s+i+r), or 0 when the total population is at most `eta`.
#[inline]
pub fn incidence(s: f64, i: f64, r: f64, beta: f64, eta: f64) -> f64 {
    let n = s + i + r;
    if n > eta {
        beta * s * i / n
    } else {
        0.0
    }
}

/// Right-hand sides of the three reaction terms; they sum to -delta*i.
#[inline]
pub fn reaction_terms(s: f64, i: f64, r: f64, p: &ModelParams) -> (f64, f64, f64) {
    let inc = incidence(s, i, r, p.beta, INCIDENCE_GUARD);
    (-inc, inc - (p.gamma + p.delta) * i, p.gamma * i)
}

/// Uniform mesh x_k = x_min + k dx on a window containing the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, ModelError> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(ModelError::InvalidGrid("bounds must be finite".into()));
        }
        if !(x_min < 0.0 && 0.0 < x_max) {
            return Err(ModelError::InvalidGrid(format!(
                "window [{x_min}, {x_max}] must contain the origin in its interior"
            )));
        }
        if n < 3 {
            return Err(ModelError::InvalidGrid(format!("need at least 3 points, got {n}")));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        Ok(Self { x_min, x_max, n, dx })
    }

    /// Window [-half_width, half_width] with spacing as close to `dx` as divides it evenly.
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self, ModelError> {
        if !(half_width > 0.0 && dx > 0.0) || !half_width.is_finite() || !dx.is_finite() {
            return Err(ModelError::InvalidGrid(format!(
                "half width {half_width} and spacing {dx} must be positive"
            )));
        }
        let cells = (2.0 * half_width / dx).round() as usize;
        Self::new(-half_width, half_width, cells.max(2) + 1)
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }
}

/// Extrapolation model for a grid function beyond the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    /// Equal to the boundary value.
    Constant,
    /// Boundary value times exp(rate * (x - x_boundary)).
    ExpGrowth(f64),
    /// Identically zero.
    Zero,
}

impl Tail {
    /// Growth rate of the tail, `None` for a vanishing tail.
    pub fn rate(&self) -> Option<f64> {
        match *self {
            Tail::Constant => Some(0.0),
            Tail::ExpGrowth(r) => Some(r),
            Tail::Zero => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub left_tail: Tail,
    pub right_tail: Tail,
}

impl GridFunction {
    pub fn new(
        grid: Grid,
        values: Vec<f64>,
        left_tail: Tail,
        right_tail: Tail,
    ) -> Result<Self, ModelError> {
        if values.len() != grid.n {
            return Err(ModelError::LengthMismatch {
                expected: grid.n,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(k));
        }
        Ok(Self {
            grid,
            values,
            left_tail,
            right_tail,
        })
    }

    pub fn from_fn(grid: Grid, left_tail: Tail, right_tail: Tail, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|k| f(grid.x(k))).collect();
        Self {
            grid,
            values,
            left_tail,
            right_tail,
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self::from_fn(grid, Tail::Constant, Tail::Constant, |_| value)
    }

    /// Value at an arbitrary x: linear interpolation inside, tail model outside.
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g.x_min {
            return tail_value(self.values[0], self.left_tail, x - g.x_min);
        }
        if x > g.x_max {
            return tail_value(self.values[g.n - 1], self.right_tail, x - g.x_max);
        }
        let t = (x - g.x_min) / g.dx;
        let k = (t.floor() as usize).min(g.n - 2);
        let w = t - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn tail_value(boundary: f64, tail: Tail, offset: f64) -> f64 {
    match tail {
        Tail::Constant => boundary,
        Tail::ExpGrowth(r) => boundary * (r * offset).exp(),
        Tail::Zero => 0.0,
    }
}

/// Candidate traveling-wave profile (S, I, R) on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub s: GridFunction,
    pub i: GridFunction,
    pub r: GridFunction,
}

impl Profile {
    pub fn new(s: GridFunction, i: GridFunction, r: GridFunction) -> Result<Self, ModelError> {
        if s.grid != i.grid || s.grid != r.grid {
            return Err(ModelError::GridMismatch);
        }
        Ok(Self { s, i, r })
    }

    pub fn grid(&self) -> Grid {
        self.s.grid
    }

    pub fn components(&self) -> [&GridFunction; 3] {
        [&self.s, &self.i, &self.r]
    }

    pub fn components_mut(&mut self) -> [&mut GridFunction; 3] {
        [&mut self.s, &mut self.i, &mut self.r]
    }

    /// Smallest sample over all three components.
    pub fn min_value(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.values.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.min_value() >= -tol
    }

    /// Max-norm distance between two profiles on the same grid.
    pub fn max_diff(&self, other: &Profile) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}
