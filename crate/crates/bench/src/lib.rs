//! Shared fixtures for the criterion benchmarks.

use sirwave_core::{lambda0, resolvent::choose_alphas, Grid, GridFunction, ModelParams, ResolventSpec, Tail};

/// Reference parameters at c = 2.5 with the default constants.
pub fn reference_specs() -> (ModelParams, [ResolventSpec; 3]) {
    let p = ModelParams::reference();
    let roots = lambda0(2.5, &p).expect("c above c*");
    (p, choose_alphas(&p, &roots).expect("wave regime"))
}

/// A smooth bump on [-half_width, half_width].
pub fn bump(half_width: f64, dx: f64) -> GridFunction {
    let g = Grid::symmetric(half_width, dx).expect("valid grid");
    GridFunction::from_fn(g, Tail::Zero, Tail::Zero, |x| (-x * x).exp())
}
