use std::sync::OnceLock;

use sirwave_core::pde_sim::{self, SimConfig, SimRun};
use sirwave_core::verification::{run_suite, Level, Status, SuiteOptions};
use sirwave_core::wave_profile::{
    align_profiles, profile_diagnostics, right_decay_rate, solve_bvp_newton, solve_fixed_point, FixedPointOptions,
    FixedPointReport, NewtonOptions, WaveSetup,
};
use sirwave_core::{Grid, ModelParams};

const C: f64 = 2.5;
const HALF: f64 = 40.0;
const DX: f64 = 0.1;

fn opts() -> FixedPointOptions {
    FixedPointOptions {
        anderson_depth: 3,
        ..FixedPointOptions::default()
    }
}

fn picard() -> &'static FixedPointReport {
    static CELL: OnceLock<FixedPointReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = Grid::symmetric(HALF, DX).unwrap();
        let rep = solve_fixed_point(&ModelParams::reference(), C, &grid, &opts()).unwrap();
        assert!(rep.converged, "{rep:?}");
        rep
    })
}

#[test]
fn shifted_window_gives_translated_profile() {
    let p = ModelParams::reference();
    let shifted = Grid::new(-HALF + 5.0, HALF + 5.0, 801).unwrap();
    let other = solve_fixed_point(&p, C, &shifted, &opts()).unwrap();
    assert!(other.converged);
    let a = align_profiles(&picard().profile, &other.profile, 25.0);
    assert!(a.shift.abs() < DX, "{a:?}");
    assert!(a.aligned_max_diff < 1e-3, "{a:?}");
}

#[test]
fn newton_polishes_the_fixed_point_quickly() {
    let p = ModelParams::reference();
    let rep = solve_bvp_newton(&p, C, &picard().profile, &NewtonOptions::default()).unwrap();
    assert!(rep.steps <= 5, "{} steps", rep.steps);
    assert!(rep.max_update < 1e-10, "{}", rep.max_update);
}

#[test]
fn profile_stays_in_gamma_and_drops_s() {
    let p = ModelParams::reference();
    let rep = picard();
    let grid = rep.profile.grid();
    let setup = WaveSetup::new(&p, C, &grid, 1.0).unwrap();
    let excess = setup.gamma.excess(&rep.profile);
    assert!(excess.worst() <= 1e-12, "{excess:?}");
    assert!(rep.s_inf < p.s_minus_inf);
    assert!(rep.s_inf > 0.0);
    assert!(rep.profile.i.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn infective_tails_are_flat_and_decaying() {
    let p = ModelParams::reference();
    let u = &picard().profile;
    let i = &u.i.values;
    let n = i.len();
    let i_max = i.iter().copied().fold(0.0, f64::max);
    let slope_left = (i[1] - i[0]) / DX;
    let slope_right = (i[n - 1] - i[n - 2]) / DX;
    assert!(slope_left.abs() < 1e-4 * i_max, "{slope_left}");
    assert!(slope_right.abs() < 1e-4 * i_max, "{slope_right}");
    let kappa = right_decay_rate(u, &p, C).expect("I decays ahead of the wave");
    assert!(kappa > 0.0);
    let d = profile_diagnostics(u, &p, C).unwrap();
    assert!(d.right_decay_fit < 0.0, "{}", d.right_decay_fit);
}

fn short_run(p: ModelParams) -> SimRun {
    let grid = Grid::symmetric(50.0, DX).unwrap();
    let mut cfg = SimConfig::new(p, grid, 10.0);
    cfg.snapshot_times = vec![0.0, 5.0, 10.0];
    pde_sim::run(&cfg).unwrap()
}

#[test]
fn pde_keeps_states_nonnegative_and_r_growing() {
    let run = short_run(ModelParams::reference());
    assert!(run.final_state.min_value() >= 0.0);
    assert!(run.clipped_max_step_rel < 1e-12, "{}", run.clipped_max_step_rel);
    assert_eq!(run.mass.r_max_decrease(), 0.0);
}

#[test]
fn pde_conserves_mass_without_deaths() {
    let mut p = ModelParams::reference();
    p.delta = 0.0;
    let run = short_run(p);
    assert!(run.mass.total_drift() < 1e-8, "{}", run.mass.total_drift());
}

#[test]
fn susceptibles_are_a_subsolution_of_the_heat_equation() {
    // S_t - d1 S_xx = -incidence <= 0, checked on one RK4 step against the
    // discrete Laplacian of the starting state
    let p = ModelParams::reference();
    let run = short_run(p);
    let state = &run.final_state;
    let grid = state.grid();
    let cfg = SimConfig::new(p, grid, 10.0);
    let dt = cfg.resolved_dt().unwrap();
    let next = pde_sim::step(state, &cfg).unwrap().state;
    let s = &state.s.values;
    let n = s.len();
    let mut worst = f64::NEG_INFINITY;
    for k in 1..n - 1 {
        let lap = (s[k - 1] - 2.0 * s[k] + s[k + 1]) / (grid.dx * grid.dx);
        worst = worst.max((next.s.values[k] - s[k]) / dt - p.d1 * lap);
    }
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn suite_is_deterministic() {
    let p = ModelParams::reference();
    let opts = SuiteOptions::new(Level::Quick);
    let a = serde_json::to_string(&run_suite(&p, C, &opts)).unwrap();
    let b = serde_json::to_string(&run_suite(&p, C, &opts)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flipped_incidence_sign_is_caught() {
    let p = ModelParams::reference();
    let mut opts = SuiteOptions::new(Level::Quick);
    opts.flip_f2 = true;
    let rep = run_suite(&p, C, &opts);
    assert!(!rep.passed());
    for group in 4..=6 {
        assert!(
            rep.checks.iter().any(|c| c.group == group && c.status == Status::Fail),
            "group {group} did not fail: {}",
            rep.table()
        );
    }
}
