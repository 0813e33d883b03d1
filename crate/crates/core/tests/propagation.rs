use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chebprop::config::{Problem, RunConfig};
use chebprop::inhom::{propagate, Direction, InhomogeneousTerm, PhiMode, PropagatorConfig};
use chebprop::oct::models::build_surrogate_rb2;
use chebprop::oct::pulses::GaussianPulse;
use chebprop::oct::{krotov_iterate, ControlField, KrotovConfig, TargetSpec};
use chebprop::oracle::{duhamel_trajectory, OracleConfig};
use chebprop::selfcheck::{random_hermitian, random_state};
use chebprop::timegrid::{make_chebyshev_grid, TimeGrid};
use chebprop::{StateVector, C64};

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn lobatto_grid_with_spectral_derivatives_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = random_hermitian(&mut rng, 5);
    let psi = random_state(&mut rng, 5).normalized();
    let a = random_state(&mut rng, 5);
    let b = random_state(&mut rng, 5);
    let phi = move |t: f64| {
        let mut v = a.scaled(C64::new((1.1 * t).sin(), 0.0));
        v.axpy(C64::new(0.2 * t * t, 0.0), &b);
        v
    };
    let err = |n: usize| {
        let grid = make_chebyshev_grid(6.0, n).unwrap();
        let want = duhamel_trajectory(&psi, &phi, &h, &[], &grid, &OracleConfig::default()).unwrap();
        let cfg = PropagatorConfig::new(4, grid);
        assert_eq!(cfg.phi_mode, PhiMode::TaylorCoeffs);
        let got = propagate(&psi, &InhomogeneousTerm::analytic(phi.clone()), &h, &[], &cfg).unwrap();
        got.trajectory.values.iter().zip(&want.values).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(121), err(241));
    assert!(fine < 1e-7, "max deviation {fine:e}");
    assert!(coarse / fine > 12.0, "fourth-order convergence expected: {coarse:e} -> {fine:e}");
}

#[test]
fn homogeneous_backward_run_undoes_forward_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let h = random_hermitian(&mut rng, 6);
    let psi = random_state(&mut rng, 6).normalized();
    let grid = TimeGrid::equidistant(20.0, 40).unwrap();
    let fwd = PropagatorConfig::new(1, grid.clone()).with_tolerance(1e-14);
    let out = propagate(&psi, &InhomogeneousTerm::Zero, &h, &[], &fwd).unwrap();
    let end = out.trajectory.values.last().unwrap().clone();
    let back = propagate(&end, &InhomogeneousTerm::Zero, &h, &[], &fwd.with_direction(Direction::Backward)).unwrap();
    assert!(back.trajectory.values[0].max_abs_diff(&psi) < 1e-11);
    for (x, y) in out.trajectory.values.iter().zip(&back.trajectory.values) {
        assert!(x.max_abs_diff(y) < 1e-11);
    }
}

#[test]
fn source_only_run_grows_linearly_for_constant_source() {
    let h = chebprop::DenseHamiltonian::diagonal(&[0.0, 0.0, 0.0]);
    let src = StateVector::from_real(&[1.0, -2.0, 0.5]);
    let s = src.clone();
    let grid = TimeGrid::equidistant(3.0, 7).unwrap();
    let cfg = PropagatorConfig::new(2, grid.clone());
    let out = propagate(&StateVector::zeros(3), &InhomogeneousTerm::analytic(move |_| s.clone()), &h, &[], &cfg).unwrap();
    for (t, v) in grid.points().iter().zip(&out.trajectory.values) {
        assert!(v.max_abs_diff(&src.scaled(C64::new(*t, 0.0))) < 1e-12);
    }
}

#[test]
fn surrogate_state_constraint_optimization_is_monotonic() {
    let sur = build_surrogate_rb2(64, 3).unwrap();
    let total = 2000.0;
    let grid = TimeGrid::equidistant(total, 2000).unwrap();
    let pulse = GaussianPulse { amplitude: 2e-3, center: total / 2.0, sigma: total / 8.0, omega: 0.0537 };
    let field = ControlField::new(grid.midpoints().iter().map(|&t| pulse.eval(t)).collect(), 20.0, 1e-4, 1.0);
    let target = TargetSpec::StateConstraint { d: sur.ground_level_projector(2), p_allow: sur.channel_projector(&[0, 1]) };
    let cfg = KrotovConfig::new(PropagatorConfig::new(1, grid), 6);
    let res = krotov_iterate(&sur.ground_levels[0], field, &target, &sur.hamiltonian, &cfg, |_| {}).unwrap();
    assert!(res.monotonic(), "{:?}", res.reports);
    assert!(res.last().j > res.reports[0].j);
}

#[test]
fn shipped_configs_parse_and_build() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let p = Problem::build(cfg, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(p.grid.n_steps() > 0);
        }
    }
}

#[test]
fn double_lambda_backward_config_is_close_to_a_finer_run() {
    let cfg = RunConfig::load(&configs().join("double_lambda_backward.toml")).unwrap();
    let p = Problem::build(cfg, None).unwrap();
    let coarse = p.run(&p.propagator).unwrap();
    let fine_grid = TimeGrid::equidistant(p.grid.total_time(), p.grid.n_steps() * 4).unwrap();
    let mut fine_cfg = p.propagator.clone();
    fine_cfg.grid = fine_grid;
    fine_cfg.m = 3;
    fine_cfg.n_cheb_sample = 3;
    // The guess field is resampled on the finer grid, so only agreement to
    // the field-sampling error is expected.
    let fine = p.run(&fine_cfg).unwrap();
    let mut worst = 0.0f64;
    for (k, v) in coarse.trajectory.values.iter().enumerate() {
        let w = &fine.trajectory.values[4 * k];
        for (a, b) in v.iter().zip(w.iter()) {
            worst = worst.max((a.norm_sqr() - b.norm_sqr()).abs());
        }
    }
    assert!(worst < 1e-3, "max population deviation {worst:e}");
}
