use approx::assert_relative_eq;
use covsel::coordinate::{ascent_column_step, descent_column_step, AscentState, DescentState};
use covsel::model::primal_objective;
use covsel::synth::SynthInstance;
use covsel::{solve, Bounds, ProblemInstance, SolverConfig, SolverKind, SymMatrix};

fn instance(n: usize, seed: u64) -> SymMatrix {
    SynthInstance::generate(n, 0.1, 0.15, seed).unwrap().b_noisy
}

#[test]
fn descent_dual_never_increases() {
    let sigma = instance(15, 3);
    let mut state = DescentState::new(&sigma, 0.3).unwrap();
    let mut last = state.dual_objective().unwrap();
    for sweep in 0..3 {
        for j in 0..15 {
            let step = descent_column_step(&mut state, j, 1e-9, 20_000).unwrap();
            assert!(step.after <= step.before);
            let now = state.dual_objective().unwrap();
            assert!(now <= last + 1e-10 * last.abs().max(1.0), "sweep {sweep} col {j}: {last} -> {now}");
            last = now;
        }
    }
    let u = state.u();
    for i in 0..15 {
        assert_eq!(u.get(i, i), 0.3);
        for j in 0..15 {
            assert!(u.get(i, j).abs() <= 0.3 + 1e-15);
        }
    }
}

#[test]
fn ascent_primal_never_decreases() {
    let sigma = instance(15, 4);
    let rho = 0.3;
    let mut state = AscentState::new(&sigma, rho).unwrap();
    let mut last = primal_objective(&state.x(), &sigma, rho).unwrap();
    for _ in 0..3 {
        for j in 0..15 {
            let step = ascent_column_step(&mut state, j, 1e-9, 20_000).unwrap();
            assert!(step.after >= step.before - 1e-12 * step.before.abs().max(1.0));
            let now = primal_objective(&state.x(), &sigma, rho).unwrap();
            assert!(now >= last - 1e-10 * last.abs().max(1.0), "{last} -> {now}");
            last = now;
        }
    }
}

#[test]
fn maintained_inverse_matches_fresh() {
    let sigma = instance(12, 5);
    let mut state = DescentState::new(&sigma, 0.2).unwrap();
    for j in 0..12 {
        descent_column_step(&mut state, j, 1e-10, 20_000).unwrap();
    }
    let fresh = state.fresh_inverse().unwrap();
    let drift = (state.maintained_inverse() - &fresh).amax() / fresh.amax();
    assert!(drift <= 1e-10, "drift {drift}");
}

#[test]
fn block_solvers_converge_on_synthetic_instance() {
    let sigma = instance(30, 0);
    let problem = ProblemInstance::new(sigma.clone(), 0.5, Bounds::Auto).unwrap();
    for kind in [SolverKind::BlockDescent, SolverKind::BlockAscent] {
        let mut config = SolverConfig::new(kind, 1e-4);
        config.max_iterations = 50;
        let sol = solve(&problem, &config).unwrap();
        assert!(sol.converged, "{kind}: gap {}", sol.gap);
        assert!(sol.gap <= 1e-4 && sol.gap >= -1e-10);
        let again = sol.recompute(&sigma).unwrap();
        assert_relative_eq!(again.gap, sol.gap, epsilon = 1e-9);
    }
}

#[test]
fn descent_and_ascent_agree() {
    let sigma = instance(20, 1);
    let problem = ProblemInstance::new(sigma, 0.5, Bounds::Auto).unwrap();
    let d = solve(&problem, &SolverConfig::new(SolverKind::BlockDescent, 1e-7)).unwrap();
    let a = solve(&problem, &SolverConfig::new(SolverKind::BlockAscent, 1e-7)).unwrap();
    assert!(d.converged && a.converged);
    let diff = d.x.sub(&a.x).frobenius_norm() / d.x.frobenius_norm();
    assert!(diff <= 1e-3, "relative difference {diff}");
    assert_relative_eq!(d.primal_objective, a.primal_objective, max_relative = 1e-6);
}

#[test]
fn sweep_count_grows_slowly_with_n() {
    let sweeps = |n: usize| {
        let problem = ProblemInstance::new(instance(n, 2), 0.5, Bounds::Auto).unwrap();
        let sol = solve(&problem, &SolverConfig::new(SolverKind::BlockDescent, 1e-5)).unwrap();
        assert!(sol.converged);
        sol.iterations.max(1)
    };
    let (small, large) = (sweeps(20), sweeps(60));
    assert!(large <= 3 * small, "n=20: {small} sweeps, n=60: {large} sweeps");
}

#[test]
fn smooth_solution_within_bounds() {
    let sigma = instance(8, 6);
    let problem = ProblemInstance::new(sigma, 0.5, Bounds::Auto).unwrap();
    let sol = solve(&problem, &SolverConfig::new(SolverKind::Smooth, 1e-2)).unwrap();
    assert!(sol.converged, "gap {}", sol.gap);
    let eig = covsel::spectral::eigenvalues(&sol.x).unwrap();
    assert!(eig[0] >= sol.alpha * (1.0 - 1e-9));
    assert!(eig[eig.len() - 1] <= sol.beta * (1.0 + 1e-9));
    assert!(sol.u.max_abs() <= 0.5 + 1e-12);
}
