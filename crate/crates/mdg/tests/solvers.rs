use mdg::direct::{solve_direct, KktFactor, SchurFactor};
use mdg::solve::solve;
use mdg_core::assembly::{assemble_system, AssemblyOptions, SaddlePointSystem};
use mdg_core::dense;
use mdg_core::problems;
use mdg_core::solver::{relative_residual, solve_dense, SolverMethod};
use mdg_core::{Diagonal, Mesh};

fn system(n: usize, k: usize, diagonal: Diagonal, problem: &problems::BrinkmanProblem) -> (Mesh, SaddlePointSystem) {
    let mesh = Mesh::uniform_unit_square(n, diagonal).unwrap();
    let sys = assemble_system(&mesh, k, &problem.nu_scale().unwrap(), &AssemblyOptions::default()).unwrap();
    (mesh, sys)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn direct_matches_dense_lu() {
    for k in 0..=2 {
        for diagonal in [Diagonal::Right, Diagonal::Left] {
            let (mesh, sys) = system(3, k, diagonal, &problems::example2(0.1));
            let (want, _) = solve_dense(&sys).unwrap();
            let (got, report) = solve_direct(&sys, &mesh, 1e-12).unwrap();
            assert!(report.relative_residual <= 1e-12);
            let (a, b) = (want.to_vector(), got.to_vector());
            assert!(distance(&a, &b) <= 1e-9 * norm(&a), "k = {k}, {diagonal:?}");
        }
    }
}

#[test]
fn both_factorizations_solve_general_right_hand_sides() {
    let (mesh, sys) = system(4, 1, Diagonal::Right, &problems::example1(1e3));
    let n = sys.size();
    let m = sys.global_matrix();
    let dense_m = m.dense_block(0, 0, n, n);
    // an arbitrary deterministic right-hand side with a nonzero multiplier row
    let r: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
    let want = dense::lu_solve(&dense_m, n, &r).unwrap();
    let kkt = KktFactor::new(&sys, &mesh).unwrap();
    let schur = SchurFactor::new(&sys, &mesh).unwrap();
    for (name, x) in [("kkt", kkt.solve(&r)), ("schur", schur.solve(&r))] {
        assert!(distance(&x, &want) <= 1e-8 * norm(&want), "{name}");
        assert!(relative_residual(&sys, &x, &r) <= 1e-10, "{name}");
    }
}

#[test]
fn direct_and_minres_agree() {
    for inv_kappa in [1e-3, 1.0, 1e3] {
        let (mesh, sys) = system(8, 1, Diagonal::Right, &problems::example1(inv_kappa));
        let (d, rd) = solve(&sys, &mesh, SolverMethod::Direct, 1e-12).unwrap();
        let (m, rm) = solve(&sys, &mesh, SolverMethod::Minres, 1e-12).unwrap();
        assert!(rd.relative_residual <= 1e-12 && rm.relative_residual <= 1e-12);
        assert!(rm.iterations > 0 && rd.iterations == 0);
        let (u_d, u_m) = (&d.velocity.values, &m.velocity.values);
        let (s_d, s_m) = (&d.sigma.values, &m.sigma.values);
        assert!(distance(u_d, u_m) <= 1e-8 * norm(u_d), "inv_kappa = {inv_kappa}");
        assert!(distance(s_d, s_m) <= 1e-8 * norm(s_d), "inv_kappa = {inv_kappa}");
        assert!(d.trace_integral(&sys).abs() <= 1e-9 && m.trace_integral(&sys).abs() <= 1e-9);
    }
}

#[test]
fn rejects_non_positive_tolerance() {
    let (mesh, sys) = system(2, 0, Diagonal::Right, &problems::example1(1.0));
    assert!(solve_direct(&sys, &mesh, 0.0).is_err());
    assert!(solve(&sys, &mesh, SolverMethod::Minres, -1.0).is_err());
}

#[test]
fn unreachable_minres_tolerance_is_a_solver_failure() {
    let (mesh, sys) = system(4, 1, Diagonal::Right, &problems::example1(1.0));
    let err = solve(&sys, &mesh, SolverMethod::Minres, 1e-30).unwrap_err();
    assert!(matches!(err, mdg_core::Error::SolverFailure { .. }), "{err}");
}

#[test]
fn minres_iterations_do_not_grow_with_contrast_or_refinement() {
    for n in [4, 8, 16] {
        for inv_kappa in [1e-3, 1.0, 1e3, 1e5] {
            let (mesh, sys) = system(n, 1, Diagonal::Right, &problems::example1(inv_kappa));
            let (_, report) = solve(&sys, &mesh, SolverMethod::Minres, 1e-10).unwrap();
            assert!(report.iterations <= 60, "n = {n}, inv_kappa = {inv_kappa}: {} iterations", report.iterations);
        }
    }
}
