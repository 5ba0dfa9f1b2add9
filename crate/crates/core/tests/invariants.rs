//! Structural properties of the discrete system and the patch test.

use std::sync::{Arc, LazyLock};

use mdg_core::assembly::{assemble_system, AssemblyOptions, SaddlePointSystem};
use mdg_core::dense;
use mdg_core::postprocess::{local_conservation_residual, project_exact, source_l2_norm, stress_norm_parts};
use mdg_core::problems::{self, KappaInvField};
use mdg_core::quadrature::triangle_rule;
use mdg_core::solver::solve_dense;
use mdg_core::{Diagonal, DgSpace, Mesh};
use proptest::prelude::*;

fn assembled(n: usize, k: usize, kappa: KappaInvField) -> (Mesh, SaddlePointSystem) {
    let mesh = Mesh::uniform_unit_square(n, Diagonal::Right).unwrap();
    let problem = problems::BrinkmanProblem::manufactured(
        "example1",
        Arc::new(problems::Example1Exact),
        kappa,
        1.0,
    );
    let sys = assemble_system(&mesh, k, &problem, &AssemblyOptions::default()).unwrap();
    (mesh, sys)
}

/// 32 cells with 3 components of 6 quadratic modes.
const STRESS_DOFS_K1: usize = 32 * 18;

static SYSTEM_K1: LazyLock<(Mesh, SaddlePointSystem)> = LazyLock::new(|| assembled(4, 1, KappaInvField::example2()));

#[test]
fn global_matrix_is_exactly_symmetric() {
    for k in 0..=2 {
        for diagonal in [Diagonal::Right, Diagonal::Left] {
            let mesh = Mesh::uniform_unit_square(3, diagonal).unwrap();
            let sys = assemble_system(&mesh, k, &problems::example2(1.0), &AssemblyOptions::default()).unwrap();
            assert_eq!(sys.global_matrix().symmetry_defect(), 0.0, "k = {k}, {diagonal:?}");
        }
    }
}

#[test]
fn velocity_mass_is_positive_definite() {
    for k in 0..=2 {
        let (_, sys) = assembled(3, k, KappaInvField::example2());
        let n = sys.num_velocity();
        let s = sys.s.dense_block(0, 0, n, n);
        assert_eq!(sys.s.symmetry_defect(), 0.0);
        assert!(dense::cholesky(&s, n).is_some(), "k = {k}");
    }
}

#[test]
fn identity_mode_spans_the_kernel_of_a_and_b() {
    let (_, sys) = &*SYSTEM_K1;
    let z = &sys.identity_mode;
    let az = sys.a.mul_vec(z);
    let bz = sys.b.mul_vec(z);
    assert!(az.iter().chain(&bz).all(|v| v.abs() < 1e-12));
    let trace: f64 = sys.c.iter().zip(z).map(|(a, b)| a * b).sum();
    assert!((trace - 2.0).abs() < 1e-12, "int tr(I) = {trace}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn stress_block_is_positive_semidefinite(x in prop::collection::vec(-1.0f64..1.0, STRESS_DOFS_K1)) {
        let (_, sys) = &*SYSTEM_K1;
        prop_assert_eq!(sys.num_stress(), x.len());
        let q = sys.a.quadratic_form(&x);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!(q >= -1e-13 * sys.a.max_abs() * xx, "x^T A x = {q}");
    }

    #[test]
    fn norm_identity_for_random_fields(coeffs in prop::collection::vec(-2.0f64..2.0, 18 * 8)) {
        let mesh = Mesh::uniform_unit_square(2, Diagonal::Left).unwrap();
        let space = DgSpace::stress(&mesh, 1).unwrap();
        let field = mdg_core::FieldCoefficients::new(&space, coeffs).unwrap();
        let (full, dev, tr) = stress_norm_parts(&mesh, &field, 4).unwrap();
        prop_assert!((full - dev - 0.5 * tr).abs() <= 1e-12 * full.max(1.0));
    }
}

#[test]
fn quadrature_integrates_monomials_through_degree_14() {
    // int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    for degree in 0..=14 {
        let rule = triangle_rule(degree).unwrap();
        for a in 0..=degree as u32 {
            for b in 0..=degree as u32 - a {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let got: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                assert!((got - exact).abs() <= 1e-14 + 1e-13 * exact, "degree {degree}: x^{a} y^{b}");
            }
        }
    }
}

#[test]
fn patch_test_is_exact() {
    let problem = problems::patch_test();
    for k in 0..=2 {
        for n in [2, 4] {
            let mesh = Mesh::uniform_unit_square(n, Diagonal::Right).unwrap();
            let sys = assemble_system(&mesh, k, &problem, &AssemblyOptions::default()).unwrap();
            let (sol, _) = solve_dense(&sys).unwrap();
            let exact = project_exact(&mesh, &sys.spaces, &problem, 2 * k + 4).unwrap();
            let u_norm: f64 = exact.velocity.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let du: f64 = sol.velocity.values.iter().zip(&exact.velocity.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let ds: f64 = sol.sigma.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(du <= 1e-10 * u_norm, "k = {k}, n = {n}: velocity error {du:e}");
            assert!(ds <= 1e-10 * u_norm, "k = {k}, n = {n}: stress {ds:e}");
        }
    }
}

#[test]
fn computed_stress_has_zero_mean_trace_and_satisfies_the_norm_identity() {
    for k in 0..=1 {
        let (mesh, sys) = assembled(4, k, KappaInvField::Constant(1.0));
        let (sol, _) = solve_dense(&sys).unwrap();
        assert!(sol.trace_integral(&sys).abs() <= 1e-9);
        let (full, dev, tr) = stress_norm_parts(&mesh, &sol.sigma, 2 * k + 4).unwrap();
        assert!((full - dev - 0.5 * tr).abs() <= 1e-10 * full);
    }
}

#[test]
fn cells_conserve_momentum() {
    for k in 0..=1 {
        for inv_kappa in [1e-3, 1.0, 1e3] {
            let problem = problems::example1(inv_kappa);
            let mesh = Mesh::uniform_unit_square(4, Diagonal::Right).unwrap();
            let opts = AssemblyOptions::default();
            let sys = assemble_system(&mesh, k, &problem, &opts).unwrap();
            let (sol, _) = solve_dense(&sys).unwrap();
            let res = local_conservation_residual(&mesh, &sol, &problem, opts.extra_quadrature).unwrap();
            let bound = 1e-9 * source_l2_norm(&mesh, &problem, 12).unwrap().max(1.0);
            let worst = res.iter().map(|r| r[0].abs().max(r[1].abs())).fold(0.0, f64::max);
            assert!(worst <= bound, "k = {k}, inv_kappa = {inv_kappa}: {worst:e}");
        }
    }
}
