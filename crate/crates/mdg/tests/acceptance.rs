//! Acceptance checks. Each criterion prints one PASS or FAIL line; the test
//! fails at the end if any criterion did.

#[path = "../../core/tests/support/two_cell_oracle.rs"]
mod two_cell_oracle;

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use mdg::config::{ProblemId, RunConfig};
use mdg::csv::StudyTable;
use mdg::run::{self, Case};
use mdg::solve::solve;
use mdg_core::assembly::{assemble_system, AssemblyOptions};
use mdg_core::dense;
use mdg_core::postprocess::{local_conservation_residual, project_exact, source_l2_norm, stress_norm_parts};
use mdg_core::problems::{self, KappaInvField};
use mdg_core::quadrature::triangle_rule;
use mdg_core::solver::SolverMethod;
use mdg_core::{Diagonal, Mesh};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

const INV_KAPPA: [f64; 3] = [1e-3, 1.0, 1e3];

/// Reference velocity errors for `k = 0`, `inv_kappa = 1`, `n = 4, 8, 16, 32`.
const REFERENCE_U_ERRORS: [f64; 4] = [3.18199e-03, 1.65770e-03, 8.35424e-04, 4.18528e-04];

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

/// Run a check, turning panics into failures.
fn run_check<T>(check: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match panic::catch_unwind(AssertUnwindSafe(check)) {
        Ok(outcome) => outcome,
        Err(payload) => Err(payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn example1_tables() -> Result<(Vec<StudyTable>, f64), String> {
    let start = Instant::now();
    let mut tables = Vec::new();
    for k in 0..=2 {
        let mut cfg = RunConfig::for_problem(ProblemId::Example1);
        cfg.k = k;
        cfg.mesh_sizes = vec![4, 8, 16, 32];
        cfg.inv_kappa = Some(INV_KAPPA.to_vec());
        tables.extend(run::run_convergence(&cfg).map_err(|e| e.to_string())?);
    }
    Ok((tables, start.elapsed().as_secs_f64()))
}

fn convergence_rates(tables: &[StudyTable], seconds: f64) -> Outcome {
    let mut worst = String::new();
    for t in tables {
        let r = t.table.final_rates();
        let k = t.k as f64;
        let broken_min = if t.k == 0 && t.inv_kappa == "1000" { 1.2 } else { k + 0.8 };
        let l2_min = match t.k {
            0 => f64::NEG_INFINITY,
            1 => k + 0.7,
            _ => 3.5,
        };
        let label = format!("k={} inv_kappa={}", t.k, t.inv_kappa);
        ensure(r.u_l2 >= k + 0.8, || format!("{label}: u rate {:.2} < {:.2}", r.u_l2, k + 0.8))?;
        ensure(r.sigma_broken >= broken_min, || format!("{label}: broken stress rate {:.2} < {broken_min:.2}", r.sigma_broken))?;
        ensure(r.sigma_l2 >= l2_min, || format!("{label}: stress L2 rate {:.2} < {l2_min:.2}", r.sigma_l2))?;
        ensure(r.p_l2 >= l2_min, || format!("{label}: pressure rate {:.2} < {l2_min:.2}", r.p_l2))?;
        worst.push_str(&format!(
            " [{label}: u {:.2}, broken {:.2}, sigma {:.2}, p {:.2}]",
            r.u_l2, r.sigma_broken, r.sigma_l2, r.p_l2
        ));
    }
    ensure(seconds <= 600.0, || format!("took {seconds:.0} s"))?;
    Ok(format!("{seconds:.1} s;{worst}"))
}

fn find<'a>(tables: &'a [StudyTable], k: usize, inv_kappa: f64) -> &'a StudyTable {
    let label = format!("{inv_kappa}");
    tables.iter().find(|t| t.k == k && t.inv_kappa == label).expect("table present")
}

fn error_magnitudes(tables: &[StudyTable]) -> Outcome {
    let t = find(tables, 0, 1.0);
    let mut detail = Vec::new();
    for (row, want) in t.table.rows.iter().zip(REFERENCE_U_ERRORS) {
        let ratio = row.errors.u_l2 / want;
        ensure((0.75..=1.25).contains(&ratio), || format!("n={}: {:e} vs {want:e}", row.n, row.errors.u_l2))?;
        detail.push(format!("n={} ratio {ratio:.3}", row.n));
    }
    Ok(detail.join(", "))
}

fn kappa_robustness(tables: &[StudyTable]) -> Outcome {
    let errors: Vec<f64> = INV_KAPPA
        .iter()
        .map(|&ik| find(tables, 1, ik).table.rows.iter().find(|r| r.n == 16).expect("n = 16 row").errors.u_l2)
        .collect();
    let (lo, hi) = errors.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    ensure(hi < 3.0 * lo, || format!("u errors {errors:?}"))?;
    Ok(format!("u errors {errors:?}, spread {:.3}", hi / lo))
}

fn example2_rates() -> Outcome {
    let cfg = RunConfig::for_problem(ProblemId::Example2);
    let tables = run::run_convergence(&cfg).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for t in &tables {
        let r = t.table.final_rates();
        let label = format!("nu={}", t.nu);
        ensure(r.u_l2 >= 1.8, || format!("{label}: u rate {:.2}", r.u_l2))?;
        ensure(r.sigma_l2 >= 2.5, || format!("{label}: stress L2 rate {:.2}", r.sigma_l2))?;
        ensure(r.p_l2 >= 2.5, || format!("{label}: pressure rate {:.2}", r.p_l2))?;
        detail.push(format!("{label}: u {:.2}, sigma {:.2}, p {:.2}", r.u_l2, r.sigma_l2, r.p_l2));
    }
    Ok(detail.join(", "))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn patch_test() -> Outcome {
    let problem = problems::patch_test();
    let mut worst = 0.0f64;
    for k in 0..=2 {
        for n in [2, 4] {
            let mesh = Mesh::uniform_unit_square(n, Diagonal::Right).unwrap();
            let sys = assemble_system(&mesh, k, &problem, &AssemblyOptions::default()).map_err(|e| e.to_string())?;
            let (sol, _) = solve(&sys, &mesh, SolverMethod::Direct, 1e-12).map_err(|e| e.to_string())?;
            let exact = project_exact(&mesh, &sys.spaces, &problem, 2 * k + 4).map_err(|e| e.to_string())?;
            let scale = norm(&exact.velocity.values);
            let du: Vec<f64> = sol.velocity.values.iter().zip(&exact.velocity.values).map(|(a, b)| a - b).collect();
            let err = norm(&du).max(norm(&sol.sigma.values)) / scale;
            ensure(err <= 1e-10, || format!("k={k} n={n}: relative error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("worst relative error {worst:.1e}"))
}

/// Local conservation, plus the trace and norm identity of computed stresses.
fn conservation(trace_and_norm: &mut Vec<(f64, f64)>) -> Outcome {
    let cfg = RunConfig::for_problem(ProblemId::Example1);
    let mesh = Mesh::uniform_unit_square(8, Diagonal::Right).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=1 {
        for ik in INV_KAPPA {
            let cfg = RunConfig { k, ..cfg.clone() };
            let problem = run::build_problem(&cfg, Case { inv_kappa: Some(ik), nu: 1.0 }).map_err(|e| e.to_string())?;
            let sys = run::assemble(&cfg, &mesh, &problem).map_err(|e| e.to_string())?;
            let (sol, _) = solve(&sys, &mesh, SolverMethod::Direct, 1e-12).map_err(|e| e.to_string())?;
            let res = local_conservation_residual(&mesh, &sol, &problem, cfg.quadrature_elevation).map_err(|e| e.to_string())?;
            let f_norm = source_l2_norm(&mesh, &problem, 2 * k + 8).map_err(|e| e.to_string())?;
            let r = res.iter().map(|r| r[0].abs().max(r[1].abs())).fold(0.0, f64::max) / f_norm.max(1.0);
            ensure(r <= 1e-9, || format!("k={k} inv_kappa={ik}: residual {r:e}"))?;
            worst = worst.max(r);
            let (full, dev, tr) = stress_norm_parts(&mesh, &sol.sigma, 2 * k + 4).map_err(|e| e.to_string())?;
            trace_and_norm.push((sol.trace_integral(&sys).abs(), (full - dev - 0.5 * tr).abs() / full.max(1.0)));
        }
    }
    Ok(format!("worst scaled residual {worst:.1e}"))
}

fn structural_invariants(trace_and_norm: &[(f64, f64)]) -> Outcome {
    for k in 0..=2 {
        for diagonal in [Diagonal::Right, Diagonal::Left] {
            let mesh = Mesh::uniform_unit_square(3, diagonal).unwrap();
            let sys = assemble_system(&mesh, k, &problems::example2(1.0), &AssemblyOptions::default()).unwrap();
            let defect = sys.global_matrix().symmetry_defect();
            ensure(defect == 0.0, || format!("k={k} {diagonal:?}: symmetry defect {defect:e}"))?;
            let n = sys.num_velocity();
            ensure(dense::cholesky(&sys.s.dense_block(0, 0, n, n), n).is_some(), || format!("k={k}: S not SPD"))?;
        }
    }

    let mesh = Mesh::uniform_unit_square(4, Diagonal::Right).unwrap();
    let sys = assemble_system(&mesh, 1, &problems::example2(1.0), &AssemblyOptions::default()).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let bound = 1e-13 * sys.a.max_abs();
    for _ in 0..100 {
        let x: Vec<f64> = (0..sys.num_stress()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = sys.a.quadratic_form(&x);
        ensure(q >= -bound * x.iter().map(|v| v * v).sum::<f64>(), || format!("x^T A x = {q:e}"))?;
    }

    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    for degree in 0..=14u32 {
        let rule = triangle_rule(degree as usize).map_err(|e| e.to_string())?;
        for a in 0..=degree {
            for b in 0..=degree - a {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let got: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                ensure((got - exact).abs() <= 1e-14 + 1e-13 * exact, || format!("degree {degree}: x^{a} y^{b}"))?;
            }
        }
    }

    let trace = trace_and_norm.iter().map(|t| t.0).fold(0.0, f64::max);
    let identity = trace_and_norm.iter().map(|t| t.1).fold(0.0, f64::max);
    ensure(!trace_and_norm.is_empty(), || "no computed stresses".into())?;
    ensure(trace <= 1e-9, || format!("|int tr sigma_h| = {trace:e}"))?;
    ensure(identity <= 1e-10, || format!("norm identity defect {identity:e}"))?;
    Ok(format!("max |int tr| {trace:.1e}, norm identity defect {identity:.1e}"))
}

fn oracle() -> Outcome {
    two_cell_oracle::check(Diagonal::Right, KappaInvField::Constant(3.0), 1.0);
    two_cell_oracle::check(Diagonal::Left, KappaInvField::Constant(0.5), 1.0);
    let field = KappaInvField::ClosedForm { label: "1+x+2y".into(), eval: Arc::new(|x: [f64; 2]| 1.0 + x[0] + 2.0 * x[1]) };
    two_cell_oracle::check(Diagonal::Right, field, 2.5);
    Ok("A, B, S, c, G, F entries on three two-cell cases".into())
}

fn contrast_trend(problem: ProblemId) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::for_problem(problem);
    cfg.output.vtu_dir = Some(dir.path().to_path_buf());
    let start = Instant::now();
    let (_, runs) = run::run_single(&cfg).map_err(|e| e.to_string())?;
    let mut speeds = Vec::new();
    for r in &runs {
        ensure(r.n == 100, || format!("ran at n = {}", r.n))?;
        ensure(r.is_finite(), || format!("non-finite field at inv_kappa {:?}", r.case.inv_kappa))?;
        speeds.push(r.low_permeability_speed.ok_or("no low permeability region")?);
    }
    ensure(speeds.len() == 3, || format!("{} contrasts", speeds.len()))?;
    ensure(speeds.windows(2).all(|w| w[1] < w[0]), || format!("mean speeds {speeds:?}"))?;
    Ok(format!("mean |u| in obstacles {speeds:?}, {:.0} s", start.elapsed().as_secs_f64()))
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let study = run_check(example1_tables);
    match &study {
        Ok((tables, seconds)) => {
            results.push(("1 convergence rates, example 1", run_check(|| convergence_rates(tables, *seconds))));
            results.push(("2 error magnitudes against the reference table", run_check(|| error_magnitudes(tables))));
            results.push(("3 velocity error is robust in kappa", run_check(|| kappa_robustness(tables))));
        }
        Err(e) => {
            for name in ["1 convergence rates, example 1", "2 error magnitudes against the reference table", "3 velocity error is robust in kappa"] {
                results.push((name, Err(e.clone())));
            }
        }
    }
    results.push(("4 convergence rates, example 2", run_check(example2_rates)));
    results.push(("5 patch test", run_check(patch_test)));
    let mut computed = Vec::new();
    results.push(("6 local conservation", run_check(|| conservation(&mut computed))));
    results.push(("7 structural invariants", run_check(|| structural_invariants(&computed))));
    results.push(("8 two-cell oracle", run_check(oracle)));
    results.push(("example 3 contrast trend at n = 100", run_check(|| contrast_trend(ProblemId::Example3))));
    results.push(("example 4 contrast trend at n = 100", run_check(|| contrast_trend(ProblemId::Example4))));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
