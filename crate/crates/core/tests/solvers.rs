use parnes_core::baselines::{apg_no_restart, fista_qp, lambda_max, QpProblem};
use parnes_core::nesta_lasso::{
    default_lipschitz, duality_gap, solve_lasso, solve_lasso_with, LassoConfig, LassoProblem,
    NoObserver,
};
use parnes_core::operators::{make_dense_gaussian, make_partial_dct, LinearOperator, OperatorKind};
use parnes_core::parnes::{solve_bpdn, BpdnProblem, ParnesConfig};
use parnes_core::problems::{assemble, load_bundle, save_bundle, OperatorSpec, SignalSpec};
use parnes_core::vecops::{dist2, norm1, norm2};
use parnes_core::{MatvecLedger, Termination};
use proptest::prelude::*;

fn residual(op: &LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = op.apply(x, &mut MatvecLedger::new()).unwrap();
    b.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

fn small_instance(
    kind: OperatorKind,
    seed: u64,
    noise: f64,
) -> parnes_core::problems::ProblemBundle {
    let spec = SignalSpec::sparse(256, 8, 20.0, seed);
    let op_spec = OperatorSpec {
        kind,
        m: 64,
        normalize_columns: true,
    };
    assemble(&spec, &op_spec, noise).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lasso_answer_is_feasible_and_certified(seed in 0u64..1000, frac in 0.05f64..0.9) {
        let bundle = small_instance(OperatorKind::Dense, seed, 0.05);
        let l = default_lipschitz(&bundle.op);
        let tau = frac * norm1(&bundle.x_true);
        let p = LassoProblem::new(&bundle.op, &bundle.b, tau, l).unwrap();
        let config = LassoConfig { eta: 1e-6, max_matvec: 200_000, ..LassoConfig::default() };
        let report = solve_lasso(&p, &vec![0.0; 256], &config).unwrap();
        prop_assert!(report.converged);
        prop_assert!(norm1(&report.x) <= tau * (1.0 + 1e-12));
        // recompute the certificate independently
        let r = residual(&bundle.op, &bundle.b, &report.x);
        let g = bundle.op.apply_adjoint(&r, &mut MatvecLedger::new()).unwrap();
        prop_assert!(duality_gap(&r, &g, &bundle.b, tau) <= 1e-6 * (1.0 + 1e-6));
        prop_assert!((norm2(&r) - report.residual_norm).abs() <= 1e-10 * norm2(&bundle.b));
    }

    #[test]
    fn restarts_never_lose_to_plain_apg_by_much(seed in 0u64..1000) {
        let bundle = small_instance(OperatorKind::Dense, seed, 0.05);
        let l = default_lipschitz(&bundle.op);
        let tau = 0.8 * norm1(&bundle.x_true);
        let p = LassoProblem::new(&bundle.op, &bundle.b, tau, l).unwrap();
        let config = LassoConfig { eta: 1e-6, max_matvec: 200_000, ..LassoConfig::default() };
        let x0 = vec![0.0; 256];
        let restarted = solve_lasso(&p, &x0, &config).unwrap();
        let plain = apg_no_restart(&p, &x0, &config).unwrap();
        prop_assert!(restarted.converged && plain.converged);
        // both certified to the same gap, so residuals agree to within eta
        prop_assert!((restarted.residual_norm - plain.residual_norm).abs() <= 2e-6 * restarted.residual_norm.max(1.0));
    }
}

#[test]
fn lasso_dual_multiplier_reproduces_fista_solution() {
    // LS(tau) and QP(lambda) share minimizers when lambda = ||A^T r||_inf at the LS optimum
    let bundle = small_instance(OperatorKind::Dense, 7, 0.05);
    let l = default_lipschitz(&bundle.op);
    let tau = 0.7 * norm1(&bundle.x_true);
    let p = LassoProblem::new(&bundle.op, &bundle.b, tau, l).unwrap();
    let config = LassoConfig {
        eta: 1e-11,
        max_matvec: u64::MAX,
        ..LassoConfig::default()
    };
    let sol = solve_lasso_with(&p, &vec![0.0; 256], &config, &mut NoObserver).unwrap();
    let q = QpProblem::new(&bundle.op, &bundle.b, sol.dual_norm, l).unwrap();
    let fista = fista_qp(&q, &vec![0.0; 256], 1e-15, 1_000_000).unwrap();
    assert!(
        (norm1(&fista.x) - tau).abs() <= 1e-4 * tau,
        "{} vs {tau}",
        norm1(&fista.x)
    );
    assert!(dist2(&fista.x, &sol.report.x) <= 1e-3 * norm2(&sol.report.x));
}

#[test]
fn parnes_on_saved_bundle_matches_in_memory_run() {
    let bundle = small_instance(OperatorKind::PartialDct, 3, 1e-3);
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle, dir.path()).unwrap();
    let loaded = load_bundle(dir.path()).unwrap();

    let solve = |b: &parnes_core::problems::ProblemBundle| {
        let l = default_lipschitz(&b.op);
        let p = BpdnProblem::new(&b.op, &b.b, b.sigma_true, l).unwrap();
        solve_bpdn(&p, &ParnesConfig::with_eta(1e-6)).unwrap()
    };
    let (a, b) = (solve(&bundle), solve(&loaded));
    assert!(a.converged);
    assert_eq!(a.x, b.x);
    assert_eq!(a.n_a(), b.n_a());
    let r = a.residual_norm;
    assert!(r - bundle.sigma_true <= 1e-6 * r.max(1.0));
}

#[test]
fn parnes_trivial_when_sigma_covers_b() {
    let op = make_partial_dct(32, 128, 5).unwrap();
    let b: Vec<f64> = (0..32).map(|i| (i as f64 * 0.3).sin()).collect();
    let p = BpdnProblem::new(&op, &b, norm2(&b) * 1.01, 1.0).unwrap();
    let report = solve_bpdn(&p, &ParnesConfig::default()).unwrap();
    assert_eq!(report.termination, Termination::Trivial);
    assert!(report.x.iter().all(|v| *v == 0.0));
}

#[test]
fn fista_zero_at_lambda_max_on_gaussian() {
    let op = make_dense_gaussian(40, 120, 9, true).unwrap();
    let b: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    let lam = lambda_max(&op, &b).unwrap();
    let l = default_lipschitz(&op);
    let q = QpProblem::new(&op, &b, lam, l).unwrap();
    let report = fista_qp(&q, &vec![0.0; 120], 1e-14, 10_000).unwrap();
    assert!(report.x.iter().all(|v| *v == 0.0));
}

#[test]
fn ledger_matches_reported_counts() {
    let bundle = small_instance(OperatorKind::Dense, 11, 0.05);
    let l = default_lipschitz(&bundle.op);
    let p = BpdnProblem::new(&bundle.op, &bundle.b, bundle.sigma_true, l).unwrap();
    let report = solve_bpdn(&p, &ParnesConfig::with_eta(1e-6)).unwrap();
    assert_eq!(report.n_a(), report.n_forward + report.n_adjoint);
    assert!(report.n_a() <= 20_000);
    assert_eq!(report.setup_matvecs, 0);
}
