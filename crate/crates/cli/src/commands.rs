use std::fs;
use std::path::Path;

use parnes_core::baselines::{
    apg_no_restart, fista_qp_with, reference_lasso, reference_qp, QpProblem, ReferenceSource,
    REFERENCE_TOL,
};
use parnes_core::nesta_lasso::{
    solve_lasso, LassoConfig, LassoProblem, LIPSCHITZ_MAX_ITERS, LIPSCHITZ_TOL,
};
use parnes_core::operators::{estimate_lipschitz, LinearOperator, OperatorKind};
use parnes_core::parnes::{solve_bpdn, BpdnProblem, ParnesConfig};
use parnes_core::problems::{
    assemble, load_bundle, save_bundle, write_f64s, MagnitudeLaw, OperatorSpec, SignalSpec,
};
use parnes_core::{SolveReport, Termination};
use serde::Serialize;

use crate::args::{GenArgs, ReferenceArgs, SolveArgs, SolverFlags, SolverKind};
use crate::error::{CliError, CliResult, EXIT_DNC, EXIT_OK};

pub const DEFAULT_ETA: f64 = 1e-6;
/// Duality-gap target of the long-run `LS(tau)` reference.
pub const LASSO_REFERENCE_TOL: f64 = 1e-12;

/// Text for stdout plus the exit code.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

/// `(L, setup applications)`: the override, or a power-iteration estimate.
pub fn lipschitz_for(op: &LinearOperator, over: Option<f64>) -> CliResult<(f64, u64)> {
    match over {
        Some(l) if l > 0.0 && l.is_finite() => Ok((l, 0)),
        Some(l) => Err(CliError::Usage(format!("--L must be positive, got {l}"))),
        None => {
            let est = estimate_lipschitz(op, LIPSCHITZ_TOL, LIPSCHITZ_MAX_ITERS);
            Ok((est.value, est.ledger.total()))
        }
    }
}

pub fn lasso_config(flags: &SolverFlags, eta: f64) -> LassoConfig {
    LassoConfig {
        eta,
        rip_delta: flags.rip_delta,
        k_max_override: flags.k_max,
        max_matvec: flags.max_matvec,
        reject_bad_restarts: !flags.no_restart_check,
        ..LassoConfig::default()
    }
}

pub fn parnes_config(flags: &SolverFlags, eta: f64) -> ParnesConfig {
    let mut config = ParnesConfig::with_eta(eta);
    config.max_matvec = flags.max_matvec;
    config.inner.rip_delta = flags.rip_delta;
    config.inner.k_max_override = flags.k_max;
    config.inner.reject_bad_restarts = !flags.no_restart_check;
    config
}

pub fn run_gen(args: &GenArgs) -> CliResult<Outcome> {
    let kind: OperatorKind = args.kind.into();
    let mut spec = if args.s == 0 {
        SignalSpec::power_law(args.n, args.decay, args.seed)
    } else {
        SignalSpec::sparse(args.n, args.s, args.dr_db, args.seed)
    };
    if args.uniform_exponents {
        spec.magnitude_law = MagnitudeLaw::UniformExponent;
    }
    let op_spec = OperatorSpec {
        kind,
        m: args.m,
        normalize_columns: !args.raw_columns,
    };
    let bundle = assemble(&spec, &op_spec, args.noise)?;
    save_bundle(&bundle, &args.out)?;

    #[derive(Serialize)]
    struct GenOut<'a> {
        path: String,
        kind: &'a str,
        m: usize,
        n: usize,
        s: usize,
        sigma_true: f64,
        seed: u64,
    }
    let out = GenOut {
        path: args.out.display().to_string(),
        kind: kind.as_str(),
        m: args.m,
        n: args.n,
        s: args.s,
        sigma_true: bundle.sigma_true,
        seed: args.seed,
    };
    Ok(Outcome {
        stdout: to_json(&out),
        code: EXIT_OK,
    })
}

/// Report printed by `solve`.
#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub solver: &'static str,
    pub param: &'static str,
    pub param_value: f64,
    pub n_forward: u64,
    pub n_adjoint: u64,
    #[serde(rename = "N_A")]
    pub n_a: u64,
    pub iterations: usize,
    pub restarts: usize,
    pub rejected_restarts: usize,
    pub newton_iterations: usize,
    pub final_gap: f64,
    pub residual_norm: f64,
    pub x_norm1: f64,
    pub converged: bool,
    pub termination: Termination,
    pub setup_matvecs: u64,
    pub lipschitz: f64,
    pub wall_ms: f64,
    pub seed: u64,
}

pub fn run_solve(args: &SolveArgs) -> CliResult<Outcome> {
    let (param, value) = match (args.solver, args.tau, args.sigma, args.lambda) {
        (SolverKind::NestaLasso | SolverKind::Apg, Some(t), None, None) => ("tau", t),
        (SolverKind::Parnes, None, Some(s), None) => ("sigma", s),
        (SolverKind::Fista, None, None, Some(l)) => ("lambda", l),
        (solver, ..) => {
            let expected = match solver {
                SolverKind::NestaLasso | SolverKind::Apg => "--tau",
                SolverKind::Parnes => "--sigma",
                SolverKind::Fista => "--lambda",
            };
            return Err(CliError::Usage(format!(
                "solver {} takes exactly {expected}",
                solver.name()
            )));
        }
    };
    let eta = args.flags.eta.unwrap_or(DEFAULT_ETA);
    let bundle = load_bundle(&args.bundle)?;
    let (lipschitz, setup) = lipschitz_for(&bundle.op, args.flags.lipschitz)?;
    let x0 = vec![0.0; bundle.op.cols()];
    let op = &bundle.op;
    let b = &bundle.b;

    let mut report = match args.solver {
        SolverKind::NestaLasso => solve_lasso(
            &LassoProblem::new(op, b, value, lipschitz)?,
            &x0,
            &lasso_config(&args.flags, eta),
        )?,
        SolverKind::Apg => apg_no_restart(
            &LassoProblem::new(op, b, value, lipschitz)?,
            &x0,
            &lasso_config(&args.flags, eta),
        )?,
        SolverKind::Parnes => solve_bpdn(
            &BpdnProblem::new(op, b, value, lipschitz)?,
            &parnes_config(&args.flags, eta),
        )?,
        SolverKind::Fista => {
            if args.tol.is_nan() || args.tol < 0.0 {
                return Err(CliError::Usage(format!(
                    "--tol must be >= 0, got {}",
                    args.tol
                )));
            }
            fista_qp_with(
                &QpProblem::new(op, b, value, lipschitz)?,
                &x0,
                args.tol,
                usize::MAX,
                args.flags.max_matvec,
                None,
            )?
        }
    };
    report.setup_matvecs = setup;
    if args.reproducible {
        report.wall_ms = 0.0;
    }
    if let Some(path) = &args.save_x {
        write_f64s(path, &report.x)?;
    }

    let out = solve_output(
        args.solver.name(),
        param,
        value,
        &report,
        lipschitz,
        args.seed.unwrap_or(bundle.spec.seed),
    );
    let text = to_json(&out);
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    Ok(Outcome {
        stdout: text,
        code: if report.finished() { EXIT_OK } else { EXIT_DNC },
    })
}

pub fn solve_output(
    solver: &'static str,
    param: &'static str,
    param_value: f64,
    report: &SolveReport,
    lipschitz: f64,
    seed: u64,
) -> SolveOutput {
    SolveOutput {
        solver,
        param,
        param_value,
        n_forward: report.n_forward,
        n_adjoint: report.n_adjoint,
        n_a: report.n_a(),
        iterations: report.inner_iterations,
        restarts: report.restarts,
        rejected_restarts: report.rejected_restarts,
        newton_iterations: report.newton_iterations,
        final_gap: report.final_gap,
        residual_norm: report.residual_norm,
        x_norm1: report.x_norm1,
        converged: report.converged,
        termination: report.termination,
        setup_matvecs: report.setup_matvecs,
        lipschitz,
        wall_ms: report.wall_ms,
        seed,
    }
}

pub const X_REF_FILE: &str = "x_ref.f64le";
pub const REF_JSON_FILE: &str = "ref.json";

/// Contents of `ref.json`. No timing, so reruns are byte-identical.
#[derive(Debug, Serialize)]
pub struct RefOutput {
    pub source: ReferenceSource,
    pub obj_ref: f64,
    pub tol: f64,
    pub param: &'static str,
    pub param_value: f64,
    #[serde(rename = "N_A")]
    pub n_a: u64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
    pub x_norm1: f64,
    pub lipschitz: f64,
}

pub fn run_reference(args: &ReferenceArgs) -> CliResult<Outcome> {
    let bundle = load_bundle(&args.bundle)?;
    let (lipschitz, _) = lipschitz_for(&bundle.op, args.lipschitz)?;
    let (param, value, tol, reference) = match (args.lambda, args.tau) {
        (Some(lambda), None) => {
            let problem = QpProblem::new(&bundle.op, &bundle.b, lambda, lipschitz)?;
            ("lambda", lambda, REFERENCE_TOL, reference_qp(&problem)?)
        }
        (None, Some(tau)) => {
            let problem = LassoProblem::new(&bundle.op, &bundle.b, tau, lipschitz)?;
            ("tau", tau, LASSO_REFERENCE_TOL, reference_lasso(&problem)?)
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --lambda / --tau".into(),
            ))
        }
    };
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_f64s(&args.out.join(X_REF_FILE), &reference.x_ref)?;
    let report = &reference.report;
    let out = RefOutput {
        source: reference.source,
        obj_ref: reference.obj_ref,
        tol,
        param,
        param_value: value,
        n_a: report.n_a(),
        iterations: report.inner_iterations,
        converged: report.converged,
        residual_norm: report.residual_norm,
        x_norm1: report.x_norm1,
        lipschitz,
    };
    let text = to_json(&out);
    write_text(&args.out.join(REF_JSON_FILE), &text)?;
    Ok(Outcome {
        stdout: text,
        code: if report.converged { EXIT_OK } else { EXIT_DNC },
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
