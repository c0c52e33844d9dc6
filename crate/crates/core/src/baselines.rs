//! Reference and ablation solvers.
//!
//! - [`fista_qp`]: accelerated soft-thresholding for `QP(lambda)`, used to
//!   compute tight reference solutions.
//! - [`apg_no_restart`]: the LASSO iteration of [`crate::nesta_lasso`] with a
//!   single fixed prox-center.
//! - [`stop_rule_bp`] / [`stop_rule_qp`]: the cross-solver stopping rules that
//!   run a solver until it is at least as accurate as a reference point.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nesta_lasso::{
    self, LassoConfig, LassoObserver, LassoProblem, LassoSolution, RestartMode,
};
use crate::operators::{LinearOperator, MatvecLedger};
use crate::report::{SolveReport, Termination};
use crate::vecops::{all_finite, norm1, norm2, norm_inf};

/// Relative objective change at which reference solves stop.
pub const REFERENCE_TOL: f64 = 1e-14;
/// Iteration cap for reference solves; large enough to act as "no limit".
pub const REFERENCE_MAX_ITERS: usize = 2_000_000;
/// Residual slack of the basis-pursuit stopping rule.
pub const BP_RESIDUAL_SLACK: f64 = 1.05;

/// `QP(lambda)`: minimize `0.5 ||Ax - b||^2 + lambda ||x||_1`.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub op: &'a LinearOperator,
    pub b: &'a [f64],
    pub lambda: f64,
    pub lipschitz: f64,
}

impl<'a> QpProblem<'a> {
    pub fn new(op: &'a LinearOperator, b: &'a [f64], lambda: f64, lipschitz: f64) -> Result<Self> {
        if b.len() != op.rows() {
            return Err(Error::DimensionMismatch {
                expected: op.rows(),
                got: b.len(),
            });
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(lipschitz > 0.0) {
            return Err(Error::Domain(format!(
                "L must be positive, got {lipschitz}"
            )));
        }
        Ok(Self {
            op,
            b,
            lambda,
            lipschitz,
        })
    }

    pub fn objective(&self, x: &[f64], residual_norm: f64) -> f64 {
        qp_objective(self.lambda, norm1(x), residual_norm)
    }
}

pub fn qp_objective(lambda: f64, x_norm1: f64, residual_norm: f64) -> f64 {
    lambda * x_norm1 + 0.5 * residual_norm * residual_norm
}

/// `sign(v_i) max(|v_i| - t, 0)`
pub fn soft_threshold(v: &[f64], t: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    soft_threshold_in_place(&mut out, t);
    out
}

fn soft_threshold_in_place(v: &mut [f64], t: f64) {
    for x in v.iter_mut() {
        let m = x.abs() - t;
        *x = if m > 0.0 { x.signum() * m } else { 0.0 };
    }
}

/// Callback seeing every FISTA iterate `x` with its residual `b - A x`;
/// returning `true` stops the solve.
pub type IterateMonitor<'m> = &'m mut dyn FnMut(&[f64], &[f64]) -> bool;

pub fn fista_qp(
    problem: &QpProblem<'_>,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<SolveReport> {
    fista_qp_with(problem, x0, tol, max_iters, u64::MAX, None)
}

/// FISTA with the Beck-Teboulle momentum sequence.
///
/// Tracks `A x_k` so that `A y_k` follows by linear combination: one forward
/// and one adjoint application per iteration plus one forward at the start.
/// Stops when `|F_k - F_{k-1}| <= tol * |F_k|`.
pub fn fista_qp_with(
    problem: &QpProblem<'_>,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
    max_matvec: u64,
    mut monitor: Option<IterateMonitor<'_>>,
) -> Result<SolveReport> {
    let started = Instant::now();
    let n = problem.op.cols();
    let m = problem.op.rows();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let mut ledger = MatvecLedger::new();
    let step = 1.0 / problem.lipschitz;
    let shrink = problem.lambda * step;

    let mut x = x0.to_vec();
    let mut ax = problem.op.apply(&x, &mut ledger)?;
    let mut resid: Vec<f64> = problem.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut obj = problem.objective(&x, norm2(&resid));

    let mut x_prev = x.clone();
    let mut ax_prev = ax.clone();
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut grad = vec![0.0; n];
    let mut ay_minus_b = vec![0.0; m];
    let mut t = 1.0f64;
    let mut change = f64::INFINITY;
    let mut iterations = 0usize;

    let termination = loop {
        if iterations >= max_iters {
            break Termination::MaxIterations;
        }
        if ledger.total() + 2 > max_matvec {
            break Termination::BudgetExhausted;
        }
        for ((o, a), b) in ay_minus_b.iter_mut().zip(&ay).zip(problem.b) {
            *o = a - b;
        }
        problem
            .op
            .apply_adjoint_into(&ay_minus_b, &mut grad, &mut ledger)?;

        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut ax_prev, &mut ax);
        for ((xi, yi), gi) in x.iter_mut().zip(&y).zip(&grad) {
            *xi = yi - step * gi;
        }
        soft_threshold_in_place(&mut x, shrink);
        problem.op.apply_into(&x, &mut ax, &mut ledger)?;
        for ((r, b), a) in resid.iter_mut().zip(problem.b).zip(&ax) {
            *r = b - a;
        }
        iterations += 1;

        let new_obj = problem.objective(&x, norm2(&resid));
        if !new_obj.is_finite() || !all_finite(&x) {
            return Err(Error::NumericalFailure(format!(
                "non-finite FISTA iterate at iteration {iterations}"
            )));
        }
        change = (new_obj - obj).abs() / new_obj.abs().max(f64::MIN_POSITIVE);
        obj = new_obj;

        if let Some(mon) = monitor.as_mut() {
            if mon(&x, &resid) {
                break Termination::Monitor;
            }
        }
        if change <= tol {
            break Termination::Converged;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        t = t_next;
        for ((yi, xi), pi) in y.iter_mut().zip(&x).zip(&x_prev) {
            *yi = xi + beta * (xi - pi);
        }
        for ((ayi, axi), api) in ay.iter_mut().zip(&ax).zip(&ax_prev) {
            *ayi = axi + beta * (axi - api);
        }
    };

    Ok(SolveReport {
        residual_norm: norm2(&resid),
        x_norm1: norm1(&x),
        final_gap: change,
        n_forward: ledger.n_forward,
        n_adjoint: ledger.n_adjoint,
        setup_matvecs: 0,
        inner_iterations: iterations,
        restarts: 0,
        rejected_restarts: 0,
        newton_iterations: 0,
        converged: termination == Termination::Converged,
        termination,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        x,
    })
}

/// The LASSO iteration with a single prox-center `x0` and the same
/// duality-gap termination as [`nesta_lasso::solve_lasso`].
pub fn apg_no_restart(
    problem: &LassoProblem<'_>,
    x0: &[f64],
    config: &LassoConfig,
) -> Result<SolveReport> {
    Ok(apg_no_restart_with(problem, x0, config, &mut nesta_lasso::NoObserver)?.report)
}

pub fn apg_no_restart_with(
    problem: &LassoProblem<'_>,
    x0: &[f64],
    config: &LassoConfig,
    observer: &mut dyn LassoObserver,
) -> Result<LassoSolution> {
    nesta_lasso::run(problem, x0, config, RestartMode::Never, observer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    FistaTight,
    LongRunLasso,
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x_ref: Vec<f64>,
    /// QP objective for `FistaTight`, residual norm for `LongRunLasso`.
    pub obj_ref: f64,
    pub source: ReferenceSource,
    pub report: SolveReport,
}

/// FISTA from zero until the relative objective change is at most `1e-14`.
pub fn reference_qp(problem: &QpProblem<'_>) -> Result<ReferenceSolution> {
    let x0 = vec![0.0; problem.op.cols()];
    let report = fista_qp(problem, &x0, REFERENCE_TOL, REFERENCE_MAX_ITERS)?;
    let obj_ref = problem.objective(&report.x, report.residual_norm);
    Ok(ReferenceSolution {
        x_ref: report.x.clone(),
        obj_ref,
        source: ReferenceSource::FistaTight,
        report,
    })
}

/// Long-run `LS(tau)` solve to a `1e-12` duality gap.
pub fn reference_lasso(problem: &LassoProblem<'_>) -> Result<ReferenceSolution> {
    let x0 = vec![0.0; problem.op.cols()];
    let config = LassoConfig {
        eta: 1e-12,
        max_matvec: u64::MAX,
        ..LassoConfig::default()
    };
    let report = nesta_lasso::solve_lasso(problem, &x0, &config)?;
    Ok(ReferenceSolution {
        x_ref: report.x.clone(),
        obj_ref: report.residual_norm,
        source: ReferenceSource::LongRunLasso,
        report,
    })
}

/// Summary of a reference point used by the stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopReference {
    pub x_norm1: f64,
    pub residual_norm: f64,
}

impl StopReference {
    pub fn from_point(op: &LinearOperator, b: &[f64], x_ref: &[f64]) -> Result<Self> {
        let residual_norm = residual_norm(op, b, x_ref)?;
        Ok(Self {
            x_norm1: norm1(x_ref),
            residual_norm,
        })
    }

    pub fn qp_objective(&self, lambda: f64) -> f64 {
        qp_objective(lambda, self.x_norm1, self.residual_norm)
    }
}

fn residual_norm(op: &LinearOperator, b: &[f64], x: &[f64]) -> Result<f64> {
    let ax = op.apply(x, &mut MatvecLedger::new())?;
    Ok(b.iter()
        .zip(&ax)
        .map(|(b, a)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt())
}

/// A cross-solver stopping rule against a reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// `||x||_1 <= ||x_ref||_1` and `||b - Ax|| <= 1.05 ||b - A x_ref||`.
    Bp,
    /// `lambda ||x||_1 + 0.5 ||Ax - b||^2` no larger than at the reference.
    Qp { lambda: f64 },
}

impl StopRule {
    pub fn satisfied(&self, x_norm1: f64, residual_norm: f64, reference: &StopReference) -> bool {
        match *self {
            StopRule::Bp => {
                x_norm1 <= reference.x_norm1
                    && residual_norm <= BP_RESIDUAL_SLACK * reference.residual_norm
            }
            StopRule::Qp { lambda } => {
                qp_objective(lambda, x_norm1, residual_norm) <= reference.qp_objective(lambda)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StopRule::Bp => "bp",
            StopRule::Qp { .. } => "qp",
        }
    }
}

/// Basis-pursuit stopping rule on explicit vectors (applications not counted).
pub fn stop_rule_bp(x_hat: &[f64], x_ref: &[f64], op: &LinearOperator, b: &[f64]) -> Result<bool> {
    let reference = StopReference::from_point(op, b, x_ref)?;
    let r_hat = residual_norm(op, b, x_hat)?;
    Ok(StopRule::Bp.satisfied(norm1(x_hat), r_hat, &reference))
}

/// Penalized-objective stopping rule on explicit vectors.
pub fn stop_rule_qp(
    x_hat: &[f64],
    x_ref: &[f64],
    lambda: f64,
    op: &LinearOperator,
    b: &[f64],
) -> Result<bool> {
    let reference = StopReference::from_point(op, b, x_ref)?;
    let r_hat = residual_norm(op, b, x_hat)?;
    Ok(StopRule::Qp { lambda }.satisfied(norm1(x_hat), r_hat, &reference))
}

/// Observer that stops a LASSO-type solve once a stopping rule holds at `x_k`.
pub struct StopRuleObserver {
    pub rule: StopRule,
    pub reference: StopReference,
    pub triggered: bool,
}

impl StopRuleObserver {
    pub fn new(rule: StopRule, reference: StopReference) -> Self {
        Self {
            rule,
            reference,
            triggered: false,
        }
    }

    pub fn check(&mut self, x: &[f64], residual: &[f64]) -> bool {
        if self
            .rule
            .satisfied(norm1(x), norm2(residual), &self.reference)
        {
            self.triggered = true;
        }
        self.triggered
    }
}

impl LassoObserver for StopRuleObserver {
    fn inner_step(&mut self, state: &nesta_lasso::LassoState) -> bool {
        self.check(&state.x, &state.r)
    }
}

/// `||A^T b||_inf`, the smallest `lambda` for which `x = 0` solves `QP(lambda)`.
pub fn lambda_max(op: &LinearOperator, b: &[f64]) -> Result<f64> {
    Ok(norm_inf(&op.apply_adjoint(b, &mut MatvecLedger::new())?))
}
