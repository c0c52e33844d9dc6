//! Basis pursuit denoising by root finding on the Pareto curve.
//!
//! `phi(tau)` is the optimal residual norm of `LS(tau)`. It is convex and
//! nonincreasing with slope `-||A^T r_tau||_inf / ||r_tau||_2`, so the root of
//! `phi(tau) = sigma` is found with Newton's method starting from `tau = 0`.
//! Each evaluation of `phi` is an inexact [`solve_lasso`](crate::nesta_lasso)
//! warm-started from the previous solution, with a gap tolerance that
//! tightens as the residual approaches `sigma`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::l1proj::project_l1_in_place;
use crate::nesta_lasso::{solve_lasso_with, LassoConfig, LassoObserver, LassoProblem, NoObserver};
use crate::operators::{LinearOperator, MatvecLedger};
use crate::report::{SolveReport, Termination};
use crate::vecops::{all_finite, norm1, norm2, norm_inf};

/// Slopes at or above this are treated as a flat curve.
pub const FLAT_SLOPE: f64 = -1e-14;

#[derive(Debug, Clone, Copy)]
pub struct BpdnProblem<'a> {
    pub op: &'a LinearOperator,
    pub b: &'a [f64],
    pub sigma: f64,
    pub lipschitz: f64,
}

impl<'a> BpdnProblem<'a> {
    pub fn new(op: &'a LinearOperator, b: &'a [f64], sigma: f64, lipschitz: f64) -> Result<Self> {
        if b.len() != op.rows() {
            return Err(Error::DimensionMismatch {
                expected: op.rows(),
                got: b.len(),
            });
        }
        if !all_finite(b) {
            return Err(Error::Domain(
                "observation vector has non-finite entries".into(),
            ));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "sigma must be finite and >= 0, got {sigma}"
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
            sigma,
            lipschitz,
        })
    }

    fn lasso(&self, tau: f64) -> LassoProblem<'a> {
        LassoProblem {
            op: self.op,
            b: self.b,
            tau,
            lipschitz: self.lipschitz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParnesConfig {
    /// Root tolerance: stop once `||r|| - sigma <= eta * max(1, ||r||)`.
    pub eta: f64,
    pub newton_max: usize,
    /// Inner solver settings; `inner.eta` is the floor of the gap schedule.
    pub inner: LassoConfig,
    /// Global budget across all inner solves.
    pub max_matvec: u64,
    /// Inner gap tolerance is `max(inner.eta, factor * min(1, |phi_k - sigma|))`.
    pub inner_tol_factor: f64,
}

impl Default for ParnesConfig {
    fn default() -> Self {
        Self::with_eta(1e-6)
    }
}

impl ParnesConfig {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            newton_max: 30,
            inner: LassoConfig {
                eta: 0.1 * eta,
                ..LassoConfig::default()
            },
            max_matvec: 20_000,
            inner_tol_factor: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || self.newton_max == 0 || self.max_matvec == 0 {
            return Err(Error::Domain("PARNES settings must be positive".into()));
        }
        if !(self.inner_tol_factor > 0.0) {
            return Err(Error::Domain(
                "inner tolerance factor must be positive".into(),
            ));
        }
        self.inner.validate()
    }
}

/// One evaluation of the Pareto curve.
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub tau: f64,
    /// `||A x_tau - b||_2`
    pub phi: f64,
    /// `-||A^T r||_inf / ||r||_2`
    pub dphi: f64,
    /// Duality gap of the inner solve at the returned point.
    pub gap: f64,
    /// The inner solve did not reach its tolerance.
    pub stale: bool,
    pub report: SolveReport,
}

/// Approximates `phi(tau)` and its slope by solving `LS(tau)` from `warm`
/// (projected onto the tau-ball first).
pub fn pareto_eval(
    problem: &BpdnProblem<'_>,
    tau: f64,
    warm: &[f64],
    inner: &LassoConfig,
) -> Result<ParetoPoint> {
    pareto_eval_with(problem, tau, warm, inner, &mut NoObserver)
}

pub fn pareto_eval_with(
    problem: &BpdnProblem<'_>,
    tau: f64,
    warm: &[f64],
    inner: &LassoConfig,
    observer: &mut dyn LassoObserver,
) -> Result<ParetoPoint> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("tau must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return origin_point(problem);
    }
    let mut x0 = warm.to_vec();
    project_l1_in_place(&mut x0, tau)?;
    let lasso = problem.lasso(tau);
    let sol = solve_lasso_with(&lasso, &x0, inner, observer)?;
    let phi = norm2(&sol.residual);
    let dphi = if phi > 0.0 { -sol.dual_norm / phi } else { 0.0 };
    Ok(ParetoPoint {
        tau,
        phi,
        dphi,
        gap: sol.report.final_gap,
        stale: !sol.report.finished(),
        report: sol.report,
    })
}

/// The curve's left endpoint: `x = 0`, one adjoint application for the slope.
fn origin_point(problem: &BpdnProblem<'_>) -> Result<ParetoPoint> {
    let started = Instant::now();
    let mut ledger = MatvecLedger::new();
    let atb = problem.op.apply_adjoint(problem.b, &mut ledger)?;
    let phi = norm2(problem.b);
    let dphi = if phi > 0.0 {
        -norm_inf(&atb) / phi
    } else {
        0.0
    };
    Ok(ParetoPoint {
        tau: 0.0,
        phi,
        dphi,
        gap: 0.0,
        stale: false,
        report: SolveReport {
            x: vec![0.0; problem.op.cols()],
            residual_norm: phi,
            x_norm1: 0.0,
            final_gap: 0.0,
            n_forward: ledger.n_forward,
            n_adjoint: ledger.n_adjoint,
            setup_matvecs: 0,
            inner_iterations: 0,
            restarts: 0,
            rejected_restarts: 0,
            newton_iterations: 0,
            converged: true,
            termination: Termination::Converged,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// `max(0, tau + (sigma - phi) / dphi)`.
pub fn newton_step(tau: f64, phi: f64, dphi: f64, sigma: f64) -> Result<f64> {
    if !(dphi < FLAT_SLOPE) {
        return Err(Error::FlatCurve { tau, slope: dphi });
    }
    Ok((tau + (sigma - phi) / dphi).max(0.0))
}

/// The `QP(lambda)` multiplier matching a Pareto point: `||A^T r||_inf`.
pub fn lambda_from_dual(point: &ParetoPoint) -> Result<f64> {
    if !(point.phi > 0.0) {
        return Err(Error::UndefinedMultiplier);
    }
    Ok(-point.dphi * point.phi)
}

#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub report: SolveReport,
    /// Every evaluated point, starting with `tau = 0`.
    pub trace: Vec<ParetoPoint>,
}

impl BpdnSolution {
    pub fn last_point(&self) -> &ParetoPoint {
        self.trace.last().expect("trace always holds the origin")
    }
}

fn root_reached(phi: f64, sigma: f64, eta: f64) -> bool {
    phi - sigma <= eta * phi.max(1.0) && phi >= sigma - eta
}

pub fn solve_bpdn(problem: &BpdnProblem<'_>, config: &ParnesConfig) -> Result<SolveReport> {
    Ok(solve_bpdn_with(problem, config, &mut NoObserver)?.report)
}

pub fn solve_bpdn_with(
    problem: &BpdnProblem<'_>,
    config: &ParnesConfig,
    observer: &mut dyn LassoObserver,
) -> Result<BpdnSolution> {
    config.validate()?;
    let started = Instant::now();
    let n = problem.op.cols();
    let sigma = problem.sigma;
    let b_norm = norm2(problem.b);

    let finish = |x: Vec<f64>,
                  phi: f64,
                  gap: f64,
                  ledger: MatvecLedger,
                  inner: usize,
                  restarts: (usize, usize),
                  newton: usize,
                  termination: Termination| SolveReport {
        residual_norm: phi,
        x_norm1: norm1(&x),
        final_gap: gap,
        n_forward: ledger.n_forward,
        n_adjoint: ledger.n_adjoint,
        setup_matvecs: 0,
        inner_iterations: inner,
        restarts: restarts.0,
        rejected_restarts: restarts.1,
        newton_iterations: newton,
        converged: matches!(termination, Termination::Converged | Termination::Trivial),
        termination,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        x,
    };

    if sigma >= b_norm {
        let report = finish(
            vec![0.0; n],
            b_norm,
            0.0,
            MatvecLedger::new(),
            0,
            (0, 0),
            0,
            Termination::Trivial,
        );
        return Ok(BpdnSolution {
            report,
            trace: Vec::new(),
        });
    }

    let mut ledger = MatvecLedger::new();
    let mut inner_total = 0usize;
    let mut restarts = (0usize, 0usize);
    let origin = origin_point(problem)?;
    ledger.absorb(&origin.report.ledger());
    let mut trace = vec![origin];

    for newton in 1..=config.newton_max {
        let current = trace.last().expect("nonempty");
        let tau = newton_step(current.tau, current.phi, current.dphi, sigma)?;
        let remaining = config.max_matvec.saturating_sub(ledger.total());
        if remaining < 2 {
            let cur = trace.last().expect("nonempty");
            let report = finish(
                cur.report.x.clone(),
                cur.phi,
                cur.gap,
                ledger,
                inner_total,
                restarts,
                newton - 1,
                Termination::BudgetExhausted,
            );
            return Ok(BpdnSolution { report, trace });
        }
        let inner = LassoConfig {
            eta: config
                .inner
                .eta
                .max(config.inner_tol_factor * (current.phi - sigma).abs().min(1.0)),
            max_matvec: remaining,
            ..config.inner
        };
        let warm = current.report.x.clone();
        let point = pareto_eval_with(problem, tau, &warm, &inner, observer)?;
        ledger.absorb(&point.report.ledger());
        inner_total += point.report.inner_iterations;
        restarts.0 += point.report.restarts;
        restarts.1 += point.report.rejected_restarts;

        let termination = match point.report.termination {
            Termination::Monitor => Some(Termination::Monitor),
            Termination::BudgetExhausted => Some(Termination::BudgetExhausted),
            _ if root_reached(point.phi, sigma, config.eta) => Some(Termination::Converged),
            _ => None,
        };
        let phi = point.phi;
        let gap = point.gap;
        let x = point.report.x.clone();
        trace.push(point);
        if let Some(termination) = termination {
            let report = finish(
                x,
                phi,
                gap,
                ledger,
                inner_total,
                restarts,
                newton,
                termination,
            );
            return Ok(BpdnSolution { report, trace });
        }
    }

    let cur = trace.last().expect("nonempty");
    let report = finish(
        cur.report.x.clone(),
        cur.phi,
        cur.gap,
        ledger,
        inner_total,
        restarts,
        config.newton_max,
        Termination::MaxIterations,
    );
    Ok(BpdnSolution { report, trace })
}
