use serde::{Deserialize, Serialize};

use crate::operators::MatvecLedger;

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    /// The matvec budget would be exceeded (reported as DNC).
    BudgetExhausted,
    MaxIterations,
    /// An iterate monitor (e.g. a cross-solver stopping rule) asked to stop.
    Monitor,
    /// Trivial problem answered without iterating.
    Trivial,
}

/// Solution plus convergence telemetry, shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub x_norm1: f64,
    /// Duality gap for the LASSO-type solvers, relative objective change for FISTA.
    pub final_gap: f64,
    pub n_forward: u64,
    pub n_adjoint: u64,
    /// Setup applications (e.g. Lipschitz estimation) not counted in `N_A`.
    pub setup_matvecs: u64,
    pub inner_iterations: usize,
    pub restarts: usize,
    pub rejected_restarts: usize,
    pub newton_iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub wall_ms: f64,
}

impl SolveReport {
    pub fn n_a(&self) -> u64 {
        self.n_forward + self.n_adjoint
    }

    pub fn ledger(&self) -> MatvecLedger {
        MatvecLedger {
            n_forward: self.n_forward,
            n_adjoint: self.n_adjoint,
        }
    }

    /// Counts as success for benchmarking: converged on the solver's own
    /// criterion, stopped by a satisfied monitor, or trivially solved.
    pub fn finished(&self) -> bool {
        matches!(
            self.termination,
            Termination::Converged | Termination::Monitor | Termination::Trivial
        )
    }
}
