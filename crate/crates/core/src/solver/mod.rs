//! Small convex solvers for the two subproblem families of the pipeline:
//! log-affine objectives over trace-budgeted PSD matrices ([`sdp`]) and
//! linear objectives over a chain of waypoints with ball constraints
//! ([`chain`]). Callers go through [`solve_log_affine_sdp`] and
//! [`solve_chain_socp`], which dispatch to a [`Backend`].

pub mod chain;
pub mod projection;
pub mod sdp;

use serde::Serialize;

use crate::linalg::CMat;
use crate::scenario::AlgorithmParams;
use crate::Point2;

pub use chain::ChainSocpProblem;
pub use projection::{project_psd_group, project_psd_trace};
pub use sdp::{BudgetGroup, LinearConstraint, LogAffineSdpProblem, LogTerm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub objective: f64,
    pub iterations: usize,
    /// Largest absolute shortfall on any inequality (0 when all hold).
    pub max_violation: f64,
    /// Gradient-mapping norm (SDP) or duality-gap bound (chain).
    pub stationarity: f64,
    /// Index of the worst violated constraint when infeasible.
    pub violated_constraint: Option<usize>,
    /// Best attainable value of the violated constraint, when known.
    pub max_attainable: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl From<&AlgorithmParams> for SolveOptions {
    fn from(p: &AlgorithmParams) -> Self {
        SolveOptions {
            tol: p.solver_tol,
            max_iters: p.max_inner_iters,
        }
    }
}

/// Seam for swapping in another numerical backend.
pub trait Backend: Sync {
    fn solve_sdp(
        &self,
        problem: &LogAffineSdpProblem,
        start: Option<&[CMat]>,
        opts: &SolveOptions,
    ) -> (Vec<CMat>, SolverReport);

    fn solve_chain(&self, problem: &ChainSocpProblem, opts: &SolveOptions)
        -> (Vec<Point2>, SolverReport);
}

/// Projected gradient for the SDPs, log-barrier Newton for the chains.
#[derive(Clone, Copy, Debug, Default)]
pub struct NativeBackend;

impl Backend for NativeBackend {
    fn solve_sdp(
        &self,
        problem: &LogAffineSdpProblem,
        start: Option<&[CMat]>,
        opts: &SolveOptions,
    ) -> (Vec<CMat>, SolverReport) {
        sdp::solve(problem, start, opts)
    }

    fn solve_chain(
        &self,
        problem: &ChainSocpProblem,
        opts: &SolveOptions,
    ) -> (Vec<Point2>, SolverReport) {
        chain::solve(problem, opts)
    }
}

pub fn solve_log_affine_sdp(
    problem: &LogAffineSdpProblem,
    start: Option<&[CMat]>,
    params: &AlgorithmParams,
) -> (Vec<CMat>, SolverReport) {
    NativeBackend.solve_sdp(problem, start, &params.into())
}

pub fn solve_chain_socp(
    problem: &ChainSocpProblem,
    params: &AlgorithmParams,
) -> (Vec<Point2>, SolverReport) {
    NativeBackend.solve_chain(problem, &params.into())
}

/// Running totals over many solves, reported in run summaries.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub solves: usize,
    pub iterations: usize,
    pub max_iters_hits: usize,
    pub infeasible: usize,
    pub worst_violation: f64,
}

impl SolverStats {
    pub fn record(&mut self, r: &SolverReport) {
        self.solves += 1;
        self.iterations += r.iterations;
        match r.status {
            SolverStatus::Optimal => {}
            SolverStatus::MaxIters => self.max_iters_hits += 1,
            SolverStatus::Infeasible => self.infeasible += 1,
        }
        self.worst_violation = self.worst_violation.max(r.max_violation);
    }

    pub fn merge(&mut self, other: &SolverStats) {
        self.solves += other.solves;
        self.iterations += other.iterations;
        self.max_iters_hits += other.max_iters_hits;
        self.infeasible += other.infeasible;
        self.worst_violation = self.worst_violation.max(other.worst_violation);
    }
}
