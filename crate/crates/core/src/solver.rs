//! Interchangeable routes to the moment trajectory, selected by name.

use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::dynamics::{self, DynamicsError, MomentState, MomentSystem, SteadyOptions, Trajectory};
use crate::integrate::{DormandPrince, IntegratorOptions};
use crate::oracle::{self, OracleError, OracleOptions};
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("unknown solver '{0}'")]
    Unknown(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Settings read by the solvers; each uses the fields that apply to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub cutoff: usize,
    pub oracle: OracleOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, cutoff: 6, oracle: OracleOptions::default() }
    }
}

pub trait MomentSolver: Send + Sync {
    fn name(&self) -> &'static str;
    /// Moments from the two-mode vacuum at each of `times`.
    fn trajectory(&self, p: &SystemParams, times: &[f64]) -> Result<Trajectory, SolverError>;
    /// Long-time moments.
    fn steady(&self, p: &SystemParams) -> Result<MomentState, SolverError>;
}

/// Adaptive integration of the moment ODE.
pub struct OdeSolver(SolverOptions);

impl MomentSolver for OdeSolver {
    fn name(&self) -> &'static str {
        "ode"
    }

    fn trajectory(&self, p: &SystemParams, times: &[f64]) -> Result<Trajectory, SolverError> {
        let integ =
            DormandPrince::new(IntegratorOptions { rtol: self.0.rtol, atol: self.0.atol, ..Default::default() });
        Ok(dynamics::evolve_on(&MomentSystem::new(*p), times, &integ)?)
    }

    fn steady(&self, p: &SystemParams) -> Result<MomentState, SolverError> {
        Ok(dynamics::steady_from_ode(p, &SteadyOptions { rtol: self.0.rtol, atol: self.0.atol, ..Default::default() })?)
    }
}

/// Closed-form means and residue thermal weights.
pub struct AnalyticSolver;

impl MomentSolver for AnalyticSolver {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn trajectory(&self, p: &SystemParams, times: &[f64]) -> Result<Trajectory, SolverError> {
        Ok(analytic::analytic_trajectory(p, times)?)
    }

    fn steady(&self, p: &SystemParams) -> Result<MomentState, SolverError> {
        Ok(analytic::steady_moments(p)?)
    }
}

/// Truncated Fock-space master equation; only sensible at small drive.
pub struct FockSolver(SolverOptions);

/// Horizon for the Fock route's steady state, in units of `1/alpha`.
const FOCK_STEADY_HORIZON: f64 = 60.0;

impl MomentSolver for FockSolver {
    fn name(&self) -> &'static str {
        "fock"
    }

    fn trajectory(&self, p: &SystemParams, times: &[f64]) -> Result<Trajectory, SolverError> {
        let tr = oracle::oracle_evolve_on(p, self.0.cutoff, times, &self.0.oracle)?;
        Ok(Trajectory { times: tr.times, states: tr.states.iter().map(oracle::oracle_moments).collect() })
    }

    fn steady(&self, p: &SystemParams) -> Result<MomentState, SolverError> {
        let t = FOCK_STEADY_HORIZON / p.alpha();
        Ok(self.trajectory(p, &[t])?.states[0])
    }
}

type SolverCtor = fn(SolverOptions) -> Box<dyn MomentSolver>;

pub static SOLVERS: &[(&str, SolverCtor)] = &[
    ("ode", |o| Box::new(OdeSolver(o))),
    ("analytic", |_| Box::new(AnalyticSolver)),
    ("fock", |o| Box::new(FockSolver(o))),
];

pub fn solver_by_name(name: &str, opts: SolverOptions) -> Result<Box<dyn MomentSolver>, SolverError> {
    SOLVERS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(opts))
        .ok_or_else(|| SolverError::Unknown(name.to_string()))
}

pub fn solver_names() -> impl Iterator<Item = &'static str> {
    SOLVERS.iter().map(|(n, _)| *n)
}
