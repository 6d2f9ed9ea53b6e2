//! Log-barrier interior-point solver for the link design problem, plus a
//! brute-force lattice oracle and axis sensitivity scans.

mod barrier;
pub mod fd;
mod grid;
mod jet;
mod kkt;
mod phase_one;
mod report;
mod sensitivity;

use std::ops::Neg;

use nalgebra::{DMatrix, DVector};

use crate::kinematics::{knee_angle, singularity_margin, LinkSet};
use crate::problem::{ConstraintCategory, DesignProblem, DesignVector, DIM};
use crate::{Error, Result};

pub use barrier::StageEnd;
pub use grid::{grid_search, GridResult};
pub use phase_one::{phase_one, PHASE_ONE_MARGIN};
pub use report::{write_constraint_csv, write_text_report, write_trace_csv};
pub use sensitivity::{sensitivity_scan, ScanAxis, SensitivityScan};

use barrier::{run_stage, BarrierModel};

/// Scaled stationarity residual under which a solve counts as converged.
pub const KKT_TOL: f64 = 1e-4;

/// Slack (in unscaled constraint units) under which a constraint is
/// reported as active.
pub const ACTIVE_TOL: f64 = 1e-3;

/// Constraint violation tolerated in a converged report.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub mu0: f64,
    pub mu_shrink: f64,
    pub mu_min: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Central-difference step relative to `max(|x_i|, 1)`, used when
    /// `derivatives` is [`Derivatives::CentralDifference`].
    pub fd_step_rel: f64,
    pub derivatives: Derivatives,
}

/// How the objective's gradient and Hessian are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Derivatives {
    /// Forward-mode propagation through the knee-angle formulas.
    #[default]
    Forward,
    /// Central differences with steps `fd_step_rel · max(|x_i|, 1)`, capped
    /// near the singular stroke. Converges slowly once the singularity
    /// constraint is nearly active.
    CentralDifference,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_shrink: 0.1,
            mu_min: 1e-8,
            inner_tol: 1e-8,
            max_inner: 200,
            armijo_c: 1e-4,
            backtrack: 0.5,
            fd_step_rel: 1e-6,
            derivatives: Derivatives::Forward,
        }
    }
}

impl BarrierParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidArgument(format!("barrier parameter {what} = {v} out of range")))
        };
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad("mu0", self.mu0);
        }
        if !(self.mu_shrink > 0.0 && self.mu_shrink < 1.0) {
            return bad("mu_shrink", self.mu_shrink);
        }
        if !(self.mu_min > 0.0 && self.mu_min <= self.mu0) {
            return bad("mu_min", self.mu_min);
        }
        if !(self.inner_tol > 0.0) {
            return bad("inner_tol", self.inner_tol);
        }
        if self.max_inner == 0 {
            return bad("max_inner", 0.0);
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c", self.armijo_c);
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack", self.backtrack);
        }
        if !(self.fd_step_rel > 0.0) {
            return bad("fd_step_rel", self.fd_step_rel);
        }
        Ok(())
    }

    /// Barrier weights of every stage, from `mu0` down to `mu_min`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut mu = self.mu0;
        loop {
            out.push(mu);
            if mu <= self.mu_min * (1.0 + 1e-9) {
                break;
            }
            mu = (mu * self.mu_shrink).max(self.mu_min);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub mu: f64,
    pub iterations: usize,
    pub end: StageEnd,
    pub theta_deg: f64,
    pub kkt_residual: f64,
    pub grad_norm: f64,
    /// Merit at the stage start and after each accepted step.
    pub merits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintActivity {
    pub label: String,
    pub category: ConstraintCategory,
    pub value: f64,
    pub slack: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Strictly feasible point returned by phase one.
    pub x_start: DesignVector,
    pub theta_start: f64,
    pub x_star: DesignVector,
    pub theta_star: f64,
    pub stages: Vec<StageRecord>,
    pub kkt_residual: f64,
    pub constraints: Vec<ConstraintActivity>,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn active_constraints(&self) -> impl Iterator<Item = &ConstraintActivity> {
        self.constraints.iter().filter(|c| c.active)
    }

    pub fn constraint(&self, label: &str) -> Option<&ConstraintActivity> {
        self.constraints.iter().find(|c| c.label == label)
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

/// Knee angle at minimum stroke where it is a smooth function of the links:
/// the actuator triangle strictly closes.
pub(crate) fn smooth_theta(problem: &DesignProblem, x: &[f64]) -> Option<f64> {
    let links = LinkSet::from_slice(x).ok()?;
    if !(singularity_margin(&links, problem.d_min()) > 0.0) {
        return None;
    }
    let k = knee_angle(&links, problem.d_min()).ok()?;
    k.theta_deg.is_finite().then_some(k.theta_deg)
}

/// Finite-difference steps for `θ`, capped so a stencil moves the
/// singularity margin by at most a tenth of its value.
pub(crate) fn theta_steps(problem: &DesignProblem, x: &DVector<f64>, rel: f64) -> Vec<f64> {
    let mut steps = fd::relative_steps(x, rel);
    let l7 = x[4].hypot(x[5]);
    let margin = x[1] + problem.d_min() - l7;
    if margin > 0.0 {
        let sensitivity = [0.0, 1.0, 0.0, 0.0, x[4] / l7, x[5] / l7];
        for (h, s) in steps.iter_mut().zip(sensitivity) {
            if s != 0.0 {
                *h = h.min(0.01 * margin / s.abs());
            }
        }
    }
    steps
}

/// Minimise `−θ` over the design problem.
pub(crate) struct DesignModel<'a> {
    pub problem: &'a DesignProblem,
    pub fd_step_rel: f64,
    pub derivatives: Derivatives,
}

impl DesignModel<'_> {
    pub fn neg_theta(&self, z: &DVector<f64>) -> Option<f64> {
        smooth_theta(self.problem, z.as_slice()).map(|t| -t)
    }

    pub fn theta_gradient(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        if self.derivatives == Derivatives::Forward {
            self.neg_theta(z)?;
            let j = jet::theta_jet(&as_array(z), self.problem.d_min())?;
            return Some(DVector::from_row_slice(&j.g));
        }
        let steps = theta_steps(self.problem, z, self.fd_step_rel);
        fd::central_gradient(&|p: &DVector<f64>| self.neg_theta(p), z, &steps).map(|g| -g)
    }
}

impl BarrierModel for DesignModel<'_> {
    fn num_constraints(&self) -> usize {
        self.problem.constraints().len()
    }

    fn objective(&self, z: &DVector<f64>) -> Option<f64> {
        self.neg_theta(z)
    }

    fn objective_derivatives(&self, z: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        self.neg_theta(z)?;
        match self.derivatives {
            Derivatives::Forward => {
                let j = jet::theta_jet(&as_array(z), self.problem.d_min())?;
                Some((
                    DVector::from_row_slice(&j.g).neg(),
                    DMatrix::from_fn(DIM, DIM, |r, k| -j.h[r][k]),
                ))
            }
            Derivatives::CentralDifference => {
                let steps = theta_steps(self.problem, z, self.fd_step_rel);
                fd::central_gradient_hessian(&|p: &DVector<f64>| self.neg_theta(p), z, &steps)
            }
        }
    }

    fn constraint(&self, i: usize, z: &DVector<f64>) -> f64 {
        self.problem.constraints()[i].value(&as_array(z))
    }

    fn constraint_gradient(&self, i: usize, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_row_slice(&self.problem.constraints()[i].gradient(&as_array(z)))
    }

    fn constraint_hessian(&self, i: usize, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let c = &self.problem.constraints()[i];
        if c.is_linear() {
            return None;
        }
        let h = c.hessian(&as_array(z));
        Some(DMatrix::from_fn(DIM, DIM, |r, k| h[r][k]))
    }
}

pub(crate) fn as_array(z: &DVector<f64>) -> [f64; DIM] {
    let mut x = [0.0; DIM];
    x.copy_from_slice(&z.as_slice()[..DIM]);
    x
}

fn activities(problem: &DesignProblem, x: &[f64; DIM]) -> Vec<ConstraintActivity> {
    problem
        .constraints()
        .iter()
        .map(|c| {
            let value = c.value(x);
            ConstraintActivity {
                label: c.label().to_string(),
                category: c.category(),
                value,
                slack: -value,
                active: -value / c.scale() <= ACTIVE_TOL,
            }
        })
        .collect()
}

/// Maximises the knee angle at minimum stroke, starting from `x0`.
///
/// Runs phase one first, then barrier stages `μ = mu0, mu0·mu_shrink, …`
/// down to `mu_min`, each minimising `−θ(x) − μ Σ ln(−g_i(x))`.
pub fn solve(problem: &DesignProblem, x0: &[f64; DIM], params: &BarrierParams) -> Result<SolveReport> {
    params.validate()?;
    let x_start = phase_one(problem, x0, params)?;
    let theta_start = problem.objective_value(&x_start.0)?;

    let model = DesignModel {
        problem,
        fd_step_rel: params.fd_step_rel,
        derivatives: params.derivatives,
    };
    let mut z = DVector::from_row_slice(&x_start.0);
    let mut stages = Vec::new();
    for mu in params.schedule() {
        let out = run_stage(&model, &z, mu, params, &|_| false);
        z = out.z;
        let x = as_array(&z);
        stages.push(StageRecord {
            mu,
            iterations: out.iterations,
            end: out.end,
            theta_deg: problem.objective_value(&x)?,
            kkt_residual: kkt::stationarity_residual(&model, &z, mu),
            grad_norm: out.grad_norm,
            merits: out.merits,
        });
        log::debug!(
            "stage mu={mu:e}: {} iterations, {:?}, theta={}",
            out.iterations,
            out.end,
            stages.last().map(|s| s.theta_deg).unwrap_or(f64::NAN)
        );
    }

    let x_star = as_array(&z);
    let theta_star = problem.objective_value(&x_star)?;
    let last = stages.last().expect("schedule has at least one stage");
    let kkt_residual = last.kkt_residual;
    let constraints = activities(problem, &x_star);
    let worst = problem
        .constraints()
        .iter()
        .map(|c| c.value(&x_star) / c.scale())
        .fold(f64::NEG_INFINITY, f64::max);
    let converged = last.mu <= params.mu_min * (1.0 + 1e-9)
        && matches!(last.end, StageEnd::Tolerance | StageEnd::Stalled)
        && kkt_residual <= KKT_TOL
        && worst <= VIOLATION_TOL;

    Ok(SolveReport {
        x_start,
        theta_start,
        x_star: DesignVector(x_star),
        theta_star,
        stages,
        kkt_residual,
        constraints,
        status: if converged {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIterations
        },
    })
}
