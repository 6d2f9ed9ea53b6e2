//! Feasibility phase: find a point strictly inside every constraint.

use nalgebra::{DMatrix, DVector};

use super::barrier::{run_stage, BarrierModel, StageEnd};
use super::{smooth_theta, BarrierParams};
use crate::problem::{DesignProblem, DesignVector, DIM};
use crate::{Error, Result};

/// Required slack of every constraint at the phase-one output.
pub const PHASE_ONE_MARGIN: f64 = 1e-6;

/// `min t` subject to `g_i(x) − t < 0`, over `z = (x, t)`.
struct PhaseOneModel<'a> {
    problem: &'a DesignProblem,
}

fn split(z: &DVector<f64>) -> ([f64; DIM], f64) {
    let mut x = [0.0; DIM];
    x.copy_from_slice(&z.as_slice()[..DIM]);
    (x, z[DIM])
}

impl BarrierModel for PhaseOneModel<'_> {
    fn num_constraints(&self) -> usize {
        self.problem.constraints().len()
    }

    fn objective(&self, z: &DVector<f64>) -> Option<f64> {
        Some(z[DIM])
    }

    fn objective_derivatives(&self, _z: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let mut g = DVector::zeros(DIM + 1);
        g[DIM] = 1.0;
        Some((g, DMatrix::zeros(DIM + 1, DIM + 1)))
    }

    fn constraint(&self, i: usize, z: &DVector<f64>) -> f64 {
        let (x, t) = split(z);
        self.problem.constraints()[i].value(&x) - t
    }

    fn constraint_gradient(&self, i: usize, z: &DVector<f64>) -> DVector<f64> {
        let (x, _) = split(z);
        let g = self.problem.constraints()[i].gradient(&x);
        let mut out = DVector::zeros(DIM + 1);
        out.as_mut_slice()[..DIM].copy_from_slice(&g);
        out[DIM] = -1.0;
        out
    }

    fn constraint_hessian(&self, i: usize, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let c = &self.problem.constraints()[i];
        if c.is_linear() {
            return None;
        }
        let (x, _) = split(z);
        let h = c.hessian(&x);
        Some(DMatrix::from_fn(DIM + 1, DIM + 1, |r, k| {
            if r < DIM && k < DIM {
                h[r][k]
            } else {
                0.0
            }
        }))
    }
}

fn acceptable(problem: &DesignProblem, x: &[f64; DIM]) -> bool {
    problem.is_strictly_feasible(x, PHASE_ONE_MARGIN) && smooth_theta(problem, x).is_some()
}

/// Returns `x0` (clipped to the bounds) when it already clears every
/// constraint by [`PHASE_ONE_MARGIN`]; otherwise minimises the largest
/// constraint value with the barrier solver until it does.
pub fn phase_one(problem: &DesignProblem, x0: &[f64; DIM], params: &BarrierParams) -> Result<DesignVector> {
    let x = problem.clip_to_bounds(x0);
    if acceptable(problem, &x) {
        return Ok(DesignVector(x));
    }

    let model = PhaseOneModel { problem };
    let mut z = DVector::zeros(DIM + 1);
    z.as_mut_slice()[..DIM].copy_from_slice(&x);
    z[DIM] = problem.max_constraint(&x) + 1.0;

    let exit = |z: &DVector<f64>| acceptable(problem, &split(z).0);
    for mu in params.schedule() {
        let out = run_stage(&model, &z, mu, params, &exit);
        z = out.z;
        if out.end == StageEnd::EarlyExit || exit(&z) {
            return Ok(DesignVector(split(&z).0));
        }
    }
    Err(Error::InfeasibleStartUnrecoverable {
        max_violation: problem.max_constraint(&split(&z).0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem, ProblemConfig};
    use crate::BASELINE_DESIGN;

    #[test]
    fn leaves_feasible_points_alone() {
        let p = build_problem(&ProblemConfig::default()).unwrap();
        let x = [70.0, 75.0, 60.0, 80.0, 80.0, 250.0];
        assert!(p.is_strictly_feasible(&x, PHASE_ONE_MARGIN));
        let out = phase_one(&p, &x, &BarrierParams::default()).unwrap();
        assert_eq!(out.0, x);
    }

    #[test]
    fn repairs_the_baseline() {
        let p = build_problem(&ProblemConfig::default()).unwrap();
        let out = phase_one(&p, &BASELINE_DESIGN, &BarrierParams::default()).unwrap();
        let x = out.0;
        assert!(x[2] < x[1]);
        for c in p.constraints() {
            assert!(c.value(&x) < -PHASE_ONE_MARGIN, "{} = {}", c.label(), c.value(&x));
        }
    }

    #[test]
    fn reports_empty_interior() {
        // Ordering needs l3 < l1 < l4, impossible in a box of width zero-ish
        // where every length is pinned to the same interval.
        let mut cfg = ProblemConfig::default();
        cfg.lower[..4].copy_from_slice(&[50.0; 4]);
        cfg.upper[..4].copy_from_slice(&[50.0 + 1e-9; 4]);
        let p = build_problem(&cfg).unwrap();
        let err = phase_one(&p, &[50.0, 50.0, 50.0, 50.0, 80.0, 250.0], &BarrierParams::default());
        assert!(matches!(err, Err(Error::InfeasibleStartUnrecoverable { .. })), "{err:?}");
    }
}
