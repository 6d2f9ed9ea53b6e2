//! Inner Newton iterations of the log-barrier method.
//!
//! A stage minimises `f(z) − μ Σ ln(−g_i(z))` for fixed `μ` by damped Newton
//! steps. Non positive definite Hessians are regularised with `λI`, `λ`
//! doubling from `1e-8`, and every trial point of the Armijo backtracking
//! must be strictly feasible.

use nalgebra::{DMatrix, DVector};

use super::BarrierParams;

/// A smooth program in the `g(z) < 0` convention.
pub(crate) trait BarrierModel {
    fn num_constraints(&self) -> usize;
    /// Objective to minimise; `None` outside its domain.
    fn objective(&self, z: &DVector<f64>) -> Option<f64>;
    fn objective_derivatives(&self, z: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>;
    fn constraint(&self, i: usize, z: &DVector<f64>) -> f64;
    fn constraint_gradient(&self, i: usize, z: &DVector<f64>) -> DVector<f64>;
    fn constraint_hessian(&self, i: usize, z: &DVector<f64>) -> Option<DMatrix<f64>>;
}

const LAMBDA_START: f64 = 1e-8;
const LAMBDA_MAX: f64 = 1e20;
const MAX_BACKTRACKS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageEnd {
    /// Gradient norm or Newton decrement below the inner tolerance.
    Tolerance,
    /// No strictly feasible trial point decreased the merit.
    Stalled,
    MaxIterations,
    /// A caller-supplied exit test fired.
    EarlyExit,
}

#[derive(Debug, Clone)]
pub(crate) struct StageOutcome {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub end: StageEnd,
    /// Merit after the start and after each accepted step.
    pub merits: Vec<f64>,
    pub grad_norm: f64,
}

pub(crate) fn is_strictly_feasible<M: BarrierModel>(model: &M, z: &DVector<f64>) -> bool {
    (0..model.num_constraints()).all(|i| model.constraint(i, z) < 0.0)
}

pub(crate) fn merit<M: BarrierModel>(model: &M, z: &DVector<f64>, mu: f64) -> Option<f64> {
    let mut barrier = 0.0;
    for i in 0..model.num_constraints() {
        let g = model.constraint(i, z);
        if !(g < 0.0) {
            return None;
        }
        barrier -= (-g).ln();
    }
    let f = model.objective(z)?;
    let m = f + mu * barrier;
    m.is_finite().then_some(m)
}

fn merit_derivatives<M: BarrierModel>(
    model: &M,
    z: &DVector<f64>,
    mu: f64,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let (mut grad, mut hess) = model.objective_derivatives(z)?;
    for i in 0..model.num_constraints() {
        let g = model.constraint(i, z);
        let dg = model.constraint_gradient(i, z);
        // ∇(−μ ln(−g)) = μ ∇g / (−g);  ∇² adds μ ∇g∇gᵀ / g² + μ ∇²g / (−g).
        grad += &dg * (mu / -g);
        hess += (&dg * dg.transpose()) * (mu / (g * g));
        if let Some(h) = model.constraint_hessian(i, z) {
            hess += h * (mu / -g);
        }
    }
    Some((grad, hess))
}

/// Newton direction, regularised until it is a descent direction.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let sym = (hess + hess.transpose()) * 0.5;
    let mut lambda = 0.0;
    loop {
        let mut m = sym.clone();
        for i in 0..n {
            m[(i, i)] += lambda;
        }
        if let Some(chol) = m.cholesky() {
            let p = chol.solve(&(-grad));
            if p.iter().all(|v| v.is_finite()) && grad.dot(&p) < 0.0 {
                return Some(p);
            }
        }
        lambda = if lambda == 0.0 { LAMBDA_START } else { lambda * 2.0 };
        if lambda > LAMBDA_MAX {
            return None;
        }
    }
}

/// Runs one barrier stage from a strictly feasible `z0`.
pub(crate) fn run_stage<M: BarrierModel>(
    model: &M,
    z0: &DVector<f64>,
    mu: f64,
    params: &BarrierParams,
    early_exit: &dyn Fn(&DVector<f64>) -> bool,
) -> StageOutcome {
    let mut z = z0.clone();
    let mut current = merit(model, &z, mu).expect("barrier stage must start strictly feasible");
    let mut merits = vec![current];
    let mut grad_norm = f64::INFINITY;

    for iter in 0..params.max_inner {
        let Some((grad, hess)) = merit_derivatives(model, &z, mu) else {
            return StageOutcome { z, iterations: iter, end: StageEnd::Stalled, merits, grad_norm };
        };
        grad_norm = grad.amax();
        if grad_norm <= params.inner_tol {
            return StageOutcome { z, iterations: iter, end: StageEnd::Tolerance, merits, grad_norm };
        }
        let Some(p) = newton_direction(&grad, &hess) else {
            return StageOutcome { z, iterations: iter, end: StageEnd::Stalled, merits, grad_norm };
        };
        let slope = grad.dot(&p);
        if -slope * 0.5 <= params.inner_tol {
            return StageOutcome { z, iterations: iter, end: StageEnd::Tolerance, merits, grad_norm };
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &z + &p * t;
            if trial == z {
                break;
            }
            if let Some(m) = merit(model, &trial, mu) {
                if m <= current + params.armijo_c * t * slope {
                    accepted = Some((trial, m));
                    break;
                }
            }
            t *= params.backtrack;
        }
        let Some((next, m)) = accepted else {
            return StageOutcome { z, iterations: iter, end: StageEnd::Stalled, merits, grad_norm };
        };
        assert!(is_strictly_feasible(model, &next), "accepted an infeasible iterate");
        debug_assert!(m <= current);
        z = next;
        current = m;
        merits.push(m);
        if early_exit(&z) {
            return StageOutcome { z, iterations: iter + 1, end: StageEnd::EarlyExit, merits, grad_norm };
        }
    }
    StageOutcome {
        z,
        iterations: params.max_inner,
        end: StageEnd::MaxIterations,
        merits,
        grad_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min (z0 − 2)² + (z1 + 1)² subject to z0 < 1, −z1 < 0.
    struct Toy;

    impl BarrierModel for Toy {
        fn num_constraints(&self) -> usize {
            2
        }
        fn objective(&self, z: &DVector<f64>) -> Option<f64> {
            Some((z[0] - 2.0).powi(2) + (z[1] + 1.0).powi(2))
        }
        fn objective_derivatives(&self, z: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
            Some((
                DVector::from_vec(vec![2.0 * (z[0] - 2.0), 2.0 * (z[1] + 1.0)]),
                DMatrix::identity(2, 2) * 2.0,
            ))
        }
        fn constraint(&self, i: usize, z: &DVector<f64>) -> f64 {
            if i == 0 {
                z[0] - 1.0
            } else {
                -z[1]
            }
        }
        fn constraint_gradient(&self, i: usize, _z: &DVector<f64>) -> DVector<f64> {
            if i == 0 {
                DVector::from_vec(vec![1.0, 0.0])
            } else {
                DVector::from_vec(vec![0.0, -1.0])
            }
        }
        fn constraint_hessian(&self, _i: usize, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
            None
        }
    }

    #[test]
    fn stage_follows_central_path() {
        let params = BarrierParams::default();
        let z0 = DVector::from_vec(vec![0.0, 1.0]);
        let mut z = z0;
        let mut mu = 1.0;
        while mu >= 1e-8 {
            let out = run_stage(&Toy, &z, mu, &params, &|_| false);
            assert!(out.merits.windows(2).all(|w| w[1] <= w[0]));
            assert!(is_strictly_feasible(&Toy, &out.z));
            z = out.z;
            mu *= 0.1;
        }
        assert!((z[0] - 1.0).abs() < 1e-6, "{z}");
        assert!(z[1].abs() < 1e-6, "{z}");
    }

    #[test]
    fn regularises_indefinite_hessians() {
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let p = newton_direction(&g, &h).unwrap();
        assert!(g.dot(&p) < 0.0);
    }
}

