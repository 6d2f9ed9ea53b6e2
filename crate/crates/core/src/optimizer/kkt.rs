//! First-order optimality measure at a barrier iterate.

use nalgebra::{DMatrix, DVector};

use super::barrier::BarrierModel;
use super::DesignModel;

/// Slack (unscaled) under which a constraint's multiplier is fitted rather
/// than taken from the barrier estimate `μ / −g`.
const NEAR_ACTIVE: f64 = 1e-6;

/// Largest near-active set handled by subset enumeration.
const MAX_ENUMERATED: usize = 12;

/// Scaled stationarity residual `‖∇f + Σ λ_i ∇g_i‖∞ / max(1, ‖∇f‖∞)`.
///
/// Multipliers of constraints with slack above [`NEAR_ACTIVE`] are the
/// barrier estimates; the near-active ones are fitted by non-negative least
/// squares, since their barrier estimates lose precision as the slack
/// approaches rounding level.
pub(crate) fn stationarity_residual(model: &DesignModel<'_>, z: &DVector<f64>, mu: f64) -> f64 {
    let Some(theta_grad) = model.theta_gradient(z) else {
        return f64::INFINITY;
    };
    let grad_f = -theta_grad;
    let mut r = grad_f.clone();
    let mut near = Vec::new();
    for (i, c) in model.problem.constraints().iter().enumerate() {
        let g = model.constraint(i, z);
        let dg = model.constraint_gradient(i, z);
        if -g / c.scale() <= NEAR_ACTIVE {
            near.push(dg);
        } else {
            r += dg * (mu / -g);
        }
    }
    let scale = grad_f.amax().max(1.0);
    nonnegative_residual(&r, &near).amax() / scale
}

/// `r + G λ` for the `λ ≥ 0` minimising its Euclidean norm.
fn nonnegative_residual(r: &DVector<f64>, columns: &[DVector<f64>]) -> DVector<f64> {
    if columns.is_empty() {
        return r.clone();
    }
    if columns.len() > MAX_ENUMERATED {
        return r.clone();
    }
    let mut best = r.clone();
    let mut best_norm = r.norm();
    for mask in 1u32..(1u32 << columns.len()) {
        let cols: Vec<&DVector<f64>> = columns
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, c)| c)
            .collect();
        let g = DMatrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
        let Ok(lambda) = g.clone().svd(true, true).solve(&(-r), 1e-12) else {
            continue;
        };
        if lambda.iter().any(|&l| l < 0.0) {
            continue;
        }
        let res = r + &g * &lambda;
        let n = res.norm();
        if n < best_norm {
            best_norm = n;
            best = res;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbs_gradient_into_cone() {
        let r = DVector::from_vec(vec![-2.0, 1.0]);
        let cols = vec![DVector::from_vec(vec![1.0, 0.0])];
        let res = nonnegative_residual(&r, &cols);
        assert!(res[0].abs() < 1e-12);
        assert!((res[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_negative_multipliers() {
        let r = DVector::from_vec(vec![2.0, 0.0]);
        let cols = vec![DVector::from_vec(vec![1.0, 0.0])];
        let res = nonnegative_residual(&r, &cols);
        assert_eq!(res, r);
    }
}
