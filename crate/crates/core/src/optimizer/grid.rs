//! Exhaustive lattice search over the bound box, used as an oracle.

use crate::kinematics::linspace;
use crate::problem::{DesignProblem, DesignVector, DIM, FEASIBILITY_EPS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub x: DesignVector,
    pub theta_deg: f64,
    /// Lexicographic lattice index of the best point.
    pub index: usize,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Best strictly feasible lattice point with `resolution` points per axis.
///
/// Ties go to the lowest lattice index.
pub fn grid_search(problem: &DesignProblem, resolution: usize) -> Result<GridResult> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let axes: Vec<Vec<f64>> = (0..DIM)
        .map(|i| linspace(problem.lower()[i], problem.upper()[i], resolution))
        .collect();
    let total = resolution.pow(DIM as u32);

    let mut best: Option<GridResult> = None;
    let mut feasible = 0;
    for index in 0..total {
        let mut x = [0.0; DIM];
        let mut rem = index;
        for i in (0..DIM).rev() {
            x[i] = axes[i][rem % resolution];
            rem /= resolution;
        }
        if !problem.is_strictly_feasible(&x, FEASIBILITY_EPS) {
            continue;
        }
        let Ok(theta) = problem.objective_value(&x) else {
            continue;
        };
        feasible += 1;
        if best.as_ref().map_or(true, |b| theta > b.theta_deg) {
            best = Some(GridResult {
                x: DesignVector(x),
                theta_deg: theta,
                index,
                evaluated: total,
                feasible: 0,
            });
        }
    }
    let mut best = best.ok_or(Error::NoFeasibleGridPoint { resolution })?;
    best.feasible = feasible;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem, ProblemConfig};

    #[test]
    fn corners_are_all_infeasible() {
        let p = build_problem(&ProblemConfig::default()).unwrap();
        assert!(matches!(
            grid_search(&p, 2),
            Err(Error::NoFeasibleGridPoint { resolution: 2 })
        ));
    }

    #[test]
    fn rejects_degenerate_resolution() {
        let p = build_problem(&ProblemConfig::default()).unwrap();
        assert!(grid_search(&p, 1).is_err());
    }

    #[test]
    fn best_point_is_feasible() {
        let p = build_problem(&ProblemConfig::default()).unwrap();
        let r = grid_search(&p, 6).unwrap();
        assert!(p.is_strictly_feasible(&r.x.0, FEASIBILITY_EPS));
        assert_eq!(r.evaluated, 46656);
        assert!(r.feasible > 0);
    }
}
