//! Objective scans along a line through a design point.

use crate::kinematics::linspace;
use crate::problem::{DesignProblem, DIM};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanAxis {
    /// Unit vector along design variable `i` (0-based).
    Variable(usize),
    /// Arbitrary direction, normalised before use.
    Direction([f64; DIM]),
}

impl ScanAxis {
    fn unit(&self) -> Result<[f64; DIM]> {
        match *self {
            ScanAxis::Variable(i) if i < DIM => {
                let mut e = [0.0; DIM];
                e[i] = 1.0;
                Ok(e)
            }
            ScanAxis::Variable(i) => Err(Error::InvalidArgument(format!("no design variable {i}"))),
            ScanAxis::Direction(v) => {
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::InvalidArgument("zero scan direction".into()));
                }
                Ok(v.map(|a| a / n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityScan {
    pub axis: ScanAxis,
    pub offsets: Vec<f64>,
    /// `−θ` at each offset, `None` where the point violates a constraint or
    /// the mechanism cannot be assembled.
    pub values: Vec<Option<f64>>,
}

impl SensitivityScan {
    pub fn center_index(&self) -> usize {
        self.offsets.len() / 2
    }

    /// Offsets and values of the feasible points.
    pub fn feasible(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.offsets
            .iter()
            .zip(&self.values)
            .filter_map(|(&t, v)| v.map(|v| (t, v)))
    }
}

/// Evaluates `−θ` at `n` (odd) points `x* + t·axis`, `t` spanning
/// `[−span_mm, span_mm]`.
pub fn sensitivity_scan(
    problem: &DesignProblem,
    x_star: &[f64; DIM],
    axis: ScanAxis,
    span_mm: f64,
    n: usize,
) -> Result<SensitivityScan> {
    if n % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "scan needs an odd number of points to include the centre, got {n}"
        )));
    }
    if !(span_mm >= 0.0 && span_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid scan span {span_mm}")));
    }
    let unit = axis.unit()?;
    let mut offsets = if n == 1 { vec![0.0] } else { linspace(-span_mm, span_mm, n) };
    offsets[n / 2] = 0.0;

    let values = offsets
        .iter()
        .map(|&t| {
            let mut x = *x_star;
            for i in 0..DIM {
                x[i] += t * unit[i];
            }
            if problem.constraints().iter().any(|c| c.value(&x) > 0.0) {
                return None;
            }
            problem.objective_value(&x).ok().map(|theta| -theta)
        })
        .collect();

    Ok(SensitivityScan { axis, offsets, values })
}
