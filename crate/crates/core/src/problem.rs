//! The link-length design problem: maximise the knee angle at minimum
//! stroke subject to Grashof, ordering, proportion, singularity and bound
//! inequalities, all in the `g(x) < 0` convention.

use std::fmt;

use crate::config::KeyValues;
use crate::kinematics::{knee_angle, LinkSet};
use crate::{Error, Result, DEFAULT_MIN_STROKE_MM};

pub const DIM: usize = 6;

/// Slack under which an inequality counts as strictly satisfied when
/// reporting feasibility.
pub const FEASIBILITY_EPS: f64 = 1e-9;

pub const DEFAULT_LOWER: [f64; DIM] = [50.0, 50.0, 50.0, 50.0, 50.0, 200.0];
pub const DEFAULT_UPPER: [f64; DIM] = [100.0, 100.0, 100.0, 100.0, 120.0, 300.0];

/// Design variables `(l1, .., l6)` in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignVector(pub [f64; DIM]);

impl DesignVector {
    pub fn new(x: [f64; DIM]) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite design vector {x:?}")));
        }
        Ok(Self(x))
    }

    pub fn links(&self) -> Result<LinkSet> {
        LinkSet::from_array(self.0)
    }

    pub fn as_array(&self) -> [f64; DIM] {
        self.0
    }
}

impl From<LinkSet> for DesignVector {
    fn from(l: LinkSet) -> Self {
        Self(l.as_array())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintCategory {
    Grashof,
    Ordering,
    Proportion,
    Singularity,
    Bound,
}

impl fmt::Display for ConstraintCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintCategory::Grashof => "grashof",
            ConstraintCategory::Ordering => "ordering",
            ConstraintCategory::Proportion => "proportion",
            ConstraintCategory::Singularity => "singularity",
            ConstraintCategory::Bound => "bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ConstraintForm {
    /// `coeffs · x + constant`
    Linear { coeffs: [f64; DIM], constant: f64 },
    /// `hypot(l5, l6) − l2 − d_min`
    Singularity { d_min: f64 },
}

/// One labelled inequality `g(x) < 0`, optionally multiplied by a positive
/// scale factor.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityConstraint {
    label: String,
    category: ConstraintCategory,
    form: ConstraintForm,
    scale: f64,
}

impl InequalityConstraint {
    fn linear(label: impl Into<String>, category: ConstraintCategory, terms: &[(usize, f64)], constant: f64) -> Self {
        let mut coeffs = [0.0; DIM];
        for &(i, c) in terms {
            coeffs[i] += c;
        }
        Self {
            label: label.into(),
            category,
            form: ConstraintForm::Linear { coeffs, constant },
            scale: 1.0,
        }
    }

    fn difference(label: &str, category: ConstraintCategory, a: usize, b: usize) -> Self {
        Self::linear(label, category, &[(a, 1.0), (b, -1.0)], 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn category(&self) -> ConstraintCategory {
        self.category
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.form, ConstraintForm::Linear { .. })
    }

    pub fn value(&self, x: &[f64; DIM]) -> f64 {
        let raw = match &self.form {
            ConstraintForm::Linear { coeffs, constant } => {
                coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + constant
            }
            // Rounds exactly like the actuator triangle in the kinematics.
            ConstraintForm::Singularity { d_min } => (x[4].hypot(x[5]) - x[1]) - d_min,
        };
        self.scale * raw
    }

    pub fn gradient(&self, x: &[f64; DIM]) -> [f64; DIM] {
        let mut g = match &self.form {
            ConstraintForm::Linear { coeffs, .. } => *coeffs,
            ConstraintForm::Singularity { .. } => {
                let r = x[4].hypot(x[5]);
                [0.0, -1.0, 0.0, 0.0, x[4] / r, x[5] / r]
            }
        };
        for v in g.iter_mut() {
            *v *= self.scale;
        }
        g
    }

    /// Second derivatives; zero except for the `hypot(l5, l6)` block.
    pub fn hessian(&self, x: &[f64; DIM]) -> [[f64; DIM]; DIM] {
        let mut h = [[0.0; DIM]; DIM];
        if let ConstraintForm::Singularity { .. } = self.form {
            let (a, b) = (x[4], x[5]);
            let r = a.hypot(b);
            let r3 = r * r * r;
            h[4][4] = self.scale * b * b / r3;
            h[5][5] = self.scale * a * a / r3;
            h[4][5] = -self.scale * a * b / r3;
            h[5][4] = h[4][5];
        }
        h
    }
}

/// Per-variable bounds and minimum stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub d_min_mm: f64,
    pub lower: [f64; DIM],
    pub upper: [f64; DIM],
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            d_min_mm: DEFAULT_MIN_STROKE_MM,
            lower: DEFAULT_LOWER,
            upper: DEFAULT_UPPER,
        }
    }
}

impl ProblemConfig {
    /// Consumes `d_min_mm`, `lb.l1..lb.l6` and `ub.l1..ub.l6`.
    pub fn from_key_values(kv: &mut KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(v) = kv.take::<f64>("d_min_mm")? {
            cfg.d_min_mm = v;
        }
        for i in 0..DIM {
            if let Some(v) = kv.take::<f64>(&format!("lb.l{}", i + 1))? {
                cfg.lower[i] = v;
            }
            if let Some(v) = kv.take::<f64>(&format!("ub.l{}", i + 1))? {
                cfg.upper[i] = v;
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min_mm.is_finite() && self.d_min_mm > 0.0) {
            return Err(Error::InvalidBounds {
                key: "d_min_mm".into(),
                reason: format!("must be positive, got {}", self.d_min_mm),
            });
        }
        for i in 0..DIM {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && lo > 0.0) {
                return Err(Error::InvalidBounds {
                    key: format!("lb.l{}", i + 1),
                    reason: format!("must be positive, got {lo}"),
                });
            }
            if !(hi.is_finite() && lo < hi) {
                return Err(Error::InvalidBounds {
                    key: format!("lb.l{}", i + 1),
                    reason: format!("lower bound {lo} not below ub.l{} = {hi}", i + 1),
                });
            }
        }
        Ok(())
    }
}

/// Solver-independent statement of the design problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    constraints: Vec<InequalityConstraint>,
    lower: [f64; DIM],
    upper: [f64; DIM],
    d_min: f64,
}

pub fn build_problem(config: &ProblemConfig) -> Result<DesignProblem> {
    use ConstraintCategory::*;
    config.validate()?;

    let mut constraints = vec![
        InequalityConstraint::linear(
            "grashof",
            Grashof,
            &[(2, 1.0), (3, 1.0), (1, -1.0), (0, -1.0)],
            0.0,
        ),
        InequalityConstraint::difference("order.l3_l2", Ordering, 2, 1),
        InequalityConstraint::difference("order.l3_l1", Ordering, 2, 0),
        InequalityConstraint::difference("order.l3_l4", Ordering, 2, 3),
        InequalityConstraint::difference("order.l2_l4", Ordering, 1, 3),
        InequalityConstraint::difference("order.l1_l4", Ordering, 0, 3),
        InequalityConstraint::difference("prop.l5_l6", Proportion, 4, 5),
        InequalityConstraint::difference("prop.l4_l6", Proportion, 3, 5),
        InequalityConstraint {
            label: "singularity".into(),
            category: Singularity,
            form: ConstraintForm::Singularity {
                d_min: config.d_min_mm,
            },
            scale: 1.0,
        },
    ];
    for i in 0..DIM {
        constraints.push(InequalityConstraint::linear(
            format!("lb.l{}", i + 1),
            Bound,
            &[(i, -1.0)],
            config.lower[i],
        ));
    }
    for i in 0..DIM {
        constraints.push(InequalityConstraint::linear(
            format!("ub.l{}", i + 1),
            Bound,
            &[(i, 1.0)],
            -config.upper[i],
        ));
    }

    Ok(DesignProblem {
        constraints,
        lower: config.lower,
        upper: config.upper,
        d_min: config.d_min_mm,
    })
}

impl DesignProblem {
    pub fn constraints(&self) -> &[InequalityConstraint] {
        &self.constraints
    }

    pub fn lower(&self) -> &[f64; DIM] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64; DIM] {
        &self.upper
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn constraint(&self, label: &str) -> Option<&InequalityConstraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    /// Knee angle (deg) of `x` at the minimum stroke.
    pub fn objective_value(&self, x: &[f64; DIM]) -> Result<f64> {
        let links = LinkSet::from_array(*x)?;
        Ok(knee_angle(&links, self.d_min)?.theta_deg)
    }

    pub fn constraint_values(&self, x: &[f64; DIM]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    /// Largest constraint value; negative means strictly feasible.
    pub fn max_constraint(&self, x: &[f64; DIM]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_strictly_feasible(&self, x: &[f64; DIM], eps: f64) -> bool {
        self.constraints.iter().all(|c| c.value(x) <= -eps)
    }

    pub fn clip_to_bounds(&self, x: &[f64; DIM]) -> [f64; DIM] {
        let mut out = *x;
        for i in 0..DIM {
            out[i] = out[i].clamp(self.lower[i], self.upper[i]);
        }
        out
    }

    /// Copy with every constraint multiplied by `factor > 0`.
    pub fn with_scaled_constraints(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "constraint scale must be positive, got {factor}"
            )));
        }
        let mut p = self.clone();
        for c in &mut p.constraints {
            c.scale *= factor;
        }
        Ok(p)
    }
}
