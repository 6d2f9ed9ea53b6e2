//! Synthesis toolkit for a linear-actuator driven four-bar knee exoskeleton.
//!
//! The crate is organised the way a design study flows:
//!
//! * [`kinematics`] evaluates the closed-form knee angle of a link set at a
//!   given actuator stroke, reconstructs joint coordinates and sweeps strokes.
//! * [`problem`] turns the link lengths into a constrained design problem
//!   (maximise the knee angle at minimum stroke).
//! * [`optimizer`] solves that problem with a log-barrier interior-point
//!   method and provides a brute-force grid oracle and sensitivity scans.
//! * [`simulation`] produces stroke-spaced frames of the mechanism, knee and
//!   instantaneous-centre trajectories, and SVG renderings.
//! * [`gait`] loads marker trajectories, computes knee angles from marker
//!   vectors and compares human and exoskeleton recordings.

pub mod config;
mod error;
pub mod gait;
pub mod kinematics;
pub mod optimizer;
pub mod problem;
pub mod simulation;

pub use error::{Error, Result};
pub use kinematics::{
    joint_layout, knee_angle, rom_curve, singularity_margin, stroke_for_angle, GrashofClass,
    JointLayout, KneeAngleBreakdown, LinkSet,
};
pub use problem::{build_problem, DesignProblem, DesignVector, ProblemConfig};

/// Minimum stroke of the reference linear actuator, in mm.
pub const DEFAULT_MIN_STROKE_MM: f64 = 242.0;

/// Optimised link lengths `l1..l6` (mm) of the reference design.
pub const REFERENCE_OPTIMUM: [f64; 6] = [59.081, 68.84, 55.964, 71.849, 118.63, 287.31];

/// Link lengths `l1..l6` (mm) of the unoptimised starting design.
pub const BASELINE_DESIGN: [f64; 6] = [85.0, 85.0, 85.0, 80.0, 80.0, 235.0];
