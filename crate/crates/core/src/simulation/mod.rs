//! Stroke-spaced frames of the mechanism, knee and instantaneous-centre
//! trajectories, and their file formats.

mod render;

use std::io::{Read, Write};

use nalgebra::{Point2, Vector2};

use crate::kinematics::{
    joint_layout, knee_angle, linspace, stroke_for_angle, InstantCenter, JointLayout, LinkSet,
};
use crate::{Error, Result};

pub use render::{render_frames, CANVAS_SIZE};

/// Knee angle of the standing pose the sit-to-stand sweep ends at.
pub const STANDING_ANGLE_DEG: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Ok,
    /// The mechanism cannot be assembled at this stroke.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub d_mm: f64,
    pub theta_deg: Option<f64>,
    pub layout: Option<JointLayout>,
    pub status: FrameStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub links: LinkSet,
    pub d_lo: f64,
    pub d_hi: f64,
    /// Ordered by stroke, ascending.
    pub frames: Vec<Frame>,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn feasible(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter().filter(|f| f.status == FrameStatus::Ok)
    }

    /// Frame whose stroke is closest to `d`; ties go to the shorter stroke.
    pub fn nearest(&self, d: f64) -> Option<&Frame> {
        self.frames
            .iter()
            .min_by(|a, b| (a.d_mm - d).abs().total_cmp(&(b.d_mm - d).abs()))
    }
}

/// Evaluates one frame. θ comes from [`knee_angle`], the pose from
/// [`joint_layout`].
pub fn frame_at(links: &LinkSet, d: f64) -> Frame {
    match (knee_angle(links, d), joint_layout(links, d)) {
        (Ok(k), Ok(layout)) => Frame {
            d_mm: d,
            theta_deg: Some(k.theta_deg),
            layout: Some(layout),
            status: FrameStatus::Ok,
        },
        _ => Frame {
            d_mm: d,
            theta_deg: None,
            layout: None,
            status: FrameStatus::Infeasible,
        },
    }
}

/// `n_frames` evenly spaced strokes from `d_lo` to `d_hi`, both included.
pub fn simulate_sts(links: &LinkSet, d_lo: f64, d_hi: f64, n_frames: usize) -> Result<FrameSeries> {
    if n_frames < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 frames, got {n_frames}")));
    }
    if !(d_lo.is_finite() && d_hi.is_finite() && d_lo > 0.0 && d_lo < d_hi) {
        return Err(Error::InvalidArgument(format!(
            "stroke range must satisfy 0 < d_lo < d_hi, got [{d_lo}, {d_hi}]"
        )));
    }
    let frames = linspace(d_lo, d_hi, n_frames)
        .into_iter()
        .map(|d| frame_at(links, d))
        .collect();
    Ok(FrameSeries {
        links: *links,
        d_lo,
        d_hi,
        frames,
    })
}

/// Stroke range of a sit-to-stand sweep: from `d_min` (seated) to the
/// stroke where the knee reaches [`STANDING_ANGLE_DEG`].
pub fn sts_stroke_range(links: &LinkSet, d_min: f64) -> Result<(f64, f64)> {
    let d_stand = stroke_for_angle(links, STANDING_ANGLE_DEG)?;
    if !(d_stand > d_min) {
        return Err(Error::InvalidArgument(format!(
            "standing stroke {d_stand} mm is not beyond d_min = {d_min} mm"
        )));
    }
    Ok((d_min, d_stand))
}

/// Angle (degrees) between the actuator axis and link `l2`, both taken as
/// lines through the rocker joint. Zero at the singular pose.
pub fn actuator_crank_angle_deg(layout: &JointLayout) -> f64 {
    let actuator = layout.rocker_joint - layout.actuator_base;
    let crank = layout.rocker_joint - layout.crank_pivot;
    let cross = actuator.x * crank.y - actuator.y * crank.x;
    cross.abs().atan2(actuator.dot(&crank).abs()).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub d_mm: f64,
    pub theta_deg: f64,
    /// Exoskeleton knee pivot.
    pub knee: Point2<f64>,
    pub instantaneous_center: InstantCenter,
}

/// Knee-pivot and instantaneous-centre paths over the feasible frames.
pub fn knee_trajectory(series: &FrameSeries) -> Vec<TrajectorySample> {
    series
        .feasible()
        .filter_map(|f| {
            let layout = f.layout.as_ref()?;
            Some(TrajectorySample {
                d_mm: f.d_mm,
                theta_deg: f.theta_deg?,
                knee: layout.knee,
                instantaneous_center: layout.instantaneous_center,
            })
        })
        .collect()
}

/// Largest distance between consecutive finite instantaneous centres,
/// skipping pairs where either centre is at infinity.
pub fn max_center_jump(samples: &[TrajectorySample]) -> f64 {
    samples
        .windows(2)
        .filter_map(|w| {
            let a = w[0].instantaneous_center.point()?;
            let b = w[1].instantaneous_center.point()?;
            Some((b - a).norm())
        })
        .fold(0.0, f64::max)
}

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "d_mm",
    "theta_deg",
    "knee_x_mm",
    "knee_y_mm",
    "ic_x_mm",
    "ic_y_mm",
    "ic_at_infinity",
];

/// Writes trajectories in shortest round-trip float notation; a centre at
/// infinity leaves its coordinates empty.
pub fn write_trajectory_csv<W: Write>(samples: &[TrajectorySample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", TRAJECTORY_HEADER.join(","))?;
    for s in samples {
        match s.instantaneous_center {
            InstantCenter::Finite(p) => writeln!(
                out,
                "{},{},{},{},{},{},0",
                s.d_mm, s.theta_deg, s.knee.x, s.knee.y, p.x, p.y
            )?,
            InstantCenter::AtInfinity => writeln!(
                out,
                "{},{},{},{},,,1",
                s.d_mm, s.theta_deg, s.knee.x, s.knee.y
            )?,
        }
    }
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R, origin: &str) -> Result<Vec<TrajectorySample>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers().map_err(|e| Error::csv(origin, e))?.clone();
    if headers.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::MalformedHeader {
            expected: TRAJECTORY_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(origin, e))?;
        let bad = |what: &str| Error::InvalidArgument(format!("{origin}: row {}: bad {what}", row + 1));
        let num = |i: usize| record[i].parse::<f64>().map_err(|_| bad(TRAJECTORY_HEADER[i]));
        let instantaneous_center = match &record[6] {
            "1" => InstantCenter::AtInfinity,
            "0" => InstantCenter::Finite(Point2::new(num(4)?, num(5)?)),
            _ => return Err(bad("ic_at_infinity")),
        };
        out.push(TrajectorySample {
            d_mm: num(0)?,
            theta_deg: num(1)?,
            knee: Point2::new(num(2)?, num(3)?),
            instantaneous_center,
        });
    }
    Ok(out)
}

/// Analytic θ at a check stroke next to the θ of the nearest frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub d_mm: f64,
    pub analytic_theta_deg: f64,
    pub frame_d_mm: f64,
    pub frame_theta_deg: f64,
}

impl ValidationPoint {
    pub fn discrepancy_deg(&self) -> f64 {
        (self.analytic_theta_deg - self.frame_theta_deg).abs()
    }
}

/// Simulates a sweep from `d_lo` to at least `d_hi` with frames every
/// `step` mm, so that any stroke `d_lo + k·step` is hit exactly, and compares
/// the frame nearest `d_check` with the analytic angle there.
pub fn validate_stroke(
    links: &LinkSet,
    d_lo: f64,
    d_hi: f64,
    step: f64,
    d_check: f64,
) -> Result<(FrameSeries, ValidationPoint)> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("frame step must be positive, got {step}")));
    }
    let intervals = ((d_hi - d_lo) / step).ceil().max(1.0) as usize;
    let series = simulate_sts(links, d_lo, d_lo + step * intervals as f64, intervals + 1)?;
    let analytic = knee_angle(links, d_check)?.theta_deg;
    let frame = series
        .nearest(d_check)
        .expect("series has at least two frames");
    let frame_theta = frame.theta_deg.ok_or(Error::InvalidArgument(format!(
        "nearest frame at d = {} mm is infeasible",
        frame.d_mm
    )))?;
    let point = ValidationPoint {
        d_mm: d_check,
        analytic_theta_deg: analytic,
        frame_d_mm: frame.d_mm,
        frame_theta_deg: frame_theta,
    };
    Ok((series, point))
}

/// Unit vector along `v`, or zero.
pub(crate) fn unit_or_zero(v: Vector2<f64>) -> Vector2<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vector2::zeros()
    }
}
