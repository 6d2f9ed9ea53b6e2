//! Closed-form kinematics of the four-bar knee exoskeleton.
//!
//! The mechanism is described in the shank frame: the shank is a rigid body
//! carrying the ankle, the crank pivot and the knee pivot on one vertical
//! line. The actuator base sits on a bracket of length `l5` perpendicular to
//! the shank at the ankle, so the base-to-crank-pivot distance is
//! `l7 = hypot(l5, l6)`. The actuator (total length `d`) drives the rocker
//! joint at the end of link `l2`; `l1` couples it to the thigh link `l4`,
//! which pivots about the knee.
//!
//! ```text
//!          thigh (C)
//!           /    \ l1
//!       l4 /      (B) rocker joint ----.
//!         /      /                      \ d (actuator)
//!  knee (W)     / l2                     \
//!        | l3  /                          \
//!   crank (A)-'                            |
//!        |                                 |
//!        | l6                              |
//!        |                                 |
//!  ankle (F) ------------ l5 ------------ (G) actuator base
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::{Point2, Vector2};
use serde::Serialize;

use crate::{Error, Result};

/// Cosine arguments within this distance of ±1 are clamped; beyond it the
/// triangle is reported as unable to close.
pub const ACOS_CLAMP_TOL: f64 = 1e-12;

/// Angular tolerance (rad) under which the two grounded links count as
/// parallel and the instantaneous centre is placed at infinity.
pub const PARALLEL_TOL_RAD: f64 = 1e-9;

/// The six design lengths of the exoskeleton, in mm.
///
/// The coupler-side length `l7` is always derived from `l5` and `l6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkSet {
    lengths: [f64; 6],
}

impl LinkSet {
    pub fn new(l1: f64, l2: f64, l3: f64, l4: f64, l5: f64, l6: f64) -> Result<Self> {
        Self::from_array([l1, l2, l3, l4, l5, l6])
    }

    pub fn from_array(lengths: [f64; 6]) -> Result<Self> {
        for (i, &l) in lengths.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidLinks(format!(
                    "l{} must be finite and strictly positive, got {l}",
                    i + 1
                )));
            }
        }
        Ok(Self { lengths })
    }

    pub fn from_slice(lengths: &[f64]) -> Result<Self> {
        let arr: [f64; 6] = lengths.try_into().map_err(|_| {
            Error::InvalidLinks(format!("expected 6 lengths, got {}", lengths.len()))
        })?;
        Self::from_array(arr)
    }

    pub fn as_array(&self) -> [f64; 6] {
        self.lengths
    }

    pub fn l1(&self) -> f64 {
        self.lengths[0]
    }
    pub fn l2(&self) -> f64 {
        self.lengths[1]
    }
    pub fn l3(&self) -> f64 {
        self.lengths[2]
    }
    pub fn l4(&self) -> f64 {
        self.lengths[3]
    }
    pub fn l5(&self) -> f64 {
        self.lengths[4]
    }
    pub fn l6(&self) -> f64 {
        self.lengths[5]
    }

    /// Distance from the actuator base to the crank pivot.
    pub fn l7(&self) -> f64 {
        self.l5().hypot(self.l6())
    }
}

impl fmt::Display for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [l1, l2, l3, l4, l5, l6] = self.lengths;
        write!(
            f,
            "l1={l1} l2={l2} l3={l3} l4={l4} l5={l5} l6={l6} (l7={})",
            self.l7()
        )
    }
}

/// Actuator length together with its minimum stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorState {
    d: f64,
    d_min: f64,
}

impl ActuatorState {
    pub fn new(d: f64, d_min: f64) -> Result<Self> {
        if !(d_min.is_finite() && d_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "minimum stroke must be positive, got {d_min}"
            )));
        }
        if !(d.is_finite() && d >= d_min) {
            return Err(Error::InvalidArgument(format!(
                "stroke {d} below minimum stroke {d_min}"
            )));
        }
        Ok(Self { d, d_min })
    }

    pub fn at_minimum(d_min: f64) -> Result<Self> {
        Self::new(d_min, d_min)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }
}

/// The three triangles whose closure the knee-angle chain depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Triangle {
    /// Base-to-crank distance `l7`, crank `l2` and the actuator `d`.
    Actuator,
    /// Crank `l2`, shank segment `l3` and the diagonal `l8`.
    Crank,
    /// Diagonal `l8`, thigh link `l4` and coupler `l1`.
    Output,
}

impl fmt::Display for Triangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Triangle::Actuator => "actuator (l7, l2, d)",
            Triangle::Crank => "crank (l2, l3, l8)",
            Triangle::Output => "output (l8, l4, l1)",
        };
        f.write_str(s)
    }
}

/// Knee angle and every intermediate quantity of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KneeAngleBreakdown {
    pub theta_deg: f64,
    pub alpha1_deg: f64,
    pub alpha2_deg: f64,
    pub beta1_deg: f64,
    pub beta2_deg: f64,
    pub l8_mm: f64,
    pub l7_mm: f64,
    /// Set when some triangle is degenerate (cosine argument clamped or
    /// within the clamp tolerance of ±1).
    pub singular: bool,
}

/// Interior angle (rad) between sides `a` and `b` of a triangle whose third
/// side is `c`, i.e. `acos((a² + b² − c²) / 2ab)`.
///
/// `1 − cos` and `1 + cos` are formed in factored form so angles near 0 and
/// π keep full relative precision.
fn triangle_angle(a: f64, b: f64, c: f64, triangle: Triangle) -> Result<(f64, bool)> {
    let two_ab = 2.0 * a * b;
    let one_minus_cos = (c - (a - b)) * (c + (a - b)) / two_ab;
    let one_plus_cos = ((a + b) - c) * ((a + b) + c) / two_ab;
    if !(one_minus_cos >= -ACOS_CLAMP_TOL && one_plus_cos >= -ACOS_CLAMP_TOL) {
        return Err(Error::GeometryInfeasible {
            triangle,
            argument: (a * a + b * b - c * c) / two_ab,
        });
    }
    let singular = one_minus_cos <= ACOS_CLAMP_TOL || one_plus_cos <= ACOS_CLAMP_TOL;
    let angle = 2.0 * one_minus_cos.max(0.0).sqrt().atan2(one_plus_cos.max(0.0).sqrt());
    Ok((angle, singular))
}

/// Knee angle chain in radians.
#[derive(Debug, Clone, Copy)]
struct Chain {
    alpha1: f64,
    alpha2: f64,
    l8: f64,
    beta1: f64,
    beta2: f64,
    singular: bool,
}

fn solve_chain(links: &LinkSet, d: f64) -> Result<Chain> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stroke must be finite and positive, got {d}"
        )));
    }
    let (l1, l2, l3, l4) = (links.l1(), links.l2(), links.l3(), links.l4());
    let l7 = links.l7();

    let alpha1 = links.l5().atan2(links.l6());
    let (alpha2, sing_act) = triangle_angle(l7, l2, d, Triangle::Actuator)?;

    // The crank-pivot angle between l2 and l3 is 180° − α1 − α2.
    let l8_sq = l2 * l2 + l3 * l3 + 2.0 * l2 * l3 * (alpha1 + alpha2).cos();
    let l8 = l8_sq.max(0.0).sqrt();
    if l8 <= 0.0 {
        return Err(Error::GeometryInfeasible {
            triangle: Triangle::Crank,
            argument: f64::NAN,
        });
    }

    let (beta1, sing_crank) = triangle_angle(l8, l3, l2, Triangle::Crank)?;
    let (beta2, sing_out) = triangle_angle(l8, l4, l1, Triangle::Output)?;

    Ok(Chain {
        alpha1,
        alpha2,
        l8,
        beta1,
        beta2,
        singular: sing_act || sing_crank || sing_out,
    })
}

/// Evaluates the knee angle of `links` at actuator length `d` (mm).
pub fn knee_angle(links: &LinkSet, d: f64) -> Result<KneeAngleBreakdown> {
    let chain = solve_chain(links, d)?;
    let beta1_deg = chain.beta1.to_degrees();
    let beta2_deg = chain.beta2.to_degrees();
    Ok(KneeAngleBreakdown {
        theta_deg: 180.0 - beta1_deg - beta2_deg,
        alpha1_deg: chain.alpha1.to_degrees(),
        alpha2_deg: chain.alpha2.to_degrees(),
        beta1_deg,
        beta2_deg,
        l8_mm: chain.l8,
        l7_mm: links.l7(),
        singular: chain.singular,
    })
}

/// Grashof classification of the quadrilateral `l1..l4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrashofClass {
    /// `(l1 + l2) − (l3 + l4)` in mm; positive when the criterion holds.
    pub margin_mm: f64,
    /// `l3` shortest and `l4` longest, all strict.
    pub ordering_ok: bool,
}

impl GrashofClass {
    pub fn is_crank_rocker(&self) -> bool {
        self.margin_mm > 0.0 && self.ordering_ok
    }
}

pub fn grashof_classify(links: &LinkSet) -> GrashofClass {
    let [l1, l2, l3, l4, _, _] = links.as_array();
    GrashofClass {
        margin_mm: (l1 + l2) - (l3 + l4),
        ordering_ok: l3 < l2 && l3 < l1 && l3 < l4 && l2 < l4 && l1 < l4,
    }
}

/// `(l2 + d) − l7`: positive when the actuator triangle closes, zero at the
/// singular (collinear) pose, negative when it cannot be assembled.
pub fn singularity_margin(links: &LinkSet, d: f64) -> f64 {
    d - (links.l7() - links.l2())
}

const INTERVAL_SAMPLES: usize = 2048;
const BISECTION_ITERS: usize = 200;

fn is_feasible(links: &LinkSet, d: f64) -> bool {
    solve_chain(links, d).is_ok()
}

/// Refines a feasibility boundary between a feasible and an infeasible stroke.
fn refine_boundary(links: &LinkSet, mut feasible: f64, mut infeasible: f64) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (feasible + infeasible);
        if mid == feasible || mid == infeasible {
            break;
        }
        if is_feasible(links, mid) {
            feasible = mid;
        } else {
            infeasible = mid;
        }
    }
    feasible
}

/// First contiguous interval of strokes, from the short end, on which every
/// triangle closes.
pub fn feasible_stroke_interval(links: &LinkSet) -> Option<(f64, f64)> {
    let l7 = links.l7();
    let l2 = links.l2();
    let lo = (l7 - l2).abs();
    let hi = l7 + l2;
    let step = (hi - lo) / (INTERVAL_SAMPLES - 1) as f64;
    let at = |i: usize| if i == INTERVAL_SAMPLES - 1 { hi } else { lo + step * i as f64 };

    let first = (0..INTERVAL_SAMPLES).find(|&i| is_feasible(links, at(i)))?;
    let last = (first..INTERVAL_SAMPLES)
        .take_while(|&i| is_feasible(links, at(i)))
        .last()
        .unwrap_or(first);

    let start = if first == 0 {
        at(0).max(f64::MIN_POSITIVE)
    } else {
        refine_boundary(links, at(first), at(first - 1))
    };
    let end = if last == INTERVAL_SAMPLES - 1 {
        at(last)
    } else {
        refine_boundary(links, at(last), at(last + 1))
    };
    Some((start, end))
}

fn theta_at(links: &LinkSet, d: f64) -> Option<f64> {
    knee_angle(links, d).ok().map(|k| k.theta_deg)
}

/// Stroke interval over which the knee angle falls monotonically from its
/// seated maximum down to its minimum.
pub fn monotone_stroke_branch(links: &LinkSet) -> Option<(f64, f64)> {
    let (lo, hi) = feasible_stroke_interval(links)?;
    let n = INTERVAL_SAMPLES;
    let step = (hi - lo) / (n - 1) as f64;
    let at = |i: usize| if i == n - 1 { hi } else { lo + step * i as f64 };

    let mut prev = theta_at(links, at(0))?;
    let mut turn = n - 1;
    for i in 1..n {
        let t = theta_at(links, at(i))?;
        if t >= prev {
            turn = i - 1;
            break;
        }
        prev = t;
    }
    if turn == n - 1 {
        return Some((lo, hi));
    }

    // Golden-section refinement of the minimum around the sampled turn.
    let mut a = at(turn.saturating_sub(1));
    let mut b = at((turn + 1).min(n - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |d: f64| theta_at(links, d).unwrap_or(f64::INFINITY);
    for _ in 0..BISECTION_ITERS {
        if b - a <= f64::EPSILON * b.abs() {
            break;
        }
        let c = b - inv_phi * (b - a);
        let e = a + inv_phi * (b - a);
        if f(c) < f(e) {
            b = e;
        } else {
            a = c;
        }
    }
    Some((lo, 0.5 * (a + b)))
}

/// Inverts the knee-angle chain on its monotone branch by bisection.
pub fn stroke_for_angle(links: &LinkSet, theta_target_deg: f64) -> Result<f64> {
    let (lo, hi) = monotone_stroke_branch(links)
        .ok_or_else(|| Error::InvalidLinks(format!("no assemblable stroke for {links}")))?;
    let theta_lo = knee_angle(links, lo)?.theta_deg;
    let theta_hi = knee_angle(links, hi)?.theta_deg;
    if !(theta_target_deg <= theta_lo && theta_target_deg >= theta_hi) {
        return Err(Error::TargetOutOfRange {
            target_deg: theta_target_deg,
            min_deg: theta_hi,
            max_deg: theta_lo,
        });
    }
    if theta_target_deg == theta_lo {
        return Ok(lo);
    }
    if theta_target_deg == theta_hi {
        return Ok(hi);
    }

    // Invariant: θ(a) > target > θ(b).
    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let t = knee_angle(links, mid)?.theta_deg;
        if t == theta_target_deg {
            return Ok(mid);
        }
        if t > theta_target_deg {
            a = mid;
        } else {
            b = mid;
        }
    }
    let ta = knee_angle(links, a)?.theta_deg;
    let tb = knee_angle(links, b)?.theta_deg;
    Ok(if (ta - theta_target_deg).abs() <= (tb - theta_target_deg).abs() {
        a
    } else {
        b
    })
}

/// Where the coupler momentarily rotates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstantCenter {
    Finite(Point2<f64>),
    AtInfinity,
}

impl InstantCenter {
    pub fn point(&self) -> Option<Point2<f64>> {
        match self {
            InstantCenter::Finite(p) => Some(*p),
            InstantCenter::AtInfinity => None,
        }
    }
}

/// Joint coordinates (mm) of one pose in the ankle frame: ankle at the
/// origin, shank along +y, actuator bracket along +x.
///
/// The knee pivot about which the thigh rotates is the quadrilateral joint
/// between `l3` and `l4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLayout {
    pub ankle: Point2<f64>,
    /// Joint between shank segment `l3` and crank `l2` (crank pivot).
    pub crank_pivot: Point2<f64>,
    /// Joint between `l3` and the thigh link `l4`: the exoskeleton knee.
    pub knee: Point2<f64>,
    /// Joint between crank `l2` and coupler `l1`; the actuator rod end.
    pub rocker_joint: Point2<f64>,
    /// Joint between coupler `l1` and thigh link `l4`.
    pub thigh_joint: Point2<f64>,
    /// Actuator base at the end of bracket `l5`.
    pub actuator_base: Point2<f64>,
    pub instantaneous_center: InstantCenter,
}

/// Measured pairwise distances of a layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutDistances {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
    pub l7: f64,
    pub d: f64,
}

impl JointLayout {
    pub fn distances(&self) -> LayoutDistances {
        let dist = |a: &Point2<f64>, b: &Point2<f64>| (a - b).norm();
        LayoutDistances {
            l1: dist(&self.rocker_joint, &self.thigh_joint),
            l2: dist(&self.crank_pivot, &self.rocker_joint),
            l3: dist(&self.knee, &self.crank_pivot),
            l4: dist(&self.knee, &self.thigh_joint),
            l5: dist(&self.ankle, &self.actuator_base),
            l6: dist(&self.ankle, &self.crank_pivot),
            l7: dist(&self.actuator_base, &self.crank_pivot),
            d: dist(&self.actuator_base, &self.rocker_joint),
        }
    }

    /// Unit vector from the knee towards the thigh joint.
    pub fn thigh_direction(&self) -> Vector2<f64> {
        (self.thigh_joint - self.knee).normalize()
    }

    /// Unit vector from the knee towards the ankle.
    pub fn shank_direction(&self) -> Vector2<f64> {
        (self.ankle - self.knee).normalize()
    }
}

/// Intersection of circles `(c0, r0)` and `(c1, r1)` on the side of the
/// centre line given by `side` (+1 left of `c0 → c1`, −1 right).
///
/// `None` when the circles do not meet beyond the clamp tolerance.
fn circle_intersection(
    c0: Point2<f64>,
    r0: f64,
    c1: Point2<f64>,
    r1: f64,
    side: f64,
) -> Option<Point2<f64>> {
    let axis = c1 - c0;
    let dist = axis.norm();
    if dist == 0.0 {
        return None;
    }
    let u = axis / dist;
    let n = Vector2::new(-u.y, u.x);
    // Distance along the centre line from c0 to the chord, and the squared
    // half chord in factored form.
    let along = (dist * dist + r0 * r0 - r1 * r1) / (2.0 * dist);
    let h_sq = (r1 * r1 - (dist - r0) * (dist - r0)) * ((dist + r0) * (dist + r0) - r1 * r1)
        / (4.0 * dist * dist);
    let scale = (r0 * r0).max(f64::MIN_POSITIVE);
    if h_sq < -ACOS_CLAMP_TOL * 4.0 * scale {
        return None;
    }
    let h = h_sq.max(0.0).sqrt();
    Some(c0 + u * along + n * (side * h))
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Reconstructs the pose of `links` at stroke `d` from circle intersections.
pub fn joint_layout(links: &LinkSet, d: f64) -> Result<JointLayout> {
    knee_angle(links, d)?;

    let ankle = Point2::new(0.0, 0.0);
    let crank_pivot = Point2::new(0.0, links.l6());
    let knee = Point2::new(0.0, links.l6() + links.l3());
    let actuator_base = Point2::new(links.l5(), 0.0);

    // The rocker joint lies counter-clockwise of the crank-to-base ray.
    let rocker_joint = circle_intersection(crank_pivot, links.l2(), actuator_base, d, 1.0)
        .ok_or(Error::GeometryInfeasible {
            triangle: Triangle::Actuator,
            argument: f64::NAN,
        })?;

    // The thigh joint closes the quadrilateral on the far side of the
    // knee-to-rocker diagonal from the crank pivot.
    let diag = rocker_joint - knee;
    let crank_side = cross(&diag, &(crank_pivot - knee)).signum();
    let side = if crank_side == 0.0 { 1.0 } else { -crank_side };
    let thigh_joint = circle_intersection(knee, links.l4(), rocker_joint, links.l1(), side)
        .ok_or(Error::GeometryInfeasible {
            triangle: Triangle::Output,
            argument: f64::NAN,
        })?;

    let instantaneous_center =
        line_intersection(crank_pivot, rocker_joint, knee, thigh_joint);

    Ok(JointLayout {
        ankle,
        crank_pivot,
        knee,
        rocker_joint,
        thigh_joint,
        actuator_base,
        instantaneous_center,
    })
}

/// Intersection of line `p0–p1` with line `q0–q1`.
fn line_intersection(
    p0: Point2<f64>,
    p1: Point2<f64>,
    q0: Point2<f64>,
    q1: Point2<f64>,
) -> InstantCenter {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = cross(&r, &s);
    let sin_angle = denom / (r.norm() * s.norm());
    if !sin_angle.is_finite() || sin_angle.abs() < PARALLEL_TOL_RAD {
        return InstantCenter::AtInfinity;
    }
    let t = cross(&(q0 - p0), &s) / denom;
    InstantCenter::Finite(p0 + r * t)
}

/// Signed angle (rad) from `a` to `b`, in (−π, π].
pub(crate) fn signed_angle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    cross(a, b).atan2(a.dot(b))
}

/// Knee angle measured from the reconstructed coordinates: 180° minus the
/// angle swept from the shank ray to the thigh ray.
pub fn layout_knee_angle_deg(layout: &JointLayout) -> f64 {
    let shank = layout.crank_pivot - layout.knee;
    let thigh = layout.thigh_joint - layout.knee;
    let toward_rocker = layout.rocker_joint - layout.knee;
    let sense = cross(&shank, &toward_rocker).signum();
    let sense = if sense == 0.0 { 1.0 } else { sense };
    let mut swept = sense * signed_angle(&shank, &thigh);
    if swept < 0.0 {
        swept += 2.0 * PI;
    }
    180.0 - swept.to_degrees()
}

/// One sample of a range-of-motion sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomPoint {
    pub d_mm: f64,
    /// `None` when the mechanism cannot be assembled at this stroke.
    pub theta_deg: Option<f64>,
}

impl RomPoint {
    pub fn is_feasible(&self) -> bool {
        self.theta_deg.is_some()
    }
}

/// Evenly spaced stroke values from `lo` to `hi`, both endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Knee angle over `n` evenly spaced strokes in `[d_lo, d_hi]`.
pub fn rom_curve(links: &LinkSet, d_lo: f64, d_hi: f64, n: usize) -> Result<Vec<RomPoint>> {
    if !(d_lo < d_hi) || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rom curve needs d_lo < d_hi and n >= 2, got [{d_lo}, {d_hi}] with n = {n}"
        )));
    }
    Ok(linspace(d_lo, d_hi, n)
        .into_iter()
        .map(|d| RomPoint {
            d_mm: d,
            theta_deg: theta_at(links, d),
        })
        .collect())
}

/// Writes a sweep as `d_mm,theta_deg,status`.
pub fn write_rom_csv<W: Write>(points: &[RomPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "d_mm,theta_deg,status")?;
    for p in points {
        match p.theta_deg {
            Some(t) => writeln!(out, "{},{},ok", p.d_mm, t)?,
            None => writeln!(out, "{},,infeasible", p.d_mm)?,
        }
    }
    Ok(())
}
