//! Marker-trajectory gait comparison.
//!
//! Marker tables (`t,ax,ay,kx,ky,hx,hy,wx,wy`: time in seconds, then ankle,
//! knee, hip and waist positions) are turned into knee angles with
//!
//! ```text
//! cos θ = (AK · KH) / (|AK| |KH|),   AK = K − A,  KH = H − K
//! ```
//!
//! so a straight leg reads 0°. Two recordings are compared on normalised
//! progress `s = (t − t_first) / (t_last − t_first)`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Point2, Vector2};

use crate::kinematics::{layout_knee_angle_deg, linspace, LinkSet};
use crate::simulation::{simulate_sts, FrameStatus};
use crate::{Error, Result};

pub const MARKER_HEADER: [&str; 9] = ["t", "ax", "ay", "kx", "ky", "hx", "hy", "wx", "wy"];

/// Below this `|cos θ| − 1` excess the cosine is clamped instead of the
/// sample being flagged.
const COS_CLAMP_TOL: f64 = 1e-12;

/// Guard on the human value in the relative-error denominator.
pub const RELATIVE_ERROR_EPS: f64 = 1e-9;

/// Synthetic marker placement along the thigh and trunk (mm).
pub const SYNTHETIC_HIP_DISTANCE_MM: f64 = 420.0;
pub const SYNTHETIC_TRUNK_MM: f64 = 150.0;

/// Frame period of synthetic recordings (s).
pub const SYNTHETIC_FRAME_PERIOD_S: f64 = 1.0 / 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Human,
    Exoskeleton,
    Synthetic,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Human => "human",
            Source::Exoskeleton => "exoskeleton",
            Source::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerSample {
    pub t: f64,
    pub ankle: Point2<f64>,
    pub knee: Point2<f64>,
    pub hip: Point2<f64>,
    pub waist: Point2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSeries {
    pub source: Source,
    pub samples: Vec<MarkerSample>,
    /// Rows discarded at ingest because a field was missing or unparseable.
    pub dropped: usize,
}

fn parse_row(fields: &csv::StringRecord) -> Option<MarkerSample> {
    if fields.len() != MARKER_HEADER.len() {
        return None;
    }
    let mut v = [0.0; 9];
    for (slot, f) in v.iter_mut().zip(fields.iter()) {
        *slot = f.trim().parse::<f64>().ok().filter(|x| x.is_finite())?;
    }
    Some(MarkerSample {
        t: v[0],
        ankle: Point2::new(v[1], v[2]),
        knee: Point2::new(v[3], v[4]),
        hip: Point2::new(v[5], v[6]),
        waist: Point2::new(v[7], v[8]),
    })
}

/// Parses a marker table. Rows with a missing or unparseable field are
/// dropped and counted; the remaining times must increase strictly.
pub fn read_markers<R: Read>(input: R, origin: &str, source: Source) -> Result<MarkerSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| Error::csv(origin, e))?.clone();
    if headers.iter().ne(MARKER_HEADER) {
        return Err(Error::MalformedHeader {
            expected: MARKER_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut samples: Vec<MarkerSample> = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(Error::csv(origin, e)),
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let Some(sample) = parse_row(&record) else {
            dropped += 1;
            continue;
        };
        if let Some(prev) = samples.last() {
            if !(sample.t > prev.t) {
                let row = record.position().map_or(0, |p| p.line() as usize);
                return Err(Error::NonMonotonicTime { row, t: sample.t });
            }
        }
        samples.push(sample);
    }
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            found: samples.len(),
            required: 2,
        });
    }
    Ok(MarkerSeries {
        source,
        samples,
        dropped,
    })
}

pub fn load_markers(path: impl AsRef<Path>, source: Source) -> Result<MarkerSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_markers(file, &path.display().to_string(), source)
}

pub fn write_markers<W: Write>(series: &MarkerSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", MARKER_HEADER.join(","))?;
    for s in &series.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.t, s.ankle.x, s.ankle.y, s.knee.x, s.knee.y, s.hip.x, s.hip.y, s.waist.x, s.waist.y
        )?;
    }
    Ok(())
}

/// Knee angle (degrees) between shank vector `AK` and thigh vector `KH`.
/// `None` when either vector has zero length.
pub fn marker_knee_angle(ankle: Point2<f64>, knee: Point2<f64>, hip: Point2<f64>) -> Option<f64> {
    let ak: Vector2<f64> = knee - ankle;
    let kh: Vector2<f64> = hip - knee;
    let norms = ak.norm() * kh.norm();
    if !(norms > 0.0) || !norms.is_finite() {
        return None;
    }
    let cos = ak.dot(&kh) / norms;
    if cos.abs() > 1.0 + COS_CLAMP_TOL {
        return None;
    }
    Some(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSample {
    pub t: f64,
    /// `None` where the sample's marker vectors are degenerate.
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    pub source: Source,
    pub samples: Vec<AngleSample>,
}

impl AngleSeries {
    /// Indices of samples with degenerate marker vectors.
    pub fn degenerate(&self) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.theta_deg.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// `(t, θ)` of the non-degenerate samples.
    pub fn valid(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| s.theta_deg.map(|v| (s.t, v)))
            .collect()
    }
}

pub fn knee_angle_series(series: &MarkerSeries) -> AngleSeries {
    AngleSeries {
        source: series.source,
        samples: series
            .samples
            .iter()
            .map(|s| AngleSample {
                t: s.t,
                theta_deg: marker_knee_angle(s.ankle, s.knee, s.hip),
            })
            .collect(),
    }
}

/// Affine map from marker angles to the mechanism's knee-angle convention,
/// `θ_mechanism = slope · θ_marker + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConventionMap {
    pub slope: f64,
    pub offset: f64,
}

impl ConventionMap {
    /// Calibrates the offset (unit slope) on the standing pose of `links`:
    /// synthetic markers placed on that pose must read the mechanism angle.
    pub fn calibrate(links: &LinkSet, d_standing: f64) -> Result<Self> {
        let layout = crate::kinematics::joint_layout(links, d_standing)?;
        let mech = crate::kinematics::knee_angle(links, d_standing)?.theta_deg;
        let m = markers_for_layout(0.0, &layout);
        let marker = marker_knee_angle(m.ankle, m.knee, m.hip).ok_or(Error::InvalidArgument(
            "degenerate marker vectors at the standing pose".into(),
        ))?;
        Ok(Self {
            slope: 1.0,
            offset: mech - marker,
        })
    }

    pub fn apply(&self, marker_deg: f64) -> f64 {
        self.slope * marker_deg + self.offset
    }
}

/// Marker positions for one mechanism pose: ankle at the ankle joint, knee
/// on the exoskeleton knee pivot, hip along the thigh link direction, waist
/// straight above the hip.
pub fn markers_for_layout(t: f64, layout: &crate::kinematics::JointLayout) -> MarkerSample {
    let hip = layout.knee + layout.thigh_direction() * SYNTHETIC_HIP_DISTANCE_MM;
    MarkerSample {
        t,
        ankle: layout.ankle,
        knee: layout.knee,
        hip,
        waist: hip + Vector2::new(0.0, SYNTHETIC_TRUNK_MM),
    }
}

/// Synthetic sit-to-stand recording: `n` poses from `d_lo` (seated) to
/// `d_hi`, one frame period apart. Also returns the mechanism angle of
/// each pose.
pub fn synthetic_sts(links: &LinkSet, d_lo: f64, d_hi: f64, n: usize) -> Result<(MarkerSeries, Vec<f64>)> {
    let frames = simulate_sts(links, d_lo, d_hi, n)?;
    let mut samples = Vec::with_capacity(n);
    let mut mech = Vec::with_capacity(n);
    for (i, f) in frames.frames.iter().enumerate() {
        let (FrameStatus::Ok, Some(layout), Some(theta)) = (f.status, &f.layout, f.theta_deg) else {
            return Err(Error::InvalidArgument(format!(
                "mechanism cannot be assembled at d = {} mm",
                f.d_mm
            )));
        };
        samples.push(markers_for_layout(i as f64 * SYNTHETIC_FRAME_PERIOD_S, layout));
        debug_assert!((layout_knee_angle_deg(layout) - theta).abs() < 1e-6);
        mech.push(theta);
    }
    Ok((
        MarkerSeries {
            source: Source::Synthetic,
            samples,
            dropped: 0,
        },
        mech,
    ))
}

pub fn write_synthetic_sts(links: &LinkSet, d_lo: f64, d_hi: f64, n: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (series, _) = synthetic_sts(links, d_lo, d_hi, n)?;
    let mut buf = Vec::new();
    write_markers(&series, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Values that can be linearly interpolated.
pub trait Lerp: Copy {
    fn lerp(a: Self, b: Self, w: f64) -> Self;
}

impl Lerp for f64 {
    fn lerp(a: Self, b: Self, w: f64) -> Self {
        if w == 0.0 {
            a
        } else {
            a + (b - a) * w
        }
    }
}

impl Lerp for Point2<f64> {
    fn lerp(a: Self, b: Self, w: f64) -> Self {
        Point2::new(f64::lerp(a.x, b.x, w), f64::lerp(a.y, b.y, w))
    }
}

/// Two series sampled at common normalised progress values.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled<T> {
    pub s: Vec<f64>,
    pub a: Vec<T>,
    pub b: Vec<T>,
}

fn progress<T>(series: &[(f64, T)]) -> Result<Vec<f64>> {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(Error::NoOverlap);
    };
    let span = last.0 - first.0;
    if !(span > 0.0) {
        return Err(Error::NoOverlap);
    }
    Ok(series.iter().map(|(t, _)| (t - first.0) / span).collect())
}

fn interpolate<T: Lerp>(s: &[f64], v: &[(f64, T)], at: f64) -> T {
    let k = s.partition_point(|&x| x <= at);
    if k == 0 {
        return v[0].1;
    }
    if k >= s.len() {
        return v[s.len() - 1].1;
    }
    let (s0, s1) = (s[k - 1], s[k]);
    T::lerp(v[k - 1].1, v[k].1, (at - s0) / (s1 - s0))
}

/// Normalises both series to progress `s ∈ [0, 1]` by their time spans and
/// interpolates them linearly at `n` evenly spaced progress values.
pub fn align_and_resample<T: Lerp>(a: &[(f64, T)], b: &[(f64, T)], n: usize) -> Result<Resampled<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 resample points, got {n}")));
    }
    let sa = progress(a)?;
    let sb = progress(b)?;
    let s = linspace(0.0, 1.0, n);
    Ok(Resampled {
        a: s.iter().map(|&x| interpolate(&sa, a, x)).collect(),
        b: s.iter().map(|&x| interpolate(&sb, b, x)).collect(),
        s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Fraction of points whose error is at most the zero tolerance.
    pub fraction_zero: f64,
    pub zero_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub s: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorSeries {
    pub fn summary(&self, zero_tolerance: f64) -> ErrorSummary {
        let n = self.errors.len();
        if n == 0 {
            return ErrorSummary {
                max: 0.0,
                mean: 0.0,
                median: 0.0,
                fraction_zero: 1.0,
                zero_tolerance,
            };
        }
        let mut sorted = self.errors.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        ErrorSummary {
            max: sorted[n - 1],
            mean: self.errors.iter().sum::<f64>() / n as f64,
            median,
            fraction_zero: self.errors.iter().filter(|&&e| e <= zero_tolerance).count() as f64 / n as f64,
            zero_tolerance,
        }
    }
}

fn scalar_error(human: f64, exo: f64) -> f64 {
    (human - exo).abs() / human.abs().max(RELATIVE_ERROR_EPS)
}

/// Pointwise `|h − x| / max(|h|, ε)` with the human series in `a`.
pub fn relative_error(pairs: &Resampled<f64>) -> ErrorSeries {
    ErrorSeries {
        s: pairs.s.clone(),
        errors: pairs.a.iter().zip(&pairs.b).map(|(&h, &x)| scalar_error(h, x)).collect(),
    }
}

/// Relative error per coordinate, combined as a Euclidean norm.
pub fn relative_error_points(pairs: &Resampled<Point2<f64>>) -> ErrorSeries {
    ErrorSeries {
        s: pairs.s.clone(),
        errors: pairs
            .a
            .iter()
            .zip(&pairs.b)
            .map(|(h, x)| scalar_error(h.x, x.x).hypot(scalar_error(h.y, x.y)))
            .collect(),
    }
}

/// Writes `s,human,exo,rel_err`.
pub fn write_error_csv<W: Write>(pairs: &Resampled<f64>, errors: &ErrorSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "s,human,exo,rel_err")?;
    for i in 0..errors.errors.len() {
        writeln!(out, "{},{},{},{}", pairs.s[i], pairs.a[i], pairs.b[i], errors.errors[i])?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(summary: &ErrorSummary, mut out: W) -> std::io::Result<()> {
    writeln!(out, "max = {}", summary.max)?;
    writeln!(out, "mean = {}", summary.mean)?;
    writeln!(out, "median = {}", summary.median)?;
    writeln!(out, "fraction_zero = {}", summary.fraction_zero)?;
    writeln!(out, "zero_tolerance = {}", summary.zero_tolerance)
}

/// Knee-angle and knee-marker comparison of two recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitComparison {
    pub angles: Resampled<f64>,
    pub angle_errors: ErrorSeries,
    pub knee_path_errors: ErrorSeries,
    pub human_degenerate: usize,
    pub exo_degenerate: usize,
}

pub fn compare_recordings(human: &MarkerSeries, exo: &MarkerSeries, n: usize) -> Result<GaitComparison> {
    let ha = knee_angle_series(human);
    let xa = knee_angle_series(exo);
    let angles = align_and_resample(&ha.valid(), &xa.valid(), n)?;
    let angle_errors = relative_error(&angles);
    let knee = |m: &MarkerSeries| m.samples.iter().map(|s| (s.t, s.knee)).collect::<Vec<_>>();
    let knees = align_and_resample(&knee(human), &knee(exo), n)?;
    Ok(GaitComparison {
        angle_errors,
        knee_path_errors: relative_error_points(&knees),
        human_degenerate: ha.degenerate().len(),
        exo_degenerate: xa.degenerate().len(),
        angles,
    })
}
