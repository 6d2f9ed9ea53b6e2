//! SVG frames of the mechanism.
//!
//! All frames share one mm-to-canvas transform, fitted to the first
//! feasible frame, so a frame sequence plays back without jitter.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point2;

use super::{unit_or_zero, Frame, FrameSeries};
use crate::kinematics::{InstantCenter, JointLayout};
use crate::{Error, Result};

/// Width and height of every frame, in SVG user units.
pub const CANVAS_SIZE: f64 = 800.0;

/// Fraction of the canvas left empty around the fitted bounding box.
const MARGIN: f64 = 0.2;

/// Portion of the minimum stroke taken up by the cylinder body.
const CYLINDER_FRACTION: f64 = 0.55;

#[derive(Debug, Clone, Copy)]
struct Transform {
    scale: f64,
    center: Point2<f64>,
}

impl Transform {
    fn fit(layout: Option<&JointLayout>) -> Self {
        let Some(l) = layout else {
            return Self {
                scale: 1.0,
                center: Point2::origin(),
            };
        };
        let pts = joints(l);
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in &pts {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
        Self {
            scale: CANVAS_SIZE * (1.0 - 2.0 * MARGIN) / extent,
            center: nalgebra::center(&lo, &hi),
        }
    }

    /// Canvas coordinates; the y axis points down on the canvas.
    fn apply(&self, p: Point2<f64>) -> (f64, f64) {
        (
            CANVAS_SIZE / 2.0 + (p.x - self.center.x) * self.scale,
            CANVAS_SIZE / 2.0 - (p.y - self.center.y) * self.scale,
        )
    }
}

fn joints(l: &JointLayout) -> [Point2<f64>; 6] {
    [
        l.ankle,
        l.crank_pivot,
        l.knee,
        l.rocker_joint,
        l.thigh_joint,
        l.actuator_base,
    ]
}

fn line(svg: &mut String, t: &Transform, a: Point2<f64>, b: Point2<f64>, class: &str) {
    let (x1, y1) = t.apply(a);
    let (x2, y2) = t.apply(b);
    let _ = writeln!(
        svg,
        r#"  <line class="{class}" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#
    );
}

fn frame_svg(frame: &Frame, t: &Transform, cylinder_len: f64) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        CANVAS_SIZE
    );
    svg.push_str(concat!(
        "  <style>\n",
        "    line { stroke: #222; stroke-width: 4; stroke-linecap: round; }\n",
        "    .shank { stroke: #555; stroke-width: 6; }\n",
        "    .cylinder { stroke: #1f5fa8; stroke-width: 14; }\n",
        "    .piston { stroke: #7aa6d6; stroke-width: 5; }\n",
        "    .ic { stroke: #c0392b; stroke-width: 2; }\n",
        "    circle { fill: #fff; stroke: #222; stroke-width: 2; }\n",
        "    .knee { fill: #f5b041; stroke-width: 3; }\n",
        "    text { font-family: monospace; font-size: 18px; }\n",
        "  </style>\n",
    ));
    let _ = writeln!(svg, r#"  <rect width="100%" height="100%" fill="white"/>"#);

    match (&frame.layout, frame.theta_deg) {
        (Some(l), Some(theta)) => {
            line(&mut svg, t, l.ankle, l.crank_pivot, "shank");
            line(&mut svg, t, l.crank_pivot, l.knee, "shank");
            line(&mut svg, t, l.ankle, l.actuator_base, "bracket");
            line(&mut svg, t, l.crank_pivot, l.rocker_joint, "crank");
            line(&mut svg, t, l.rocker_joint, l.thigh_joint, "coupler");
            line(&mut svg, t, l.knee, l.thigh_joint, "thigh");

            let axis = unit_or_zero(l.rocker_joint - l.actuator_base);
            let stroke = (l.rocker_joint - l.actuator_base).norm();
            let body_end = l.actuator_base + axis * cylinder_len.min(stroke);
            line(&mut svg, t, l.actuator_base, l.rocker_joint, "piston");
            line(&mut svg, t, l.actuator_base, body_end, "cylinder");

            for p in joints(l) {
                let (x, y) = t.apply(p);
                let _ = writeln!(svg, r#"  <circle cx="{x:.3}" cy="{y:.3}" r="5"/>"#);
            }
            let (kx, ky) = t.apply(l.knee);
            let _ = writeln!(svg, r#"  <circle class="knee" cx="{kx:.3}" cy="{ky:.3}" r="10"/>"#);

            if let InstantCenter::Finite(ic) = l.instantaneous_center {
                let (x, y) = t.apply(ic);
                if (0.0..=CANVAS_SIZE).contains(&x) && (0.0..=CANVAS_SIZE).contains(&y) {
                    let _ = writeln!(
                        svg,
                        r#"  <path class="ic" d="M {:.3} {y:.3} H {:.3} M {x:.3} {:.3} V {:.3}"/>"#,
                        x - 8.0,
                        x + 8.0,
                        y - 8.0,
                        y + 8.0
                    );
                }
            }
            let _ = writeln!(
                svg,
                r#"  <text x="20" y="30">d = {:.3} mm   theta = {theta:.3} deg</text>"#,
                frame.d_mm
            );
        }
        _ => {
            let _ = writeln!(
                svg,
                r#"  <text x="20" y="30">d = {:.3} mm   infeasible</text>"#,
                frame.d_mm
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub(crate) fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.svg")
}

/// Writes `frame_NNNN.svg` per frame and `index.csv` listing each file with
/// its stroke and angle. Returns the paths written, index last.
pub fn render_frames(series: &FrameSeries, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let first = series.feasible().next().and_then(|f| f.layout.as_ref());
    let transform = Transform::fit(first);
    let cylinder_len = CYLINDER_FRACTION * series.d_lo;

    let mut written = Vec::with_capacity(series.len() + 1);
    let mut index = String::from("file,d_mm,theta_deg,status\n");
    for (i, frame) in series.frames.iter().enumerate() {
        let name = frame_file_name(i);
        let path = out_dir.join(&name);
        std::fs::write(&path, frame_svg(frame, &transform, cylinder_len))
            .map_err(|e| Error::io(&path, e))?;
        match frame.theta_deg {
            Some(theta) => {
                let _ = writeln!(index, "{name},{},{theta},ok", frame.d_mm);
            }
            None => {
                let _ = writeln!(index, "{name},{},,infeasible", frame.d_mm);
            }
        }
        written.push(path);
    }
    let index_path = out_dir.join("index.csv");
    std::fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))?;
    written.push(index_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::LinkSet;
    use crate::simulation::simulate_sts;
    use crate::REFERENCE_OPTIMUM;

    #[test]
    fn four_frames_and_an_index() {
        let links = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
        let s = simulate_sts(&links, 242.0, 370.0, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = render_frames(&s, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let index = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
        assert_eq!(index.lines().count(), 5);
        assert!(index.lines().nth(1).unwrap().starts_with("frame_0000.svg,242,"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let links = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
        let s = simulate_sts(&links, 242.0, 370.0, 3).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = render_frames(&s, a.path()).unwrap();
        let fb = render_frames(&s, b.path()).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn first_frame_fits_the_canvas() {
        let links = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
        let s = simulate_sts(&links, 242.0, 300.0, 2).unwrap();
        let l = s.frames[0].layout.unwrap();
        let t = Transform::fit(Some(&l));
        for p in joints(&l) {
            let (x, y) = t.apply(p);
            assert!(x >= 0.0 && x <= CANVAS_SIZE && y >= 0.0 && y <= CANVAS_SIZE);
        }
    }
}
