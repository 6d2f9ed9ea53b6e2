//! Sit-to-stand frames, trajectories and renderings.

use kneelink::kinematics::{layout_knee_angle_deg, InstantCenter};
use kneelink::optimizer::{solve, BarrierParams};
use kneelink::problem::{build_problem, ProblemConfig};
use kneelink::simulation::{
    actuator_crank_angle_deg, knee_trajectory, max_center_jump, read_trajectory_csv, render_frames,
    simulate_sts, sts_stroke_range, validate_stroke, write_trajectory_csv, FrameStatus,
};
use kneelink::{joint_layout, knee_angle, stroke_for_angle, LinkSet, BASELINE_DESIGN, REFERENCE_OPTIMUM};

fn reference() -> LinkSet {
    LinkSet::from_array(REFERENCE_OPTIMUM).unwrap()
}

#[test]
fn seated_and_standing_poses_bound_the_sweep() {
    let links = reference();
    let (lo, hi) = sts_stroke_range(&links, 242.0).unwrap();
    let s = simulate_sts(&links, lo, hi, 2).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.frames[0].d_mm, lo);
    assert_eq!(s.frames[1].d_mm, hi);
    let seated = s.frames[0].theta_deg.unwrap();
    let standing = s.frames[1].theta_deg.unwrap();
    assert!((seated - 148.0).abs() <= 2.0, "{seated}");
    assert!((standing - 2.0).abs() < 1e-9, "{standing}");
}

#[test]
fn dense_sweep_passes_through_the_intermediate_poses() {
    let links = reference();
    let (lo, hi) = sts_stroke_range(&links, 242.0).unwrap();
    let s = simulate_sts(&links, lo, hi, 500).unwrap();
    for target in [70.0, 110.0] {
        let nearest = s
            .feasible()
            .map(|f| f.theta_deg.unwrap())
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap();
        assert!((nearest - target).abs() <= 0.5, "{target}: {nearest}");
    }
}

#[test]
fn frames_agree_with_the_analytic_angle_and_their_own_geometry() {
    let links = reference();
    let s = simulate_sts(&links, 242.0, 379.0, 200).unwrap();
    assert!(s.frames.windows(2).all(|w| w[0].d_mm < w[1].d_mm));
    for f in s.feasible() {
        let k = knee_angle(&links, f.d_mm).unwrap();
        assert_eq!(f.theta_deg, Some(k.theta_deg));
        let from_pose = layout_knee_angle_deg(f.layout.as_ref().unwrap());
        assert!((from_pose - k.theta_deg).abs() < 1e-9, "{} vs {}", from_pose, k.theta_deg);
    }
}

#[test]
fn strokes_beyond_the_reach_are_flagged_not_dropped() {
    let links = reference();
    let s = simulate_sts(&links, 242.0, 400.0, 50).unwrap();
    assert_eq!(s.len(), 50);
    assert_eq!(s.frames.last().unwrap().status, FrameStatus::Infeasible);
    assert!(s.frames.last().unwrap().layout.is_none());
}

#[test]
fn instantaneous_centre_moves_continuously() {
    let links = reference();
    let (lo, hi) = sts_stroke_range(&links, 242.0).unwrap();
    let s = simulate_sts(&links, lo, hi, 500).unwrap();
    let t = knee_trajectory(&s);
    assert_eq!(t.len(), s.feasible().count());
    // The reference links are close to a parallelogram, so the centre sits
    // far from the knee and sweeps fast; continuity shows as jumps that
    // halve when the frame spacing halves.
    let coarse = max_center_jump(&t);
    let fine = max_center_jump(&knee_trajectory(&simulate_sts(&links, lo, hi, 999).unwrap()));
    assert!(coarse.is_finite() && coarse < 100.0, "{coarse} mm");
    let ratio = coarse / fine;
    assert!((1.8..=2.2).contains(&ratio), "{coarse} / {fine}");
}

#[test]
fn single_frame_trajectory() {
    let links = reference();
    let mut s = simulate_sts(&links, 242.0, 300.0, 2).unwrap();
    s.frames.truncate(1);
    assert_eq!(knee_trajectory(&s).len(), 1);
}

#[test]
fn trajectory_csv_round_trip() {
    let links = reference();
    let s = simulate_sts(&links, 242.0, 370.0, 64).unwrap();
    let t = knee_trajectory(&s);
    let mut buf = Vec::new();
    write_trajectory_csv(&t, &mut buf).unwrap();
    let back = read_trajectory_csv(buf.as_slice(), "mem").unwrap();
    assert_eq!(back, t);
}

#[test]
fn parallelogram_has_its_centre_at_infinity() {
    // l1 = l3 and l2 = l4: opposite sides equal.
    let links = LinkSet::new(60.0, 70.0, 60.0, 70.0, 100.0, 280.0).unwrap();
    let d = links.l7() - links.l2() + 40.0;
    let l = joint_layout(&links, d).unwrap();
    assert_eq!(l.instantaneous_center, InstantCenter::AtInfinity);
}

#[test]
fn reference_seated_pose_is_nearly_collinear() {
    let l = joint_layout(&reference(), 242.0).unwrap();
    let angle = actuator_crank_angle_deg(&l);
    // The reference links leave 2.2 µm of singularity margin.
    assert!((angle - 0.524).abs() < 1e-3, "{angle}");
}

#[test]
fn solved_optimum_is_collinear_at_minimum_stroke() {
    let p = build_problem(&ProblemConfig::default()).unwrap();
    let r = solve(&p, &BASELINE_DESIGN, &BarrierParams::default()).unwrap();
    let l = joint_layout(&r.x_star.links().unwrap(), 242.0).unwrap();
    assert!(actuator_crank_angle_deg(&l) < 0.5);
}

#[test]
fn validation_stroke_matches_its_frame_exactly() {
    let links = reference();
    let (_, p) = validate_stroke(&links, 242.0, 370.0, 0.5, 252.0).unwrap();
    assert_eq!(p.frame_d_mm, 252.0);
    assert_eq!(p.discrepancy_deg(), 0.0);
}

#[test]
fn rendered_files_are_deterministic_and_counted() {
    let links = reference();
    let d148 = stroke_for_angle(&links, 148.0).unwrap();
    let d2 = stroke_for_angle(&links, 2.0).unwrap();
    let s = simulate_sts(&links, d148, d2, 4).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = render_frames(&s, a.path()).unwrap();
    let fb = render_frames(&s, b.path()).unwrap();
    assert_eq!(fa.len(), 5);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let svg = std::fs::read_to_string(&fa[0]).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"class="knee""#));
}
