//! Kinematics against an independent vector-construction oracle.

use kneelink::kinematics::{feasible_stroke_interval, grashof_classify};
use kneelink::problem::{build_problem, ProblemConfig, DEFAULT_LOWER, DEFAULT_UPPER, FEASIBILITY_EPS};
use kneelink::{
    joint_layout, knee_angle, rom_curve, singularity_margin, stroke_for_angle, Error, LinkSet,
    BASELINE_DESIGN, REFERENCE_OPTIMUM,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type P = (f64, f64);

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

/// Circle-circle intersection by the textbook chord construction, picking
/// the root on the requested side of the line c0 -> c1.
fn meet(c0: P, r0: f64, c1: P, r1: f64, left: bool) -> Option<P> {
    let (dx, dy) = sub(c1, c0);
    let dist = dx.hypot(dy);
    let a = (r0 * r0 - r1 * r1 + dist * dist) / (2.0 * dist);
    let h2 = r0 * r0 - a * a;
    if h2 < -1e-9 * r0 * r0 {
        return None;
    }
    let h = h2.max(0.0).sqrt();
    let (mx, my) = (c0.0 + a * dx / dist, c0.1 + a * dy / dist);
    let s = if left { 1.0 } else { -1.0 };
    Some((mx - s * h * dy / dist, my + s * h * dx / dist))
}

fn cross(a: P, b: P) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// Knee angle measured on an explicitly placed mechanism: ankle at the
/// origin, shank on +y, bracket on +x, rocker joint counter-clockwise of the
/// crank-to-base ray, thigh joint across the knee-rocker diagonal from the
/// crank pivot. The knee angle is 180° minus the angle at the knee between
/// the shank and thigh rays.
fn oracle_theta(x: &[f64; 6], d: f64) -> Option<f64> {
    let [l1, l2, l3, l4, l5, l6] = *x;
    let crank = (0.0, l6);
    let knee = (0.0, l6 + l3);
    let base = (l5, 0.0);
    let rocker = meet(crank, l2, base, d, true)?;
    let diag = sub(rocker, knee);
    let crank_side = cross(diag, sub(crank, knee)) > 0.0;
    let thigh = meet(knee, l4, rocker, l1, !crank_side)?;
    let u = sub(crank, knee);
    let v = sub(thigh, knee);
    let between = cross(u, v).abs().atan2(u.0 * v.0 + u.1 * v.1);
    Some(180.0 - between.to_degrees())
}

fn random_feasible_design(rng: &mut ChaCha8Rng) -> [f64; 6] {
    let p = build_problem(&ProblemConfig::default()).unwrap();
    loop {
        let x: [f64; 6] = std::array::from_fn(|i| rng.gen_range(DEFAULT_LOWER[i]..DEFAULT_UPPER[i]));
        if p.is_strictly_feasible(&x, FEASIBILITY_EPS) {
            return x;
        }
    }
}

#[test]
fn analytic_angle_matches_vector_construction_on_random_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 1000 {
        let x = random_feasible_design(&mut rng);
        let links = LinkSet::from_array(x).unwrap();
        let Some((lo, hi)) = feasible_stroke_interval(&links) else { continue };
        let d = rng.gen_range(lo.max(242.0)..hi.max(lo.max(242.0) + 1e-9));
        let Ok(k) = knee_angle(&links, d) else { continue };
        // The unsigned oracle cannot tell hyperextension from flexion.
        if !(0.5..179.5).contains(&k.theta_deg) {
            continue;
        }
        let oracle = oracle_theta(&x, d).expect("oracle assembles every analytic pose");
        worst = worst.max((oracle - k.theta_deg).abs());
        checked += 1;
    }
    assert!(worst < 1e-9, "worst disagreement {worst:e} deg");
}

#[test]
fn reference_and_baseline_angles_against_the_oracle() {
    let opt = knee_angle(&LinkSet::from_array(REFERENCE_OPTIMUM).unwrap(), 242.0).unwrap();
    let opt_oracle = oracle_theta(&REFERENCE_OPTIMUM, 242.0).unwrap();
    assert!((opt.theta_deg - opt_oracle).abs() < 1e-9);
    assert!((opt.theta_deg - 148.0).abs() <= 2.0, "{}", opt.theta_deg);
    assert!((opt.theta_deg - 148.5715).abs() < 1e-4, "{}", opt.theta_deg);

    let base = knee_angle(&LinkSet::from_array(BASELINE_DESIGN).unwrap(), 242.0).unwrap();
    let base_oracle = oracle_theta(&BASELINE_DESIGN, 242.0).unwrap();
    assert!((base.theta_deg - base_oracle).abs() < 1e-9);
    assert!((base.theta_deg - 85.1).abs() <= 0.5, "{}", base.theta_deg);
    assert!((base.theta_deg - 85.119).abs() < 1e-3, "{}", base.theta_deg);
}

#[test]
fn singularity_margins_of_the_two_designs() {
    let opt = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
    let s = singularity_margin(&opt, 242.0);
    assert!(s.abs() < 0.2, "{s}");
    let oracle = 68.84 + 242.0 - 118.63f64.hypot(287.31);
    assert!((s - oracle).abs() < 1e-9);

    let base = LinkSet::from_array(BASELINE_DESIGN).unwrap();
    assert!((singularity_margin(&base, 242.0) - 78.76).abs() < 0.01);

    let exact = opt.l7() - opt.l2();
    assert_eq!(singularity_margin(&opt, exact), 0.0);
}

#[test]
fn grashof_margins() {
    let opt = grashof_classify(&LinkSet::from_array(REFERENCE_OPTIMUM).unwrap());
    assert!((opt.margin_mm - 0.108).abs() < 1e-9);
    assert!(opt.is_crank_rocker());
    let base = grashof_classify(&LinkSet::from_array(BASELINE_DESIGN).unwrap());
    assert!((base.margin_mm - 5.0).abs() < 1e-12);
    assert!(!base.is_crank_rocker());
    let square = grashof_classify(&LinkSet::new(100.0, 100.0, 100.0, 100.0, 80.0, 235.0).unwrap());
    assert_eq!(square.margin_mm, 0.0);
    assert!(!square.is_crank_rocker());
}

#[test]
fn beyond_the_singularity_the_actuator_triangle_fails() {
    let opt = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
    let d = opt.l7() - opt.l2() - 0.01;
    assert!(singularity_margin(&opt, d) < 0.0);
    match knee_angle(&opt, d) {
        Err(Error::GeometryInfeasible { triangle, .. }) => {
            assert!(triangle.to_string().contains("actuator"), "{triangle}")
        }
        other => panic!("expected actuator failure, got {other:?}"),
    }
}

#[test]
fn rom_is_strictly_decreasing_to_the_standing_stroke() {
    let links = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
    let standing = stroke_for_angle(&links, 2.0).unwrap();
    assert!((standing - 373.9624).abs() < 1e-3, "{standing}");
    let curve = rom_curve(&links, 242.0, standing, 500).unwrap();
    assert_eq!(curve.len(), 500);
    let thetas: Vec<f64> = curve.iter().map(|p| p.theta_deg.unwrap()).collect();
    assert!(thetas.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(thetas[0], knee_angle(&links, 242.0).unwrap().theta_deg);
    assert!((thetas[499] - 2.0).abs() < 1e-9);
    // Nonlinear: the slope changes along the stroke.
    let slope = |i: usize| thetas[i + 1] - thetas[i];
    assert!((slope(0) - slope(250)).abs() > 1e-3 * slope(250).abs());
}

#[test]
fn reference_stroke_at_148_degrees_is_near_the_minimum() {
    let links = LinkSet::from_array(REFERENCE_OPTIMUM).unwrap();
    let d = stroke_for_angle(&links, 148.0).unwrap();
    assert!((d - 242.0).abs() <= 1.0, "{d}");
}

fn design_strategy() -> impl Strategy<Value = ([f64; 6], f64)> {
    (any::<u64>(), 0.0..1.0f64).prop_filter_map("needs a feasible stroke", |(seed, u)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_feasible_design(&mut rng);
        let links = LinkSet::from_array(x).ok()?;
        let (lo, hi) = feasible_stroke_interval(&links)?;
        let d = lo + u * (hi - lo);
        knee_angle(&links, d).ok()?;
        Some((x, d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn angle_sum_identity((x, d) in design_strategy()) {
        let k = knee_angle(&LinkSet::from_array(x).unwrap(), d).unwrap();
        prop_assert!((k.theta_deg + k.beta1_deg + k.beta2_deg - 180.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_obeys_the_cosine_law((x, d) in design_strategy()) {
        let k = knee_angle(&LinkSet::from_array(x).unwrap(), d).unwrap();
        let gamma = (k.alpha1_deg + k.alpha2_deg).to_radians();
        let expect = (x[1] * x[1] + x[2] * x[2] + 2.0 * x[1] * x[2] * gamma.cos()).sqrt();
        prop_assert!((k.l8_mm - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn layout_reproduces_every_length((x, d) in design_strategy()) {
        let links = LinkSet::from_array(x).unwrap();
        let m = joint_layout(&links, d).unwrap().distances();
        for (got, want) in [
            (m.l1, x[0]), (m.l2, x[1]), (m.l3, x[2]), (m.l4, x[3]),
            (m.l5, x[4]), (m.l6, x[5]), (m.l7, links.l7()), (m.d, d),
        ] {
            prop_assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn stroke_round_trip((x, u) in (design_strategy(), 0.05..0.95f64)) {
        let links = LinkSet::from_array(x.0).unwrap();
        let standing = match stroke_for_angle(&links, 2.0) { Ok(s) => s, Err(_) => return Ok(()) };
        let d = 242.0f64.max(feasible_stroke_interval(&links).unwrap().0);
        if d >= standing { return Ok(()); }
        let d = d + u * (standing - d);
        let theta = knee_angle(&links, d).unwrap().theta_deg;
        let back = stroke_for_angle(&links, theta).unwrap();
        prop_assert!((back - d).abs() < 1e-9, "{back} vs {d}");
    }

    #[test]
    fn negative_margin_means_actuator_failure((x, _d) in design_strategy(), shortfall in 1e-6..5.0f64) {
        let links = LinkSet::from_array(x).unwrap();
        let d = links.l7() - links.l2() - shortfall;
        if d <= 0.0 { return Ok(()); }
        prop_assert!(singularity_margin(&links, d) < 0.0);
        let failed_on_actuator = matches!(
            knee_angle(&links, d),
            Err(Error::GeometryInfeasible { triangle: kneelink::kinematics::Triangle::Actuator, .. })
        );
        prop_assert!(failed_on_actuator);
    }
}
