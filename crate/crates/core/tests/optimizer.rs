//! Solver behaviour checked against brute force, finite differences and
//! scaling/determinism properties.

use std::sync::OnceLock;

use kneelink::optimizer::fd::central_gradient;
use kneelink::optimizer::{
    grid_search, phase_one, sensitivity_scan, solve, BarrierParams, ScanAxis, SolveReport, SolveStatus,
};
use kneelink::problem::{
    build_problem, DesignProblem, ProblemConfig, DEFAULT_LOWER, DEFAULT_UPPER, FEASIBILITY_EPS,
};
use kneelink::{knee_angle, singularity_margin, Error, LinkSet, BASELINE_DESIGN, REFERENCE_OPTIMUM};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn default_problem() -> DesignProblem {
    build_problem(&ProblemConfig::default()).unwrap()
}

fn baseline_solve() -> &'static SolveReport {
    static REPORT: OnceLock<SolveReport> = OnceLock::new();
    REPORT.get_or_init(|| solve(&default_problem(), &BASELINE_DESIGN, &BarrierParams::default()).unwrap())
}

#[test]
fn baseline_start_converges_on_the_singularity() {
    let r = baseline_solve();
    assert_eq!(r.status, SolveStatus::Converged, "kkt {}", r.kkt_residual);
    assert!(r.theta_star >= 147.5, "{}", r.theta_star);
    let p = default_problem();
    assert!(p.max_constraint(&r.x_star.0) <= 1e-6);
    let sing = r.constraint("singularity").unwrap();
    assert!(sing.value.abs() <= 0.2, "{}", sing.value);
    assert!(sing.active);
    let links = LinkSet::from_array(r.x_star.0).unwrap();
    assert!(singularity_margin(&links, 242.0).abs() <= 0.2);
}

#[test]
fn solver_never_loses_ground_from_phase_one() {
    let r = baseline_solve();
    let p = default_problem();
    let x0 = phase_one(&p, &BASELINE_DESIGN, &BarrierParams::default()).unwrap();
    assert_eq!(x0, r.x_start);
    assert!(p.is_strictly_feasible(&x0.0, FEASIBILITY_EPS));
    assert!(r.theta_star >= r.theta_start);
}

#[test]
fn merit_never_increases_within_a_stage() {
    for s in &baseline_solve().stages {
        for w in s.merits.windows(2) {
            assert!(w[1] <= w[0], "mu {}: {} -> {}", s.mu, w[0], w[1]);
        }
    }
}

#[test]
fn solve_is_bit_for_bit_repeatable() {
    let again = solve(&default_problem(), &BASELINE_DESIGN, &BarrierParams::default()).unwrap();
    assert_eq!(&again, baseline_solve());
}

#[test]
fn scaling_every_constraint_keeps_the_maximiser() {
    let scaled = default_problem().with_scaled_constraints(10.0).unwrap();
    let r = solve(&scaled, &BASELINE_DESIGN, &BarrierParams::default()).unwrap();
    for (a, b) in r.x_star.0.iter().zip(&baseline_solve().x_star.0) {
        assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
    }
}

#[test]
fn solver_dominates_the_lattice_oracle() {
    let p = default_problem();
    let g = grid_search(&p, 6).unwrap();
    assert_eq!(g.evaluated, 46656);
    assert!(p.is_strictly_feasible(&g.x.0, FEASIBILITY_EPS));
    // Plain re-enumeration of the same lattice.
    let axis = |i: usize| -> Vec<f64> {
        (0..6).map(|k| DEFAULT_LOWER[i] + (DEFAULT_UPPER[i] - DEFAULT_LOWER[i]) * k as f64 / 5.0).collect()
    };
    let mut best = f64::NEG_INFINITY;
    for idx in 0..46656usize {
        let x: [f64; 6] = std::array::from_fn(|i| axis(i)[idx / 6usize.pow(5 - i as u32) % 6]);
        if !p.is_strictly_feasible(&x, FEASIBILITY_EPS) {
            continue;
        }
        if let Ok(k) = knee_angle(&LinkSet::from_array(x).unwrap(), 242.0) {
            best = best.max(k.theta_deg);
        }
    }
    assert_eq!(g.theta_deg, best);
    assert!(baseline_solve().theta_star >= g.theta_deg - 0.5);
}

#[test]
fn every_bound_corner_breaks_an_ordering_constraint() {
    let p = default_problem();
    for mask in 0..64u32 {
        let x: [f64; 6] =
            std::array::from_fn(|i| if mask >> i & 1 == 1 { DEFAULT_UPPER[i] } else { DEFAULT_LOWER[i] });
        let broken = p
            .constraints()
            .iter()
            .any(|c| c.label().starts_with("order.") && c.value(&x) >= 0.0);
        assert!(broken, "corner {x:?}");
    }
    assert!(matches!(grid_search(&p, 2), Err(Error::NoFeasibleGridPoint { resolution: 2 })));
}

#[test]
fn optimum_is_a_minimum_of_negated_angle_along_each_axis() {
    let p = default_problem();
    let x = baseline_solve().x_star.0;
    for axis in 0..6 {
        let scan = sensitivity_scan(&p, &x, ScanAxis::Variable(axis), 2.0, 21).unwrap();
        let centre = scan.values[scan.center_index()].expect("optimum is feasible");
        for (t, v) in scan.feasible() {
            assert!(centre <= v + 1e-9, "axis {axis} offset {t}: {centre} > {v}");
        }
    }
}

#[test]
fn lengthening_the_bracket_column_at_the_reference_breaks_the_singularity_constraint() {
    let p = default_problem();
    let scan = sensitivity_scan(&p, &REFERENCE_OPTIMUM, ScanAxis::Variable(5), 2.0, 21).unwrap();
    let c = scan.center_index();
    assert!(scan.values[c].is_some());
    assert!(scan.values[c + 1..].iter().all(Option::is_none));
    let x: [f64; 6] = std::array::from_fn(|i| REFERENCE_OPTIMUM[i] + if i == 5 { 0.1 } else { 0.0 });
    assert!(p.constraint("singularity").unwrap().value(&x) > 0.0);
}

#[test]
fn zero_span_scan_repeats_one_value() {
    let scan = sensitivity_scan(&default_problem(), &REFERENCE_OPTIMUM, ScanAxis::Variable(0), 0.0, 5).unwrap();
    assert!(scan.values.iter().all(|v| *v == scan.values[0]));
}

#[test]
fn tiny_box_around_the_reference_stays_inside_and_near_its_angle() {
    let half = 0.01;
    let cfg = ProblemConfig {
        lower: REFERENCE_OPTIMUM.map(|v| v - half),
        upper: REFERENCE_OPTIMUM.map(|v| v + half),
        ..ProblemConfig::default()
    };
    let p = build_problem(&cfg).unwrap();
    let r = solve(&p, &REFERENCE_OPTIMUM, &BarrierParams::default()).unwrap();
    for i in 0..6 {
        assert!(r.x_star.0[i] >= cfg.lower[i] - 1e-9 && r.x_star.0[i] <= cfg.upper[i] + 1e-9);
    }
    let theta = knee_angle(&LinkSet::from_array(r.x_star.0).unwrap(), 242.0).unwrap().theta_deg;
    assert_eq!(theta, r.theta_star);
    let reference = knee_angle(&LinkSet::from_array(REFERENCE_OPTIMUM).unwrap(), 242.0).unwrap().theta_deg;
    assert!(theta >= reference);
    assert!((theta - reference).abs() <= 0.5, "{theta} vs {reference}");
}

#[test]
fn central_differences_converge_at_second_order() {
    let p = default_problem();
    let f = |z: &DVector<f64>| {
        let links = LinkSet::from_slice(z.as_slice()).ok()?;
        knee_angle(&links, 242.0).ok().map(|k| k.theta_deg)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut points = 0;
    let mut ratios = Vec::new();
    while points < 100 {
        let x: [f64; 6] = std::array::from_fn(|i| rng.gen_range(DEFAULT_LOWER[i]..DEFAULT_UPPER[i]));
        // Smooth points: well clear of the singular stroke.
        if !p.is_strictly_feasible(&x, FEASIBILITY_EPS)
            || singularity_margin(&LinkSet::from_array(x).unwrap(), 242.0) < 10.0
        {
            continue;
        }
        let z = DVector::from_row_slice(&x);
        let h = 0.4;
        let g: Vec<DVector<f64>> = [h, h / 2.0, h / 4.0]
            .iter()
            .map(|&s| central_gradient(&f, &z, &[s; 6]).unwrap())
            .collect();
        for i in 0..6 {
            let coarse = g[0][i] - g[1][i];
            let fine = g[1][i] - g[2][i];
            // Below this the difference is round-off, not truncation.
            if fine.abs() < 1e-8 {
                continue;
            }
            ratios.push(coarse / fine);
        }
        points += 1;
    }
    assert!(ratios.len() > 300, "only {} usable components", ratios.len());
    let bad: Vec<f64> = ratios.iter().copied().filter(|r| !(3.5..=4.5).contains(r)).collect();
    assert!(bad.is_empty(), "ratios outside [3.5, 4.5]: {bad:?}");
}
