mod common;

use std::f64::consts::PI;

use common::solved;
use proptest::prelude::*;
use stirep_core::solver::{
    auto_terminal, default_family_grid, residuals, solve_extremum, sweep_from_anchors, ExtremalSolution, Seed,
    SolutionRecord, SolverOptions, BUILTIN_SEEDS,
};
use stirep_core::trajectory::{LagrangeMultipliers, Terminal};
use stirep_core::verification::predicted_eta_f_trig;
use stirep_core::Error;

fn inf(r: [f64; 3]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn anchors() -> Vec<ExtremalSolution> {
    BUILTIN_SEEDS.iter().map(|s| s.solve(&SolverOptions::default()).unwrap()).collect()
}

#[test]
fn published_multipliers_nearly_satisfy_the_constraints() {
    let s = Seed::by_name("phidot0").unwrap();
    assert!(inf(residuals(s.lam, 0.0, Terminal::Touch(2)).unwrap()) < 1e-4);
}

#[test]
fn null_multipliers_never_return() {
    let zero = LagrangeMultipliers::new(0.0, 0.0, 0.0);
    let e = residuals(zero, 0.0, Terminal::Crossing(1)).unwrap_err();
    assert!(matches!(e, Error::InsufficientCrossings { found: 0, .. }), "{e}");
    assert!(e.is_convergence_failure());
}

#[test]
fn residual_is_sensitive_to_the_multipliers() {
    let s = Seed::by_name("phidot0").unwrap();
    let mut lam = s.lam;
    lam.lambda0 += 1e-3;
    match residuals(lam, 0.0, Terminal::Touch(2)) {
        Ok(r) => assert!(inf(r) > 1e-4, "{r:?}"),
        // a perturbed tangential return may miss zero entirely
        Err(e) => assert!(matches!(e, Error::InsufficientCrossings { .. })),
    }
}

#[test]
fn seeds_converge_near_their_published_values() {
    let published = [(2.9225, 5.7498), (2.1297, 4.1904), (1.5627, 3.4615), (1.5454, 3.4603)];
    for (seed, (eta, area)) in BUILTIN_SEEDS.iter().zip(published) {
        let s = seed.solve(&SolverOptions::default()).unwrap();
        assert!(s.residual_norm < 1e-8, "{}: {}", seed.name, s.residual_norm);
        assert!((s.eta_f_over_pi() - eta).abs() < 1e-3 * eta, "{}", seed.name);
        assert!((s.area_over_pi() - area).abs() < 1e-3 * area, "{}", seed.name);
        let d = &s.lam;
        let p = &seed.lam;
        let dl = (d.lambda0 - p.lambda0).abs().max((d.lambda1 - p.lambda1).abs()).max((d.lambda2 - p.lambda2).abs());
        assert!(dl < 1e-3, "{}: multipliers moved by {dl}", seed.name);
    }
}

#[test]
fn terminal_choice() {
    assert_eq!(auto_terminal(0.0), Terminal::Touch(2));
    assert_eq!(auto_terminal(0.4), Terminal::Crossing(1));
    assert_eq!(auto_terminal(5.5), Terminal::Crossing(1));
    assert_eq!(auto_terminal(16.0), Terminal::Crossing(3));
}

#[test]
fn family_is_monotone_over_the_default_grid() {
    let grid = default_family_grid();
    let fam = sweep_from_anchors(&grid, &anchors(), &SolverOptions::default()).unwrap();
    assert_eq!(fam.len(), grid.len());
    for s in &fam {
        assert!(s.residual_norm < 1e-8, "phidot_i {}: {}", s.phidot_i, s.residual_norm);
    }
    for w in fam.windows(2) {
        assert!(w[1].area < w[0].area, "area at {}", w[1].phidot_i);
        assert!(w[1].a2_over_t > w[0].a2_over_t, "A2 at {}", w[1].phidot_i);
        assert!(w[1].phi_max > w[0].phi_max, "phi_max at {}", w[1].phidot_i);
    }
    let phi_min = fam.iter().map(|s| s.phi_max).fold(f64::MAX, f64::min);
    assert!((phi_min - 0.2566).abs() < 1e-3, "{phi_min}");
}

#[test]
fn single_point_sweep_is_the_anchor() {
    let a = anchors();
    let fam = sweep_from_anchors(&[0.4], &a, &SolverOptions::default()).unwrap();
    assert_eq!(fam.len(), 1);
    assert_eq!(fam[0].lam, a[1].lam);
    assert_eq!(fam[0].eta_f, a[1].eta_f);
}

#[test]
fn low_branch_ends_inside_the_expected_interval() {
    let grid: Vec<f64> = (0..=12).map(|k| 0.5798 * k as f64 / 12.0).collect();
    let fam = sweep_from_anchors(&grid, &anchors(), &SolverOptions::default()).unwrap();
    for s in &fam {
        let e = s.eta_f_over_pi();
        assert!((2.0..4.0).contains(&e), "phidot_i {}: eta_f/pi = {e}", s.phidot_i);
    }
}

#[test]
fn final_angle_follows_from_the_multipliers() {
    for name in ["phidot0", "phidot0.4", "phidot16", "phidot250"] {
        let s = solved(name);
        let (c, sn) = predicted_eta_f_trig(&s.lam).unwrap();
        assert!((s.eta_f.cos() - c).abs() < 1e-5, "{name}");
        assert!((s.eta_f.sin() - sn).abs() < 1e-5, "{name}");
    }
}

#[test]
fn resolving_from_a_converged_point_is_stable() {
    for name in ["phidot0.4", "phidot250"] {
        let s = solved(name);
        let again = solve_extremum(s.phidot_i, s.lam, s.terminal).unwrap();
        for (a, b) in [
            (s.lam.lambda0, again.lam.lambda0),
            (s.lam.lambda1, again.lam.lambda1),
            (s.lam.lambda2, again.lam.lambda2),
            (s.eta_f, again.eta_f),
        ] {
            assert!((a - b).abs() < 1e-9, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn record_reproduces_the_solution() {
    let s = solved("phidot16");
    let rec = SolutionRecord::from(&s);
    let text = serde_json::to_string(&rec).unwrap();
    let back: SolutionRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rec);
    let lam = LagrangeMultipliers::new(back.lambda0, back.lambda1, back.lambda2);
    let re = ExtremalSolution::from_multipliers(back.phidot_i, lam, back.terminal, &SolverOptions::default()).unwrap();
    assert!(re.residual_norm < 1e-8);
    assert!((re.area - s.area).abs() < 1e-9);
    assert!((re.eta_f - s.eta_f).abs() < 1e-9 * PI);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn random_slopes_converge(phidot in 0.05f64..16.0) {
        let fam = sweep_from_anchors(&[phidot], &anchors(), &SolverOptions::default()).unwrap();
        let s = &fam[0];
        prop_assert!(s.residual_norm < 1e-8);
        prop_assert!(s.area_over_pi() > 3.46 && s.area_over_pi() < 5.75);
        let (c, sn) = predicted_eta_f_trig(&s.lam).unwrap();
        prop_assert!((s.eta_f.cos() - c).abs() < 1e-5 && (s.eta_f.sin() - sn).abs() < 1e-5);
    }
}

#[test]
fn isolated_targets_between_anchors() {
    // reached alone, these need several growing steps from the 0.4 anchor
    let a = anchors();
    for p in [3.0, 5.0, 7.0, 8.2] {
        let s = &sweep_from_anchors(&[p], &a, &SolverOptions::default()).unwrap()[0];
        assert_eq!(s.phidot_i, p);
        assert!(s.residual_norm < 1e-8, "{p}: {}", s.residual_norm);
    }
}
