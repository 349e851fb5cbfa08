mod common;

use common::{all_solved, solved};
use stirep_core::solver::SolverOptions;
use stirep_core::verification::{
    all_passed, check_reference_amplitude, check_solution, check_symmetry_etaf_values, run_all, warped_energy,
    write_json_lines, CheckReport,
};
use stirep_core::ExtremalSolution;

#[test]
fn converged_seeds_pass_every_check() {
    let reports = run_all(&all_solved());
    assert_eq!(reports.len(), 4 * 12);
    for r in &reports {
        assert!(r.passed, "{} {}: {:e} > {:e}", r.context, r.check_name, r.measured, r.tolerance);
    }
    assert!(all_passed(&reports));
}

#[test]
fn empty_family() {
    let reports = run_all(&[]);
    assert!(reports.is_empty());
    assert!(all_passed(&reports));
}

#[test]
fn an_unconverged_entry_fails_alone() {
    let mut family = all_solved();
    let good = &family[2];
    let mut lam = good.lam;
    lam.lambda2 += 1e-3;
    let bad = ExtremalSolution::from_multipliers(good.phidot_i, lam, good.terminal, &SolverOptions::default()).unwrap();
    assert!(bad.residual_norm > 1e-6);
    family[2] = bad;
    let reports = run_all(&family);
    assert_eq!(reports.len(), 48);
    let (own, rest): (Vec<&CheckReport>, Vec<&CheckReport>) = reports.iter().partition(|r| r.context == "phidot_i=16");
    assert_eq!(own.len(), 12);
    assert!(rest.iter().all(|r| r.passed));
    let failed: Vec<&str> = own.iter().filter(|r| !r.passed).map(|r| r.check_name.as_str()).collect();
    assert!(failed.contains(&"constraint_residual"), "{failed:?}");
    assert!(!all_passed(&reports));
}

#[test]
fn reports_keep_input_order_and_serialize() {
    let family = all_solved();
    let reports = run_all(&family);
    let contexts: Vec<&str> = reports.iter().step_by(12).map(|r| r.context.as_str()).collect();
    assert_eq!(contexts, ["phidot_i=0", "phidot_i=0.4", "phidot_i=16", "phidot_i=250"]);
    let mut buf = Vec::new();
    write_json_lines(&reports, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), reports.len());
    let back: CheckReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(back.check_name, reports[0].check_name);
    assert_eq!(back.measured, reports[0].measured);
}

#[test]
fn checks_are_reproducible() {
    let a = check_solution(&solved("phidot0.4"));
    let b = check_solution(&solved("phidot0.4"));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.measured, y.measured, "{}", x.check_name);
    }
}

#[test]
fn final_angle_interval() {
    let s = solved("phidot0");
    assert!(check_symmetry_etaf_values(&s.lam, 0.0, s.eta_f, 1e-5, "").passed);
    // the same angle one turn lower is outside the low-slope interval
    let r = check_symmetry_etaf_values(&s.lam, 0.0, s.eta_f - 2.0 * std::f64::consts::PI, 1e-5, "");
    assert!(!r.passed);
}

#[test]
fn warping_time_costs_energy_but_not_area() {
    for name in ["phidot0", "phidot250"] {
        let s = solved(name);
        let (e_opt, e_warp, a_opt, a_warp) = warped_energy(&s, 1.0, 0.3).unwrap();
        assert!((e_warp / e_opt - 1.045).abs() < 1e-4, "{name}: {}", e_warp / e_opt);
        assert!((a_warp / a_opt - 1.0).abs() < 1e-6, "{name}");
    }
}

#[test]
fn reference_amplitude() {
    let r = check_reference_amplitude(1.0);
    assert!(r.passed, "{}", r.measured);
    assert!(check_reference_amplitude(3.0).passed);
}

#[test]
fn non_finite_measurements_fail() {
    let r = CheckReport::new("x", f64::NAN, 1.0, "");
    assert!(!r.passed);
    assert_eq!(r.measured, f64::MAX);
}
