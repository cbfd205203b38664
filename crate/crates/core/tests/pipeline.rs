use pnet_core::bounds::{bound_report, min_entanglement, solve_beta_star_phase, Control, Coupling};
use pnet_core::design::{
    build_omega_set, build_omega_set_with_limit, projected_omega_count, solve_schedule, solve_schedule_with_budget,
    ScheduleOutcome, ScheduleReport,
};
use pnet_core::estimation::{estimate_function_phase, RpeSchedule};
use pnet_core::fock::{qfi_fidelity_oracle, qfi_numeric_schedule, relative_phase};
use pnet_core::math::max_rel_diff;
use pnet_core::{CoefficientVector, Error};

fn solve(raw: &[&str], n: u64, m: u64) -> pnet_core::design::ProtocolSchedule {
    let a = CoefficientVector::from_strs(raw).unwrap();
    let w = build_omega_set(&a, n, None).unwrap();
    match solve_schedule(&w, m).unwrap() {
        ScheduleOutcome::Feasible(s) => s,
        ScheduleOutcome::Infeasible => panic!("{raw:?} N={n} M={m} infeasible"),
    }
}

#[test]
fn design_verify_simulate_round_trip() {
    let s = solve(&["1/2", "-1/4", "1/4"], 4, 3);
    let report = ScheduleReport::from_schedule(&s);
    assert!(report.residual < 1e-10);

    let json = serde_json::to_string(&report).unwrap();
    let back: ScheduleReport = serde_json::from_str(&json).unwrap();
    let s2 = back.to_schedule().unwrap();
    assert_eq!(s2, s);
    assert!(max_rel_diff(&qfi_numeric_schedule(&s2).unwrap(), &report.qfi) < 1e-9);

    let theta = [0.02, -0.01, 0.015];
    let rpe = RpeSchedule::for_budget(256).unwrap();
    let r = estimate_function_phase(&s2, &theta, &rpe, 400, 1).unwrap();
    assert!(!r.capture_exceeded);
    assert!(r.ratio >= 1.0);
    assert!((r.q_true - (0.01 + 0.0025 + 0.00375)).abs() < 1e-15);
}

#[test]
fn accumulated_phase_is_linear_in_theta() {
    let s = solve(&["3", "-1", "2"], 5, 2);
    let total = s.weighted_sum();
    let theta = [0.011, 0.027, -0.004];
    let expect: f64 = total.iter().zip(theta).map(|(w, t)| *w as f64 * t).sum();
    assert!((relative_phase(&s, &theta).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn fidelity_oracle_agrees_with_moment_qfi() {
    let s = solve(&["1", "1", "-1"], 2, 2);
    let oracle =
        qfi_fidelity_oracle(|th: &[f64]| pnet_core::fock::evolve_schedule(&s, th), &[0.0, 0.0, 0.0], 1e-4).unwrap();
    assert!(max_rel_diff(&oracle, &qfi_numeric_schedule(&s).unwrap()) < 1e-5);
}

#[test]
fn dual_vector_matches_bound_report() {
    let a = CoefficientVector::from_strs(&["2", "-3", "1"]).unwrap();
    let beta = solve_beta_star_phase(&a, 7).unwrap();
    let summary = bound_report(&a, Some(7), Some(50.0), None, 2).unwrap();
    let phase = summary.phase_sensing.unwrap();
    assert!((beta.mse_bound(2.0) - phase.mse_entangled).abs() <= 1e-12 * phase.mse_entangled);
    assert!(summary.displacement_sensing.is_some());
}

#[test]
fn solved_schedules_respect_entanglement_floor() {
    for (raw, n, m) in [(vec!["1", "1", "1", "1"], 4, 1), (vec!["1", "1", "-1"], 2, 2), (vec!["5", "1"], 6, 1)] {
        let s = solve(&raw, n, m);
        let a = CoefficientVector::from_strs(&raw).unwrap();
        let floor = min_entanglement(&a, m, Coupling::Phase, Control::Discrete).unwrap();
        assert!(s.max_entanglement() >= floor);
    }
}

#[test]
fn resource_limits_are_reported() {
    let a = CoefficientVector::from_integers(&[1; 8]).unwrap();
    let count = projected_omega_count(&a, 20, None);
    assert!(count > num_bigint::BigUint::from(1000u32));
    assert!(matches!(build_omega_set_with_limit(&a, 20, None, 1000), Err(Error::OmegaSetTooLarge { .. })));

    let a = CoefficientVector::from_integers(&[1, 1, 1, 1, 1]).unwrap();
    let w = build_omega_set(&a, 6, None).unwrap();
    assert!(matches!(solve_schedule_with_budget(&w, 5, 3), Err(Error::Inconclusive { .. })));
}
