use pnet_core::design::ProtocolSchedule;
use pnet_core::estimation::{estimate_function_phase, rpe_phase_mse, RpeSchedule};
use pnet_core::gaussian::{estimate_q_displacement, separable_displacement_protocol, DisplacementProtocol};
use pnet_core::CoefficientVector;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn phase_estimates_do_not_depend_on_thread_count() {
    let a = CoefficientVector::from_integers(&[1, 2]).unwrap();
    let s = ProtocolSchedule::new(a, 3, vec![vec![1, 2]], vec![2]).unwrap();
    let rpe = RpeSchedule::for_budget(128).unwrap();
    let run = || estimate_function_phase(&s, &[0.03, 0.01], &rpe, 300, 42).unwrap();
    let one = in_pool(1, run);
    let many = in_pool(4, run);
    assert_eq!(one, many);
    assert_eq!(one, run());
    assert_ne!(one, estimate_function_phase(&s, &[0.03, 0.01], &rpe, 300, 43).unwrap());
}

#[test]
fn displacement_estimates_do_not_depend_on_thread_count() {
    let a = CoefficientVector::from_integers(&[3, -1, 2]).unwrap();
    let p = DisplacementProtocol::new(a.clone(), 20.0, 2).unwrap();
    let theta = [0.1, 0.2, -0.05];
    // Spans several shot chunks, including a partial one.
    let shots = 10_000;
    let ent = || estimate_q_displacement(&p, &theta, shots, 9).unwrap();
    let sep = || separable_displacement_protocol(&a, 20.0, 2, &theta, shots, 9).unwrap();
    assert_eq!(in_pool(1, ent), in_pool(3, ent));
    assert_eq!(in_pool(1, sep), in_pool(5, sep));
}

#[test]
fn rpe_statistics_are_reproducible() {
    let s = RpeSchedule::for_budget(256).unwrap();
    let a = in_pool(1, || rpe_phase_mse(2.0, &s, 500, 7).unwrap());
    let b = in_pool(8, || rpe_phase_mse(2.0, &s, 500, 7).unwrap());
    assert_eq!(a.mean(), b.mean());
    assert_eq!(a.variance(), b.variance());
}
