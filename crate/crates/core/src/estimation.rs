//! Non-adaptive multi-stage robust phase estimation (RPE) on two-branch
//! probes, and Monte-Carlo studies of the resulting function estimators.
//!
//! Stage `j` runs the base protocol with every label scaled by `N_j`, so the
//! interbranch phase is `N_j φ`. Each stage spends `ν_j` shots split between
//! the control phases `δ = 0` and `δ = π/2`, which give `cos(N_j φ)` and
//! `sin(N_j φ)`. The stage angle is unwrapped against the previous estimate.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::entangled_phase_bound;
use crate::design::ProtocolSchedule;
use crate::error::{Error, Result};
use crate::fock::{branch_phase, evolve_schedule, wrap_phase};
use crate::par;
use crate::stats::{scaling_fit, RunningStats, ScalingFit};

/// Probability of the `+1` parity outcome: `(1 + cos(φ + δ))/2`.
pub fn parity_outcome_prob(phase: f64, delta: f64) -> f64 {
    (0.5 * (1.0 + (phase + delta).cos())).clamp(0.0, 1.0)
}

/// Draws one parity outcome; `true` is `+1`.
pub fn sample_parity<R: Rng + ?Sized>(phase: f64, delta: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < parity_outcome_prob(phase, delta)
}

/// Stage multipliers `N_j` and repetitions `ν_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpeSchedule {
    multipliers: Vec<u64>,
    repetitions: Vec<u64>,
}

impl RpeSchedule {
    /// Requires `N_1 = 1`, `N_j < N_{j+1} ≤ 2N_j` and `ν_j ≥ 2`.
    pub fn new(multipliers: Vec<u64>, repetitions: Vec<u64>) -> Result<Self> {
        if multipliers.is_empty() || multipliers.len() != repetitions.len() {
            return Err(Error::InvalidRpeSchedule(format!(
                "{} multipliers vs {} repetition counts",
                multipliers.len(),
                repetitions.len()
            )));
        }
        if multipliers[0] != 1 {
            return Err(Error::InvalidRpeSchedule("first stage must use multiplier 1".into()));
        }
        for w in multipliers.windows(2) {
            if !(w[0] < w[1] && w[1] <= 2 * w[0]) {
                return Err(Error::InvalidRpeSchedule(format!("stage growth {} -> {} not in (1, 2]", w[0], w[1])));
            }
        }
        if let Some(&v) = repetitions.iter().find(|&&v| v < 2) {
            return Err(Error::InvalidRpeSchedule(format!("{v} repetitions cannot cover both control phases")));
        }
        Ok(RpeSchedule { multipliers, repetitions })
    }

    /// `N_j = 2^{j−1}` for `j = 1..K` with `ν_j = a(K−j) + b`.
    pub fn geometric(stages: u32, slope: u64, base: u64) -> Result<Self> {
        if stages == 0 || stages > 40 {
            return Err(Error::InvalidRpeSchedule(format!("{stages} stages")));
        }
        let k = stages as u64;
        let mult = (0..stages).map(|j| 1u64 << j).collect();
        let reps = (1..=k).map(|j| slope * (k - j) + base).collect();
        Self::new(mult, reps)
    }

    /// Default schedule spending exactly `budget` photon units:
    /// `N_j = 2^{j−1}`, `ν_j = RPE_SLOPE·(K−j) + RPE_BASE` for `j ≥ 2`, with
    /// `K` the largest stage count that fits and stage 1 taking the remainder.
    /// Budgets below one full stage run a single stage.
    pub fn for_budget(budget: u64) -> Result<Self> {
        if budget < 2 {
            return Err(Error::InvalidRpeSchedule(format!("budget {budget} cannot cover both control phases")));
        }
        let cost = |k: u64| -> u64 { (1..=k).map(|j| (1u64 << (j - 1)) * (RPE_SLOPE * (k - j) + RPE_BASE)).sum() };
        let mut k = 1u64;
        while k < 40 && cost(k + 1) <= budget {
            k += 1;
        }
        let mult: Vec<u64> = (0..k).map(|j| 1u64 << j).collect();
        let mut reps: Vec<u64> = (1..=k).map(|j| RPE_SLOPE * (k - j) + RPE_BASE).collect();
        let later: u64 = mult.iter().zip(&reps).skip(1).map(|(n, v)| n * v).sum();
        reps[0] = budget - later;
        Self::new(mult, reps)
    }

    pub fn stages(&self) -> usize {
        self.multipliers.len()
    }

    pub fn multipliers(&self) -> &[u64] {
        &self.multipliers
    }

    pub fn repetitions(&self) -> &[u64] {
        &self.repetitions
    }

    /// `Σ_j ν_j N_j`.
    pub fn total(&self) -> u64 {
        self.multipliers.iter().zip(&self.repetitions).map(|(n, v)| n * v).sum()
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Runs the stages against `oracle(N_j, δ, rng) -> outcome` and returns
/// `φ̂ ∈ [0, 2π)`.
pub fn rpe_estimate<R, F>(mut oracle: F, schedule: &RpeSchedule, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(u64, f64, &mut R) -> bool,
{
    let mut estimate = 0.0f64;
    for (&k, &nu) in schedule.multipliers.iter().zip(&schedule.repetitions) {
        let n_cos = nu.div_ceil(2);
        let n_sin = nu / 2;
        let hits_cos = (0..n_cos).filter(|_| oracle(k, 0.0, rng)).count() as f64;
        let hits_sin = (0..n_sin).filter(|_| oracle(k, FRAC_PI_2, rng)).count() as f64;
        let c = 2.0 * hits_cos / n_cos as f64 - 1.0;
        let s = 1.0 - 2.0 * hits_sin / n_sin as f64;
        let angle = s.atan2(c).rem_euclid(2.0 * PI);
        let kf = k as f64;
        // Of the k preimages of the stage angle, keep the one nearest the running estimate.
        estimate = (0..k)
            .map(|m| (angle + 2.0 * PI * m as f64) / kf)
            .min_by(|a, b| circular_distance(*a, estimate).total_cmp(&circular_distance(*b, estimate)))
            .expect("at least one candidate");
    }
    estimate.rem_euclid(2.0 * PI)
}

/// Circular MSE of RPE on a bare phase `φ_true`, one RNG stream per trial.
pub fn rpe_phase_mse(phi_true: f64, schedule: &RpeSchedule, trials: usize, seed: u64) -> Result<RunningStats> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let errs = par::map_indexed(trials, |i| {
        let mut rng = par::stream_rng(seed, i as u64);
        let est = rpe_estimate(|k, d, r| sample_parity(k as f64 * phi_true, d, r), schedule, &mut rng);
        let e = circular_distance(est, phi_true);
        e * e
    });
    Ok(errs.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub q_true: f64,
    /// Mean of `q̂` over trials.
    pub q_hat: f64,
    pub q_hat_stderr: f64,
    pub mse_empirical: f64,
    /// Standard error of `mse_empirical`.
    pub stderr: f64,
    pub trials: usize,
    /// `N·Σ ν_j N_j`.
    pub total_photons: u64,
    pub bound: f64,
    pub ratio: f64,
    /// Set when `|(W r)·θ| ≥ π`, where the first stage cannot resolve the phase.
    pub capture_exceeded: bool,
}

/// End-to-end estimate of `q = α·θ`: stage phases come from simulating the
/// scaled schedule on Fock states, outcomes are sampled from the parity model.
pub fn estimate_function_phase(
    schedule: &ProtocolSchedule,
    theta: &[f64],
    rpe: &RpeSchedule,
    trials: usize,
    seed: u64,
) -> Result<EstimationResult> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let alpha = schedule.alpha();
    let mask = alpha.pos_mask();
    let mut stage_phase = std::collections::HashMap::new();
    for &k in rpe.multipliers() {
        let scaled = schedule.scaled(k)?;
        let state = evolve_schedule(&scaled, theta)?;
        stage_phase.insert(k, branch_phase(&state, &mask)?);
    }
    let n = schedule.photons();
    let m = schedule.passes();
    let unit = alpha.norm_1_pos().to_f64() / (n * m) as f64;
    let q_true = alpha.unflip(alpha.dot(theta));
    let estimates = par::map_indexed(trials, |i| {
        let mut rng = par::stream_rng(seed, i as u64);
        let phi = rpe_estimate(|k, d, r| sample_parity(stage_phase[&k], d, r), rpe, &mut rng);
        alpha.unflip(wrap_phase(phi) * unit)
    });
    let q: RunningStats = estimates.iter().copied().collect();
    let e: RunningStats = estimates.iter().map(|x| (x - q_true) * (x - q_true)).collect();
    let total_photons = n * rpe.total();
    let bound = entangled_phase_bound(alpha, total_photons, m as f64)?;
    let accumulated = crate::fock::relative_phase(schedule, theta)?;
    Ok(EstimationResult {
        q_true,
        q_hat: q.mean(),
        q_hat_stderr: q.stderr(),
        mse_empirical: e.mean(),
        stderr: e.stderr(),
        trials,
        total_photons,
        bound,
        ratio: e.mean() / bound,
        capture_exceeded: accumulated.abs() >= PI,
    })
}

/// One point of a resource sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: u64,
    pub result: EstimationResult,
}

/// Runs [`estimate_function_phase`] at each RPE budget, each point on its own
/// sub-seed, and fits the log-log slope of MSE against total photons.
pub fn phase_sweep(
    schedule: &ProtocolSchedule,
    theta: &[f64],
    budgets: &[u64],
    trials: usize,
    seed: u64,
) -> Result<(Vec<SweepPoint>, ScalingFit)> {
    let points = budgets
        .iter()
        .map(|&b| {
            let rpe = RpeSchedule::for_budget(b)?;
            let s = par::sub_seed(seed, &format!("phase-sweep-{b}"));
            Ok(SweepPoint { budget: b, result: estimate_function_phase(schedule, theta, &rpe, trials, s)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.result.total_photons as f64, p.result.mse_empirical)).collect();
    let fit = scaling_fit(&xy)?;
    Ok((points, fit))
}

/// Per-stage growth of `ν_j` in [`RpeSchedule::for_budget`].
pub const RPE_SLOPE: u64 = 6;
/// Repetitions of the final stage in [`RpeSchedule::for_budget`].
pub const RPE_BASE: u64 = 10;

/// Overhead constant of the non-adaptive RPE guarantee.
pub const RPE_OVERHEAD: f64 = 24.26 * PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::CoefficientVector;

    #[test]
    fn parity_examples() {
        assert_eq!(parity_outcome_prob(0.0, 0.0), 1.0);
        assert!(parity_outcome_prob(PI, 0.0) < 1e-15);
        assert!(parity_outcome_prob(FRAC_PI_2, FRAC_PI_2) < 1e-15);
        for i in 0..50 {
            let p = parity_outcome_prob(i as f64 * 0.37, i as f64 * 0.11);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn sampler_matches_probability() {
        let mut rng = par::stream_rng(1, 0);
        let n = 40_000;
        for (phi, d) in [(0.3, 0.0), (2.0, FRAC_PI_2), (4.0, 0.0)] {
            let hits = (0..n).filter(|_| sample_parity(phi, d, &mut rng)).count() as f64;
            assert!((hits / n as f64 - parity_outcome_prob(phi, d)).abs() < 5.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(RpeSchedule::new(vec![1, 2, 4], vec![4, 3, 2]).is_ok());
        for (m, v) in
            [(vec![2, 4], vec![2, 2]), (vec![1, 3], vec![2, 2]), (vec![1, 1], vec![2, 2]), (vec![1, 2], vec![2, 1])]
        {
            assert!(matches!(RpeSchedule::new(m, v), Err(Error::InvalidRpeSchedule(_))));
        }
        for b in [2u64, 9, 16, 24, 32, 64, 100, 128, 256, 512, 1024] {
            let s = RpeSchedule::for_budget(b).unwrap();
            assert_eq!(s.total(), b);
            let k = s.stages();
            let tail: Vec<u64> = (2..=k as u64).map(|j| 6 * (k as u64 - j) + 10).collect();
            assert_eq!(&s.repetitions()[1..], &tail[..]);
        }
        assert_eq!(RpeSchedule::for_budget(9).unwrap().stages(), 1);
        assert_eq!(RpeSchedule::for_budget(35).unwrap().stages(), 1);
        assert_eq!(RpeSchedule::for_budget(36).unwrap().repetitions(), &[16, 10]);
        assert_eq!(RpeSchedule::for_budget(512).unwrap().stages(), 5);
        assert!(RpeSchedule::for_budget(1).is_err());
        let g = RpeSchedule::geometric(3, 2, 2).unwrap();
        assert_eq!(g.multipliers(), &[1, 2, 4]);
        assert_eq!(g.repetitions(), &[6, 4, 2]);
    }

    #[test]
    fn zero_phase_is_recovered() {
        let s = RpeSchedule::for_budget(64).unwrap();
        let last = *s.multipliers().last().unwrap() as f64;
        let close = (0..200)
            .filter(|&i| {
                let mut rng = par::stream_rng(2, i);
                let est = rpe_estimate(|_, d, r| sample_parity(0.0, d, r), &s, &mut rng);
                circular_distance(est, 0.0) < PI / (2.0 * last)
            })
            .count();
        assert!(close >= 190);
    }

    #[test]
    fn rpe_meets_overhead_constant() {
        let s = RpeSchedule::for_budget(128).unwrap();
        let st = rpe_phase_mse(1.234, &s, 1000, 3).unwrap();
        let n = s.total() as f64;
        assert!(st.mean() <= RPE_OVERHEAD * RPE_OVERHEAD / (n * n));
        assert!(st.mean() >= 1.0 / (n * n));
    }

    #[test]
    fn function_estimate_tracks_true_value() {
        let a = CoefficientVector::from_strs(&["1", "1"]).unwrap();
        let s = ProtocolSchedule::new(a, 4, vec![vec![2, 2]], vec![2]).unwrap();
        let rpe = RpeSchedule::for_budget(64).unwrap();
        let r = estimate_function_phase(&s, &[0.05, 0.03], &rpe, 2000, 4).unwrap();
        // Stage angles come from atan2 of binomial frequencies, so a small bias remains.
        assert!((r.q_hat - 0.08).powi(2) < 0.1 * r.mse_empirical);
        assert!(!r.capture_exceeded);
        assert!(r.mse_empirical >= r.bound);
        assert_eq!(r.total_photons, 4 * 64);

        let z = estimate_function_phase(&s, &[0.0, 0.0], &rpe, 2000, 4).unwrap();
        assert!(z.q_hat.abs() < 3.0 * z.q_hat_stderr + 1e-12);
        // With zero true value the error is pure spread: MSE = mean² + variance.
        let var = z.q_hat_stderr * z.q_hat_stderr * 2000.0;
        assert!((z.mse_empirical - (z.q_hat * z.q_hat + var * 1999.0 / 2000.0)).abs() < 1e-12);

        let wide = estimate_function_phase(&s, &[0.5, 0.5], &rpe, 10, 4).unwrap();
        assert!(wide.capture_exceeded);
    }

    #[test]
    fn flipped_alpha_reports_original_sign() {
        let a = CoefficientVector::from_strs(&["-2", "1"]).unwrap();
        assert!(a.flipped());
        let s = ProtocolSchedule::new(a, 2, vec![vec![2, -1]], vec![1]).unwrap();
        let rpe = RpeSchedule::for_budget(64).unwrap();
        let r = estimate_function_phase(&s, &[0.1, 0.05], &rpe, 2000, 5).unwrap();
        assert!((r.q_true + 0.15).abs() < 1e-15);
        assert!((r.q_hat - r.q_true).powi(2) < 0.1 * r.mse_empirical);
    }
}
