//! Closed-form lower bounds on the mean square error of estimating
//! `q = α·θ`, for number-operator (phase) and quadrature (displacement)
//! coupling, with and without inter-mode entanglement.
//!
//! All bounds take the total sensing time `t`; in the discrete-pass model
//! each pass lasts one time unit so `t = M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{schatten_p, CoefficientVector, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Phase,
    Displacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    Discrete,
    Arbitrary,
}

/// Which form of the entangled displacement bound to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisplacementFlavor {
    /// `‖α‖₂²/(4N̄t²)`.
    Leading,
    /// `‖α‖₂²/(t²(√N̄+√(N̄+1))²)`, tight for a single mode.
    Exact,
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!("sensing time must be positive, got {t}")));
    }
    Ok(())
}

fn check_photons(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("photon number must be at least 1".into()));
    }
    Ok(())
}

fn check_mean_photons(nbar: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { nbar >= 0.0 } else { nbar > 0.0 };
    if !ok || !nbar.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid mean photon number {nbar}")));
    }
    Ok(())
}

fn max_restricted_norm(alpha: &CoefficientVector) -> Rational {
    let p = alpha.norm_1_pos();
    let n = alpha.norm_1_neg();
    if p >= n {
        p
    } else {
        n
    }
}

/// `max{‖α‖_{1,P}, ‖α‖_{1,N}}² / (N²t²)`.
pub fn entangled_phase_bound(alpha: &CoefficientVector, n: u64, t: f64) -> Result<f64> {
    check_photons(n)?;
    check_time(t)?;
    let m = max_restricted_norm(alpha).to_f64();
    Ok(m * m / ((n as f64) * (n as f64) * t * t))
}

/// Exact rational form of [`entangled_phase_bound`] for rational `t`.
pub fn entangled_phase_bound_exact(alpha: &CoefficientVector, n: u64, t: &Rational) -> Result<Rational> {
    check_photons(n)?;
    if t.is_negative() || t.is_zero() {
        return Err(Error::InvalidArgument("sensing time must be positive".into()));
    }
    let m = max_restricted_norm(alpha);
    let denom = Rational::from(n as i64).pow(2) * t.pow(2);
    Ok(m.pow(2) / denom)
}

/// `‖α‖²_{2/3} / (N²t²)`: best separable strategy with optimally divided photons.
pub fn separable_phase_bound(alpha: &CoefficientVector, n: u64, t: f64) -> Result<f64> {
    check_photons(n)?;
    check_time(t)?;
    let s = schatten_p(&alpha.to_f64(), 2.0 / 3.0)?;
    Ok(s * s / ((n as f64) * (n as f64) * t * t))
}

pub fn entangled_displacement_bound(
    alpha: &CoefficientVector,
    nbar: f64,
    t: f64,
    flavor: DisplacementFlavor,
) -> Result<f64> {
    check_time(t)?;
    let n2 = alpha.norm_2_sq().to_f64();
    match flavor {
        DisplacementFlavor::Leading => {
            check_mean_photons(nbar, false)?;
            Ok(n2 / (4.0 * nbar * t * t))
        }
        DisplacementFlavor::Exact => {
            check_mean_photons(nbar, true)?;
            let s = nbar.sqrt() + (nbar + 1.0).sqrt();
            Ok(n2 / (t * t * s * s))
        }
    }
}

/// `‖α‖₁² / (4N̄t²)`.
pub fn separable_displacement_bound(alpha: &CoefficientVector, nbar: f64, t: f64) -> Result<f64> {
    check_mean_photons(nbar, false)?;
    check_time(t)?;
    let n1 = alpha.norm_1().to_f64();
    Ok(n1 * n1 / (4.0 * nbar * t * t))
}

/// Minimizer of the Fock-restricted seminorm `N(β_max − β_min)` subject to
/// `α·β = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub entries: Vec<Rational>,
    /// Minimized seminorm, in photon units.
    pub objective: Rational,
}

impl DualVector {
    /// MSE lower bound implied by the seminorm: `1/(objective·t)²`.
    pub fn mse_bound(&self, t: f64) -> f64 {
        let o = self.objective.to_f64();
        1.0 / (o * o * t * t)
    }
}

/// Closed-form β*: the better of the two boundary candidates
/// (`β = 1/‖α‖_{1,P}` on `P`, or `β = −1/‖α‖_{1,N}` on `N`). Ties go to `P`.
pub fn solve_beta_star_phase(alpha: &CoefficientVector, n: u64) -> Result<DualVector> {
    check_photons(n)?;
    let p = alpha.norm_1_pos();
    let q = alpha.norm_1_neg();
    let nr = Rational::from(n as i64);
    let mut entries = vec![Rational::zero(); alpha.dim()];
    let objective = if p >= q {
        let b = p.recip()?;
        for &j in alpha.pos_set() {
            entries[j] = b.clone();
        }
        nr * b
    } else {
        let b = q.recip()?;
        for &j in alpha.neg_set() {
            entries[j] = -&b;
        }
        nr * b
    };
    Ok(DualVector { entries, objective })
}

/// Per-mode photon division for the separable strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Real-valued optimum; sums to the budget.
    pub exact: Vec<f64>,
    /// Largest-remainder integer rounding (phase coupling only).
    pub rounded: Option<Vec<u64>>,
    /// Separable MSE achieved by `rounded` relative to the real optimum.
    pub rounding_penalty: Option<f64>,
    /// Set when rounding worsens the achievable bound by more than 1%.
    pub rounding_flag: bool,
}

fn largest_remainder(exact: &[f64], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[j] += 1;
    }
    out
}

/// Photon division maximizing separable precision: `η_j ∝ |α_j|^{2/3}` for
/// phase, `N̄_j ∝ |α_j|` for displacement. Zero coefficients receive nothing.
pub fn separable_photon_allocation(alpha: &CoefficientVector, budget: f64, coupling: Coupling) -> Result<Allocation> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::InvalidArgument(format!("budget must be positive, got {budget}")));
    }
    let a: Vec<f64> = alpha.to_f64().iter().map(|x| x.abs()).collect();
    match coupling {
        Coupling::Displacement => {
            let s: f64 = a.iter().sum();
            let exact = a.iter().map(|x| x / s * budget).collect();
            Ok(Allocation { exact, rounded: None, rounding_penalty: None, rounding_flag: false })
        }
        Coupling::Phase => {
            if budget.fract() != 0.0 {
                return Err(Error::InvalidArgument("phase budget must be an integer photon count".into()));
            }
            let w: Vec<f64> = a.iter().map(|x| x.powf(2.0 / 3.0)).collect();
            let s: f64 = w.iter().sum();
            let exact: Vec<f64> = w.iter().map(|x| x / s * budget).collect();
            let rounded = largest_remainder(&exact, budget as u64);
            // Per-mode NOON states give Var(θ_j) = 1/η_j²; t cancels in the ratio.
            let ideal = s.powi(3) / (budget * budget);
            let achieved: f64 = a
                .iter()
                .zip(&rounded)
                .filter(|(x, _)| **x > 0.0)
                .map(|(x, &e)| if e == 0 { f64::INFINITY } else { x * x / (e as f64 * e as f64) })
                .sum();
            let penalty = achieved / ideal;
            Ok(Allocation {
                exact,
                rounded: Some(rounded),
                rounding_penalty: Some(penalty),
                rounding_flag: penalty.is_nan() || penalty > 1.01,
            })
        }
    }
}

/// Smallest `k` such that some pass of an optimal protocol must carry
/// `k`-mode entanglement.
///
/// Phase coupling with discrete controls: `⌈‖α‖₀/M⌉ + 1` when all
/// coefficients are nonnegative (the reference mode is entangled on every
/// pass). With mixed signs a pass may hold all `N` photons on negative modes
/// in its second branch, which factors the reference out, so only
/// `max(⌈‖α‖₀/M⌉, 2)` is forced.
pub fn min_entanglement(alpha: &CoefficientVector, m: u64, coupling: Coupling, control: Control) -> Result<u64> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of passes must be at least 1".into()));
    }
    let per_pass = (alpha.norm_0() as u64).div_ceil(m);
    Ok(match (coupling, control) {
        (Coupling::Phase, Control::Discrete) => {
            if alpha.neg_set().is_empty() {
                per_pass + 1
            } else {
                per_pass.max(2)
            }
        }
        (Coupling::Displacement, Control::Discrete) => per_pass,
        (Coupling::Phase, Control::Arbitrary) => 2,
        (Coupling::Displacement, Control::Arbitrary) => 1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    /// `N` for phase sensing, `N̄` for displacement sensing.
    pub photons: f64,
    pub t: f64,
    #[serde(rename = "M")]
    pub m: u64,
    pub d: usize,
}

/// One column of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub coupling: Coupling,
    pub parameter_coupling: String,
    pub resources: Resources,
    pub mse_separable: f64,
    pub mse_entangled: f64,
    /// Displacement only: the single-mode-tight refinement.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mse_entangled_exact: Option<f64>,
    /// `mse_separable / mse_entangled`.
    pub ratio: f64,
    pub entanglement_needed_discrete_controls: u64,
    pub entanglement_needed_arbitrary_controls: u64,
}

/// Qubit-network column of the comparison table, quoted for reference only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitReference {
    pub parameter_coupling: String,
    pub mse_separable: String,
    pub mse_entangled: String,
    pub entanglement_needed_discrete_controls: String,
    pub entanglement_needed_arbitrary_controls: String,
}

impl Default for QubitReference {
    fn default() -> Self {
        QubitReference {
            parameter_coupling: "sigma_z/2 * theta".into(),
            mse_separable: ">= ||alpha||_2^2 / t^2".into(),
            mse_entangled: ">= ||alpha||_inf^2 / t^2".into(),
            entanglement_needed_discrete_controls: "k >= max(ceil(||alpha||_1/||alpha||_inf), ceil(||alpha||_0/M))"
                .into(),
            entanglement_needed_arbitrary_controls: "||alpha||_1/||alpha||_inf in (k-1, k]".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub alpha: CoefficientVector,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phase_sensing: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub displacement_sensing: Option<BoundReport>,
    pub qubit_phase_sensing: QubitReference,
}

/// One CSV row per (α, budget) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCsvRow {
    pub alpha: String,
    pub coupling: Coupling,
    pub budget: f64,
    pub t: f64,
    #[serde(rename = "M")]
    pub m: u64,
    pub d: usize,
    pub mse_entangled: f64,
    pub mse_separable: f64,
    pub ratio: f64,
    pub entanglement_discrete: u64,
    pub entanglement_arbitrary: u64,
}

/// Phase-sensing column for `N` photons.
pub fn phase_report(alpha: &CoefficientVector, n: u64, t: f64, m: u64) -> Result<BoundReport> {
    let ent = entangled_phase_bound(alpha, n, t)?;
    let sep = separable_phase_bound(alpha, n, t)?;
    Ok(BoundReport {
        coupling: Coupling::Phase,
        parameter_coupling: "n_i * theta_i".into(),
        resources: Resources { photons: n as f64, t, m, d: alpha.dim() },
        mse_separable: sep,
        mse_entangled: ent,
        mse_entangled_exact: None,
        ratio: sep / ent,
        entanglement_needed_discrete_controls: min_entanglement(alpha, m, Coupling::Phase, Control::Discrete)?,
        entanglement_needed_arbitrary_controls: min_entanglement(alpha, m, Coupling::Phase, Control::Arbitrary)?,
    })
}

/// Displacement-sensing column for mean photon number `N̄`.
pub fn displacement_report(alpha: &CoefficientVector, nbar: f64, t: f64, m: u64) -> Result<BoundReport> {
    let ent = entangled_displacement_bound(alpha, nbar, t, DisplacementFlavor::Leading)?;
    let exact = entangled_displacement_bound(alpha, nbar, t, DisplacementFlavor::Exact)?;
    let sep = separable_displacement_bound(alpha, nbar, t)?;
    Ok(BoundReport {
        coupling: Coupling::Displacement,
        parameter_coupling: "p_i * theta_i".into(),
        resources: Resources { photons: nbar, t, m, d: alpha.dim() },
        mse_separable: sep,
        mse_entangled: ent,
        mse_entangled_exact: Some(exact),
        ratio: sep / ent,
        entanglement_needed_discrete_controls: min_entanglement(alpha, m, Coupling::Displacement, Control::Discrete)?,
        entanglement_needed_arbitrary_controls: min_entanglement(alpha, m, Coupling::Displacement, Control::Arbitrary)?,
    })
}

/// Table-style summary for whichever budgets are supplied. `t` defaults to `M`.
pub fn bound_report(
    alpha: &CoefficientVector,
    n: Option<u64>,
    nbar: Option<f64>,
    t: Option<f64>,
    m: u64,
) -> Result<BoundSummary> {
    if n.is_none() && nbar.is_none() {
        return Err(Error::InvalidArgument("supply N and/or N_bar".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("number of passes must be at least 1".into()));
    }
    let t = t.unwrap_or(m as f64);
    Ok(BoundSummary {
        alpha: alpha.clone(),
        phase_sensing: n.map(|n| phase_report(alpha, n, t, m)).transpose()?,
        displacement_sensing: nbar.map(|nb| displacement_report(alpha, nb, t, m)).transpose()?,
        qubit_phase_sensing: QubitReference::default(),
    })
}

impl BoundSummary {
    pub fn csv_rows(&self) -> Vec<BoundCsvRow> {
        let alpha = self.alpha.original_entries().iter().map(ToString::to_string).collect::<Vec<_>>().join(";");
        [&self.phase_sensing, &self.displacement_sensing]
            .into_iter()
            .flatten()
            .map(|r| BoundCsvRow {
                alpha: alpha.clone(),
                coupling: r.coupling,
                budget: r.resources.photons,
                t: r.resources.t,
                m: r.resources.m,
                d: r.resources.d,
                mse_entangled: r.mse_entangled,
                mse_separable: r.mse_separable,
                ratio: r.ratio,
                entanglement_discrete: r.entanglement_needed_discrete_controls,
                entanglement_arbitrary: r.entanglement_needed_arbitrary_controls,
            })
            .collect()
    }
}
