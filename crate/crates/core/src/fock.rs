//! Fixed-photon-number pure states on `d` sensing modes plus one reference
//! mode (stored last), held as sparse amplitude maps.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{validate_omega, ProtocolSchedule};
use crate::error::{Error, Result};
use crate::math::{CoefficientVector, QfiMatrix};

const NORM_TOL: f64 = 1e-12;

/// Photon counts per mode; the last entry is the reference mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupationVector(pub Vec<u32>);

impl OccupationVector {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    pub fn sensing(&self) -> &[u32] {
        &self.0[..self.0.len() - 1]
    }

    pub fn reference(&self) -> u32 {
        self.0[self.0.len() - 1]
    }
}

type Amplitudes = BTreeMap<OccupationVector, Complex64>;

/// Normalized pure state with a fixed total photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    photons: u64,
    modes: usize,
    amps: Amplitudes,
}

impl FockState {
    /// Validates a common total and mode count, and unit norm to 1e-12.
    pub fn new(amps: impl IntoIterator<Item = (OccupationVector, Complex64)>) -> Result<Self> {
        let mut map = Amplitudes::new();
        for (k, a) in amps {
            *map.entry(k).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        map.retain(|_, a| a.norm_sqr() > 0.0);
        let first = map.keys().next().ok_or(Error::EmptyInput)?;
        let photons = first.total();
        let modes = first.0.len();
        if modes < 2 {
            return Err(Error::InvalidArgument("need at least one sensing mode and the reference".into()));
        }
        for k in map.keys() {
            if k.0.len() != modes {
                return Err(Error::DimensionMismatch { expected: modes, got: k.0.len() });
            }
            if k.total() != photons {
                return Err(Error::InvalidArgument(format!("photon number {} differs from {photons}", k.total())));
            }
        }
        let norm: f64 = map.values().map(Complex64::norm_sqr).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(FockState { photons, modes, amps: map })
    }

    pub fn basis(counts: Vec<u32>) -> Result<Self> {
        Self::new([(OccupationVector(counts), Complex64::new(1.0, 0.0))])
    }

    pub fn photons(&self) -> u64 {
        self.photons
    }

    /// Number of sensing modes `d`.
    pub fn sensing_modes(&self) -> usize {
        self.modes - 1
    }

    pub fn amplitudes(&self) -> &BTreeMap<OccupationVector, Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, counts: &[u32]) -> Complex64 {
        self.amps.get(&OccupationVector(counts.to_vec())).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(Complex64::norm_sqr).sum()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &FockState) -> Complex64 {
        overlap(&self.amps, &other.amps)
    }
}

fn overlap(a: &Amplitudes, b: &Amplitudes) -> Complex64 {
    a.iter().filter_map(|(k, x)| b.get(k).map(|y| x.conj() * y)).sum()
}

#[derive(Serialize, Deserialize)]
struct AmplitudeEntry {
    occupation: Vec<u32>,
    re: f64,
    im: f64,
}

impl Serialize for FockState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<AmplitudeEntry> =
            self.amps.iter().map(|(k, a)| AmplitudeEntry { occupation: k.0.clone(), re: a.re, im: a.im }).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FockState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<AmplitudeEntry>::deserialize(d)?;
        FockState::new(v.into_iter().map(|e| (OccupationVector(e.occupation), Complex64::new(e.re, e.im))))
            .map_err(serde::de::Error::custom)
    }
}

/// Label of a two-branch probe: `ω`, the relative phase, and the sign set
/// each mode belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub omega: Vec<i64>,
    pub phase: f64,
    /// `true` for modes in the nonnegative set.
    pub pos_mask: Vec<bool>,
}

impl ProbeFamily {
    /// Sign sets taken from `α`.
    pub fn for_alpha(omega: Vec<i64>, phase: f64, alpha: &CoefficientVector) -> Self {
        ProbeFamily { omega, phase, pos_mask: alpha.pos_mask() }
    }

    /// Sign sets read off `ω` itself; zero entries count as nonnegative.
    pub fn from_omega(omega: Vec<i64>, phase: f64) -> Self {
        let pos_mask = omega.iter().map(|&w| w >= 0).collect();
        ProbeFamily { omega, phase, pos_mask }
    }

    fn branches(&self, n: u64) -> Result<(OccupationVector, OccupationVector)> {
        validate_omega(&self.omega, &self.pos_mask, n)?;
        let d = self.omega.len();
        let mut b1 = vec![0u32; d + 1];
        let mut b2 = vec![0u32; d + 1];
        let mut neg = 0u64;
        for (j, &w) in self.omega.iter().enumerate() {
            if self.pos_mask[j] {
                b1[j] = w as u32;
            } else {
                b2[j] = (-w) as u32;
                neg += (-w) as u64;
            }
        }
        b2[d] = (n - neg) as u32;
        Ok((OccupationVector(b1), OccupationVector(b2)))
    }
}

/// `(|ω_P⟩|0⟩ + e^{iφ}|−ω_N⟩|N−‖ω_N‖₁⟩)/√2`.
pub fn make_probe(family: &ProbeFamily, n: u64) -> Result<FockState> {
    let (b1, b2) = family.branches(n)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    FockState::new([(b1, Complex64::new(h, 0.0)), (b2, Complex64::from_polar(h, family.phase))])
}

fn encoding_factor(k: &OccupationVector, theta: &[f64]) -> Complex64 {
    let ph: f64 = k.sensing().iter().zip(theta).map(|(&c, t)| c as f64 * t).sum();
    Complex64::from_polar(1.0, -ph)
}

fn encode_amps(amps: &Amplitudes, theta: &[f64]) -> Amplitudes {
    amps.iter().map(|(k, a)| (k.clone(), a * encoding_factor(k, theta))).collect()
}

/// Multiplies each amplitude by `exp(−iΣ_j n_j θ_j)`; the reference accrues nothing.
pub fn apply_encoding(state: &FockState, theta: &[f64]) -> Result<FockState> {
    if theta.len() != state.sensing_modes() {
        return Err(Error::DimensionMismatch { expected: state.sensing_modes(), got: theta.len() });
    }
    Ok(FockState { amps: encode_amps(&state.amps, theta), ..state.clone() })
}

/// Identifies the two branches of an ω-family state relative to `mask`:
/// branch 1 holds all photons on nonnegative modes, branch 2 none there.
fn split_branches(state: &FockState, mask: &[bool]) -> Result<(OccupationVector, OccupationVector)> {
    if state.amps.len() != 2 || mask.len() != state.sensing_modes() {
        return Err(Error::NotOmegaFamily);
    }
    let n = state.photons;
    let mut b1 = None;
    let mut b2 = None;
    for (k, a) in &state.amps {
        if (a.norm_sqr() - 0.5).abs() > 1e-9 {
            return Err(Error::NotOmegaFamily);
        }
        let on_pos: u64 = k.sensing().iter().zip(mask).filter(|(_, &p)| p).map(|(&c, _)| c as u64).sum();
        if on_pos == n && k.reference() == 0 {
            b1 = Some(k.clone());
        } else if on_pos == 0 {
            b2 = Some(k.clone());
        }
    }
    match (b1, b2) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(Error::NotOmegaFamily),
    }
}

/// Branch-preserving relabelling onto the probe labelled by `next`; the
/// relative phase (and `next.phase`, which is ignored) is left untouched.
pub fn switch_family(state: &FockState, next: &ProbeFamily) -> Result<FockState> {
    let (old1, old2) = split_branches(state, &next.pos_mask)?;
    let (new1, new2) = next.branches(state.photons)?;
    let amps = [(new1, state.amps[&old1]), (new2, state.amps[&old2])].into_iter().collect();
    Ok(FockState { amps, ..state.clone() })
}

/// Means and covariance matrix of the number operators over all `d+1` modes.
pub fn number_moments(state: &FockState) -> (Vec<f64>, DMatrix<f64>) {
    let m = state.modes;
    let mut mean = vec![0.0; m];
    let mut second = DMatrix::<f64>::zeros(m, m);
    for (k, a) in &state.amps {
        let p = a.norm_sqr();
        for i in 0..m {
            let ci = k.0[i] as f64;
            mean[i] += p * ci;
            for j in 0..m {
                second[(i, j)] += p * ci * k.0[j] as f64;
            }
        }
    }
    let cov = DMatrix::from_fn(m, m, |i, j| second[(i, j)] - mean[i] * mean[j]);
    (mean, cov)
}

/// `4M²·Cov(n_i, n_j)` over the sensing modes, for a probe reused on every
/// pass without intermediate controls.
pub fn qfi_numeric_static(state: &FockState, m: u64) -> Result<QfiMatrix> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let (_, cov) = number_moments(state);
    let d = state.sensing_modes();
    let f = 4.0 * (m * m) as f64;
    QfiMatrix::new(DMatrix::from_fn(d, d, |i, j| f * cov[(i, j)]))
}

/// One recorded pass: the state after encoding and the relabelling that
/// carries it into the next pass.
struct Pass {
    state: Amplitudes,
    relabel: Option<BTreeMap<OccupationVector, OccupationVector>>,
}

fn run_schedule(schedule: &ProtocolSchedule, theta: &[f64]) -> Result<Vec<Pass>> {
    let d = schedule.alpha().dim();
    if theta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
    }
    let n = schedule.photons();
    let mask = schedule.alpha().pos_mask();
    let labels: Vec<&[i64]> = schedule.pass_sequence().collect();
    let family = |w: &[i64]| ProbeFamily { omega: w.to_vec(), phase: 0.0, pos_mask: mask.clone() };
    let mut state = make_probe(&family(labels[0]), n)?;
    let mut passes: Vec<Pass> = Vec::with_capacity(labels.len());
    for (l, w) in labels.iter().enumerate() {
        if l > 0 {
            let next = family(w);
            let (o1, o2) = split_branches(&state, &mask)?;
            let (n1, n2) = next.branches(n)?;
            let map: BTreeMap<_, _> = [(o1, n1), (o2, n2)].into_iter().collect();
            state = switch_family(&state, &next)?;
            passes.last_mut().expect("previous pass").relabel = Some(map);
        }
        state = apply_encoding(&state, theta)?;
        passes.push(Pass { state: state.amps.clone(), relabel: None });
    }
    Ok(passes)
}

/// Final state of the schedule at parameters `theta`, starting from the
/// first label's probe with zero relative phase.
pub fn evolve_schedule(schedule: &ProtocolSchedule, theta: &[f64]) -> Result<FockState> {
    let passes = run_schedule(schedule, theta)?;
    let last = passes.last().expect("schedule has passes");
    FockState::new(last.state.clone())
}

/// `(W r)·θ`: the accumulated relative phase between the two branches.
pub fn relative_phase(schedule: &ProtocolSchedule, theta: &[f64]) -> Result<f64> {
    let wr = schedule.weighted_sum();
    if theta.len() != wr.len() {
        return Err(Error::DimensionMismatch { expected: wr.len(), got: theta.len() });
    }
    Ok(wr.iter().zip(theta).map(|(&w, t)| w as f64 * t).sum())
}

/// `arg(amp₂/amp₁)` of a two-branch state relative to the sign sets in `mask`.
pub fn branch_phase(state: &FockState, mask: &[bool]) -> Result<f64> {
    let (b1, b2) = split_branches(state, mask)?;
    Ok((state.amps[&b2] / state.amps[&b1]).arg())
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn times_number(amps: &Amplitudes, mode: usize) -> Amplitudes {
    amps.iter().filter(|(k, _)| k.0[mode] > 0).map(|(k, a)| (k.clone(), a * k.0[mode] as f64)).collect()
}

/// QFI of a multi-pass schedule by explicit simulation, evaluated at `θ = 0`.
pub fn qfi_numeric_schedule(schedule: &ProtocolSchedule) -> Result<QfiMatrix> {
    qfi_numeric_schedule_at(schedule, &vec![0.0; schedule.alpha().dim()])
}

/// `F_ij = 4 Re[Σ_{l,m} ⟨n_i(l) n_j(m)⟩ − ⟨n_i⟩⟨n_j⟩]` where `n_i(l)` is the
/// number operator at pass `l` carried forward through later passes.
pub fn qfi_numeric_schedule_at(schedule: &ProtocolSchedule, theta: &[f64]) -> Result<QfiMatrix> {
    let passes = run_schedule(schedule, theta)?;
    let d = schedule.alpha().dim();
    let mut mean = vec![0.0f64; d];
    for p in &passes {
        for (k, a) in &p.state {
            for (i, mi) in mean.iter_mut().enumerate() {
                *mi += a.norm_sqr() * k.0[i] as f64;
            }
        }
    }
    let mut second = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for l in 0..passes.len() {
            // v = n_i ψ_l, propagated forward pass by pass.
            let mut v = times_number(&passes[l].state, i);
            for m in l..passes.len() {
                if m > l {
                    let map = passes[m - 1].relabel.as_ref().expect("relabel recorded");
                    let mut moved = Amplitudes::new();
                    for (k, a) in v {
                        let dest = map
                            .get(&k)
                            .ok_or_else(|| Error::ScheduleMismatch("amplitude outside the tracked branches".into()))?;
                        moved.insert(dest.clone(), a);
                    }
                    v = encode_amps(&moved, theta);
                }
                for j in 0..d {
                    let g = overlap(&v, &times_number(&passes[m].state, j)).re;
                    second[(i, j)] += g;
                    if m > l {
                        second[(j, i)] += g;
                    }
                }
            }
        }
    }
    QfiMatrix::new(DMatrix::from_fn(d, d, |i, j| 4.0 * (second[(i, j)] - mean[i] * mean[j])))
}

/// Finite-difference QFI from state overlaps, independent of the covariance
/// formulas. Uses `f(Δ) = 1 − |⟨ψ(θ₀)|ψ(θ₀+Δ)⟩|² ≈ ΔᵀFΔ/4` with symmetric
/// steps, so the error is `O(h²)`.
pub fn qfi_fidelity_oracle<F>(protocol: F, theta0: &[f64], h: f64) -> Result<QfiMatrix>
where
    F: Fn(&[f64]) -> Result<FockState>,
{
    if !(1e-5..=1e-2).contains(&h) {
        return Err(Error::InvalidArgument(format!("step {h} outside [1e-5, 1e-2]")));
    }
    let d = theta0.len();
    let psi0 = protocol(theta0)?;
    let infidelity = |delta: &[f64]| -> Result<f64> {
        let t: Vec<f64> = theta0.iter().zip(delta).map(|(a, b)| a + b).collect();
        Ok(1.0 - psi0.overlap(&protocol(&t)?).norm_sqr())
    };
    let step = |pairs: &[(usize, f64)]| {
        let mut v = vec![0.0; d];
        for &(i, s) in pairs {
            v[i] += s * h;
        }
        v
    };
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let mut f = DMatrix::zeros(d, d);
    for i in 0..d {
        let e = step(&[(i, 1.0)]);
        f[(i, i)] = 2.0 * (infidelity(&e)? + infidelity(&neg(&e))?) / (h * h);
        for j in 0..i {
            let plus = step(&[(i, 1.0), (j, 1.0)]);
            let minus = step(&[(i, 1.0), (j, -1.0)]);
            let s = infidelity(&plus)? + infidelity(&neg(&plus))? - infidelity(&minus)? - infidelity(&neg(&minus))?;
            f[(i, j)] = s / (2.0 * h * h);
            f[(j, i)] = f[(i, j)];
        }
    }
    // Finite differences can leave tiny negative eigenvalues on rank-deficient F.
    let sym = (&f + f.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|x| x.max(0.0));
    let psd = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    QfiMatrix::new((&psd + psd.transpose()) * 0.5)
}
