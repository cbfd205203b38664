//! Gaussian covariance-matrix simulation of quadrature-displacement sensing.
//!
//! Conventions: `x = (a†+a)/2`, `p = i(a†−a)/2`, so `[x, p] = i/2`, the
//! vacuum has `Var(x) = Var(p) = 1/4` and `Var(x)Var(p) ≥ 1/16`. Phase-space
//! vectors are interleaved as `(x₁, p₁, x₂, p₂, …)`.
//!
//! Encoding is `exp(−iθ_j p_j)` per pass, which moves `⟨x_j⟩` by `+θ_j/2`.
//! After `M` passes the weighted homodyne sum `Σ w_j x_j` has mean
//! `(M/2)(α·θ)/‖α‖₂`, hence the estimator `q̂ = (2‖α‖₂/M) Σ w_j x_j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{CoefficientVector, QfiMatrix};
use crate::par;
use crate::stats::RunningStats;

const SYM_TOL: f64 = 1e-12;
const UNCERTAINTY_TOL: f64 = 1e-10;
/// Shots drawn per independent RNG stream.
const SHOT_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    X,
    P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

impl GaussianState {
    /// Validates symmetry and `cov + (i/4)Ω ⪰ 0`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || !n.is_multiple_of(2) || cov.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n.max(2), got: cov.ncols() });
        }
        if mean.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mean.len() });
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYM_TOL * cov.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        // Real form of the Hermitian matrix cov + iΩ/4.
        let o = symplectic_form(n / 2) * 0.25;
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&cov);
        big.view_mut((n, n), (n, n)).copy_from(&cov);
        big.view_mut((0, n), (n, n)).copy_from(&(-&o));
        big.view_mut((n, 0), (n, n)).copy_from(&o);
        let min_eig = SymmetricEigen::new(big).eigenvalues.min();
        if min_eig < -UNCERTAINTY_TOL * cov.amax().max(1.0) {
            return Err(Error::Uncertainty(min_eig));
        }
        Ok(GaussianState { mean, cov })
    }

    pub fn vacuum(modes: usize) -> Self {
        GaussianState { mean: DVector::zeros(2 * modes), cov: DMatrix::identity(2 * modes, 2 * modes) * 0.25 }
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn index(mode: usize, q: Quadrature) -> usize {
        2 * mode + usize::from(q == Quadrature::P)
    }

    pub fn quad_mean(&self, mode: usize, q: Quadrature) -> f64 {
        self.mean[Self::index(mode, q)]
    }

    pub fn quad_var(&self, mode: usize, q: Quadrature) -> f64 {
        let i = Self::index(mode, q);
        self.cov[(i, i)]
    }

    /// Covariance block of one quadrature type across all modes.
    pub fn block(&self, q: Quadrature) -> DMatrix<f64> {
        let d = self.modes();
        DMatrix::from_fn(d, d, |i, j| self.cov[(Self::index(i, q), Self::index(j, q))])
    }

    /// `Σ_j (⟨x_j²⟩ + ⟨p_j²⟩) − d/2`.
    pub fn mean_photons(&self) -> f64 {
        let second: f64 = (0..self.mean.len()).map(|i| self.cov[(i, i)] + self.mean[i] * self.mean[i]).sum();
        second - self.modes() as f64 / 2.0
    }

    /// Adds `shift` to the phase-space mean.
    pub fn displaced(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: shift.len() });
        }
        Ok(GaussianState { mean: &self.mean + DVector::from_column_slice(shift), cov: self.cov.clone() })
    }
}

/// `(Var p)` of the optimal squeezed vacuum with mean photon number `N̄`.
pub fn squeezed_variance(nbar: f64) -> f64 {
    let s = nbar.sqrt() + (nbar + 1.0).sqrt();
    s * s / 4.0
}

/// Single-mode squeezed vacuum, anti-squeezed in `p`, with `N̄` photons.
pub fn squeezed_vacuum(nbar: f64) -> Result<GaussianState> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::InvalidArgument(format!("mean photon number must be nonnegative, got {nbar}")));
    }
    let vp = squeezed_variance(nbar);
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / (16.0 * vp), vp]));
    Ok(GaussianState { mean: DVector::zeros(2), cov })
}

/// Symmetric orthogonal reflection with first column `w`.
fn reflection_with_first_column(w: &[f64]) -> DMatrix<f64> {
    let d = w.len();
    let mut v = DVector::from_column_slice(w) * -1.0;
    v[0] += 1.0;
    let vv = v.norm_squared();
    if vv < 1e-30 {
        return DMatrix::identity(d, d);
    }
    DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / vv)
}

fn check_unit(w: &[f64]) -> Result<()> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if w.is_empty() || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnitWeight(norm));
    }
    Ok(())
}

/// Spreads a single-mode state over `d = w.len()` modes with an orthogonal
/// network whose first column is `w`; the other inputs are vacuum.
pub fn distribute(state: &GaussianState, w: &[f64]) -> Result<GaussianState> {
    if state.modes() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: state.modes() });
    }
    check_unit(w)?;
    let d = w.len();
    let h = reflection_with_first_column(w);
    let s = DMatrix::from_fn(2 * d, 2 * d, |r, c| if r % 2 == c % 2 { h[(r / 2, c / 2)] } else { 0.0 });
    let mut cov = DMatrix::identity(2 * d, 2 * d) * 0.25;
    cov.view_mut((0, 0), (2, 2)).copy_from(&state.cov);
    let mut mean = DVector::zeros(2 * d);
    mean.rows_mut(0, 2).copy_from(&state.mean);
    let cov = &s * cov * s.transpose();
    GaussianState::new(&s * mean, (&cov + cov.transpose()) * 0.5)
}

/// `M` passes of `exp(−iθ_j p_j)`: `x_j ← x_j + Mθ_j/2`.
pub fn apply_displacement_encoding(state: &GaussianState, theta: &[f64], m: u64) -> Result<GaussianState> {
    if theta.len() != state.modes() {
        return Err(Error::DimensionMismatch { expected: state.modes(), got: theta.len() });
    }
    let mut mean = state.mean.clone();
    for (j, t) in theta.iter().enumerate() {
        mean[2 * j] += m as f64 * t / 2.0;
    }
    Ok(GaussianState { mean, cov: state.cov.clone() })
}

/// One homodyne outcome of `q` on `mode`.
pub fn homodyne_sample<R: Rng + ?Sized>(state: &GaussianState, mode: usize, q: Quadrature, rng: &mut R) -> Result<f64> {
    if mode >= state.modes() {
        return Err(Error::IndexOutOfRange { index: mode, dim: state.modes() });
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(state.quad_mean(mode, q) + state.quad_var(mode, q).sqrt() * z)
}

/// Joint sampler for one quadrature type on every mode.
pub struct HomodyneSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl HomodyneSampler {
    pub fn new(state: &GaussianState, q: Quadrature) -> Self {
        let d = state.modes();
        let mean = DVector::from_fn(d, |j, _| state.quad_mean(j, q));
        let block = state.block(q);
        let factor = match block.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let e = SymmetricEigen::new(block);
                let root = e.eigenvalues.map(|x| x.max(0.0).sqrt());
                &e.eigenvectors * DMatrix::from_diagonal(&root)
            }
        };
        HomodyneSampler { mean, factor }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.factor * z
    }
}

/// Squeezed vacuum distributed with weights `α/‖α‖₂`, encoded for `M`
/// passes and read out by x-homodyne on every mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementProtocol {
    pub alpha: CoefficientVector,
    pub nbar: f64,
    #[serde(rename = "M")]
    pub m: u64,
    pub weights: Vec<f64>,
    /// Known phase-space offset added to the probe before encoding.
    pub initial_displacement: Vec<f64>,
}

impl DisplacementProtocol {
    pub fn new(alpha: CoefficientVector, nbar: f64, m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("M must be at least 1".into()));
        }
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid mean photon number {nbar}")));
        }
        let a = alpha.to_f64();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let weights: Vec<f64> = a.iter().map(|x| x / norm).collect();
        let initial_displacement = vec![0.0; 2 * a.len()];
        Ok(DisplacementProtocol { alpha, nbar, m, weights, initial_displacement })
    }

    pub fn with_initial_displacement(mut self, shift: Vec<f64>) -> Result<Self> {
        if shift.len() != 2 * self.alpha.dim() {
            return Err(Error::DimensionMismatch { expected: 2 * self.alpha.dim(), got: shift.len() });
        }
        self.initial_displacement = shift;
        Ok(self)
    }

    /// Probe state before encoding.
    pub fn probe(&self) -> Result<GaussianState> {
        check_unit(&self.weights)?;
        distribute(&squeezed_vacuum(self.nbar)?, &self.weights)?.displaced(&self.initial_displacement)
    }

    /// Turns one vector of x outcomes into an estimate of `α·θ`.
    pub fn estimate(&self, x: &DVector<f64>) -> f64 {
        let norm = self.alpha.norm_2_sq().to_f64().sqrt();
        let s: f64 = (0..x.len()).map(|j| self.weights[j] * (x[j] - self.initial_displacement[2 * j])).sum();
        2.0 * norm * s / self.m as f64
    }
}

/// Monte-Carlo summary of an estimator of `q = α·θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementEstimate {
    pub q_true: f64,
    /// Sample mean of `q̂`.
    pub q_hat: f64,
    pub q_hat_stderr: f64,
    pub mse: f64,
    pub mse_stderr: f64,
    pub shots: usize,
}

fn summarize(q_true: f64, estimates: &[f64]) -> DisplacementEstimate {
    let q: RunningStats = estimates.iter().copied().collect();
    let e: RunningStats = estimates.iter().map(|x| (x - q_true) * (x - q_true)).collect();
    DisplacementEstimate {
        q_true,
        q_hat: q.mean(),
        q_hat_stderr: q.stderr(),
        mse: e.mean(),
        mse_stderr: e.stderr(),
        shots: estimates.len(),
    }
}

/// Runs `shots` independent repetitions in fixed-size chunks, each chunk on
/// its own RNG stream, and returns the per-shot values in order.
fn chunked_shots<F>(shots: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync + Send,
{
    let chunks = shots.div_ceil(SHOT_CHUNK);
    par::map_indexed(chunks, |c| {
        let mut rng = par::stream_rng(seed, c as u64);
        let len = SHOT_CHUNK.min(shots - c * SHOT_CHUNK);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<f64>>()
    })
    .concat()
}

fn check_shots(shots: usize) -> Result<()> {
    if shots < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 shots, got {shots}")));
    }
    Ok(())
}

/// Entangled protocol: one joint x-homodyne record per shot.
pub fn estimate_q_displacement(
    protocol: &DisplacementProtocol,
    theta: &[f64],
    shots: usize,
    seed: u64,
) -> Result<DisplacementEstimate> {
    check_shots(shots)?;
    let state = apply_displacement_encoding(&protocol.probe()?, theta, protocol.m)?;
    let sampler = HomodyneSampler::new(&state, Quadrature::X);
    let q_true = protocol.alpha.dot(theta);
    let est = chunked_shots(shots, seed, |rng| protocol.estimate(&sampler.sample(rng)));
    Ok(summarize(q_true, &est))
}

/// `4M²·Cov(p_i, p_j)` of the distributed probe.
pub fn gaussian_qfi(protocol: &DisplacementProtocol) -> Result<QfiMatrix> {
    let p = protocol.probe()?.block(Quadrature::P);
    QfiMatrix::new(p * (4.0 * (protocol.m * protocol.m) as f64))
}

/// Independent single-mode squeezed probes with `N̄_j = |α_j|N̄/‖α‖₁`,
/// per-mode x-homodyne and classical combination `Σ α_j θ̂_j`.
pub fn separable_displacement_protocol(
    alpha: &CoefficientVector,
    nbar: f64,
    m: u64,
    theta: &[f64],
    shots: usize,
    seed: u64,
) -> Result<DisplacementEstimate> {
    check_shots(shots)?;
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if theta.len() != alpha.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), got: theta.len() });
    }
    let alloc = crate::bounds::separable_photon_allocation(alpha, nbar, crate::bounds::Coupling::Displacement)?;
    let a = alpha.to_f64();
    let mut modes = Vec::new();
    for j in 0..a.len() {
        if a[j] != 0.0 {
            let s = apply_displacement_encoding(&squeezed_vacuum(alloc.exact[j])?, &theta[j..=j], m)?;
            modes.push((a[j], s));
        }
    }
    let est = chunked_shots(shots, seed, |rng| {
        modes
            .iter()
            .map(|(aj, s)| {
                let x = homodyne_sample(s, 0, Quadrature::X, rng).expect("single-mode state");
                aj * 2.0 * x / m as f64
            })
            .sum()
    });
    Ok(summarize(alpha.dot(theta), &est))
}
