//! Protocol synthesis for phase sensing: enumerate the admissible two-branch
//! probe labels ω, then search exactly for an integer pass schedule `r` with
//! `W r = NMα/‖α‖_{1,P}` and `Σr = M`.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{CoefficientVector, QfiMatrix, Rational};

pub const DEFAULT_OMEGA_LIMIT: u64 = 1_000_000;
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

/// `NMα/‖α‖_{1,P}`, exact.
pub fn target_vector(alpha: &CoefficientVector, n: u64, m: u64) -> Result<Vec<Rational>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("N and M must be positive".into()));
    }
    let scale = Rational::from((n * m) as i64) / alpha.norm_1_pos();
    Ok(alpha.entries().iter().map(|a| a * &scale).collect())
}

/// True iff the target vector is integral, i.e. an exact schedule can exist.
pub fn feasibility_precheck(alpha: &CoefficientVector, n: u64, m: u64) -> Result<bool> {
    Ok(target_vector(alpha, n, m)?.iter().all(Rational::is_integer))
}

/// Checks the admissibility constraints for `ω` against a sign mask
/// (`true` = nonnegative set).
pub fn validate_omega(omega: &[i64], pos_mask: &[bool], n: u64) -> Result<()> {
    if omega.len() != pos_mask.len() {
        return Err(Error::DimensionMismatch { expected: pos_mask.len(), got: omega.len() });
    }
    let mut p_sum: i64 = 0;
    let mut n_sum: i64 = 0;
    for (&w, &pos) in omega.iter().zip(pos_mask) {
        if pos && w < 0 {
            return Err(Error::InvalidOmega(format!("negative entry {w} on a nonnegative mode")));
        }
        if !pos && w > 0 {
            return Err(Error::InvalidOmega(format!("positive entry {w} on a negative mode")));
        }
        if pos {
            p_sum += w;
        } else {
            n_sum -= w;
        }
    }
    if p_sum != n as i64 {
        return Err(Error::InvalidOmega(format!("positive part sums to {p_sum}, expected {n}")));
    }
    if n_sum > n as i64 {
        return Err(Error::InvalidOmega(format!("negative part sums to {n_sum}, exceeds {n}")));
    }
    Ok(())
}

/// Number of modes (sensing plus reference) that do not factor out of the
/// two-branch probe labelled by `ω`: the support of `ω`, plus the reference
/// unless the negative part already holds all `N` photons.
pub fn entanglement_per_pass(omega: &[i64], n: u64) -> Result<u64> {
    let mask: Vec<bool> = omega.iter().map(|&w| w >= 0).collect();
    validate_omega(omega, &mask, n)?;
    let support = omega.iter().filter(|&&w| w != 0).count() as u64;
    let neg: i64 = omega.iter().filter(|&&w| w < 0).map(|w| -w).sum();
    Ok(support + u64::from(neg < n as i64))
}

/// The admissible ω vectors for `(α, N)`, in descending lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaSet {
    pub alpha: CoefficientVector,
    #[serde(rename = "N")]
    pub n: u64,
    pub columns: Vec<Vec<i64>>,
    pub support_cap: Option<u64>,
}

impl OmegaSet {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Ways to write `total` as an ordered sum of `parts` positive integers.
fn compositions(total: u64, parts: u64) -> BigUint {
    match (total, parts) {
        (0, 0) => BigUint::one(),
        (_, 0) | (0, _) => BigUint::zero(),
        _ => binom(total - 1, parts - 1),
    }
}

/// Exact size of the (optionally capped) ω set, without enumerating it.
pub fn projected_omega_count(alpha: &CoefficientVector, n: u64, support_cap: Option<u64>) -> BigUint {
    let np = alpha.pos_set().len() as u64;
    let nn = alpha.neg_set().len() as u64;
    let mut total = BigUint::zero();
    for sp in 1..=np.min(n) {
        let p_ways = binom(np, sp) * compositions(n, sp);
        for sn in 0..=nn.min(n) {
            for s in sn..=n {
                if sn == 0 && s > 0 {
                    break;
                }
                let k = sp + sn + u64::from(s < n);
                if support_cap.is_some_and(|cap| k > cap) {
                    continue;
                }
                total += &p_ways * binom(nn, sn) * compositions(s, sn);
            }
        }
    }
    total
}

pub fn build_omega_set(alpha: &CoefficientVector, n: u64, support_cap: Option<u64>) -> Result<OmegaSet> {
    build_omega_set_with_limit(alpha, n, support_cap, DEFAULT_OMEGA_LIMIT)
}

pub fn build_omega_set_with_limit(
    alpha: &CoefficientVector,
    n: u64,
    support_cap: Option<u64>,
    limit: u64,
) -> Result<OmegaSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let projected = projected_omega_count(alpha, n, support_cap);
    if projected > BigUint::from(limit) {
        return Err(Error::OmegaSetTooLarge { projected: projected.to_string(), limit });
    }
    let mask = alpha.pos_mask();
    let last_pos = alpha.pos_set().last().copied();
    let mut columns = Vec::with_capacity(projected.to_usize().unwrap_or(0));
    let mut cur = vec![0i64; alpha.dim()];
    let ctx = Enum { mask: &mask, last_pos, cap: support_cap };
    ctx.fill(0, n as i64, n as i64, 0, &mut cur, &mut columns);
    Ok(OmegaSet { alpha: alpha.clone(), n, columns, support_cap })
}

struct Enum<'a> {
    mask: &'a [bool],
    last_pos: Option<usize>,
    cap: Option<u64>,
}

impl Enum<'_> {
    /// Depth-first fill of index `j`, largest value first so output is in
    /// descending lexicographic order.
    fn fill(&self, j: usize, rem_p: i64, rem_n: i64, support: u64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if let Some(cap) = self.cap {
            if support + u64::from(rem_p > 0) > cap {
                return;
            }
        }
        if j == cur.len() {
            if rem_p != 0 {
                return;
            }
            let k = support + u64::from(rem_n > 0);
            if self.cap.is_none_or(|cap| k <= cap) {
                out.push(cur.clone());
            }
            return;
        }
        if self.mask[j] {
            let lo = if Some(j) == self.last_pos { rem_p } else { 0 };
            for v in (lo..=rem_p).rev() {
                cur[j] = v;
                self.fill(j + 1, rem_p - v, rem_n, support + u64::from(v != 0), cur, out);
            }
        } else {
            for v in 0..=rem_n {
                cur[j] = -v;
                self.fill(j + 1, rem_p, rem_n - v, support + u64::from(v != 0), cur, out);
            }
        }
        cur[j] = 0;
    }
}

/// An exact pass schedule: pass label `columns[k]` is used `r[k]` times.
/// Only labels with `r > 0` are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSchedule {
    alpha: CoefficientVector,
    n: u64,
    m: u64,
    columns: Vec<Vec<i64>>,
    r: Vec<u64>,
}

impl ProtocolSchedule {
    /// Validates every label, `Σr = M` and `W r = NMα/‖α‖_{1,P}` exactly.
    pub fn new(alpha: CoefficientVector, n: u64, columns: Vec<Vec<i64>>, r: Vec<u64>) -> Result<Self> {
        let s = Self::new_untargeted(alpha, n, columns, r)?;
        if !s.hits_target()? {
            return Err(Error::ScheduleMismatch(format!("W r = {:?} does not hit the target", s.weighted_sum())));
        }
        Ok(s)
    }

    /// Like [`ProtocolSchedule::new`] but accepts any `W r`; used to audit
    /// schedules that may have been edited by hand.
    pub fn new_untargeted(alpha: CoefficientVector, n: u64, columns: Vec<Vec<i64>>, r: Vec<u64>) -> Result<Self> {
        if columns.len() != r.len() {
            return Err(Error::ScheduleMismatch(format!("{} columns but {} counts", columns.len(), r.len())));
        }
        let mask = alpha.pos_mask();
        for c in &columns {
            validate_omega(c, &mask, n)?;
        }
        let m: u64 = r.iter().sum();
        if m == 0 {
            return Err(Error::ScheduleMismatch("schedule has no passes".into()));
        }
        let (columns, r): (Vec<_>, Vec<_>) = columns.into_iter().zip(r).filter(|(_, k)| *k > 0).unzip();
        Ok(ProtocolSchedule { alpha, n, m, columns, r })
    }

    /// True iff `W r = NMα/‖α‖_{1,P}`.
    pub fn hits_target(&self) -> Result<bool> {
        let target = target_vector(&self.alpha, self.n, self.m)?;
        Ok(self.weighted_sum().iter().zip(&target).all(|(&a, t)| Rational::from(a) == *t))
    }

    pub fn alpha(&self) -> &CoefficientVector {
        &self.alpha
    }

    pub fn photons(&self) -> u64 {
        self.n
    }

    pub fn passes(&self) -> u64 {
        self.m
    }

    pub fn columns(&self) -> &[Vec<i64>] {
        &self.columns
    }

    pub fn counts(&self) -> &[u64] {
        &self.r
    }

    /// Labels in pass order: each column repeated `r` times.
    pub fn pass_sequence(&self) -> impl Iterator<Item = &[i64]> {
        self.columns.iter().zip(&self.r).flat_map(|(c, &k)| std::iter::repeat_n(c.as_slice(), k as usize))
    }

    /// `W r`.
    pub fn weighted_sum(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.alpha.dim()];
        for (c, &k) in self.columns.iter().zip(&self.r) {
            for (o, &w) in out.iter_mut().zip(c) {
                *o += w * k as i64;
            }
        }
        out
    }

    /// The same protocol with every label multiplied by `factor`, i.e. `factor·N` photons.
    pub fn scaled(&self, factor: u64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("scale factor must be positive".into()));
        }
        let cols = self.columns.iter().map(|c| c.iter().map(|w| w * factor as i64).collect()).collect();
        ProtocolSchedule::new(self.alpha.clone(), self.n * factor, cols, self.r.clone())
    }

    /// Largest per-pass entanglement over the schedule.
    pub fn max_entanglement(&self) -> u64 {
        self.columns.iter().map(|c| entanglement_per_pass(c, self.n).unwrap_or(0)).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleOutcome {
    Feasible(ProtocolSchedule),
    /// Exhaustive search over the given ω set found no solution.
    Infeasible,
}

pub fn solve_schedule(w: &OmegaSet, m: u64) -> Result<ScheduleOutcome> {
    solve_schedule_with_budget(w, m, DEFAULT_NODE_BUDGET)
}

/// Depth-first search over multisets of columns (nondecreasing column
/// index), which returns the lexicographically largest `r`.
pub fn solve_schedule_with_budget(w: &OmegaSet, m: u64, node_budget: u64) -> Result<ScheduleOutcome> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let target = target_vector(&w.alpha, w.n, m)?;
    if !target.iter().all(Rational::is_integer) {
        return Ok(ScheduleOutcome::Infeasible);
    }
    let target: Vec<i64> = target
        .iter()
        .map(|t| t.to_i64().ok_or_else(|| Error::InvalidArgument("target exceeds i64".into())))
        .collect::<Result<_>>()?;
    let d = w.alpha.dim();
    // suffix_cover[c*d + j]: some column at index ≥ c is nonzero on mode j.
    let ncol = w.columns.len();
    let mut suffix_cover = vec![false; (ncol + 1) * d];
    for c in (0..ncol).rev() {
        for j in 0..d {
            suffix_cover[c * d + j] = suffix_cover[(c + 1) * d + j] || w.columns[c][j] != 0;
        }
    }
    let index: HashMap<&[i64], usize> = w.columns.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    let mut search = Search {
        cols: &w.columns,
        neg: w.alpha.neg_set(),
        n: w.n as i64,
        d,
        suffix_cover,
        index,
        deficit: target,
        chosen: Vec::with_capacity(m as usize),
        nodes: 0,
        budget: node_budget,
    };
    if search.descend(0, m)? {
        let mut r = vec![0u64; ncol];
        for &c in &search.chosen {
            r[c] += 1;
        }
        let s = ProtocolSchedule::new(w.alpha.clone(), w.n, w.columns.clone(), r)?;
        Ok(ScheduleOutcome::Feasible(s))
    } else {
        Ok(ScheduleOutcome::Infeasible)
    }
}

struct Search<'a> {
    cols: &'a [Vec<i64>],
    neg: &'a [usize],
    n: i64,
    d: usize,
    suffix_cover: Vec<bool>,
    index: HashMap<&'a [i64], usize>,
    deficit: Vec<i64>,
    chosen: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Inconclusive { budget: self.budget });
        }
        Ok(())
    }

    fn covered_from(&self, start: usize) -> bool {
        (0..self.d).all(|j| self.deficit[j] == 0 || self.suffix_cover[start * self.d + j])
    }

    fn descend(&mut self, start: usize, remaining: u64) -> Result<bool> {
        if remaining == 0 {
            return Ok(self.deficit.iter().all(|&x| x == 0));
        }
        if remaining == 1 {
            self.tick()?;
            if let Some(&c) = self.index.get(self.deficit.as_slice()) {
                if c >= start {
                    self.chosen.push(c);
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        for c in start..self.cols.len() {
            self.tick()?;
            let col = &self.cols[c];
            // Entries share the target's sign, so |partial| only grows.
            if col.iter().zip(&self.deficit).any(|(&w, &t)| w.abs() > t.abs()) {
                continue;
            }
            for (t, &w) in self.deficit.iter_mut().zip(col) {
                *t -= w;
            }
            let neg_left: i64 = self.neg.iter().map(|&j| -self.deficit[j]).sum();
            let ok = neg_left <= self.n * (remaining as i64 - 1) && self.covered_from(c);
            if ok {
                self.chosen.push(c);
                if self.descend(c, remaining - 1)? {
                    return Ok(true);
                }
                self.chosen.pop();
            }
            for (t, &w) in self.deficit.iter_mut().zip(col) {
                *t += w;
            }
        }
        Ok(false)
    }
}

fn sign_mask(alpha: &CoefficientVector) -> Vec<f64> {
    alpha.pos_mask().into_iter().map(|p| if p { 1.0 } else { -1.0 }).collect()
}

/// Closed-form QFI of a two-branch schedule: `F_ij = ±a_i a_j` with
/// `a = |W| r`, `+` when `i, j` lie in the same sign set.
pub fn schedule_qfi_analytic(s: &ProtocolSchedule) -> QfiMatrix {
    let d = s.alpha.dim();
    let mut a = vec![0.0f64; d];
    for (c, &k) in s.columns.iter().zip(&s.r) {
        for (x, &w) in a.iter_mut().zip(c) {
            *x += (w.abs() * k as i64) as f64;
        }
    }
    let sign = sign_mask(&s.alpha);
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| sign[i] * sign[j] * a[i] * a[j]);
    QfiMatrix::new(m).expect("rank-one outer product is symmetric PSD")
}

/// `sup_j |Σ_{i∈P} F_ij − N²M²α_j/‖α‖_{1,P}| / (NM)²`; zero when the phase bound is saturated.
pub fn check_saturation_phase(f: &QfiMatrix, alpha: &CoefficientVector, n: u64, m: u64) -> Result<f64> {
    if f.dim() != alpha.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), got: f.dim() });
    }
    let nm = (n * m) as f64;
    let p1 = alpha.norm_1_pos().to_f64();
    let a = alpha.to_f64();
    let mut worst = 0.0f64;
    for (j, aj) in a.iter().enumerate() {
        let col: f64 = alpha.pos_set().iter().map(|&i| f.get(i, j)).sum();
        worst = worst.max((col - nm * nm * aj / p1).abs());
    }
    Ok(worst / (nm * nm))
}

/// Relative sup-norm distance from `4M²N̄ααᵀ/‖α‖₂²`, normalized by the
/// larger of the two matrices' largest entries.
pub fn check_saturation_quad(f: &QfiMatrix, alpha: &CoefficientVector, nbar: f64, m: u64) -> Result<f64> {
    if f.dim() != alpha.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), got: f.dim() });
    }
    if nbar.is_nan() || nbar < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid mean photon number {nbar}")));
    }
    let a = alpha.to_f64();
    let n2 = alpha.norm_2_sq().to_f64();
    let c = 4.0 * (m * m) as f64 * nbar / n2;
    let mut diff = 0.0f64;
    let mut tmax = 0.0f64;
    for i in 0..a.len() {
        for j in 0..a.len() {
            let t = c * a[i] * a[j];
            tmax = tmax.max(t.abs());
            diff = diff.max((f.get(i, j) - t).abs());
        }
    }
    let scale = tmax.max(f.max_abs());
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

/// JSON form of a solved schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub alpha: CoefficientVector,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub columns: Vec<Vec<i64>>,
    pub r: Vec<u64>,
    pub qfi: QfiMatrix,
    pub residual: f64,
}

impl ScheduleReport {
    pub fn from_schedule(s: &ProtocolSchedule) -> Self {
        let qfi = schedule_qfi_analytic(s);
        let residual = check_saturation_phase(&qfi, &s.alpha, s.n, s.m).expect("dimensions agree");
        ScheduleReport {
            alpha: s.alpha.clone(),
            n: s.n,
            m: s.m,
            columns: s.columns.clone(),
            r: s.r.clone(),
            qfi,
            residual,
        }
    }

    pub fn to_schedule(&self) -> Result<ProtocolSchedule> {
        ProtocolSchedule::new(self.alpha.clone(), self.n, self.columns.clone(), self.r.clone())
    }
}
