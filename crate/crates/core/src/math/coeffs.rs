use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Rational;
use crate::error::{Error, Result};

/// Coefficients of the linear function `q = α·θ`, split into the
/// nonnegative set `P` and negative set `N`.
///
/// Stored canonically, i.e. with `‖α‖_{1,P} ≥ ‖α‖_{1,N}`. When the input had
/// the opposite imbalance it is negated and `flipped` is set, so estimates of
/// `q` computed against the canonical entries must be passed through
/// [`CoefficientVector::unflip`] before being reported.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientVector {
    entries: Vec<Rational>,
    pos: Vec<usize>,
    neg: Vec<usize>,
    flipped: bool,
}

/// Builds the canonical [`CoefficientVector`] from raw coefficients.
pub fn partition_signs(raw: &[Rational]) -> Result<CoefficientVector> {
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    if raw.iter().all(Rational::is_zero) {
        return Err(Error::DegenerateFunction);
    }
    let pos_norm: Rational = raw.iter().filter(|a| !a.is_negative()).sum();
    let neg_norm: Rational = raw.iter().filter(|a| a.is_negative()).map(Rational::abs).sum();
    let flipped = neg_norm > pos_norm;
    let entries: Vec<Rational> = if flipped { raw.iter().map(|a| -a).collect() } else { raw.to_vec() };
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..entries.len()).partition(|&j| !entries[j].is_negative());
    Ok(CoefficientVector { entries, pos, neg, flipped })
}

impl CoefficientVector {
    pub fn from_strs(raw: &[&str]) -> Result<Self> {
        let parsed = raw.iter().map(|s| s.parse()).collect::<Result<Vec<Rational>>>()?;
        partition_signs(&parsed)
    }

    pub fn from_integers(raw: &[i64]) -> Result<Self> {
        let parsed: Vec<Rational> = raw.iter().map(|&v| Rational::from(v)).collect();
        partition_signs(&parsed)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Canonical entries (possibly negated relative to the input).
    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    /// Entries as originally supplied.
    pub fn original_entries(&self) -> Vec<Rational> {
        if self.flipped {
            self.entries.iter().map(|a| -a).collect()
        } else {
            self.entries.clone()
        }
    }

    pub fn pos_set(&self) -> &[usize] {
        &self.pos
    }

    pub fn neg_set(&self) -> &[usize] {
        &self.neg
    }

    pub fn flipped(&self) -> bool {
        self.flipped
    }

    /// Whether index `j` belongs to `P` (α_j ≥ 0).
    pub fn is_pos(&self, j: usize) -> bool {
        !self.entries[j].is_negative()
    }

    pub fn pos_mask(&self) -> Vec<bool> {
        (0..self.dim()).map(|j| self.is_pos(j)).collect()
    }

    /// Maps an estimate of the canonical function back to the input's sign.
    pub fn unflip(&self, q: f64) -> f64 {
        if self.flipped {
            -q
        } else {
            q
        }
    }

    pub fn norm_1_pos(&self) -> Rational {
        self.pos.iter().map(|&j| self.entries[j].abs()).sum()
    }

    pub fn norm_1_neg(&self) -> Rational {
        self.neg.iter().map(|&j| self.entries[j].abs()).sum()
    }

    pub fn norm_1(&self) -> Rational {
        self.entries.iter().map(Rational::abs).sum()
    }

    pub fn norm_2_sq(&self) -> Rational {
        self.entries.iter().map(|a| a * a).sum()
    }

    /// Number of exactly nonzero entries.
    pub fn norm_0(&self) -> usize {
        self.entries.iter().filter(|a| !a.is_zero()).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(Rational::to_f64).collect()
    }

    /// `α·θ` for the canonical entries.
    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.entries.iter().zip(theta).map(|(a, t)| a.to_f64() * t).sum()
    }
}

/// `‖α‖_{1,S} = Σ_{i∈S} |α_i|`, exact.
pub fn restricted_one_norm(alpha: &CoefficientVector, set: &[usize]) -> Result<Rational> {
    let mut total = Rational::zero();
    for &i in set {
        let a = alpha.entries.get(i).ok_or(Error::IndexOutOfRange { index: i, dim: alpha.dim() })?;
        total = total + a.abs();
    }
    Ok(total)
}

impl Serialize for CoefficientVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.original_entries().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<Rational>::deserialize(d)?;
        partition_signs(&raw).map_err(serde::de::Error::custom)
    }
}
