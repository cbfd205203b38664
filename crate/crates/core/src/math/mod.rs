//! Exact rationals, coefficient vectors, vector p-functions and the small
//! dense symmetric matrices shared by the rest of the crate.

mod coeffs;
mod qfi;
mod rational;

pub use coeffs::{partition_signs, restricted_one_norm, CoefficientVector};
pub use qfi::{max_rel_diff, QfiMatrix};
pub use rational::Rational;

use crate::error::{Error, Result};

/// Default relative tolerance for real comparisons.
pub const REL_TOL: f64 = 1e-9;

/// Schatten p-function `(Σ|v_i|^p)^{1/p}`. A norm only for `p ≥ 1`.
pub fn schatten_p(v: &[f64], p: f64) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite vector entry".into()));
    }
    // Scale by the largest magnitude so small p does not underflow.
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    Ok(scale * s.powf(1.0 / p))
}

pub fn relative_eq(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schatten_examples() {
        assert!((schatten_p(&[3.0, 4.0], 2.0).unwrap() - 5.0).abs() < 1e-15);
        assert!((schatten_p(&[1.0, 0.0, 0.0], 2.0 / 3.0).unwrap() - 1.0).abs() < 1e-15);
        let v = schatten_p(&[1.0, 1.0], 2.0 / 3.0).unwrap();
        assert!((v - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((v - 2.828427).abs() < 1e-6);
    }

    #[test]
    fn schatten_errors() {
        assert_eq!(schatten_p(&[], 2.0), Err(Error::EmptyInput));
        assert!(schatten_p(&[1.0], 0.0).is_err());
        assert!(schatten_p(&[f64::NAN], 1.0).is_err());
        assert_eq!(schatten_p(&[0.0, 0.0], 0.5).unwrap(), 0.0);
    }

    fn small_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..8)
    }

    fn rational() -> impl Strategy<Value = Rational> {
        (-50i64..50, 1i64..30).prop_map(|(n, d)| Rational::new(n, d).unwrap())
    }

    proptest! {
        #[test]
        fn schatten_monotone_in_p(v in small_vec()) {
            let n23 = schatten_p(&v, 2.0 / 3.0).unwrap();
            let n1 = schatten_p(&v, 1.0).unwrap();
            let n2 = schatten_p(&v, 2.0).unwrap();
            let ninf = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let tol = 1e-12 * (1.0 + n23);
            prop_assert!(n23 + tol >= n1);
            prop_assert!(n1 + tol >= n2);
            prop_assert!(n2 + tol >= ninf);
        }

        #[test]
        fn schatten_triangle_for_p_ge_1(a in small_vec(), p in 1.0f64..4.0) {
            let b: Vec<f64> = a.iter().map(|x| 0.5 * x - 1.0).collect();
            let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = schatten_p(&s, p).unwrap();
            let rhs = schatten_p(&a, p).unwrap() + schatten_p(&b, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn holder_inequalities(v in prop::collection::vec(rational(), 1..8)) {
            prop_assume!(v.iter().any(|x| !x.is_zero()));
            let alpha = partition_signs(&v).unwrap();
            let f = alpha.to_f64();
            let d = f.len() as f64;
            let n23 = schatten_p(&f, 2.0 / 3.0).unwrap();
            let n1 = alpha.norm_1().to_f64();
            let n2sq = alpha.norm_2_sq().to_f64();
            prop_assert!(n23 * n23 <= d * n1 * n1 * (1.0 + 1e-12));
            prop_assert!(n1 * n1 <= d * n2sq * (1.0 + 1e-12));
        }

        #[test]
        fn rational_add_sub_roundtrip(a in rational(), b in rational()) {
            prop_assert_eq!((&a + &b) - &b, a);
        }

        #[test]
        fn partition_is_idempotent(v in prop::collection::vec(rational(), 1..8)) {
            prop_assume!(v.iter().any(|x| !x.is_zero()));
            let once = partition_signs(&v).unwrap();
            let twice = partition_signs(once.entries()).unwrap();
            prop_assert_eq!(once.entries(), twice.entries());
            prop_assert_eq!(once.pos_set(), twice.pos_set());
            prop_assert!(!twice.flipped());
            prop_assert!(once.norm_1_pos() >= once.norm_1_neg());
        }
    }

    #[test]
    fn holder_equality_for_flat_vectors() {
        for d in 1..=8usize {
            let f = vec![0.7; d];
            let n23 = schatten_p(&f, 2.0 / 3.0).unwrap();
            let n1: f64 = f.iter().sum();
            let n2sq: f64 = f.iter().map(|x| x * x).sum();
            assert!(relative_eq(n23 * n23, d as f64 * n1 * n1, 1e-12));
            assert!(relative_eq(n1 * n1, d as f64 * n2sq, 1e-12));
        }
    }
}
