//! Scalar abstraction shared by the model, policies and exact evaluation.
//!
//! Everything that only needs field arithmetic (model tables, policy rows,
//! expected returns, orbit averages) is generic over [`Scalar`], so the same
//! code runs in `f64` for training and in exact rationals for the algebraic
//! checks. Learning code is `f64` only.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `num / den`, exact for rational scalars.
    fn from_ratio(num: i64, den: i64) -> Self {
        let n = Self::from_i64(num).expect("integer fits scalar");
        let d = Self::from_i64(den).expect("integer fits scalar");
        n / d
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value fits scalar")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits scalar")
    }
}

impl<T> Scalar for T where
    T: Clone
        + Debug
        + PartialOrd
        + Num
        + Signed
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// `|a - b| <= tol`, with `tol` given in `f64`.
pub fn approx_eq<S: Scalar>(a: &S, b: &S, tol: f64) -> bool {
    let diff = (a.clone() - b.clone()).abs();
    diff <= S::from_f64_lossy(tol)
}

/// Sum in ascending value order so the result only depends on the multiset of
/// summands, not on their order.
pub fn sorted_sum<S: Scalar>(mut values: Vec<S>) -> S {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values.into_iter().fold(S::zero(), |acc, v| acc + v)
}
