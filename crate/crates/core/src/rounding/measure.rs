//! Measure arithmetic behind the anti-cache distribution.
//!
//! Every measure entering the system is an f64 (a dyadic rational), so the
//! exact mode stays in dyadic rationals throughout: sums, differences and
//! products never need rounding and the combinatorial invariants can be
//! asserted with equality. The float mode runs the same code with a fixed
//! tolerance `THETA` and periodic renormalization.

use std::cmp::Ordering;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Pow, ToPrimitive, Zero};

/// Tolerance of the floating-point mode.
pub const THETA: f64 = 1e-9;

pub trait Measure: Clone + PartialEq + std::fmt::Debug {
    /// True when arithmetic is exact and invariants hold with equality.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    /// Exact embedding of a finite f64.
    fn from_f64(x: f64) -> Self;
    fn from_int(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn cmp_m(&self, o: &Self) -> Ordering;
    fn is_zero(&self) -> bool;
    /// `6^j` for possibly negative `j`.
    fn six_pow(j: i32) -> Self;
    /// Floor and ceiling as integers; the float mode snaps values within
    /// `THETA` of an integer onto it.
    fn floor_ceil(&self) -> (i64, i64);

    fn is_positive_m(&self) -> bool {
        matches!(self.cmp_m(&Self::zero()), Ordering::Greater)
    }
    fn min_m(&self, o: &Self) -> Self {
        if self.cmp_m(o) == Ordering::Greater { o.clone() } else { self.clone() }
    }
    /// Equality up to the mode's tolerance.
    fn approx_eq(&self, o: &Self) -> bool {
        if Self::EXACT {
            self == o
        } else {
            (self.to_f64() - o.to_f64()).abs() <= THETA
        }
    }
    /// `self <= o` up to the mode's tolerance.
    fn le_tol(&self, o: &Self) -> bool {
        if Self::EXACT {
            self.cmp_m(o) != Ordering::Greater
        } else {
            self.to_f64() <= o.to_f64() + THETA
        }
    }
}

impl Measure for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        num::Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite f64")
    }
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).expect("rational fits in f64 range")
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn cmp_m(&self, o: &Self) -> Ordering {
        self.cmp(o)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn six_pow(j: i32) -> Self {
        BigRational::from_integer(BigInt::from(6)).pow(j)
    }
    fn floor_ceil(&self) -> (i64, i64) {
        let f = self.floor().to_integer().to_i64().expect("class mass fits i64");
        let c = self.ceil().to_integer().to_i64().expect("class mass fits i64");
        (f, c)
    }
}

impl Measure for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn cmp_m(&self, o: &Self) -> Ordering {
        self.total_cmp(o)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn six_pow(j: i32) -> Self {
        6f64.powi(j)
    }
    fn floor_ceil(&self) -> (i64, i64) {
        (self.floor() as i64, self.ceil() as i64)
    }
}

/// Signed deviation helper used by the imbalance computation: how far `count`
/// lies outside the balanced window `[floor, ceil]`.
pub fn window_deviation(count: i64, floor: i64, ceil: i64) -> i64 {
    (count - ceil).max(floor - count).max(0)
}
