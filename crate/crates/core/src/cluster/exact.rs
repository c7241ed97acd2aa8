use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

const FRAC_BITS: i32 = 80;
const SCALE: f64 = (1u128 << FRAC_BITS) as f64;
/// Magnitudes at or above this do not fit the 47 integer bits.
const LIMIT: f64 = (1u64 << 46) as f64;

/// Fixed-point accumulator for floating-point sums.
///
/// Every `f64` is rounded once onto a 2^-80 grid, after which addition is
/// exact integer arithmetic and therefore associative and commutative. Sums
/// come out bit-identical no matter how messages are grouped by combiners,
/// workers or partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExactSum(i128);

impl ExactSum {
    pub const ZERO: ExactSum = ExactSum(0);

    /// Panics on non-finite input or magnitudes of 2^46 and above.
    pub fn from_f64(x: f64) -> Self {
        assert!(
            x.is_finite() && x.abs() < LIMIT,
            "{x} is outside the exact accumulator range"
        );
        ExactSum((x * SCALE).round() as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    pub fn raw(self) -> i128 {
        self.0
    }

    pub fn abs(self) -> Self {
        ExactSum(self.0.wrapping_abs())
    }
}

impl From<f64> for ExactSum {
    fn from(x: f64) -> Self {
        ExactSum::from_f64(x)
    }
}

impl Add for ExactSum {
    type Output = ExactSum;
    fn add(self, rhs: Self) -> Self {
        ExactSum(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for ExactSum {
    fn add_assign(&mut self, rhs: Self) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl Sub for ExactSum {
    type Output = ExactSum;
    fn sub(self, rhs: Self) -> Self {
        ExactSum(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for ExactSum {
    type Output = ExactSum;
    fn neg(self) -> Self {
        ExactSum(self.0.wrapping_neg())
    }
}

impl Sum for ExactSum {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExactSum::ZERO, Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trips_representable_values() {
        for x in [0.0, 1.0, -2.5, 0.15, 1.0 / 3.0, 12345.678] {
            let back = ExactSum::from_f64(x).to_f64();
            assert!((back - x).abs() <= x.abs() * 1e-15 + 1e-24, "{x} -> {back}");
        }
        assert_eq!(ExactSum::from_f64(0.5).to_f64(), 0.5);
        assert_eq!(ExactSum::from_f64(1024.25).to_f64(), 1024.25);
    }

    #[test]
    #[should_panic]
    fn rejects_nan() {
        let _ = ExactSum::from_f64(f64::NAN);
    }

    proptest! {
        #[test]
        fn sum_is_independent_of_grouping(
            xs in proptest::collection::vec(-1.0e6f64..1.0e6, 1..60),
            split in 0usize..60,
        ) {
            let parts: Vec<ExactSum> = xs.iter().map(|&x| ExactSum::from_f64(x)).collect();
            let sequential: ExactSum = parts.iter().copied().sum();
            let k = split % parts.len();
            let grouped = parts[..k].iter().copied().sum::<ExactSum>()
                + parts[k..].iter().rev().copied().sum::<ExactSum>();
            prop_assert_eq!(sequential, grouped);
            let naive: f64 = xs.iter().sum();
            prop_assert!((sequential.to_f64() - naive).abs() <= 1e-6);
        }
    }
}
