//! Compensated floating-point accumulation.

use std::iter::Sum;
use std::ops::AddAssign;

/// Running sum with a second-order error term (Knuth two-sum).
///
/// The correction is accumulated branch-free, so the result depends only on
/// the order in which terms are added.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, err: 0.0 }
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let s = self.sum + x;
        let bb = s - self.sum;
        self.err += (self.sum - (s - bb)) + (x - bb);
        self.sum = s;
    }

    /// Folds another partial sum in, keeping both error terms.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.err += other.err;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.err
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

impl Sum<f64> for CompensatedSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator, returned as a plain value.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().sum::<CompensatedSum>().value()
}
