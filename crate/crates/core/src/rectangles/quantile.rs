// SPDX-License-Identifier: Apache-2.0

//! Order-statistic quantiles and bounded tail buffers.
//!
//! Marginal quantiles are plain order statistics: the lower bound at tail
//! level `t/2` is the `⌈N·t/2⌉`-th smallest of `N` values and the upper bound
//! the `⌈N·t/2⌉`-th largest. No interpolation.

use crate::error::{Error, Result};

/// Fewest points an estimated tail may rest on.
pub const MIN_TAIL_POINTS: f64 = 10.0;

/// Slack for `level · n` products that should be integral.
const INDEX_EPS: f64 = 1e-9;

/// Number of order statistics cut off by tail probability `tail` out of `n`,
/// i.e. `max(1, ⌈n · tail⌉)`.
pub fn tail_count(tail: f64, n: usize) -> usize {
    ((n as f64 * tail - INDEX_EPS).ceil().max(1.0) as usize).min(n.max(1))
}

/// Errors unless `n` draws put at least [`MIN_TAIL_POINTS`] in each tail of
/// the level-`t` rectangle.
pub fn check_tail(level_t: f64, n: usize) -> Result<()> {
    let per_tail = n as f64 * level_t / 2.0;
    if per_tail + INDEX_EPS < MIN_TAIL_POINTS {
        Err(Error::InsufficientSamples {
            level: level_t,
            available: n,
            per_tail,
        })
    } else {
        Ok(())
    }
}

/// Keeps the `cap` smallest values pushed into it.
#[derive(Clone, Debug)]
pub struct SmallestK {
    cap: usize,
    buf: Vec<f64>,
    threshold: f64,
}

impl SmallestK {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            buf: Vec::with_capacity(2 * cap),
            threshold: f64::INFINITY,
        }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        if v < self.threshold || self.buf.len() < self.cap {
            self.buf.push(v);
            if self.buf.len() >= 2 * self.cap.max(1) {
                self.compact();
            }
        }
    }

    fn compact(&mut self) {
        if self.buf.len() > self.cap && self.cap > 0 {
            self.buf.select_nth_unstable_by(self.cap - 1, f64::total_cmp);
            self.buf.truncate(self.cap);
            self.threshold = self
                .buf
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        } else if self.cap == 0 {
            self.buf.clear();
            self.threshold = f64::NEG_INFINITY;
        }
    }

    pub fn merge(mut self, other: SmallestK) -> SmallestK {
        for v in other.buf {
            self.push(v);
        }
        self
    }

    /// The retained values in ascending order.
    pub fn into_sorted(mut self) -> Vec<f64> {
        self.compact();
        self.buf.sort_by(f64::total_cmp);
        self.buf
    }
}

/// Both tails of one coordinate.
#[derive(Clone, Debug)]
pub struct TailPair {
    low: SmallestK,
    high: SmallestK,
}

impl TailPair {
    pub fn new(cap: usize) -> Self {
        Self {
            low: SmallestK::new(cap),
            high: SmallestK::new(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        self.low.push(v);
        self.high.push(-v);
    }

    pub fn merge(self, other: TailPair) -> TailPair {
        TailPair {
            low: self.low.merge(other.low),
            high: self.high.merge(other.high),
        }
    }

    /// `(ascending lowest values, descending highest values)`.
    pub fn finish(self) -> (Vec<f64>, Vec<f64>) {
        let low = self.low.into_sorted();
        let high = self.high.into_sorted().into_iter().map(|v| -v).collect();
        (low, high)
    }
}

/// Lower and upper order-statistic bounds of a fully resident sample at
/// level `t`.
pub fn interval_from_sorted(sorted: &[f64], level_t: f64) -> (f64, f64) {
    let k = tail_count(level_t / 2.0, sorted.len());
    (sorted[k - 1], sorted[sorted.len() - k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tail_count_is_integral_where_it_should_be() {
        assert_eq!(tail_count(0.05, 100), 5);
        assert_eq!(tail_count(0.025, 1000), 25);
        assert_eq!(tail_count(0.0251, 1000), 26);
        assert_eq!(tail_count(1e-9, 10), 1);
    }

    #[test]
    fn tail_check() {
        assert!(check_tail(0.02, 1000).is_ok());
        assert!(matches!(
            check_tail(0.02, 999),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn interval_from_sorted_matches_counts() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(interval_from_sorted(&v, 0.1), (5.0, 96.0));
    }

    proptest! {
        #[test]
        fn smallest_k_matches_sort(
            values in proptest::collection::vec(-1e3f64..1e3, 0..400),
            cap in 1usize..40,
            split in 0usize..400,
        ) {
            let split = split.min(values.len());
            let mut a = SmallestK::new(cap);
            let mut b = SmallestK::new(cap);
            values[..split].iter().for_each(|&v| a.push(v));
            values[split..].iter().for_each(|&v| b.push(v));
            let got = a.merge(b).into_sorted();
            let mut expected = values.clone();
            expected.sort_by(f64::total_cmp);
            expected.truncate(cap);
            prop_assert_eq!(got, expected);
        }
    }
}
