// SPDX-License-Identifier: Apache-2.0

//! Closed-form levels: Bonferroni (`t = α/d`) and naive (`t = α`).

use serde::{Deserialize, Serialize};

use super::quantile::{check_tail, interval_from_sorted};
use super::sliced::stage_one;
use super::{Method, QuantileRectangle};
use crate::error::{Error, Result};
use crate::sampling::{SampleBlock, VectorSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialKind {
    Bonferroni,
    Naive,
}

impl SpecialKind {
    pub fn level(self, alpha: f64, d: usize) -> f64 {
        match self {
            SpecialKind::Bonferroni => alpha / d as f64,
            SpecialKind::Naive => alpha,
        }
    }

    fn method(self) -> Method {
        match self {
            SpecialKind::Bonferroni => Method::Bonferroni,
            SpecialKind::Naive => Method::Naive,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            range: "(0, 1)".into(),
        })
    }
}

/// Special rectangle from `samples` streamed draws of `sampler`.
pub fn special_rectangle<S: VectorSampler>(
    sampler: &S,
    alpha: f64,
    kind: SpecialKind,
    samples: usize,
    seed: u64,
) -> Result<QuantileRectangle> {
    check_alpha(alpha)?;
    let t = kind.level(alpha, sampler.dim());
    let q = stage_one(sampler, &[t], samples, usize::MAX, seed)?;
    q.rectangle(0, alpha, kind.method())
}

/// Special rectangle from a resident sample block.
pub fn special_rectangle_from_samples(
    block: &SampleBlock,
    alpha: f64,
    kind: SpecialKind,
) -> Result<QuantileRectangle> {
    check_alpha(alpha)?;
    let t = kind.level(alpha, block.dim());
    check_tail(t, block.len())?;
    let (lower, upper) = (0..block.dim())
        .map(|j| {
            let mut col = block.column(j);
            col.sort_by(f64::total_cmp);
            interval_from_sorted(&col, t)
        })
        .unzip();
    QuantileRectangle::new(lower, upper, t, alpha, kind.method())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rectangles::coverage_from_sampler;
    use crate::sampling::{substream, GaussianSampler};

    #[test]
    fn levels() {
        // p = 107 regions give 5671 pairs.
        let t = SpecialKind::Bonferroni.level(0.05, 5671);
        assert!((t - 8.817e-6).abs() < 1e-9);
        assert!((t / 2.0 - 4.41e-6).abs() < 1e-8);
        assert_eq!(SpecialKind::Naive.level(0.05, 5671), 0.05);
    }

    #[test]
    fn product_rule_under_independence() {
        let s = GaussianSampler::standard(2);
        let r = special_rectangle(&s, 0.1, SpecialKind::Naive, 200_000, 1).unwrap();
        let cov = coverage_from_sampler(&r, &s, 100_000, 99).unwrap();
        assert!((cov - 0.81).abs() < 0.006, "{cov}");
    }

    #[test]
    fn resident_and_streamed_agree_on_level() {
        let s = GaussianSampler::standard(3);
        let b = s.draw_block(&mut substream(0, 0), 5000);
        let r = special_rectangle_from_samples(&b, 0.05, SpecialKind::Bonferroni).unwrap();
        assert_eq!(r.level_t(), 0.05 / 3.0);
        assert_eq!(r.method(), Method::Bonferroni);
    }

    #[test]
    fn insufficient_samples() {
        let s = GaussianSampler::standard(20);
        let b = s.draw_block(&mut substream(0, 0), 7999);
        assert!(matches!(
            special_rectangle_from_samples(&b, 0.05, SpecialKind::Bonferroni),
            Err(Error::InsufficientSamples { .. })
        ));
        let b = s.draw_block(&mut substream(0, 0), 8000);
        assert!(special_rectangle_from_samples(&b, 0.05, SpecialKind::Bonferroni).is_ok());
    }
}
