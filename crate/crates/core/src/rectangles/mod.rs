// SPDX-License-Identifier: Apache-2.0

//! Quantile-based credible rectangles.
//!
//! A rectangle at level `t` is the product of marginal intervals
//! `[q_i(t/2), q_i(1 - t/2)]`. Its joint posterior mass decreases as `t`
//! grows; the Bonferroni level `α/d` always has mass at least `1 - α`, the
//! naive level `α` at most `1 - α`, and the optimal level sits in between.
//!
//! Estimators offered here, by dimension they stay practical for:
//!
//! * [`bghm_rectangle`]: all samples resident, exact order-statistic
//!   construction.
//! * [`online_bghm`]: same rectangle from a stream of batches, retaining only
//!   the extreme points.
//! * [`sliced_quantile_grid`]: per-coordinate tail buffers over a grid of
//!   levels, then coverage-validated level selection.

mod bghm;
mod online;
mod quantile;
mod sliced;
mod special;

pub use bghm::{bghm_for_alpha, bghm_rectangle, depths, score_s, scores, BghmFit};
pub use online::{
    extreme_set_by_count, extreme_set_by_depth, online_bghm, ExtremeSet, OnlineBghm,
    OnlineOptions, OnlineStats,
};
pub use quantile::{check_tail, tail_count, SmallestK, TailPair, MIN_TAIL_POINTS};
pub use sliced::{
    default_grid, default_samples, sliced_quantile_grid, stage_one, GridCandidate, SlicedGridConfig,
    SlicedGridResult, SlicedQuantiles,
};
pub use special::{special_rectangle, special_rectangle_from_samples, SpecialKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{fold_draws, VectorSampler};

/// How a rectangle was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bonferroni,
    Naive,
    Bghm,
    OnlineBghm,
    SlicedGrid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bonferroni => "bonferroni",
            Method::Naive => "naive",
            Method::Bghm => "bghm",
            Method::OnlineBghm => "online_bghm",
            Method::SlicedGrid => "sliced_grid",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Product of closed marginal intervals at a common quantile level.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileRectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
    level_t: f64,
    nominal_alpha: f64,
    method: Method,
}

impl QuantileRectangle {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        level_t: f64,
        nominal_alpha: f64,
        method: Method,
    ) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument(format!(
                "interval {i} has lower bound {} above upper bound {}",
                lower[i], upper[i]
            )));
        }
        if !(0.0..1.0).contains(&nominal_alpha) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: nominal_alpha,
                range: "(0, 1)".into(),
            });
        }
        Ok(Self {
            lower,
            upper,
            level_t,
            nominal_alpha,
            method,
        })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn level_t(&self) -> f64 {
        self.level_t
    }

    pub fn nominal_alpha(&self) -> f64 {
        self.nominal_alpha
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Closed-interval containment.
    #[inline]
    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }
}

/// Fraction of `points` inside `rect`.
pub fn coverage<'a, I>(rect: &QuantileRectangle, points: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let (mut inside, mut total) = (0usize, 0usize);
    for p in points {
        total += 1;
        inside += usize::from(rect.contains(p));
    }
    if total == 0 {
        return f64::NAN;
    }
    inside as f64 / total as f64
}

/// Monte Carlo coverage of `rect` under `sampler` with `count` fresh draws.
pub fn coverage_from_sampler<S: VectorSampler>(
    rect: &QuantileRectangle,
    sampler: &S,
    count: usize,
    seed: u64,
) -> Result<f64> {
    if count == 0 {
        return Err(Error::InvalidArgument("coverage needs at least one draw".into()));
    }
    if sampler.dim() != rect.d() {
        return Err(Error::DimensionMismatch {
            expected: rect.d(),
            got: sampler.dim(),
        });
    }
    let inside = fold_draws(
        sampler,
        count,
        seed,
        0,
        || 0usize,
        |acc, x| *acc += usize::from(rect.contains(x)),
        |a, b| a + b,
    );
    Ok(inside as f64 / count as f64)
}
