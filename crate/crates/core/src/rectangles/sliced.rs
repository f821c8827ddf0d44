// SPDX-License-Identifier: Apache-2.0

//! Two-stage grid estimator for high dimensions.
//!
//! Stage 1 streams `M` draws and keeps, per coordinate, the `⌈t_max M / 2⌉`
//! lowest and highest values, which is enough to read off both marginal
//! quantiles at every grid level. Stage 2 streams `M_val` fresh draws and
//! measures the coverage of each nested rectangle `R(t_k)` in one pass: for
//! each draw, find the largest level whose rectangle still contains it.

use super::quantile::{check_tail, tail_count, TailPair};
use super::{Method, QuantileRectangle};
use crate::error::{Error, Result};
use crate::sampling::{fold_draws, VectorSampler};

/// Stream offset of the validation draws, far from anything Stage 1 uses.
const VALIDATION_STREAM: u64 = 1 << 40;

/// Relative slack when checking that grid levels lie in `[α/d, α]`.
const GRID_EPS: f64 = 1e-12;

/// `k` log-spaced levels from `α/d` to `α`, both included.
pub fn default_grid(alpha: f64, d: usize, k: usize) -> Vec<f64> {
    let lo = alpha / d.max(1) as f64;
    if k <= 1 || d <= 1 {
        return vec![alpha];
    }
    let step = (alpha / lo).ln() / (k - 1) as f64;
    let mut grid: Vec<f64> = (0..k).map(|i| lo * (step * i as f64).exp()).collect();
    grid[0] = lo;
    grid[k - 1] = alpha;
    grid
}

/// `max(10⁶, ⌈20 d / α⌉)`.
pub fn default_samples(alpha: f64, d: usize) -> usize {
    ((20.0 * d as f64 / alpha).ceil() as usize).max(1_000_000)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlicedGridConfig {
    /// Ascending levels inside `[α/d, α]`.
    pub grid: Vec<f64>,
    /// Stage 1 draws.
    pub samples: usize,
    /// Stage 2 draws.
    pub validation_samples: usize,
    /// Bound on tail-buffer memory; coordinates are processed in chunks that
    /// fit.
    pub memory_budget_bytes: usize,
}

impl SlicedGridConfig {
    pub fn new(alpha: f64, d: usize) -> Self {
        Self {
            grid: default_grid(alpha, d, 16),
            samples: default_samples(alpha, d),
            validation_samples: 100_000,
            memory_budget_bytes: 1 << 30,
        }
    }
}

/// Stage 1 output: marginal bounds at every grid level.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicedQuantiles {
    levels: Vec<f64>,
    d: usize,
    /// Coordinate-major, `d × K`; non-decreasing along each row.
    lower: Vec<f64>,
    /// Coordinate-major, `d × K`; non-increasing along each row.
    upper: Vec<f64>,
}

impl SlicedQuantiles {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Bounds of the rectangle at grid index `level`.
    pub fn bounds(&self, level: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.levels.len();
        let lower = (0..self.d).map(|j| self.lower[j * k + level]).collect();
        let upper = (0..self.d).map(|j| self.upper[j * k + level]).collect();
        (lower, upper)
    }

    pub fn rectangle(&self, level: usize, alpha: f64, method: Method) -> Result<QuantileRectangle> {
        let (lower, upper) = self.bounds(level);
        QuantileRectangle::new(lower, upper, self.levels[level], alpha, method)
    }

    /// Number of leading levels whose rectangle contains `x`.
    fn containing_levels(&self, x: &[f64]) -> usize {
        let k = self.levels.len();
        let mut best = k;
        for (j, &v) in x.iter().enumerate() {
            let lo = &self.lower[j * k..(j + 1) * k];
            let hi = &self.upper[j * k..(j + 1) * k];
            best = best
                .min(lo.partition_point(|&l| l <= v))
                .min(hi.partition_point(|&u| u >= v));
            if best == 0 {
                break;
            }
        }
        best
    }
}

/// Per-coordinate tail estimation at every level of `levels` from `samples`
/// draws.
pub fn stage_one<S: VectorSampler>(
    sampler: &S,
    levels: &[f64],
    samples: usize,
    memory_budget_bytes: usize,
    seed: u64,
) -> Result<SlicedQuantiles> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("empty level grid".into()));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "grid levels must be strictly ascending".into(),
        ));
    }
    if let Some(&t) = levels.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::OutOfRange {
            what: "grid level",
            value: t,
            range: "(0, 1]".into(),
        });
    }
    check_tail(levels[0], samples)?;

    let d = sampler.dim();
    let k = levels.len();
    let cap = tail_count(levels[k - 1] / 2.0, samples);
    // Two buffers per coordinate, each up to 2·cap values before compaction,
    // and one partial set per worker plus the reduction.
    let per_coord = 4 * cap * std::mem::size_of::<f64>();
    let sets = rayon::current_num_threads() + 1;
    let chunk = (memory_budget_bytes / (per_coord * sets).max(1)).clamp(1, d.max(1));

    let mut lower = vec![0.0; d * k];
    let mut upper = vec![0.0; d * k];
    let mut start = 0;
    while start < d {
        let end = (start + chunk).min(d);
        // Every chunk replays the same draws, so the output does not depend
        // on the chunking.
        let tails = fold_draws(
            sampler,
            samples,
            seed,
            0,
            || vec![TailPair::new(cap); end - start],
            |acc, x| {
                for (t, &v) in acc.iter_mut().zip(&x[start..end]) {
                    t.push(v);
                }
            },
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        );
        for (off, tail) in tails.into_iter().enumerate() {
            let j = start + off;
            let (low, high) = tail.finish();
            for (i, &t) in levels.iter().enumerate() {
                let c = tail_count(t / 2.0, samples);
                lower[j * k + i] = low[c - 1];
                upper[j * k + i] = high[c - 1];
            }
        }
        start = end;
    }
    Ok(SlicedQuantiles {
        levels: levels.to_vec(),
        d,
        lower,
        upper,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCandidate {
    pub level_t: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlicedGridResult {
    pub rectangle: QuantileRectangle,
    /// One entry per grid level, ascending in level.
    pub candidates: Vec<GridCandidate>,
    /// Index of the chosen level in `candidates`.
    pub selected: usize,
    /// Stage 1 bounds at every level, for reading off other rectangles
    /// from the same draws.
    pub quantiles: SlicedQuantiles,
}

/// Largest grid level whose validated coverage reaches `1 - α`.
pub fn sliced_quantile_grid<S: VectorSampler>(
    sampler: &S,
    alpha: f64,
    config: &SlicedGridConfig,
    seed: u64,
) -> Result<SlicedGridResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            range: "(0, 1)".into(),
        });
    }
    let d = sampler.dim();
    let lo = alpha / d as f64;
    if let Some(&t) = config
        .grid
        .iter()
        .find(|&&t| t < lo * (1.0 - GRID_EPS) || t > alpha * (1.0 + GRID_EPS))
    {
        return Err(Error::OutOfRange {
            what: "grid level",
            value: t,
            range: format!("[{lo}, {alpha}]"),
        });
    }
    if config.validation_samples == 0 {
        return Err(Error::InvalidArgument(
            "validation needs at least one draw".into(),
        ));
    }
    let q = stage_one(
        sampler,
        &config.grid,
        config.samples,
        config.memory_budget_bytes,
        seed,
    )?;

    let k = config.grid.len();
    let hist = fold_draws(
        sampler,
        config.validation_samples,
        seed,
        VALIDATION_STREAM,
        || vec![0usize; k + 1],
        |h, x| h[q.containing_levels(x)] += 1,
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    // R(t_i) holds every draw whose containing count exceeds i.
    let mut inside = config.validation_samples - hist[0];
    let mut candidates = Vec::with_capacity(k);
    for (i, &t) in config.grid.iter().enumerate() {
        candidates.push(GridCandidate {
            level_t: t,
            coverage: inside as f64 / config.validation_samples as f64,
        });
        inside -= hist[i + 1];
    }

    let target = 1.0 - alpha;
    let selected = candidates
        .iter()
        .rposition(|c| c.coverage >= target)
        .ok_or(Error::NoFeasibleLevel {
            target,
            best: candidates[0].coverage,
        })?;
    let rectangle = q.rectangle(selected, alpha, Method::SlicedGrid)?;
    Ok(SlicedGridResult {
        rectangle,
        candidates,
        selected,
        quantiles: q,
    })
}
