// SPDX-License-Identifier: Apache-2.0

//! BGHM rectangle over a stream of batches.
//!
//! Only points close to the edge of the cloud matter: the rectangle's bounds
//! and the count that fixes `j*` depend on the `a*` smallest and largest
//! values per coordinate, where `a* = M + 1 - j*` is small (about `αM/2d` to
//! `αM/2`). Each merge keeps the points of the working set `E ∪ B` whose
//! depth is at most the `T`-th smallest depth plus a margin, with
//! `T = M - k + 1`, and records the innermost discarded value per coordinate
//! and side.
//!
//! At the end the rectangle is recomputed from the retained set. The result
//! is exact whenever every retained order statistic it uses lies strictly
//! outside everything discarded in that coordinate; this is checked, and a
//! failure is reported rather than returning a different rectangle.
//!
//! Depth is counted in `(value, arrival index)` order, which is the same
//! tie-breaking the batch construction applies to the concatenated stream.
//!
//! Retaining by a fixed count of top scores (tie-inclusive) is not enough on
//! its own: a point can be extreme in the union while ranking below the
//! `m`-th score in its own batch. Retaining by depth threshold is closed
//! under union, since depth in a superset is never smaller.

use std::cmp::Ordering;

use super::bghm::{bghm_rectangle, required_inside};
use super::{BghmFit, Method, QuantileRectangle};
use crate::error::{Error, Result};
use crate::sampling::SampleBlock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OnlineOptions {
    /// Extra depth levels kept beyond the `T`-th smallest.
    pub depth_margin: usize,
    /// Brute-force checks on every merge, and a final comparison with the
    /// batch construction (keeps a copy of the whole stream).
    pub verify: bool,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self {
            depth_margin: 1,
            verify: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OnlineStats {
    pub merges: usize,
    /// Largest retained set after pruning.
    pub peak_retained: usize,
    /// Largest working set (retained plus incoming batch).
    pub peak_working: usize,
    /// Merges on which the depth-threshold inclusion was checked.
    pub depth_form_checks: usize,
    /// Must stay zero.
    pub depth_form_violations: usize,
    /// Merges where `E_m(A ∪ B) ⊄ E_m(A) ∪ E_m(B)` for the count form.
    pub count_form_violations: usize,
    /// `Some(true)` if the final rectangle matched the batch construction.
    pub batch_match: Option<bool>,
}

/// Points retained by [`OnlineBghm`].
#[derive(Clone, Debug)]
pub struct ExtremeSet {
    dim: usize,
    points: Vec<f64>,
    seqs: Vec<u64>,
    scores: Vec<usize>,
    total_seen: usize,
}

impl ExtremeSet {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            seqs: Vec::new(),
            scores: Vec::new(),
            total_seen: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_seen(&self) -> usize {
        self.total_seen
    }

    /// Score of each retained point within the retained set.
    pub fn scores(&self) -> &[usize] {
        &self.scores
    }

    /// Arrival index of each retained point in the stream.
    pub fn arrival(&self) -> &[u64] {
        &self.seqs
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_block(&self) -> SampleBlock {
        SampleBlock::new(self.dim, self.points.clone()).expect("retained rows are complete")
    }
}

#[inline]
fn key_cmp(a: (f64, u64), b: (f64, u64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Depth `min_j min(r_j, n + 1 - r_j)` of each row, ranks in
/// `(value, seq)` order.
fn depths_keyed(dim: usize, points: &[f64], seqs: &[u64]) -> Vec<usize> {
    let n = seqs.len();
    let mut depth = vec![usize::MAX; n];
    let mut order: Vec<u32> = Vec::with_capacity(n);
    for j in 0..dim {
        order.clear();
        order.extend(0..n as u32);
        order.sort_unstable_by(|&a, &b| {
            let (a, b) = (a as usize, b as usize);
            key_cmp((points[a * dim + j], seqs[a]), (points[b * dim + j], seqs[b]))
        });
        for (r, &i) in order.iter().enumerate() {
            let d = (r + 1).min(n - r);
            let slot = &mut depth[i as usize];
            *slot = (*slot).min(d);
        }
    }
    if dim == 0 {
        depth.iter_mut().for_each(|d| *d = 0);
    }
    depth
}

/// Indices of the points of `block` whose depth is at most `c`.
pub fn extreme_set_by_depth(block: &SampleBlock, c: usize) -> Vec<usize> {
    let seqs: Vec<u64> = (0..block.len() as u64).collect();
    depths_keyed(block.dim(), block.as_slice(), &seqs)
        .into_iter()
        .enumerate()
        .filter(|&(_, d)| d <= c)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the points of `block` whose score is at least the `m`-th
/// largest score (all ties kept).
pub fn extreme_set_by_count(block: &SampleBlock, m: usize) -> Vec<usize> {
    let seqs: Vec<u64> = (0..block.len() as u64).collect();
    count_form(block.dim(), block.as_slice(), &seqs, m)
}

fn count_form(dim: usize, points: &[f64], seqs: &[u64], m: usize) -> Vec<usize> {
    let n = seqs.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let depth = depths_keyed(dim, points, seqs);
    let mut sorted = depth.clone();
    sorted.sort_unstable();
    // Largest scores are smallest depths.
    let cut = sorted[m.min(n) - 1];
    (0..n).filter(|&i| depth[i] <= cut).collect()
}

/// Streaming BGHM with a bounded retained set.
#[derive(Debug)]
pub struct OnlineBghm {
    alpha: f64,
    total_m: usize,
    k: usize,
    target: usize,
    options: OnlineOptions,
    set: ExtremeSet,
    low_discard: Vec<Option<(f64, u64)>>,
    high_discard: Vec<Option<(f64, u64)>>,
    stats: OnlineStats,
    everything: Option<SampleBlock>,
}

impl OnlineBghm {
    pub fn new(dim: usize, alpha: f64, total_m: usize, options: OnlineOptions) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: alpha,
                range: "(0, 1)".into(),
            });
        }
        if total_m == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "online BGHM needs at least one point of positive dimension".into(),
            ));
        }
        let k = required_inside(alpha, total_m);
        Ok(Self {
            alpha,
            total_m,
            k,
            target: total_m - k + 1,
            options,
            set: ExtremeSet::new(dim),
            low_discard: vec![None; dim],
            high_discard: vec![None; dim],
            stats: OnlineStats::default(),
            everything: options.verify.then(|| SampleBlock::empty(dim)),
        })
    }

    pub fn retained(&self) -> &ExtremeSet {
        &self.set
    }

    pub fn stats(&self) -> &OnlineStats {
        &self.stats
    }

    pub fn push_batch(&mut self, batch: &SampleBlock) -> Result<()> {
        let dim = self.set.dim;
        if batch.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: batch.dim(),
            });
        }
        if batch.is_empty() {
            return Ok(());
        }
        if self.set.total_seen + batch.len() > self.total_m {
            return Err(Error::InvalidArgument(format!(
                "stream delivered more than the announced {} points",
                self.total_m
            )));
        }
        let first_seq = self.set.total_seen as u64;
        let batch_seqs: Vec<u64> = (first_seq..first_seq + batch.len() as u64).collect();
        if let Some(all) = &mut self.everything {
            batch.rows().for_each(|r| all.push_row(r));
        }
        if self.options.verify {
            self.check_merge(batch, &batch_seqs);
        }

        let mut points = std::mem::take(&mut self.set.points);
        let mut seqs = std::mem::take(&mut self.set.seqs);
        points.extend_from_slice(batch.as_slice());
        seqs.extend_from_slice(&batch_seqs);
        self.set.total_seen += batch.len();
        self.stats.merges += 1;
        self.stats.peak_working = self.stats.peak_working.max(seqs.len());

        let depth = depths_keyed(dim, &points, &seqs);
        let n = seqs.len();
        let (kept_points, kept_seqs, kept_depth) = if n > self.target {
            let mut sorted = depth.clone();
            sorted.select_nth_unstable(self.target - 1);
            let cut = sorted[self.target - 1] + self.options.depth_margin;
            let mut kp = Vec::with_capacity(points.len());
            let mut ks = Vec::new();
            let mut kd = Vec::new();
            for i in 0..n {
                let row = &points[i * dim..(i + 1) * dim];
                if depth[i] <= cut {
                    kp.extend_from_slice(row);
                    ks.push(seqs[i]);
                    kd.push(depth[i]);
                } else {
                    for (j, &v) in row.iter().enumerate() {
                        let key = (v, seqs[i]);
                        let lo = &mut self.low_discard[j];
                        if lo.is_none_or(|cur| key_cmp(key, cur) == Ordering::Less) {
                            *lo = Some(key);
                        }
                        let hi = &mut self.high_discard[j];
                        if hi.is_none_or(|cur| key_cmp(key, cur) == Ordering::Greater) {
                            *hi = Some(key);
                        }
                    }
                }
            }
            // Pruning changes the set size, so scores are recomputed.
            let kd = depths_keyed(dim, &kp, &ks);
            (kp, ks, kd)
        } else {
            (points, seqs, depth)
        };
        let len = kept_seqs.len();
        self.set.scores = kept_depth.iter().map(|&d| len + 1 - d).collect();
        self.set.points = kept_points;
        self.set.seqs = kept_seqs;
        self.stats.peak_retained = self.stats.peak_retained.max(len);
        Ok(())
    }

    /// Brute-force inclusion checks for the merge of the retained set with
    /// `batch`.
    fn check_merge(&mut self, batch: &SampleBlock, batch_seqs: &[u64]) {
        let dim = self.set.dim;
        let (ea, sa) = (&self.set.points, &self.set.seqs);
        let mut pw = ea.clone();
        pw.extend_from_slice(batch.as_slice());
        let mut sw = sa.clone();
        sw.extend_from_slice(batch_seqs);

        let dw = depths_keyed(dim, &pw, &sw);
        let da = depths_keyed(dim, ea, sa);
        let db = depths_keyed(dim, batch.as_slice(), batch_seqs);
        let na = sa.len();
        let c = {
            let mut s = dw.clone();
            s.sort_unstable();
            s[self.target.min(s.len()) - 1] + self.options.depth_margin
        };
        self.stats.depth_form_checks += 1;
        let depth_ok = dw.iter().enumerate().all(|(i, &d)| {
            d > c || if i < na { da[i] <= c } else { db[i - na] <= c }
        });
        if !depth_ok {
            self.stats.depth_form_violations += 1;
        }

        let m = self.target;
        let in_w = count_form(dim, &pw, &sw, m);
        let mut in_parts: Vec<u64> = count_form(dim, ea, sa, m)
            .into_iter()
            .map(|i| sa[i])
            .chain(
                count_form(dim, batch.as_slice(), batch_seqs, m)
                    .into_iter()
                    .map(|i| batch_seqs[i]),
            )
            .collect();
        in_parts.sort_unstable();
        if in_w.iter().any(|&i| in_parts.binary_search(&sw[i]).is_err()) {
            self.stats.count_form_violations += 1;
        }
    }

    pub fn finish(mut self) -> Result<(QuantileRectangle, BghmFit, OnlineStats)> {
        let m = self.total_m;
        if self.set.total_seen != m {
            return Err(Error::StreamExhausted {
                expected: m,
                got: self.set.total_seen,
            });
        }
        let dim = self.set.dim;
        let n = self.set.len();
        let depth = depths_keyed(dim, &self.set.points, &self.set.seqs);

        // Smallest a with more than M - k points at depth <= a.
        let mut hist = vec![0usize; n + 2];
        depth.iter().for_each(|&d| hist[d] += 1);
        let mut cum = 0;
        let mut a_star = None;
        for (a, &h) in hist.iter().enumerate().skip(1) {
            cum += h;
            if cum > m - self.k {
                a_star = Some(a);
                break;
            }
        }
        let a_star = a_star.ok_or(Error::OnlineNotCertified {
            dim: 0,
            margin: self.options.depth_margin,
        })?;

        let mut lower = Vec::with_capacity(dim);
        let mut upper = Vec::with_capacity(dim);
        let mut keys: Vec<(f64, u64)> = Vec::with_capacity(n);
        for j in 0..dim {
            keys.clear();
            keys.extend((0..n).map(|i| (self.set.points[i * dim + j], self.set.seqs[i])));
            keys.sort_unstable_by(|a, b| key_cmp(*a, *b));
            let lo = keys[a_star - 1];
            let hi = keys[n - a_star];
            let lo_ok = self.low_discard[j].is_none_or(|d| key_cmp(lo, d) == Ordering::Less);
            let hi_ok = self.high_discard[j].is_none_or(|d| key_cmp(hi, d) == Ordering::Greater);
            if !(lo_ok && hi_ok) {
                return Err(Error::OnlineNotCertified {
                    dim: j,
                    margin: self.options.depth_margin,
                });
            }
            lower.push(lo.0);
            upper.push(hi.0);
        }

        let j_star = m + 1 - a_star;
        let t_hat = 2.0 * a_star as f64 / (m as f64 + 1.0);
        let rect = QuantileRectangle::new(lower, upper, t_hat, self.alpha, Method::OnlineBghm)?;
        // Everything discarded lies inside the rectangle in every coordinate.
        let outside = (0..n).filter(|&i| !rect.contains(self.set.point(i))).count();
        let fit = BghmFit {
            m,
            k: self.k,
            j_star,
            t_hat,
            contained: m - outside,
        };

        if let Some(all) = self.everything.take() {
            let (batch_rect, batch_fit) = bghm_rectangle(&all, self.k)?;
            self.stats.batch_match = Some(
                batch_rect.lower() == rect.lower()
                    && batch_rect.upper() == rect.upper()
                    && batch_fit == fit,
            );
        }
        Ok((rect, fit, self.stats))
    }
}

/// Runs [`OnlineBghm`] over `batches` with default options.
pub fn online_bghm<I>(batches: I, alpha: f64, total_m: usize) -> Result<(QuantileRectangle, BghmFit)>
where
    I: IntoIterator<Item = SampleBlock>,
{
    let mut iter = batches.into_iter().peekable();
    let dim = match iter.peek() {
        Some(b) => b.dim(),
        None => {
            return Err(Error::StreamExhausted {
                expected: total_m,
                got: 0,
            })
        }
    };
    let mut online = OnlineBghm::new(dim, alpha, total_m, OnlineOptions::default())?;
    for b in iter {
        online.push_batch(&b)?;
    }
    online.finish().map(|(r, f, _)| (r, f))
}
