// SPDX-License-Identifier: Apache-2.0

//! Order-statistic rectangle of Besag, Green, Higdon and Mengersen.
//!
//! Every sample gets the score `S = max(M + 1 - min_i r_i, max_i r_i)` from
//! its coordinate ranks. With `j*` the `k`-th smallest score, the rectangle
//! spans the `(M+1-j*)`-th to the `j*`-th order statistic in every
//! coordinate; it holds at least `k` samples and is the smallest rectangle of
//! that symmetric order-statistic family that does.

use super::{Method, QuantileRectangle};
use crate::error::{Error, Result};
use crate::sampling::SampleBlock;

/// Outcome of one BGHM construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BghmFit {
    pub m: usize,
    pub k: usize,
    /// k-th smallest score.
    pub j_star: usize,
    /// `2(M + 1 - j*) / (M + 1)`.
    pub t_hat: f64,
    /// Samples inside the returned rectangle.
    pub contained: usize,
}

/// Ranks (1-based) of every sample along each coordinate, ties broken by
/// sample order. Row-major `M × d`.
fn ranks(block: &SampleBlock) -> Vec<u32> {
    let (m, d) = (block.len(), block.dim());
    let mut out = vec![0u32; m * d];
    let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(m);
    for j in 0..d {
        keyed.clear();
        keyed.extend(block.rows().enumerate().map(|(i, r)| (r[j], i as u32)));
        // The index tie-break keeps first-seen order among equal values.
        keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (rank, &(_, i)) in keyed.iter().enumerate() {
            out[i as usize * d + j] = rank as u32 + 1;
        }
    }
    out
}

/// Score `S` of every sample in the block.
pub fn scores(block: &SampleBlock) -> Vec<usize> {
    let (m, d) = (block.len(), block.dim());
    let r = ranks(block);
    r.chunks_exact(d.max(1))
        .take(m)
        .map(|row| {
            let lo = *row.iter().min().unwrap() as usize;
            let hi = *row.iter().max().unwrap() as usize;
            (m + 1 - lo).max(hi)
        })
        .collect()
}

/// `M + 1 - S`: how close a sample sits to the edge of the cloud (1 for a
/// coordinate-wise minimum or maximum).
pub fn depths(block: &SampleBlock) -> Vec<usize> {
    let m = block.len();
    scores(block).into_iter().map(|s| m + 1 - s).collect()
}

/// Score of one sample within its block.
pub fn score_s(point_index: usize, block: &SampleBlock) -> usize {
    scores(block)[point_index]
}

/// Depths of the samples that lie within `c` of either end of some
/// coordinate; every other sample is deeper than `c` and gets `u32::MAX`.
/// Only the two tails of each coordinate are sorted.
fn shallow_depths(block: &SampleBlock, c: usize) -> Vec<u32> {
    let m = block.len();
    let c = c.min(m);
    let mut depth = vec![u32::MAX; m];
    let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(m);
    let by_rank = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    for j in 0..block.dim() {
        keyed.clear();
        keyed.extend(block.rows().enumerate().map(|(i, r)| (r[j], i as u32)));
        if c < m {
            keyed.select_nth_unstable_by(c - 1, by_rank);
        }
        let bottom = &mut keyed[..c];
        bottom.sort_unstable_by(by_rank);
        for (pos, &(_, i)) in bottom.iter().enumerate() {
            let e = &mut depth[i as usize];
            *e = (*e).min(pos as u32 + 1);
        }
        let top_start = m - c;
        if top_start > 0 {
            keyed.select_nth_unstable_by(top_start, by_rank);
        }
        let top = &mut keyed[top_start..];
        top.sort_unstable_by(by_rank);
        for (off, &(_, i)) in top.iter().enumerate() {
            let e = &mut depth[i as usize];
            *e = (*e).min((c - off) as u32);
        }
    }
    depth
}

pub fn bghm_rectangle(samples: &SampleBlock, k: usize) -> Result<(QuantileRectangle, BghmFit)> {
    let m = samples.len();
    if k == 0 || k > m {
        return Err(Error::KOutOfRange { k, m });
    }
    // The k-th smallest score is M + 1 minus the T-th smallest depth with
    // T = M - k + 1, and at least T samples have depth at most T.
    let t = m - k + 1;
    let mut shallow = shallow_depths(samples, t);
    let (_, &mut a_star, _) = shallow.select_nth_unstable(t - 1);
    let j_star = m + 1 - a_star as usize;
    let tail = m + 1 - j_star;

    let d = samples.dim();
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut column = Vec::with_capacity(m);
    for j in 0..d {
        column.clear();
        column.extend(samples.rows().map(|r| r[j]));
        let (_, &mut hi, _) = column.select_nth_unstable_by(j_star - 1, f64::total_cmp);
        let (_, &mut lo, _) = column.select_nth_unstable_by(tail - 1, f64::total_cmp);
        lower.push(lo);
        upper.push(hi);
    }
    let t_hat = 2.0 * tail as f64 / (m as f64 + 1.0);
    let alpha = 1.0 - k as f64 / m as f64;
    let rect = QuantileRectangle::new(lower, upper, t_hat, alpha, Method::Bghm)?;
    let contained = samples.rows().filter(|r| rect.contains(r)).count();
    Ok((
        rect,
        BghmFit {
            m,
            k,
            j_star,
            t_hat,
            contained,
        },
    ))
}

/// BGHM with `k = ⌈(1 - α) M⌉`.
pub fn bghm_for_alpha(samples: &SampleBlock, alpha: f64) -> Result<(QuantileRectangle, BghmFit)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            range: "(0, 1)".into(),
        });
    }
    let k = required_inside(alpha, samples.len());
    let (rect, fit) = bghm_rectangle(samples, k)?;
    let rect = QuantileRectangle::new(
        rect.lower().to_vec(),
        rect.upper().to_vec(),
        fit.t_hat,
        alpha,
        Method::Bghm,
    )?;
    Ok((rect, fit))
}

/// `⌈(1 - α) M⌉`, computed so that exact products are not pushed up by
/// rounding.
pub(crate) fn required_inside(alpha: f64, m: usize) -> usize {
    (((1.0 - alpha) * m as f64) - 1e-9).ceil().max(1.0) as usize
}
