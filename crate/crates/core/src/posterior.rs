// SPDX-License-Identifier: Apache-2.0

//! Conjugate inverse-Wishart model for zero-mean Gaussian data.
//!
//! With `X_i | Σ ~ N_p(0, Σ)` and `Σ ~ IW(Φ, ν)` the posterior is
//! `IW(Φ + XᵀX, ν + n)`. The quantity of interest is the correlation matrix
//! `C = D^{-1/2} Σ D^{-1/2}`, reached by pushing posterior draws of Σ through
//! the correlation transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, pair_count, SymMatrix};
use crate::sampling::{CorrelationSampler, SampleBlock, SimRng, VectorSampler};

/// Column variance below which a variable is rejected as constant.
pub const MIN_COLUMN_VARIANCE: f64 = 1e-12;

/// `n × p` data matrix, rows are observations.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeseriesMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl TimeseriesMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: data.len(),
            });
        }
        Ok(Self {
            n,
            p,
            data,
            labels: None,
        })
    }

    pub fn from_block(block: &SampleBlock) -> Self {
        Self {
            n: block.len(),
            p: block.dim(),
            data: block.as_slice().to_vec(),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.data[i * self.p + j])
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.p {
            data.extend(self.column(j));
        }
        Self {
            n: self.p,
            p: self.n,
            data,
            labels: None,
        }
    }

    /// Subtracts each column's mean.
    pub fn centered(&self) -> Self {
        let means = self.column_means();
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.p) {
            for (v, m) in row.iter_mut().zip(&means) {
                *v -= m;
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| self.column(j).sum::<f64>() / self.n as f64)
            .collect()
    }

    /// Unbiased per-column variances (denominator `n - 1`).
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        (0..self.p)
            .map(|j| {
                let m = means[j];
                self.column(j).map(|v| (v - m) * (v - m)).sum::<f64>() / (self.n as f64 - 1.0)
            })
            .collect()
    }

    /// `XᵀX` without centering.
    pub fn cross_product(&self) -> SymMatrix {
        let p = self.p;
        let mut acc = vec![0.0; p * p];
        for row in self.data.chunks_exact(p) {
            for i in 0..p {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                let dst = &mut acc[i * p + i..(i + 1) * p];
                for (a, xj) in dst.iter_mut().zip(&row[i..]) {
                    *a += xi * xj;
                }
            }
        }
        SymMatrix::from_upper_unchecked(p, acc)
    }

    /// Stacks `other` below `self`.
    pub fn stack(&self, other: &TimeseriesMatrix) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: other.p,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            n: self.n + other.n,
            p: self.p,
            data,
            labels: self.labels.clone(),
        })
    }
}

/// Inverse-Wishart prior `IW(scale, dof)` on Σ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub scale: SymMatrix,
    pub dof: f64,
}

impl PriorSpec {
    /// Requires a positive-definite scale and `dof > p + 1` so that the prior
    /// mean `scale / (dof - p - 1)` exists.
    pub fn new(scale: SymMatrix, dof: f64) -> Result<Self> {
        validate(&scale, dof)?;
        Ok(Self { scale, dof })
    }

    pub fn p(&self) -> usize {
        self.scale.dim()
    }
}

/// Weakly informative default: `ν = p + 2` and `Φ` the diagonal of empirical
/// column variances, so that `E[Σ] = Φ` and `E[C] = I`.
pub fn default_prior(x: &TimeseriesMatrix) -> Result<PriorSpec> {
    if x.n() < 2 {
        return Err(Error::InvalidArgument(format!(
            "default prior needs at least 2 observations, got {}",
            x.n()
        )));
    }
    let variances = x.column_variances();
    if let Some(column) = variances.iter().position(|v| !(*v >= MIN_COLUMN_VARIANCE)) {
        return Err(Error::DegenerateColumn { column });
    }
    PriorSpec::new(SymMatrix::from_diagonal(&variances), x.p() as f64 + 2.0)
}

/// Posterior `IW(Φ + XᵀX, ν + n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSpec {
    pub scale: SymMatrix,
    pub dof: f64,
    /// Observations absorbed so far.
    pub n: usize,
    pub p: usize,
}

impl PosteriorSpec {
    /// A posterior given directly by its parameters, e.g. a reference group
    /// summarized by a scale matrix. The scale is used verbatim.
    pub fn new(scale: SymMatrix, dof: f64, n: usize) -> Result<Self> {
        validate(&scale, dof)?;
        let p = scale.dim();
        Ok(Self { scale, dof, n, p })
    }

    /// Number of correlation coordinates, `p(p-1)/2`.
    pub fn d(&self) -> usize {
        pair_count(self.p)
    }

    /// Absorbs more observations.
    pub fn update(&self, x: &TimeseriesMatrix) -> Result<Self> {
        if x.p() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.p(),
            });
        }
        Ok(Self {
            scale: self.scale.add(&x.cross_product())?,
            dof: self.dof + x.n() as f64,
            n: self.n + x.n(),
            p: self.p,
        })
    }

    pub fn sampler(&self) -> Result<CorrelationSampler> {
        CorrelationSampler::new(&self.scale, self.dof)
    }
}

impl From<PriorSpec> for PosteriorSpec {
    fn from(prior: PriorSpec) -> Self {
        let p = prior.p();
        Self {
            scale: prior.scale,
            dof: prior.dof,
            n: 0,
            p,
        }
    }
}

pub fn posterior_update(prior: &PriorSpec, x: &TimeseriesMatrix) -> Result<PosteriorSpec> {
    PosteriorSpec::from(prior.clone()).update(x)
}

fn validate(scale: &SymMatrix, dof: f64) -> Result<()> {
    let min = scale.dim() as f64 + 1.0;
    if !(dof > min) {
        return Err(Error::InvalidDof { dof, min });
    }
    cholesky(scale)?;
    Ok(())
}

/// Lazily generated batches of posterior correlation vectors.
///
/// Each batch is produced on demand and handed to the caller; nothing is
/// kept after it is yielded.
pub struct CorrBatches {
    sampler: CorrelationSampler,
    rng: SimRng,
    batch_size: usize,
    remaining: usize,
}

impl CorrBatches {
    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    /// Draws still to come.
    pub fn remaining_draws(&self) -> usize {
        self.remaining * self.batch_size
    }
}

impl Iterator for CorrBatches {
    type Item = SampleBlock;

    fn next(&mut self) -> Option<SampleBlock> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.sampler.draw_block(&mut self.rng, self.batch_size))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for CorrBatches {}

pub fn sample_corr_batches(
    post: &PosteriorSpec,
    batch_size: usize,
    n_batches: usize,
    rng: SimRng,
) -> Result<CorrBatches> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    Ok(CorrBatches {
        sampler: post.sampler()?,
        rng,
        batch_size,
        remaining: n_batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::substream;

    fn matrix(rows: &[&[f64]]) -> TimeseriesMatrix {
        let p = rows[0].len();
        TimeseriesMatrix::new(rows.len(), p, rows.iter().flat_map(|r| r.to_vec()).collect())
            .unwrap()
    }

    #[test]
    fn default_prior_unit_variances() {
        let x = matrix(&[&[1.0, -1.0, 1.0], &[-1.0, 1.0, -1.0], &[0.0, 0.0, 0.0]]);
        let prior = default_prior(&x).unwrap();
        assert_eq!(prior.scale, SymMatrix::identity(3));
        assert_eq!(prior.dof, 5.0);
    }

    #[test]
    fn default_prior_variances() {
        // Column variances 2 and 3 with n - 1 denominator.
        let s2 = 2.0_f64.sqrt();
        let s3 = 3.0_f64.sqrt();
        let x = matrix(&[&[s2, s3], &[-s2, -s3], &[0.0, 0.0]]);
        let prior = default_prior(&x).unwrap();
        assert!((prior.scale.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((prior.scale.get(1, 1) - 3.0).abs() < 1e-12);
        assert_eq!(prior.scale.get(0, 1), 0.0);
        assert_eq!(prior.dof, 4.0);
    }

    #[test]
    fn default_prior_rejects_constant_column() {
        let x = matrix(&[&[1.0, 5.0], &[2.0, 5.0], &[3.0, 5.0]]);
        assert!(matches!(
            default_prior(&x),
            Err(Error::DegenerateColumn { column: 1 })
        ));
    }

    #[test]
    fn update_with_no_data_is_identity() {
        let prior = PriorSpec::new(SymMatrix::identity(2), 4.0).unwrap();
        let x = TimeseriesMatrix::new(0, 2, vec![]).unwrap();
        let post = posterior_update(&prior, &x).unwrap();
        assert_eq!(post.scale, prior.scale);
        assert_eq!(post.dof, prior.dof);
        assert_eq!(post.n, 0);
    }

    #[test]
    fn update_single_observation() {
        let prior = PriorSpec::new(SymMatrix::identity(2), 4.0).unwrap();
        let post = posterior_update(&prior, &matrix(&[&[1.0, 0.0]])).unwrap();
        assert_eq!(post.scale.to_rows(), vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(post.dof, 5.0);
    }

    #[test]
    fn sequential_update_equals_stacked_update() {
        let g = crate::sampling::GaussianSampler::standard(3);
        let a = TimeseriesMatrix::from_block(&g.draw_block(&mut substream(1, 0), 17));
        let b = TimeseriesMatrix::from_block(&g.draw_block(&mut substream(1, 1), 23));
        let prior = PriorSpec::new(SymMatrix::identity(3), 5.0).unwrap();
        let seq = posterior_update(&prior, &a).unwrap().update(&b).unwrap();
        let once = posterior_update(&prior, &a.stack(&b).unwrap()).unwrap();
        assert_eq!(seq.dof, once.dof);
        assert_eq!(seq.n, 40);
        for (x, y) in seq.scale.as_slice().iter().zip(once.scale.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn update_dimension_mismatch() {
        let prior = PriorSpec::new(SymMatrix::identity(2), 4.0).unwrap();
        assert!(posterior_update(&prior, &matrix(&[&[1.0, 0.0, 0.0]])).is_err());
    }

    #[test]
    fn prior_requires_finite_mean() {
        assert!(matches!(
            PriorSpec::new(SymMatrix::identity(3), 4.0),
            Err(Error::InvalidDof { .. })
        ));
    }

    #[test]
    fn batch_stream_counts_and_determinism() {
        let post = PosteriorSpec::new(SymMatrix::identity(4), 20.0, 0).unwrap();
        let batches: Vec<_> = sample_corr_batches(&post, 100, 5, substream(4, 0))
            .unwrap()
            .collect();
        assert_eq!(batches.len(), 5);
        assert!(batches.iter().all(|b| b.len() == 100 && b.dim() == 6));
        let again: Vec<_> = sample_corr_batches(&post, 100, 5, substream(4, 0))
            .unwrap()
            .collect();
        assert_eq!(batches, again);
        assert!(sample_corr_batches(&post, 0, 5, substream(4, 0)).is_err());
    }

    #[test]
    fn diagonal_scale_centers_correlation_at_zero() {
        let post = PosteriorSpec::new(SymMatrix::identity(2).scaled(500.0), 500.0, 0).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for batch in sample_corr_batches(&post, 1000, 20, substream(9, 0)).unwrap() {
            for row in batch.rows() {
                sum += row[0];
                count += 1;
            }
        }
        assert!((sum / count as f64).abs() < 0.01);
    }
}
