// SPDX-License-Identifier: Apache-2.0

//! Synthetic ground truths and the replication engine for support-recovery
//! and interval-length studies.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, pair_count, SymMatrix};
use crate::posterior::{default_prior, posterior_update, TimeseriesMatrix};
use crate::rectangles::{
    bghm_for_alpha, default_grid, sliced_quantile_grid, special_rectangle,
    special_rectangle_from_samples, Method, QuantileRectangle, SlicedGridConfig, SpecialKind,
};
use crate::comparison::mean_length;
use crate::sampling::{substream, CorrelationSampler, GaussianSampler, VectorSampler};
use crate::support::{corr_test_pvalues, mt_adjust, support_from_rectangle, MtMethod, SupportMethod};

/// Smallest eigenvalue accepted for a generated ground truth.
pub const MIN_EIGENVALUE: f64 = 0.05;

const MAX_ATTEMPTS: usize = 200;

/// Within-block one-factor loadings are drawn uniformly from this range.
const LOADING_RANGE: (f64, f64) = (0.45, 0.8);

/// `ρ` off the diagonal, 1 on it.
pub fn make_equicorrelation(dim: usize, rho: f64) -> Result<SymMatrix> {
    let lo = if dim > 1 { -1.0 / (dim as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho > lo && rho < 1.0) {
        return Err(Error::OutOfRange {
            what: "rho",
            value: rho,
            range: format!("({lo}, 1)"),
        });
    }
    let mut m = SymMatrix::identity(dim);
    for i in 0..dim {
        for j in i + 1..dim {
            m.set(i, j, rho);
        }
    }
    Ok(m)
}

/// Correlation vectors of `IW_p(Σ(ρ), dof)`.
pub fn equicorrelation_posterior(p: usize, rho: f64, dof: f64) -> Result<CorrelationSampler> {
    CorrelationSampler::new(&make_equicorrelation(p, rho)?, dof)
}

/// A sparse positive-definite correlation matrix and its edge set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sigma0: SymMatrix,
    /// 0-based pairs `(i, j)`, `i < j`, with non-zero correlation.
    pub support: BTreeSet<(usize, usize)>,
    /// `|support| / (p(p-1)/2)`.
    pub density: f64,
}

impl GroundTruth {
    pub fn p(&self) -> usize {
        self.sigma0.dim()
    }
}

/// Block sizes whose pair counts add up to about `edges`, using at most `p`
/// nodes.
fn block_sizes<R: Rng>(p: usize, edges: usize, rng: &mut R) -> Vec<usize> {
    let mut sizes = Vec::new();
    let (mut left, mut nodes) = (edges, p);
    while left > 0 && nodes >= 2 {
        let mut s = 2;
        while s < nodes && pair_count(s + 1) <= left {
            s += 1;
        }
        // Occasionally step one size down so block layouts vary by seed.
        if s > 2 && rng.random_bool(0.3) {
            s -= 1;
        }
        sizes.push(s);
        left = left.saturating_sub(pair_count(s));
        nodes -= s;
    }
    sizes
}

/// Block-diagonal correlation matrix at roughly `target_density`, nodes in
/// random order.
///
/// Each block follows a one-factor model with positive loadings, so every
/// within-block correlation is non-zero and the matrix is positive definite
/// with smallest eigenvalue at least `1 - max loading²`.
pub fn make_sparse_pd(p: usize, target_density: f64, seed: u64) -> Result<GroundTruth> {
    if !(target_density > 0.0 && target_density < 1.0) {
        return Err(Error::OutOfRange {
            what: "target density",
            value: target_density,
            range: "(0, 1)".into(),
        });
    }
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    let total = pair_count(p);
    let edges = ((target_density * total as f64).round() as usize).max(1);
    let mut rng = substream(seed, 0);
    for _ in 0..MAX_ATTEMPTS {
        let sizes = block_sizes(p, edges, &mut rng);
        let mut nodes: Vec<usize> = (0..p).collect();
        nodes.shuffle(&mut rng);

        let mut sigma = SymMatrix::identity(p);
        let mut support = BTreeSet::new();
        let mut next = 0;
        for &s in &sizes {
            let block = &nodes[next..next + s];
            next += s;
            let loadings: Vec<f64> = (0..s)
                .map(|_| rng.random_range(LOADING_RANGE.0..LOADING_RANGE.1))
                .collect();
            for a in 0..s {
                for b in a + 1..s {
                    let (i, j) = (block[a].min(block[b]), block[a].max(block[b]));
                    sigma.set(i, j, loadings[a] * loadings[b]);
                    support.insert((i, j));
                }
            }
        }
        let density = support.len() as f64 / total as f64;
        // Targets below one pair are met by the closest achievable count.
        let close = (density - target_density).abs() <= 0.2 * target_density
            || (edges == 1 && support.len() == 1);
        if close && cholesky(&sigma.shift_diagonal(-MIN_EIGENVALUE)).is_ok() {
            return Ok(GroundTruth {
                sigma0: sigma,
                support,
                density,
            });
        }
    }
    Err(Error::ConstructionFailed {
        attempts: MAX_ATTEMPTS,
    })
}

/// How the optimal rectangle is estimated inside the harness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimalEstimator {
    /// All draws resident; Bonferroni from the same block.
    Bghm { samples: usize },
    /// Sliced grid; `samples = None` means `⌈20 d / α⌉`. Bonferroni is the
    /// lowest grid level of the same Stage 1 pass.
    Sliced {
        samples: Option<usize>,
        validation_samples: usize,
        grid_size: usize,
    },
}

impl Default for OptimalEstimator {
    fn default() -> Self {
        OptimalEstimator::Sliced {
            samples: None,
            validation_samples: 20_000,
            grid_size: 16,
        }
    }
}

/// `⌈20 d / α⌉`: ten draws in each tail at the Bonferroni level.
pub fn desk_samples(alpha: f64, d: usize) -> usize {
    (20.0 * d as f64 / alpha - 1e-9).ceil() as usize
}

/// Optimal and Bonferroni rectangles for one posterior.
///
/// The second value is `true` when no grid level passed validation and the
/// Bonferroni rectangle stands in for the optimal one.
pub fn bayes_rectangles<S: VectorSampler>(
    sampler: &S,
    alpha: f64,
    estimator: OptimalEstimator,
    seed: u64,
) -> Result<(QuantileRectangle, QuantileRectangle, bool)> {
    let d = sampler.dim();
    match estimator {
        OptimalEstimator::Bghm { samples } => {
            let block = sampler.draw_block(&mut substream(seed, 0), samples);
            let (opt, _) = bghm_for_alpha(&block, alpha)?;
            let bonf = special_rectangle_from_samples(&block, alpha, SpecialKind::Bonferroni)?;
            Ok((opt, bonf, false))
        }
        OptimalEstimator::Sliced {
            samples,
            validation_samples,
            grid_size,
        } => {
            let samples = samples.unwrap_or_else(|| desk_samples(alpha, d));
            let cfg = SlicedGridConfig {
                grid: default_grid(alpha, d, grid_size),
                samples,
                validation_samples,
                memory_budget_bytes: 1 << 30,
            };
            match sliced_quantile_grid(sampler, alpha, &cfg, seed) {
                Ok(res) => {
                    let bonf = res.quantiles.rectangle(0, alpha, Method::Bonferroni)?;
                    Ok((res.rectangle, bonf, false))
                }
                Err(Error::NoFeasibleLevel { .. }) => {
                    let bonf =
                        special_rectangle(sampler, alpha, SpecialKind::Bonferroni, samples, seed)?;
                    Ok((bonf.clone(), bonf, true))
                }
                Err(e) => Err(e),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<SupportMethod>,
    pub estimator: OptimalEstimator,
}

impl BenchmarkConfig {
    pub fn new(n: usize, reps: usize, seed: u64) -> Self {
        Self {
            n,
            alpha: 0.05,
            reps,
            seed,
            methods: SupportMethod::ALL.to_vec(),
            estimator: OptimalEstimator::default(),
        }
    }
}

/// One (method, density, n) cell; accuracy and FWER in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: SupportMethod,
    pub density: f64,
    pub n: usize,
    pub acc_mean: f64,
    pub acc_sd: f64,
    pub fwer_hat: f64,
    pub reps: usize,
    /// Replication `r` used substream `r` of this seed.
    pub seed: u64,
    /// Replications where the optimal rectangle fell back to Bonferroni.
    pub fallbacks: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub rows: Vec<ReportRow>,
}

impl SimulationReport {
    pub fn row(&self, method: SupportMethod) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn extend(&mut self, other: SimulationReport) {
        self.rows.extend(other.rows);
    }
}

/// Per-method `(accuracy %, any false positive)` for one replication.
fn replicate(gt: &GroundTruth, cfg: &BenchmarkConfig, rep: usize) -> Result<(Vec<(f64, bool)>, bool)> {
    let mut rng = substream(cfg.seed, rep as u64);
    let x = GaussianSampler::centered(&gt.sigma0)?.draw_block(&mut rng, cfg.n);
    let x = TimeseriesMatrix::from_block(&x);
    let post_seed = rng.next_u64();

    let needs_bayes = cfg
        .methods
        .iter()
        .any(|m| matches!(m, SupportMethod::BayesOptimal | SupportMethod::BayesBonferroni));
    let (bayes, fallback) = if needs_bayes {
        let post = posterior_update(&default_prior(&x)?, &x)?;
        let (opt, bonf, fb) = bayes_rectangles(&post.sampler()?, cfg.alpha, cfg.estimator, post_seed)?;
        (Some((opt, bonf)), fb)
    } else {
        (None, false)
    };
    let pvalues = if cfg
        .methods
        .iter()
        .any(|m| matches!(m, SupportMethod::MtBonferroni | SupportMethod::MtHolm))
    {
        Some(corr_test_pvalues(&x)?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let est = match m {
            SupportMethod::BayesOptimal => support_from_rectangle(&bayes.as_ref().unwrap().0)?,
            SupportMethod::BayesBonferroni => support_from_rectangle(&bayes.as_ref().unwrap().1)?,
            SupportMethod::MtBonferroni => {
                mt_adjust(pvalues.as_ref().unwrap(), cfg.alpha, MtMethod::Bonferroni)?
            }
            SupportMethod::MtHolm => mt_adjust(pvalues.as_ref().unwrap(), cfg.alpha, MtMethod::Holm)?,
        };
        out.push((est.accuracy(&gt.support), est.false_positives(&gt.support) > 0));
    }
    Ok((out, fallback))
}

/// Replicates data generation and support estimation `cfg.reps` times.
///
/// Replications run in parallel, each on its own substream; results are
/// reduced in replication order, so the report depends only on the inputs.
pub fn run_support_benchmark(gt: &GroundTruth, cfg: &BenchmarkConfig) -> Result<SimulationReport> {
    if cfg.reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: cfg.alpha,
            range: "(0, 1)".into(),
        });
    }
    let results: Vec<(Vec<(f64, bool)>, bool)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| replicate(gt, cfg, r))
        .collect::<Result<_>>()?;
    let fallbacks = results.iter().filter(|(_, fb)| *fb).count();

    let s = cfg.reps as f64;
    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let accs: Vec<f64> = results.iter().map(|(v, _)| v[mi].0).collect();
            let mean = accs.iter().sum::<f64>() / s;
            let var = if cfg.reps > 1 {
                accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (s - 1.0)
            } else {
                0.0
            };
            let fp = results.iter().filter(|(v, _)| v[mi].1).count();
            ReportRow {
                method,
                density: gt.density,
                n: cfg.n,
                acc_mean: mean,
                acc_sd: var.sqrt(),
                fwer_hat: 100.0 * fp as f64 / s,
                reps: cfg.reps,
                seed: cfg.seed,
                fallbacks: if matches!(method, SupportMethod::BayesOptimal) { fallbacks } else { 0 },
            }
        })
        .collect();
    Ok(SimulationReport { rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Mean interval length averaged over replications.
    pub m_l: f64,
}

/// Mean length of the optimal rectangle of `IW_p(Σ(ρ), p + 2 + n)` over a
/// grid of `(n, p, ρ)`, cells ordered by `n`, then `p`, then `ρ`.
pub fn uncertainty_grid(
    n_values: &[usize],
    p_values: &[usize],
    rho_values: &[f64],
    alpha: f64,
    reps: usize,
    seed: u64,
    estimator: OptimalEstimator,
) -> Result<Vec<GridCell>> {
    if n_values.is_empty() || p_values.is_empty() || rho_values.is_empty() || reps == 0 {
        return Err(Error::InvalidArgument(
            "grid lists and replication count must be non-empty".into(),
        ));
    }
    let mut cells = Vec::new();
    for &n in n_values {
        for &p in p_values {
            for &rho in rho_values {
                cells.push((n, p, rho));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let lengths: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (n, p, rho) = cells[c];
            let sampler = equicorrelation_posterior(p, rho, (p + 2 + n) as f64)?;
            let job_seed = substream(seed, (c * reps + r) as u64).next_u64();
            let opt = match estimator {
                // Only the optimal box is needed here, and the Bonferroni
                // companion would demand far more draws.
                OptimalEstimator::Bghm { samples } => {
                    let block = sampler.draw_block(&mut substream(job_seed, 0), samples);
                    bghm_for_alpha(&block, alpha)?.0
                }
                _ => bayes_rectangles(&sampler, alpha, estimator, job_seed)?.0,
            };
            Ok(mean_length(&opt))
        })
        .collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(n, p, rho))| GridCell {
            n,
            p,
            rho,
            m_l: lengths[c * reps..(c + 1) * reps].iter().sum::<f64>() / reps as f64,
        })
        .collect())
}

/// CSV with header `method,density,n,acc_mean,acc_sd,fwer_hat,S`.
pub fn write_report_csv<W: Write>(report: &SimulationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "density", "n", "acc_mean", "acc_sd", "fwer_hat", "S"])
        .map_err(csv_io)?;
    for r in &report.rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.density.to_string(),
            r.n.to_string(),
            r.acc_mean.to_string(),
            r.acc_sd.to_string(),
            r.fwer_hat.to_string(),
            r.reps.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with header `n,p,rho,m_l`.
pub fn write_grid_csv<W: Write>(cells: &[GridCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "p", "rho", "m_l"]).map_err(csv_io)?;
    for c in cells {
        w.write_record([
            c.n.to_string(),
            c.p.to_string(),
            c.rho.to_string(),
            c.m_l.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equicorrelation() {
        assert_eq!(make_equicorrelation(4, 0.0).unwrap(), SymMatrix::identity(4));
        let m = make_equicorrelation(3, 0.7).unwrap();
        // Smallest eigenvalue 1 - ρ = 0.3: shifting by slightly less keeps it PD.
        assert!(cholesky(&m.shift_diagonal(-0.299)).is_ok());
        assert!(cholesky(&m.shift_diagonal(-0.301)).is_err());
        assert!(matches!(
            make_equicorrelation(3, -0.6),
            Err(Error::OutOfRange { .. })
        ));
        assert!(make_equicorrelation(3, 1.0).is_err());
    }

    #[test]
    fn sparse_truth_densities() {
        for (target, seed) in [(0.024, 1), (0.24, 2), (0.48, 3)] {
            let gt = make_sparse_pd(20, target, seed).unwrap();
            assert!((gt.density - target).abs() <= 0.2 * target, "{}", gt.density);
            assert!(cholesky(&gt.sigma0.shift_diagonal(-MIN_EIGENVALUE)).is_ok());
            for i in 0..20 {
                assert_eq!(gt.sigma0.get(i, i), 1.0);
                for j in i + 1..20 {
                    assert_eq!(gt.sigma0.get(i, j) != 0.0, gt.support.contains(&(i, j)));
                }
            }
        }
    }

    #[test]
    fn sparse_truth_is_seeded() {
        assert_eq!(make_sparse_pd(20, 0.24, 9).unwrap(), make_sparse_pd(20, 0.24, 9).unwrap());
        assert_ne!(make_sparse_pd(20, 0.24, 9).unwrap(), make_sparse_pd(20, 0.24, 10).unwrap());
    }

    #[test]
    fn tiny_density_is_one_pair() {
        let gt = make_sparse_pd(30, 1e-4, 0).unwrap();
        assert_eq!(gt.support.len(), 1);
    }

    #[test]
    fn block_sizes_fit() {
        let mut rng = substream(0, 0);
        for edges in [1, 5, 46, 91] {
            let s = block_sizes(20, edges, &mut rng);
            assert!(s.iter().sum::<usize>() <= 20);
            assert!(s.iter().all(|&b| b >= 2));
        }
    }

    #[test]
    fn benchmark_is_deterministic() {
        let gt = make_sparse_pd(6, 0.2, 4).unwrap();
        let mut cfg = BenchmarkConfig::new(60, 6, 11);
        cfg.estimator = OptimalEstimator::Sliced {
            samples: None,
            validation_samples: 5_000,
            grid_size: 8,
        };
        let a = run_support_benchmark(&gt, &cfg).unwrap();
        let b = run_support_benchmark(&gt, &cfg).unwrap();
        assert_eq!(a, b);
        for r in &a.rows {
            assert!((0.0..=100.0).contains(&r.acc_mean));
            assert!((0.0..=100.0).contains(&r.fwer_hat));
        }
        let mut csv = Vec::new();
        write_report_csv(&a, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("method,density,n,acc_mean,acc_sd,fwer_hat,S\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn tiny_grid_cell() {
        let cells = uncertainty_grid(
            &[50],
            &[3],
            &[0.0],
            0.05,
            1,
            0,
            OptimalEstimator::Bghm { samples: 4000 },
        )
        .unwrap();
        assert_eq!(cells.len(), 1);
        assert!(cells[0].m_l > 0.0 && cells[0].m_l < 2.0);
        let mut out = Vec::new();
        write_grid_csv(&cells, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("n,p,rho,m_l\n"));
    }
}
