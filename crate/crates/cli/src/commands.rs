// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use credrect_core::io::{
    load_timeseries_csv, read_json, read_rectangle, to_json_string, write_diff_edges,
    write_support_edges, DiffSummary, PosteriorDocument, Provenance, RectangleDocument,
    SupportSummary, FORMAT_VERSION,
};
use credrect_core::linalg::dim_from_pair_count;
use credrect_core::rectangles::{
    bghm_for_alpha, default_grid, default_samples, online_bghm, sliced_quantile_grid,
    special_rectangle, SlicedGridConfig, SpecialKind,
};
use credrect_core::sampling::{substream, VectorSampler, DRAW_BLOCK};
use credrect_core::sim::{
    desk_samples, make_sparse_pd, run_support_benchmark, uncertainty_grid, write_grid_csv,
    write_report_csv, BenchmarkConfig, OptimalEstimator,
};
use credrect_core::support::{corr_test_pvalues, mt_adjust, support_from_rectangle, MtMethod};
use credrect_core::{
    compare_rectangles, default_prior, posterior_update, PosteriorSpec, QuantileRectangle,
    SimulationReport, SupportMethod, TimeseriesMatrix,
};

use crate::{
    Command, CompareArgs, DataArgs, FitArgs, GridArgs, GridMethod, RectMethod, RectangleArgs,
    SamplingArgs, SimulateArgs, SupportArgs, SupportChoice, UsageError,
};

/// Largest `d` handled by batch BGHM under `--method auto`.
const AUTO_BGHM_MAX_D: usize = 50;
/// Largest `d` handled by online BGHM under `--method auto`.
const AUTO_ONLINE_MAX_D: usize = 500;
/// Default draws per replication for `grid --method bghm`.
const GRID_BGHM_SAMPLES: usize = 40_000;

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => fit(cmd, a),
        Command::Rectangle(a) => rectangle(cmd, a),
        Command::Compare(a) => compare(cmd, a),
        Command::Support(a) => support(cmd, a),
        Command::Simulate(a) => simulate(cmd, a),
        Command::Grid(a) => grid(cmd, a),
    }
}

fn load(path: &Path, data: &DataArgs) -> Result<TimeseriesMatrix> {
    let x = load_timeseries_csv(path, data.transpose)?;
    Ok(if data.center { x.centered() } else { x })
}

fn fit_posterior(path: &Path, data: &DataArgs) -> Result<PosteriorSpec> {
    let x = load(path, data)?;
    let post = posterior_update(&default_prior(&x)?, &x)
        .with_context(|| format!("fitting {}", path.display()))?;
    Ok(post)
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Writes to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

fn resolve_method(method: RectMethod, d: usize) -> RectMethod {
    match method {
        RectMethod::Auto if d <= AUTO_BGHM_MAX_D => RectMethod::Bghm,
        RectMethod::Auto if d <= AUTO_ONLINE_MAX_D => RectMethod::OnlineBghm,
        RectMethod::Auto => RectMethod::SlicedGrid,
        m => m,
    }
}

fn build_rectangle(
    post: &PosteriorSpec,
    alpha: f64,
    s: &SamplingArgs,
    seed: u64,
) -> Result<QuantileRectangle> {
    let sampler = post.sampler()?;
    let d = sampler.dim();
    let samples = s.samples.map(|m| m as usize);
    let rect = match resolve_method(s.method, d) {
        RectMethod::Bghm => {
            let m = samples.unwrap_or_else(|| desk_samples(alpha, d));
            let block = sampler.draw_block(&mut substream(seed, 0), m);
            bghm_for_alpha(&block, alpha)?.0
        }
        RectMethod::OnlineBghm => {
            // Same draws as batch BGHM, fed in blocks.
            let m = samples.unwrap_or_else(|| desk_samples(alpha, d));
            let mut rng = substream(seed, 0);
            let mut left = m;
            let batches = std::iter::from_fn(|| {
                (left > 0).then(|| {
                    let size = left.min(DRAW_BLOCK);
                    left -= size;
                    sampler.draw_block(&mut rng, size)
                })
            });
            online_bghm(batches, alpha, m)?.0
        }
        RectMethod::SlicedGrid => {
            let cfg = SlicedGridConfig {
                grid: default_grid(alpha, d, s.grid_size as usize),
                samples: samples.unwrap_or_else(|| default_samples(alpha, d)),
                validation_samples: s.validation_samples as usize,
                memory_budget_bytes: (s.memory_budget_mb as usize).saturating_mul(1 << 20),
            };
            sliced_quantile_grid(&sampler, alpha, &cfg, seed)?.rectangle
        }
        RectMethod::Bonferroni | RectMethod::Naive => {
            let kind = if s.method == RectMethod::Naive {
                SpecialKind::Naive
            } else {
                SpecialKind::Bonferroni
            };
            let m = samples.unwrap_or_else(|| default_samples(alpha, d));
            special_rectangle(&sampler, alpha, kind, m, seed)?
        }
        RectMethod::Auto => unreachable!("resolved above"),
    };
    Ok(rect)
}

fn fit(cmd: &Command, a: &FitArgs) -> Result<()> {
    let doc = PosteriorDocument {
        version: FORMAT_VERSION,
        posterior: fit_posterior(&a.input, &a.data)?,
        provenance: Provenance::new(cmd, a.seed)?,
    };
    emit(a.out.as_deref(), &to_json_string(&doc)?)
}

fn posterior_from(path: &Path, data: &DataArgs) -> Result<PosteriorSpec> {
    if is_json(path) {
        let doc: PosteriorDocument = read_json(path)?;
        Ok(doc.posterior)
    } else {
        fit_posterior(path, data)
    }
}

fn rectangle(cmd: &Command, a: &RectangleArgs) -> Result<()> {
    let post = posterior_from(&a.input, &a.data)?;
    let rect = build_rectangle(&post, a.alpha, &a.sampling, a.seed)?;
    let doc = RectangleDocument::new(&rect, Provenance::new(cmd, a.seed)?)?;
    emit(a.out.as_deref(), &to_json_string(&doc)?)
}

fn compare(cmd: &Command, a: &CompareArgs) -> Result<()> {
    let (ra, rb) = match (is_json(&a.a), is_json(&a.b)) {
        (true, true) => (read_rectangle(&a.a)?.0, read_rectangle(&a.b)?.0),
        (false, false) => {
            let pa = fit_posterior(&a.a, &a.data)?;
            let pb = fit_posterior(&a.b, &a.data)?;
            (
                build_rectangle(&pa, a.alpha, &a.sampling, a.seed)?,
                build_rectangle(&pb, a.alpha, &a.sampling, a.seed)?,
            )
        }
        _ => {
            return Err(UsageError(
                "compare takes two rectangle JSON files or two CSV files, not a mix".into(),
            )
            .into())
        }
    };
    let diff = compare_rectangles(&ra, &rb)?;
    let p = dim_from_pair_count(ra.d()).context("rectangle dimension is not a pair count")?;
    let mut edges = Vec::new();
    write_diff_edges(&mut edges, &diff, p)?;
    emit(a.out.as_deref(), std::str::from_utf8(&edges)?)?;
    if let Some(out) = &a.out {
        let summary = DiffSummary::new(&diff, p, Provenance::new(cmd, a.seed)?);
        emit(Some(&sidecar(out, "summary.json")), &to_json_string(&summary)?)?;
    }
    Ok(())
}

fn support(cmd: &Command, a: &SupportArgs) -> Result<()> {
    let x = load(&a.input, &a.data)?;
    let est = match a.support_method {
        SupportChoice::MtBonferroni | SupportChoice::MtHolm => {
            let mt = if a.support_method == SupportChoice::MtHolm {
                MtMethod::Holm
            } else {
                MtMethod::Bonferroni
            };
            mt_adjust(&corr_test_pvalues(&x)?, a.alpha, mt)?
        }
        SupportChoice::BayesOptimal | SupportChoice::BayesBonferroni => {
            let post = posterior_update(&default_prior(&x)?, &x)?;
            let sampling = SamplingArgs {
                method: if a.support_method == SupportChoice::BayesOptimal {
                    RectMethod::Auto
                } else {
                    RectMethod::Bonferroni
                },
                grid_size: a.grid_size,
                samples: a.samples,
                validation_samples: a.validation_samples,
                memory_budget_mb: a.memory_budget_mb,
            };
            support_from_rectangle(&build_rectangle(&post, a.alpha, &sampling, a.seed)?)?
        }
    };
    let method = match a.support_method {
        SupportChoice::BayesOptimal => SupportMethod::BayesOptimal,
        SupportChoice::BayesBonferroni => SupportMethod::BayesBonferroni,
        SupportChoice::MtBonferroni => SupportMethod::MtBonferroni,
        SupportChoice::MtHolm => SupportMethod::MtHolm,
    };
    let mut edges = Vec::new();
    write_support_edges(&mut edges, &est)?;
    emit(a.out.as_deref(), std::str::from_utf8(&edges)?)?;
    if let Some(out) = &a.out {
        let summary = SupportSummary {
            method,
            alpha: a.alpha,
            n_edges: est.len(),
            p: x.p(),
            provenance: Provenance::new(cmd, a.seed)?,
        };
        emit(Some(&sidecar(out, "summary.json")), &to_json_string(&summary)?)?;
    }
    Ok(())
}

fn write_provenance(cmd: &Command, out: Option<&Path>, seed: u64) -> Result<()> {
    if let Some(out) = out {
        let prov = Provenance::new(cmd, seed)?;
        emit(Some(&sidecar(out, "provenance.json")), &to_json_string(&prov)?)?;
    }
    Ok(())
}

fn simulate(cmd: &Command, a: &SimulateArgs) -> Result<()> {
    let mut report = SimulationReport::default();
    for &density in &a.density {
        let gt = make_sparse_pd(a.p as usize, density, a.seed)?;
        for &n in &a.n {
            let mut cfg = BenchmarkConfig::new(n, a.reps as usize, a.seed);
            cfg.alpha = a.alpha;
            cfg.estimator = OptimalEstimator::Sliced {
                samples: a.samples.map(|m| m as usize),
                validation_samples: a.validation_samples as usize,
                grid_size: a.grid_size as usize,
            };
            report.extend(run_support_benchmark(&gt, &cfg)?);
        }
    }
    let mut csv = Vec::new();
    write_report_csv(&report, &mut csv)?;
    emit(a.out.as_deref(), std::str::from_utf8(&csv)?)?;
    write_provenance(cmd, a.out.as_deref(), a.seed)
}

fn grid(cmd: &Command, a: &GridArgs) -> Result<()> {
    let estimator = match a.method {
        GridMethod::Bghm => OptimalEstimator::Bghm {
            samples: a.samples.map_or(GRID_BGHM_SAMPLES, |m| m as usize),
        },
        GridMethod::SlicedGrid => OptimalEstimator::Sliced {
            samples: a.samples.map(|m| m as usize),
            validation_samples: a.validation_samples as usize,
            grid_size: a.grid_size as usize,
        },
    };
    let cells = uncertainty_grid(&a.n, &a.p, &a.rho, a.alpha, a.reps as usize, a.seed, estimator)?;
    let mut csv = Vec::new();
    write_grid_csv(&cells, &mut csv)?;
    emit(a.out.as_deref(), std::str::from_utf8(&csv)?)?;
    write_provenance(cmd, a.out.as_deref(), a.seed)
}
