// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria. Each test prints one line
//! `criterion N: PASS|FAIL ...` with the measured values and the pinned
//! tolerances, then asserts the same condition. Tests hold a common lock so
//! that the reported runtimes are not inflated by each other.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use credrect_core::comparison::{distance_to_rectangle, local_decisions, Norm};
use credrect_core::posterior::{default_prior, posterior_update, PosteriorSpec, TimeseriesMatrix};
use credrect_core::rectangles::{
    bghm_rectangle, coverage_from_sampler, sliced_quantile_grid, special_rectangle,
    OnlineBghm, OnlineOptions, QuantileRectangle, SlicedGridConfig, SpecialKind,
};
use credrect_core::sampling::{
    fold_draws, substream, CorrelationSampler, GaussianSampler, SampleBlock, VectorSampler,
};
use credrect_core::sim::{
    equicorrelation_posterior, make_equicorrelation, make_sparse_pd, run_support_benchmark,
    uncertainty_grid, BenchmarkConfig, GridCell, OptimalEstimator,
};
use credrect_core::SupportMethod;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

static SERIAL: Mutex<()> = Mutex::new(());

const ALPHA: f64 = 0.05;
const VALIDATION_DRAWS: usize = 100_000;

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: &str, elapsed: Duration, limit_s: f64) -> bool {
    let secs = elapsed.as_secs_f64();
    let timely = secs < limit_s;
    let ok = pass && timely;
    // Straight to stdout, past the test harness capture, so the line shows
    // for passing criteria too.
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "criterion {n}: {} {detail}; runtime {secs:.1} s (limit {limit_s} s)",
        if ok { "PASS" } else { "FAIL" },
    )
    .unwrap();
    out.flush().unwrap();
    ok
}

/// `IW_p(Σ(ρ), 50 + p + 2)`.
fn iw_toy(p: usize, rho: f64) -> CorrelationSampler {
    equicorrelation_posterior(p, rho, (50 + p + 2) as f64).unwrap()
}

fn fresh_coverage<S: VectorSampler>(rect: &QuantileRectangle, sampler: &S, seed: u64) -> f64 {
    coverage_from_sampler(rect, sampler, VALIDATION_DRAWS, seed).unwrap()
}

#[test]
fn criterion_01_naive_coverage() {
    let _g = serial();
    const TARGET: f64 = 0.3585;
    const TOL: f64 = 0.01;
    let start = Instant::now();
    let g = GaussianSampler::standard(20);
    let naive = special_rectangle(&g, ALPHA, SpecialKind::Naive, 1_000_000, 1).unwrap();
    let cov = fresh_coverage(&naive, &g, 101);
    let pass = (cov - TARGET).abs() <= TOL;
    let detail = format!("naive coverage d=20: {cov:.4} (target {TARGET} ± {TOL})");
    assert!(report(1, pass, &detail, start.elapsed(), 10.0));
}

#[test]
fn criterion_02_bonferroni_sandwich() {
    let _g = serial();
    let start = Instant::now();
    let g = GaussianSampler::standard(20);
    let bonf = special_rectangle(&g, ALPHA, SpecialKind::Bonferroni, 1_000_000, 2).unwrap();
    let cov_ind = fresh_coverage(&bonf, &g, 102);

    let iw = iw_toy(15, 0.7);
    let bonf_iw = special_rectangle(&iw, ALPHA, SpecialKind::Bonferroni, 1_000_000, 3).unwrap();
    let cov_iw = fresh_coverage(&bonf_iw, &iw, 103);

    // Not part of the check: the same toy with 50 degrees of freedom.
    let iw50 = equicorrelation_posterior(15, 0.7, 50.0).unwrap();
    let bonf_50 = special_rectangle(&iw50, ALPHA, SpecialKind::Bonferroni, 1_000_000, 4).unwrap();
    let cov_50 = fresh_coverage(&bonf_50, &iw50, 104);

    let pass = (0.95..=0.965).contains(&cov_ind) && cov_iw > 0.97;
    let detail = format!(
        "Bonferroni coverage independent d=20: {cov_ind:.4} (need [0.95, 0.965]); \
         IW toy p=15 rho=0.7 dof=67: {cov_iw:.4} (need > 0.97); for reference dof=50 gives \
         {cov_50:.4}"
    );
    assert!(report(2, pass, &detail, start.elapsed(), 60.0));
}

#[test]
fn criterion_03_sliced_grid_calibration() {
    let _g = serial();
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, rho) in [0.0, 0.7].into_iter().enumerate() {
        let iw = iw_toy(15, rho);
        let d = iw.dim();
        let cfg = SlicedGridConfig::new(ALPHA, d);
        let res = sliced_quantile_grid(&iw, ALPHA, &cfg, 10 + i as u64).unwrap();
        let t = res.rectangle.level_t();
        let cov = fresh_coverage(&res.rectangle, &iw, 200 + i as u64);
        let lo = ALPHA / d as f64;
        pass &= (0.95..=0.965).contains(&cov) && t >= lo * (1.0 - 1e-12) && t <= ALPHA;
        parts.push(format!(
            "rho={rho}: fresh coverage {cov:.4}, level_t {t:.3e} in [{lo:.3e}, {ALPHA}], \
             validated {:.4}",
            res.candidates[res.selected].coverage
        ));
    }
    let detail = format!("{} (coverage need [0.95, 0.965])", parts.join("; "));
    assert!(report(3, pass, &detail, start.elapsed(), 300.0));
}

fn sorted_columns(block: &SampleBlock) -> Vec<Vec<f64>> {
    (0..block.dim())
        .map(|j| {
            let mut c = block.column(j);
            c.sort_by(f64::total_cmp);
            c
        })
        .collect()
}

fn count_inside(block: &SampleBlock, lo: &[f64], hi: &[f64]) -> usize {
    block
        .rows()
        .filter(|r| r.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| l <= x && x <= h))
        .count()
}

/// Containment of the symmetric order-statistic rectangle at tail index `a`
/// (1-based), by direct counting.
fn family_member(cols: &[Vec<f64>], a: usize) -> (Vec<f64>, Vec<f64>) {
    let m = cols[0].len();
    cols.iter().map(|c| (c[a - 1], c[m - a])).unzip()
}

#[test]
fn criterion_04_bghm_exactness() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = substream(4, 0);
    let mut failures = Vec::new();
    let mut single_bound_slack = 0;
    for inst in 0..50 {
        let d = rng.random_range(1..=5usize);
        let m = rng.random_range(20..=500usize);
        let k = rng.random_range(1..=m);
        let raw = GaussianSampler::standard(d + 1).draw_block(&mut rng, m);
        let mut block = SampleBlock::empty(d);
        for r in raw.rows() {
            // A shared factor makes the coordinates dependent.
            let row: Vec<f64> = (0..d).map(|j| r[j + 1] + 0.8 * r[0]).collect();
            block.push_row(&row);
        }

        let (rect, fit) = bghm_rectangle(&block, k).unwrap();

        // Independent oracle: brute-force ranks and scores.
        let mut s: Vec<usize> = (0..m)
            .map(|i| {
                let ranks: Vec<usize> = (0..d)
                    .map(|j| {
                        let x = block.row(i)[j];
                        1 + block.rows().filter(|r| r[j] < x).count()
                    })
                    .collect();
                let lo = *ranks.iter().min().unwrap();
                let hi = *ranks.iter().max().unwrap();
                (m + 1 - lo).max(hi)
            })
            .collect();
        s.sort_unstable();
        let j_star = s[k - 1];

        // Largest member of the family still holding k samples.
        let cols = sorted_columns(&block);
        let max_a = m.div_ceil(2);
        let a_best = (1..=max_a)
            .filter(|&a| {
                let (lo, hi) = family_member(&cols, a);
                count_inside(&block, &lo, &hi) >= k
            })
            .max()
            .unwrap();
        let (lo, hi) = family_member(&cols, a_best);
        let inside = count_inside(&block, &lo, &hi);
        let shrunk_inside = if a_best < max_a {
            let (lo2, hi2) = family_member(&cols, a_best + 1);
            count_inside(&block, &lo2, &hi2)
        } else {
            0
        };
        let t_expected = 2.0 * (m + 1 - j_star) as f64 / (m as f64 + 1.0);

        let ok = fit.j_star == j_star
            && m + 1 - j_star == a_best
            && rect.lower() == lo.as_slice()
            && rect.upper() == hi.as_slice()
            && fit.contained == inside
            && inside >= k
            && shrunk_inside < k
            && fit.t_hat == t_expected;
        if !ok {
            failures.push(format!("instance {inst} (d={d}, M={m}, k={k})"));
        }

        // Moving a single bound one order statistic inward.
        let mut slack = false;
        for j in 0..d {
            for side in [0, 1] {
                let (mut l, mut h) = (lo.clone(), hi.clone());
                if side == 0 {
                    l[j] = cols[j][a_best];
                } else {
                    h[j] = cols[j][m - a_best - 1];
                }
                slack |= l[j] <= h[j] && count_inside(&block, &l, &h) >= k;
            }
        }
        single_bound_slack += usize::from(slack);
    }
    let pass = failures.is_empty();
    let detail = format!(
        "50 instances: containment >= k, family minimality and t_hat exact in {} \
         (failures: {:?}); note: moving one bound alone keeps >= k samples in {} instances",
        50 - failures.len(),
        failures,
        single_bound_slack
    );
    assert!(report(4, pass, &detail, start.elapsed(), 30.0));
}

#[test]
fn criterion_05_online_batch_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = substream(5, 0);
    let mut failures = Vec::new();
    let (mut merges, mut count_form) = (0, 0);
    for inst in 0..20 {
        let d = rng.random_range(1..=20usize);
        let m = rng.random_range(200..=5000usize);
        let alpha = rng.random_range(0.01..0.2);
        let raw = GaussianSampler::standard(d + 1).draw_block(&mut rng, m);
        let mut all = SampleBlock::empty(d);
        for r in raw.rows() {
            let row: Vec<f64> = (0..d).map(|j| r[j + 1] + 0.5 * r[0]).collect();
            all.push_row(&row);
        }
        // Random batch boundaries.
        let n_batches = rng.random_range(1..=25usize).min(m);
        let mut cuts: Vec<usize> = (0..n_batches - 1).map(|_| rng.random_range(1..m)).collect();
        cuts.push(0);
        cuts.push(m);
        cuts.sort_unstable();
        cuts.dedup();

        let opts = OnlineOptions {
            verify: true,
            ..OnlineOptions::default()
        };
        let mut online = OnlineBghm::new(d, alpha, m, opts).unwrap();
        for w in cuts.windows(2) {
            let rows = all.as_slice()[w[0] * d..w[1] * d].to_vec();
            online.push_batch(&SampleBlock::new(d, rows).unwrap()).unwrap();
        }
        let (rect, fit, stats) = online.finish().unwrap();

        let k = ((1.0 - alpha) * m as f64 - 1e-9).ceil() as usize;
        let (batch, batch_fit) = bghm_rectangle(&all, k).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let ok = bits(rect.lower()) == bits(batch.lower())
            && bits(rect.upper()) == bits(batch.upper())
            && fit.t_hat.to_bits() == batch_fit.t_hat.to_bits()
            && stats.depth_form_violations == 0
            && stats.depth_form_checks == stats.merges
            && stats.batch_match == Some(true);
        if !ok {
            failures.push(format!("instance {inst} (d={d}, M={m}, batches={})", cuts.len() - 1));
        }
        merges += stats.merges;
        count_form += stats.count_form_violations;
    }
    let pass = failures.is_empty();
    let detail = format!(
        "20 instances bit-identical: {} (failures: {failures:?}); extreme-set inclusion \
         checked by brute force on {merges} merges, 0 violations allowed; the top-m count \
         form of the inclusion failed on {count_form} merges (ties in depth)",
        20 - failures.len()
    );
    assert!(report(5, pass, &detail, start.elapsed(), 60.0));
}

#[test]
fn criterion_06_support_recovery_trends() {
    let _g = serial();
    let start = Instant::now();
    const REPS: usize = 200;
    let cells = [(0.024, 500usize), (0.24, 50), (0.48, 50)];
    let mut lines = Vec::new();
    let mut acc_opt_sparse = f64::NAN;
    let mut gap_mid = f64::NAN;
    let mut max_fwer: f64 = 0.0;
    for (i, &(density, n)) in cells.iter().enumerate() {
        let gt = make_sparse_pd(20, density, 600 + i as u64).unwrap();
        let cfg = BenchmarkConfig::new(n, REPS, 6000 + i as u64);
        let rep = run_support_benchmark(&gt, &cfg).unwrap();
        let acc = |m| rep.row(m).unwrap().acc_mean;
        for r in &rep.rows {
            max_fwer = max_fwer.max(r.fwer_hat);
        }
        if i == 0 {
            acc_opt_sparse = acc(SupportMethod::BayesOptimal);
        }
        if i == 1 {
            gap_mid = acc(SupportMethod::BayesOptimal) - acc(SupportMethod::MtBonferroni);
        }
        let row = |m| {
            let r = rep.row(m).unwrap();
            format!("{m} {:.2}/{:.1}%", r.acc_mean, r.fwer_hat)
        };
        lines.push(format!(
            "[{:.1}% n={n}: {}; {}; {}; {}; fallbacks {}]",
            gt.density * 100.0,
            row(SupportMethod::BayesOptimal),
            row(SupportMethod::BayesBonferroni),
            row(SupportMethod::MtBonferroni),
            row(SupportMethod::MtHolm),
            rep.row(SupportMethod::BayesOptimal).unwrap().fallbacks,
        ));
    }
    let pass = acc_opt_sparse >= 99.0 && gap_mid >= 0.3 && max_fwer <= 10.0;
    let detail = format!(
        "(a) Acc optimal 2.4% n=500 {acc_opt_sparse:.2} (need >= 99.0); (b) optimal minus \
         MT-Bonferroni 24% n=50 {gap_mid:+.2} (need >= 0.3); (c) max FWER {max_fwer:.1}% \
         (need <= 10); S={REPS}, acc/FWER per method {}",
        lines.join(" ")
    );
    assert!(report(6, pass, &detail, start.elapsed(), 1200.0));
}

/// Posterior of a fitted sparse model with `p = 10`, `n = 50`.
fn fitted_posterior() -> PosteriorSpec {
    let gt = make_sparse_pd(10, 0.3, 77).unwrap();
    let x = GaussianSampler::centered(&gt.sigma0)
        .unwrap()
        .draw_block(&mut substream(77, 1), 50);
    let x = TimeseriesMatrix::from_block(&x);
    posterior_update(&default_prior(&x).unwrap(), &x).unwrap()
}

fn optimal_rectangle(sampler: &CorrelationSampler, seed: u64) -> QuantileRectangle {
    let cfg = SlicedGridConfig::new(ALPHA, sampler.dim());
    sliced_quantile_grid(sampler, ALPHA, &cfg, seed).unwrap().rectangle
}

#[test]
fn criterion_07_bfwer() {
    let _g = serial();
    let start = Instant::now();
    let sampler = fitted_posterior().sampler().unwrap();
    let rect = optimal_rectangle(&sampler, 7);
    let reference = vec![0.0; sampler.dim()];
    let decisions = local_decisions(&reference, &rect).unwrap();
    let flagged = decisions.flagged().count();
    let errors = fold_draws(
        &sampler,
        VALIDATION_DRAWS,
        707,
        0,
        || 0usize,
        |acc, theta| *acc += usize::from(decisions.directional_error(theta, &reference)),
        |a, b| a + b,
    );
    let frac = errors as f64 / VALIDATION_DRAWS as f64;
    let pass = flagged > 0 && frac <= ALPHA + 0.01;
    let detail = format!(
        "p=10 n=50, ref=0: {flagged} of {} coordinates flagged, posterior directional-error \
         fraction {frac:.4} (need <= {:.2})",
        sampler.dim(),
        ALPHA + 0.01
    );
    assert!(report(7, pass, &detail, start.elapsed(), 60.0));
}

#[test]
fn criterion_08_separation_radius() {
    let _g = serial();
    let start = Instant::now();
    let sampler = fitted_posterior().sampler().unwrap();
    let rect = optimal_rectangle(&sampler, 8);
    let d = sampler.dim();
    let mid: Vec<f64> = rect.lower().iter().zip(rect.upper()).map(|(l, u)| 0.5 * (l + u)).collect();

    // Just outside one face, outside a corner, and the origin.
    let mut one_face = mid.clone();
    one_face[0] = rect.upper()[0] + 0.05;
    let corner: Vec<f64> = rect.upper().iter().map(|u| u + 0.02).collect();
    let references = [("one face", one_face), ("corner", corner), ("origin", vec![0.0; d])];

    let mut pass = true;
    let mut parts = Vec::new();
    for (name, reference) in &references {
        for norm in [Norm::Linf, Norm::L2] {
            let r = distance_to_rectangle(reference, &rect, norm).unwrap();
            if r == 0.0 {
                continue;
            }
            let near = fold_draws(
                &sampler,
                VALIDATION_DRAWS,
                808,
                0,
                || 0usize,
                |acc, theta| {
                    let diff = theta.iter().zip(reference.iter()).map(|(a, b)| (a - b).abs());
                    let dist = match norm {
                        Norm::Linf => diff.fold(0.0, f64::max),
                        Norm::L2 => diff.map(|e| e * e).sum::<f64>().sqrt(),
                    };
                    *acc += usize::from(dist < r);
                },
                |a, b| a + b,
            );
            let frac = near as f64 / VALIDATION_DRAWS as f64;
            pass &= frac <= ALPHA + 0.01;
            parts.push(format!("{name} {norm:?} r={r:.4}: {frac:.4}"));
        }
    }
    pass &= parts.len() >= 4;
    let detail = format!(
        "fraction of draws within the separation radius: {} (need <= {:.2})",
        parts.join(", "),
        ALPHA + 0.01
    );
    assert!(report(8, pass, &detail, start.elapsed(), 60.0));
}

fn cell(cells: &[GridCell], n: usize, p: usize, rho: f64) -> f64 {
    cells.iter().find(|c| c.n == n && c.p == p && c.rho == rho).unwrap().m_l
}

#[test]
fn criterion_09_uncertainty_grid() {
    let _g = serial();
    let start = Instant::now();
    let (ns, ps, rhos) = ([50usize, 200, 800], [5usize, 15, 40], [0.0, 0.4, 0.7]);
    let cells = uncertainty_grid(
        &ns,
        &ps,
        &rhos,
        ALPHA,
        20,
        9,
        OptimalEstimator::Bghm { samples: 40_000 },
    )
    .unwrap();
    let mut violations = Vec::new();
    for &p in &ps {
        for &rho in &rhos {
            for w in ns.windows(2) {
                if cell(&cells, w[1], p, rho) >= cell(&cells, w[0], p, rho) {
                    violations.push(format!("n {}->{} at p={p} rho={rho}", w[0], w[1]));
                }
            }
        }
    }
    for &n in &ns {
        for &p in &ps {
            for w in rhos.windows(2) {
                if cell(&cells, n, p, w[1]) >= cell(&cells, n, p, w[0]) {
                    violations.push(format!("rho {}->{} at n={n} p={p}", w[0], w[1]));
                }
            }
        }
        for &rho in &rhos {
            for w in ps.windows(2) {
                if cell(&cells, n, w[1], rho) <= cell(&cells, n, w[0], rho) {
                    violations.push(format!("p {}->{} at n={n} rho={rho}", w[0], w[1]));
                }
            }
        }
    }
    let pass = violations.is_empty();
    let detail = format!(
        "27 cells x 20 reps: m_l ranges {:.3} (n=800 p=5 rho=0.7) to {:.3} (n=50 p=40 rho=0); \
         monotonicity violations {violations:?}",
        cell(&cells, 800, 5, 0.7),
        cell(&cells, 50, 40, 0.0)
    );
    assert!(report(9, pass, &detail, start.elapsed(), 900.0));
}

fn column_stats(block: &SampleBlock, j: usize) -> (Vec<f64>, f64, f64) {
    let col = block.column(j);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (col, mean, var.sqrt())
}

/// Two-sided Kolmogorov-Smirnov distance to `N(mean, sd²)`.
fn ks_normal(mut xs: Vec<f64>, mean: f64, sd: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let norm = Normal::new(mean, sd).unwrap();
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = norm.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_10_empirical_bvm() {
    let _g = serial();
    let start = Instant::now();
    const DRAWS: usize = 10_000;
    let sigma0 = make_equicorrelation(5, 0.3).unwrap();
    let data = GaussianSampler::centered(&sigma0)
        .unwrap()
        .draw_block(&mut substream(10, 0), 8000);
    let small = SampleBlock::new(5, data.as_slice()[..2000 * 5].to_vec()).unwrap();
    let draws_for = |x: &SampleBlock, seed: u64| {
        let x = TimeseriesMatrix::from_block(x);
        let post = posterior_update(&default_prior(&x).unwrap(), &x).unwrap();
        post.sampler().unwrap().draw_block(&mut substream(seed, 0), DRAWS)
    };
    let d2000 = draws_for(&small, 1);
    let d8000 = draws_for(&data, 2);

    let mut max_ks: f64 = 0.0;
    let mut ratios = Vec::new();
    for j in 0..d2000.dim() {
        let (col, mean, sd) = column_stats(&d2000, j);
        max_ks = max_ks.max(ks_normal(col, mean, sd));
        let (_, _, sd_big) = column_stats(&d8000, j);
        ratios.push(sd / sd_big);
    }
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let pass = max_ks < 0.02 && rmin >= 1.30 && rmax <= 1.55;
    let detail = format!(
        "p=5 n=2000: max KS distance {max_ks:.4} (need < 0.02); sd ratio n=2000/n=8000 in \
         [{rmin:.3}, {rmax:.3}] (need [1.30, 1.55]; sd scales as n^-1/2, so 2 is expected)"
    );
    assert!(report(10, pass, &detail, start.elapsed(), 120.0));
}
