// SPDX-License-Identifier: Apache-2.0

//! Edge-set recovery from a rectangle, and the frequentist baselines:
//! per-pair correlation t-tests with Bonferroni or Holm adjustment.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{dim_from_pair_count, pair_count, pair_of, SymMatrix};
use crate::posterior::{TimeseriesMatrix, MIN_COLUMN_VARIANCE};
use crate::rectangles::{Method, QuantileRectangle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMethod {
    BayesOptimal,
    BayesBonferroni,
    MtBonferroni,
    MtHolm,
}

impl SupportMethod {
    pub const ALL: [SupportMethod; 4] = [
        SupportMethod::BayesOptimal,
        SupportMethod::BayesBonferroni,
        SupportMethod::MtBonferroni,
        SupportMethod::MtHolm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SupportMethod::BayesOptimal => "bayes_optimal",
            SupportMethod::BayesBonferroni => "bayes_bonferroni",
            SupportMethod::MtBonferroni => "mt_bonferroni",
            SupportMethod::MtHolm => "mt_holm",
        }
    }
}

impl std::fmt::Display for SupportMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SupportMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown support method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtMethod {
    Bonferroni,
    Holm,
}

/// Estimated edge set; pairs are 0-based with `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub p: usize,
    pub edges: BTreeSet<(usize, usize)>,
    pub alpha: f64,
    pub method: SupportMethod,
}

impl SupportEstimate {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Percentage of the `p(p-1)/2` pairs classified the same way as in
    /// `truth`.
    pub fn accuracy(&self, truth: &BTreeSet<(usize, usize)>) -> f64 {
        let wrong = self.edges.symmetric_difference(truth).count();
        let total = pair_count(self.p);
        100.0 * (total - wrong) as f64 / total as f64
    }

    /// Edges claimed that are absent from `truth`.
    pub fn false_positives(&self, truth: &BTreeSet<(usize, usize)>) -> usize {
        self.edges.difference(truth).count()
    }
}

/// Edges whose interval excludes zero strictly.
pub fn support_from_rectangle(rect: &QuantileRectangle) -> Result<SupportEstimate> {
    let p = dim_from_pair_count(rect.d()).ok_or_else(|| {
        Error::InvalidArgument(format!("{} is not a pair count p(p-1)/2", rect.d()))
    })?;
    let edges = rect
        .lower()
        .iter()
        .zip(rect.upper())
        .enumerate()
        .filter(|(_, (&lo, &hi))| lo > 0.0 || hi < 0.0)
        .map(|(i, _)| pair_of(p, i))
        .collect();
    let method = match rect.method() {
        Method::Bonferroni => SupportMethod::BayesBonferroni,
        _ => SupportMethod::BayesOptimal,
    };
    Ok(SupportEstimate {
        p,
        edges,
        alpha: rect.nominal_alpha(),
        method,
    })
}

/// Pearson correlation of every column pair.
pub fn sample_correlation(x: &TimeseriesMatrix) -> Result<SymMatrix> {
    let c = x.centered();
    let cp = c.cross_product();
    let p = x.p();
    for j in 0..p {
        if cp.get(j, j) / (x.n().max(2) - 1) as f64 <= MIN_COLUMN_VARIANCE {
            return Err(Error::DegenerateColumn { column: j });
        }
    }
    let mut r = SymMatrix::identity(p);
    for i in 0..p {
        for j in i + 1..p {
            let v = cp.get(i, j) / (cp.get(i, i) * cp.get(j, j)).sqrt();
            r.set(i, j, v.clamp(-1.0, 1.0));
        }
    }
    Ok(r)
}

/// Two-sided p-value of `r` under the null of zero correlation with `n`
/// observations.
pub fn corr_pvalue(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * df.sqrt() / (1.0 - r * r).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Symmetric matrix of pairwise p-values (unit diagonal).
pub fn corr_test_pvalues(x: &TimeseriesMatrix) -> Result<SymMatrix> {
    if x.n() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation tests need at least 3 observations, got {}",
            x.n()
        )));
    }
    let r = sample_correlation(x)?;
    let p = x.p();
    let mut out = SymMatrix::identity(p);
    for i in 0..p {
        for j in i + 1..p {
            out.set(i, j, corr_pvalue(r.get(i, j), x.n()));
        }
    }
    Ok(out)
}

/// Pairs rejected at family-wise level `alpha`.
pub fn mt_adjust(pvalues: &SymMatrix, alpha: f64, method: MtMethod) -> Result<SupportEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            range: "(0, 1)".into(),
        });
    }
    let p = pvalues.dim();
    let m = pair_count(p);
    let pairs: Vec<((usize, usize), f64)> = (0..m)
        .map(|idx| {
            let (i, j) = pair_of(p, idx);
            ((i, j), pvalues.get(i, j))
        })
        .collect();
    let edges = match method {
        MtMethod::Bonferroni => {
            let cut = alpha / m as f64;
            pairs.iter().filter(|(_, pv)| *pv <= cut).map(|(e, _)| *e).collect()
        }
        MtMethod::Holm => {
            let mut sorted = pairs.clone();
            sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
            sorted
                .iter()
                .enumerate()
                .take_while(|(i, (_, pv))| *pv <= alpha / (m - i) as f64)
                .map(|(_, (e, _))| *e)
                .collect()
        }
    };
    Ok(SupportEstimate {
        p,
        edges,
        alpha,
        method: match method {
            MtMethod::Bonferroni => SupportMethod::MtBonferroni,
            MtMethod::Holm => SupportMethod::MtHolm,
        },
    })
}
