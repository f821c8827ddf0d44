// SPDX-License-Identifier: Apache-2.0

//! Decisions from credible rectangles: a reference point against one
//! rectangle, and two rectangles against each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rectangles::QuantileRectangle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Linf,
    L2,
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Per-coordinate distance from `x` to `[lo, hi]`.
#[inline]
fn excess(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// Distance from `reference` to the closest point of `rect`.
pub fn distance_to_rectangle(
    reference: &[f64],
    rect: &QuantileRectangle,
    norm: Norm,
) -> Result<f64> {
    check_dim(rect.d(), reference.len())?;
    let parts = reference
        .iter()
        .zip(rect.lower().iter().zip(rect.upper()))
        .map(|(&x, (&lo, &hi))| excess(x, lo, hi));
    Ok(match norm {
        Norm::Linf => parts.fold(0.0, f64::max),
        Norm::L2 => parts.map(|e| e * e).sum::<f64>().sqrt(),
    })
}

/// Reference comparison for one rectangle.
///
/// `delta_plus[i]` flags a coordinate whose whole interval lies above the
/// reference, `delta_minus[i]` one lying below it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub delta_plus: Vec<bool>,
    pub delta_minus: Vec<bool>,
    pub delta: Vec<bool>,
    pub globally_different: bool,
    pub separation_linf: f64,
    pub separation_l2: f64,
    pub alpha: f64,
}

impl DecisionReport {
    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.delta.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }

    /// Whether `theta` contradicts any flagged direction, i.e. `θ_i ≤ ref_i`
    /// on a `δ⁺` coordinate or `θ_i ≥ ref_i` on a `δ⁻` coordinate.
    pub fn directional_error(&self, theta: &[f64], reference: &[f64]) -> bool {
        theta.iter().zip(reference).enumerate().any(|(i, (&t, &r))| {
            (self.delta_plus[i] && t <= r) || (self.delta_minus[i] && t >= r)
        })
    }
}

pub fn local_decisions(reference: &[f64], rect: &QuantileRectangle) -> Result<DecisionReport> {
    check_dim(rect.d(), reference.len())?;
    let delta_plus: Vec<bool> = reference
        .iter()
        .zip(rect.lower())
        .map(|(&r, &lo)| r < lo)
        .collect();
    let delta_minus: Vec<bool> = reference
        .iter()
        .zip(rect.upper())
        .map(|(&r, &hi)| r > hi)
        .collect();
    let delta: Vec<bool> = delta_plus.iter().zip(&delta_minus).map(|(a, b)| a | b).collect();
    Ok(DecisionReport {
        globally_different: delta.iter().any(|&f| f),
        separation_linf: distance_to_rectangle(reference, rect, Norm::Linf)?,
        separation_l2: distance_to_rectangle(reference, rect, Norm::L2)?,
        delta_plus,
        delta_minus,
        delta,
        alpha: rect.nominal_alpha(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The second rectangle lies strictly above the first.
    Gained,
    /// The second rectangle lies strictly below the first.
    Lost,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Gained => "gained",
            Direction::Lost => "lost",
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::Gained => Direction::Lost,
            Direction::Lost => Direction::Gained,
        }
    }
}

/// Coordinates where two rectangles do not overlap.
///
/// Two axis-aligned boxes are disjoint exactly when some coordinate
/// separates them, so `globally_different` is `!disjoint.is_empty()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiff {
    pub disjoint: Vec<(usize, Direction)>,
    pub globally_different: bool,
    pub alpha_a: f64,
    pub alpha_b: f64,
}

pub fn compare_rectangles(a: &QuantileRectangle, b: &QuantileRectangle) -> Result<PairDiff> {
    check_dim(a.d(), b.d())?;
    let disjoint: Vec<(usize, Direction)> = (0..a.d())
        .filter_map(|i| {
            if a.upper()[i] < b.lower()[i] {
                Some((i, Direction::Gained))
            } else if b.upper()[i] < a.lower()[i] {
                Some((i, Direction::Lost))
            } else {
                None
            }
        })
        .collect();
    Ok(PairDiff {
        globally_different: !disjoint.is_empty(),
        disjoint,
        alpha_a: a.nominal_alpha(),
        alpha_b: b.nominal_alpha(),
    })
}

/// Average interval width.
pub fn mean_length(rect: &QuantileRectangle) -> f64 {
    if rect.d() == 0 {
        return 0.0;
    }
    rect.lower()
        .iter()
        .zip(rect.upper())
        .map(|(l, u)| u - l)
        .sum::<f64>()
        / rect.d() as f64
}
