// SPDX-License-Identifier: Apache-2.0

//! Credible hyperrectangles for posteriors over correlation matrices.
//!
//! The pipeline: fit an inverse-Wishart posterior to an `n × p` data matrix
//! ([`posterior`]), draw correlation vectors from it ([`sampling`]), build a
//! rectangle of marginal quantile intervals with joint mass `1 - α`
//! ([`rectangles`]), then read decisions off the rectangle ([`comparison`],
//! [`support`]).

// `!(x > 0.0)` and friends are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod error;
pub mod io;
pub mod linalg;
pub mod posterior;
pub mod rectangles;
pub mod sampling;
pub mod sim;
pub mod support;

pub use comparison::{
    compare_rectangles, distance_to_rectangle, local_decisions, mean_length, DecisionReport,
    Direction, Norm, PairDiff,
};
pub use error::{Error, Result};
pub use linalg::{SymMatrix, Vech0Vector};
pub use posterior::{default_prior, posterior_update, PosteriorSpec, PriorSpec, TimeseriesMatrix};
pub use rectangles::{Method, QuantileRectangle};
pub use sampling::{SampleBlock, VectorSampler};
pub use sim::{GroundTruth, SimulationReport};
pub use support::{SupportEstimate, SupportMethod};
