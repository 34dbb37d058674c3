//! Learning simplex-weighted linear utilities from pairwise comparisons.
//!
//! The hidden utility is `u(x) = w . phi(x)` with `w` on the probability
//! simplex. An oracle answers "is `x'` preferred to `x`?" with probability
//! `F(w . (phi(x') - phi(x)))` for a symmetric c.d.f. `F`. The crate provides
//! passive learners (ERM, maximum likelihood), active learners that synthesize
//! queries, the two error functionals and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod active;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod passive;

pub use error::{Error, Result};
pub use model::{Dataset, Embedding, Label, LabeledExample, QueryPair, WeightVector};
pub use noise::NoiseModel;
pub use oracle::Oracle;
