//! Robust meta-analysis of p-values across studies with the r-th ordered
//! p-value (rOP) statistic.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: Beta/chi-square/normal/binomial distribution functions and
//!   the Welch, Kolmogorov-Smirnov and Wilcoxon signed-rank tests.
//! * [`combine`]: per-gene rOP, one-sided rOP, Fisher, Stouffer, minP, maxP
//!   and vote counting, plus effective-study masks.
//! * [`significance`]: Benjamini-Hochberg/Yekutieli adjustment and the pooled
//!   label-permutation null.
//! * [`advisor`]: data-driven choice of `r` (detrended DE counts and the
//!   pathway committee with sequential signed-rank tests).
//! * [`power`]: exact rOP power, the Poisson-binomial generalisation and
//!   vote-counting power.
//! * [`sim`]: the correlated-gene simulation benchmark.
//! * [`io`] and [`pipeline`]: TSV/GMT ingestion, writers and the end-to-end run.

pub mod advisor;
pub mod combine;
pub mod error;
pub mod io;
pub mod kernel;
pub mod matrix;
pub mod pipeline;
pub mod power;
pub mod rng;
pub mod significance;
pub mod sim;
pub mod study;

pub use combine::{combine_matrix, GeneRecord, MetaMethod, MetaResult, Orientation, VoteMode};
pub use error::{Error, ErrorCategory, Result};
pub use matrix::{PValueMatrix, Sidedness};
pub use significance::{Inference, NullPool, PermutationPlan, PermutationScope};
pub use study::{Study, StudySet};
