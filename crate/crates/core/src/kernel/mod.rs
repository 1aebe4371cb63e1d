//! Distribution functions and elementary tests consumed by every other module.
//!
//! All functions are pure and safe to call concurrently.

pub mod dist;
pub mod hypothesis;
pub mod special;

pub use dist::{
    beta_cdf, beta_pdf, beta_quantile, binomial_pmf, binomial_sf, chisq_sf, std_normal_cdf,
    std_normal_quantile, std_normal_sf, student_t_sf, DistributionQuery, Family,
};
pub use hypothesis::{
    ks_two_sample, welch_outcome, welch_t_test, wilcoxon_signed_rank, GroupMoments, KsOutcome,
    Sides, SignedRankOutcome, WelchOutcome,
};
