#![doc = include_str!("../../../README.md")]
// `!(x >= 0.0)` is how NaN gets rejected along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dist;
pub mod error;
pub mod models;
pub mod normal;
pub mod rng;
pub mod stein;

pub use dist::{total_variation, ExactDistribution, Moments, ZeroBiasDensity};
pub use error::{Error, Result};
pub use normal::{log_normal_tail, normal_cdf, normal_tail, stein_solution, stein_solution_derivative_g, NormalEval};
pub use stein::{
    band, check_mgf_bound, check_tail_integral, conditional_regression, fit_constant, pair_antisymmetry_check,
    ratio_table, zero_bias_band, DiagnosticsReport, RatioTable, SteinBudget,
};

// The book's code listings run as doc tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/normal-kernel.md")]
    mod normal_kernel {}
    #[doc = include_str!("../../../book/src/exact-distributions.md")]
    mod exact_distributions {}
    #[doc = include_str!("../../../book/src/stein-budgets.md")]
    mod stein_budgets {}
    #[doc = include_str!("../../../book/src/combinatorial.md")]
    mod combinatorial {}
    #[doc = include_str!("../../../book/src/antivoter.md")]
    mod antivoter {}
    #[doc = include_str!("../../../book/src/binary-codes.md")]
    mod binary_codes {}
    #[doc = include_str!("../../../book/src/curie-weiss.md")]
    mod curie_weiss {}
    #[doc = include_str!("../../../book/src/independent.md")]
    mod independent {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
