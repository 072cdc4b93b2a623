//! Maximum-likelihood fitting of heavy-tailed severity models, a parametric
//! bootstrap of the fitted parameters, and diagnostics comparing the
//! bootstrap distribution with its Gaussian approximation.

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod ci;
pub mod density;
pub mod error;
pub mod family;
pub mod fisher;
mod linalg;
pub mod losses;
pub mod mle;
pub mod normality;
pub mod optimizer;
pub mod rng;
pub mod special;
pub mod synthetic;

pub use bootstrap::{run_bootstrap, true_model_from_losses, BootstrapMatrix, BootstrapSidecar, TrueModelFit};
pub use ci::{bootstrap_ci_width, ci_error_table, normal_ci_width, CiErrorRow};
pub use density::{kde, overlay, DensityOverlay};
pub use error::{Error, Result};
pub use family::{SeverityFamily, SeverityModel};
pub use fisher::{asymptotic_covariance, fisher_information, mc_score_information, InfoMatrix};
pub use mle::{fit, FitResult, FitWarning};
pub use normality::{anderson_darling_normal, mardia, normality_suite, NormalityReport, NormalityTest};
pub use optimizer::{nelder_mead, NelderMeadOptions, OptimResult};
pub use synthetic::LossProfile;
