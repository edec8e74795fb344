//! Rank-embedding estimators.
//!
//! Raw observations are mapped to pairwise score matrices, double-centred, and
//! collapsed into a bounded rank embedding. Everything downstream (the
//! correlation estimator, the moment-weighted quasi-likelihood quantities, the
//! rank-space regressions and the Monte Carlo harness) consumes that embedding.
//!
//! ```
//! use rankql::{correlate, TiePolicy};
//!
//! let fit = correlate(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0], TiePolicy::KemenyZero)
//!     .unwrap();
//! assert_eq!(fit.rho_hat, 0.8);
//! ```

pub mod error;
pub mod estimators;
mod linalg;
pub mod montecarlo;
pub mod rank_kernel;
pub mod regression;
pub mod report;

pub use error::{Error, Result};
pub use estimators::{
    central_moments, correlate, fit_lambda, hessian_and_info, pearson, ql_loss, variance_bound,
    CorrelationFit, Hessian, LambdaWeights, MomentSet,
};
pub use rank_kernel::{
    center_kernel, embed, score_matrix, CenteredKernel, RankEmbedding, ScoreMatrix, TiePolicy,
};
pub use regression::{
    estimate_sigma2, fit_2sls, fit_ql, fit_weighted, DesignEmbedding, IVFit, RegressionFit,
};
