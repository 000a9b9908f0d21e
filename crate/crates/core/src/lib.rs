//! Retrospective detection of contamination and random switching.
//!
//! The crate splits a sample by a band around its mean, measures the
//! imbalance between the two parts with the statistic `Ψ_N(b)`, and rejects
//! homogeneity when `max_b |Ψ_N(b)|` exceeds a threshold calibrated by Monte
//! Carlo. Around that core sit estimators for the contamination weight and
//! shift, an asymmetric-band variant for variance contamination, iterative
//! peeling for several classes, vector and regression versions, seeded data
//! generators and an experiment harness.
//!
//! ```
//! use switchdetect::{detect, BandGrid, Sample};
//!
//! let s = Sample::new(vec![0.1, -0.3, 0.2, 0.05, -0.1, 4.0, 3.9]).unwrap();
//! let r = detect(&s, &BandGrid::default(), 0.05).unwrap();
//! assert!(r.decision.rejects());
//! ```

pub mod asymmetric;
pub mod densities;
pub mod detect;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod io;
pub mod multiclass;
pub mod multivariate;
pub mod simgen;
pub mod summation;

pub use asymmetric::{detect_asymmetric, detect_variance_contamination, phi_closed_form, phi_numeric};
pub use densities::{
    bstar_root, integrate, j_epsilon, mixture_pdf, psi_population, Component, Density, Density1D, MixtureSpec,
    TabulatedDensity,
};
pub use detect::{
    detect, max_statistic, psi_stat, psi_stat_total_form, sample_mean, split, BandGrid, Decision, DetectionResult,
    Sample, SplitOutcome,
};
pub use error::{Error, Result};
pub use estimate::{estimate_consistent, estimate_nonparametric};
pub use multiclass::{peel, PeelingResult, ThresholdCurve};
pub use multivariate::regression::{coefficient_trace, detect_switching_regression, ols, RegressionData, TraceMode};
pub use multivariate::{detect_multivariate, VectorSample};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/statistic.md")]
    mod statistic {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/asymmetric.md")]
    mod asymmetric {}
    #[doc = include_str!("../../../book/src/multiclass.md")]
    mod multiclass {}
    #[doc = include_str!("../../../book/src/multivariate.md")]
    mod multivariate {}
    #[doc = include_str!("../../../book/src/population.md")]
    mod population {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
