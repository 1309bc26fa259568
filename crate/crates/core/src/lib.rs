//! Peaks-over-threshold tail estimation with second-order bias reduction.
//!
//! The crate covers the classical Pareto (Hill) and GPD maximum likelihood
//! fits, extended models that add a second-order bias term, transformed
//! models with a Bernstein-smoothed link, asymptotic intervals, tail
//! probability and quantile estimates, minimum-variance hyperparameter
//! selection, and a Monte Carlo harness.

pub mod bernstein;
pub mod dataset;
pub mod distributions;
pub mod empirical;
pub mod error;
pub mod extended;
pub mod gpd;
pub mod inference;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod selection;
pub mod simharness;
pub mod special;
pub mod transform;

pub use bernstein::{degree_for, fit_bernstein, BernsteinCdf, DENSITY_FLOOR};
pub use dataset::{ingest_csv, Column, Dataset, IngestOptions, IngestReport};
pub use distributions::{DistributionSpec, Family, TailTruth};
pub use empirical::{exceedances, hill, moving_average, EmpiricalCdf, ExceedanceMode, ExceedanceSet, KPath, KPathEntry, Sample};
pub use error::{Result, TailError};
pub use extended::{
    extended_survival, fit_extended_gpd, fit_extended_gpd_with, fit_extended_pareto, fit_extended_pareto_with,
    BiasFunction, ExtendedFit, ExtendedOptions, Track,
};
pub use gpd::{fit_gpd_ml, fit_pareto, gpd_loglik, gpd_loglik_grad, gpd_survival, GpdFit, GpdParams, ParetoFit};
pub use inference::{
    ci_xi, cov_xi_tau_e, cov_xi_tau_for, functionals, gof_pp, tail_prob, tail_quantile, var_xi_eplus, GofResult,
    MomentFunctionals, TailEstimate,
};
pub use selection::{
    default_grid, default_k_range, fit_at, k_path, min_variance_select, FitResult, FittedModel, Hyperparameters, Method,
    MethodConfig, Selection,
};
pub use simharness::{export_curves, import_curves, run_experiment, CurveSet, ExperimentSpec, ExportFormat, MethodPlan};
pub use transform::{fit_transform, transform_loglik, TransformFit};

/// Version tag carried by every serialized result document.
pub const SCHEMA_VERSION: u32 = 1;
