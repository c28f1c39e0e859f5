//! causim treats statistical simulation experiments as causal interventions
//! on data-generating mechanisms.
//!
//! A simulation study sets parameters, generates data, and reports a
//! functional of the results. Changing one parameter usually moves more
//! than the quantity of interest: downstream moments shift too, and the
//! outcome conflates the intended effect with those side effects. This
//! crate makes the distinction operational for linear-Gaussian structural
//! causal models and for a mean-function comparison laboratory:
//!
//! - [`scm`] computes closed-form population quantities (covariances,
//!   probability limits of conditional/naive OLS, asymptotic variances,
//!   bias-amplification ratios).
//! - [`influence`] builds the influence diagram of a simulation, whose
//!   nodes are manipulable parameters, distributions, and functionals,
//!   and answers path and blocking-set queries.
//! - [`interventions`] plans total-effect and direct-effect parameter
//!   interventions, absorbing induced marginal-variance changes into error
//!   variances and reporting feasible parameter ranges.
//! - [`calibrate`] is the numerical fallback: hold target functionals at
//!   prescribed constants by seeded Monte Carlo root finding.
//! - [`montecarlo`] samples datasets, fits OLS estimators, and runs
//!   replicated multi-arm experiments and parameter sweeps with
//!   thread-count-independent reproducibility.
//! - [`mse_lab`] reproduces the neural-net mean-function comparison:
//!   sigmoid-sum vs radial-product generators, SNR-constant designs, and
//!   relative / modified MSE outcomes.
//!
//! Each capability has a runnable example under `examples/`; declarative
//! experiment files (see [`config`]) drive the same machinery from the
//! `causim` binary.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod influence;
pub mod interventions;
pub mod montecarlo;
pub mod mse_lab;
pub mod ols;
pub mod presets;
pub mod rng;
pub mod runner;
pub mod scm;

pub use error::{Error, Result};
pub use interventions::{direct_effect, feasible_range, total_effect, InterventionPlan};
pub use montecarlo::{grid_sweep, ols_fit, run_experiment, sample_dataset, Dataset};
pub use scm::{
    asymptotic_variance, bias_amplification_ratio, build_covariance, marginal_moments,
    plim_conditional, plim_naive, Conditioning, CovarianceMatrix, MarginalMoments, ScmSpec,
};
