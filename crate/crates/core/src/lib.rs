//! Simulation and verification toolkit for Sinai's recurrent random walk in
//! a random environment on the half-line.

pub mod environment;
pub mod experiments;
pub mod error;
pub mod infinite_valley;
pub mod measures;
pub mod numeric;
pub mod rng;
pub mod stats;
pub mod valley;
pub mod walk;

pub use environment::{
    log_rho, potential, sample_environment, DistributionSpec, Environment, EnvironmentDistribution, Potential,
    Window,
};
pub use error::{Error, Result};
pub use infinite_valley::{
    s_infty_eval, sample_tilde_v_htransform, sample_tilde_v_rejection, tilde_nu, tilde_omega, HTransformSampler,
    InfiniteValleySample, TildeNu,
};
pub use measures::{
    hilbert_distance, omega_plus_indicator, r_kernel_expectation, s_n_eval, sigma_n_eval, CylinderFunction,
    FunctionSpec, MeasureEvaluation,
};
pub use stats::{ks_two_sample, wasserstein1, DistributionSample};
pub use valley::{find_valley, mu_from_xi, mu_n, omega_from_xi, xi_vector, Valley, ValleyMeasure, XiVector};
pub use walk::{hitting_probability, hitting_time, local_times, simulate, step, LocalTimeProfile, Trajectory};
