//! Meta-evaluation procedures.

mod kendall;
mod quadrature;
pub(crate) mod rng;
mod stability;
mod subset;
mod tukey;

pub use kendall::{kendall_tau, tau_b};
pub use stability::{
    stability, stability_of_matrix, PairStability, PairTally, StabilityConfig,
    StabilityDirection, StabilityResult,
};
pub use subset::{evaluate_subset, subset_experiment, SubsetConfig, SubsetResult};
pub use tukey::{
    discriminative_power, studentized_range_cdf, studentized_range_quantile,
    DiscriminativePower,
};
