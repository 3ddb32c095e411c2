//! Distribution divergences: MMD alignment matrices, MMD estimates, the
//! proxy A-distance and the adaptive factor built from it.

mod a_distance;
mod linear;
mod mmd;
mod mu;

pub use a_distance::{a_distance, proxy_a_distance, ADistance};
pub use linear::LogisticRegression;
pub use mmd::{
    combine, mmd_biased, mmd_linear, mmd_linear_shuffled, mmd_matrix_conditional,
    mmd_matrix_marginal, MmdMatrix, MmdTerms,
};
pub use mu::{estimate_mu, mu_from_distances, ADistanceEstimator, MuEstimate, MuEstimator, MuStrategy};
