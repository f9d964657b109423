//! Stochastic inverse reinforcement learning over tabular MDPs.
//!
//! Instead of a single reward estimate, the learner recovers a Gaussian
//! mixture over linear reward weights. Fitting alternates between a Monte
//! Carlo first stage (short MaxEnt gradient ascents started from weights
//! drawn out of the current mixture) and an EM refit of the mixture on the
//! ascended weights.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below are what the experiment harness uses.

pub mod error;
pub mod gmm;
pub mod maxent;
pub mod mcem;
pub mod mdp;
pub mod objectworld;
pub mod robustness;
pub mod scalar;

mod util;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use util::mix_seed;

pub type TabularMdp64 = mdp::TabularMdp<f64>;
pub type TabularMdp32 = mdp::TabularMdp<f32>;
pub type Policy64 = mdp::Policy<f64>;
pub type ValueFunction64 = mdp::ValueFunction<f64>;
pub type FeatureMatrix64 = objectworld::FeatureMatrix<f64>;
pub type WeightVector64 = maxent::WeightVector<f64>;
pub type WeightVector32 = maxent::WeightVector<f32>;
pub type Gmm64 = gmm::Gmm<f64>;
pub type Gmm32 = gmm::Gmm<f32>;
pub type McemConfig64 = mcem::McemConfig<f64>;
pub type McemState64 = mcem::McemState<f64>;
pub type SolutionSet64 = robustness::SolutionSet<f64>;
