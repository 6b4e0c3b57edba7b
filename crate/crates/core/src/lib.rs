//! Compressing dense feed-forward networks by replacing each layer's neurons
//! with a small reweighted subset drawn by sensitivity sampling.
//!
//! A layer's neurons are viewed as weighted points ([`WeightedSet`]): each
//! point is a neuron's incoming weights (plus bias), weighted by the outgoing
//! weights it feeds to the next layer. [`sampler::coreset_layer`] keeps a
//! sample of them and reweights the survivors so that every next-layer
//! pre-activation is estimated without bias.

mod error;

pub mod activation;
pub mod baselines;
pub mod eval;
pub mod lowerbound;
pub mod network;
pub mod pruning;
pub mod sampler;
pub mod seed;
pub mod weighted;

pub use activation::Activation;
pub use baselines::BaselineScheme;
pub use error::{Error, Result};
pub use network::{Dataset, DenseLayer, DenseNetwork};
pub use pruning::{prune_network, PruneConfig, PruneReport, Scheme};
pub use sampler::{coreset_layer, coreset_single, Coreset, SensitivityDistribution};
pub use weighted::{QueryBall, WeightedPoint, WeightedSet};
