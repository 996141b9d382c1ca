//! Nonparametric variational inference.
//!
//! The posterior over a continuous parameter vector is approximated by a
//! uniformly weighted mixture of isotropic Gaussians. Component means and
//! bandwidths are fitted by alternating L-BFGS maximization of two
//! approximate evidence lower bounds: a first-order one for the means and a
//! second-order (delta method) one for the bandwidths. The entropy of the
//! mixture is replaced by a Jensen lower bound built from Gaussian
//! self-convolutions.
//!
//! Besides the engine itself the crate ships
//!
//! * the model contract ([`LogJointModel`]) with coordinate-wise transforms
//!   for bounded parameters,
//! * target models (Gaussians, a skewed bivariate-t mixture, hierarchical
//!   logistic regression and topographic latent source analysis),
//! * MAP, diagonal Laplace and HMC baselines,
//! * numerical oracles (finite differences, Monte Carlo entropy, grid
//!   quadrature) used to check all of the above.

pub mod baselines;
pub mod elbo;
mod error;
pub mod fit;
pub mod math;
pub mod mixture;
pub mod model;
pub mod models;
pub mod oracles;
pub mod optim;
pub mod transform;

pub use error::{Error, Result};
pub use fit::{fit, FitResult, MeanUpdate, NpvConfig};
pub use mixture::MixtureApproximation;
pub use model::{Derivatives, Evaluation, LogJointModel, ParameterVector};
pub use transform::{Transform, TransformSpec, TransformedModel};
