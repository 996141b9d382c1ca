//! Target distributions and their data generators.

mod data;
mod gaussian;
mod logistic;
mod tlsa;
mod tmix;

pub use data::{DatasetTable, Targets};
pub use gaussian::{gaussian_target, FlatTarget, FnModel, GaussianMixtureTarget, GaussianTarget};
pub use logistic::{
    logistic_log_joint, logistic_predict, logistic_test_log_likelihood, synth_logistic, LogisticJoint, LogisticModel,
    LogisticModelSpec, PredictiveEstimator,
};
pub use tlsa::{
    synth_tlsa, tlsa_basis, tlsa_log_joint, tlsa_reconstruct, unit_grid, TlsaJoint, TlsaModel, TlsaModelSpec, TlsaParams,
};
pub use tmix::{t_mixture_target, TComponent, TMixtureSpec, TMixtureTarget};
