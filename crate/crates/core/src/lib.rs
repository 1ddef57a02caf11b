//! Distributions over combinatorial structures produced by recursive
//! algorithms driven by exponential utilities.
//!
//! A structure is described by a [`Structure`] definition. Running it on
//! utilities `E_k ~ Exp(λ_k)` yields a value and the [`Trace`] of argmin
//! winners; the trace has a closed-form log-probability and score, and
//! utilities can be resampled conditionally on it.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod error;
pub mod estimators;
pub mod oracle;
pub mod perturb;
pub mod recursion;
pub mod rng;
pub mod scalar;
pub mod structures;

pub use error::{Error, Result};
pub use estimators::{
    check_control_variate, grad_e_reinforce, grad_loo, grad_relax, grad_t_reinforce, ControlVariate,
    EstimatorOptions, EstimatorReport, QuadraticCv, Space, ZeroCv,
};
pub use oracle::{enumerate, enumerate_at, exact_expected_loss, exact_gradient, expected_loss, EnumeratedDistribution};
pub use perturb::{sample_utilities, Key, Rate, ThetaVector, Utilities};
pub use recursion::{
    cond_jacobian_vjp, cond_sample, run_struct, trace_log_prob, trace_score, CondBuildRecord, Structure, Trace,
    TraceEvent,
};
pub use rng::SeedStream;
pub use scalar::Scalar;

pub type Theta = ThetaVector<f64>;
pub type Utils = Utilities<f64>;
pub type Report = EstimatorReport<f64>;
pub type Distribution<V> = EnumeratedDistribution<V, f64>;
