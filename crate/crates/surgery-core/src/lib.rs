//! Desk-scale laboratory for joint unlearning, updating, and retention
//! training of a small decoder-only language model, with synthetic
//! biography corpora, likelihood-scored MCQA benchmarks, and
//! activation-pattern analysis.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod objective;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{
    forward_on_tape, init_params, sequence_log_likelihood, ActivationCapture, LeasedParams,
    ModelConfig, ModelParams, ParamBuf, Provenance, BOS, EOS, PAD,
};
pub use tensor::{gradient_check, GradTape, Scalar, Tensor};
