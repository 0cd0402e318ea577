//! Federated continual-learning simulator for fresh and long-tail words.
//!
//! A toy slot-transducer recognizer is pretrained on a server corpus that
//! lacks a set of fresh words, then fine-tuned with federated rounds on
//! simulated user corrections. The crate exposes each piece of that loop:
//! wordlist filtering, probabilistic client sampling, client loss weighting,
//! cached-hypothesis MWER, checkpoint averaging and centralized mixing.

// Range checks are written `!(x >= 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mitigation;
pub mod model;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use model::{Hypothesis, LossReport, ParameterVector, Utterance, WordId};
