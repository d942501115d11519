//! Federated-learning simulator and attribute-inference attack harness.
//!
//! The crate trains a small emotion classifier under FedSGD or FedAvg over
//! simulated clients, records every shared model update an eavesdropper would
//! see, and implements the shadow-training attack that infers a client's
//! gender from those updates:
//!
//! - [`nn`]: deterministic dense/conv network kernel with exact analytic
//!   gradients, momentum SGD, and UAR-centric metrics.
//! - [`data`]: synthetic speaker corpora with a controllable attribute-leakage
//!   dial, per-speaker z-normalization, client sharding, speaker-disjoint
//!   folds, and a binary corpus format.
//! - [`fl`]: the federated server loop for both aggregation rules, update
//!   logging, and run persistence.
//! - [`attack`]: pseudo-gradients, shadow training, the per-layer CNN attack
//!   model with weighted fusion, and the dropout sweep.
//! - [`experiment`]: seeded end-to-end pipelines behind the `fedleak` CLI.

pub mod attack;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fl;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
