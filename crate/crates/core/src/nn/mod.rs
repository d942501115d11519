//! Minimal deterministic neural-network kernel: dense and convolutional
//! layers with exact analytic gradients, momentum SGD, and classification
//! metrics. Everything is f64 and reproducible given a seed.

mod conv;
mod dense;
mod metrics;
mod optim;

pub use conv::{conv_stack_backward, conv_stack_forward, ConvCache, ConvLayer, ConvStack};
pub use dense::{
    cross_entropy_loss, init_mlp, mlp_forward, mlp_backward, softmax_rows, DenseLayer, MlpCache,
    MlpParams,
};
pub use metrics::{compute_metrics, Metrics};
pub use optim::{sgd_step, sgd_update_tensor, Velocity};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Forward-pass mode: dropout is active in `Train` and an identity in `Eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Provenance of a shared model update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateKind {
    /// One-batch gradient, as shared under FedSGD.
    RawGradient,
    /// Gradient reconstructed from a parameter delta, `(theta - theta_k) / (T * eta)`.
    PseudoGradient,
    /// Raw parameter delta `theta - theta_k`, as logged under FedAvg.
    ParamDelta,
}

impl UpdateKind {
    pub fn as_u8(self) -> u8 {
        match self {
            UpdateKind::RawGradient => 0,
            UpdateKind::PseudoGradient => 1,
            UpdateKind::ParamDelta => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<UpdateKind> {
        match v {
            0 => Ok(UpdateKind::RawGradient),
            1 => Ok(UpdateKind::PseudoGradient),
            2 => Ok(UpdateKind::ParamDelta),
            other => Err(Error::Data(format!("unknown update kind {other}"))),
        }
    }
}

/// Per-layer weight and bias update.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerUpdate {
    pub dw: Tensor,
    pub db: Tensor,
}

/// A shared model update: per-layer `(dW, db)` plus metadata identifying the
/// round and client that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub per_layer: Vec<LayerUpdate>,
    pub round: u32,
    pub client_index: u32,
    pub kind: UpdateKind,
}

impl ModelUpdate {
    pub fn zeros_like(params: &MlpParams, kind: UpdateKind) -> ModelUpdate {
        ModelUpdate {
            per_layer: params
                .layers()
                .iter()
                .map(|l| LayerUpdate {
                    dw: Tensor::zeros_like(&l.weight),
                    db: Tensor::zeros_like(&l.bias),
                })
                .collect(),
            round: 0,
            client_index: 0,
            kind,
        }
    }

    pub fn with_meta(mut self, round: u32, client_index: u32) -> ModelUpdate {
        self.round = round;
        self.client_index = client_index;
        self
    }

    pub fn shape_matches(&self, params: &MlpParams) -> bool {
        self.per_layer.len() == params.num_layers()
            && self
                .per_layer
                .iter()
                .zip(params.layers())
                .all(|(u, l)| u.dw.shape() == l.weight.shape() && u.db.shape() == l.bias.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.per_layer.iter().all(|l| l.dw.is_finite() && l.db.is_finite())
    }

    /// `self += alpha * other`, layer by layer.
    pub fn add_scaled(&mut self, other: &ModelUpdate, alpha: f64) {
        debug_assert_eq!(self.per_layer.len(), other.per_layer.len());
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            a.dw.add_scaled(&b.dw, alpha);
            a.db.add_scaled(&b.db, alpha);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.per_layer {
            l.dw.scale(s);
            l.db.scale(s);
        }
    }

    /// Total number of scalar entries across all layers.
    pub fn numel(&self) -> usize {
        self.per_layer.iter().map(|l| l.dw.len() + l.db.len()).sum()
    }
}
