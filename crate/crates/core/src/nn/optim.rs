//! Momentum SGD. With momentum 0 this is plain SGD; the update rule is
//! `v <- momentum * v + g; theta <- theta - lr * v`.

use crate::error::{Error, Result};
use crate::nn::{MlpParams, ModelUpdate};
use crate::tensor::Tensor;

/// Momentum state mirroring an [`MlpParams`] layout.
#[derive(Debug, Clone)]
pub struct Velocity {
    per_layer: Vec<(Tensor, Tensor)>,
}

impl Velocity {
    pub fn zeros_like(params: &MlpParams) -> Velocity {
        Velocity {
            per_layer: params
                .layers()
                .iter()
                .map(|l| (Tensor::zeros_like(&l.weight), Tensor::zeros_like(&l.bias)))
                .collect(),
        }
    }
}

/// One tensor's momentum-SGD update.
pub fn sgd_update_tensor(param: &mut Tensor, grad: &Tensor, lr: f64, momentum: f64, vel: &mut Tensor) {
    debug_assert_eq!(param.shape(), grad.shape());
    debug_assert_eq!(param.shape(), vel.shape());
    for ((p, g), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(vel.data_mut())
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

/// Apply one momentum-SGD step to every layer.
pub fn sgd_step(
    params: &mut MlpParams,
    grads: &ModelUpdate,
    lr: f64,
    momentum: f64,
    velocity: &mut Velocity,
) -> Result<()> {
    if lr <= 0.0 {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Config(format!("momentum {momentum} outside [0, 1)")));
    }
    if !grads.shape_matches(params) {
        return Err(Error::Shape("gradient shapes do not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient entries".into()));
    }
    for (i, layer) in params.layers_mut().iter_mut().enumerate() {
        let (vw, vb) = &mut velocity.per_layer[i];
        sgd_update_tensor(&mut layer.weight, &grads.per_layer[i].dw, lr, momentum, vw);
        sgd_update_tensor(&mut layer.bias, &grads.per_layer[i].db, lr, momentum, vb);
    }
    Ok(())
}
