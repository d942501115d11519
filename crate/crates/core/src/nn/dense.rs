//! Dense feed-forward network with ReLU hidden layers, inverted dropout, and
//! softmax cross-entropy, plus its exact analytic backward pass.

use crate::error::{Error, Result};
use crate::nn::{LayerUpdate, Mode, ModelUpdate, UpdateKind};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One dense layer. Weights are `(fan_in, fan_out)` row-major; the forward
/// pass computes `x * W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Ordered dense layers. All layers but the last are followed by ReLU and
/// (in train mode) inverted dropout; the last layer emits raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<DenseLayer>,
}

impl MlpParams {
    pub fn from_layers(layers: Vec<DenseLayer>) -> MlpParams {
        MlpParams { layers }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("empty mlp").weight.cols()
    }

    /// Layer widths, input first: `(input, hidden..., classes)`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.weight.cols()));
        d
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    /// Flat view of every parameter tensor, weights before biases per layer.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// Initialize an MLP with uniform fan-in/fan-out scaled weights
/// (`U[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`) and zero
/// biases. Deterministic given `rng`.
pub fn init_mlp(dims: &[usize], rng: &mut Rng) -> Result<MlpParams> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "mlp needs at least input and output widths, got {dims:?}"
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Config(format!("zero layer width in {dims:?}")));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut weight = Tensor::zeros(&[fan_in, fan_out]);
        for v in weight.data_mut() {
            *v = rng.uniform(-limit, limit);
        }
        layers.push(DenseLayer {
            weight,
            bias: Tensor::zeros(&[fan_out]),
        });
    }
    Ok(MlpParams { layers })
}

/// Activation record from a forward pass, needed for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Tensor,
    /// Pre-activations per layer (logits for the last layer).
    zs: Vec<Tensor>,
    /// Post-ReLU, post-dropout activations per hidden layer.
    acts: Vec<Tensor>,
    /// Scaled dropout masks (0 or 1/(1-p)) per hidden layer, when active.
    masks: Vec<Option<Tensor>>,
    mode: Mode,
}

impl MlpCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn matches(&self, params: &MlpParams) -> bool {
        self.zs.len() == params.num_layers()
            && self.input.cols() == params.input_dim()
            && self
                .zs
                .iter()
                .zip(params.layers())
                .all(|(z, l)| z.cols() == l.weight.cols() && z.rows() == self.input.rows())
    }
}

/// Forward pass over a `(batch, input_dim)` matrix.
///
/// `dropout` holds one rate per hidden layer. In eval mode dropout is an
/// identity and `rng` is not consumed; in train mode surviving activations are
/// scaled by `1/(1-p)` and the mask is recorded in the cache.
pub fn mlp_forward(
    params: &MlpParams,
    batch: &Tensor,
    dropout: &[f64],
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor, MlpCache)> {
    if batch.rank() != 2 {
        return Err(Error::Shape(format!(
            "batch must be rank 2, got rank {}",
            batch.rank()
        )));
    }
    if batch.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} columns, model expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    let hidden = params.num_layers() - 1;
    if dropout.len() != hidden {
        return Err(Error::Config(format!(
            "need {hidden} dropout rates (one per hidden layer), got {}",
            dropout.len()
        )));
    }
    if let Some(p) = dropout.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(Error::Config(format!("dropout rate {p} outside [0, 1)")));
    }

    let mut zs = Vec::with_capacity(params.num_layers());
    let mut acts = Vec::with_capacity(hidden);
    let mut masks = Vec::with_capacity(hidden);
    let mut current = batch.clone();

    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = current.matmul(&layer.weight);
        add_bias_rows(&mut z, &layer.bias);
        if i == hidden {
            zs.push(z.clone());
            current = z;
            break;
        }
        zs.push(z.clone());
        let mut a = z;
        for v in a.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let p = dropout[i];
        let mask = if mode == Mode::Train && p > 0.0 {
            let scale = 1.0 / (1.0 - p);
            let mut m = Tensor::zeros_like(&a);
            for v in m.data_mut() {
                *v = if rng.chance(1.0 - p) { scale } else { 0.0 };
            }
            for (av, mv) in a.data_mut().iter_mut().zip(m.data()) {
                *av *= mv;
            }
            Some(m)
        } else {
            None
        };
        acts.push(a.clone());
        masks.push(mask);
        current = a;
    }

    let logits = current;
    let cache = MlpCache {
        input: batch.clone(),
        zs,
        acts,
        masks,
        mode,
    };
    Ok((logits, cache))
}

/// Row-wise softmax with max-shift for stability.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let (rows, cols) = (logits.rows(), logits.cols());
    let mut out = logits.clone();
    for r in 0..rows {
        let row = &mut out.data_mut()[r * cols..(r + 1) * cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy of `logits` against integer labels.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let (rows, cols) = (logits.rows(), logits.cols());
    if labels.len() != rows {
        return Err(Error::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            rows
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= cols) {
        return Err(Error::Data(format!("label {bad} out of range for {cols} classes")));
    }
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        loss -= probs.at2(r, label).max(f64::MIN_POSITIVE).ln();
    }
    Ok(loss / rows as f64)
}

/// Backward pass: mean softmax cross-entropy loss and exact gradients for
/// every weight and bias, with the cached dropout masks applied.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    labels: &[usize],
) -> Result<(f64, ModelUpdate)> {
    if cache.mode != Mode::Train {
        return Err(Error::Config(
            "backward pass requires a cache from a train-mode forward".into(),
        ));
    }
    if !cache.matches(params) {
        return Err(Error::Shape(
            "forward cache does not match these parameters".into(),
        ));
    }
    let logits = cache.zs.last().expect("cache has no layers");
    let batch = logits.rows();
    let loss = cross_entropy_loss(logits, labels)?;

    // d(loss)/d(logits) = (softmax - onehot) / batch
    let mut delta = softmax_rows(logits);
    {
        let cols = delta.cols();
        let inv = 1.0 / batch as f64;
        for (r, &label) in labels.iter().enumerate() {
            let row = &mut delta.data_mut()[r * cols..(r + 1) * cols];
            row[label] -= 1.0;
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
    }

    let n_layers = params.num_layers();
    let mut per_layer = vec![
        LayerUpdate {
            dw: Tensor::zeros(&[0]),
            db: Tensor::zeros(&[0]),
        };
        n_layers
    ];
    for i in (0..n_layers).rev() {
        let layer_input = if i == 0 { &cache.input } else { &cache.acts[i - 1] };
        let dw = layer_input.matmul_tn(&delta);
        let db = column_sums(&delta);
        per_layer[i] = LayerUpdate { dw, db };
        if i == 0 {
            break;
        }
        // push delta through the weights, dropout mask, and ReLU gate
        let mut da = delta.matmul_nt(&params.layers[i].weight);
        if let Some(mask) = &cache.masks[i - 1] {
            for (v, m) in da.data_mut().iter_mut().zip(mask.data()) {
                *v *= m;
            }
        }
        let z = &cache.zs[i - 1];
        for (v, zv) in da.data_mut().iter_mut().zip(z.data()) {
            if *zv <= 0.0 {
                *v = 0.0;
            }
        }
        delta = da;
    }

    Ok((
        loss,
        ModelUpdate {
            per_layer,
            round: 0,
            client_index: 0,
            kind: UpdateKind::RawGradient,
        },
    ))
}

fn add_bias_rows(z: &mut Tensor, bias: &Tensor) {
    let (rows, cols) = (z.rows(), z.cols());
    debug_assert_eq!(bias.len(), cols);
    for r in 0..rows {
        let row = &mut z.data_mut()[r * cols..(r + 1) * cols];
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
}

fn column_sums(m: &Tensor) -> Tensor {
    let (rows, cols) = (m.rows(), m.cols());
    let mut out = Tensor::zeros(&[cols]);
    for r in 0..rows {
        for c in 0..cols {
            out.data_mut()[c] += m.at2(r, c);
        }
    }
    out
}
