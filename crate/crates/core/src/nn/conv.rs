//! Stacked 2-D convolution stages: same-padded odd-kernel convolution, ReLU,
//! inverted dropout, then 2x max-pooling applied per spatial dimension only
//! when that dimension is at least 2. Convolutions run as im2col + GEMM; the
//! backward pass is analytic and mirrors [`super::mlp_backward`].

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::nn::{LayerUpdate, Mode};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One convolution layer: `weight` is `(out_c, in_c, k, k)`, `bias` per
/// output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A sequence of convolution stages with a shared odd kernel size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack {
    layers: Vec<ConvLayer>,
    kernel: usize,
}

impl ConvStack {
    /// Build a stack from a channel progression such as `[1, 16, 32, 64]`.
    /// Weights use uniform fan-in/fan-out scaling, biases start at zero.
    pub fn new(channels: &[usize], kernel: usize, rng: &mut Rng) -> Result<ConvStack> {
        if channels.len() < 2 {
            return Err(Error::Config("conv stack needs at least one stage".into()));
        }
        if channels.iter().any(|&c| c == 0) {
            return Err(Error::Config(format!("zero channel count in {channels:?}")));
        }
        if kernel % 2 == 0 || kernel == 0 {
            return Err(Error::Config(format!("kernel size {kernel} must be odd")));
        }
        let mut layers = Vec::with_capacity(channels.len() - 1);
        for pair in channels.windows(2) {
            let (in_c, out_c) = (pair[0], pair[1]);
            let fan_in = (in_c * kernel * kernel) as f64;
            let fan_out = (out_c * kernel * kernel) as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            let mut weight = Tensor::zeros(&[out_c, in_c, kernel, kernel]);
            for v in weight.data_mut() {
                *v = rng.uniform(-limit, limit);
            }
            layers.push(ConvLayer {
                weight,
                bias: Tensor::zeros(&[out_c]),
            });
        }
        Ok(ConvStack { layers, kernel })
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].weight.shape()[1]
    }

    /// Spatial dims and flattened length after all stages for a `(h, w)` input.
    pub fn output_extent(&self, h: usize, w: usize) -> (usize, usize, usize) {
        let (mut h, mut w) = (h, w);
        for _ in &self.layers {
            h = pooled_extent(h);
            w = pooled_extent(w);
        }
        let out_c = self.layers.last().expect("empty stack").weight.shape()[0];
        (h, w, out_c * h * w)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.is_finite())
    }
}

fn pooled_extent(dim: usize) -> usize {
    if dim >= 2 {
        dim / 2
    } else {
        dim
    }
}

struct StageCache {
    /// Input to this stage, `(in_c, h, w)`.
    input: Tensor,
    /// Combined ReLU gate and dropout scale per conv output element.
    grad_mask: Tensor,
    /// Flat `y*w + x` argmax per pooled cell, `(out_c, ph, pw)` order.
    pool_src: Vec<u32>,
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
}

/// Activation record for [`conv_stack_backward`].
pub struct ConvCache {
    stages: Vec<StageCache>,
    mode: Mode,
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<f64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Run the stack over a `(channels, h, w)` input and flatten the result.
///
/// Dropout applies after each stage's ReLU in train mode only. Returns the
/// flattened feature vector and the cache for the backward pass.
pub fn conv_stack_forward(
    stack: &ConvStack,
    input: &Tensor,
    dropout: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor, ConvCache)> {
    if input.rank() != 3 {
        return Err(Error::Shape(format!(
            "conv input must be rank 3 (channels, h, w), got rank {}",
            input.rank()
        )));
    }
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::Shape(format!("non-positive conv input extents ({c}, {h}, {w})")));
    }
    if c != stack.input_channels() {
        return Err(Error::Shape(format!(
            "input has {c} channels, stack expects {}",
            stack.input_channels()
        )));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Config(format!("dropout rate {dropout} outside [0, 1)")));
    }

    let k = stack.kernel;
    let mut stages = Vec::with_capacity(stack.layers.len());
    let mut current = input.clone();

    for layer in &stack.layers {
        let (in_c, h, w) = (
            current.shape()[0],
            current.shape()[1],
            current.shape()[2],
        );
        let out_c = layer.weight.shape()[0];
        let pixels = h * w;

        // conv as GEMM over the unrolled input
        let mut act = Tensor::zeros(&[out_c, h, w]);
        SCRATCH.with(|s| {
            let col = &mut s.borrow_mut().0;
            im2col(current.data(), in_c, h, w, k, col);
            for oc in 0..out_c {
                let b = layer.bias.data()[oc];
                act.data_mut()[oc * pixels..(oc + 1) * pixels].fill(b);
            }
            unsafe {
                matrixmultiply::dgemm(
                    out_c,
                    in_c * k * k,
                    pixels,
                    1.0,
                    layer.weight.data().as_ptr(),
                    (in_c * k * k) as isize,
                    1,
                    col.as_ptr(),
                    pixels as isize,
                    1,
                    1.0,
                    act.data_mut().as_mut_ptr(),
                    pixels as isize,
                    1,
                );
            }
        });

        // ReLU and dropout share one backward multiplier
        let mut grad_mask = Tensor::zeros(&[out_c, h, w]);
        let active = mode == Mode::Train && dropout > 0.0;
        let scale = 1.0 / (1.0 - dropout);
        for (a, m) in act.data_mut().iter_mut().zip(grad_mask.data_mut()) {
            if *a <= 0.0 {
                *a = 0.0;
                *m = 0.0;
            } else {
                *m = 1.0;
            }
            if active {
                if rng.chance(1.0 - dropout) {
                    *a *= scale;
                    *m *= scale;
                } else {
                    *a = 0.0;
                    *m = 0.0;
                }
            }
        }

        // 2x max-pool independently per spatial dimension when it is >= 2
        let (ph, pw) = (pooled_extent(h), pooled_extent(w));
        let (step_y, win_y) = if h >= 2 { (2, 2) } else { (1, 1) };
        let (step_x, win_x) = if w >= 2 { (2, 2) } else { (1, 1) };
        let mut pooled = Tensor::zeros(&[out_c, ph, pw]);
        let mut pool_src = vec![0u32; out_c * ph * pw];
        for oc in 0..out_c {
            let plane = &act.data()[oc * pixels..(oc + 1) * pixels];
            for py in 0..ph {
                for px in 0..pw {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for dy in 0..win_y {
                        for dx in 0..win_x {
                            let y = py * step_y + dy;
                            let x = px * step_x + dx;
                            let idx = y * w + x;
                            if plane[idx] > best {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    pooled.data_mut()[(oc * ph + py) * pw + px] = best;
                    pool_src[(oc * ph + py) * pw + px] = best_idx as u32;
                }
            }
        }

        stages.push(StageCache {
            input: current,
            grad_mask,
            pool_src,
            h,
            w,
            ph,
            pw,
        });
        current = pooled;
    }

    let flat_len = current.len();
    let flat = Tensor::from_vec(&[flat_len], current.into_data())?;
    Ok((flat, ConvCache { stages, mode }))
}

/// Backward pass through the whole stack. Returns per-layer `(dW, db)` and
/// the gradient with respect to the stack input.
pub fn conv_stack_backward(
    stack: &ConvStack,
    cache: &ConvCache,
    grad_flat: &Tensor,
) -> Result<(Vec<LayerUpdate>, Tensor)> {
    if cache.mode != Mode::Train {
        return Err(Error::Config(
            "backward pass requires a cache from a train-mode forward".into(),
        ));
    }
    if cache.stages.len() != stack.layers.len() {
        return Err(Error::Shape("conv cache does not match this stack".into()));
    }
    let last = cache.stages.last().expect("empty cache");
    let out_c = stack.layers.last().unwrap().weight.shape()[0];
    if grad_flat.len() != out_c * last.ph * last.pw {
        return Err(Error::Shape(format!(
            "flat gradient length {} does not match stack output {}",
            grad_flat.len(),
            out_c * last.ph * last.pw
        )));
    }

    let k = stack.kernel;
    let mut grads = Vec::with_capacity(stack.layers.len());
    let mut d_pooled = grad_flat.data().to_vec();

    for (layer, stage) in stack.layers.iter().zip(&cache.stages).rev() {
        let out_c = layer.weight.shape()[0];
        let in_c = layer.weight.shape()[1];
        let (h, w, ph, pw) = (stage.h, stage.w, stage.ph, stage.pw);
        let pixels = h * w;

        // unpool into the conv output grid, then gate through ReLU/dropout
        let mut dz = vec![0.0; out_c * pixels];
        for oc in 0..out_c {
            for p in 0..ph * pw {
                let src = stage.pool_src[oc * ph * pw + p] as usize;
                dz[oc * pixels + src] += d_pooled[oc * ph * pw + p];
            }
        }
        for (v, m) in dz.iter_mut().zip(stage.grad_mask.data()) {
            *v *= m;
        }

        let mut db = Tensor::zeros(&[out_c]);
        for oc in 0..out_c {
            db.data_mut()[oc] = dz[oc * pixels..(oc + 1) * pixels].iter().sum();
        }

        let mut dw = Tensor::zeros(&[out_c, in_c, k, k]);
        let mut d_input = vec![0.0; in_c * pixels];
        SCRATCH.with(|s| {
            let (col, dcol) = &mut *s.borrow_mut();
            im2col(stage.input.data(), in_c, h, w, k, col);
            // dW = dZ * col^T
            unsafe {
                matrixmultiply::dgemm(
                    out_c,
                    pixels,
                    in_c * k * k,
                    1.0,
                    dz.as_ptr(),
                    pixels as isize,
                    1,
                    col.as_ptr(),
                    1,
                    pixels as isize,
                    0.0,
                    dw.data_mut().as_mut_ptr(),
                    (in_c * k * k) as isize,
                    1,
                );
            }
            // dCol = W^T * dZ
            dcol.resize(in_c * k * k * pixels, 0.0);
            unsafe {
                matrixmultiply::dgemm(
                    in_c * k * k,
                    out_c,
                    pixels,
                    1.0,
                    layer.weight.data().as_ptr(),
                    1,
                    (in_c * k * k) as isize,
                    dz.as_ptr(),
                    pixels as isize,
                    1,
                    0.0,
                    dcol.as_mut_ptr(),
                    pixels as isize,
                    1,
                );
            }
            col2im(dcol, in_c, h, w, k, &mut d_input);
        });

        grads.push(LayerUpdate { dw, db });
        d_pooled = d_input;
    }

    grads.reverse();
    let first = &cache.stages[0];
    let d_input = Tensor::from_vec(
        &[stack.input_channels(), first.h, first.w],
        d_pooled,
    )?;
    Ok((grads, d_input))
}

/// Unroll a padded `(in_c, h, w)` image into a `(in_c*k*k, h*w)` matrix.
fn im2col(input: &[f64], in_c: usize, h: usize, w: usize, k: usize, col: &mut Vec<f64>) {
    let pad = k / 2;
    let pixels = h * w;
    col.resize(in_c * k * k * pixels, 0.0);
    for ci in 0..in_c {
        let plane = &input[ci * pixels..(ci + 1) * pixels];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * pixels;
                for y in 0..h {
                    let iy = y as isize + ky as isize - pad as isize;
                    let dst = &mut col[row + y * w..row + (y + 1) * w];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let ix = x as isize + kx as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add the unrolled gradient back onto the `(in_c, h, w)` grid.
fn col2im(dcol: &[f64], in_c: usize, h: usize, w: usize, k: usize, d_input: &mut [f64]) {
    let pad = k / 2;
    let pixels = h * w;
    for ci in 0..in_c {
        let plane = &mut d_input[ci * pixels..(ci + 1) * pixels];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * pixels;
                for y in 0..h {
                    let iy = y as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &dcol[row + y * w..row + (y + 1) * w];
                    for (x, s) in src.iter().enumerate() {
                        let ix = x as isize + kx as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            plane[iy as usize * w + ix as usize] += s;
                        }
                    }
                }
            }
        }
    }
}
