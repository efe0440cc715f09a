//! Minimal dense-tensor CNN kernel.
//!
//! Five layer kinds are supported (convolution with 1×1 or 5×5 kernels,
//! batch normalization, leaky ReLU / sigmoid activations, 2×2 max pooling,
//! inverted dropout), each with an analytic backward pass, plus momentum
//! SGD. Convolutions are im2col + GEMM, one sample at a time, so a sample's
//! result never depends on what else is in the batch.

mod activation;
mod batchnorm;
mod conv;
mod dropout;
mod network;
mod pool;
mod scalar;
mod sgd;
mod tensor;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use activation::{leaky_relu_scalar, sigmoid_scalar, LEAKY_SLOPE};
pub use batchnorm::{BatchNorm, BatchNormCache, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use conv::Conv2d;
pub use network::{ForwardCache, GradientSet, Layer, Network};
pub use pool::PoolCache;
pub use scalar::Scalar;
pub use sgd::{sgd_step, Sgd};
pub use tensor::Tensor4;

use crate::error::Result;
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Same-padded stride-1 convolution. Rejects non-finite input.
pub fn conv2d<T: Scalar>(input: &Tensor4<T>, params: &Conv2d<T>) -> Result<Tensor4<T>> {
    input.ensure_finite("conv2d input")?;
    params.forward(input, Exec::Sequential)
}

pub fn leaky_relu<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(leaky_relu_scalar)
}

pub fn sigmoid<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(sigmoid_scalar)
}

pub fn max_pool2<T: Scalar>(x: &Tensor4<T>) -> Result<(Tensor4<T>, PoolCache)> {
    pool::max_pool2_forward(x)
}

/// Train mode updates `params`' running statistics.
pub fn batch_norm<T: Scalar>(x: &Tensor4<T>, params: &mut BatchNorm<T>, mode: Mode) -> Result<Tensor4<T>> {
    Ok(params.forward(x, mode)?.0)
}

pub fn dropout<T: Scalar, R: Rng + ?Sized>(x: &Tensor4<T>, rate: f64, mode: Mode, rng: &mut R) -> Result<Tensor4<T>> {
    dropout::check_rate(rate)?;
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout::dropout_mask(x.data().len(), rate, rng);
    dropout::apply_mask(x, &mask)
}

#[cfg(test)]
mod tests;
