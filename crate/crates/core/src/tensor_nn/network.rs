use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::activation::{leaky_relu_backward, leaky_relu_scalar, sigmoid_backward, sigmoid_scalar};
use super::batchnorm::{BatchNorm, BatchNormCache};
use super::conv::Conv2d;
use super::dropout::{apply_mask, check_rate, dropout_mask};
use super::pool::{max_pool2_backward, max_pool2_forward, PoolCache};
use super::{Mode, Scalar, Tensor4};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T = f32> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm<T>),
    LeakyRelu,
    Sigmoid,
    MaxPool2,
    Dropout(f64),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::LeakyRelu => "leaky_relu",
            Layer::Sigmoid => "sigmoid",
            Layer::MaxPool2 => "maxpool",
            Layer::Dropout(_) => "dropout",
        }
    }

    /// Trainable arrays, in gradient order.
    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            _ => Vec::new(),
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        let cv = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect::<Vec<U>>();
        match self {
            Layer::Conv(c) => Layer::Conv(Conv2d {
                kernel: c.kernel,
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                weight: cv(&c.weight),
                bias: cv(&c.bias),
            }),
            Layer::BatchNorm(b) => Layer::BatchNorm(BatchNorm {
                gamma: cv(&b.gamma),
                beta: cv(&b.beta),
                running_mean: cv(&b.running_mean),
                running_var: cv(&b.running_var),
                epsilon: b.epsilon,
                momentum: b.momentum,
            }),
            Layer::LeakyRelu => Layer::LeakyRelu,
            Layer::Sigmoid => Layer::Sigmoid,
            Layer::MaxPool2 => Layer::MaxPool2,
            Layer::Dropout(r) => Layer::Dropout(*r),
        }
    }
}

#[derive(Debug, Clone)]
enum LayerCache<T> {
    Input(Tensor4<T>),
    Output(Tensor4<T>),
    BatchNorm(BatchNormCache<T>),
    Pool(PoolCache),
    Mask(Option<Vec<T>>),
}

/// Everything `backward` needs from the forward pass that produced it.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    entries: Vec<LayerCache<T>>,
    input_dims: [usize; 4],
    output_dims: [usize; 4],
}

/// Per-layer parameter gradients (same nesting as [`Layer::params`]) plus
/// the gradient with respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<Vec<Vec<T>>>,
    pub input: Tensor4<T>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(net: &Network<T>, input_dims: [usize; 4]) -> Result<Self> {
        Ok(Self {
            layers: net
                .layers
                .iter()
                .map(|l| l.params().iter().map(|p| vec![T::zero(); p.len()]).collect())
                .collect(),
            input: Tensor4::zeros(input_dims)?,
        })
    }

    pub fn flat(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flatten().flatten()
    }

    pub fn scale(&mut self, k: T) {
        for v in self.layers.iter_mut().flatten().flatten() {
            *v *= k;
        }
    }
}

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    pub layers: Vec<Layer<T>>,
    pub exec: Exec,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self {
            layers,
            exec: Exec::default(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.params().iter().map(|p| p.len()).sum::<usize>())
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(Layer::cast).collect(),
            exec: self.exec,
        }
    }

    /// Stateless inference: dropout is identity and batch norm uses its
    /// running statistics.
    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        x.ensure_finite("network input")?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Conv(c) => c.forward(&cur, self.exec)?,
                Layer::BatchNorm(b) => b.infer(&cur)?,
                Layer::LeakyRelu => cur.map(leaky_relu_scalar),
                Layer::Sigmoid => cur.map(sigmoid_scalar),
                Layer::MaxPool2 => max_pool2_forward(&cur)?.0,
                Layer::Dropout(_) => cur,
            };
        }
        Ok(cur)
    }

    /// Forward pass that records what `backward` needs. In train mode
    /// batch norm uses batch statistics (and updates its running averages)
    /// and dropout draws masks from `rng`.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor4<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor4<T>, ForwardCache<T>)> {
        x.ensure_finite("network input")?;
        let exec = self.exec;
        let mut entries = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in self.layers.iter_mut() {
            let (next, entry) = match layer {
                Layer::Conv(c) => (c.forward(&cur, exec)?, LayerCache::Input(cur)),
                Layer::BatchNorm(b) => {
                    let (y, cache) = b.forward(&cur, mode)?;
                    (y, LayerCache::BatchNorm(cache))
                }
                Layer::LeakyRelu => (cur.map(leaky_relu_scalar), LayerCache::Input(cur)),
                Layer::Sigmoid => {
                    let y = cur.map(sigmoid_scalar);
                    (y.clone(), LayerCache::Output(y))
                }
                Layer::MaxPool2 => {
                    let (y, cache) = max_pool2_forward(&cur)?;
                    (y, LayerCache::Pool(cache))
                }
                Layer::Dropout(rate) => {
                    check_rate(*rate)?;
                    if mode == Mode::Train && *rate > 0.0 {
                        let mask = dropout_mask(cur.data().len(), *rate, rng);
                        (apply_mask(&cur, &mask)?, LayerCache::Mask(Some(mask)))
                    } else {
                        (cur, LayerCache::Mask(None))
                    }
                }
            };
            entries.push(entry);
            cur = next;
        }
        let cache = ForwardCache {
            entries,
            input_dims: x.dims(),
            output_dims: cur.dims(),
        };
        Ok((cur, cache))
    }

    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Tensor4<T>) -> Result<GradientSet<T>> {
        if cache.entries.len() != self.layers.len() {
            return Err(Error::Cache(format!(
                "cache holds {} layers, network has {}",
                cache.entries.len(),
                self.layers.len()
            )));
        }
        if upstream.dims() != cache.output_dims {
            return Err(Error::Cache(format!(
                "upstream gradient {:?} does not match forward output {:?}",
                upstream.dims(),
                cache.output_dims
            )));
        }
        let mut grads: Vec<Vec<Vec<T>>> = vec![Vec::new(); self.layers.len()];
        let mut g = upstream.clone();
        for (idx, (layer, entry)) in self.layers.iter().zip(&cache.entries).enumerate().rev() {
            g = match (layer, entry) {
                (Layer::Conv(c), LayerCache::Input(x)) => {
                    let (dx, dw, db) = c.backward(x, &g, self.exec)?;
                    grads[idx] = vec![dw, db];
                    dx
                }
                (Layer::BatchNorm(b), LayerCache::BatchNorm(bc)) => {
                    let (dx, dgamma, dbeta) = b.backward(bc, &g)?;
                    grads[idx] = vec![dgamma, dbeta];
                    dx
                }
                (Layer::LeakyRelu, LayerCache::Input(x)) => leaky_relu_backward(x, &g)?,
                (Layer::Sigmoid, LayerCache::Output(y)) => sigmoid_backward(y, &g)?,
                (Layer::MaxPool2, LayerCache::Pool(pc)) => max_pool2_backward(pc, &g)?,
                (Layer::Dropout(_), LayerCache::Mask(mask)) => match mask {
                    Some(m) => apply_mask(&g, m)?,
                    None => g,
                },
                (l, _) => {
                    return Err(Error::Cache(format!(
                        "layer {idx} ({}) has a cache entry of the wrong kind",
                        l.kind()
                    )))
                }
            };
        }
        if g.dims() != cache.input_dims {
            return Err(Error::Cache("input gradient shape mismatch".into()));
        }
        Ok(GradientSet {
            layers: grads,
            input: g,
        })
    }
}
