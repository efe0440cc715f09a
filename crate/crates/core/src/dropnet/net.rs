use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result};
use crate::exec::Exec;
use crate::tensor_nn::{BatchNorm, Conv2d, Layer, Mode, Network, Tensor4};

use super::{LayerSpec, NetConfig, OutputGrid};

/// The drop-state network: a validated [`NetConfig`] and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DropNet {
    config: NetConfig,
    pub network: Network<f32>,
    pub mode: Mode,
}

impl DropNet {
    /// Validates `config` and initializes parameters from `config.seed`:
    /// He-normal conv weights, zero biases, identity batch norm.
    pub fn build(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut channels = 3;
        for spec in &config.layers {
            layers.push(match spec {
                LayerSpec::Conv {
                    kernel,
                    in_channels,
                    out_channels,
                } => {
                    channels = *out_channels;
                    Layer::Conv(Conv2d::he_init(*kernel, *in_channels, *out_channels, &mut rng)?)
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::identity(
                    channels,
                    config.bn_epsilon,
                    config.bn_momentum,
                )),
                LayerSpec::LeakyRelu => Layer::LeakyRelu,
                LayerSpec::Sigmoid => Layer::Sigmoid,
                LayerSpec::MaxPool => Layer::MaxPool2,
                LayerSpec::Dropout { rate } => Layer::Dropout(*rate),
            });
        }
        Ok(Self {
            config,
            network: Network::new(layers),
            mode: Mode::Infer,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn input_size(&self) -> usize {
        self.config.input_size
    }

    pub fn grid_size(&self) -> usize {
        self.config.grid_size
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.network.exec = exec;
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Number of trainable scalars actually stored.
    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    pub fn check_frames(&self, frames: &Tensor4<f32>) -> Result<()> {
        let w = self.config.input_size;
        if frames.sample_dims() != [w, w, 3] {
            return shape_err(format!(
                "network expects frames of {w}x{w}x3, got {:?}",
                frames.sample_dims()
            ));
        }
        Ok(())
    }

    /// Inference-mode forward pass, one grid per frame. Dropout is bypassed
    /// and batch norm uses running statistics regardless of `self.mode`.
    pub fn forward(&self, frames: &Tensor4<f32>) -> Result<Vec<OutputGrid>> {
        self.check_frames(frames)?;
        let out = self.network.infer(frames)?;
        Ok(OutputGrid::split(&out))
    }
}
