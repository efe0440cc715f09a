use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_nn::{DEFAULT_EPSILON, DEFAULT_MOMENTUM};

/// One entry of the layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
    },
    BatchNorm,
    LeakyRelu,
    Sigmoid,
    MaxPool,
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    fn conv(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv {
            kernel,
            in_channels,
            out_channels,
        }
    }
}

/// Network geometry and layer stack. Serialized into every weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Input frames are `input_size × input_size × 3`.
    pub input_size: usize,
    /// Output grids are `grid_size × grid_size × 2`.
    pub grid_size: usize,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub bn_epsilon: f64,
    #[serde(default = "default_bn_momentum")]
    pub bn_momentum: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPSILON
}
fn default_bn_momentum() -> f64 {
    DEFAULT_MOMENTUM
}

pub const REFERENCE_WIDTHS: [usize; 5] = [16, 32, 64, 128, 256];
pub const DESK_WIDTHS: [usize; 5] = [8, 16, 16, 32, 32];
pub const DROPOUT_RATE: f64 = 0.2;

impl NetConfig {
    /// 416-pixel input, 26-cell grid, widths 16..256: 1,091,202 parameters.
    pub fn reference() -> Self {
        Self::standard(416, 26, &REFERENCE_WIDTHS, 0)
    }

    /// 128-pixel input, 8-cell grid, narrower layers; trains on a CPU in
    /// minutes.
    pub fn desk() -> Self {
        Self::standard(128, 8, &DESK_WIDTHS, 0)
    }

    /// The standard stack: one `conv5x5 → BN → leaky ReLU` block per width,
    /// a 2×2 pool after each of the first `log2(input/grid)` blocks, dropout
    /// after the last two blocks, then a 1×1 convolution to two channels and
    /// a sigmoid. Geometry errors surface in [`NetConfig::validate`].
    pub fn standard(input_size: usize, grid_size: usize, widths: &[usize], seed: u64) -> Self {
        let ratio = if grid_size > 0 { input_size / grid_size } else { 0 };
        let pools = if ratio.is_power_of_two() {
            ratio.trailing_zeros() as usize
        } else {
            0
        };
        let mut layers = Vec::new();
        let mut ch = 3;
        for (idx, &w) in widths.iter().enumerate() {
            layers.push(LayerSpec::conv(5, ch, w));
            layers.push(LayerSpec::BatchNorm);
            layers.push(LayerSpec::LeakyRelu);
            if idx + 2 >= widths.len() {
                layers.push(LayerSpec::Dropout { rate: DROPOUT_RATE });
            }
            if idx < pools {
                layers.push(LayerSpec::MaxPool);
            }
            ch = w;
        }
        layers.push(LayerSpec::conv(1, ch, 2));
        layers.push(LayerSpec::Sigmoid);
        Self {
            input_size,
            grid_size,
            layers,
            seed,
            bn_epsilon: DEFAULT_EPSILON,
            bn_momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Pixels per grid cell.
    pub fn cell_size(&self) -> usize {
        self.input_size / self.grid_size
    }

    /// Checks every structural rule; the error names the violated one.
    pub fn validate(&self) -> Result<()> {
        let fail = |rule: &str| Err(Error::Config(rule.to_string()));
        if self.input_size == 0 || self.grid_size == 0 {
            return fail("input_size and grid_size must be >= 1");
        }
        if self.input_size % self.grid_size != 0 {
            return fail(&format!(
                "input_size {} is not divisible by grid_size {}",
                self.input_size, self.grid_size
            ));
        }
        if !(self.bn_epsilon > 0.0) {
            return fail("bn_epsilon must be > 0");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return fail("bn_momentum must be in (0, 1)");
        }
        let n = self.layers.len();
        if n < 2 {
            return fail("layer stack must end with a 1x1 convolution and a sigmoid");
        }
        match (&self.layers[n - 2], &self.layers[n - 1]) {
            (
                LayerSpec::Conv {
                    kernel: 1,
                    out_channels: 2,
                    ..
                },
                LayerSpec::Sigmoid,
            ) => {}
            _ => return fail("final layers must be a 1x1 convolution to 2 channels followed by a sigmoid"),
        }

        let mut channels = 3usize;
        let mut downsample = 1usize;
        let mut last_hidden_width = 0usize;
        for (idx, layer) in self.layers.iter().enumerate() {
            let is_final_conv = idx == n - 2;
            match layer {
                LayerSpec::Conv {
                    kernel,
                    in_channels,
                    out_channels,
                } => {
                    if *in_channels != channels {
                        return fail(&format!(
                            "layer {idx}: convolution expects {in_channels} input channels but receives {channels}"
                        ));
                    }
                    if *out_channels == 0 {
                        return fail(&format!("layer {idx}: convolution has zero output channels"));
                    }
                    if !is_final_conv {
                        if *kernel != 5 {
                            return fail(&format!("layer {idx}: hidden convolutions must be 5x5"));
                        }
                        if *out_channels < last_hidden_width {
                            return fail(&format!(
                                "layer {idx}: hidden convolution widths must be nondecreasing ({last_hidden_width} -> {out_channels})"
                            ));
                        }
                        let activated = match (self.layers.get(idx + 1), self.layers.get(idx + 2)) {
                            (Some(LayerSpec::LeakyRelu), _) => true,
                            (Some(LayerSpec::BatchNorm), Some(LayerSpec::LeakyRelu)) => true,
                            _ => false,
                        };
                        if !activated {
                            return fail(&format!(
                                "layer {idx}: hidden convolutions must be followed by a leaky ReLU (optionally after batch norm)"
                            ));
                        }
                        last_hidden_width = *out_channels;
                    }
                    channels = *out_channels;
                }
                LayerSpec::Sigmoid if idx != n - 1 => {
                    return fail(&format!("layer {idx}: sigmoid is only allowed as the final activation"));
                }
                LayerSpec::MaxPool => downsample *= 2,
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(rate) => {
                    return fail(&format!("layer {idx}: dropout rate {rate} outside [0, 1)"));
                }
                _ => {}
            }
        }
        let want = self.input_size / self.grid_size;
        if downsample != want {
            return fail(&format!(
                "pooling downsamples by {downsample} but input_size/grid_size = {want}"
            ));
        }
        Ok(())
    }

    /// Trainable-parameter total from the per-layer formulas:
    /// `k²·in·out + out` per convolution, `2·channels` per batch norm.
    pub fn param_count(&self) -> usize {
        let mut channels = 3;
        let mut total = 0;
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv {
                    kernel,
                    in_channels,
                    out_channels,
                } => {
                    total += kernel * kernel * in_channels * out_channels + out_channels;
                    channels = *out_channels;
                }
                LayerSpec::BatchNorm => total += 2 * channels,
                _ => {}
            }
        }
        total
    }
}
