use crate::error::{shape_err, Result};

use super::{Mode, Scalar, Tensor4};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over the batch and spatial axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: f64,
    /// Weight of the current batch in the running-statistics update.
    pub momentum: f64,
}

/// Saved by a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub(crate) normalized: Tensor4<T>,
    pub(crate) inv_std: Vec<f64>,
    pub(crate) mode: Mode,
}

impl<T: Scalar> BatchNorm<T> {
    /// Identity transform: gamma 1, beta 0, running mean 0, running var 1.
    pub fn identity(channels: usize, epsilon: f64, momentum: f64) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            epsilon,
            momentum,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    fn check(&self, x: &Tensor4<T>) -> Result<()> {
        if x.channels() != self.channels() {
            return shape_err(format!(
                "batch norm over {} channels got {}",
                self.channels(),
                x.channels()
            ));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor4<T>, mode: Mode) -> Result<(Tensor4<T>, BatchNormCache<T>)> {
        self.check(x)?;
        let c = self.channels();
        let (mean, var) = match mode {
            Mode::Train => {
                let (mean, var) = channel_moments(x);
                let m = self.momentum;
                for ch in 0..c {
                    let rm = self.running_mean[ch].as_f64();
                    let rv = self.running_var[ch].as_f64();
                    self.running_mean[ch] = T::of((1.0 - m) * rm + m * mean[ch]);
                    self.running_var[ch] = T::of((1.0 - m) * rv + m * var[ch]);
                }
                (mean, var)
            }
            Mode::Infer => (
                self.running_mean.iter().map(|v| v.as_f64()).collect(),
                self.running_var.iter().map(|v| v.as_f64()).collect(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut normalized = x.clone();
        let mut out = x.clone();
        for (i, (nv, ov)) in normalized
            .data_mut()
            .iter_mut()
            .zip(out.data_mut().iter_mut())
            .enumerate()
        {
            let ch = i % c;
            let xh = (nv.as_f64() - mean[ch]) * inv_std[ch];
            *nv = T::of(xh);
            *ov = T::of(self.gamma[ch].as_f64() * xh + self.beta[ch].as_f64());
        }
        Ok((
            out,
            BatchNormCache {
                normalized,
                inv_std,
                mode,
            },
        ))
    }

    /// Infer-mode forward without touching any state.
    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check(x)?;
        let c = self.channels();
        let scale: Vec<f64> = (0..c)
            .map(|ch| self.gamma[ch].as_f64() / (self.running_var[ch].as_f64() + self.epsilon).sqrt())
            .collect();
        let shift: Vec<f64> = (0..c)
            .map(|ch| self.beta[ch].as_f64() - self.running_mean[ch].as_f64() * scale[ch])
            .collect();
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let ch = i % c;
            *v = T::of(v.as_f64() * scale[ch] + shift[ch]);
        }
        Ok(out)
    }

    /// Returns `(d input, d gamma, d beta)`.
    pub fn backward(&self, cache: &BatchNormCache<T>, dy: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<T>, Vec<T>)> {
        if dy.dims() != cache.normalized.dims() {
            return shape_err("batch norm upstream gradient does not match cached activation");
        }
        let c = self.channels();
        let count = (dy.data().len() / c) as f64;
        let mut dgamma = vec![0.0f64; c];
        let mut dbeta = vec![0.0f64; c];
        for (i, (&g, &xh)) in dy.data().iter().zip(cache.normalized.data()).enumerate() {
            let ch = i % c;
            dgamma[ch] += g.as_f64() * xh.as_f64();
            dbeta[ch] += g.as_f64();
        }
        let mut dx = dy.clone();
        for (i, (v, &xh)) in dx.data_mut().iter_mut().zip(cache.normalized.data()).enumerate() {
            let ch = i % c;
            let gamma = self.gamma[ch].as_f64();
            let g = v.as_f64();
            *v = T::of(match cache.mode {
                Mode::Infer => g * gamma * cache.inv_std[ch],
                // Sums of d(xhat) are gamma * dbeta and gamma * dgamma.
                Mode::Train => {
                    gamma * cache.inv_std[ch] / count
                        * (count * g - dbeta[ch] - xh.as_f64() * dgamma[ch])
                }
            });
        }
        Ok((
            dx,
            dgamma.into_iter().map(T::of).collect(),
            dbeta.into_iter().map(T::of).collect(),
        ))
    }
}

/// Per-channel mean and biased variance, accumulated in f64.
fn channel_moments<T: Scalar>(x: &Tensor4<T>) -> (Vec<f64>, Vec<f64>) {
    let c = x.channels();
    let count = (x.data().len() / c) as f64;
    let mut mean = vec![0.0; c];
    for (i, v) in x.data().iter().enumerate() {
        mean[i % c] += v.as_f64();
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; c];
    for (i, v) in x.data().iter().enumerate() {
        let d = v.as_f64() - mean[i % c];
        var[i % c] += d * d;
    }
    var.iter_mut().for_each(|v| *v /= count);
    (mean, var)
}
