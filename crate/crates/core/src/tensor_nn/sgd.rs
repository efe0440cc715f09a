use crate::error::{shape_err, Error, Result};

use super::{GradientSet, Network, Scalar};

/// One momentum-SGD update on a single array:
/// `v <- momentum * v + g; p <- p - lr * v`.
pub fn sgd_step<T: Scalar>(param: &mut [T], grad: &[T], velocity: &mut [T], lr: f64, momentum: f64) -> Result<()> {
    check_hyper(lr, momentum)?;
    if param.len() != grad.len() || param.len() != velocity.len() {
        return shape_err(format!(
            "sgd: param {} / grad {} / velocity {} lengths differ",
            param.len(),
            grad.len(),
            velocity.len()
        ));
    }
    let (lr, mu) = (T::of(lr), T::of(momentum));
    for ((p, &g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = mu * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

fn check_hyper(lr: f64, momentum: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Param(format!("learning rate must be >= 0, got {lr}")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Param(format!("momentum must be in [0, 1), got {momentum}")));
    }
    Ok(())
}

/// Momentum SGD over every trainable array of a network.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(net: &Network<T>, lr: f64, momentum: f64) -> Result<Self> {
        check_hyper(lr, momentum)?;
        Ok(Self {
            lr,
            momentum,
            velocity: net
                .layers
                .iter()
                .map(|l| l.params().iter().map(|p| vec![T::zero(); p.len()]).collect())
                .collect(),
        })
    }

    pub fn step(&mut self, net: &mut Network<T>, grads: &GradientSet<T>) -> Result<()> {
        if grads.layers.len() != net.layers.len() || self.velocity.len() != net.layers.len() {
            return shape_err("sgd: gradient set does not mirror the network");
        }
        for ((layer, g), v) in net.layers.iter_mut().zip(&grads.layers).zip(self.velocity.iter_mut()) {
            let params = layer.params_mut();
            if params.len() != g.len() || params.len() != v.len() {
                return shape_err("sgd: per-layer array count mismatch");
            }
            for ((p, g), v) in params.into_iter().zip(g).zip(v.iter_mut()) {
                sgd_step(p, g, v, self.lr, self.momentum)?;
            }
        }
        Ok(())
    }
}
