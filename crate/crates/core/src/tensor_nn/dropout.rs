use rand::Rng;

use crate::error::{Error, Result};

use super::{Scalar, Tensor4};

pub fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Param(format!("dropout rate must be in [0, 1), got {rate}")))
    }
}

/// Inverted-dropout mask: 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask<T: Scalar, R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            if rate > 0.0 && rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

pub fn apply_mask<T: Scalar>(x: &Tensor4<T>, mask: &[T]) -> Result<Tensor4<T>> {
    if mask.len() != x.data().len() {
        return Err(Error::Cache("dropout mask length mismatch".into()));
    }
    let data = x.data().iter().zip(mask).map(|(&v, &m)| v * m).collect();
    Tensor4::from_vec(x.dims(), data)
}
