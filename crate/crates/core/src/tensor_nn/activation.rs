use crate::error::{shape_err, Result};

use super::{Scalar, Tensor4};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.1;

pub fn leaky_relu_scalar<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * T::of(LEAKY_SLOPE)
    }
}

/// Logistic function, kept strictly inside (0, 1) even where the float type
/// would round to an endpoint.
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    let one = T::one();
    let y = if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    };
    let hi = one - T::epsilon() / T::of(2.0);
    y.max(T::min_positive_value()).min(hi)
}

pub fn leaky_relu_backward<T: Scalar>(x: &Tensor4<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    if x.dims() != dy.dims() {
        return shape_err("leaky relu gradient shape mismatch");
    }
    let slope = T::of(LEAKY_SLOPE);
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { g * slope })
        .collect();
    Tensor4::from_vec(x.dims(), data)
}

/// Takes the forward *output*.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    if y.dims() != dy.dims() {
        return shape_err("sigmoid gradient shape mismatch");
    }
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor4::from_vec(y.dims(), data)
}
