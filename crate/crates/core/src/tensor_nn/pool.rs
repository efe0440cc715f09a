use crate::error::{shape_err, Result};

use super::{Scalar, Tensor4};

/// Flat input offsets of each pooled maximum.
#[derive(Debug, Clone)]
pub struct PoolCache {
    pub(crate) argmax: Vec<usize>,
    pub(crate) input_dims: [usize; 4],
}

/// 2×2 max pooling with stride 2. Ties resolve to the first element in
/// row-major order within the window.
pub fn max_pool2_forward<T: Scalar>(x: &Tensor4<T>) -> Result<(Tensor4<T>, PoolCache)> {
    let [n, h, w, c] = x.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return shape_err(format!("max pooling needs even spatial dims, got {h}x{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([n, oh, ow, c])?;
    let mut argmax = vec![0usize; n * oh * ow * c];
    let src = x.data();
    for b in 0..n {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..c {
                    let mut best = x.offset(b, 2 * y, 2 * xx, ch);
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let o = x.offset(b, 2 * y + dy, 2 * xx + dx, ch);
                        if src[o] > src[best] {
                            best = o;
                        }
                    }
                    let oo = out.offset(b, y, xx, ch);
                    out.data_mut()[oo] = src[best];
                    argmax[oo] = best;
                }
            }
        }
    }
    Ok((
        out,
        PoolCache {
            argmax,
            input_dims: x.dims(),
        },
    ))
}

pub fn max_pool2_backward<T: Scalar>(cache: &PoolCache, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    if dy.data().len() != cache.argmax.len() {
        return shape_err("max pool gradient does not match cached argmax");
    }
    let mut dx = Tensor4::zeros(cache.input_dims)?;
    let d = dx.data_mut();
    for (&src, &g) in cache.argmax.iter().zip(dy.data()) {
        d[src] += g;
    }
    Ok(dx)
}
