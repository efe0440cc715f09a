use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{shape_err, Error, Result};
use crate::exec::Exec;

use super::scalar::{gemm, Op};
use super::{Scalar, Tensor4};

/// Samples per work item in the weight-gradient reduction. Fixed so the
/// summation order does not depend on the thread count.
const GRAD_GROUP: usize = 4;

/// Square "same"-padded convolution with stride 1.
///
/// Weights are stored `(ky, kx, in, out)`, which makes them directly the
/// `K×out` right-hand matrix of the im2col product.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T = f32> {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(kernel: usize, in_channels: usize, out_channels: usize) -> Result<Self> {
        if kernel != 1 && kernel != 5 {
            return Err(Error::Config(format!(
                "kernel size must be 1 or 5, got {kernel}"
            )));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Config("convolution channels must be >= 1".into()));
        }
        Ok(Self {
            kernel,
            in_channels,
            out_channels,
            weight: vec![T::zero(); kernel * kernel * in_channels * out_channels],
            bias: vec![T::zero(); out_channels],
        })
    }

    /// He-normal weights, zero bias.
    pub fn he_init<R: Rng + ?Sized>(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut conv = Self::zeros(kernel, in_channels, out_channels)?;
        let fan_in = (kernel * kernel * in_channels) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
        for w in conv.weight.iter_mut() {
            *w = T::of(normal.sample(rng));
        }
        Ok(conv)
    }

    pub fn from_parts(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        weight: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        let conv = Self::zeros(kernel, in_channels, out_channels)?;
        if weight.len() != conv.weight.len() || bias.len() != out_channels {
            return shape_err(format!(
                "conv {kernel}x{kernel} {in_channels}->{out_channels} expects {} weights and {} biases, got {} and {}",
                conv.weight.len(),
                out_channels,
                weight.len(),
                bias.len()
            ));
        }
        Ok(Self {
            weight,
            bias,
            ..conv
        })
    }

    fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        if x.channels() != self.in_channels {
            return shape_err(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4<T>, exec: Exec) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let [n, h, w, _] = x.dims();
        let mut out = Tensor4::zeros([n, h, w, self.out_channels])?;
        let pixels = h * w;
        let patch = self.patch_len();
        exec.for_each_chunk_mut(out.data_mut(), pixels * self.out_channels, |b, y| {
            let src = x.sample(b);
            for row in y.chunks_exact_mut(self.out_channels) {
                row.copy_from_slice(&self.bias);
            }
            if self.kernel == 1 {
                gemm(pixels, patch, self.out_channels, src, Op::N, &self.weight, Op::N, T::one(), y);
            } else {
                let col = im2col(src, h, w, self.in_channels, self.kernel);
                gemm(pixels, patch, self.out_channels, &col, Op::N, &self.weight, Op::N, T::one(), y);
            }
        });
        Ok(out)
    }

    /// Returns `(d input, d weight, d bias)`.
    pub fn backward(
        &self,
        x: &Tensor4<T>,
        dy: &Tensor4<T>,
        exec: Exec,
    ) -> Result<(Tensor4<T>, Vec<T>, Vec<T>)> {
        self.check_input(x)?;
        let [n, h, w, _] = x.dims();
        if dy.dims() != [n, h, w, self.out_channels] {
            return shape_err(format!(
                "conv upstream gradient {:?} does not match output [{n}, {h}, {w}, {}]",
                dy.dims(),
                self.out_channels
            ));
        }
        let pixels = h * w;
        let patch = self.patch_len();
        let cout = self.out_channels;

        let groups = n.div_ceil(GRAD_GROUP);
        let partials = exec.map_range(groups, |g| {
            let mut dw = vec![T::zero(); self.weight.len()];
            let mut db = vec![T::zero(); cout];
            let mut dx = Vec::with_capacity(GRAD_GROUP * pixels * self.in_channels);
            for b in g * GRAD_GROUP..((g + 1) * GRAD_GROUP).min(n) {
                let src = x.sample(b);
                let g_out = dy.sample(b);
                for row in g_out.chunks_exact(cout) {
                    for (acc, &v) in db.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                let mut dcol = vec![T::zero(); pixels * patch];
                gemm(pixels, cout, patch, g_out, Op::N, &self.weight, Op::T, T::zero(), &mut dcol);
                if self.kernel == 1 {
                    gemm(patch, pixels, cout, src, Op::T, g_out, Op::N, T::one(), &mut dw);
                    dx.extend_from_slice(&dcol);
                } else {
                    let col = im2col(src, h, w, self.in_channels, self.kernel);
                    gemm(patch, pixels, cout, &col, Op::T, g_out, Op::N, T::one(), &mut dw);
                    dx.extend(col2im(&dcol, h, w, self.in_channels, self.kernel));
                }
            }
            (dw, db, dx)
        });

        let mut dw = vec![T::zero(); self.weight.len()];
        let mut db = vec![T::zero(); cout];
        let mut dx = Vec::with_capacity(x.data().len());
        for (pw, pb, px) in partials {
            dw.iter_mut().zip(&pw).for_each(|(a, &v)| *a += v);
            db.iter_mut().zip(&pb).for_each(|(a, &v)| *a += v);
            dx.extend(px);
        }
        Ok((Tensor4::from_vec(x.dims(), dx)?, dw, db))
    }
}

/// Rows are output pixels, columns are `(ky, kx, c)` taps; out-of-image
/// taps are zero.
fn im2col<T: Scalar>(src: &[T], h: usize, w: usize, c: usize, k: usize) -> Vec<T> {
    let pad = (k / 2) as isize;
    let patch = k * k * c;
    let mut col = vec![T::zero(); h * w * patch];
    for y in 0..h {
        for x in 0..w {
            let row = &mut col[(y * w + x) * patch..][..patch];
            for ky in 0..k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = x as isize + kx as isize - pad;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let from = (sy as usize * w + sx as usize) * c;
                    row[(ky * k + kx) * c..][..c].copy_from_slice(&src[from..from + c]);
                }
            }
        }
    }
    col
}

fn col2im<T: Scalar>(col: &[T], h: usize, w: usize, c: usize, k: usize) -> Vec<T> {
    let pad = (k / 2) as isize;
    let patch = k * k * c;
    let mut img = vec![T::zero(); h * w * c];
    for y in 0..h {
        for x in 0..w {
            let row = &col[(y * w + x) * patch..][..patch];
            for ky in 0..k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = x as isize + kx as isize - pad;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let to = (sy as usize * w + sx as usize) * c;
                    for (d, &v) in img[to..to + c].iter_mut().zip(&row[(ky * k + kx) * c..][..c]) {
                        *d += v;
                    }
                }
            }
        }
    }
    img
}
