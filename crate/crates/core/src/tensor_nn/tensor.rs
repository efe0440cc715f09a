use crate::error::{shape_err, Error, Result};

use super::Scalar;

/// Dense `(batch, row, col, channel)` tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T = f32> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            data: vec![T::zero(); dims.iter().product()],
        })
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Result<Self> {
        check_dims(dims)?;
        let want: usize = dims.iter().product();
        if data.len() != want {
            return shape_err(format!(
                "data length {} does not match dims {:?} ({})",
                data.len(),
                dims,
                want
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: [usize; 4], value: T) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        t.data.iter_mut().for_each(|v| *v = value);
        Ok(t)
    }

    /// Stacks single samples (each with batch dimension 1 or more).
    pub fn concat(parts: &[Tensor4<T>]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return shape_err("cannot concatenate zero tensors");
        };
        let inner = first.sample_dims();
        let mut n = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.sample_dims() != inner {
                return shape_err(format!(
                    "concat of mismatched samples {:?} vs {:?}",
                    p.sample_dims(),
                    inner
                ));
            }
            n += p.dims[0];
            data.extend_from_slice(&p.data);
        }
        Self::from_vec([n, inner[0], inner[1], inner[2]], data)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }
    pub fn batch(&self) -> usize {
        self.dims[0]
    }
    pub fn height(&self) -> usize {
        self.dims[1]
    }
    pub fn width(&self) -> usize {
        self.dims[2]
    }
    pub fn channels(&self) -> usize {
        self.dims[3]
    }
    /// `(height, width, channels)`.
    pub fn sample_dims(&self) -> [usize; 3] {
        [self.dims[1], self.dims[2], self.dims[3]]
    }
    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn sample(&self, b: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[b * len..(b + 1) * len]
    }

    /// A copy of sample `b` as a batch of one.
    pub fn slice_batch(&self, b: usize) -> Self {
        Self {
            dims: [1, self.dims[1], self.dims[2], self.dims[3]],
            data: self.sample(b).to_vec(),
        }
    }

    pub fn offset(&self, b: usize, y: usize, x: usize, c: usize) -> usize {
        ((b * self.dims[1] + y) * self.dims[2] + x) * self.dims[3] + c
    }

    pub fn get(&self, b: usize, y: usize, x: usize, c: usize) -> T {
        self.data[self.offset(b, y, x, c)]
    }

    pub fn set(&mut self, b: usize, y: usize, x: usize, c: usize, v: T) {
        let o = self.offset(b, y, x, c);
        self.data[o] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

fn check_dims(dims: [usize; 4]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return shape_err(format!("every dimension must be >= 1, got {dims:?}"));
    }
    Ok(())
}
