use crate::tensor_nn::Tensor4;

/// One frame's `S×S×2` network output.
///
/// Cell `(i, j)` is column `i` (horizontal, from `x`) and row `j`
/// (vertical, from `y`); storage is row-major `[j][i][k]`, the same order
/// the network produces.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrid {
    size: usize,
    values: Vec<f32>,
}

impl OutputGrid {
    /// Panics unless `values.len() == size * size * 2`.
    pub fn new(size: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), size * size * 2, "grid storage must be S*S*2");
        Self { size, values }
    }

    pub fn filled(size: usize, value: f32) -> Self {
        Self::new(size, vec![value; size * size * 2])
    }

    pub(crate) fn split(batch: &Tensor4<f32>) -> Vec<Self> {
        let s = batch.height();
        (0..batch.batch())
            .map(|b| Self::new(s, batch.sample(b).to_vec()))
            .collect()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (j * self.size + i) * 2 + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f32) {
        let idx = self.index(i, j, k);
        self.values[idx] = v;
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}
