use crate::error::{Error, Result};
use crate::frame::FrameTensor;

/// One-hot `S×S×2` target: a single 1 at `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLabel {
    pub size: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl GridLabel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        u8::from((i, j, k) == (self.i, self.j, self.k))
    }

    /// Dense values in grid storage order (`[j][i][k]`, see
    /// [`OutputGrid`](crate::dropnet::OutputGrid)).
    pub fn values(&self) -> Vec<f32> {
        let mut v = vec![0.0; self.size * self.size * 2];
        v[self.hot_index()] = 1.0;
        v
    }

    pub fn hot_index(&self) -> usize {
        (self.j * self.size + self.i) * 2 + self.k
    }

    pub fn cell(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn state(&self) -> u8 {
        self.k as u8
    }
}

/// `i = ⌊x·S/W⌋`, `j = ⌊y·S/W⌋`, `k = s`.
pub fn make_label(x: f64, y: f64, s: u8, w: usize, grid: usize) -> Result<GridLabel> {
    if w == 0 || grid == 0 {
        return Err(Error::Param("frame and grid sizes must be >= 1".into()));
    }
    let wf = w as f64;
    if !(0.0..wf).contains(&x) || !(0.0..wf).contains(&y) {
        return Err(Error::Param(format!("drop position ({x}, {y}) outside [0, {w})")));
    }
    if s > 1 {
        return Err(Error::Param(format!("drop state must be 0 or 1, got {s}")));
    }
    let cell = |v: f64| (((v * grid as f64) / wf).floor() as usize).min(grid - 1);
    Ok(GridLabel {
        size: grid,
        i: cell(x),
        j: cell(y),
        k: s as usize,
    })
}

/// A frame with its drop position (pixels) and state.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub frame: FrameTensor,
    pub x: f64,
    pub y: f64,
    pub s: u8,
}

impl LabeledSample {
    pub fn label(&self, grid: usize) -> Result<GridLabel> {
        make_label(self.x, self.y, self.s, self.frame.width, grid)
    }
}
