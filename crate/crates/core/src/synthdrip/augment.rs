use crate::error::{Error, Result};
use crate::frame::FrameTensor;

use super::LabeledSample;

pub const ZOOM_RANGE: (f64, f64) = (0.9, 1.1);

/// Crop offset that centres a `W×W` window on the zoomed image.
pub fn centered_offset(zoom: f64, size: usize) -> (f64, f64) {
    let o = (zoom - 1.0) * size as f64 / 2.0;
    (o, o)
}

/// Rescales the frame by `zoom` (bilinear) and crops the `W×W` window whose
/// top-left corner sits at `offset` in zoomed coordinates. Zoomed-out
/// windows that reach past the image repeat its border pixels.
///
/// The drop moves to `(x·zoom − ox, y·zoom − oy)`; a crop that pushes it
/// out of the window is rejected.
pub fn augment(sample: &LabeledSample, zoom: f64, offset: (f64, f64)) -> Result<LabeledSample> {
    if !(ZOOM_RANGE.0..=ZOOM_RANGE.1).contains(&zoom) {
        return Err(Error::Param(format!(
            "zoom {zoom} outside [{}, {}]",
            ZOOM_RANGE.0, ZOOM_RANGE.1
        )));
    }
    let src = &sample.frame;
    let (w, h) = (src.width, src.height);
    let nx = sample.x * zoom - offset.0;
    let ny = sample.y * zoom - offset.1;
    if !(0.0..w as f64).contains(&nx) || !(0.0..h as f64).contains(&ny) {
        return Err(Error::Param(format!(
            "crop at {offset:?} with zoom {zoom} moves the drop to ({nx:.1}, {ny:.1}), outside the frame"
        )));
    }
    let mut data = vec![0f32; w * h * 3];
    for v in 0..h {
        let sy = (v as f64 + offset.1) / zoom;
        let (y0, y1, fy) = taps(sy, h);
        for u in 0..w {
            let sx = (u as f64 + offset.0) / zoom;
            let (x0, x1, fx) = taps(sx, w);
            for ch in 0..3 {
                let p = |x: usize, y: usize| src.data[(y * w + x) * 3 + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                data[(v * w + u) * 3 + ch] = (top * (1.0 - fy) + bot * fy) as f32;
            }
        }
    }
    Ok(LabeledSample {
        frame: FrameTensor::new(w, h, data)?,
        x: nx,
        y: ny,
        s: sample.s,
    })
}

/// Neighbouring indices and blend weight for a source coordinate, clamped
/// to the image.
fn taps(s: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let s = s.clamp(0.0, max);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, s - i0 as f64)
}
