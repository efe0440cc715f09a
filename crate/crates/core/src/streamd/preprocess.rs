use crate::error::{shape_err, Result};
use crate::frame::{FrameTensor, RgbFrame};

/// Square bounds `(x0, y0, side)` of the centred crop.
pub fn center_crop(width: usize, height: usize) -> (usize, usize, usize) {
    let side = width.min(height);
    ((width - side) / 2, (height - side) / 2, side)
}

/// Centre-crops to a square, resizes to `size × size` with half-pixel
/// bilinear sampling and scales bytes to `[0, 1]`.
pub fn preprocess(raw: &RgbFrame, size: usize) -> Result<FrameTensor> {
    if raw.width == 0 || raw.height == 0 || size == 0 {
        return shape_err(format!("cannot preprocess a {}x{} frame to {size}", raw.width, raw.height));
    }
    let (x0, y0, side) = center_crop(raw.width, raw.height);
    let px = |x: usize, y: usize, c: usize| raw.data[((y0 + y) * raw.width + x0 + x) * 3 + c] as f32;
    let mut data = Vec::with_capacity(size * size * 3);
    if side == size {
        for y in 0..size {
            for x in 0..size {
                for c in 0..3 {
                    data.push(px(x, y, c) / 255.0);
                }
            }
        }
        return FrameTensor::new(size, size, data);
    }
    let scale = side as f64 / size as f64;
    let taps = |u: usize| {
        let s = ((u as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(side - 1);
        (lo, hi, (s - lo as f64) as f32)
    };
    let cols: Vec<_> = (0..size).map(taps).collect();
    for y in 0..size {
        let (y_lo, y_hi, fy) = taps(y);
        for &(x_lo, x_hi, fx) in &cols {
            for c in 0..3 {
                let top = px(x_lo, y_lo, c) * (1.0 - fx) + px(x_hi, y_lo, c) * fx;
                let bottom = px(x_lo, y_hi, c) * (1.0 - fx) + px(x_hi, y_hi, c) * fx;
                data.push((top * (1.0 - fy) + bottom * fy) / 255.0);
            }
        }
    }
    FrameTensor::new(size, size, data)
}
