//! Image containers shared by the generator, the pipeline and the CLI, plus
//! binary PPM (P6) / PGM (P5) I/O.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{shape_err, Error, Result};
use crate::tensor_nn::Tensor4;

/// `height × width × 3` RGB intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FrameTensor {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return shape_err(format!(
                "frame {width}x{height} needs {} values, got {}",
                width * height * 3,
                data.len()
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn to_rgb(&self) -> RgbFrame {
        RgbFrame {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect(),
        }
    }

    /// Stacks equally sized frames into an `(n, h, w, 3)` batch.
    pub fn stack(frames: &[&FrameTensor]) -> Result<Tensor4<f32>> {
        let Some(first) = frames.first() else {
            return shape_err("cannot stack zero frames");
        };
        let mut data = Vec::with_capacity(frames.len() * first.data.len());
        for f in frames {
            if (f.width, f.height) != (first.width, first.height) {
                return shape_err("stacked frames differ in size");
            }
            data.extend_from_slice(&f.data);
        }
        Tensor4::from_vec([frames.len(), first.height, first.width, 3], data)
    }
}

/// `height × width × 3` 8-bit RGB, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return shape_err(format!(
                "RGB frame {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode_ppm(bytes: &[u8]) -> Result<Self> {
        let (magic, w, h, body) = parse_netpbm_header(bytes)?;
        if magic != "P6" {
            return Err(Error::Format(format!("expected P6 image, got {magic}")));
        }
        let need = w * h * 3;
        if body.len() < need {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "PPM payload truncated",
            )));
        }
        Self::new(w, h, body[..need].to_vec())
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode_ppm())?;
        Ok(())
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode_ppm(&fs::read(path)?)
    }
}

/// Returns `(magic, width, height, payload)` for a maxval-255 P5/P6 file.
fn parse_netpbm_header(bytes: &[u8]) -> Result<(String, usize, usize, &[u8])> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated netpbm header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad netpbm header field {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    Ok((fields[0].clone(), w, h, bytes.get(pos..).unwrap_or(&[])))
}

/// Writes an 8-bit grayscale P5 image.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return shape_err("PGM pixel count does not match its size");
    }
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    Ok(())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let (magic, w, h, body) = parse_netpbm_header(&bytes)?;
    if magic != "P5" || body.len() < w * h {
        return Err(Error::Format("not a complete P5 image".into()));
    }
    Ok((w, h, body[..w * h].to_vec()))
}
