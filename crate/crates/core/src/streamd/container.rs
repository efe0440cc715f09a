use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::RgbFrame;

pub const DRPV_MAGIC: &[u8; 4] = b"DRPV";
pub const DRPV_VERSION: u32 = 1;
pub const DRPV_HEADER_LEN: usize = 32;

/// Raw RGB24 video header (all fields little-endian).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrpvHeader {
    pub width: u32,
    pub height: u32,
    pub fps_num: u32,
    pub fps_den: u32,
    pub frame_count: u64,
}

impl DrpvHeader {
    pub fn fps(&self) -> f64 {
        self.fps_num as f64 / self.fps_den as f64
    }

    pub fn frame_bytes(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    pub fn encode(&self) -> [u8; DRPV_HEADER_LEN] {
        let mut out = [0u8; DRPV_HEADER_LEN];
        out[0..4].copy_from_slice(DRPV_MAGIC);
        out[4..8].copy_from_slice(&DRPV_VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.width.to_le_bytes());
        out[12..16].copy_from_slice(&self.height.to_le_bytes());
        out[16..20].copy_from_slice(&self.fps_num.to_le_bytes());
        out[20..24].copy_from_slice(&self.fps_den.to_le_bytes());
        out[24..32].copy_from_slice(&self.frame_count.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8; DRPV_HEADER_LEN]) -> Result<Self> {
        if &bytes[0..4] != DRPV_MAGIC {
            return Err(Error::Format(format!("bad DRPV magic {:?}", &bytes[0..4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != DRPV_VERSION {
            return Err(Error::Format(format!("unsupported DRPV version {version}")));
        }
        let header = Self {
            width: u32_at(8),
            height: u32_at(12),
            fps_num: u32_at(16),
            fps_den: u32_at(20),
            frame_count: u64::from_le_bytes(bytes[24..32].try_into().unwrap()),
        };
        if header.width == 0 || header.height == 0 || header.fps_num == 0 || header.fps_den == 0 {
            return Err(Error::Format(format!("degenerate DRPV header {header:?}")));
        }
        Ok(header)
    }
}

pub fn encode_drpv(header: &DrpvHeader, frames: &[RgbFrame]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(DRPV_HEADER_LEN + frames.len() * header.frame_bytes());
    write_frames(&mut out, header, frames)?;
    Ok(out)
}

fn write_frames<W: Write>(w: &mut W, header: &DrpvHeader, frames: &[RgbFrame]) -> Result<()> {
    if header.frame_count != frames.len() as u64 {
        return Err(Error::Format(format!(
            "header declares {} frames, {} given",
            header.frame_count,
            frames.len()
        )));
    }
    w.write_all(&header.encode())?;
    for f in frames {
        if (f.width, f.height) != (header.width as usize, header.height as usize) {
            return Err(Error::Format(format!(
                "frame {}x{} in a {}x{} container",
                f.width, f.height, header.width, header.height
            )));
        }
        w.write_all(&f.data)?;
    }
    Ok(())
}

pub fn write_drpv(path: impl AsRef<Path>, header: &DrpvHeader, frames: &[RgbFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_frames(&mut w, header, frames)?;
    w.flush()?;
    Ok(())
}

/// Sequential frame reader. Trailing bytes after the declared frames are
/// rejected once the last frame has been read.
pub struct DrpvReader<R> {
    inner: R,
    pub header: DrpvHeader,
    read: u64,
}

impl DrpvReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> DrpvReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut head = [0u8; DRPV_HEADER_LEN];
        inner.read_exact(&mut head)?;
        Ok(Self {
            header: DrpvHeader::decode(&head)?,
            inner,
            read: 0,
        })
    }

    pub fn next_frame(&mut self) -> Result<Option<RgbFrame>> {
        if self.read == self.header.frame_count {
            let mut probe = [0u8; 1];
            if self.inner.read(&mut probe)? != 0 {
                return Err(Error::Format("trailing bytes after the last DRPV frame".into()));
            }
            return Ok(None);
        }
        let mut data = vec![0u8; self.header.frame_bytes()];
        self.inner.read_exact(&mut data)?;
        self.read += 1;
        Ok(Some(RgbFrame::new(
            self.header.width as usize,
            self.header.height as usize,
            data,
        )?))
    }
}

pub fn decode_drpv(bytes: &[u8]) -> Result<(DrpvHeader, Vec<RgbFrame>)> {
    let mut r = DrpvReader::new(bytes)?;
    let mut frames = Vec::new();
    while let Some(f) = r.next_frame()? {
        frames.push(f);
    }
    Ok((r.header, frames))
}

pub fn read_drpv(path: impl AsRef<Path>) -> Result<(DrpvHeader, Vec<RgbFrame>)> {
    decode_drpv(&std::fs::read(path)?)
}
