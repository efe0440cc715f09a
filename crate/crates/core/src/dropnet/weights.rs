//! `DRPW` weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! "DRPW" | u32 version = 1 | u32 len + JSON NetConfig | u32 array count
//! per array: u32 len + UTF-8 name | u8 rank | rank × u32 dims | f32 payload
//! u32 CRC-32 (IEEE) of every preceding byte
//! ```

use std::fs;
use std::io;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor_nn::Layer;

use super::{DropNet, NetConfig};

pub const MAGIC: &[u8; 4] = b"DRPW";
pub const VERSION: u32 = 1;

struct NamedArray {
    name: String,
    dims: Vec<u32>,
    data: Vec<f32>,
}

/// Every stored array, trainable or not, in file order.
fn arrays_of(net: &DropNet) -> Vec<NamedArray> {
    let mut out = Vec::new();
    for (idx, layer) in net.network.layers.iter().enumerate() {
        match layer {
            Layer::Conv(c) => {
                let k = c.kernel as u32;
                out.push(NamedArray {
                    name: format!("layer{idx}.conv.weight"),
                    dims: vec![k, k, c.in_channels as u32, c.out_channels as u32],
                    data: c.weight.clone(),
                });
                out.push(NamedArray {
                    name: format!("layer{idx}.conv.bias"),
                    dims: vec![c.out_channels as u32],
                    data: c.bias.clone(),
                });
            }
            Layer::BatchNorm(b) => {
                for (field, data) in [
                    ("gamma", &b.gamma),
                    ("beta", &b.beta),
                    ("running_mean", &b.running_mean),
                    ("running_var", &b.running_var),
                ] {
                    out.push(NamedArray {
                        name: format!("layer{idx}.bn.{field}"),
                        dims: vec![data.len() as u32],
                        data: data.clone(),
                    });
                }
            }
            _ => {}
        }
    }
    out
}

pub fn encode(net: &DropNet) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let config = serde_json::to_vec(net.config())?;
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    let arrays = arrays_of(net);
    buf.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for a in &arrays {
        buf.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(a.name.as_bytes());
        buf.push(a.dims.len() as u8);
        for d in &a.dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for v in &a.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("weight file truncated at byte {}", self.pos),
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn decode(bytes: &[u8]) -> Result<DropNet> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return format_err("bad magic, expected DRPW");
    }
    let version = cur.u32()?;
    if version != VERSION {
        return format_err(format!("unsupported weight file version {version}"));
    }
    let config_len = cur.u32()? as usize;
    let config: NetConfig = serde_json::from_slice(cur.take(config_len)?)
        .map_err(|e| Error::Format(format!("config blob: {e}")))?;
    let mut net = DropNet::build(config).map_err(|e| Error::Format(format!("embedded config: {e}")))?;

    let expected = arrays_of(&net);
    let count = cur.u32()? as usize;
    if count != expected.len() {
        return format_err(format!(
            "file declares {count} arrays, config implies {}",
            expected.len()
        ));
    }
    let mut loaded = Vec::with_capacity(count);
    for want in &expected {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Format("array name is not UTF-8".into()))?;
        if name != want.name {
            return format_err(format!("expected array {}, found {name}", want.name));
        }
        let rank = cur.u8()? as usize;
        let dims = (0..rank).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        if dims != want.dims {
            return format_err(format!(
                "array {name} has shape {dims:?}, config implies {:?}",
                want.dims
            ));
        }
        let len: usize = dims.iter().map(|&d| d as usize).product();
        let data: Vec<f32> = cur
            .take(len * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        loaded.push(data);
    }
    let body_end = cur.pos;
    let crc = cur.u32()?;
    if cur.pos != bytes.len() {
        return format_err(format!(
            "{} unexpected bytes after the array table",
            bytes.len() - cur.pos
        ));
    }
    if crc32fast::hash(&bytes[..body_end]) != crc {
        return format_err("CRC-32 mismatch");
    }

    let mut it = loaded.into_iter();
    for layer in net.network.layers.iter_mut() {
        match layer {
            Layer::Conv(c) => {
                c.weight = it.next().unwrap();
                c.bias = it.next().unwrap();
            }
            Layer::BatchNorm(b) => {
                b.gamma = it.next().unwrap();
                b.beta = it.next().unwrap();
                b.running_mean = it.next().unwrap();
                b.running_var = it.next().unwrap();
                if b.running_var.iter().any(|v| !(*v >= 0.0)) {
                    return format_err("negative running variance");
                }
            }
            _ => {}
        }
    }
    Ok(net)
}

pub fn save_weights(net: &DropNet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(net)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<DropNet> {
    decode(&fs::read(path)?)
}
