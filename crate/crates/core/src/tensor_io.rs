//! The `.fwt` binary tensor container.
//!
//! Byte layout, all integers little-endian:
//!
//! | offset        | size        | field                                  |
//! |---------------|-------------|----------------------------------------|
//! | 0             | 4           | magic `b"FWT1"`                        |
//! | 4             | 1           | `ndim` (u8, 1..=3)                     |
//! | 5             | 4 × ndim    | dims (u32 each, outermost first)       |
//! | 5 + 4·ndim    | 1           | dtype tag (`0` = float32)              |
//! | 6 + 4·ndim    | 4 × product | payload, row-major f32 values          |
//!
//! Splat tables use an `N×9` tensor with columns
//! `px, py, pz, nx, ny, nz, sx, sy, opacity`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"FWT1";
pub const DTYPE_F32: u8 = 0;

/// A dense float32 tensor of rank 1 to 3, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected = checked_len(&dims)?;
        if data.len() != expected {
            return Err(FormatError::PayloadLength {
                dims,
                expected,
                actual: data.len(),
            }
            .into());
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = checked_len(&dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; len],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.dims, self.data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size in bytes of the encoded file.
    pub fn encoded_len(&self) -> usize {
        4 + 1 + 4 * self.dims.len() + 1 + 4 * self.data.len()
    }
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(FormatError::Rank(dims.len()).into());
    }
    let mut product: u64 = 1;
    for &d in dims {
        if d as u64 > u32::MAX as u64 {
            return Err(FormatError::Size(d as u64).into());
        }
        product = product.saturating_mul(d as u64);
    }
    if product > u32::MAX as u64 {
        return Err(FormatError::Size(product).into());
    }
    Ok(product as usize)
}

pub fn read_tensor<R: Read>(reader: &mut R) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    read_exact(reader, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    let mut ndim = [0u8; 1];
    read_exact(reader, &mut ndim, "rank")?;
    let ndim = ndim[0] as usize;
    if ndim == 0 || ndim > 3 {
        return Err(FormatError::Rank(ndim).into());
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut word = [0u8; 4];
        read_exact(reader, &mut word, "dims")?;
        dims.push(u32::from_le_bytes(word) as usize);
    }
    let mut dtype = [0u8; 1];
    read_exact(reader, &mut dtype, "dtype")?;
    if dtype[0] != DTYPE_F32 {
        return Err(FormatError::UnsupportedDtype(dtype[0]).into());
    }
    let len = checked_len(&dims)?;
    let mut payload = vec![0u8; len * 4];
    read_exact(reader, &mut payload, "payload")?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor { dims, data })
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(FormatError::Truncated(what)),
        _ => Error::Io(e),
    })
}

pub fn write_tensor<W: Write>(writer: &mut W, tensor: &Tensor) -> Result<()> {
    writer.write_all(&encode(tensor)?)?;
    Ok(())
}

pub fn encode(tensor: &Tensor) -> Result<Vec<u8>> {
    checked_len(&tensor.dims)?;
    let mut out = Vec::with_capacity(tensor.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(tensor.dims.len() as u8);
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(DTYPE_F32);
    for v in &tensor.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a complete buffer, rejecting trailing bytes.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut cursor = bytes;
    let tensor = read_tensor(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(FormatError::TrailingBytes(cursor.len()).into());
    }
    Ok(tensor)
}

pub fn load(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(Error::at(path))?)
}

pub fn save(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(tensor)?).map_err(Error::at(path))?;
    Ok(())
}
