//! `LANN1` tensor container.
//!
//! Layout, all integers 64-bit little-endian:
//!
//! ```text
//! b"LANN1"
//! repeated until EOF:
//!   name_len, name bytes (UTF-8), rank, dims[rank], elements (f64 LE)
//! ```

use std::io::{Read, Write};

use super::matrix::Matrix;
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"LANN1";

const MAX_NAME: u64 = 4096;
const MAX_RANK: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u64>, data: Vec<f64>) -> Result<Self> {
        let expected: u64 = dims.iter().product();
        if expected != data.len() as u64 {
            return Err(Error::shape(format!(
                "tensor dims {dims:?} need {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            dims,
            data,
        })
    }

    pub fn from_matrix(name: impl Into<String>, m: &Matrix) -> Self {
        Self {
            name: name.into(),
            dims: vec![m.rows() as u64, m.cols() as u64],
            data: m.data().to_vec(),
        }
    }

    pub fn from_vector(name: impl Into<String>, v: &[f64]) -> Self {
        Self {
            name: name.into(),
            dims: vec![v.len() as u64],
            data: v.to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        match self.dims.as_slice() {
            [r, c] => Matrix::from_vec(*r as usize, *c as usize, self.data.clone()),
            other => Err(Error::format(format!(
                "tensor {} has rank {}, expected 2",
                self.name,
                other.len()
            ))),
        }
    }
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[Tensor]) -> Result<()> {
    w.write_all(MAGIC)?;
    for t in tensors {
        let name = t.name.as_bytes();
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(t.dims.len() as u64).to_le_bytes())?;
        for d in &t.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<Tensor>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("file too short for LANN1 magic"))?;
    if &magic != MAGIC {
        return Err(Error::format("missing LANN1 magic"));
    }
    let mut out = Vec::new();
    loop {
        let mut first = [0u8; 8];
        match read_full(&mut r, &mut first)? {
            0 => break,
            8 => {}
            _ => return Err(Error::format("truncated tensor record")),
        }
        let name_len = u64::from_le_bytes(first);
        if name_len > MAX_NAME {
            return Err(Error::format(format!("tensor name length {name_len} is implausible")));
        }
        let mut name = vec![0u8; name_len as usize];
        read_exact(&mut r, &mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::format("tensor name is not UTF-8"))?;
        let rank = read_u64(&mut r)?;
        if rank > MAX_RANK {
            return Err(Error::format(format!("tensor {name} has rank {rank}")));
        }
        let dims = (0..rank).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= (1 << 32))
            .ok_or_else(|| Error::format(format!("tensor {name} dims {dims:?} overflow")))?;
        let mut bytes = vec![0u8; count as usize * 8];
        read_exact(&mut r, &mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push(Tensor { name, dims, data });
    }
    Ok(out)
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    if read_full(r, buf)? != buf.len() {
        return Err(Error::format("truncated tensor record"));
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Finds a tensor by name.
pub fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::format(format!("missing tensor {name}")))
}
