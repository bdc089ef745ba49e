//! Embedding archive.
//!
//! ```text
//! b"EMBD1"
//! u32 window, u32 stride, u32 channels, u32 public classes, u32 private classes
//! u64 count
//! count × { u16 public, u16 private, u32 subject, u32 trial, u64 origin,
//!           window·channels × f64 }
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::series::Embedding;
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"EMBD1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub window: u32,
    pub stride: u32,
    pub channels: u32,
    pub public_classes: u32,
    pub private_classes: u32,
}

impl ArchiveHeader {
    pub fn input_dim(&self) -> usize {
        self.window as usize * self.channels as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingArchive {
    pub header: ArchiveHeader,
    pub embeddings: Vec<Embedding>,
}

impl EmbeddingArchive {
    pub fn new(header: ArchiveHeader, embeddings: Vec<Embedding>) -> Result<Self> {
        let d = header.input_dim();
        for (k, e) in embeddings.iter().enumerate() {
            if e.x.len() != d {
                return Err(Error::shape(format!(
                    "embedding {k} has length {}, header implies {d}",
                    e.x.len()
                )));
            }
            if e.public >= header.public_classes as usize || e.private >= header.private_classes as usize {
                return Err(Error::invalid(format!(
                    "embedding {k} labels ({}, {}) exceed the header's class counts",
                    e.public, e.private
                )));
            }
        }
        Ok(Self { header, embeddings })
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MAGIC)?;
        let h = &self.header;
        for v in [h.window, h.stride, h.channels, h.public_classes, h.private_classes] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.embeddings.len() as u64).to_le_bytes())?;
        for e in &self.embeddings {
            w.write_all(&(e.public as u16).to_le_bytes())?;
            w.write_all(&(e.private as u16).to_le_bytes())?;
            w.write_all(&e.subject_id.to_le_bytes())?;
            w.write_all(&e.trial.to_le_bytes())?;
            w.write_all(&(e.origin as u64).to_le_bytes())?;
            for v in &e.x {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 5];
        read(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("not an embedding archive (bad magic)"));
        }
        let mut fields = [0u32; 5];
        for f in &mut fields {
            *f = u32::from_le_bytes(take(&mut r)?);
        }
        let header = ArchiveHeader {
            window: fields[0],
            stride: fields[1],
            channels: fields[2],
            public_classes: fields[3],
            private_classes: fields[4],
        };
        let count = u64::from_le_bytes(take(&mut r)?);
        let d = header.input_dim();
        let mut embeddings = Vec::with_capacity(count.min(1 << 20) as usize);
        let mut xbuf = vec![0u8; d * 8];
        for _ in 0..count {
            let public = u16::from_le_bytes(take(&mut r)?) as usize;
            let private = u16::from_le_bytes(take(&mut r)?) as usize;
            let subject_id = u32::from_le_bytes(take(&mut r)?);
            let trial = u32::from_le_bytes(take(&mut r)?);
            let origin = u64::from_le_bytes(take(&mut r)?) as usize;
            read(&mut r, &mut xbuf)?;
            let x = xbuf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            embeddings.push(Embedding {
                x,
                public,
                private,
                subject_id,
                trial,
                origin,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::format("trailing bytes after the last embedding"));
        }
        Self::new(header, embeddings)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?).map_err(|e| match e {
            Error::Format(m) => Error::Data {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }
}

fn read<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format("archive is truncated"),
        _ => e.into(),
    })
}

fn take<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    read(r, &mut b)?;
    Ok(b)
}
