use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean latent of one `(u, i)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCell {
    pub mean: Vec<f64>,
    pub count: u64,
}

/// A latent vector with its public and private class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLatent {
    pub z: Vec<f64>,
    pub public: usize,
    pub private: usize,
}

/// `z̄` for every `(u, i)` cell that has data.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanLatentTable {
    public_classes: usize,
    private_classes: usize,
    latent_dim: usize,
    cells: Vec<Option<MeanCell>>,
}

fn pairwise_sum(rows: &[&[f64]], out: &mut [f64]) {
    if rows.len() <= 8 {
        for r in rows {
            for (o, v) in out.iter_mut().zip(r.iter()) {
                *o += v;
            }
        }
        return;
    }
    let (a, b) = rows.split_at(rows.len() / 2);
    let mut left = vec![0.0; out.len()];
    let mut right = vec![0.0; out.len()];
    pairwise_sum(a, &mut left);
    pairwise_sum(b, &mut right);
    for ((o, l), r) in out.iter_mut().zip(&left).zip(&right) {
        *o += l + r;
    }
}

impl MeanLatentTable {
    /// Averages latents per cell with pairwise summation.
    pub fn compute(latents: &[LabeledLatent], public_classes: usize, private_classes: usize) -> Result<Self> {
        let first = latents
            .first()
            .ok_or_else(|| Error::invalid("mean table from no latents"))?;
        let j = first.z.len();
        if j == 0 {
            return Err(Error::invalid("latent dimension is zero"));
        }
        let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); public_classes * private_classes];
        for (k, l) in latents.iter().enumerate() {
            if l.z.len() != j {
                return Err(Error::shape(format!(
                    "latent {k} has length {}, expected {j}",
                    l.z.len()
                )));
            }
            if l.public >= public_classes || l.private >= private_classes {
                return Err(Error::invalid(format!(
                    "latent {k} labelled ({}, {}) outside {public_classes}×{private_classes}",
                    l.public, l.private
                )));
            }
            if !l.z.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("latent {k}")));
            }
            groups[l.public * private_classes + l.private].push(&l.z);
        }
        let cells = groups
            .into_iter()
            .map(|g| {
                if g.is_empty() {
                    return None;
                }
                let mut mean = vec![0.0; j];
                pairwise_sum(&g, &mut mean);
                let n = g.len() as f64;
                mean.iter_mut().for_each(|v| *v /= n);
                Some(MeanCell {
                    mean,
                    count: g.len() as u64,
                })
            })
            .collect();
        Ok(Self {
            public_classes,
            private_classes,
            latent_dim: j,
            cells,
        })
    }

    /// Builds a table from explicit cells, indexed `u · M + i`.
    pub fn from_cells(
        public_classes: usize,
        private_classes: usize,
        latent_dim: usize,
        cells: Vec<Option<MeanCell>>,
    ) -> Result<Self> {
        if cells.len() != public_classes * private_classes {
            return Err(Error::shape(format!(
                "{} cells for a {public_classes}×{private_classes} table",
                cells.len()
            )));
        }
        for c in cells.iter().flatten() {
            if c.mean.len() != latent_dim || c.count == 0 || !c.mean.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("cell with wrong length, zero count or non-finite mean"));
            }
        }
        Ok(Self {
            public_classes,
            private_classes,
            latent_dim,
            cells,
        })
    }

    pub fn public_classes(&self) -> usize {
        self.public_classes
    }

    pub fn private_classes(&self) -> usize {
        self.private_classes
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn cell(&self, u: usize, i: usize) -> Result<&MeanCell> {
        if u >= self.public_classes || i >= self.private_classes {
            return Err(Error::MissingCell { u, i });
        }
        self.cells[u * self.private_classes + i]
            .as_ref()
            .ok_or(Error::MissingCell { u, i })
    }

    pub fn mean(&self, u: usize, i: usize) -> Result<&[f64]> {
        Ok(&self.cell(u, i)?.mean)
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        (0..self.public_classes)
            .flat_map(|u| (0..self.private_classes).map(move |i| (u, i)))
            .filter(|&(u, i)| self.cells[u * self.private_classes + i].is_none())
            .collect()
    }

    const MAGIC: &'static [u8; 5] = b"ZBAR1";
    const VERSION: u8 = 1;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(18 + self.cells.len() * (9 + 8 * self.latent_dim) + 4);
        b.extend_from_slice(Self::MAGIC);
        b.push(Self::VERSION);
        for n in [self.public_classes, self.private_classes, self.latent_dim] {
            b.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for cell in &self.cells {
            match cell {
                Some(c) => {
                    b.push(1);
                    b.extend_from_slice(&c.count.to_le_bytes());
                    for v in &c.mean {
                        b.extend_from_slice(&v.to_le_bytes());
                    }
                }
                None => {
                    b.push(0);
                    b.extend_from_slice(&0u64.to_le_bytes());
                    b.resize(b.len() + 8 * self.latent_dim, 0);
                }
            }
        }
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < 6 || &b[..5] != Self::MAGIC {
            return Err(Error::format("not a mean latent table"));
        }
        if b[5] != Self::VERSION {
            return Err(Error::format(format!("unsupported table version {}", b[5])));
        }
        if b.len() < 18 {
            return Err(Error::format("table header is truncated"));
        }
        let word = |k: usize| u32::from_le_bytes(b[6 + 4 * k..10 + 4 * k].try_into().unwrap()) as usize;
        let (u, m, j) = (word(0), word(1), word(2));
        let record = 9usize
            .checked_add(
                j.checked_mul(8)
                    .ok_or_else(|| Error::format("latent dimension overflows"))?,
            )
            .ok_or_else(|| Error::format("latent dimension overflows"))?;
        let expected = u
            .checked_mul(m)
            .and_then(|c| c.checked_mul(record))
            .and_then(|n| n.checked_add(22))
            .ok_or_else(|| Error::format("table dimensions overflow"))?;
        if b.len() < expected {
            return Err(Error::format(format!(
                "table is truncated: {} of {expected} bytes",
                b.len()
            )));
        }
        if b.len() > expected {
            return Err(Error::format("trailing bytes after table"));
        }
        let body = &b[..expected - 4];
        let stored = u32::from_le_bytes(b[expected - 4..].try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::format("table checksum mismatch"));
        }
        let mut cells = Vec::with_capacity(u * m);
        let mut pos = 18;
        for _ in 0..u * m {
            let present = b[pos];
            let count = u64::from_le_bytes(b[pos + 1..pos + 9].try_into().unwrap());
            let mean: Vec<f64> = b[pos + 9..pos + record]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            pos += record;
            cells.push(match present {
                0 => None,
                1 => Some(MeanCell { mean, count }),
                p => return Err(Error::format(format!("bad presence flag {p}"))),
            });
        }
        Self::from_cells(u, m, j, cells)
    }
}

pub fn save_table(table: &MeanLatentTable, path: &Path) -> Result<()> {
    fs::write(path, table.to_bytes())?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<MeanLatentTable> {
    MeanLatentTable::from_bytes(&fs::read(path)?)
}

/// `z̄(u, i') − z̄(u, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferVector {
    pub public: usize,
    pub from: usize,
    pub to: usize,
    pub delta: Vec<f64>,
}

pub fn transfer_vector(table: &MeanLatentTable, u: usize, i: usize, to: usize) -> Result<TransferVector> {
    let a = table.mean(u, i)?;
    let b = table.mean(u, to)?;
    Ok(TransferVector {
        public: u,
        from: i,
        to,
        delta: b.iter().zip(a).map(|(b, a)| b - a).collect(),
    })
}

/// `ẑ = z − z̄(u, i) + z̄(u, i')`; exactly `z` when `i' == i`.
pub fn apply_transfer(z: &[f64], table: &MeanLatentTable, u: usize, i: usize, to: usize) -> Result<Vec<f64>> {
    let a = table.mean(u, i)?;
    let b = table.mean(u, to)?;
    if z.len() != table.latent_dim() {
        return Err(Error::shape(format!(
            "latent of length {} for a table of dimension {}",
            z.len(),
            table.latent_dim()
        )));
    }
    if i == to {
        return Ok(z.to_vec());
    }
    Ok(z.iter().zip(a).zip(b).map(|((z, a), b)| (z - a) + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ll(z: Vec<f64>, public: usize, private: usize) -> LabeledLatent {
        LabeledLatent { z, public, private }
    }

    fn two_cell() -> MeanLatentTable {
        MeanLatentTable::compute(
            &[
                ll(vec![0.0, 0.0], 0, 0),
                ll(vec![2.0, 4.0], 0, 0),
                ll(vec![-1.0, 3.0], 0, 1),
            ],
            1,
            2,
        )
        .unwrap()
    }

    #[test]
    fn means_and_counts() {
        let t = two_cell();
        assert_eq!(t.mean(0, 0).unwrap(), [1.0, 2.0]);
        assert_eq!(t.cell(0, 0).unwrap().count, 2);
        assert_eq!(t.mean(0, 1).unwrap(), [-1.0, 3.0]);
    }

    #[test]
    fn absent_cells_are_errors() {
        let t = MeanLatentTable::compute(&[ll(vec![1.0], 1, 0)], 2, 2).unwrap();
        assert!(matches!(t.mean(0, 0), Err(Error::MissingCell { u: 0, i: 0 })));
        assert!(matches!(t.mean(5, 0), Err(Error::MissingCell { .. })));
        assert_eq!(t.missing_cells(), [(0, 0), (0, 1), (1, 1)]);
        assert!(MeanLatentTable::compute(&[], 1, 2).is_err());
        assert!(MeanLatentTable::compute(&[ll(vec![1.0], 0, 2)], 1, 2).is_err());
    }

    #[test]
    fn transfers() {
        let t = two_cell();
        let v = transfer_vector(&t, 0, 0, 1).unwrap();
        assert_eq!(v.delta, [-2.0, 1.0]);
        let back = transfer_vector(&t, 0, 1, 0).unwrap();
        assert_eq!(back.delta, [2.0, -1.0]);
        assert_eq!(transfer_vector(&t, 0, 1, 1).unwrap().delta, [0.0, 0.0]);
        let z = [0.1, 0.7];
        assert_eq!(apply_transfer(&z, &t, 0, 1, 1).unwrap(), z);
        assert_eq!(apply_transfer(&[1.0, 2.0], &t, 0, 0, 1).unwrap(), [-1.0, 3.0]);
        assert!(apply_transfer(&[1.0], &t, 0, 0, 1).is_err());
    }

    #[test]
    fn file_round_trip_and_damage() {
        let t = MeanLatentTable::compute(&[ll(vec![0.3, -1e-300], 1, 0), ll(vec![5.0, 6.0], 0, 1)], 2, 2).unwrap();
        let b = t.to_bytes();
        assert_eq!(MeanLatentTable::from_bytes(&b).unwrap(), t);
        assert!(MeanLatentTable::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(MeanLatentTable::from_bytes(&b[..10]).is_err());
        let mut v = b.clone();
        v[5] = 2;
        assert!(matches!(MeanLatentTable::from_bytes(&v), Err(Error::Format(m)) if m.contains("version")));
        let mut c = b.clone();
        c[30] ^= 1;
        assert!(matches!(MeanLatentTable::from_bytes(&c), Err(Error::Format(m)) if m.contains("checksum")));
    }
}
