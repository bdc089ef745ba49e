use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::{Error, Result};

/// A stream of random bytes. Failures must surface as errors.
pub trait RandomSource: Send {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()>;
}

/// ChaCha20 keyed once from the operating system.
pub struct SecureSource(ChaCha20Rng);

impl SecureSource {
    pub fn new() -> Result<Self> {
        ChaCha20Rng::try_from_os_rng()
            .map(SecureSource)
            .map_err(|e| Error::Randomness(e.to_string()))
    }
}

impl RandomSource for SecureSource {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.fill_bytes(buf);
        Ok(())
    }
}

/// ChaCha20 from a fixed seed. Reproducible, therefore not secret.
pub struct SeededSource(ChaCha20Rng);

impl SeededSource {
    pub fn new(seed: u64) -> Self {
        SeededSource(ChaCha20Rng::seed_from_u64(seed))
    }
}

impl RandomSource for SeededSource {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.fill_bytes(buf);
        Ok(())
    }
}

/// Every coin lands the same way: `Always` fills with ones, `Never` with zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedCoin {
    Always,
    Never,
}

impl RandomSource for FixedCoin {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        let b = match self {
            FixedCoin::Always => 0xFF,
            FixedCoin::Never => 0x00,
        };
        buf.fill(b);
        Ok(())
    }
}

/// A source that always fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailingSource;

impl RandomSource for FailingSource {
    fn fill(&mut self, _buf: &mut [u8]) -> Result<()> {
        Err(Error::Randomness("source unavailable".into()))
    }
}

/// One fair bit.
pub fn coin(src: &mut dyn RandomSource) -> Result<bool> {
    let mut b = [0u8; 1];
    src.fill(&mut b)?;
    Ok(b[0] & 1 == 1)
}

/// Uniform integer in `[0, n)` by rejection sampling.
pub fn uniform_below(src: &mut dyn RandomSource, n: usize) -> Result<usize> {
    if n == 0 || n > u32::MAX as usize {
        return Err(Error::invalid(format!("cannot draw uniformly below {n}")));
    }
    let n = n as u64;
    let zone = (1u64 << 32) / n * n;
    for _ in 0..64 {
        let mut b = [0u8; 4];
        src.fill(&mut b)?;
        let v = u32::from_le_bytes(b) as u64;
        if v < zone {
            return Ok((v % n) as usize);
        }
    }
    Err(Error::Randomness("64 consecutive rejected draws".into()))
}
