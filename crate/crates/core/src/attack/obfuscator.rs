use crate::pipeline::Anonymizer;
use crate::Result;

/// Anything that maps an embedding to an obfuscated one of the same length.
pub trait Obfuscator {
    fn obfuscate(&mut self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Obfuscator for Anonymizer<'_> {
    fn obfuscate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.anonymize(x)?.0)
    }
}

/// Passes data through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityObfuscator;

impl Obfuscator for IdentityObfuscator {
    fn obfuscate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

/// Replaces every embedding with zeros.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroObfuscator;

impl Obfuscator for ZeroObfuscator {
    fn obfuscate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; x.len()])
    }
}
