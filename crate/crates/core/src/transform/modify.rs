use serde::{Deserialize, Serialize};

use super::random::{coin, uniform_below, RandomSource};
use crate::{Error, Result};

/// A permutation of `[0, M)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Bijection {
    map: Vec<usize>,
}

impl Bijection {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &t in &map {
            if t >= map.len() || seen[t] {
                return Err(Error::invalid(format!("{map:?} is not a permutation")));
            }
            seen[t] = true;
        }
        Ok(Self { map })
    }

    /// `i → (i + 1) mod M`; for two classes this is the flip.
    pub fn cycle(m: usize) -> Self {
        Self {
            map: (0..m).map(|i| (i + 1) % m).collect(),
        }
    }

    pub fn identity(m: usize) -> Self {
        Self { map: (0..m).collect() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> Result<usize> {
        self.map
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class {i} outside [0, {})", self.map.len())))
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &t) in self.map.iter().enumerate() {
            inv[t] = i;
        }
        Self { map: inv }
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        (0..self.map.len()).filter(|&i| self.map[i] == i).collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }
}

impl TryFrom<Vec<usize>> for Bijection {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Bijection> for Vec<usize> {
    fn from(b: Bijection) -> Self {
        b.map
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModifyMode {
    Deterministic,
    Probabilistic,
    /// Never changes the class; for baselines and tests.
    Identity,
}

/// What a probabilistic flip moves to when it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipTarget {
    /// The deterministic mapping.
    #[default]
    Mapping,
    /// A uniformly chosen class other than the current one.
    UniformOther,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifyPolicy {
    pub mode: ModifyMode,
    pub mapping: Bijection,
    #[serde(default)]
    pub flip_target: FlipTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifyOutcome {
    pub target: usize,
    pub applied: bool,
}

impl ModifyPolicy {
    pub fn new(mode: ModifyMode, private_classes: usize) -> Self {
        Self {
            mode,
            mapping: Bijection::cycle(private_classes),
            flip_target: FlipTarget::Mapping,
        }
    }

    pub fn private_classes(&self) -> usize {
        self.mapping.len()
    }

    /// Problems that make the policy unusable, empty when fine.
    pub fn defects(&self) -> Vec<String> {
        let fixed = self.mapping.fixed_points();
        if self.mode != ModifyMode::Identity && !fixed.is_empty() {
            vec![format!("mapping {:?} fixes classes {fixed:?}", self.mapping.as_slice())]
        } else {
            Vec::new()
        }
    }

    /// Chooses `i'` for private class `i`. Draws one coin per call in
    /// probabilistic mode.
    pub fn modify(&self, i: usize, src: &mut dyn RandomSource) -> Result<ModifyOutcome> {
        match self.mode {
            ModifyMode::Identity => {
                self.mapping.apply(i)?;
                Ok(ModifyOutcome {
                    target: i,
                    applied: false,
                })
            }
            ModifyMode::Deterministic => Ok(ModifyOutcome {
                target: modify_deterministic(i, &self.mapping)?,
                applied: true,
            }),
            ModifyMode::Probabilistic => match self.flip_target {
                FlipTarget::Mapping => {
                    let (target, applied) = modify_probabilistic(i, &self.mapping, src)?;
                    Ok(ModifyOutcome { target, applied })
                }
                FlipTarget::UniformOther => {
                    let m = self.mapping.len();
                    if i >= m {
                        return Err(Error::invalid(format!("class {i} outside [0, {m})")));
                    }
                    if !coin(src)? {
                        return Ok(ModifyOutcome {
                            target: i,
                            applied: false,
                        });
                    }
                    let k = uniform_below(src, m - 1)?;
                    let target = if k >= i { k + 1 } else { k };
                    Ok(ModifyOutcome { target, applied: true })
                }
            },
        }
    }
}

/// `mapping(i)`, refusing mappings with fixed points.
pub fn modify_deterministic(i: usize, mapping: &Bijection) -> Result<usize> {
    let fixed = mapping.fixed_points();
    if !fixed.is_empty() {
        return Err(Error::invalid(format!(
            "deterministic mapping {:?} fixes classes {fixed:?}",
            mapping.as_slice()
        )));
    }
    mapping.apply(i)
}

/// `(mapping(i), true)` with probability one half, else `(i, false)`.
pub fn modify_probabilistic(i: usize, mapping: &Bijection, src: &mut dyn RandomSource) -> Result<(usize, bool)> {
    let target = modify_deterministic(i, mapping)?;
    if coin(src)? {
        Ok((target, true))
    } else {
        Ok((i, false))
    }
}
