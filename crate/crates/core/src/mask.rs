use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("invalid mask {0:?}: expected hex digits, \"all\" or \"none\"")]
    Syntax(String),
    #[error("mask {mask:?} activates a site beyond the {len} candidates")]
    OutOfRange { mask: String, len: usize },
}

/// Active/inactive flag per candidate site, in candidate order.
///
/// Ordering is lexicographic over the flags with candidate 0 first and
/// `false < true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationMask {
    bits: Vec<bool>,
}

impl StationMask {
    pub fn none(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn all(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(len: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::none(len);
        for i in active {
            m.bits[i] = true;
        }
        m
    }

    /// Bit `i` of `word` activates candidate `i`.
    pub fn from_word(len: usize, word: u64) -> Self {
        Self {
            bits: (0..len).map(|i| (word >> i) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.bits[i] = on;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, b)| b.then_some(i))
    }

    /// True when every site active in `other` is also active here.
    pub fn contains(&self, other: &StationMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| *a || !*b)
    }

    /// Hex rendering: candidate `i` is bit `i` of a big-endian number padded
    /// to `ceil(len / 4)` digits. An empty mask renders as `""`.
    pub fn to_hex(&self) -> String {
        let digits = self.bits.len().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4)
                    .filter(|b| self.bits.get(d * 4 + b).copied().unwrap_or(false))
                    .fold(0u32, |acc, b| acc | (1 << b));
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    /// Parses `all`, `none` or a hex mask as produced by [`StationMask::to_hex`].
    pub fn parse(text: &str, len: usize) -> Result<Self, MaskError> {
        let t = text.trim();
        match t {
            "all" => return Ok(Self::all(len)),
            "none" => return Ok(Self::none(len)),
            _ => {}
        }
        let hex = t.strip_prefix("0x").unwrap_or(t);
        if hex.is_empty() && len > 0 {
            return Err(MaskError::Syntax(text.to_string()));
        }
        let mut bits = vec![false; len];
        for (d, c) in hex.chars().rev().enumerate() {
            let nibble = c.to_digit(16).ok_or_else(|| MaskError::Syntax(text.to_string()))?;
            for b in 0..4 {
                if nibble & (1 << b) != 0 {
                    let i = d * 4 + b;
                    if i >= len {
                        return Err(MaskError::OutOfRange {
                            mask: text.to_string(),
                            len,
                        });
                    }
                    bits[i] = true;
                }
            }
        }
        Ok(Self { bits })
    }
}
