//! Integer sketches, their bit-sliced form, and Hamming distances.
//!
//! A sketch over an alphabet of size `sigma` is stored twice: once as raw
//! symbols (one byte each) for trie traversal and once bit-sliced, where
//! plane `j` holds bit `j` of every symbol. The distance between two
//! bit-sliced sketches is the popcount of the OR over all planes of the
//! plane-wise XOR, i.e. `ceil(log2 sigma)` XOR passes and one popcount per
//! word.

use crate::error::{invalid, Result};

/// Largest supported sketch length in symbols.
pub const MAX_LENGTH: usize = 4096;

/// Alphabet size and sketch length shared by every sketch of a database.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AlphabetConfig {
    sigma: u16,
    m: u16,
    bits: u8,
}

impl AlphabetConfig {
    pub fn new(sigma: u32, m: usize) -> Result<Self> {
        if !(2..=256).contains(&sigma) {
            return invalid(format!("alphabet size {sigma} outside [2, 256]"));
        }
        if !(1..=MAX_LENGTH).contains(&m) {
            return invalid(format!("sketch length {m} outside [1, {MAX_LENGTH}]"));
        }
        Ok(Self {
            sigma: sigma as u16,
            m: m as u16,
            bits: bits_for(sigma) as u8,
        })
    }

    #[inline]
    pub fn sigma(&self) -> u32 {
        self.sigma as u32
    }

    /// Sketch length in symbols.
    #[inline]
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.m as usize
    }

    /// Bits per symbol, `ceil(log2 sigma)`.
    #[inline]
    pub fn bits_per_symbol(&self) -> usize {
        self.bits as usize
    }

    /// Number of 64-bit words in one bit plane.
    #[inline]
    pub fn words_per_plane(&self) -> usize {
        self.len().div_ceil(64)
    }

    /// Number of 64-bit words in a whole bit-sliced sketch.
    #[inline]
    pub fn sliced_words(&self) -> usize {
        self.bits_per_symbol() * self.words_per_plane()
    }

    pub(crate) fn check_symbols(&self, symbols: &[u8]) -> Result<()> {
        if symbols.len() != self.len() {
            return invalid(format!(
                "sketch has {} symbols, expected {}",
                symbols.len(),
                self.len()
            ));
        }
        if let Some(pos) = symbols.iter().position(|&c| c as u32 >= self.sigma()) {
            return invalid(format!(
                "symbol {} at position {pos} is not below sigma={}",
                symbols[pos],
                self.sigma()
            ));
        }
        Ok(())
    }
}

fn bits_for(sigma: u32) -> u32 {
    32 - (sigma - 1).leading_zeros()
}

/// A validated length-`m` vector of symbols in `[0, sigma)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sketch {
    config: AlphabetConfig,
    symbols: Vec<u8>,
}

impl Sketch {
    pub fn new(config: AlphabetConfig, symbols: Vec<u8>) -> Result<Self> {
        config.check_symbols(&symbols)?;
        Ok(Self { config, symbols })
    }

    pub(crate) fn new_unchecked(config: AlphabetConfig, symbols: Vec<u8>) -> Self {
        debug_assert!(config.check_symbols(&symbols).is_ok());
        Self { config, symbols }
    }

    #[inline]
    pub fn config(&self) -> AlphabetConfig {
        self.config
    }

    #[inline]
    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn into_symbols(self) -> Vec<u8> {
        self.symbols
    }

    /// Copies the symbols in `range` into a sketch over a shorter alphabet config.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Sketch> {
        if range.start >= range.end || range.end > self.len() {
            return invalid(format!("bad sub-sketch range {range:?}"));
        }
        let config = AlphabetConfig::new(self.config.sigma(), range.len())?;
        Ok(Sketch::new_unchecked(config, self.symbols[range].to_vec()))
    }
}

/// Bit planes of a sketch: plane `j`, bit `i` is bit `j` of symbol `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitSlicedSketch {
    config: AlphabetConfig,
    planes: Vec<u64>,
}

impl BitSlicedSketch {
    #[inline]
    pub fn config(&self) -> AlphabetConfig {
        self.config
    }

    /// All planes back to back, `words_per_plane` words each.
    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.planes
    }

    pub fn plane(&self, j: usize) -> &[u64] {
        let w = self.config.words_per_plane();
        &self.planes[j * w..(j + 1) * w]
    }

    pub fn decode(&self) -> Sketch {
        let mut symbols = vec![0u8; self.config.len()];
        decode_into(&self.config, &self.planes, &mut symbols);
        Sketch::new_unchecked(self.config, symbols)
    }
}

pub fn encode_bitsliced(x: &Sketch) -> BitSlicedSketch {
    let mut planes = vec![0u64; x.config.sliced_words()];
    encode_into(&x.config, &x.symbols, &mut planes);
    BitSlicedSketch {
        config: x.config,
        planes,
    }
}

pub(crate) fn encode_into(config: &AlphabetConfig, symbols: &[u8], out: &mut [u64]) {
    let words = config.words_per_plane();
    out.fill(0);
    for (i, &c) in symbols.iter().enumerate() {
        let (word, bit) = (i / 64, i % 64);
        let mut c = c as u32;
        let mut j = 0;
        while c != 0 {
            if c & 1 == 1 {
                out[j * words + word] |= 1u64 << bit;
            }
            c >>= 1;
            j += 1;
        }
    }
}

fn decode_into(config: &AlphabetConfig, planes: &[u64], out: &mut [u8]) {
    let words = config.words_per_plane();
    for (i, c) in out.iter_mut().enumerate() {
        let (word, bit) = (i / 64, i % 64);
        let mut v = 0u32;
        for j in 0..config.bits_per_symbol() {
            v |= (((planes[j * words + word] >> bit) & 1) as u32) << j;
        }
        *c = v as u8;
    }
}

/// Distance between two bit-sliced sketches laid out as `bits` planes of
/// `words` words each.
#[inline]
pub(crate) fn sliced_distance(a: &[u64], b: &[u64], bits: usize, words: usize) -> u32 {
    if words == 1 {
        let mut diff = 0u64;
        for j in 0..bits {
            diff |= a[j] ^ b[j];
        }
        return diff.count_ones();
    }
    let mut dist = 0;
    for w in 0..words {
        let mut diff = 0u64;
        for j in 0..bits {
            diff |= a[j * words + w] ^ b[j * words + w];
        }
        dist += diff.count_ones();
    }
    dist
}

/// Number of positions at which `x` and `y` differ.
pub fn hamming_distance(x: &Sketch, y: &Sketch) -> Result<u32> {
    if x.config != y.config {
        return invalid(format!(
            "sketch configs differ: {:?} vs {:?}",
            x.config, y.config
        ));
    }
    Ok(x.symbols
        .iter()
        .zip(&y.symbols)
        .filter(|(a, b)| a != b)
        .count() as u32)
}

pub fn bitsliced_distance(a: &BitSlicedSketch, b: &BitSlicedSketch) -> Result<u32> {
    if a.config != b.config {
        return invalid(format!(
            "sketch configs differ: {:?} vs {:?}",
            a.config, b.config
        ));
    }
    Ok(sliced_distance(
        &a.planes,
        &b.planes,
        a.config.bits_per_symbol(),
        a.config.words_per_plane(),
    ))
}
