//! On-disk sketch files.
//!
//! Layout: `"DYFS"`, version byte `1`, sigma as u16 LE, m as u16 LE, count
//! as u64 LE, then `count * m` bytes with one symbol per byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{invalid, Result};
use crate::sketch::{AlphabetConfig, Sketch};

pub const MAGIC: &[u8; 4] = b"DYFS";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 17;

/// A sequence of sketches over one alphabet, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchFile {
    config: AlphabetConfig,
    symbols: Vec<u8>,
}

impl SketchFile {
    pub fn new(config: AlphabetConfig) -> Self {
        Self {
            config,
            symbols: Vec::new(),
        }
    }

    pub fn from_symbols(config: AlphabetConfig, symbols: Vec<u8>) -> Result<Self> {
        if !symbols.len().is_multiple_of(config.len()) {
            return invalid(format!(
                "{} symbols is not a multiple of length {}",
                symbols.len(),
                config.len()
            ));
        }
        for record in symbols.chunks_exact(config.len()) {
            config.check_symbols(record)?;
        }
        Ok(Self { config, symbols })
    }

    #[inline]
    pub fn config(&self) -> AlphabetConfig {
        self.config
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.symbols.len() / self.config.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn push(&mut self, x: &Sketch) -> Result<()> {
        if x.config() != self.config {
            return invalid("sketch alphabet does not match the file");
        }
        self.symbols.extend_from_slice(x.symbols());
        Ok(())
    }

    pub fn symbols(&self, i: usize) -> &[u8] {
        let m = self.config.len();
        &self.symbols[i * m..(i + 1) * m]
    }

    pub fn get(&self, i: usize) -> Option<Sketch> {
        (i < self.len()).then(|| Sketch::new_unchecked(self.config, self.symbols(i).to_vec()))
    }

    pub fn iter(&self) -> impl Iterator<Item = Sketch> + '_ {
        self.symbols
            .chunks_exact(self.config.len())
            .map(|c| Sketch::new_unchecked(self.config, c.to_vec()))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION])?;
        w.write_all(&(self.config.sigma() as u16).to_le_bytes())?;
        w.write_all(&(self.config.len() as u16).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.symbols)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_BYTES];
        r.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return invalid("not a sketch file (bad magic)");
        }
        if header[4] != VERSION {
            return invalid(format!("unsupported sketch file version {}", header[4]));
        }
        let sigma = u16::from_le_bytes([header[5], header[6]]);
        let m = u16::from_le_bytes([header[7], header[8]]) as usize;
        let count = u64::from_le_bytes(header[9..17].try_into().unwrap());
        let config = AlphabetConfig::new(sigma.into(), m)?;
        let Some(body) = count.checked_mul(m as u64).and_then(|b| usize::try_from(b).ok()) else {
            return invalid(format!("record count {count} is too large"));
        };
        let mut symbols = Vec::new();
        (&mut r).take(body as u64).read_to_end(&mut symbols)?;
        if symbols.len() != body {
            return invalid(format!("truncated body: {} of {body} bytes", symbols.len()));
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return invalid("trailing bytes after the last record");
        }
        Self::from_symbols(config, symbols)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
