//! Byte packing of sketches and the precomputed label tables.
//!
//! `z = floor(log_sigma 256)` symbols are packed into one byte label
//! `b = c_1 + c_2 sigma + ... + c_z sigma^(z-1)`, so a trie over byte
//! sketches has `ceil(m / z)` levels. Two `sigma^z x sigma^z` tables let
//! inner nodes answer "which labels are within r' of b" without unpacking:
//! `dist[b][a]` is the symbol-level distance of the packed tuples and row
//! `b` of `order` lists every label by increasing distance to `b`.

use crate::error::{invalid, Result};
use crate::sketch::Sketch;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PackConfig {
    sigma: u32,
    z: usize,
    m: usize,
    m_packed: usize,
    label_count: usize,
}

impl PackConfig {
    pub fn new(sigma: u32, m: usize) -> Result<Self> {
        if !(2..=256).contains(&sigma) {
            return invalid(format!("alphabet size {sigma} outside [2, 256]"));
        }
        if m == 0 {
            return invalid("sketch length must be positive");
        }
        let mut z = 1;
        while (sigma as usize).pow(z as u32 + 1) <= 256 {
            z += 1;
        }
        Self::with_z(sigma, m, z)
    }

    /// Packs only `z` symbols per byte. Any `z` with `sigma^z <= 256` works;
    /// smaller values give smaller label tables and a deeper trie.
    pub fn with_z(sigma: u32, m: usize, z: usize) -> Result<Self> {
        if !(2..=256).contains(&sigma) {
            return invalid(format!("alphabet size {sigma} outside [2, 256]"));
        }
        if m == 0 {
            return invalid("sketch length must be positive");
        }
        let labels = (sigma as usize).checked_pow(z as u32).filter(|&l| l <= 256);
        let Some(label_count) = labels.filter(|_| z > 0) else {
            return invalid(format!("{z} symbols of sigma={sigma} do not fit a byte"));
        };
        Ok(Self {
            sigma,
            z,
            m,
            m_packed: m.div_ceil(z),
            label_count,
        })
    }

    #[inline]
    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    /// Symbols per byte.
    #[inline]
    pub fn z(&self) -> usize {
        self.z
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Length of a packed sketch in bytes.
    #[inline]
    pub fn m_packed(&self) -> usize {
        self.m_packed
    }

    /// `sigma^z`, the number of distinct byte labels.
    #[inline]
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Packs byte `pos` of a raw symbol sequence. Symbols past the end pad as 0.
    #[inline]
    pub(crate) fn pack_at(&self, symbols: &[u8], pos: usize) -> u8 {
        let start = pos * self.z;
        let end = (start + self.z).min(symbols.len());
        let mut b = 0u32;
        for &c in symbols[start..end].iter().rev() {
            b = b * self.sigma + c as u32;
        }
        b as u8
    }

    pub(crate) fn pack_symbols(&self, symbols: &[u8]) -> Vec<u8> {
        (0..self.m_packed).map(|d| self.pack_at(symbols, d)).collect()
    }

    pub fn unpack_byte(&self, b: u8) -> Result<Vec<u8>> {
        if b as usize >= self.label_count {
            return invalid(format!("label {b} is not below {}", self.label_count));
        }
        let mut v = b as u32;
        Ok((0..self.z)
            .map(|_| {
                let c = v % self.sigma;
                v /= self.sigma;
                c as u8
            })
            .collect())
    }
}

/// A packed sketch: `m_packed` labels, each below `sigma^z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ByteSketch(Vec<u8>);

impl ByteSketch {
    #[inline]
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn unpack(&self, cfg: &PackConfig) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.0.len() * cfg.z);
        for &b in &self.0 {
            out.extend(cfg.unpack_byte(b)?);
        }
        out.truncate(cfg.m);
        Ok(out)
    }
}

pub fn pack_sketch(x: &Sketch, cfg: &PackConfig) -> Result<ByteSketch> {
    if x.len() != cfg.m {
        return invalid(format!("sketch has {} symbols, expected {}", x.len(), cfg.m));
    }
    if let Some(&c) = x.symbols().iter().find(|&&c| c as u32 >= cfg.sigma) {
        return invalid(format!("symbol {c} is not below sigma={}", cfg.sigma));
    }
    Ok(ByteSketch(cfg.pack_symbols(x.symbols())))
}

/// The distance table and the distance-ordered label table for one alphabet.
#[derive(Clone, Debug)]
pub struct PackTables {
    labels: usize,
    z: usize,
    dist: Vec<u8>,
    order: Vec<u8>,
}

impl PackTables {
    pub fn build(cfg: &PackConfig) -> Self {
        let labels = cfg.label_count;
        let tuples: Vec<Vec<u8>> = (0..labels)
            .map(|b| cfg.unpack_byte(b as u8).expect("label in range"))
            .collect();
        let mut dist = vec![0u8; labels * labels];
        for b in 0..labels {
            for a in 0..labels {
                dist[b * labels + a] = tuples[b]
                    .iter()
                    .zip(&tuples[a])
                    .filter(|(x, y)| x != y)
                    .count() as u8;
            }
        }
        let mut order = Vec::with_capacity(labels * labels);
        for b in 0..labels {
            let row = &dist[b * labels..(b + 1) * labels];
            let mut by_dist: Vec<u8> = (0..labels).map(|a| a as u8).collect();
            // stable sort keeps ascending label order within equal distances
            by_dist.sort_by_key(|&a| row[a as usize]);
            order.extend(by_dist);
        }
        Self {
            labels,
            z: cfg.z,
            dist,
            order,
        }
    }

    #[inline]
    pub fn label_count(&self) -> usize {
        self.labels
    }

    #[inline]
    pub fn z(&self) -> usize {
        self.z
    }

    /// Row `b` of the distance table.
    #[inline]
    pub fn dist_row(&self, b: u8) -> &[u8] {
        let b = b as usize;
        &self.dist[b * self.labels..(b + 1) * self.labels]
    }

    /// Row `b` of the order table: every label, nearest to `b` first.
    #[inline]
    pub fn order_row(&self, b: u8) -> &[u8] {
        let b = b as usize;
        &self.order[b * self.labels..(b + 1) * self.labels]
    }

    #[inline]
    pub(crate) fn dist_unchecked(&self, b: u8, a: u8) -> u8 {
        self.dist[b as usize * self.labels + a as usize]
    }

    pub fn packed_distance(&self, b: u8, a: u8) -> Result<u32> {
        if b as usize >= self.labels || a as usize >= self.labels {
            return invalid(format!("labels ({b}, {a}) not below {}", self.labels));
        }
        Ok(self.dist_unchecked(b, a) as u32)
    }

    /// Combined size of both tables in bytes.
    pub fn size_bytes(&self) -> usize {
        self.dist.len() + self.order.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{hamming_distance, AlphabetConfig};
    use proptest::prelude::*;

    #[test]
    fn symbols_per_byte() {
        for (sigma, z) in [(2, 8), (3, 5), (4, 4), (5, 3), (6, 3), (7, 2), (15, 2), (16, 2), (17, 1), (256, 1)] {
            let cfg = PackConfig::new(sigma, 10).unwrap();
            assert_eq!(cfg.z(), z, "sigma={sigma}");
            assert!(cfg.label_count() <= 256);
            assert!(cfg.label_count() * sigma as usize > 256);
        }
        assert!(PackConfig::new(1, 4).is_err());
        assert!(PackConfig::new(300, 4).is_err());
    }

    #[test]
    fn explicit_symbols_per_byte() {
        let cfg = PackConfig::with_z(2, 9, 2).unwrap();
        assert_eq!((cfg.label_count(), cfg.m_packed()), (4, 5));
        assert_eq!(cfg.pack_symbols(&[1, 0, 1, 1, 0, 0, 0, 1, 1]), vec![1, 3, 0, 2, 1]);
        let tables = PackTables::build(&cfg);
        assert_eq!(tables.dist_row(0), &[0, 1, 1, 2]);
        assert_eq!(PackConfig::with_z(4, 3, 2).unwrap().label_count(), 16);
        assert!(PackConfig::with_z(2, 9, 9).is_err());
        assert!(PackConfig::with_z(2, 9, 0).is_err());
    }

    #[test]
    fn packing_examples() {
        let cfg = PackConfig::new(16, 2).unwrap();
        let x = Sketch::new(AlphabetConfig::new(16, 2).unwrap(), vec![3, 5]).unwrap();
        assert_eq!(pack_sketch(&x, &cfg).unwrap().bytes(), &[83]);
        assert_eq!(cfg.unpack_byte(83).unwrap(), vec![3, 5]);
        assert_eq!(cfg.unpack_byte(0).unwrap(), vec![0, 0]);

        let cfg = PackConfig::new(256, 3).unwrap();
        let x = Sketch::new(AlphabetConfig::new(256, 3).unwrap(), vec![7, 255, 0]).unwrap();
        assert_eq!(pack_sketch(&x, &cfg).unwrap().bytes(), &[7, 255, 0]);

        let cfg = PackConfig::new(2, 9).unwrap();
        let x = Sketch::new(AlphabetConfig::new(2, 9).unwrap(), vec![1, 0, 0, 0, 0, 0, 0, 1, 1]).unwrap();
        let packed = pack_sketch(&x, &cfg).unwrap();
        assert_eq!(packed.bytes(), &[0b1000_0001, 1]);
        assert_eq!(cfg.unpack_byte(1).unwrap(), vec![1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(packed.unpack(&cfg).unwrap(), x.symbols());
    }

    #[test]
    fn unpack_out_of_range() {
        let cfg = PackConfig::new(3, 5).unwrap();
        assert!(cfg.unpack_byte(243).is_err());
        assert!(cfg.unpack_byte(242).is_ok());
    }

    #[test]
    fn pack_rejects_wrong_alphabet() {
        let cfg = PackConfig::new(4, 3).unwrap();
        let x = Sketch::new(AlphabetConfig::new(8, 3).unwrap(), vec![7, 0, 0]).unwrap();
        assert!(pack_sketch(&x, &cfg).is_err());
    }

    #[test]
    fn unpack_roundtrip_exhaustive() {
        for sigma in [2, 4, 16] {
            let cfg = PackConfig::new(sigma, 8).unwrap();
            for b in 0..cfg.label_count() {
                let tuple = cfg.unpack_byte(b as u8).unwrap();
                assert_eq!(tuple.len(), cfg.z());
                assert_eq!(cfg.pack_at(&tuple, 0), b as u8);
            }
        }
    }

    #[test]
    fn table_spot_values() {
        let cfg = PackConfig::new(16, 2).unwrap();
        let t = PackTables::build(&cfg);
        assert_eq!(t.packed_distance(83, 19).unwrap(), 1);
        assert_eq!(t.packed_distance(83, 83).unwrap(), 0);
        assert!(t.packed_distance(0, 255).is_ok());
        let cfg4 = PackConfig::new(4, 8).unwrap();
        let t4 = PackTables::build(&cfg4);
        assert_eq!(t4.label_count(), 256);
        let cfg3 = PackConfig::new(3, 8).unwrap();
        let t3 = PackTables::build(&cfg3);
        assert!(t3.packed_distance(243, 0).is_err());
    }

    #[test]
    fn binary_labels_use_popcount() {
        let t = PackTables::build(&PackConfig::new(2, 8).unwrap());
        for b in 0..=255u8 {
            for a in 0..=255u8 {
                assert_eq!(t.packed_distance(b, a).unwrap(), (a ^ b).count_ones());
            }
        }
    }

    #[test]
    fn sigma4_table_matches_unpacked_compare() {
        let cfg = PackConfig::new(4, 8).unwrap();
        let t = PackTables::build(&cfg);
        for b in 0..=255u8 {
            let tb = cfg.unpack_byte(b).unwrap();
            for a in 0..=255u8 {
                let ta = cfg.unpack_byte(a).unwrap();
                let naive = tb.iter().zip(&ta).filter(|(x, y)| x != y).count() as u32;
                assert_eq!(t.packed_distance(b, a).unwrap(), naive);
            }
        }
    }

    #[test]
    fn tables_fit_in_128kb() {
        for sigma in [2, 3, 4, 16, 256] {
            let t = PackTables::build(&PackConfig::new(sigma, 8).unwrap());
            assert!(t.size_bytes() <= 128 * 1024);
        }
    }

    proptest! {
        #[test]
        fn packed_distances_sum_to_hamming(
            (sigma, a, b) in (prop::sample::select(vec![2u32, 3, 5, 16, 100]), 1..70usize)
                .prop_flat_map(|(sigma, m)| {
                    let s = (0..sigma).prop_map(|c| c as u8);
                    (Just(sigma), prop::collection::vec(s.clone(), m), prop::collection::vec(s, m))
                })
        ) {
            let m = a.len();
            let acfg = AlphabetConfig::new(sigma, m).unwrap();
            let (x, y) = (Sketch::new(acfg, a).unwrap(), Sketch::new(acfg, b).unwrap());
            let cfg = PackConfig::new(sigma, m).unwrap();
            let t = PackTables::build(&cfg);
            let (px, py) = (pack_sketch(&x, &cfg).unwrap(), pack_sketch(&y, &cfg).unwrap());
            prop_assert_eq!(px.unpack(&cfg).unwrap(), x.symbols());
            let total: u32 = px.bytes().iter().zip(py.bytes())
                .map(|(&p, &q)| t.packed_distance(p, q).unwrap())
                .sum();
            prop_assert_eq!(total, hamming_distance(&x, &y).unwrap());
        }
    }
}
