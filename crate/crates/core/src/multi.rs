//! Multi-index variant: one trie per contiguous block of the sketch.
//!
//! If `H(x, y) <= r` and the sketch is cut into `q` blocks, some block has
//! distance at most `floor(r / q)`. Each block trie is searched with that
//! small radius, the candidate ids are merged, and every candidate is
//! verified once at full length.

use std::collections::HashSet;
use std::ops::Range;

use crate::database::{SketchDatabase, SketchId};
use crate::error::{invalid, Result};
use crate::index::{Dyft, DyftConfig, SearchPath};
use crate::sketch::{AlphabetConfig, Sketch};

/// Balanced contiguous partition of `[0, m)` into `q` blocks, longer blocks first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    ranges: Vec<Range<usize>>,
}

impl BlockSpec {
    pub fn new(m: usize, q: usize) -> Result<Self> {
        if q == 0 || q > m {
            return invalid(format!("block count {q} outside [1, {m}]"));
        }
        let (base, extra) = (m / q, m % q);
        let mut start = 0;
        let ranges = (0..q)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Ok(Self { ranges })
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.ranges.len()
    }

    #[inline]
    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.ranges.iter().map(Range::len).collect()
    }
}

/// Block count `floor(r / 2) + 1`, capped at the sketch length.
pub fn gv_block_count(radius: usize, m: usize) -> usize {
    (radius / 2 + 1).min(m)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSearchOutcome {
    pub ids: Vec<SketchId>,
    /// Distinct candidates verified at full length.
    pub candidates_verified: usize,
    /// Block searches that took the linear path.
    pub linear_blocks: usize,
}

#[derive(Clone, Debug)]
pub struct DyftPlus {
    config: DyftConfig,
    spec: BlockSpec,
    blocks: Vec<Dyft>,
    db: SketchDatabase,
}

impl DyftPlus {
    /// `q` block tries, each tuned for radius `floor(target_radius / q)`.
    pub fn new(config: DyftConfig, q: usize) -> Result<Self> {
        let m = config.alphabet.len();
        let spec = BlockSpec::new(m, q)?;
        if config.target_radius > m {
            return invalid(format!("target radius {} exceeds {m}", config.target_radius));
        }
        let blocks = spec
            .ranges()
            .iter()
            .map(|range| {
                let alphabet = AlphabetConfig::new(config.alphabet.sigma(), range.len())?;
                Dyft::new(DyftConfig {
                    alphabet,
                    target_radius: config.target_radius / q,
                    ..config
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            spec,
            blocks,
            db: SketchDatabase::new(config.alphabet),
        })
    }

    /// Block count chosen from the target radius as `floor(r / 2) + 1`.
    pub fn with_gv_blocks(config: DyftConfig) -> Result<Self> {
        Self::new(config, gv_block_count(config.target_radius, config.alphabet.len()))
    }

    #[inline]
    pub fn config(&self) -> &DyftConfig {
        &self.config
    }

    #[inline]
    pub fn block_spec(&self) -> &BlockSpec {
        &self.spec
    }

    #[inline]
    pub fn blocks(&self) -> &[Dyft] {
        &self.blocks
    }

    #[inline]
    pub fn database(&self) -> &SketchDatabase {
        &self.db
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.db.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }

    pub fn insert(&mut self, x: &Sketch) -> Result<SketchId> {
        let id = self.db.insert(x)?;
        for (block, range) in self.blocks.iter_mut().zip(&self.spec.ranges) {
            let block_id = block.insert(&x.slice(range.clone())?)?;
            debug_assert_eq!(block_id, id, "block ids advance in lockstep");
        }
        Ok(id)
    }

    pub fn remove(&mut self, id: SketchId) -> Result<()> {
        self.db.check_live(id)?;
        for block in &mut self.blocks {
            block.remove(id)?;
        }
        self.db.remove(id)
    }

    fn block_queries(&self, y: &Sketch, radius: usize) -> Result<Vec<Sketch>> {
        self.db.encode_query(y, radius)?;
        self.spec.ranges.iter().map(|r| y.slice(r.clone())).collect()
    }

    /// Union of the block search results before full-length verification.
    pub fn candidates(&self, y: &Sketch, radius: usize) -> Result<Vec<SketchId>> {
        let block_radius = radius / self.spec.q();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (block, query) in self.blocks.iter().zip(self.block_queries(y, radius)?) {
            for id in block.search_star(&query, block_radius)?.ids {
                if seen.insert(id) {
                    out.push(id);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn search(&self, y: &Sketch, radius: usize) -> Result<MultiSearchOutcome> {
        let q = self.db.encode_query(y, radius)?;
        let block_radius = radius / self.spec.q();
        let mut seen = HashSet::new();
        let mut ids = Vec::new();
        let mut linear_blocks = 0;
        for (block, query) in self.blocks.iter().zip(self.block_queries(y, radius)?) {
            let found = block.search_star(&query, block_radius)?;
            if found.path == SearchPath::Linear {
                linear_blocks += 1;
            }
            for id in found.ids {
                if seen.insert(id) && self.db.distance_to(id, &q) as usize <= radius {
                    ids.push(id);
                }
            }
        }
        ids.sort_unstable();
        Ok(MultiSearchOutcome {
            ids,
            candidates_verified: seen.len(),
            linear_blocks,
        })
    }

    /// Summed index memory of all block tries.
    pub fn memory_bytes(&self) -> usize {
        self.blocks.iter().map(|b| b.stats().memory_bytes).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sketch(rng: &mut ChaCha8Rng, cfg: AlphabetConfig) -> Sketch {
        let s = (0..cfg.len()).map(|_| rng.gen_range(0..cfg.sigma()) as u8).collect();
        Sketch::new(cfg, s).unwrap()
    }

    #[test]
    fn partitions() {
        assert_eq!(BlockSpec::new(64, 4).unwrap().lengths(), vec![16; 4]);
        assert_eq!(BlockSpec::new(10, 4).unwrap().lengths(), vec![3, 3, 2, 2]);
        assert_eq!(BlockSpec::new(10, 4).unwrap().ranges()[2], 6..8);
        assert_eq!(BlockSpec::new(7, 1).unwrap().ranges(), vec![0..7]);
        assert!(BlockSpec::new(4, 0).is_err());
        assert!(BlockSpec::new(4, 5).is_err());
        assert_eq!(gv_block_count(10, 64), 6);
        assert_eq!(gv_block_count(0, 64), 1);
        assert_eq!(gv_block_count(10, 3), 3);
    }

    #[test]
    fn single_block_matches_plain_index() {
        let alphabet = AlphabetConfig::new(16, 24).unwrap();
        let cfg = DyftConfig::new(alphabet, 3);
        let mut plus = DyftPlus::new(cfg, 1).unwrap();
        let mut plain = Dyft::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<_> = (0..1500).map(|_| random_sketch(&mut rng, alphabet)).collect();
        for x in &xs {
            assert_eq!(plus.insert(x).unwrap(), plain.insert(x).unwrap());
        }
        for k in 0..40 {
            let y = xs[k * 7].clone();
            for r in 0..=4 {
                assert_eq!(plus.search(&y, r).unwrap().ids, plain.search_star(&y, r).unwrap().ids);
            }
        }
    }

    #[test]
    fn insert_remove_keeps_blocks_in_step() {
        let alphabet = AlphabetConfig::new(4, 20).unwrap();
        let mut plus = DyftPlus::new(DyftConfig::new(alphabet, 6), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ids: Vec<_> = (0..800)
            .map(|_| plus.insert(&random_sketch(&mut rng, alphabet)).unwrap())
            .collect();
        for block in plus.blocks() {
            assert_eq!(block.len(), 800);
            block.check_structure().unwrap();
        }
        for &id in &ids {
            plus.remove(id).unwrap();
        }
        assert!(plus.remove(ids[0]).is_err());
        for block in plus.blocks() {
            assert!(block.is_empty());
            assert!(block.root().is_leaf());
        }
    }

    #[test]
    fn candidates_cover_answers() {
        let alphabet = AlphabetConfig::new(2, 64).unwrap();
        let mut plus = DyftPlus::new(DyftConfig::new(alphabet, 8), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<_> = (0..3000).map(|_| random_sketch(&mut rng, alphabet)).collect();
        for x in &xs {
            plus.insert(x).unwrap();
        }
        for x in xs.iter().take(30) {
            let mut y = x.clone().into_symbols();
            for _ in 0..rng.gen_range(0..10) {
                let i = rng.gen_range(0..64);
                y[i] ^= 1;
            }
            let y = Sketch::new(alphabet, y).unwrap();
            for r in [0, 2, 5, 8, 11] {
                let expected = plus.database().linear_search(&y, r).unwrap();
                let cands = plus.candidates(&y, r).unwrap();
                assert!(expected.iter().all(|id| cands.binary_search(id).is_ok()));
                let out = plus.search(&y, r).unwrap();
                assert_eq!(out.ids, expected);
                assert_eq!(out.candidates_verified, cands.len());
            }
        }
        assert!(plus.search(&xs[0], 65).is_err());
    }
}
