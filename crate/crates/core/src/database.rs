//! The dynamic set of sketches and the exhaustive scan over it.

use crate::error::{invalid, Error, Result};
use crate::sketch::{encode_bitsliced, encode_into, sliced_distance, AlphabetConfig, BitSlicedSketch, Sketch};

/// Dense identifier of a sketch, never reused within one database.
pub type SketchId = u64;

/// Sketches stored as raw symbols and bit planes, with tombstone deletion.
#[derive(Clone, Debug)]
pub struct SketchDatabase {
    config: AlphabetConfig,
    symbols: Vec<u8>,
    sliced: Vec<u64>,
    live: Vec<bool>,
    live_count: usize,
}

impl SketchDatabase {
    pub fn new(config: AlphabetConfig) -> Self {
        Self {
            config,
            symbols: Vec::new(),
            sliced: Vec::new(),
            live: Vec::new(),
            live_count: 0,
        }
    }

    #[inline]
    pub fn config(&self) -> AlphabetConfig {
        self.config
    }

    /// Number of live sketches.
    #[inline]
    pub fn len(&self) -> usize {
        self.live_count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.live_count == 0
    }

    /// Number of ids handed out so far, dead ones included.
    #[inline]
    pub fn id_bound(&self) -> SketchId {
        self.live.len() as SketchId
    }

    pub fn insert(&mut self, x: &Sketch) -> Result<SketchId> {
        if x.config() != self.config {
            return invalid(format!(
                "sketch config {:?} does not match database {:?}",
                x.config(),
                self.config
            ));
        }
        Ok(self.push_symbols(x.symbols()))
    }

    pub(crate) fn push_symbols(&mut self, symbols: &[u8]) -> SketchId {
        let id = self.live.len() as SketchId;
        self.symbols.extend_from_slice(symbols);
        let words = self.config.sliced_words();
        let start = self.sliced.len();
        self.sliced.resize(start + words, 0);
        encode_into(&self.config, symbols, &mut self.sliced[start..]);
        self.live.push(true);
        self.live_count += 1;
        id
    }

    pub fn remove(&mut self, id: SketchId) -> Result<()> {
        self.check_live(id)?;
        self.live[id as usize] = false;
        self.live_count -= 1;
        Ok(())
    }

    pub fn get(&self, id: SketchId) -> Result<Sketch> {
        self.check_live(id)?;
        Ok(Sketch::new_unchecked(self.config, self.symbols(id).to_vec()))
    }

    #[inline]
    pub fn is_live(&self, id: SketchId) -> bool {
        self.live.get(id as usize).copied().unwrap_or(false)
    }

    pub(crate) fn check_live(&self, id: SketchId) -> Result<()> {
        if self.is_live(id) {
            Ok(())
        } else {
            Err(Error::NotFound(format!("sketch id {id} is not live")))
        }
    }

    /// Raw symbols of `id`, live or dead.
    #[inline]
    pub(crate) fn symbols(&self, id: SketchId) -> &[u8] {
        let m = self.config.len();
        let i = id as usize * m;
        &self.symbols[i..i + m]
    }

    #[inline]
    pub(crate) fn sliced(&self, id: SketchId) -> &[u64] {
        let w = self.config.sliced_words();
        let i = id as usize * w;
        &self.sliced[i..i + w]
    }

    /// Distance from the stored sketch `id` to an encoded query of the same config.
    #[inline]
    pub(crate) fn distance_to(&self, id: SketchId, query: &BitSlicedSketch) -> u32 {
        sliced_distance(
            self.sliced(id),
            query.words(),
            self.config.bits_per_symbol(),
            self.config.words_per_plane(),
        )
    }

    pub fn live_ids(&self) -> impl Iterator<Item = SketchId> + '_ {
        self.live
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(i, _)| i as SketchId)
    }

    pub(crate) fn encode_query(&self, y: &Sketch, radius: usize) -> Result<BitSlicedSketch> {
        if y.config() != self.config {
            return invalid(format!(
                "query config {:?} does not match database {:?}",
                y.config(),
                self.config
            ));
        }
        if radius > self.config.len() {
            return invalid(format!(
                "radius {radius} exceeds sketch length {}",
                self.config.len()
            ));
        }
        Ok(encode_bitsliced(y))
    }

    /// Every live id within distance `radius` of `y`, in ascending order.
    pub fn linear_search(&self, y: &Sketch, radius: usize) -> Result<Vec<SketchId>> {
        let q = self.encode_query(y, radius)?;
        Ok(self.scan(&q, radius))
    }

    pub(crate) fn scan(&self, q: &BitSlicedSketch, radius: usize) -> Vec<SketchId> {
        let bits = self.config.bits_per_symbol();
        let words = self.config.words_per_plane();
        let stride = self.config.sliced_words();
        let qw = q.words();
        let mut out = Vec::new();
        for (i, (planes, &live)) in self.sliced.chunks_exact(stride).zip(&self.live).enumerate() {
            if live && sliced_distance(planes, qw, bits, words) as usize <= radius {
                out.push(i as SketchId);
            }
        }
        out
    }

    /// Bytes held by the stored sketches (both representations plus flags).
    pub fn memory_bytes(&self) -> usize {
        self.symbols.len() + self.sliced.len() * 8 + self.live.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::hamming_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sketch(rng: &mut ChaCha8Rng, cfg: AlphabetConfig) -> Sketch {
        let s = (0..cfg.len()).map(|_| rng.gen_range(0..cfg.sigma()) as u8).collect();
        Sketch::new(cfg, s).unwrap()
    }

    #[test]
    fn dense_ids_and_tombstones() {
        let cfg = AlphabetConfig::new(4, 5).unwrap();
        let mut db = SketchDatabase::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<_> = (0..5).map(|_| random_sketch(&mut rng, cfg)).collect();
        for (k, x) in xs.iter().enumerate() {
            assert_eq!(db.insert(x).unwrap(), k as SketchId);
        }
        assert_eq!(db.get(3).unwrap(), xs[3]);
        db.remove(3).unwrap();
        assert_eq!(db.len(), 4);
        assert!(matches!(db.get(3), Err(Error::NotFound(_))));
        assert!(matches!(db.remove(3), Err(Error::NotFound(_))));
        assert!(matches!(db.get(99), Err(Error::NotFound(_))));
        // never reused
        assert_eq!(db.insert(&xs[0]).unwrap(), 5);
        assert_eq!(db.live_ids().collect::<Vec<_>>(), vec![0, 1, 2, 4, 5]);
    }

    #[test]
    fn rejects_foreign_config() {
        let mut db = SketchDatabase::new(AlphabetConfig::new(4, 5).unwrap());
        let other = Sketch::new(AlphabetConfig::new(4, 6).unwrap(), vec![0; 6]).unwrap();
        assert!(db.insert(&other).is_err());
        assert!(db.linear_search(&other, 0).is_err());
    }

    #[test]
    fn linear_search_edges() {
        let cfg = AlphabetConfig::new(16, 8).unwrap();
        let mut db = SketchDatabase::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_sketch(&mut rng, cfg);
        assert!(db.linear_search(&y, 3).unwrap().is_empty());
        assert!(db.linear_search(&y, 9).is_err());
        for _ in 0..20 {
            db.insert(&random_sketch(&mut rng, cfg)).unwrap();
        }
        db.remove(7).unwrap();
        let all = db.linear_search(&y, 8).unwrap();
        assert_eq!(all, db.live_ids().collect::<Vec<_>>());
    }

    #[test]
    fn linear_search_matches_filter() {
        let cfg = AlphabetConfig::new(4, 12).unwrap();
        let mut db = SketchDatabase::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<_> = (0..1000).map(|_| random_sketch(&mut rng, cfg)).collect();
        for x in &xs {
            db.insert(x).unwrap();
        }
        for _ in 0..20 {
            let y = random_sketch(&mut rng, cfg);
            let mut prev = Vec::new();
            for r in 0..=cfg.len() {
                let got = db.linear_search(&y, r).unwrap();
                let expected: Vec<SketchId> = xs
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| {
                        x.symbols().iter().zip(y.symbols()).filter(|(a, b)| a != b).count() <= r
                    })
                    .map(|(i, _)| i as SketchId)
                    .collect();
                assert_eq!(got, expected);
                assert!(prev.iter().all(|id| got.contains(id)));
                for &id in &got {
                    assert!(hamming_distance(&xs[id as usize], &y).unwrap() as usize <= r);
                }
                prev = got;
            }
        }
    }
}
