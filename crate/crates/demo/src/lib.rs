//! Browser bindings for the interactive demo page in `www/`.
//!
//! Three things can be poked at from the page: the split thresholds the cost
//! model picks per trie level, the byte labels reachable from one label
//! within an error budget, and a small live index that can be filled,
//! edited and searched.

use std::sync::Arc;

use dyft::cost::{optimal_threshold, reach_prob, CostParams};
use dyft::{AlphabetConfig, Dyft, DyftConfig, PackConfig, PackTables, SearchPath, Sketch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Split threshold per packed depth (infinite values are reported as -1).
#[wasm_bindgen]
pub fn threshold_curve(sigma: u32, m: usize, radius: usize, w_in: f64) -> Result<Vec<f64>, JsError> {
    let pack = PackConfig::new(sigma, m).map_err(js_err)?;
    let params = CostParams::for_pack(&pack, radius, w_in).map_err(js_err)?;
    Ok((0..=pack.m_packed())
        .map(|d| {
            let t = optimal_threshold(d, &params);
            if t.is_finite() {
                t
            } else {
                -1.0
            }
        })
        .collect())
}

/// Probability that a random prefix of each packed depth is still within `radius`.
#[wasm_bindgen]
pub fn reach_curve(sigma: u32, m: usize, radius: usize) -> Result<Vec<f64>, JsError> {
    let pack = PackConfig::new(sigma, m).map_err(js_err)?;
    Ok((0..=pack.m_packed())
        .map(|d| reach_prob((d * pack.z()).min(m), radius, sigma))
        .collect())
}

/// Symbols packed per byte label for `sigma`.
#[wasm_bindgen]
pub fn symbols_per_label(sigma: u32) -> Result<usize, JsError> {
    Ok(PackConfig::new(sigma, 1).map_err(js_err)?.z())
}

/// Labels within `budget` of `label`, nearest first, as `[label, dist, label, dist, ...]`.
#[wasm_bindgen]
pub fn label_neighbors(sigma: u32, label: u32, budget: u32) -> Result<Vec<u32>, JsError> {
    let pack = PackConfig::new(sigma, 1).map_err(js_err)?;
    if label as usize >= pack.label_count() {
        return Err(JsError::new(&format!("label must be below {}", pack.label_count())));
    }
    let tables = PackTables::build(&pack);
    let b = label as u8;
    let row = tables.dist_row(b);
    Ok(tables
        .order_row(b)
        .iter()
        .take_while(|&&a| row[a as usize] as u32 <= budget)
        .flat_map(|&a| [a as u32, row[a as usize] as u32])
        .collect())
}

/// Symbols of a label, lowest position first.
#[wasm_bindgen]
pub fn unpack_label(sigma: u32, label: u32) -> Result<Vec<u8>, JsError> {
    let pack = PackConfig::new(sigma, 1).map_err(js_err)?;
    let b = u8::try_from(label).map_err(js_err)?;
    pack.unpack_byte(b).map_err(js_err)
}

#[wasm_bindgen]
pub struct SearchResult {
    ids: Vec<u64>,
    distances: Vec<u32>,
    linear: bool,
    candidates: usize,
}

#[wasm_bindgen]
impl SearchResult {
    #[wasm_bindgen(getter)]
    pub fn ids(&self) -> Vec<u64> {
        self.ids.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn distances(&self) -> Vec<u32> {
        self.distances.clone()
    }

    /// True when the search fell back to a linear scan.
    #[wasm_bindgen(getter)]
    pub fn linear(&self) -> bool {
        self.linear
    }

    #[wasm_bindgen(getter)]
    pub fn candidates(&self) -> usize {
        self.candidates
    }
}

/// A live index over random or typed-in sketches.
#[wasm_bindgen]
pub struct DemoIndex {
    alphabet: AlphabetConfig,
    index: Dyft,
    rng: ChaCha8Rng,
}

#[wasm_bindgen]
impl DemoIndex {
    #[wasm_bindgen(constructor)]
    pub fn new(sigma: u32, m: usize, radius: usize, seed: u64) -> Result<DemoIndex, JsError> {
        let alphabet = AlphabetConfig::new(sigma, m).map_err(js_err)?;
        let pack = PackConfig::new(sigma, m).map_err(js_err)?;
        let tables = Arc::new(PackTables::build(&pack));
        let index = Dyft::with_tables(DyftConfig::new(alphabet, radius), pack, tables).map_err(js_err)?;
        Ok(DemoIndex {
            alphabet,
            index,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn random_sketch(&mut self) -> Sketch {
        let sigma = self.alphabet.sigma();
        let symbols = (0..self.alphabet.len())
            .map(|_| self.rng.gen_range(0..sigma) as u8)
            .collect();
        Sketch::new(self.alphabet, symbols).expect("symbols below sigma")
    }

    /// Inserts `count` uniform random sketches.
    pub fn fill_random(&mut self, count: usize) -> Result<(), JsError> {
        for _ in 0..count {
            let x = self.random_sketch();
            self.index.insert(&x).map_err(js_err)?;
        }
        Ok(())
    }

    /// A random sketch as text, handy as a starting query.
    pub fn random_text(&mut self) -> String {
        format_symbols(self.random_sketch().symbols())
    }

    /// Inserts a sketch written as comma- or space-separated symbols; returns its id.
    pub fn insert(&mut self, text: &str) -> Result<u64, JsError> {
        let x = self.parse(text)?;
        self.index.insert(&x).map_err(js_err)
    }

    pub fn remove(&mut self, id: u64) -> Result<(), JsError> {
        self.index.remove(id).map_err(js_err)
    }

    pub fn get(&self, id: u64) -> Result<String, JsError> {
        Ok(format_symbols(self.index.get(id).map_err(js_err)?.symbols()))
    }

    pub fn search(&self, text: &str, radius: usize) -> Result<SearchResult, JsError> {
        let y = self.parse(text)?;
        let out = self.index.search_star(&y, radius).map_err(js_err)?;
        let distances = out
            .ids
            .iter()
            .map(|&id| {
                let x = self.index.get(id).expect("answers are live");
                dyft::hamming_distance(&x, &y).expect("same alphabet")
            })
            .collect();
        Ok(SearchResult {
            ids: out.ids,
            distances,
            linear: out.path == SearchPath::Linear,
            candidates: out.candidates_verified,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Multi-line human readable summary of the trie.
    pub fn stats(&self) -> String {
        let s = self.index.stats();
        let kinds: Vec<String> = dyft::node::NodeKind::INNER
            .iter()
            .zip(s.inner_kind_counts)
            .filter(|(_, n)| *n > 0)
            .map(|(k, n)| format!("{}:{n}", k.name()))
            .collect();
        format!(
            "sketches      {}\ninner nodes   {} ({})\nleaves        {}\nmax depth     {}\nmemory        {} bytes\nC_trie        {:.1}\nC_ls          {:.1}\nsearch path   {}",
            self.index.len(),
            s.inner_nodes,
            if kinds.is_empty() { "none".to_string() } else { kinds.join(" ") },
            s.leaves,
            s.max_depth,
            s.memory_bytes,
            s.c_trie,
            s.c_ls,
            if self.index.prefers_linear() { "linear scan" } else { "trie" }
        )
    }

    fn parse(&self, text: &str) -> Result<Sketch, JsError> {
        let symbols = parse_symbols(text)?;
        Sketch::new(self.alphabet, symbols).map_err(js_err)
    }
}

fn format_symbols(symbols: &[u8]) -> String {
    symbols.iter().map(u8::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_symbols(text: &str) -> Result<Vec<u8>, JsError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u8>().map_err(|_| JsError::new(&format!("bad symbol {t:?}"))))
        .collect()
}
