//! The dynamic filter trie.
//!
//! Sketches are packed into byte labels and inserted into a trie whose
//! leaves hold posting lists of sketch ids. A leaf is split into an inner
//! node with one child leaf per distinct next label as soon as its list is
//! longer than the cost-model threshold of its depth, so the trie only
//! grows where it pays off for radius-`r` searches. A search walks the trie
//! with a per-path error budget and verifies every id in each reached leaf
//! against the query's bit planes.
//!
//! The index keeps a running estimate of its own expected search cost
//! (`c_trie`) and [`Dyft::search_star`] falls back to a linear scan when a
//! scan is estimated to be no more expensive.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cost::{CostModel, CostParams};
use crate::database::{SketchDatabase, SketchId};
use crate::error::{invalid, Error, Result};
use crate::leaf::{LeafStore, GROUP_SIZE};
use crate::node::{ChildMatch, NodeHandle, NodeKind, NodePools};
use crate::pack::{PackConfig, PackTables};
use crate::sketch::{AlphabetConfig, Sketch};

pub const DEFAULT_W_IN: f64 = 0.5;
pub const DEFAULT_REFERENCE_WIDTH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyftConfig {
    pub alphabet: AlphabetConfig,
    /// Radius the cost model is tuned for.
    pub target_radius: usize,
    /// Weight of inner-node costs against verification costs.
    pub w_in: f64,
    /// Width in bits of a child reference, used for memory accounting.
    pub reference_width: usize,
}

impl DyftConfig {
    pub fn new(alphabet: AlphabetConfig, target_radius: usize) -> Self {
        Self {
            alphabet,
            target_radius,
            w_in: DEFAULT_W_IN,
            reference_width: DEFAULT_REFERENCE_WIDTH,
        }
    }

    pub fn with_w_in(mut self, w_in: f64) -> Self {
        self.w_in = w_in;
        self
    }

    /// Posting lists per leaf-store group.
    pub fn leaf_group(&self) -> usize {
        GROUP_SIZE
    }

    fn validate(&self) -> Result<()> {
        if self.target_radius > self.alphabet.len() {
            return invalid(format!(
                "target radius {} exceeds sketch length {}",
                self.target_radius,
                self.alphabet.len()
            ));
        }
        if !(self.w_in > 0.0 && self.w_in.is_finite()) {
            return invalid(format!("inner-node weight {} must be positive", self.w_in));
        }
        if self.reference_width == 0 {
            return invalid("reference width must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchPath {
    Trie,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    /// Matching ids in ascending order.
    pub ids: Vec<SketchId>,
    pub path: SearchPath,
    /// Number of distance computations performed.
    pub candidates_verified: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexStats {
    /// Live inner nodes per kind, indexed like [`NodeKind::INNER`].
    pub inner_kind_counts: [usize; 8],
    pub inner_nodes: usize,
    pub leaves: usize,
    /// List length -> number of leaves with that length.
    pub list_length_histogram: BTreeMap<usize, usize>,
    pub max_depth: usize,
    pub inner_node_bytes: usize,
    pub leaf_store_bytes: usize,
    pub memory_bytes: usize,
    pub c_trie: f64,
    pub c_ls: f64,
}

#[derive(Clone, Debug)]
pub struct Dyft {
    config: DyftConfig,
    pack: PackConfig,
    tables: Arc<PackTables>,
    cost: CostModel,
    db: SketchDatabase,
    nodes: NodePools,
    leaves: LeafStore,
    root: NodeHandle,
    c_trie: f64,
}

/// Inner node and edge label leading to a node; `None` for the root.
type Parent = Option<(NodeHandle, u8)>;

impl Dyft {
    pub fn new(config: DyftConfig) -> Result<Self> {
        config.validate()?;
        let pack = PackConfig::new(config.alphabet.sigma(), config.alphabet.len())?;
        let tables = Arc::new(PackTables::build(&pack));
        Self::with_tables(config, pack, tables)
    }

    /// Builds an index sharing already computed label tables.
    pub fn with_tables(config: DyftConfig, pack: PackConfig, tables: Arc<PackTables>) -> Result<Self> {
        config.validate()?;
        if pack.sigma() != config.alphabet.sigma() || pack.m() != config.alphabet.len() {
            return invalid("pack config does not match the alphabet");
        }
        if tables.label_count() != pack.label_count() {
            return invalid("label tables do not match the pack config");
        }
        let cost = CostModel::new(CostParams::for_pack(&pack, config.target_radius, config.w_in)?);
        let mut leaves = LeafStore::new();
        let root = NodeHandle::leaf(leaves.alloc(&[]));
        Ok(Self {
            config,
            pack,
            tables,
            cost,
            db: SketchDatabase::new(config.alphabet),
            nodes: NodePools::new(),
            leaves,
            root,
            c_trie: 0.0,
        })
    }

    #[inline]
    pub fn config(&self) -> &DyftConfig {
        &self.config
    }

    #[inline]
    pub fn database(&self) -> &SketchDatabase {
        &self.db
    }

    #[inline]
    pub fn pack_config(&self) -> &PackConfig {
        &self.pack
    }

    #[inline]
    pub fn tables(&self) -> &Arc<PackTables> {
        &self.tables
    }

    #[inline]
    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    #[inline]
    pub fn leaf_store(&self) -> &LeafStore {
        &self.leaves
    }

    #[inline]
    pub fn root(&self) -> NodeHandle {
        self.root
    }

    #[inline]
    pub fn nodes(&self) -> &NodePools {
        &self.nodes
    }

    /// Number of indexed sketches.
    #[inline]
    pub fn len(&self) -> usize {
        self.db.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }

    pub fn get(&self, id: SketchId) -> Result<Sketch> {
        self.db.get(id)
    }

    /// Posting list of a leaf handle.
    pub fn leaf_list(&self, leaf: NodeHandle) -> Result<&[SketchId]> {
        if !leaf.is_leaf() {
            return invalid(format!("{leaf:?} is not a leaf"));
        }
        Ok(self.leaves.list(leaf.index()))
    }

    /// Adds `x` to the database and the trie; returns its fresh id.
    pub fn insert(&mut self, x: &Sketch) -> Result<SketchId> {
        let id = self.db.insert(x)?;
        self.index_id(id);
        Ok(id)
    }

    /// Removes a live id from the trie and the database.
    pub fn remove(&mut self, id: SketchId) -> Result<()> {
        self.db.check_live(id)?;
        self.unindex_id(id)?;
        self.db.remove(id)
    }

    fn packed(&self, id: SketchId) -> Vec<u8> {
        self.pack.pack_symbols(self.db.symbols(id))
    }

    fn relink(&mut self, parent: Parent, node: NodeHandle) {
        match parent {
            None => self.root = node,
            Some((p, b)) => self
                .nodes
                .replace_child(p, b, node)
                .expect("parent keeps its child slot"),
        }
    }

    #[inline]
    fn exceeds_threshold(&self, len: usize, depth: usize) -> bool {
        depth < self.pack.m_packed() && len as f64 > self.cost.threshold(depth)
    }

    fn index_id(&mut self, id: SketchId) {
        let packed = self.packed(id);
        let mut parent: Parent = None;
        let mut v = self.root;
        let mut depth = 0;
        while !v.is_leaf() {
            let b = packed[depth];
            let child = match self.nodes.find_exact_unchecked(v, b) {
                Some(c) => c,
                None => {
                    let leaf = NodeHandle::leaf(self.leaves.alloc(&[]));
                    let grown = self.nodes.add_child(v, b, leaf).expect("label is free");
                    if grown != v {
                        self.relink(parent, grown);
                        v = grown;
                    }
                    leaf
                }
            };
            parent = Some((v, b));
            v = child;
            depth += 1;
        }
        self.leaves.push(v.index(), id);
        self.c_trie += self.cost.leaf_unit_cost(depth);

        // Split the reached leaf, and any new child that is still too long.
        let mut pending = vec![(parent, v, depth)];
        while let Some((parent, leaf, depth)) = pending.pop() {
            if !self.exceeds_threshold(self.leaves.list_len(leaf.index()), depth) {
                continue;
            }
            let inner = self.split(parent, leaf, depth);
            for (b, child) in self.nodes.children(inner).expect("inner node") {
                pending.push((Some((inner, b)), child, depth + 1));
            }
        }
    }

    /// Replaces `leaf` by an inner node with one new leaf per next label.
    fn split(&mut self, parent: Parent, leaf: NodeHandle, depth: usize) -> NodeHandle {
        let ids = self.leaves.take(leaf.index());
        self.c_trie -= self.cost.leaf_unit_cost(depth) * ids.len() as f64;
        let mut labelled: Vec<(u8, SketchId)> = ids
            .iter()
            .map(|&id| (self.pack.pack_at(self.db.symbols(id), depth), id))
            .collect();
        labelled.sort_by_key(|&(b, _)| b);
        let groups: Vec<&[(u8, SketchId)]> = labelled.chunk_by(|a, b| a.0 == b.0).collect();

        let mut inner = self.nodes.alloc(NodeKind::for_children(groups.len()));
        let mut buf = Vec::new();
        for group in groups {
            buf.clear();
            buf.extend(group.iter().map(|&(_, id)| id));
            let child = NodeHandle::leaf(self.leaves.alloc(&buf));
            inner = self.nodes.add_child(inner, group[0].0, child).expect("distinct labels");
        }
        self.c_trie += self.cost.inner_cost(depth);
        self.c_trie += self.cost.leaf_unit_cost(depth + 1) * ids.len() as f64;
        self.relink(parent, inner);
        inner
    }

    fn unindex_id(&mut self, id: SketchId) -> Result<()> {
        let not_indexed = || Error::NotFound(format!("sketch id {id} is not indexed"));
        let packed = self.packed(id);
        let mut path: Vec<(NodeHandle, u8)> = Vec::new();
        let mut v = self.root;
        while !v.is_leaf() {
            let b = packed[path.len()];
            let child = self.nodes.find_exact_unchecked(v, b).ok_or_else(not_indexed)?;
            path.push((v, b));
            v = child;
        }
        if !self.leaves.remove_id(v.index(), id) {
            return Err(not_indexed());
        }
        self.c_trie -= self.cost.leaf_unit_cost(path.len());
        if self.leaves.list_len(v.index()) > 0 || path.is_empty() {
            return Ok(());
        }

        // Drop the empty leaf, then every inner node left without children.
        self.leaves.take(v.index());
        while let Some((p, b)) = path.pop() {
            self.nodes.remove_child(p, b).expect("child on path");
            if self.nodes.child_count(p).expect("inner node") > 0 {
                break;
            }
            self.nodes.free(p);
            self.c_trie -= self.cost.inner_cost(path.len());
            if path.is_empty() {
                self.root = NodeHandle::leaf(self.leaves.alloc(&[]));
            }
        }
        if self.root.is_leaf() && self.leaves.total_ids() == 0 {
            self.c_trie = 0.0;
        }
        Ok(())
    }

    /// Ids within `radius` of `y`, always via the trie.
    pub fn search(&self, y: &Sketch, radius: usize) -> Result<Vec<SketchId>> {
        Ok(self.search_trie(y, radius)?.ids)
    }

    pub fn search_trie(&self, y: &Sketch, radius: usize) -> Result<SearchOutcome> {
        let q = self.db.encode_query(y, radius)?;
        let packed = self.pack.pack_symbols(y.symbols());
        let mut ids = Vec::new();
        let mut verified = 0;
        let mut stack: Vec<(NodeHandle, usize, u32)> = vec![(self.root, 0, radius as u32)];
        let mut matches: Vec<ChildMatch> = Vec::new();
        while let Some((v, depth, budget)) = stack.pop() {
            if v.is_leaf() {
                let list = self.leaves.list(v.index());
                verified += list.len();
                ids.extend(
                    list.iter()
                        .copied()
                        .filter(|&id| self.db.distance_to(id, &q) as usize <= radius),
                );
                continue;
            }
            matches.clear();
            self.nodes
                .find_within_unchecked(v, packed[depth], budget, &self.tables, &mut matches);
            stack.extend(matches.iter().map(|m| (m.child, depth + 1, budget - m.dist)));
        }
        ids.sort_unstable();
        Ok(SearchOutcome {
            ids,
            path: SearchPath::Trie,
            candidates_verified: verified,
        })
    }

    pub fn search_linear(&self, y: &Sketch, radius: usize) -> Result<SearchOutcome> {
        let q = self.db.encode_query(y, radius)?;
        Ok(SearchOutcome {
            ids: self.db.scan(&q, radius),
            path: SearchPath::Linear,
            candidates_verified: self.db.len(),
        })
    }

    /// Linear scan when it is estimated to be no slower than the trie walk,
    /// trie walk otherwise.
    pub fn search_star(&self, y: &Sketch, radius: usize) -> Result<SearchOutcome> {
        if self.prefers_linear() {
            self.search_linear(y, radius)
        } else {
            self.search_trie(y, radius)
        }
    }

    pub fn prefers_linear(&self) -> bool {
        self.c_ls() <= self.c_trie()
    }

    /// Incrementally maintained expected trie search cost.
    #[inline]
    pub fn c_trie(&self) -> f64 {
        self.c_trie
    }

    /// Expected cost of a linear scan, `n * ceil(log2 sigma)`.
    #[inline]
    pub fn c_ls(&self) -> f64 {
        (self.db.len() * self.config.alphabet.bits_per_symbol()) as f64
    }

    /// Every node reachable from the root with its packed depth, parents first.
    pub fn walk(&self) -> Vec<(NodeHandle, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root, 0)];
        while let Some((v, depth)) = stack.pop() {
            out.push((v, depth));
            if !v.is_leaf() {
                for (_, c) in self.nodes.children(v).expect("inner node") {
                    stack.push((c, depth + 1));
                }
            }
        }
        out
    }

    /// Expected search cost recomputed from scratch over the whole trie.
    pub fn recompute_trie_cost(&self) -> f64 {
        self.walk()
            .into_iter()
            .map(|(v, depth)| {
                if v.is_leaf() {
                    self.cost.leaf_unit_cost(depth) * self.leaves.list_len(v.index()) as f64
                } else {
                    self.cost.inner_cost(depth)
                }
            })
            .sum()
    }

    pub fn stats(&self) -> IndexStats {
        let mut histogram = BTreeMap::new();
        let mut max_depth = 0;
        for (v, depth) in self.walk() {
            max_depth = max_depth.max(depth);
            if v.is_leaf() {
                *histogram.entry(self.leaves.list_len(v.index())).or_insert(0) += 1;
            }
        }
        let inner_kind_counts = self.nodes.kind_counts();
        let inner_node_bytes = self.nodes.memory_bytes(self.config.reference_width);
        let leaf_store_bytes = self.leaves.memory_bytes();
        IndexStats {
            inner_kind_counts,
            inner_nodes: inner_kind_counts.iter().sum(),
            leaves: self.leaves.live(),
            list_length_histogram: histogram,
            max_depth,
            inner_node_bytes,
            leaf_store_bytes,
            memory_bytes: inner_node_bytes + leaf_store_bytes,
            c_trie: self.c_trie,
            c_ls: self.c_ls(),
        }
    }

    /// Leaf reached by exact traversal of `y`'s packed labels, if any.
    pub fn exact_leaf(&self, y: &Sketch) -> Result<Option<NodeHandle>> {
        self.db.encode_query(y, 0)?;
        let packed = self.pack.pack_symbols(y.symbols());
        let mut v = self.root;
        let mut depth = 0;
        while !v.is_leaf() {
            match self.nodes.find_exact_unchecked(v, packed[depth]) {
                Some(c) => v = c,
                None => return Ok(None),
            }
            depth += 1;
        }
        Ok(Some(v))
    }

    /// True when `id` is listed in the leaf its own sketch leads to.
    pub fn contains(&self, id: SketchId) -> bool {
        let Ok(x) = self.db.get(id) else {
            return false;
        };
        match self.exact_leaf(&x) {
            Ok(Some(leaf)) => self.leaves.list(leaf.index()).contains(&id),
            _ => false,
        }
    }

    /// Checks the structural invariants of the trie.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let nodes = self.walk();
        let mut kind_counts = [0usize; 8];
        let mut seen = 0;
        for &(v, depth) in &nodes {
            if depth > self.pack.m_packed() {
                return Err(format!("{v:?} at depth {depth} is below full length"));
            }
            if v.is_leaf() {
                let len = self.leaves.list_len(v.index());
                seen += len;
                if len == 0 && v != self.root {
                    return Err(format!("non-root leaf {v:?} has an empty list"));
                }
                if depth < self.pack.m_packed() {
                    let cap = self.cost.threshold(depth).ceil().max(1.0);
                    if len as f64 > cap {
                        return Err(format!(
                            "leaf {v:?} at depth {depth} holds {len} ids, threshold {}",
                            self.cost.threshold(depth)
                        ));
                    }
                }
                for &id in self.leaves.list(v.index()) {
                    if !self.db.is_live(id) {
                        return Err(format!("dead id {id} still listed"));
                    }
                }
            } else {
                kind_counts[v.kind() as usize] += 1;
                let children = self.nodes.children(v).map_err(|e| e.to_string())?;
                if children.is_empty() {
                    return Err(format!("inner node {v:?} has no children"));
                }
            }
        }
        if kind_counts != self.nodes.kind_counts() {
            return Err(format!(
                "pool counts {:?} differ from reachable nodes {kind_counts:?}",
                self.nodes.kind_counts()
            ));
        }
        if self.leaves.live() != nodes.iter().filter(|(v, _)| v.is_leaf()).count() {
            return Err("leaf store holds unreachable leaves".into());
        }
        if seen != self.db.len() {
            return Err(format!("{seen} listed ids for {} live sketches", self.db.len()));
        }
        for id in self.db.live_ids() {
            if !self.contains(id) {
                return Err(format!("id {id} is not reachable by its own sketch"));
            }
        }
        Ok(())
    }
}
