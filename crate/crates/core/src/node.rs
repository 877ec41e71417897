//! Adaptive inner-node layouts for the byte-labelled trie.
//!
//! An inner node with `k` children lives in the smallest of
//! `S2, S4, S8, S16, S32` (key array + child array, searched by a
//! linear scan over the keys), `D64, D128` (256-entry slot index + child
//! array) or `F` (256-entry child array). Nodes sit in one pool per kind
//! and are addressed by [`NodeHandle`]s; growing past capacity moves the
//! node to the next pool and returns its new handle. Nodes never shrink
//! to a smaller kind.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::pack::PackTables;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum NodeKind {
    S2 = 0,
    S4,
    S8,
    S16,
    S32,
    D64,
    D128,
    F,
    Leaf,
}

impl NodeKind {
    pub const INNER: [NodeKind; 8] = [
        NodeKind::S2,
        NodeKind::S4,
        NodeKind::S8,
        NodeKind::S16,
        NodeKind::S32,
        NodeKind::D64,
        NodeKind::D128,
        NodeKind::F,
    ];

    fn from_tag(tag: u32) -> NodeKind {
        match tag {
            0 => NodeKind::S2,
            1 => NodeKind::S4,
            2 => NodeKind::S8,
            3 => NodeKind::S16,
            4 => NodeKind::S32,
            5 => NodeKind::D64,
            6 => NodeKind::D128,
            7 => NodeKind::F,
            _ => NodeKind::Leaf,
        }
    }

    /// Maximum number of children; zero for leaves.
    pub fn capacity(self) -> usize {
        match self {
            NodeKind::S2 => 2,
            NodeKind::S4 => 4,
            NodeKind::S8 => 8,
            NodeKind::S16 => 16,
            NodeKind::S32 => 32,
            NodeKind::D64 => 64,
            NodeKind::D128 => 128,
            NodeKind::F => 256,
            NodeKind::Leaf => 0,
        }
    }

    pub fn next(self) -> Option<NodeKind> {
        match self {
            NodeKind::F | NodeKind::Leaf => None,
            k => Some(NodeKind::INNER[k as usize + 1]),
        }
    }

    /// Smallest inner kind holding `k` children.
    pub fn for_children(k: usize) -> NodeKind {
        NodeKind::INNER
            .into_iter()
            .find(|kind| kind.capacity() >= k)
            .unwrap_or(NodeKind::F)
    }

    pub fn is_inner(self) -> bool {
        self != NodeKind::Leaf
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::S2 => "S2",
            NodeKind::S4 => "S4",
            NodeKind::S8 => "S8",
            NodeKind::S16 => "S16",
            NodeKind::S32 => "S32",
            NodeKind::D64 => "D64",
            NodeKind::D128 => "D128",
            NodeKind::F => "F",
            NodeKind::Leaf => "Leaf",
        }
    }
}

/// Size of a node of `kind` in bytes for child references of `ref_bits` bits.
///
/// Every layout carries a one-byte child count. Sparse nodes add `K` key
/// bytes and `K` references, dense nodes a 256-byte slot index and `K`
/// references, full nodes 256 references. Leaves are accounted for by the
/// leaf store and report zero here.
pub fn node_size_bytes(kind: NodeKind, ref_bits: usize) -> usize {
    let k = kind.capacity();
    let bits = match kind {
        NodeKind::S2 | NodeKind::S4 | NodeKind::S8 | NodeKind::S16 | NodeKind::S32 => {
            8 + 8 * k + ref_bits * k
        }
        NodeKind::D64 | NodeKind::D128 => 8 + 8 * 256 + ref_bits * k,
        NodeKind::F => 8 + 256 * ref_bits,
        NodeKind::Leaf => 0,
    };
    bits.div_ceil(8)
}

const INDEX_BITS: u32 = 28;
const INDEX_MASK: u32 = (1 << INDEX_BITS) - 1;

/// Tagged reference to a node: kind in the top four bits, pool index below.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeHandle(u32);

impl NodeHandle {
    pub const NULL: NodeHandle = NodeHandle(u32::MAX);

    pub fn new(kind: NodeKind, index: usize) -> NodeHandle {
        assert!(index <= INDEX_MASK as usize, "node pool index overflow");
        NodeHandle(((kind as u32) << INDEX_BITS) | index as u32)
    }

    pub fn leaf(index: usize) -> NodeHandle {
        NodeHandle::new(NodeKind::Leaf, index)
    }

    #[inline]
    pub fn kind(self) -> NodeKind {
        NodeKind::from_tag(self.0 >> INDEX_BITS)
    }

    #[inline]
    pub fn index(self) -> usize {
        (self.0 & INDEX_MASK) as usize
    }

    #[inline]
    pub fn is_null(self) -> bool {
        self == NodeHandle::NULL
    }

    #[inline]
    pub fn is_leaf(self) -> bool {
        !self.is_null() && self.kind() == NodeKind::Leaf
    }
}

impl fmt::Debug for NodeHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_null() {
            write!(f, "Null")
        } else {
            write!(f, "{}#{}", self.kind().name(), self.index())
        }
    }
}

/// One answer to a within-budget child search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChildMatch {
    pub child: NodeHandle,
    pub label: u8,
    pub dist: u32,
}

trait InnerNode {
    fn empty() -> Self;
    fn len(&self) -> usize;
    fn find(&self, b: u8) -> Option<NodeHandle>;
    fn find_within(&self, b: u8, budget: u32, tables: &PackTables, out: &mut Vec<ChildMatch>);
    /// Adds a child; returns false when the node is full.
    fn insert(&mut self, b: u8, child: NodeHandle) -> bool;
    fn remove(&mut self, b: u8) -> Option<NodeHandle>;
    fn slot_mut(&mut self, b: u8) -> Option<&mut NodeHandle>;
    fn for_each(&self, f: impl FnMut(u8, NodeHandle));
}

#[derive(Clone)]
struct SparseNode<const K: usize> {
    k: u8,
    keys: [u8; K],
    children: [NodeHandle; K],
}

impl<const K: usize> SparseNode<K> {
    #[inline]
    fn position(&self, b: u8) -> Option<usize> {
        self.keys[..self.k as usize].iter().position(|&key| key == b)
    }
}

impl<const K: usize> InnerNode for SparseNode<K> {
    fn empty() -> Self {
        Self {
            k: 0,
            keys: [0; K],
            children: [NodeHandle::NULL; K],
        }
    }

    fn len(&self) -> usize {
        self.k as usize
    }

    #[inline]
    fn find(&self, b: u8) -> Option<NodeHandle> {
        self.position(b).map(|i| self.children[i])
    }

    #[inline]
    fn find_within(&self, b: u8, budget: u32, tables: &PackTables, out: &mut Vec<ChildMatch>) {
        let row = tables.dist_row(b);
        let k = self.k as usize;
        for (&key, &child) in self.keys[..k].iter().zip(&self.children[..k]) {
            let dist = row[key as usize] as u32;
            if dist <= budget {
                out.push(ChildMatch { child, label: key, dist });
            }
        }
    }

    fn insert(&mut self, b: u8, child: NodeHandle) -> bool {
        let k = self.k as usize;
        if k == K {
            return false;
        }
        self.keys[k] = b;
        self.children[k] = child;
        self.k += 1;
        true
    }

    fn remove(&mut self, b: u8) -> Option<NodeHandle> {
        let i = self.position(b)?;
        let last = self.k as usize - 1;
        let removed = self.children[i];
        self.keys[i] = self.keys[last];
        self.children[i] = self.children[last];
        self.children[last] = NodeHandle::NULL;
        self.k -= 1;
        Some(removed)
    }

    fn slot_mut(&mut self, b: u8) -> Option<&mut NodeHandle> {
        let i = self.position(b)?;
        Some(&mut self.children[i])
    }

    fn for_each(&self, mut f: impl FnMut(u8, NodeHandle)) {
        let k = self.k as usize;
        for i in 0..k {
            f(self.keys[i], self.children[i]);
        }
    }
}

#[derive(Clone)]
struct DenseNode<const K: usize> {
    k: u8,
    idx: [u8; 256],
    children: [NodeHandle; K],
}

impl<const K: usize> DenseNode<K> {
    const ABSENT: u8 = (K + 1) as u8;
}

impl<const K: usize> InnerNode for DenseNode<K> {
    fn empty() -> Self {
        Self {
            k: 0,
            idx: [Self::ABSENT; 256],
            children: [NodeHandle::NULL; K],
        }
    }

    fn len(&self) -> usize {
        self.k as usize
    }

    #[inline]
    fn find(&self, b: u8) -> Option<NodeHandle> {
        let slot = self.idx[b as usize];
        (slot != Self::ABSENT).then(|| self.children[slot as usize])
    }

    #[inline]
    fn find_within(&self, b: u8, budget: u32, tables: &PackTables, out: &mut Vec<ChildMatch>) {
        let row = tables.dist_row(b);
        for &a in tables.order_row(b) {
            let dist = row[a as usize] as u32;
            if dist > budget {
                break;
            }
            let slot = self.idx[a as usize];
            if slot != Self::ABSENT {
                out.push(ChildMatch {
                    child: self.children[slot as usize],
                    label: a,
                    dist,
                });
            }
        }
    }

    fn insert(&mut self, b: u8, child: NodeHandle) -> bool {
        let k = self.k as usize;
        if k == K {
            return false;
        }
        self.idx[b as usize] = k as u8;
        self.children[k] = child;
        self.k += 1;
        true
    }

    fn remove(&mut self, b: u8) -> Option<NodeHandle> {
        let slot = self.idx[b as usize];
        if slot == Self::ABSENT {
            return None;
        }
        let slot = slot as usize;
        let last = self.k as usize - 1;
        let removed = self.children[slot];
        self.idx[b as usize] = Self::ABSENT;
        if slot != last {
            // move the last occupied slot into the gap and repoint its label
            let moved = self.children[last];
            self.children[slot] = moved;
            let label = self
                .idx
                .iter()
                .position(|&s| s as usize == last)
                .expect("occupied slot has a label");
            self.idx[label] = slot as u8;
        }
        self.children[last] = NodeHandle::NULL;
        self.k -= 1;
        Some(removed)
    }

    fn slot_mut(&mut self, b: u8) -> Option<&mut NodeHandle> {
        let slot = self.idx[b as usize];
        if slot == Self::ABSENT {
            None
        } else {
            Some(&mut self.children[slot as usize])
        }
    }

    fn for_each(&self, mut f: impl FnMut(u8, NodeHandle)) {
        for (b, &slot) in self.idx.iter().enumerate() {
            if slot != Self::ABSENT {
                f(b as u8, self.children[slot as usize]);
            }
        }
    }
}

#[derive(Clone)]
struct FullNode {
    // 256 children do not fit the one-byte count of the smaller layouts
    k: u16,
    children: [NodeHandle; 256],
}

impl InnerNode for FullNode {
    fn empty() -> Self {
        Self {
            k: 0,
            children: [NodeHandle::NULL; 256],
        }
    }

    fn len(&self) -> usize {
        self.k as usize
    }

    #[inline]
    fn find(&self, b: u8) -> Option<NodeHandle> {
        let c = self.children[b as usize];
        (!c.is_null()).then_some(c)
    }

    #[inline]
    fn find_within(&self, b: u8, budget: u32, tables: &PackTables, out: &mut Vec<ChildMatch>) {
        let row = tables.dist_row(b);
        for &a in tables.order_row(b) {
            let dist = row[a as usize] as u32;
            if dist > budget {
                break;
            }
            let child = self.children[a as usize];
            if !child.is_null() {
                out.push(ChildMatch { child, label: a, dist });
            }
        }
    }

    fn insert(&mut self, b: u8, child: NodeHandle) -> bool {
        debug_assert!(self.children[b as usize].is_null());
        self.children[b as usize] = child;
        self.k += 1;
        true
    }

    fn remove(&mut self, b: u8) -> Option<NodeHandle> {
        let c = std::mem::replace(&mut self.children[b as usize], NodeHandle::NULL);
        if c.is_null() {
            return None;
        }
        self.k -= 1;
        Some(c)
    }

    fn slot_mut(&mut self, b: u8) -> Option<&mut NodeHandle> {
        let c = &mut self.children[b as usize];
        if c.is_null() {
            None
        } else {
            Some(c)
        }
    }

    fn for_each(&self, mut f: impl FnMut(u8, NodeHandle)) {
        for (b, &c) in self.children.iter().enumerate() {
            if !c.is_null() {
                f(b as u8, c);
            }
        }
    }
}

#[derive(Clone)]
struct Pool<T> {
    slots: Vec<T>,
    free: Vec<u32>,
}

impl<T: InnerNode> Pool<T> {
    fn new() -> Self {
        Self {
            slots: Vec::new(),
            free: Vec::new(),
        }
    }

    fn alloc(&mut self) -> usize {
        match self.free.pop() {
            Some(i) => {
                self.slots[i as usize] = T::empty();
                i as usize
            }
            None => {
                self.slots.push(T::empty());
                self.slots.len() - 1
            }
        }
    }

    fn release(&mut self, i: usize) {
        self.free.push(i as u32);
    }

    fn live(&self) -> usize {
        self.slots.len() - self.free.len()
    }
}

macro_rules! with_node {
    ($pools:expr, $h:expr, $n:ident => $body:expr) => {
        match $h.kind() {
            NodeKind::S2 => { let $n = &$pools.s2.slots[$h.index()]; $body }
            NodeKind::S4 => { let $n = &$pools.s4.slots[$h.index()]; $body }
            NodeKind::S8 => { let $n = &$pools.s8.slots[$h.index()]; $body }
            NodeKind::S16 => { let $n = &$pools.s16.slots[$h.index()]; $body }
            NodeKind::S32 => { let $n = &$pools.s32.slots[$h.index()]; $body }
            NodeKind::D64 => { let $n = &$pools.d64.slots[$h.index()]; $body }
            NodeKind::D128 => { let $n = &$pools.d128.slots[$h.index()]; $body }
            NodeKind::F => { let $n = &$pools.f.slots[$h.index()]; $body }
            NodeKind::Leaf => unreachable!("leaf handle passed to inner-node dispatch"),
        }
    };
}

macro_rules! with_node_mut {
    ($pools:expr, $h:expr, $n:ident => $body:expr) => {
        match $h.kind() {
            NodeKind::S2 => { let $n = &mut $pools.s2.slots[$h.index()]; $body }
            NodeKind::S4 => { let $n = &mut $pools.s4.slots[$h.index()]; $body }
            NodeKind::S8 => { let $n = &mut $pools.s8.slots[$h.index()]; $body }
            NodeKind::S16 => { let $n = &mut $pools.s16.slots[$h.index()]; $body }
            NodeKind::S32 => { let $n = &mut $pools.s32.slots[$h.index()]; $body }
            NodeKind::D64 => { let $n = &mut $pools.d64.slots[$h.index()]; $body }
            NodeKind::D128 => { let $n = &mut $pools.d128.slots[$h.index()]; $body }
            NodeKind::F => { let $n = &mut $pools.f.slots[$h.index()]; $body }
            NodeKind::Leaf => unreachable!("leaf handle passed to inner-node dispatch"),
        }
    };
}

/// Per-kind pools of inner nodes.
#[derive(Clone)]
pub struct NodePools {
    s2: Pool<SparseNode<2>>,
    s4: Pool<SparseNode<4>>,
    s8: Pool<SparseNode<8>>,
    s16: Pool<SparseNode<16>>,
    s32: Pool<SparseNode<32>>,
    d64: Pool<DenseNode<64>>,
    d128: Pool<DenseNode<128>>,
    f: Pool<FullNode>,
}

impl Default for NodePools {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for NodePools {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodePools")
            .field("live", &self.kind_counts())
            .finish()
    }
}

fn check_inner(h: NodeHandle) -> Result<()> {
    if h.is_null() || h.kind() == NodeKind::Leaf {
        invalid(format!("{h:?} is not an inner node"))
    } else {
        Ok(())
    }
}

impl NodePools {
    pub fn new() -> Self {
        Self {
            s2: Pool::new(),
            s4: Pool::new(),
            s8: Pool::new(),
            s16: Pool::new(),
            s32: Pool::new(),
            d64: Pool::new(),
            d128: Pool::new(),
            f: Pool::new(),
        }
    }

    /// Allocates an empty inner node of `kind`.
    pub fn alloc(&mut self, kind: NodeKind) -> NodeHandle {
        let index = match kind {
            NodeKind::S2 => self.s2.alloc(),
            NodeKind::S4 => self.s4.alloc(),
            NodeKind::S8 => self.s8.alloc(),
            NodeKind::S16 => self.s16.alloc(),
            NodeKind::S32 => self.s32.alloc(),
            NodeKind::D64 => self.d64.alloc(),
            NodeKind::D128 => self.d128.alloc(),
            NodeKind::F => self.f.alloc(),
            NodeKind::Leaf => panic!("leaves are not allocated in node pools"),
        };
        NodeHandle::new(kind, index)
    }

    /// Returns the slot of an inner node to its pool.
    pub fn free(&mut self, h: NodeHandle) {
        let i = h.index();
        match h.kind() {
            NodeKind::S2 => self.s2.release(i),
            NodeKind::S4 => self.s4.release(i),
            NodeKind::S8 => self.s8.release(i),
            NodeKind::S16 => self.s16.release(i),
            NodeKind::S32 => self.s32.release(i),
            NodeKind::D64 => self.d64.release(i),
            NodeKind::D128 => self.d128.release(i),
            NodeKind::F => self.f.release(i),
            NodeKind::Leaf => panic!("leaves are not freed through node pools"),
        }
    }

    pub fn child_count(&self, v: NodeHandle) -> Result<usize> {
        check_inner(v)?;
        Ok(with_node!(self, v, n => n.len()))
    }

    pub fn find_exact(&self, v: NodeHandle, b: u8) -> Result<Option<NodeHandle>> {
        check_inner(v)?;
        Ok(self.find_exact_unchecked(v, b))
    }

    #[inline]
    pub(crate) fn find_exact_unchecked(&self, v: NodeHandle, b: u8) -> Option<NodeHandle> {
        with_node!(self, v, n => n.find(b))
    }

    /// Appends to `out` every child whose label is within `budget` of `b`.
    ///
    /// A zero budget is an exact lookup. Sparse nodes otherwise scan their
    /// keys against the distance table; dense and full nodes walk the order
    /// table row of `b` until the distance exceeds the budget.
    pub fn find_within(
        &self,
        v: NodeHandle,
        b: u8,
        budget: u32,
        tables: &PackTables,
        out: &mut Vec<ChildMatch>,
    ) -> Result<()> {
        check_inner(v)?;
        if b as usize >= tables.label_count() {
            return invalid(format!("label {b} not below {}", tables.label_count()));
        }
        self.find_within_unchecked(v, b, budget, tables, out);
        Ok(())
    }

    #[inline]
    pub(crate) fn find_within_unchecked(
        &self,
        v: NodeHandle,
        b: u8,
        budget: u32,
        tables: &PackTables,
        out: &mut Vec<ChildMatch>,
    ) {
        if budget == 0 {
            if let Some(child) = self.find_exact_unchecked(v, b) {
                out.push(ChildMatch { child, label: b, dist: 0 });
            }
            return;
        }
        with_node!(self, v, n => n.find_within(b, budget, tables, out))
    }

    /// Adds a child under label `b`, promoting the node when it is full.
    /// Returns the node's handle, which differs from `v` after a promotion.
    pub fn add_child(&mut self, v: NodeHandle, b: u8, child: NodeHandle) -> Result<NodeHandle> {
        check_inner(v)?;
        if self.find_exact_unchecked(v, b).is_some() {
            return invalid(format!("{v:?} already has a child labelled {b}"));
        }
        if with_node_mut!(self, v, n => n.insert(b, child)) {
            return Ok(v);
        }
        let next = v.kind().next().expect("full nodes never run out of slots");
        let grown = self.alloc(next);
        let mut moved = Vec::with_capacity(v.kind().capacity());
        with_node!(self, v, n => n.for_each(|label, c| moved.push((label, c))));
        with_node_mut!(self, grown, n => {
            for (label, c) in moved {
                n.insert(label, c);
            }
            n.insert(b, child);
        });
        self.free(v);
        Ok(grown)
    }

    /// Removes and returns the child under label `b`.
    pub fn remove_child(&mut self, v: NodeHandle, b: u8) -> Result<NodeHandle> {
        check_inner(v)?;
        with_node_mut!(self, v, n => n.remove(b))
            .ok_or_else(|| Error::NotFound(format!("{v:?} has no child labelled {b}")))
    }

    /// Repoints the existing child slot for `b` at `child`.
    pub fn replace_child(&mut self, v: NodeHandle, b: u8, child: NodeHandle) -> Result<()> {
        check_inner(v)?;
        match with_node_mut!(self, v, n => n.slot_mut(b)) {
            Some(slot) => {
                *slot = child;
                Ok(())
            }
            None => Err(Error::NotFound(format!("{v:?} has no child labelled {b}"))),
        }
    }

    /// Children of `v` as `(label, child)` pairs.
    pub fn children(&self, v: NodeHandle) -> Result<Vec<(u8, NodeHandle)>> {
        check_inner(v)?;
        let mut out = Vec::new();
        with_node!(self, v, n => n.for_each(|b, c| out.push((b, c))));
        Ok(out)
    }

    /// Live node count per inner kind, indexed like [`NodeKind::INNER`].
    pub fn kind_counts(&self) -> [usize; 8] {
        [
            self.s2.live(),
            self.s4.live(),
            self.s8.live(),
            self.s16.live(),
            self.s32.live(),
            self.d64.live(),
            self.d128.live(),
            self.f.live(),
        ]
    }

    pub fn live_nodes(&self) -> usize {
        self.kind_counts().iter().sum()
    }

    /// Sum of [`node_size_bytes`] over all live nodes.
    pub fn memory_bytes(&self, ref_bits: usize) -> usize {
        NodeKind::INNER
            .iter()
            .zip(self.kind_counts())
            .map(|(&kind, count)| count * node_size_bytes(kind, ref_bits))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pack::PackConfig;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::btree_map::Entry;
    use std::collections::BTreeMap;

    fn grow_to(pools: &mut NodePools, kind: NodeKind, labels: &[u8]) -> NodeHandle {
        let mut v = pools.alloc(kind);
        for (i, &b) in labels.iter().enumerate() {
            v = pools.add_child(v, b, NodeHandle::leaf(i)).unwrap();
        }
        v
    }

    #[test]
    fn node_sizes() {
        assert_eq!(node_size_bytes(NodeKind::S2, 64), 19);
        assert_eq!(node_size_bytes(NodeKind::F, 64), 2049);
        assert_eq!(node_size_bytes(NodeKind::S32, 32), (8 + 256 + 1024) / 8);
        assert_eq!(node_size_bytes(NodeKind::D128, 64), (8 + 2048 + 8192) / 8);
        // dense beats full exactly when K < 256 - 2048 / w
        for w in [16usize, 32, 64] {
            for kind in [NodeKind::D64, NodeKind::D128] {
                let smaller = node_size_bytes(kind, w) * 8 < 8 + 256 * w;
                assert_eq!(smaller, (kind.capacity() as f64) < 256.0 - 2048.0 / w as f64);
            }
        }
    }

    #[test]
    fn handles_roundtrip() {
        for kind in NodeKind::INNER.into_iter().chain([NodeKind::Leaf]) {
            let h = NodeHandle::new(kind, 12345);
            assert_eq!(h.kind(), kind);
            assert_eq!(h.index(), 12345);
            assert!(!h.is_null());
        }
        assert!(NodeHandle::NULL.is_null());
        assert!(!NodeHandle::NULL.is_leaf());
    }

    #[test]
    fn empty_node_has_no_children() {
        let mut pools = NodePools::new();
        for kind in NodeKind::INNER {
            let v = pools.alloc(kind);
            for b in 0..=255u8 {
                assert_eq!(pools.find_exact(v, b).unwrap(), None);
            }
            assert_eq!(pools.child_count(v).unwrap(), 0);
        }
    }

    #[test]
    fn leaf_handles_are_rejected() {
        let mut pools = NodePools::new();
        let leaf = NodeHandle::leaf(0);
        let tables = PackTables::build(&PackConfig::new(4, 4).unwrap());
        assert!(pools.find_exact(leaf, 0).is_err());
        assert!(pools.find_within(leaf, 0, 1, &tables, &mut Vec::new()).is_err());
        assert!(pools.add_child(leaf, 0, NodeHandle::leaf(1)).is_err());
        assert!(pools.remove_child(leaf, 0).is_err());
    }

    #[test]
    fn promotion_thresholds() {
        let mut pools = NodePools::new();
        let v = grow_to(&mut pools, NodeKind::S2, &[1, 2]);
        assert_eq!(v.kind(), NodeKind::S2);
        let v = pools.add_child(v, 3, NodeHandle::leaf(9)).unwrap();
        assert_eq!(v.kind(), NodeKind::S4);
        for b in 1..=3 {
            assert!(pools.find_exact(v, b).unwrap().is_some());
        }
        let labels: Vec<u8> = (0..128).collect();
        let d = grow_to(&mut pools, NodeKind::D128, &labels);
        assert_eq!(d.kind(), NodeKind::D128);
        let f = pools.add_child(d, 200, NodeHandle::leaf(500)).unwrap();
        assert_eq!(f.kind(), NodeKind::F);
        assert_eq!(pools.child_count(f).unwrap(), 129);
        // promoted-from slots go back to their pools
        assert_eq!(pools.kind_counts(), [0, 1, 0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn duplicate_and_missing_labels() {
        let mut pools = NodePools::new();
        for kind in NodeKind::INNER {
            let v = grow_to(&mut pools, kind, &[5]);
            assert!(pools.add_child(v, 5, NodeHandle::leaf(1)).is_err());
            assert!(matches!(pools.remove_child(v, 6), Err(Error::NotFound(_))));
            assert!(matches!(
                pools.replace_child(v, 6, NodeHandle::leaf(1)),
                Err(Error::NotFound(_))
            ));
        }
    }

    #[test]
    fn promotion_walk_keeps_every_child() {
        let mut pools = NodePools::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut labels: Vec<u8> = (0..=255).collect();
        labels.shuffle(&mut rng);
        let mut v = pools.alloc(NodeKind::S2);
        let mut oracle = BTreeMap::new();
        for (i, &b) in labels.iter().enumerate() {
            v = pools.add_child(v, b, NodeHandle::leaf(i)).unwrap();
            oracle.insert(b, NodeHandle::leaf(i));
            assert_eq!(v.kind(), NodeKind::for_children(i + 1));
            for (&label, &child) in &oracle {
                assert_eq!(pools.find_exact(v, label).unwrap(), Some(child));
            }
            assert_eq!(pools.child_count(v).unwrap(), oracle.len());
        }
        assert_eq!(v.kind(), NodeKind::F);
        assert_eq!(pools.live_nodes(), 1);
    }

    #[test]
    fn remove_from_sparse_keeps_others() {
        let mut pools = NodePools::new();
        let v = grow_to(&mut pools, NodeKind::S4, &[10, 20, 30]);
        assert_eq!(pools.remove_child(v, 10).unwrap(), NodeHandle::leaf(0));
        assert_eq!(pools.find_exact(v, 10).unwrap(), None);
        assert_eq!(pools.find_exact(v, 20).unwrap(), Some(NodeHandle::leaf(1)));
        assert_eq!(pools.find_exact(v, 30).unwrap(), Some(NodeHandle::leaf(2)));
        assert_eq!(pools.child_count(v).unwrap(), 2);
    }

    #[test]
    fn random_add_remove_matches_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for start in NodeKind::INNER {
            let mut pools = NodePools::new();
            let mut v = pools.alloc(start);
            let mut oracle: BTreeMap<u8, NodeHandle> = BTreeMap::new();
            for step in 0..3000 {
                let b: u8 = rng.gen();
                let child = NodeHandle::leaf(step);
                match oracle.entry(b) {
                    Entry::Occupied(e) if rng.gen_bool(0.5) => {
                        assert_eq!(pools.remove_child(v, b).unwrap(), e.remove());
                    }
                    Entry::Occupied(mut e) => {
                        pools.replace_child(v, b, child).unwrap();
                        e.insert(child);
                    }
                    Entry::Vacant(e) => {
                        v = pools.add_child(v, b, child).unwrap();
                        e.insert(child);
                    }
                }
                assert_eq!(pools.child_count(v).unwrap(), oracle.len());
            }
            let mut got = pools.children(v).unwrap();
            got.sort();
            assert_eq!(got, oracle.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn problem_one_example() {
        // sigma = 4 packs four symbols per byte; children at distances 1, 0, 2, 3
        let cfg = PackConfig::new(4, 8).unwrap();
        let tables = PackTables::build(&cfg);
        let pack = |t: [u8; 4]| cfg.pack_at(&t, 0);
        let query = pack([1, 3, 0, 2]);
        let children = [
            pack([0, 3, 0, 2]),
            pack([1, 3, 0, 2]),
            pack([2, 2, 0, 2]),
            pack([3, 1, 1, 2]),
        ];
        for kind in NodeKind::INNER {
            let mut pools = NodePools::new();
            let v = grow_to(&mut pools, kind, &children);
            let mut out = Vec::new();
            pools.find_within(v, query, 1, &tables, &mut out).unwrap();
            let mut got: Vec<(NodeHandle, u32)> = out.iter().map(|m| (m.child, m.dist)).collect();
            got.sort_by_key(|&(c, _)| c.index());
            assert_eq!(got, vec![(NodeHandle::leaf(0), 1), (NodeHandle::leaf(1), 0)]);
        }
    }
}
