//! Posting lists of the trie leaves.
//!
//! Leaves are numbered densely and grouped 64 at a time. A group keeps the
//! lists of its occupied slots concatenated in one buffer, a 64-bit
//! occupancy bitmap, and one offset per occupied slot; the list of slot `s`
//! is found by ranking `s` in the bitmap. Growing a list shifts the tail of
//! its group's buffer.

use crate::database::SketchId;

pub(crate) const GROUP_SIZE: usize = 64;

/// Fixed bookkeeping per group: bitmap, buffer reference and local offsets.
pub const GROUP_HEADER_BYTES: usize = 8 + 8 + 4 * GROUP_SIZE;

#[derive(Clone, Debug, Default)]
struct LeafGroup {
    occupied: u64,
    // offsets[rank] .. offsets[rank + 1] is the list of the rank-th occupied slot
    offsets: Vec<u32>,
    ids: Vec<SketchId>,
}

impl LeafGroup {
    fn new() -> Self {
        Self {
            occupied: 0,
            offsets: vec![0],
            ids: Vec::new(),
        }
    }

    #[inline]
    fn rank(&self, slot: usize) -> usize {
        (self.occupied & ((1u64 << slot) - 1)).count_ones() as usize
    }

    #[inline]
    fn range(&self, slot: usize) -> std::ops::Range<usize> {
        let r = self.rank(slot);
        self.offsets[r] as usize..self.offsets[r + 1] as usize
    }

    fn shift_after(&mut self, rank: usize, delta: i64) {
        for off in &mut self.offsets[rank + 1..] {
            *off = (*off as i64 + delta) as u32;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LeafStore {
    groups: Vec<LeafGroup>,
    free: Vec<u32>,
    live: usize,
    total_ids: usize,
}

impl LeafStore {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    fn locate(leaf: usize) -> (usize, usize) {
        (leaf / GROUP_SIZE, leaf % GROUP_SIZE)
    }

    /// Creates a leaf holding `ids` and returns its number.
    pub fn alloc(&mut self, ids: &[SketchId]) -> usize {
        let leaf = match self.free.pop() {
            Some(l) => l as usize,
            None => {
                let base = self.groups.len() * GROUP_SIZE;
                self.groups.push(LeafGroup::new());
                self.free
                    .extend((base + 1..base + GROUP_SIZE).rev().map(|l| l as u32));
                base
            }
        };
        let (g, slot) = Self::locate(leaf);
        let group = &mut self.groups[g];
        debug_assert_eq!(group.occupied >> slot & 1, 0);
        let rank = group.rank(slot);
        let start = group.offsets[rank];
        group.occupied |= 1 << slot;
        group.offsets.insert(rank + 1, start);
        group.shift_after(rank, ids.len() as i64);
        let start = start as usize;
        group.ids.splice(start..start, ids.iter().copied());
        self.live += 1;
        self.total_ids += ids.len();
        leaf
    }

    /// Removes the leaf and returns its list.
    pub fn take(&mut self, leaf: usize) -> Vec<SketchId> {
        let (g, slot) = Self::locate(leaf);
        let group = &mut self.groups[g];
        debug_assert_eq!(group.occupied >> slot & 1, 1, "leaf {leaf} is not live");
        let rank = group.rank(slot);
        let range = group.range(slot);
        let len = range.len();
        let ids: Vec<SketchId> = group.ids.drain(range).collect();
        group.shift_after(rank, -(len as i64));
        group.offsets.remove(rank + 1);
        group.occupied &= !(1 << slot);
        self.free.push(leaf as u32);
        self.live -= 1;
        self.total_ids -= len;
        ids
    }

    #[inline]
    pub fn list(&self, leaf: usize) -> &[SketchId] {
        let (g, slot) = Self::locate(leaf);
        let group = &self.groups[g];
        &group.ids[group.range(slot)]
    }

    #[inline]
    pub fn list_len(&self, leaf: usize) -> usize {
        let (g, slot) = Self::locate(leaf);
        self.groups[g].range(slot).len()
    }

    pub fn push(&mut self, leaf: usize, id: SketchId) {
        let (g, slot) = Self::locate(leaf);
        let group = &mut self.groups[g];
        let rank = group.rank(slot);
        let end = group.offsets[rank + 1] as usize;
        group.ids.insert(end, id);
        group.shift_after(rank, 1);
        self.total_ids += 1;
    }

    /// Removes `id` from the list of `leaf`; false when it is not there.
    pub fn remove_id(&mut self, leaf: usize, id: SketchId) -> bool {
        let (g, slot) = Self::locate(leaf);
        let group = &mut self.groups[g];
        let rank = group.rank(slot);
        let range = group.range(slot);
        let Some(pos) = group.ids[range.clone()].iter().position(|&x| x == id) else {
            return false;
        };
        group.ids.remove(range.start + pos);
        group.shift_after(rank, -1);
        self.total_ids -= 1;
        true
    }

    /// Number of live leaves.
    #[inline]
    pub fn live(&self) -> usize {
        self.live
    }

    /// Total length of all lists.
    #[inline]
    pub fn total_ids(&self) -> usize {
        self.total_ids
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn memory_bytes(&self) -> usize {
        self.groups.len() * GROUP_HEADER_BYTES + self.total_ids * std::mem::size_of::<SketchId>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn alloc_push_take() {
        let mut store = LeafStore::new();
        let a = store.alloc(&[]);
        let b = store.alloc(&[5, 6]);
        store.push(a, 1);
        store.push(b, 7);
        store.push(a, 2);
        assert_eq!(store.list(a), &[1, 2]);
        assert_eq!(store.list(b), &[5, 6, 7]);
        assert!(store.remove_id(b, 6));
        assert!(!store.remove_id(b, 6));
        assert_eq!(store.list(b), &[5, 7]);
        assert_eq!(store.take(a), vec![1, 2]);
        assert_eq!(store.list(b), &[5, 7]);
        assert_eq!(store.live(), 1);
        assert_eq!(store.total_ids(), 2);
        // freed slot is reused
        assert_eq!(store.alloc(&[9]), a);
    }

    #[test]
    fn random_ops_match_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = LeafStore::new();
        let mut oracle: BTreeMap<usize, Vec<SketchId>> = BTreeMap::new();
        let mut next_id = 0;
        for _ in 0..20_000 {
            match rng.gen_range(0..10) {
                0..=2 => {
                    let ids: Vec<SketchId> = (0..rng.gen_range(0..4)).map(|i| next_id + i).collect();
                    next_id += 4;
                    let leaf = store.alloc(&ids);
                    assert!(oracle.insert(leaf, ids).is_none());
                }
                3 if !oracle.is_empty() => {
                    let &leaf = oracle.keys().nth(rng.gen_range(0..oracle.len())).unwrap();
                    assert_eq!(store.take(leaf), oracle.remove(&leaf).unwrap());
                }
                4..=6 if !oracle.is_empty() => {
                    let &leaf = oracle.keys().nth(rng.gen_range(0..oracle.len())).unwrap();
                    store.push(leaf, next_id);
                    oracle.get_mut(&leaf).unwrap().push(next_id);
                    next_id += 1;
                }
                _ if !oracle.is_empty() => {
                    let &leaf = oracle.keys().nth(rng.gen_range(0..oracle.len())).unwrap();
                    let list = oracle.get_mut(&leaf).unwrap();
                    if !list.is_empty() {
                        let id = list.remove(rng.gen_range(0..list.len()));
                        assert!(store.remove_id(leaf, id));
                    }
                }
                _ => {}
            }
        }
        for (&leaf, ids) in &oracle {
            assert_eq!(store.list(leaf), ids.as_slice());
        }
        assert_eq!(store.live(), oracle.len());
        assert_eq!(store.total_ids(), oracle.values().map(Vec::len).sum::<usize>());
    }
}
