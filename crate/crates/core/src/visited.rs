//! Exact set of visited lattice sites.
//!
//! Walks spend most of their time near recently visited sites, so the fast
//! path groups sites into cubic blocks of side `2^shift` and stores one bitmap
//! per touched block. Block coordinates are packed into a `u128` key and
//! looked up in an open-addressing table; the most recent block is cached,
//! which turns the majority of steps into a single bit test.
//!
//! The packed path is used whenever every coordinate the walk can reach fits
//! the per-axis key width; otherwise a plain `HashSet` of coordinate vectors is
//! used. Both are exact.

use std::collections::HashSet;

const EMPTY: u128 = 0;

#[derive(Debug, Clone)]
pub struct VisitedSet {
    repr: Repr,
    len: u64,
}

#[derive(Debug, Clone)]
enum Repr {
    Blocked(BlockedSet),
    General(HashSet<Box<[i64]>>),
}

impl VisitedSet {
    /// A set for sites of `Z^dim` whose coordinates never exceed `coord_bound` in absolute value.
    pub fn new(dim: usize, coord_bound: u64) -> Self {
        let repr = match BlockedSet::new(dim, coord_bound) {
            Some(b) => Repr::Blocked(b),
            None => Repr::General(HashSet::new()),
        };
        VisitedSet { repr, len: 0 }
    }

    /// Inserts `site`; returns true if it was not present.
    #[inline]
    pub fn insert(&mut self, site: &[i64]) -> bool {
        let fresh = match &mut self.repr {
            Repr::Blocked(b) => b.insert(site),
            Repr::General(h) => {
                if h.contains(site) {
                    false
                } else {
                    h.insert(site.into())
                }
            }
        };
        self.len += fresh as u64;
        fresh
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        match &self.repr {
            Repr::Blocked(b) => b.contains(site),
            Repr::General(h) => h.contains(site),
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_packed(&self) -> bool {
        matches!(self.repr, Repr::Blocked(_))
    }
}

/// Block side exponent: larger blocks mean fewer table lookups, at the cost
/// of sparser bitmaps once the walk stops revisiting.
/// Tuned on million-step walks of the nearest-neighbour example law.
fn default_shift(dim: usize) -> u32 {
    match dim {
        2 | 3 => 5,
        4 => 3,
        _ => (12 / dim as u32).max(1),
    }
}

#[derive(Debug, Clone)]
struct BlockedSet {
    dim: usize,
    shift: u32,
    coord_bits: u32,
    bias: i64,
    words_per_block: usize,
    table: Vec<Entry>,
    table_bits: u32,
    occupied: usize,
    bitmaps: Vec<u64>,
    // two most recent blocks; walks oscillate across block faces
    recent: [(u128, usize); 2],
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: u128,
    block: u32,
}

const VACANT: Entry = Entry { key: EMPTY, block: 0 };

impl BlockedSet {
    fn new(dim: usize, coord_bound: u64) -> Option<Self> {
        if dim == 0 || dim > 64 {
            return None;
        }
        Self::with_shift(dim, coord_bound, default_shift(dim))
    }

    fn with_shift(dim: usize, coord_bound: u64, shift: u32) -> Option<Self> {
        let coord_bits = (128 / dim as u32).min(62);
        let bias = 1i64 << (coord_bits - 1);
        if (coord_bound >> shift) + 2 > bias as u64 {
            return None;
        }
        let block_sites = 1usize << (shift as usize * dim);
        if block_sites > 1 << 16 {
            return None;
        }
        let table_bits = 10;
        Some(BlockedSet {
            dim,
            shift,
            coord_bits,
            bias,
            words_per_block: block_sites.div_ceil(64),
            table: vec![VACANT; 1 << table_bits],
            table_bits,
            occupied: 0,
            bitmaps: Vec::new(),
            recent: [(EMPTY, 0); 2],
        })
    }

    /// Packed block key and bit offset within the block.
    #[inline]
    fn locate(&self, site: &[i64]) -> (u128, usize) {
        debug_assert_eq!(site.len(), self.dim);
        let mask = (1i64 << self.shift) - 1;
        let mut key = 0u128;
        let mut local = 0usize;
        let mut in_range = true;
        for (j, &c) in site.iter().enumerate() {
            let biased = (c >> self.shift) + self.bias;
            in_range &= biased > 0 && biased < 2 * self.bias;
            key |= (biased as u128) << (j as u32 * self.coord_bits);
            local |= ((c & mask) as usize) << (j as u32 * self.shift);
        }
        assert!(in_range, "site outside the declared coordinate bound");
        (key, local)
    }

    #[inline]
    fn hash(&self, key: u128) -> usize {
        let folded = (key as u64) ^ ((key >> 64) as u64).rotate_left(29);
        let h = crate::rng::splitmix64(folded);
        (h >> (64 - self.table_bits)) as usize
    }

    fn find(&self, key: u128) -> Option<usize> {
        let mask = (1usize << self.table_bits) - 1;
        let mut i = self.hash(key);
        loop {
            match self.table[i].key {
                EMPTY => return None,
                k if k == key => return Some(self.table[i].block as usize),
                _ => i = (i + 1) & mask,
            }
        }
    }

    fn find_or_insert(&mut self, key: u128) -> usize {
        let mask = (1usize << self.table_bits) - 1;
        let mut i = self.hash(key);
        loop {
            match self.table[i].key {
                EMPTY => break,
                k if k == key => return self.table[i].block as usize,
                _ => i = (i + 1) & mask,
            }
        }
        let block = self.bitmaps.len() / self.words_per_block;
        self.bitmaps
            .resize(self.bitmaps.len() + self.words_per_block, 0);
        self.table[i] = Entry {
            key,
            block: u32::try_from(block).expect("block count exceeds u32"),
        };
        self.occupied += 1;
        if 2 * self.occupied > self.table.len() {
            self.grow();
        }
        block
    }

    fn grow(&mut self) {
        self.table_bits += 1;
        let old = std::mem::replace(&mut self.table, vec![VACANT; 1 << self.table_bits]);
        let mask = (1usize << self.table_bits) - 1;
        for entry in old.into_iter().filter(|e| e.key != EMPTY) {
            let mut i = self.hash(entry.key);
            while self.table[i].key != EMPTY {
                i = (i + 1) & mask;
            }
            self.table[i] = entry;
        }
    }

    #[inline]
    fn insert(&mut self, site: &[i64]) -> bool {
        let (key, local) = self.locate(site);
        let block = if key == self.recent[0].0 {
            self.recent[0].1
        } else if key == self.recent[1].0 {
            self.recent.swap(0, 1);
            self.recent[0].1
        } else {
            let b = self.find_or_insert(key);
            self.recent[1] = self.recent[0];
            self.recent[0] = (key, b);
            b
        };
        let word = &mut self.bitmaps[block * self.words_per_block + local / 64];
        let bit = 1u64 << (local % 64);
        let fresh = *word & bit == 0;
        *word |= bit;
        fresh
    }

    fn contains(&self, site: &[i64]) -> bool {
        let (key, local) = self.locate(site);
        match self.find(key) {
            Some(block) => {
                self.bitmaps[block * self.words_per_block + local / 64] & (1u64 << (local % 64))
                    != 0
            }
            None => false,
        }
    }
}
