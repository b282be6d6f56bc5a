//! A small growable-width bitset used for bin coverage vectors and study subsets.

use std::cmp::Ordering;
use std::fmt;

const WORD_BITS: usize = 64;

/// Fixed-length bit vector backed by 64-bit words.
///
/// Bits past `len` are always zero, so word-wise equality and hashing agree
/// with set equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitSet {
    len: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(WORD_BITS)],
        }
    }

    /// All `len` bits set.
    pub fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for w in &mut s.words {
            *w = !0;
        }
        s.trim();
        s
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    /// Panics if `i` is out of range.
    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i / WORD_BITS] &= !(1 << (i % WORD_BITS));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn intersection(&self, other: &BitSet) -> BitSet {
        let mut out = self.clone();
        out.intersect_with(other);
        out
    }

    pub fn union(&self, other: &BitSet) -> BitSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    /// Popcount of `self & other` without allocating.
    pub fn intersection_count(&self, other: &BitSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_disjoint(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Set bit indices in increasing order.
    pub fn iter(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            word_idx: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    /// Compares the sorted member sequences lexicographically,
    /// so `{0,1} < {0,1,2} < {0,2} < {1}`.
    pub fn cmp_lex(&self, other: &BitSet) -> Ordering {
        self.iter().cmp(other.iter())
    }

    /// Renders as a string of `0`/`1`, bit 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct Ones<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let tz = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * WORD_BITS + tz);
            }
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_trims_tail() {
        let s = BitSet::full(70);
        assert_eq!(s.count(), 70);
        assert_eq!(s, BitSet::from_indices(70, 0..70));
    }

    #[test]
    fn lexicographic_order() {
        let a = BitSet::from_indices(4, [0, 1]);
        let b = BitSet::from_indices(4, [0, 1, 2]);
        let c = BitSet::from_indices(4, [0, 2]);
        let d = BitSet::from_indices(4, [1]);
        assert!(a.cmp_lex(&b).is_lt());
        assert!(b.cmp_lex(&c).is_lt());
        assert!(c.cmp_lex(&d).is_lt());
    }

    proptest! {
        #[test]
        fn ops_match_btreeset(
            len in 1usize..200,
            xs in proptest::collection::vec(0usize..200, 0..60),
            ys in proptest::collection::vec(0usize..200, 0..60),
        ) {
            use std::collections::BTreeSet;
            let xs: BTreeSet<usize> = xs.into_iter().filter(|&x| x < len).collect();
            let ys: BTreeSet<usize> = ys.into_iter().filter(|&y| y < len).collect();
            let a = BitSet::from_indices(len, xs.iter().copied());
            let b = BitSet::from_indices(len, ys.iter().copied());
            let inter: Vec<usize> = xs.intersection(&ys).copied().collect();
            let uni: Vec<usize> = xs.union(&ys).copied().collect();
            prop_assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), inter.clone());
            prop_assert_eq!(a.union(&b).iter().collect::<Vec<_>>(), uni);
            prop_assert_eq!(a.intersection_count(&b), inter.len());
            prop_assert_eq!(a.is_disjoint(&b), inter.is_empty());
            prop_assert_eq!(a.is_subset(&b), xs.is_subset(&ys));
            prop_assert_eq!(a.cmp_lex(&b), xs.iter().cmp(ys.iter()));
        }
    }
}
