//! Insertion-deletion edit distance and relative suffix distance.
//!
//! All distances are exact integers or rationals so that argmin decisions made
//! on top of them never depend on floating-point rounding.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::symbols::{Symbol, SymbolString};

/// Length of a longest common subsequence, O(|a|·|b|) time, O(min) space.
pub fn lcs_len(a: &[Symbol], b: &[Symbol]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0u32; short.len() + 1];
    for &x in long {
        let mut diag = 0u32;
        for (j, &y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()] as usize
}

/// Number of single-symbol insertions and deletions turning `a` into `b`.
pub fn insdel_distance_of(a: &[Symbol], b: &[Symbol]) -> usize {
    a.len() + b.len() - 2 * lcs_len(a, b)
}

pub fn insdel_distance(a: &SymbolString, b: &SymbolString) -> Result<usize> {
    a.same_alphabet(b)?;
    Ok(insdel_distance_of(a.symbols(), b.symbols()))
}

/// `max_k ED(suffix_k(a), suffix_k(b)) / 2k` over `k in 1..=max(|a|, |b|)`,
/// where a suffix longer than its string is the whole string.
pub fn relative_suffix_distance(a: &SymbolString, b: &SymbolString) -> Result<Ratio<u64>> {
    a.same_alphabet(b)?;
    relative_suffix_distance_of(a.symbols(), b.symbols())
}

pub fn relative_suffix_distance_of(a: &[Symbol], b: &[Symbol]) -> Result<Ratio<u64>> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::BothEmpty);
    }
    let (ed, k) = suffix_distance_max(a, b);
    Ok(Ratio::new(ed as u64, 2 * k as u64))
}

/// Returns the maximizing `(ED, k)` pair (smallest maximizing `k`).
///
/// Runs one DP over the reversed strings: `D[x][y] = ED(rev(a)[..x], rev(b)[..y])`,
/// so the length-k suffix distance is `D[min(k,|a|)][min(k,|b|)]`.
fn suffix_distance_max(a: &[Symbol], b: &[Symbol]) -> (usize, usize) {
    let (la, lb) = (a.len(), b.len());
    let kmax = la.max(lb);
    let width = lb + 1;
    let mut d = vec![0u32; (la + 1) * width];
    for y in 0..=lb {
        d[y] = y as u32;
    }
    for x in 1..=la {
        d[x * width] = x as u32;
        let ax = a[la - x];
        for y in 1..=lb {
            d[x * width + y] = if ax == b[lb - y] {
                d[(x - 1) * width + y - 1]
            } else {
                1 + d[(x - 1) * width + y].min(d[x * width + y - 1])
            };
        }
    }
    let mut best = (0usize, 1usize);
    for k in 1..=kmax {
        let ed = d[k.min(la) * width + k.min(lb)] as usize;
        if ed * best.1 > best.0 * k {
            best = (ed, k);
        }
    }
    best
}

/// Bit-parallel LCS of a pattern against every prefix of a fixed text.
///
/// After feeding pattern symbols with [`BitLcs::feed`], `prefix_lcs(x)` is
/// `LCS(pattern, text[..x])`. Each feed costs O(|text| / 64).
pub(crate) struct BitLcs {
    words: usize,
    len: usize,
    masks: Vec<u64>,
    alphabet: usize,
    v: Vec<u64>,
}

impl BitLcs {
    pub(crate) fn new(alphabet: usize) -> Self {
        BitLcs {
            words: 0,
            len: 0,
            masks: Vec::new(),
            alphabet,
            v: Vec::new(),
        }
    }

    /// Loads a text given as an iterator of exactly `len` symbols.
    pub(crate) fn load_text(&mut self, len: usize, text: impl Iterator<Item = Symbol>) {
        self.len = len;
        self.words = len.div_ceil(64).max(1);
        self.masks.clear();
        self.masks.resize(self.words * self.alphabet, 0);
        for (y, c) in text.enumerate() {
            self.masks[c as usize * self.words + y / 64] |= 1u64 << (y % 64);
        }
        self.v.clear();
        self.v.resize(self.words, !0u64);
    }

    pub(crate) fn feed(&mut self, c: Symbol) {
        let mask = &self.masks[c as usize * self.words..(c as usize + 1) * self.words];
        let mut carry = 0u64;
        for (v, &m) in self.v.iter_mut().zip(mask) {
            let u = *v & m;
            let (s1, c1) = v.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = (c1 | c2) as u64;
            *v = s2 | (*v & !m);
        }
    }

    /// Fills `out[x] = LCS(pattern, text[..x])` for `x in 0..=len`.
    pub(crate) fn prefix_lcs(&self, out: &mut Vec<u32>) {
        out.clear();
        out.push(0);
        let mut acc = 0u32;
        for y in 0..self.len {
            if self.v[y / 64] >> (y % 64) & 1 == 0 {
                acc += 1;
            }
            out.push(acc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Alphabet;
    use proptest::prelude::*;
    use std::collections::{HashSet, VecDeque};

    fn s(alpha: u32, text: &str) -> SymbolString {
        SymbolString::from_letters(Alphabet::new(alpha).unwrap(), text).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(insdel_distance(&s(26, "ab"), &s(26, "ab")).unwrap(), 0);
        assert_eq!(insdel_distance(&s(26, "abc"), &s(26, "")).unwrap(), 3);
        assert_eq!(insdel_distance(&s(26, "kitten"), &s(26, "sitting")).unwrap(), 5);
    }

    #[test]
    fn alphabet_mismatch() {
        assert_eq!(
            insdel_distance(&s(3, "ab"), &s(4, "ab")),
            Err(Error::AlphabetMismatch(3, 4))
        );
        assert!(relative_suffix_distance(&s(3, "ab"), &s(4, "ab")).is_err());
    }

    #[test]
    fn rsd_examples() {
        let a = s(4, "abcab");
        assert_eq!(relative_suffix_distance(&a, &a).unwrap(), Ratio::new(0, 1));
        assert_eq!(
            relative_suffix_distance(&s(4, "a"), &s(4, "b")).unwrap(),
            Ratio::new(1, 1)
        );
        assert_eq!(
            relative_suffix_distance(&s(4, "ab"), &s(4, "bb")).unwrap(),
            Ratio::new(1, 2)
        );
        assert_eq!(
            relative_suffix_distance(&s(4, ""), &s(4, "")),
            Err(Error::BothEmpty)
        );
        assert_eq!(
            relative_suffix_distance(&s(4, "abc"), &s(4, "")).unwrap(),
            Ratio::new(1, 2)
        );
    }

    /// BFS over single-symbol insertions/deletions.
    fn bfs_distance(a: &[Symbol], b: &[Symbol], alpha: u32) -> usize {
        let max_len = a.len().max(b.len());
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(a.to_vec());
        queue.push_back((a.to_vec(), 0));
        while let Some((cur, d)) = queue.pop_front() {
            if cur == b {
                return d;
            }
            let mut next = Vec::new();
            for i in 0..cur.len() {
                let mut c = cur.clone();
                c.remove(i);
                next.push(c);
            }
            if cur.len() < max_len {
                for i in 0..=cur.len() {
                    for x in 0..alpha {
                        let mut c = cur.clone();
                        c.insert(i, x);
                        next.push(c);
                    }
                }
            }
            for c in next {
                if seen.insert(c.clone()) {
                    queue.push_back((c, d + 1));
                }
            }
        }
        unreachable!()
    }

    fn all_strings(alpha: u32, max_len: usize) -> Vec<Vec<Symbol>> {
        let mut out = vec![vec![]];
        let mut layer = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &layer {
                for x in 0..alpha {
                    let mut v: Vec<Symbol> = w.clone();
                    v.push(x);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn distance_matches_bfs_small() {
        // Length ≤ 4 over 3 symbols keeps the BFS cheap; proptest below covers length 5.
        let strings = all_strings(3, 4);
        for a in strings.iter().step_by(7) {
            for b in strings.iter().step_by(5) {
                assert_eq!(insdel_distance_of(a, b), bfs_distance(a, b, 3), "{a:?} {b:?}");
            }
        }
    }

    fn naive_rsd(a: &[Symbol], b: &[Symbol]) -> Ratio<u64> {
        let kmax = a.len().max(b.len());
        (1..=kmax)
            .map(|k| {
                let sa = &a[a.len() - k.min(a.len())..];
                let sb = &b[b.len() - k.min(b.len())..];
                Ratio::new(insdel_distance_of(sa, sb) as u64, 2 * k as u64)
            })
            .max()
            .unwrap()
    }

    #[test]
    fn bit_lcs_matches_dp() {
        let texts = all_strings(3, 5);
        let mut bl = BitLcs::new(3);
        let mut out = Vec::new();
        for t in texts.iter().step_by(3) {
            for p in texts.iter().step_by(11) {
                bl.load_text(t.len(), t.iter().copied());
                for &c in p {
                    bl.feed(c);
                }
                bl.prefix_lcs(&mut out);
                for x in 0..=t.len() {
                    assert_eq!(out[x] as usize, lcs_len(p, &t[..x]));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn distance_matches_bfs(a in prop::collection::vec(0u32..3, 0..=5),
                                b in prop::collection::vec(0u32..3, 0..=5)) {
            prop_assert_eq!(insdel_distance_of(&a, &b), bfs_distance(&a, &b, 3));
        }

        #[test]
        fn triangle_and_symmetry(a in prop::collection::vec(0u32..4, 0..20),
                                 b in prop::collection::vec(0u32..4, 0..20),
                                 c in prop::collection::vec(0u32..4, 0..20)) {
            let ab = insdel_distance_of(&a, &b);
            prop_assert_eq!(ab, insdel_distance_of(&b, &a));
            prop_assert!(ab <= insdel_distance_of(&a, &c) + insdel_distance_of(&c, &b));
            prop_assert_eq!(ab == 0, a == b);
        }

        #[test]
        fn rsd_matches_naive_and_is_bounded(a in prop::collection::vec(0u32..3, 0..15),
                                            b in prop::collection::vec(0u32..3, 1..15)) {
            let r = relative_suffix_distance_of(&a, &b).unwrap();
            prop_assert_eq!(r, naive_rsd(&a, &b));
            prop_assert!(r <= Ratio::new(1, 1));
        }

        #[test]
        fn rsd_zero_iff_suffix(a in prop::collection::vec(0u32..2, 1..10),
                               b in prop::collection::vec(0u32..2, 1..10)) {
            let r = relative_suffix_distance_of(&a, &b).unwrap();
            let suffix = a.ends_with(&b) || b.ends_with(&a);
            // Zero needs equal suffixes for every k, including k beyond the shorter
            // string, which only happens for equal strings.
            prop_assert_eq!(r == Ratio::new(0, 1), a == b);
            if r == Ratio::new(0, 1) {
                prop_assert!(suffix);
            }
        }

        #[test]
        fn bit_lcs_long(t in prop::collection::vec(0u32..5, 0..200),
                        p in prop::collection::vec(0u32..5, 0..80)) {
            let mut bl = BitLcs::new(5);
            bl.load_text(t.len(), t.iter().copied());
            for &c in &p { bl.feed(c); }
            let mut out = Vec::new();
            bl.prefix_lcs(&mut out);
            prop_assert_eq!(out[t.len()] as usize, lcs_len(&p, &t));
            let mid = t.len() / 2;
            prop_assert_eq!(out[mid] as usize, lcs_len(&p, &t[..mid]));
        }
    }
}
