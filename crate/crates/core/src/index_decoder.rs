//! Streaming minimum relative-suffix-distance decoding of received sync symbols.
//!
//! For the `i`-th received symbol the decoder outputs
//! `argmin_j RSD(S[..j], R[..i])`, ties going to the smallest `j`. Only the first
//! `i` received symbols are ever consulted for position `i`.

use serde::{Deserialize, Serialize};

use crate::channel::NoisePattern;
use crate::error::{Error, Result};
use crate::symbols::{Symbol, SymbolString};
use crate::sync_string::SyncString;

/// Decoded source index (1-based) per received position; `None` is `⊥`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDecoding {
    pub per_position: Vec<Option<usize>>,
}

impl IndexDecoding {
    pub fn len(&self) -> usize {
        self.per_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_position.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misdecoding {
    /// 1-based received position.
    pub received_pos: usize,
    pub true_index: usize,
    pub decoded: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisdecodingReport {
    pub count: usize,
    pub details: Vec<Misdecoding>,
}

/// Counts transmitted symbols whose decoded index differs from the true one.
/// `landings` yields `(true_index, received_pos)` pairs, both 1-based.
pub fn count_misdecodings_at(
    landings: impl IntoIterator<Item = (usize, usize)>,
    decoding: &IndexDecoding,
) -> Result<MisdecodingReport> {
    let mut report = MisdecodingReport::default();
    for (true_index, pos) in landings {
        let decoded = *decoding
            .per_position
            .get(pos.wrapping_sub(1))
            .ok_or(Error::LengthMismatch {
                expected: pos,
                actual: decoding.len(),
            })?;
        if decoded != Some(true_index) {
            report.count += 1;
            report.details.push(Misdecoding {
                received_pos: pos,
                true_index,
                decoded,
            });
        }
    }
    Ok(report)
}

/// Misdecodings of a decoding of the channel output produced by `pattern`.
pub fn count_misdecodings(
    sync: &SyncString,
    pattern: &NoisePattern,
    decoding: &IndexDecoding,
) -> Result<MisdecodingReport> {
    if pattern.n() != sync.len() {
        return Err(Error::LengthMismatch {
            expected: sync.len(),
            actual: pattern.n(),
        });
    }
    if decoding.len() != pattern.output_len() {
        return Err(Error::LengthMismatch {
            expected: pattern.output_len(),
            actual: decoding.len(),
        });
    }
    count_misdecodings_at(pattern.landings(), decoding)
}

/// Incremental decoder over a fixed synchronization string.
pub struct StreamingDecoder<'a> {
    sync: &'a [Symbol],
    received: Vec<Symbol>,
    /// `table[y * stride + x] = ED(rev(S[..j])[..x], rev(R[..i])[..y])` for the
    /// candidate currently being scored.
    table: Vec<u32>,
    stride: usize,
    last: Option<usize>,
}

/// Best score so far: suffix distance `ed / 2k` reached at candidate `j`.
#[derive(Debug, Clone, Copy)]
struct Score {
    ed: u64,
    k: u64,
    j: usize,
}

impl<'a> StreamingDecoder<'a> {
    pub fn new(sync: &'a SyncString) -> Self {
        Self::over(sync.symbols())
    }

    pub(crate) fn over(sync: &'a [Symbol]) -> Self {
        StreamingDecoder {
            sync,
            received: Vec::new(),
            table: Vec::new(),
            stride: sync.len() + 1,
            last: None,
        }
    }

    /// Consumes the next received symbol and returns its decoded index.
    pub fn push(&mut self, symbol: Symbol) -> usize {
        self.received.push(symbol);
        let i = self.received.len();
        let need = (i + 1) * self.stride;
        if self.table.len() < need {
            self.table.resize(need.max(self.table.len() * 2), 0);
        }
        let n = self.sync.len();
        let hint = self.last.map_or(1, |l| (l + 1).min(n));
        let mut best = self.score(hint, None).map(|(ed, k)| Score { ed, k, j: hint });
        for j in (1..=n).filter(|&j| j != hint) {
            if let Some((ed, k)) = self.score(j, best) {
                best = Some(Score { ed, k, j });
            }
        }
        let j = best.map_or(1, |b| b.j);
        self.last = Some(j);
        j
    }

    /// Relative suffix distance of `S[..j]` against everything received so far,
    /// as `(ed, k)`; `None` once it provably loses to `best`.
    fn score(&mut self, j: usize, best: Option<Score>) -> Option<(u64, u64)> {
        let i = self.received.len();
        let w = self.stride;
        let a = &self.sync[..j];
        let b = &self.received[..];
        let d = &mut self.table;
        d[0] = 0;
        let (mut run_ed, mut run_k) = (0u64, 1u64);
        for k in 1..=i.max(j) {
            if k <= j {
                let ak = a[j - k];
                d[k] = k as u32;
                for y in 1..=(k - 1).min(i) {
                    d[y * w + k] = if ak == b[i - y] {
                        d[(y - 1) * w + k - 1]
                    } else {
                        1 + d[(y - 1) * w + k].min(d[y * w + k - 1])
                    };
                }
            }
            if k <= i {
                let bk = b[i - k];
                d[k * w] = k as u32;
                for x in 1..=k.min(j) {
                    d[k * w + x] = if a[j - x] == bk {
                        d[(k - 1) * w + x - 1]
                    } else {
                        1 + d[(k - 1) * w + x].min(d[k * w + x - 1])
                    };
                }
            }
            let ed = d[k.min(i) * w + k.min(j)] as u64;
            if ed * run_k > run_ed * k as u64 {
                run_ed = ed;
                run_k = k as u64;
            }
            if let Some(bs) = best {
                let lhs = run_ed * bs.k;
                let rhs = bs.ed * run_k;
                if lhs > rhs || (lhs == rhs && j > bs.j) {
                    return None;
                }
            }
        }
        Some((run_ed, run_k))
    }

    pub fn received(&self) -> &[Symbol] {
        &self.received
    }
}

/// Decodes every position of `received` against `sync`.
pub fn decode_indices(sync: &SyncString, received: &SymbolString) -> Result<IndexDecoding> {
    sync.content().same_alphabet(received)?;
    Ok(decode_symbols(sync.symbols(), received.symbols()))
}

pub(crate) fn decode_symbols(sync: &[Symbol], received: &[Symbol]) -> IndexDecoding {
    let mut decoder = StreamingDecoder::over(sync);
    IndexDecoding {
        per_position: received.iter().map(|&c| Some(decoder.push(c))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::relative_suffix_distance_of;
    use crate::symbols::Alphabet;
    use crate::sync_string::construct_sync_string;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn naive_decode(sync: &[Symbol], received: &[Symbol]) -> Vec<usize> {
        (1..=received.len())
            .map(|i| {
                let mut best = (Ratio::new(2u64, 1), 0);
                for j in 1..=sync.len() {
                    let r = relative_suffix_distance_of(&sync[..j], &received[..i]).unwrap();
                    if r < best.0 {
                        best = (r, j);
                    }
                }
                best.1
            })
            .collect()
    }

    fn sync(n: usize, alpha: u32, seed: u64) -> SyncString {
        construct_sync_string(n, Ratio::new(1, 2), Alphabet::new(alpha).unwrap(), seed, 50).unwrap()
    }

    #[test]
    fn identity_on_exact_reception() {
        for n in 1..=10 {
            for seed in 0..3 {
                let s = sync(n, 16, seed);
                let d = decode_indices(&s, s.content()).unwrap();
                let want: Vec<_> = (1..=n).map(Some).collect();
                assert_eq!(d.per_position, want);
            }
        }
    }

    #[test]
    fn empty_reception() {
        let s = sync(5, 16, 0);
        let empty = SymbolString::new(s.alphabet(), vec![]).unwrap();
        assert!(decode_indices(&s, &empty).unwrap().is_empty());
    }

    #[test]
    fn single_deletion_on_distinct_string() {
        let a = Alphabet::new(4).unwrap();
        let s = SyncString::new(SymbolString::new(a, vec![0, 1, 2, 3]).unwrap(), Ratio::new(1, 2))
            .unwrap();
        let r = SymbolString::new(a, vec![0, 2, 3]).unwrap();
        let d = decode_indices(&s, &r).unwrap();
        assert_eq!(d.per_position, vec![Some(1), Some(3), Some(4)]);
        assert_eq!(naive_decode(s.symbols(), r.symbols()), vec![1, 3, 4]);
    }

    #[test]
    fn alphabet_mismatch_rejected() {
        let s = sync(4, 16, 0);
        let r = SymbolString::new(Alphabet::new(7).unwrap(), vec![0]).unwrap();
        assert!(matches!(decode_indices(&s, &r), Err(Error::AlphabetMismatch(16, 7))));
    }

    #[test]
    fn misdecoding_counts() {
        let d = IndexDecoding {
            per_position: vec![Some(1), Some(3), None],
        };
        let r = count_misdecodings_at([(1, 1), (2, 2), (3, 3)], &d).unwrap();
        assert_eq!(r.count, 2);
        assert!(count_misdecodings_at([(1, 4)], &d).is_err());
    }

    proptest! {
        #[test]
        fn matches_naive_argmin(seed in 0u64..1000,
                                received in prop::collection::vec(0u32..16, 0..16)) {
            let s = sync(12, 16, seed % 5);
            let got = decode_symbols(s.symbols(), &received);
            let want = naive_decode(s.symbols(), &received);
            let got: Vec<usize> = got.per_position.into_iter().map(Option::unwrap).collect();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn streaming_prefix_property(received in prop::collection::vec(0u32..16, 1..20), cut in 0usize..20) {
            let s = sync(15, 16, 1);
            let cut = cut.min(received.len());
            let full = decode_symbols(s.symbols(), &received);
            let part = decode_symbols(s.symbols(), &received[..cut]);
            prop_assert_eq!(&full.per_position[..cut], &part.per_position[..]);
        }
    }
}
