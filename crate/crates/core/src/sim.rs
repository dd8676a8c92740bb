//! Indexing schemes that turn insertions and deletions into corruptions and
//! erasures, and the half-error ledger used to audit them.
//!
//! The trivial scheme prefixes each payload with its decimal index; the sync
//! scheme prefixes it with one symbol of a synchronization string and recovers
//! positions with the streaming index decoder. In both, a position claimed by
//! exactly one received register gets that register's payload; anything else
//! becomes `⊥` and every claimant is discarded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_decoder::{decode_symbols, IndexDecoding};
use crate::symbols::{read_header, Header, QuantumToken, Register, TokenId, TransmittedSeq};
use crate::sync_string::SyncString;

/// Decoder output: one entry per source position, `None` standing for `⊥`.
#[derive(Debug)]
pub struct SimulatedOutput {
    pub registers: Vec<Option<Register>>,
}

impl SimulatedOutput {
    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Correct,
    Corrupted,
    Erased,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorLedger {
    pub n: usize,
    /// Corruptions.
    pub c: usize,
    /// Erasures.
    pub e: usize,
    pub half_errors: usize,
    pub misdecodings: usize,
    /// `(start, length)` intervals, 1-based, covering all bad positions.
    pub block_cover: Vec<(usize, usize)>,
    pub double_reads: usize,
}

impl ErrorLedger {
    pub fn from_verdicts(verdicts: &[Verdict]) -> Self {
        let c = verdicts.iter().filter(|v| **v == Verdict::Corrupted).count();
        let e = verdicts.iter().filter(|v| **v == Verdict::Erased).count();
        ErrorLedger {
            n: verdicts.len(),
            c,
            e,
            half_errors: 2 * c + e,
            ..Default::default()
        }
    }

    /// Positions restored intact.
    pub fn correct(&self) -> usize {
        self.n - self.c - self.e
    }
}

/// Classifies every output position against the source token ids.
pub fn classify(source: &[TokenId], out: &SimulatedOutput) -> Result<Vec<Verdict>> {
    if source.len() != out.len() {
        return Err(Error::LengthMismatch {
            expected: source.len(),
            actual: out.len(),
        });
    }
    Ok(out
        .registers
        .iter()
        .enumerate()
        .map(|(k, slot)| match slot {
            None => Verdict::Erased,
            Some(reg) => match reg.payload.token() {
                Some(t) if t.id() == source[k] && t.is_intact_source(k + 1) => Verdict::Correct,
                _ => Verdict::Corrupted,
            },
        })
        .collect())
}

pub fn audit_ledger(source: &[TokenId], out: &SimulatedOutput) -> Result<ErrorLedger> {
    Ok(ErrorLedger::from_verdicts(&classify(source, out)?))
}

/// Places each item at the index it claims (1-based) if no other item claims
/// it; doubly claimed, unclaimed and out-of-range indices yield `None`.
pub fn assign_by_claims<T>(claims: Vec<(Option<usize>, T)>, n: usize) -> Vec<Option<T>> {
    let mut count = vec![0usize; n];
    for (idx, _) in &claims {
        if let Some(i) = idx.filter(|i| (1..=n).contains(i)) {
            count[i - 1] += 1;
        }
    }
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (idx, item) in claims {
        if let Some(i) = idx.filter(|i| (1..=n).contains(i)) {
            if count[i - 1] == 1 {
                out[i - 1] = Some(item);
            }
        }
    }
    out
}

fn strip(mut reg: Register) -> Register {
    reg.header = None;
    reg
}

pub fn trivial_encode(payloads: Vec<QuantumToken>) -> TransmittedSeq {
    TransmittedSeq::from_items(
        payloads
            .into_iter()
            .enumerate()
            .map(|(k, t)| Register::quantum(t, Some(Header::index(k + 1))))
            .collect(),
    )
}

pub fn trivial_decode(received: TransmittedSeq, n: usize) -> SimulatedOutput {
    let claims = received
        .into_received()
        .into_iter()
        .map(|reg| {
            let idx = read_header(&reg).ok().and_then(Header::parse_number);
            (idx, reg)
        })
        .collect();
    SimulatedOutput {
        registers: assign_by_claims(claims, n).into_iter().map(|r| r.map(strip)).collect(),
    }
}

pub fn sync_encode(payloads: Vec<QuantumToken>, sync: &SyncString) -> Result<TransmittedSeq> {
    if payloads.len() != sync.len() {
        return Err(Error::LengthMismatch {
            expected: sync.len(),
            actual: payloads.len(),
        });
    }
    Ok(TransmittedSeq::from_items(
        payloads
            .into_iter()
            .zip(sync.symbols())
            .map(|(t, &sym)| Register::quantum(t, Some(Header(sym.to_string()))))
            .collect(),
    ))
}

/// Sync decoding together with the per-position index decoding (malformed
/// headers decode to `None`).
pub fn sync_decode_detailed(received: TransmittedSeq, sync: &SyncString) -> (SimulatedOutput, IndexDecoding) {
    let alphabet = sync.alphabet();
    let regs = received.into_received();
    let symbols: Vec<Option<u32>> = regs
        .iter()
        .map(|reg| {
            read_header(reg)
                .ok()
                .and_then(Header::parse_number)
                .and_then(|x| u32::try_from(x).ok())
                .filter(|&x| alphabet.contains(x))
        })
        .collect();
    let well_formed: Vec<u32> = symbols.iter().flatten().copied().collect();
    let mut decoded = decode_symbols(sync.symbols(), &well_formed).per_position.into_iter();
    let per_position: Vec<Option<usize>> = symbols
        .iter()
        .map(|s| s.and_then(|_| decoded.next().flatten()))
        .collect();
    let claims = per_position.iter().copied().zip(regs).collect();
    let out = SimulatedOutput {
        registers: assign_by_claims(claims, sync.len()).into_iter().map(|r| r.map(strip)).collect(),
    };
    (out, IndexDecoding { per_position })
}

pub fn sync_decode(received: TransmittedSeq, sync: &SyncString) -> SimulatedOutput {
    sync_decode_detailed(received, sync).0
}

/// `⌈2/(1−ε)·budget⌉`, the misdecoding guarantee of an ε-sync string.
pub fn misdecoding_bound(epsilon: crate::sync_string::Rational, budget: usize) -> usize {
    let num = 2 * budget as u64 * epsilon.denom();
    let den = epsilon.denom() - epsilon.numer();
    num.div_ceil(den) as usize
}

/// `⌈budget·(1 + 4/(1−ε))⌉`, the half-error guarantee of the sync scheme.
pub fn sync_half_error_bound(epsilon: crate::sync_string::Rational, budget: usize) -> usize {
    let den = epsilon.denom() - epsilon.numer();
    let num = budget as u64 * (den + 4 * epsilon.denom());
    num.div_ceil(den) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, enumerate_patterns, NoisePattern};
    use crate::index_decoder::count_misdecodings;
    use crate::symbols::{Alphabet, Entry, Payload, SymbolString, TokenMint};
    use crate::sync_string::{construct_sync_string, Rational};
    use proptest::prelude::*;

    fn sources(mint: &mut TokenMint, n: usize) -> (Vec<TokenId>, Vec<QuantumToken>) {
        let toks = mint.mint_source_tokens(n);
        (toks.iter().map(QuantumToken::id).collect(), toks)
    }

    fn forged(mint: &mut TokenMint, header: &str) -> Entry<Register> {
        Entry::Item(Register::quantum(mint.adversarial("forge"), Some(Header(header.into()))))
    }

    #[test]
    fn trivial_encode_headers() {
        let mut mint = TokenMint::new();
        let (_, toks) = sources(&mut mint, 3);
        let seq = trivial_encode(toks);
        let heads: Vec<&str> = seq
            .entries
            .iter()
            .map(|e| read_header(e.item().unwrap()).unwrap().as_str())
            .collect();
        assert_eq!(heads, ["1", "2", "3"]);
        assert!(seq.entries.iter().all(|e| !e.item().unwrap().payload.token().unwrap().is_consumed()));
    }

    #[test]
    fn trivial_noiseless() {
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 3);
        let pat = NoisePattern::identity(3, Rational::new(1, 3));
        let out = trivial_decode(apply_channel(trivial_encode(toks), &pat, vec![]).unwrap(), 3);
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e, l.correct()), (0, 0, 3));
    }

    #[test]
    fn trivial_deletion_is_erasure() {
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 3);
        let pat = NoisePattern::new(3, Rational::new(1, 3), vec![1, 3], vec![1, 2], 0).unwrap();
        let out = trivial_decode(apply_channel(trivial_encode(toks), &pat, vec![]).unwrap(), 3);
        assert!(out.registers[1].is_none());
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e, l.half_errors), (0, 1, 1));
    }

    #[test]
    fn trivial_forged_index_is_corruption() {
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 3);
        let pat = NoisePattern::new(3, Rational::new(2, 3), vec![1, 3], vec![1, 3], 1).unwrap();
        let fill = vec![forged(&mut mint, "2")];
        let out = trivial_decode(apply_channel(trivial_encode(toks), &pat, fill).unwrap(), 3);
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e, l.half_errors), (1, 0, 2));
        assert!(out.registers[1].as_ref().unwrap().payload.token().unwrap().is_adversarial());
    }

    #[test]
    fn duplicate_claims_discard_everyone() {
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 3);
        let pat = NoisePattern::new(3, Rational::new(1, 3), vec![1, 2, 3], vec![1, 2, 4], 1).unwrap();
        let fill = vec![forged(&mut mint, "2")];
        let out = trivial_decode(apply_channel(trivial_encode(toks), &pat, fill).unwrap(), 3);
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e), (0, 1));
    }

    #[test]
    fn garbage_header_discarded() {
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 3);
        let pat = NoisePattern::new(3, Rational::new(1, 3), vec![1, 2, 3], vec![1, 2, 3], 1).unwrap();
        let fill = vec![forged(&mut mint, "x7")];
        let out = trivial_decode(apply_channel(trivial_encode(toks), &pat, fill).unwrap(), 3);
        assert_eq!(audit_ledger(&ids, &out).unwrap().half_errors, 0);
    }

    #[test]
    fn audit_extremes() {
        let mut mint = TokenMint::new();
        let (ids, _toks) = sources(&mut mint, 4);
        let out = SimulatedOutput {
            registers: (0..4).map(|_| None).collect(),
        };
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e), (0, 4));
        let classical = SimulatedOutput {
            registers: (0..4).map(|_| Some(Register::new(Payload::Classical(0), None))).collect(),
        };
        assert_eq!(audit_ledger(&ids, &classical).unwrap().c, 4);
        assert!(audit_ledger(&ids[..3], &out).is_err());
    }

    #[test]
    fn sync_encode_and_noiseless() {
        let a = Alphabet::new(16).unwrap();
        let s = construct_sync_string(20, Rational::new(1, 2), a, 3, 50).unwrap();
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 20);
        let seq = sync_encode(toks, &s).unwrap();
        let heads: Vec<u32> = seq
            .entries
            .iter()
            .map(|e| read_header(e.item().unwrap()).unwrap().parse_number().unwrap() as u32)
            .collect();
        assert_eq!(heads, s.symbols());
        let out = sync_decode(seq, &s);
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e), (0, 0));
        let (_, toks) = sources(&mut mint, 3);
        assert!(matches!(sync_encode(toks, &s), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn sync_single_deletion_distinct() {
        let a = Alphabet::new(4).unwrap();
        let s = SyncString::new(SymbolString::new(a, vec![0, 1, 2, 3]).unwrap(), Rational::new(1, 2)).unwrap();
        let mut mint = TokenMint::new();
        let (ids, toks) = sources(&mut mint, 4);
        let pat = NoisePattern::new(4, Rational::new(1, 4), vec![1, 3, 4], vec![1, 2, 3], 0).unwrap();
        let out = sync_decode(apply_channel(sync_encode(toks, &s).unwrap(), &pat, vec![]).unwrap(), &s);
        let l = audit_ledger(&ids, &out).unwrap();
        assert_eq!((l.c, l.e), (0, 1));
        assert!(out.registers[1].is_none());
    }

    #[test]
    fn bounds_arithmetic() {
        assert_eq!(misdecoding_bound(Rational::new(1, 2), 1), 4);
        assert_eq!(misdecoding_bound(Rational::new(1, 4), 3), 8);
        assert_eq!(sync_half_error_bound(Rational::new(1, 2), 1), 9);
        assert_eq!(sync_half_error_bound(Rational::new(1, 4), 3), 19);
    }

    #[test]
    fn single_deletions_misdecode_at_most_four() {
        let s = construct_sync_string(10, Rational::new(1, 2), Alphabet::new(16).unwrap(), 11, 50).unwrap();
        for pat in enumerate_patterns(10, 1).unwrap().into_iter().filter(|p| p.p() == 1) {
            let mut mint = TokenMint::new();
            let (_, toks) = sources(&mut mint, 10);
            let seq = apply_channel(sync_encode(toks, &s).unwrap(), &pat, vec![]).unwrap();
            let (_, dec) = sync_decode_detailed(seq, &s);
            assert!(count_misdecodings(&s, &pat, &dec).unwrap().count <= 4);
        }
    }

    /// Every fill choice for the trivial scheme that matters: forged copies of
    /// any index or garbage.
    fn trivial_fills(n: usize, q: usize) -> Vec<Vec<String>> {
        let options: Vec<String> = (1..=n).map(|i| i.to_string()).chain(["junk".to_string()]).collect();
        let mut out = vec![vec![]];
        for _ in 0..q {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut v = prefix.clone();
                        v.push(o.clone());
                        v
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn trivial_bound_exhaustive() {
        for n in 1..=6 {
            for budget in 0..=2 {
                for pat in enumerate_patterns(n, budget).unwrap() {
                    for fill in trivial_fills(n, pat.q()) {
                        let mut mint = TokenMint::new();
                        let (ids, toks) = sources(&mut mint, n);
                        let fill = fill.iter().map(|h| forged(&mut mint, h)).collect();
                        let seq = apply_channel(trivial_encode(toks), &pat, fill).unwrap();
                        let l = audit_ledger(&ids, &trivial_decode(seq, n)).unwrap();
                        assert!(l.half_errors <= pat.p() + pat.q(), "{}", pat.to_json());
                        assert!(l.correct() >= n.saturating_sub(pat.p() + pat.q()));
                    }
                }
            }
        }
    }

    #[test]
    fn assign_by_claims_rules() {
        let got = assign_by_claims(vec![(Some(1), 'a'), (Some(3), 'b'), (Some(3), 'c'), (None, 'd'), (Some(9), 'e')], 3);
        assert_eq!(got, vec![Some('a'), None, None]);
    }

    proptest! {
        #[test]
        fn no_token_twice(n in 1usize..30, seed in 0u64..200, which in 0usize..5) {
            use crate::channel::{builtin_adversaries, AttackContext};
            use rand::SeedableRng;
            let mut mint = TokenMint::new();
            let (_, toks) = sources(&mut mint, n);
            let seq = trivial_encode(toks);
            let items = seq.into_received();
            let delta = Rational::new(1, 5);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let atk = builtin_adversaries()[which]
                .attack(&items, delta, n / 5, &AttackContext::default(), &mut rng, &mut mint)
                .unwrap();
            let out = trivial_decode(apply_channel(TransmittedSeq::from_items(items), &atk.pattern, atk.fill).unwrap(), n);
            let mut seen = std::collections::HashSet::new();
            for r in out.registers.iter().flatten() {
                if let Some(t) = r.payload.token() {
                    prop_assert!(seen.insert(t.id()));
                }
            }
        }
    }
}
