//! ε-synchronization strings: exact verification and seeded construction.
//!
//! A string `S` of length `n` is ε-synchronizing when for every
//! `1 ≤ i < j < k ≤ n + 1` the half-open blocks `S[i..j)` and `S[j..k)` satisfy
//! `ED(S[i..j), S[j..k)) > (1 − ε)(k − i)`. Since `ED = (k − i) − 2·LCS`, this is
//! the integer test `2·LCS·den(ε) < num(ε)·(k − i)`.

use std::fmt::Write as _;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::edit::BitLcs;
use crate::error::{Error, Result};
use crate::symbols::{Alphabet, Symbol, SymbolString};

pub type Rational = Ratio<u64>;

/// A verified ε-synchronization string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncString {
    content: SymbolString,
    epsilon: Rational,
}

/// Result of [`verify_sync_property`]; `violation` is a 1-based `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncCheck {
    pub holds: bool,
    pub violation: Option<(usize, usize, usize)>,
}

impl SyncString {
    /// Wraps `content` after checking the synchronization property.
    pub fn new(content: SymbolString, epsilon: Rational) -> Result<Self> {
        check_epsilon(epsilon)?;
        let check = verify_sync_property(&content, epsilon)?;
        if let Some((i, j, k)) = check.violation {
            return Err(Error::InvalidPattern(format!(
                "not a {epsilon}-synchronization string: violation at ({i}, {j}, {k})"
            )));
        }
        Ok(SyncString { content, epsilon })
    }

    pub fn content(&self) -> &SymbolString {
        &self.content
    }

    pub fn symbols(&self) -> &[Symbol] {
        self.content.symbols()
    }

    pub fn epsilon(&self) -> Rational {
        self.epsilon
    }

    pub fn alphabet(&self) -> Alphabet {
        self.content.alphabet()
    }

    pub fn len(&self) -> usize {
        self.content.len()
    }

    pub fn is_empty(&self) -> bool {
        self.content.is_empty()
    }

    /// Three-line text form: length, `p/q` epsilon, space-separated symbols.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.len());
        let _ = writeln!(out, "{}/{}", self.epsilon.numer(), self.epsilon.denom());
        let syms: Vec<String> = self.symbols().iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "{}", syms.join(" "));
        out
    }

    /// Parses [`SyncString::to_text`] output and re-verifies it. The alphabet is
    /// taken as the smallest one containing every symbol (at least 2).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} line")))
        };
        let n: usize = next("length")?
            .trim()
            .parse()
            .map_err(|_| Error::Parse("bad length".into()))?;
        let epsilon = parse_ratio(next("epsilon")?.trim())?;
        let symbols = next("symbols")?
            .split_whitespace()
            .map(|t| t.parse::<Symbol>().map_err(|_| Error::Parse(format!("bad symbol {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if symbols.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: symbols.len(),
            });
        }
        let size = symbols.iter().max().map_or(2, |&m| (m + 1).max(2));
        let content = SymbolString::new(Alphabet::new(size)?, symbols)?;
        SyncString::new(content, epsilon)
    }
}

/// Parses `"p/q"` (or a bare integer) into a reduced rational.
pub fn parse_ratio(text: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("expected p/q, got {text:?}"));
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text.trim(), "1"),
    };
    let p: u64 = p.parse().map_err(|_| bad())?;
    let q: u64 = q.parse().map_err(|_| bad())?;
    if q == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(p, q))
}

/// Formats a rational as `"p/q"`, always with an explicit denominator.
pub fn format_ratio(r: Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn check_epsilon(epsilon: Rational) -> Result<()> {
    if *epsilon.numer() == 0 || epsilon >= Ratio::from_integer(1) {
        return Err(Error::InvalidPattern(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// `true` iff blocks of total length `len` with LCS `lcs` are far enough apart.
#[inline]
fn far_enough(lcs: u64, len: u64, epsilon: Rational) -> bool {
    2 * lcs * epsilon.denom() < epsilon.numer() * len
}

/// Reusable buffers for checking the triples that end at a given position.
pub(crate) struct ExtensionChecker {
    bits: BitLcs,
    prefix: Vec<u32>,
    epsilon: Rational,
}

impl ExtensionChecker {
    pub(crate) fn new(alphabet: Alphabet, epsilon: Rational) -> Self {
        ExtensionChecker {
            bits: BitLcs::new(alphabet.size() as usize),
            prefix: Vec::new(),
            epsilon,
        }
    }

    /// Checks every triple `(i, j, k)` with `k = s.len() + 1`, i.e. the triples
    /// introduced by the last symbol of `s`. Returns the first violation found.
    pub(crate) fn check_last(&mut self, s: &[Symbol]) -> Option<(usize, usize, usize)> {
        let m = s.len();
        // Short right blocks first: that is where most violations show up.
        for j0 in (1..m).rev() {
            // text = reversed s[..j0); pattern = reversed s[j0..m)
            self.bits.load_text(j0, s[..j0].iter().rev().copied());
            for &c in s[j0..m].iter().rev() {
                self.bits.feed(c);
            }
            self.bits.prefix_lcs(&mut self.prefix);
            for x in 1..=j0 {
                let i0 = j0 - x;
                let len = (m - i0) as u64;
                if !far_enough(self.prefix[x] as u64, len, self.epsilon) {
                    return Some((i0 + 1, j0 + 1, m + 1));
                }
            }
        }
        None
    }
}

/// Exhaustively checks the ε-synchronization property over all triples.
///
/// Triples are visited by increasing `k`; the first violation found is reported.
pub fn verify_sync_property(s: &SymbolString, epsilon: Rational) -> Result<SyncCheck> {
    check_epsilon(epsilon)?;
    let mut checker = ExtensionChecker::new(s.alphabet(), epsilon);
    let symbols = s.symbols();
    for m in 2..=symbols.len() {
        if let Some(v) = checker.check_last(&symbols[..m]) {
            return Ok(SyncCheck {
                holds: false,
                violation: Some(v),
            });
        }
    }
    Ok(SyncCheck {
        holds: true,
        violation: None,
    })
}

/// Default alphabet size for a given ε: `4·⌈1/ε²⌉`.
pub fn default_alphabet_size(epsilon: Rational) -> u32 {
    let inv_sq = Ratio::new(epsilon.denom() * epsilon.denom(), epsilon.numer() * epsilon.numer());
    4 * inv_sq.ceil().to_integer() as u32
}

/// Builds a verified ε-synchronization string of length `n`.
///
/// When `n` fits the alphabet the string `0, 1, .., n−1` is returned directly.
/// Otherwise each attempt grows a random string left to right, picking a random
/// symbol that keeps every new triple valid and backtracking on dead ends; the
/// finished string is re-verified from scratch. Attempt `a` uses ChaCha stream
/// `a` of `seed`, so the result depends only on the arguments.
pub fn construct_sync_string(
    n: usize,
    epsilon: Rational,
    alphabet: Alphabet,
    seed: u64,
    max_attempts: u32,
) -> Result<SyncString> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(Error::InvalidPattern("sync string length must be ≥ 1".into()));
    }
    if n <= alphabet.size() as usize {
        let content = SymbolString::new(alphabet, (0..n as Symbol).collect())?;
        return Ok(SyncString { content, epsilon });
    }
    let step_budget = 64 * n + 4096;
    let mut checker = ExtensionChecker::new(alphabet, epsilon);
    for attempt in 0..max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        match grow(n, alphabet, &mut checker, &mut rng, step_budget) {
            Grow::Done(symbols) => {
                let content = SymbolString::new(alphabet, symbols)?;
                if verify_sync_property(&content, epsilon)?.holds {
                    return Ok(SyncString { content, epsilon });
                }
            }
            Grow::Exhausted => return Err(Error::ConstructionFailed(attempt + 1)),
            Grow::OutOfBudget => {}
        }
    }
    Err(Error::ConstructionFailed(max_attempts))
}

/// Like [`construct_sync_string`] starting from the default alphabet and
/// doubling it after each failure, up to `max_alphabet`.
pub fn construct_with_default_alphabet(
    n: usize,
    epsilon: Rational,
    seed: u64,
    max_attempts: u32,
    max_alphabet: u32,
) -> Result<SyncString> {
    let mut size = default_alphabet_size(epsilon).max(2);
    loop {
        match construct_sync_string(n, epsilon, Alphabet::new(size)?, seed, max_attempts) {
            Err(Error::ConstructionFailed(a)) if size < max_alphabet => {
                let _ = a;
                size = (size * 2).min(max_alphabet);
            }
            other => return other,
        }
    }
}

enum Grow {
    Done(Vec<Symbol>),
    /// The whole search tree was explored: no such string exists.
    Exhausted,
    OutOfBudget,
}

fn grow(
    n: usize,
    alphabet: Alphabet,
    checker: &mut ExtensionChecker,
    rng: &mut ChaCha8Rng,
    mut budget: usize,
) -> Grow {
    let mut s: Vec<Symbol> = Vec::with_capacity(n);
    // untried candidates for each placed position
    let mut pending: Vec<Vec<Symbol>> = Vec::with_capacity(n);
    let fresh = |rng: &mut ChaCha8Rng| {
        let mut c: Vec<Symbol> = (0..alphabet.size()).collect();
        c.shuffle(rng);
        c
    };
    pending.push(fresh(rng));
    loop {
        let depth = pending.len() - 1;
        let Some(candidate) = pending[depth].pop() else {
            pending.pop();
            if pending.is_empty() {
                return Grow::Exhausted;
            }
            s.pop();
            continue;
        };
        if budget == 0 {
            return Grow::OutOfBudget;
        }
        budget -= 1;
        s.truncate(depth);
        s.push(candidate);
        if checker.check_last(&s).is_some() {
            s.pop();
            continue;
        }
        if s.len() == n {
            return Grow::Done(s);
        }
        pending.push(fresh(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::insdel_distance_of;
    use proptest::prelude::*;

    fn letters(alpha: u32, text: &str) -> SymbolString {
        SymbolString::from_letters(Alphabet::new(alpha).unwrap(), text).unwrap()
    }

    fn violates(s: &[Symbol], eps: Rational, (i, j, k): (usize, usize, usize)) -> bool {
        let ed = insdel_distance_of(&s[i - 1..j - 1], &s[j - 1..k - 1]) as u64;
        // ED ≤ (1 − ε)(k − i)
        ed * eps.denom() <= (eps.denom() - eps.numer()) * (k - i) as u64
    }

    #[test]
    fn distinct_symbols_always_sync() {
        let s = letters(4, "abcd");
        for eps in [Ratio::new(1, 100), Ratio::new(1, 2), Ratio::new(99, 100)] {
            assert!(verify_sync_property(&s, eps).unwrap().holds);
        }
    }

    #[test]
    fn abab_is_not_half_sync() {
        let s = letters(2, "abab");
        let eps = Ratio::new(1, 2);
        let check = verify_sync_property(&s, eps).unwrap();
        assert!(!check.holds);
        assert!(violates(s.symbols(), eps, check.violation.unwrap()));
        assert!(violates(s.symbols(), eps, (1, 3, 5)));
    }

    #[test]
    fn single_symbol_is_vacuous() {
        let s = letters(2, "a");
        assert!(verify_sync_property(&s, Ratio::new(1, 3)).unwrap().holds);
    }

    #[test]
    fn short_strings_use_distinct_prefix() {
        let a = Alphabet::new(8).unwrap();
        let s = construct_sync_string(5, Ratio::new(1, 2), a, 99, 1).unwrap();
        assert_eq!(s.symbols(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn sampled_string_verifies() {
        let a = Alphabet::new(16).unwrap();
        let eps = Ratio::new(1, 2);
        let s = construct_sync_string(20, eps, a, 7, 10).unwrap();
        assert_eq!(s.len(), 20);
        assert!(verify_sync_property(s.content(), eps).unwrap().holds);
        let again = construct_sync_string(20, eps, a, 7, 10).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn binary_alphabet_fails_for_tiny_epsilon() {
        let a = Alphabet::new(2).unwrap();
        let r = construct_sync_string(20, Ratio::new(1, 100), a, 0, 5);
        assert!(matches!(r, Err(Error::ConstructionFailed(_))));
    }

    #[test]
    fn text_round_trip() {
        let a = Alphabet::new(16).unwrap();
        let s = construct_sync_string(30, Ratio::new(1, 2), a, 3, 10).unwrap();
        let back = SyncString::from_text(&s.to_text()).unwrap();
        assert_eq!(back.symbols(), s.symbols());
        assert_eq!(back.epsilon(), s.epsilon());
        assert!(SyncString::from_text("3\n1/2\n0 0 0\n").is_err());
        assert!(SyncString::from_text("3\n1/2\n0 1\n").is_err());
    }

    #[test]
    fn default_alphabet() {
        assert_eq!(default_alphabet_size(Ratio::new(1, 2)), 16);
        assert_eq!(default_alphabet_size(Ratio::new(1, 4)), 64);
        assert_eq!(default_alphabet_size(Ratio::new(2, 3)), 12);
    }

    #[test]
    fn ratios() {
        assert_eq!(parse_ratio("2/4").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_ratio("3").unwrap(), Ratio::from_integer(3));
        assert!(parse_ratio("1/0").is_err());
        assert_eq!(format_ratio(Ratio::from_integer(1)), "1/1");
    }

    proptest! {
        #[test]
        fn monotone_in_epsilon(s in prop::collection::vec(0u32..3, 1..12), a in 1u64..10, b in 1u64..10) {
            let (lo, hi) = (a.min(b), a.max(b));
            let ss = SymbolString::new(Alphabet::new(3).unwrap(), s).unwrap();
            if verify_sync_property(&ss, Ratio::new(lo, 10)).unwrap().holds {
                prop_assert!(verify_sync_property(&ss, Ratio::new(hi, 10)).unwrap().holds);
            }
        }
    }
}
