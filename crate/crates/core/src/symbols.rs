//! Alphabets, opaque quantum payloads, registers and channel-level sequences.
//!
//! Quantum register contents are modelled as [`QuantumToken`]s: unique, movable,
//! never cloned, and destroyed by a destructive measurement. Classical headers
//! attached next to a payload can be read any number of times without touching
//! the payload.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = u32;

/// A finite alphabet `{0, .., size - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: u32,
}

impl Alphabet {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::AlphabetTooSmall(size));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        symbol < self.size
    }
}

/// A sequence of symbols over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolString {
    alphabet: Alphabet,
    symbols: Vec<Symbol>,
}

impl SymbolString {
    pub fn new(alphabet: Alphabet, symbols: Vec<Symbol>) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad,
                size: alphabet.size(),
            });
        }
        Ok(SymbolString { alphabet, symbols })
    }

    /// Builds a string from lowercase letters, `'a'` being symbol 0.
    pub fn from_letters(alphabet: Alphabet, text: &str) -> Result<Self> {
        let symbols = text
            .bytes()
            .map(|b| {
                if b.is_ascii_lowercase() {
                    Ok((b - b'a') as Symbol)
                } else {
                    Err(Error::Parse(format!("not a lowercase letter: {:?}", b as char)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, symbols)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.symbols
    }

    pub(crate) fn same_alphabet(&self, other: &SymbolString) -> Result<()> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch(
                self.alphabet.size(),
                other.alphabet.size(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Where a token came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    /// Sender's register at the given 1-based position.
    Source(usize),
    /// Fabricated by the channel adversary. The tag has no semantic weight.
    Adversarial(String),
    /// Sender-side filler (chunk padding, re-encoding expansion qubits).
    Ancilla,
}

/// Opaque stand-in for the content of one quantum register.
///
/// Deliberately not `Clone`: the only way to obtain a token is to mint it.
#[derive(Debug, PartialEq, Eq)]
pub struct QuantumToken {
    id: TokenId,
    origin: Origin,
    consumed: bool,
}

impl QuantumToken {
    pub fn id(&self) -> TokenId {
        self.id
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    pub fn is_adversarial(&self) -> bool {
        matches!(self.origin, Origin::Adversarial(_))
    }

    /// Marks the content as destroyed without producing an outcome.
    pub fn destroy(&mut self) {
        self.consumed = true;
    }

    /// True iff this token is the untouched source register for `position`.
    pub fn is_intact_source(&self, position: usize) -> bool {
        !self.consumed && self.origin == Origin::Source(position)
    }
}

/// Run-scoped token factory. Ids are never reused within one mint.
#[derive(Debug, Default)]
pub struct TokenMint {
    next: u64,
}

impl TokenMint {
    pub fn new() -> Self {
        TokenMint::default()
    }

    fn mint(&mut self, origin: Origin) -> QuantumToken {
        let id = TokenId(self.next);
        self.next += 1;
        QuantumToken {
            id,
            origin,
            consumed: false,
        }
    }

    /// Mints `n` fresh tokens with origins `Source(1)..Source(n)`.
    pub fn mint_source_tokens(&mut self, n: usize) -> Vec<QuantumToken> {
        (1..=n).map(|i| self.mint(Origin::Source(i))).collect()
    }

    pub fn adversarial(&mut self, tag: impl Into<String>) -> QuantumToken {
        self.mint(Origin::Adversarial(tag.into()))
    }

    pub fn ancilla(&mut self) -> QuantumToken {
        self.mint(Origin::Ancilla)
    }

    pub fn minted(&self) -> u64 {
        self.next
    }
}

/// Register content: quantum or plain classical data.
#[derive(Debug, PartialEq, Eq)]
pub enum Payload {
    Quantum(QuantumToken),
    Classical(u8),
}

impl Payload {
    pub fn token(&self) -> Option<&QuantumToken> {
        match self {
            Payload::Quantum(t) => Some(t),
            Payload::Classical(_) => None,
        }
    }

    /// Measures the payload. Classical data is returned as-is and stays intact.
    pub fn measure(&mut self, measurer: &mut Measurer) -> u8 {
        match self {
            Payload::Quantum(t) => measurer.destructive_read(t),
            Payload::Classical(v) => *v,
        }
    }
}

/// Classical header prepared by the sender in a fixed basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Header(pub String);

impl Header {
    pub fn index(i: usize) -> Self {
        Header(i.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parses the header as a decimal number; `None` for anything malformed.
    pub fn parse_number(&self) -> Option<usize> {
        let s = self.0.as_str();
        if s.is_empty() || s.len() > 19 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse().ok()
    }
}

impl fmt::Display for Header {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One channel register: a payload plus an optional classical header.
#[derive(Debug, PartialEq, Eq)]
pub struct Register {
    pub payload: Payload,
    pub header: Option<Header>,
}

impl Register {
    pub fn new(payload: Payload, header: Option<Header>) -> Self {
        Register { payload, header }
    }

    pub fn quantum(token: QuantumToken, header: Option<Header>) -> Self {
        Register::new(Payload::Quantum(token), header)
    }
}

/// Reads the classical header without disturbing the payload.
pub fn read_header(register: &Register) -> Result<&Header> {
    register.header.as_ref().ok_or(Error::MissingHeader)
}

/// An entry of a channel-level sequence.
#[derive(Debug, PartialEq, Eq)]
pub enum Entry<T> {
    Item(T),
    /// End of transmission.
    Top,
    /// Erasure, only produced by decoders.
    Bottom,
}

impl<T> Entry<T> {
    pub fn item(&self) -> Option<&T> {
        match self {
            Entry::Item(x) => Some(x),
            _ => None,
        }
    }

    pub fn into_item(self) -> Option<T> {
        match self {
            Entry::Item(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self, Entry::Top)
    }
}

/// Ordered channel input or output.
#[derive(Debug, PartialEq, Eq)]
pub struct TransmittedSeq<T = Register> {
    pub entries: Vec<Entry<T>>,
}

impl<T> TransmittedSeq<T> {
    pub fn new(entries: Vec<Entry<T>>) -> Self {
        TransmittedSeq { entries }
    }

    pub fn from_items(items: Vec<T>) -> Self {
        TransmittedSeq {
            entries: items.into_iter().map(Entry::Item).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Items before the first `⊤`; everything from the first `⊤` on is dropped.
    pub fn into_received(self) -> Vec<T> {
        self.entries
            .into_iter()
            .take_while(|e| !e.is_top())
            .filter_map(Entry::into_item)
            .collect()
    }

    /// True iff all `⊤` entries form one contiguous suffix.
    pub fn top_suffix_is_contiguous(&self) -> bool {
        match self.entries.iter().position(Entry::is_top) {
            None => true,
            Some(first) => self.entries[first..].iter().all(Entry::is_top),
        }
    }
}

/// How outcomes are chosen when the physics leaves them undetermined: measuring
/// destroyed or foreign qubits, and testing damaged blocks for membership in a
/// code image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementPolicy {
    /// Bits come out 0 (extends zero runs) and damaged blocks pass as corrupted content.
    AdversarialWorstCase,
    /// Fair coin for bits and for pass/fail.
    UniformRandom,
    /// Damaged blocks always fail; bits are random.
    AlwaysFail,
}

impl MeasurementPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            MeasurementPolicy::AdversarialWorstCase => "adversarial-worst-case",
            MeasurementPolicy::UniformRandom => "uniform-random",
            MeasurementPolicy::AlwaysFail => "always-fail",
        }
    }
}

/// Receiver-side measurement apparatus for one run.
#[derive(Debug)]
pub struct Measurer {
    policy: MeasurementPolicy,
    rng: ChaCha8Rng,
    destructive_reads: usize,
    double_reads: usize,
}

impl Measurer {
    pub fn new(policy: MeasurementPolicy, seed: u64) -> Self {
        Measurer {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            destructive_reads: 0,
            double_reads: 0,
        }
    }

    pub fn policy(&self) -> MeasurementPolicy {
        self.policy
    }

    /// Outcome for a qubit whose state carries no usable information.
    pub fn policy_bit(&mut self) -> u8 {
        match self.policy {
            MeasurementPolicy::AdversarialWorstCase => 0,
            MeasurementPolicy::UniformRandom | MeasurementPolicy::AlwaysFail => {
                self.rng.gen_range(0..2)
            }
        }
    }

    /// Whether a damaged block passes the code-image test.
    pub fn damaged_block_passes(&mut self) -> bool {
        match self.policy {
            MeasurementPolicy::AdversarialWorstCase => true,
            MeasurementPolicy::UniformRandom => self.rng.gen_bool(0.5),
            MeasurementPolicy::AlwaysFail => false,
        }
    }

    /// Measures a token, destroying it. The outcome comes from the policy.
    pub fn destructive_read(&mut self, token: &mut QuantumToken) -> u8 {
        self.consume(token);
        self.policy_bit()
    }

    /// Measures a token whose physical outcome is known while it is intact
    /// (e.g. one bit of a codeword). Consumed or foreign tokens fall back to
    /// the policy.
    pub fn destructive_read_with(&mut self, token: &mut QuantumToken, physical: u8) -> u8 {
        let genuine = !token.consumed && !token.is_adversarial();
        self.consume(token);
        if genuine {
            physical
        } else {
            self.policy_bit()
        }
    }

    fn consume(&mut self, token: &mut QuantumToken) {
        self.destructive_reads += 1;
        if token.consumed {
            self.double_reads += 1;
        }
        token.consumed = true;
    }

    pub fn destructive_reads(&self) -> usize {
        self.destructive_reads
    }

    pub fn double_reads(&self) -> usize {
        self.double_reads
    }
}
