//! Insdel-resilient transmission of qubits over a binary-alphabet channel.
//!
//! The source is cut into `N` chunks of `r` qubits. Each chunk is sent as a
//! barrier `1 0^s`, an `l`-bit sync-string header and an `r′`-slot block that
//! re-encodes the chunk so it never contains `0^s`. The receiver scans for
//! barriers, rebuilds one `D ⊗ E` system per barrier, and feeds the systems to
//! the sync-string indexing procedure.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    error_budget, Adversary, AttackContext, ChannelItem, Forgery, InsdelChannel, NoisePattern,
};
use crate::error::{Error, Result};
use crate::index_decoder::{decode_symbols, IndexDecoding};
use crate::sim::{assign_by_claims, audit_ledger, classify, ErrorLedger, SimulatedOutput, Verdict};
use crate::symbols::{
    Entry, MeasurementPolicy, Measurer, Payload, QuantumToken, Register, TokenId, TokenMint,
    TransmittedSeq,
};
use crate::sync_string::{default_alphabet_size, Rational, SyncString};

/// The chunk re-encoding: `r` bits written in base `2^{s/2} − 1`, each digit
/// `d` sent as `d + 1` on `s/2` bits, so no aligned block is all zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct E0Code {
    r: usize,
    s: usize,
    digits: usize,
}

impl E0Code {
    pub fn new(r: usize, s: usize) -> Result<Self> {
        if r == 0 || s < 4 || s % 2 != 0 || s > 62 {
            return Err(Error::InfeasibleParams(format!(
                "re-encoding needs r ≥ 1 and an even s in 4..=62 (got r = {r}, s = {s})"
            )));
        }
        let base = BigUint::from((1u64 << (s / 2)) - 1);
        let target = BigUint::one() << r;
        let mut digits = 0;
        let mut reach = BigUint::one();
        while reach < target {
            reach *= &base;
            digits += 1;
        }
        Ok(E0Code { r, s, digits })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn digits(&self) -> usize {
        self.digits
    }

    pub fn half(&self) -> usize {
        self.s / 2
    }

    /// `r′`.
    pub fn encoded_len(&self) -> usize {
        self.digits * self.half()
    }

    fn base(&self) -> u64 {
        (1u64 << self.half()) - 1
    }

    /// Bit string (MSB first) of digit `d`.
    pub fn digit_bits(&self, d: u64) -> Vec<u8> {
        let v = d + 1;
        (0..self.half()).rev().map(|b| ((v >> b) & 1) as u8).collect()
    }

    /// Inverse of [`Self::digit_bits`]; `None` for the all-zero block.
    pub fn bits_digit(&self, bits: &[u8]) -> Option<u64> {
        let v = bits.iter().fold(0u64, |acc, &b| acc * 2 + b as u64);
        v.checked_sub(1)
    }

    pub fn encode(&self, chunk: &[u8]) -> Result<Vec<u8>> {
        if chunk.len() != self.r {
            return Err(Error::LengthMismatch {
                expected: self.r,
                actual: chunk.len(),
            });
        }
        let mut value = chunk
            .iter()
            .fold(BigUint::zero(), |acc, &b| (acc << 1u8) + BigUint::from(b & 1));
        let base = BigUint::from(self.base());
        let mut digits = vec![0u64; self.digits];
        for slot in digits.iter_mut().rev() {
            *slot = (&value % &base).to_u64().expect("digit fits");
            value /= &base;
        }
        Ok(digits.into_iter().flat_map(|d| self.digit_bits(d)).collect())
    }

    /// `None` when the wire is not in the image of [`Self::encode`].
    pub fn decode(&self, wire: &[u8]) -> Option<Vec<u8>> {
        if wire.len() != self.encoded_len() {
            return None;
        }
        let base = BigUint::from(self.base());
        let mut value = BigUint::zero();
        for block in wire.chunks(self.half()) {
            value = value * &base + BigUint::from(self.bits_digit(block)?);
        }
        if value.bits() as usize > self.r {
            return None;
        }
        Some((0..self.r).rev().map(|b| value.bit(b as u64) as u8).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub delta: Rational,
    pub c: u32,
    pub epsilon: Rational,
    pub l: usize,
    pub r: usize,
    /// `N`.
    pub chunks: usize,
    pub s: usize,
    pub r_prime: usize,
    /// Padding qubits appended to the last chunk.
    pub pad: usize,
}

fn log2_inv(delta: Rational) -> f64 {
    (*delta.denom() as f64 / *delta.numer() as f64).log2()
}

fn ceil_f(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Derives chunking and framing parameters. `l = None` picks `l = s/2`.
pub fn derive_params(
    n: usize,
    delta: Rational,
    c: u32,
    epsilon: Rational,
    l: Option<usize>,
) -> Result<ProtocolParams> {
    let bad = |m: String| Err(Error::InfeasibleParams(m));
    if *delta.numer() == 0 || delta * 4 >= Rational::from_integer(1) {
        return bad(format!("δ must lie in (0, 1/4), got {delta}"));
    }
    if *epsilon.numer() == 0 || *epsilon.numer() >= *epsilon.denom() {
        return bad(format!("ε must lie in (0, 1), got {epsilon}"));
    }
    if c == 0 {
        return bad("c must be positive".into());
    }
    let lg = log2_inv(delta);
    let r = ceil_f((lg / delta_f(delta)).sqrt());
    if n < r {
        return bad(format!("n = {n} is smaller than the chunk size r = {r}"));
    }
    let mut chunks = ceil_f(n as f64 * (delta_f(delta) / lg).sqrt());
    if chunks * r < n {
        chunks = n.div_ceil(r);
    }
    let s = 2 * ceil_f(c as f64 * lg);
    let l = l.unwrap_or(s / 2);
    if l == 0 || l > s / 2 || l > 31 {
        return bad(format!("header width l = {l} must lie in 1..={}", (s / 2).min(31)));
    }
    let needed = (default_alphabet_size(epsilon) as usize).min(chunks).max(2);
    if (1usize << l) < needed {
        return bad(format!(
            "2^l = {} symbols cannot carry a sync string of length {chunks} at ε = {epsilon} (needs {needed})",
            1usize << l
        ));
    }
    let e0 = E0Code::new(r, s)?;
    Ok(ProtocolParams {
        n,
        delta,
        c,
        epsilon,
        l,
        r,
        chunks,
        s,
        r_prime: e0.encoded_len(),
        pad: chunks * r - n,
    })
}

fn delta_f(delta: Rational) -> f64 {
    *delta.numer() as f64 / *delta.denom() as f64
}

impl ProtocolParams {
    pub fn e0(&self) -> E0Code {
        E0Code::new(self.r, self.s).expect("validated at derivation")
    }

    /// Wire items per chunk, `s + 1 + l + r′`.
    pub fn frame_len(&self) -> usize {
        self.s + 1 + self.l + self.r_prime
    }

    pub fn wire_len(&self) -> usize {
        self.chunks * self.frame_len()
    }

    /// `⌊nδ⌋` with `n` the number of source qubits.
    pub fn budget(&self) -> usize {
        error_budget(self.n, self.delta)
    }

    /// Receiver loop bound `N + ⌊Nδ⌋`.
    pub fn max_systems(&self) -> usize {
        self.chunks + error_budget(self.chunks, self.delta)
    }

    pub fn sync_alphabet(&self) -> u32 {
        1u32 << self.l
    }
}

/// One qubit on the binary channel.
#[derive(Debug)]
pub enum WireQubit {
    /// Prepared in the computational basis: barrier and header bits.
    Classical(u8),
    /// Slot `pos` (1-based, up to `r′`) of chunk `chunk`'s encoded block.
    Data {
        token: QuantumToken,
        chunk: usize,
        pos: usize,
    },
}

impl WireQubit {
    fn genuine(&self) -> bool {
        match self {
            WireQubit::Classical(_) => false,
            WireQubit::Data { token, .. } => !token.is_adversarial() && !token.is_consumed(),
        }
    }
}

impl ChannelItem for WireQubit {
    fn classical_bit(&self) -> Option<u8> {
        match self {
            WireQubit::Classical(b) => Some(*b),
            WireQubit::Data { .. } => None,
        }
    }

    fn carries_source(&self) -> bool {
        match self {
            WireQubit::Classical(_) => false,
            WireQubit::Data { token, .. } => !token.is_adversarial(),
        }
    }

    fn forge(forgery: &Forgery, input: &[Self], mint: &mut TokenMint) -> Self {
        match forgery {
            Forgery::Copy(i) => match input.get(*i) {
                Some(WireQubit::Classical(b)) => WireQubit::Classical(*b),
                Some(WireQubit::Data { chunk, pos, .. }) => WireQubit::Data {
                    token: mint.adversarial("wire-copy"),
                    chunk: *chunk,
                    pos: *pos,
                },
                None => WireQubit::Classical(0),
            },
            Forgery::Bit(b) => WireQubit::Classical(*b),
            Forgery::Garbage | Forgery::Top => WireQubit::Data {
                token: mint.adversarial("wire-garbage"),
                chunk: 0,
                pos: 0,
            },
        }
    }
}

/// One line per item: `C0`, `C1`, `D<chunk>.<pos>`, `A<chunk>.<pos>` for
/// adversarial data, `T` for `⊤`.
pub fn dump_wire(entries: &[Entry<WireQubit>]) -> String {
    let mut out = String::new();
    for e in entries {
        let line = match e {
            Entry::Item(WireQubit::Classical(b)) => format!("C{b}"),
            Entry::Item(WireQubit::Data { token, chunk, pos }) => {
                let tag = if token.is_adversarial() { 'A' } else { 'D' };
                format!("{tag}{chunk}.{pos}")
            }
            Entry::Top => "T".into(),
            Entry::Bottom => "B".into(),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn symbol_bits(symbol: u32, l: usize) -> impl Iterator<Item = u8> {
    (0..l).rev().map(move |b| ((symbol >> b) & 1) as u8)
}

/// Builds the wire stream. Tokens beyond `n` (chunk padding) and block slots
/// past `r` are filled with ancillas.
pub fn alice_encode(
    source: Vec<QuantumToken>,
    params: &ProtocolParams,
    sync: &SyncString,
    mint: &mut TokenMint,
) -> Result<Vec<WireQubit>> {
    if source.len() != params.n {
        return Err(Error::ParamMismatch(format!(
            "{} source qubits for n = {}",
            source.len(),
            params.n
        )));
    }
    if sync.len() != params.chunks {
        return Err(Error::ParamMismatch(format!(
            "sync string of length {} for {} chunks",
            sync.len(),
            params.chunks
        )));
    }
    if sync.alphabet().size() > params.sync_alphabet() {
        return Err(Error::ParamMismatch(format!(
            "sync alphabet {} exceeds 2^l = {}",
            sync.alphabet().size(),
            params.sync_alphabet()
        )));
    }
    let mut source = source.into_iter();
    let mut wire = Vec::with_capacity(params.wire_len());
    for (k, &sym) in sync.symbols().iter().enumerate() {
        let chunk = k + 1;
        wire.push(WireQubit::Classical(1));
        wire.extend((0..params.s).map(|_| WireQubit::Classical(0)));
        wire.extend(symbol_bits(sym, params.l).map(WireQubit::Classical));
        for pos in 1..=params.r_prime {
            let token = if pos <= params.r { source.next() } else { None };
            let token = token.unwrap_or_else(|| mint.ancilla());
            wire.push(WireQubit::Data { token, chunk, pos });
        }
    }
    Ok(wire)
}

/// Computational-basis outcomes genuine block qubits would give if measured:
/// each chunk holds a uniformly random chunk value in encoded form.
#[derive(Debug)]
pub struct LatentOutcomes {
    seed: u64,
    e0: E0Code,
    cache: HashMap<usize, Vec<u8>>,
}

impl LatentOutcomes {
    pub fn new(e0: E0Code, seed: u64) -> Self {
        LatentOutcomes {
            seed,
            e0,
            cache: HashMap::new(),
        }
    }

    pub fn bit(&mut self, chunk: usize, pos: usize) -> u8 {
        let (seed, e0) = (self.seed, self.e0);
        let bits = self.cache.entry(chunk).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let value: Vec<u8> = (0..e0.r()).map(|_| rng.gen_range(0..2)).collect();
            e0.encode(&value).expect("chunk has length r")
        });
        bits.get(pos.wrapping_sub(1)).copied().unwrap_or(0)
    }
}

/// Contents of a receiver `D` system.
#[derive(Debug)]
pub enum BlockContent {
    /// Passed the image test with the sender's chunk intact.
    Restored { chunk: usize, tokens: Vec<QuantumToken> },
    /// Passed the image test but holds something else.
    Corrupted,
    /// Failed the image test.
    Erased,
}

#[derive(Debug)]
pub struct System {
    pub symbol: u32,
    pub content: BlockContent,
}

impl System {
    fn genuine_chunk(&self, sync: &SyncString) -> Option<usize> {
        match self.content {
            BlockContent::Restored { chunk, .. } if sync.symbols().get(chunk - 1) == Some(&self.symbol) => {
                Some(chunk)
            }
            _ => None,
        }
    }
}

/// `D ⊗ E`-level insertions and deletions: `p` chunks with no genuine
/// system, `q` systems that are not genuine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkErrors {
    pub p: usize,
    pub q: usize,
    pub systems: usize,
}

impl ChunkErrors {
    pub fn total(&self) -> usize {
        self.p + self.q
    }
}

#[derive(Debug)]
pub struct BobOutput {
    /// Per source qubit, padding stripped.
    pub output: SimulatedOutput,
    pub chunk_errors: ChunkErrors,
    pub decoding: IndexDecoding,
    /// Genuine systems decoded to a wrong chunk index.
    pub misdecodings: usize,
}

fn measure(q: WireQubit, measurer: &mut Measurer, latent: &mut LatentOutcomes) -> u8 {
    match q {
        WireQubit::Classical(b) => b,
        WireQubit::Data { mut token, chunk, pos } => {
            let physical = if token.is_adversarial() { 0 } else { latent.bit(chunk, pos) };
            measurer.destructive_read_with(&mut token, physical)
        }
    }
}

fn support_measure(
    block: Vec<WireQubit>,
    params: &ProtocolParams,
    measurer: &mut Measurer,
) -> BlockContent {
    let first_chunk = match block.first() {
        Some(WireQubit::Data { chunk, .. }) => *chunk,
        _ => 0,
    };
    let intact = first_chunk >= 1
        && block.iter().enumerate().all(|(k, q)| {
            q.genuine() && matches!(q, WireQubit::Data { chunk, pos, .. } if *chunk == first_chunk && *pos == k + 1)
        });
    if intact {
        let tokens = block
            .into_iter()
            .take(params.r)
            .map(|q| match q {
                WireQubit::Data { token, .. } => token,
                WireQubit::Classical(_) => unreachable!("intact blocks are all data"),
            })
            .collect();
        return BlockContent::Restored {
            chunk: first_chunk,
            tokens,
        };
    }
    let bits: Option<Vec<u8>> = block.iter().map(ChannelItem::classical_bit).collect();
    let passes = match bits {
        Some(bits) => params.e0().decode(&bits).is_some(),
        None => measurer.damaged_block_passes(),
    };
    for q in block {
        if let WireQubit::Data { mut token, .. } = q {
            token.destroy();
        }
    }
    if passes {
        BlockContent::Corrupted
    } else {
        BlockContent::Erased
    }
}

/// Scans for barriers, rebuilds `D ⊗ E` systems and runs the index decoder.
pub fn bob_decode(
    wire: TransmittedSeq<WireQubit>,
    params: &ProtocolParams,
    sync: &SyncString,
    measurer: &mut Measurer,
    latent: &mut LatentOutcomes,
) -> BobOutput {
    let mut items = wire.entries.into_iter().map_while(Entry::into_item);
    let mut systems: Vec<System> = Vec::new();
    'systems: while systems.len() < params.max_systems() {
        let mut after_one = false;
        let mut zeros = 0;
        loop {
            let Some(q) = items.next() else { break 'systems };
            if measure(q, measurer, latent) == 1 {
                after_one = true;
                zeros = 0;
            } else if after_one {
                zeros += 1;
                if zeros == params.s {
                    break;
                }
            }
        }
        let mut symbol = 0u32;
        for _ in 0..params.l {
            let Some(q) = items.next() else { break 'systems };
            symbol = symbol * 2 + measure(q, measurer, latent) as u32;
        }
        let block: Vec<WireQubit> = items.by_ref().take(params.r_prime).collect();
        if block.len() < params.r_prime {
            break;
        }
        let content = support_measure(block, params, measurer);
        systems.push(System { symbol, content });
    }

    let genuine: Vec<Option<usize>> = systems.iter().map(|s| s.genuine_chunk(sync)).collect();
    let kept = genuine.iter().flatten().count();
    let chunk_errors = ChunkErrors {
        p: params.chunks - kept,
        q: systems.len() - kept,
        systems: systems.len(),
    };

    let alphabet = sync.alphabet();
    let symbols: Vec<Option<u32>> = systems
        .iter()
        .map(|s| Some(s.symbol).filter(|&x| alphabet.contains(x)))
        .collect();
    let well_formed: Vec<u32> = symbols.iter().flatten().copied().collect();
    let mut decoded = decode_symbols(sync.symbols(), &well_formed).per_position.into_iter();
    let per_position: Vec<Option<usize>> = symbols
        .iter()
        .map(|s| s.and_then(|_| decoded.next().flatten()))
        .collect();
    let misdecodings = genuine
        .iter()
        .zip(&per_position)
        .filter(|(g, d)| g.is_some() && *g != *d)
        .count();

    let claims = per_position
        .iter()
        .copied()
        .zip(systems.into_iter().map(|s| s.content))
        .collect();
    let slots = assign_by_claims(claims, params.chunks);
    let mut registers: Vec<Option<Register>> = Vec::with_capacity(params.chunks * params.r);
    for slot in slots {
        match slot {
            None | Some(BlockContent::Erased) => registers.extend((0..params.r).map(|_| None)),
            Some(BlockContent::Corrupted) => registers
                .extend((0..params.r).map(|_| Some(Register::new(Payload::Classical(0), None)))),
            Some(BlockContent::Restored { tokens, .. }) => {
                registers.extend(tokens.into_iter().map(|t| Some(Register::quantum(t, None))))
            }
        }
    }
    registers.truncate(params.n);
    BobOutput {
        output: SimulatedOutput { registers },
        chunk_errors,
        decoding: IndexDecoding { per_position },
        misdecodings,
    }
}

/// Minimal cover of the (sorted, 1-based) bad positions by intervals of
/// length `r`, clipped at `n`.
pub fn block_cover(bad: &[usize], r: usize, n: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &x in bad {
        if out.last().is_some_and(|&(start, _)| x < start + r) {
            continue;
        }
        out.push((x, r.min(n + 1 - x)));
    }
    out
}

/// Outcome of one end-to-end qubit-protocol trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitTrial {
    pub p: usize,
    pub q: usize,
    pub budget: usize,
    pub chunk_errors: ChunkErrors,
    pub ledger: ErrorLedger,
    pub destructive_reads: usize,
}

/// Encodes `n` fresh qubits, attacks the stream with `⌊nδ⌋` insdel errors and
/// decodes. The same seed gives the same trial.
pub fn run_qubit_trial(
    params: &ProtocolParams,
    sync: &SyncString,
    adversary: Adversary,
    policy: MeasurementPolicy,
    seed: u64,
) -> Result<QubitTrial> {
    let mut mint = TokenMint::new();
    let source = mint.mint_source_tokens(params.n);
    let ids: Vec<TokenId> = source.iter().map(QuantumToken::id).collect();
    let wire = alice_encode(source, params, sync, &mut mint)?;
    let budget = params.budget();
    let wire_delta = Rational::new(budget as u64, wire.len() as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let ctx = AttackContext {
        barrier: Some((params.frame_len(), params.s)),
    };
    let attack = adversary.attack(&wire, wire_delta, budget, &ctx, &mut rng, &mut mint)?;
    let pattern: NoisePattern = attack.pattern;
    let received = InsdelChannel::default().apply(TransmittedSeq::from_items(wire), &pattern, attack.fill)?;
    let mut measurer = Measurer::new(policy, seed ^ 0x5eed);
    let mut latent = LatentOutcomes::new(params.e0(), seed.wrapping_add(0x1a7e));
    let bob = bob_decode(received, params, sync, &mut measurer, &mut latent);
    let verdicts = classify(&ids, &bob.output)?;
    let mut ledger = audit_ledger(&ids, &bob.output)?;
    let bad: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != Verdict::Correct)
        .map(|(k, _)| k + 1)
        .collect();
    ledger.block_cover = block_cover(&bad, params.r, params.n);
    ledger.misdecodings = bob.misdecodings;
    ledger.double_reads = measurer.double_reads();
    Ok(QubitTrial {
        p: pattern.p(),
        q: pattern.q(),
        budget,
        chunk_errors: bob.chunk_errors,
        ledger,
        destructive_reads: measurer.destructive_reads(),
    })
}
