//! Adversarial insertion-deletion channel.
//!
//! A channel use is fixed by a [`NoisePattern`]: the surviving input positions
//! `S`, their strictly increasing landing positions `f`, and the number `q` of
//! fabricated output registers. Survivors are moved untouched, the adversary's
//! fill occupies the remaining output slots, and the output is padded with `⊤`
//! up to `n + ⌊nδ⌋` entries.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbols::{Entry, Header, Origin, Payload, Register, TokenMint, TransmittedSeq};
use crate::sync_string::{format_ratio, parse_ratio, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NoisePattern {
    n: usize,
    delta: Rational,
    survivors: Vec<usize>,
    landing: Vec<usize>,
    q: usize,
}

/// `⌊n·δ⌋`.
pub fn error_budget(n: usize, delta: Rational) -> usize {
    (n as u64 * delta.numer() / delta.denom()) as usize
}

impl NoisePattern {
    /// `survivors` and `landing` are parallel, 1-based and strictly increasing.
    pub fn new(
        n: usize,
        delta: Rational,
        survivors: Vec<usize>,
        landing: Vec<usize>,
        q: usize,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidPattern(m));
        if survivors.len() != landing.len() {
            return bad(format!(
                "{} survivors but {} landing positions",
                survivors.len(),
                landing.len()
            ));
        }
        if survivors.len() > n {
            return bad("more survivors than inputs".into());
        }
        let p = n - survivors.len();
        let out_len = n - p + q;
        if !strictly_increasing_within(&survivors, n) {
            return bad("survivors must be strictly increasing within 1..=n".into());
        }
        if !strictly_increasing_within(&landing, out_len) {
            return bad(format!(
                "landing map must be strictly increasing within 1..={out_len}"
            ));
        }
        let budget = error_budget(n, delta);
        if p + q > budget {
            return bad(format!("p + q = {} exceeds ⌊nδ⌋ = {budget}", p + q));
        }
        Ok(NoisePattern {
            n,
            delta,
            survivors,
            landing,
            q,
        })
    }

    pub fn identity(n: usize, delta: Rational) -> Self {
        let all: Vec<usize> = (1..=n).collect();
        NoisePattern {
            n,
            delta,
            survivors: all.clone(),
            landing: all,
            q: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> Rational {
        self.delta
    }

    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    pub fn landing(&self) -> &[usize] {
        &self.landing
    }

    /// Deletions.
    pub fn p(&self) -> usize {
        self.n - self.survivors.len()
    }

    /// Insertions.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn budget(&self) -> usize {
        error_budget(self.n, self.delta)
    }

    /// Length before padding, `n − p + q`.
    pub fn output_len(&self) -> usize {
        self.n - self.p() + self.q
    }

    /// Length after padding, `n + ⌊nδ⌋`.
    pub fn padded_len(&self) -> usize {
        self.n + self.budget()
    }

    /// `(i, f(i))` for every survivor.
    pub fn landings(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.survivors.iter().copied().zip(self.landing.iter().copied())
    }

    /// Output positions (1-based, ascending) not hit by `f`.
    pub fn non_image_slots(&self) -> Vec<usize> {
        let image: HashSet<usize> = self.landing.iter().copied().collect();
        (1..=self.output_len()).filter(|x| !image.contains(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PatternJson::from(self)).expect("pattern serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PatternJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let delta = parse_ratio(&raw.delta)?;
        let (survivors, landing): (Vec<usize>, Vec<usize>) = raw.landing.iter().copied().unzip();
        if survivors != raw.survivors {
            return Err(Error::Parse("landing keys differ from survivors".into()));
        }
        NoisePattern::new(raw.n, delta, survivors, landing, raw.q)
    }
}

fn strictly_increasing_within(xs: &[usize], max: usize) -> bool {
    xs.iter().all(|&x| (1..=max).contains(&x)) && xs.windows(2).all(|w| w[0] < w[1])
}

#[derive(Serialize, Deserialize)]
struct PatternJson {
    n: usize,
    delta: String,
    survivors: Vec<usize>,
    landing: Vec<(usize, usize)>,
    q: usize,
}

impl From<&NoisePattern> for PatternJson {
    fn from(p: &NoisePattern) -> Self {
        PatternJson {
            n: p.n,
            delta: format_ratio(p.delta),
            survivors: p.survivors.clone(),
            landing: p.landings().collect(),
            q: p.q,
        }
    }
}

/// What the adversary writes into a fabricated slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Forgery {
    /// Something classically indistinguishable from input item `i` (0-based),
    /// carrying fresh adversarial quantum content.
    Copy(usize),
    /// A classical bit.
    Bit(u8),
    /// Content with no valid classical part.
    Garbage,
    /// Premature end of transmission; rejected unless the channel allows it.
    Top,
}

/// Items that can travel through the channel.
pub trait ChannelItem: Sized {
    /// The item's classical bit, if it is a prepared classical bit.
    fn classical_bit(&self) -> Option<u8>;

    /// True if the item holds sender quantum content (adversary fill never may).
    fn carries_source(&self) -> bool;

    /// Materializes a forgery. `Forgery::Top` is handled by the caller.
    fn forge(forgery: &Forgery, input: &[Self], mint: &mut TokenMint) -> Self;
}

impl ChannelItem for Register {
    fn classical_bit(&self) -> Option<u8> {
        None
    }

    fn carries_source(&self) -> bool {
        matches!(
            self.payload.token().map(|t| t.origin()),
            Some(Origin::Source(_)) | Some(Origin::Ancilla)
        )
    }

    fn forge(forgery: &Forgery, input: &[Self], mint: &mut TokenMint) -> Self {
        match forgery {
            Forgery::Copy(i) => {
                let header = input.get(*i).and_then(|r| r.header.clone());
                Register::quantum(mint.adversarial(format!("copy-of-{}", i + 1)), header)
            }
            Forgery::Bit(b) => Register::new(Payload::Classical(*b), Some(Header(format!("bit{b}")))),
            Forgery::Garbage | Forgery::Top => {
                Register::quantum(mint.adversarial("garbage"), Some(Header("#garbage".into())))
            }
        }
    }
}

/// Applies the channel with the default configuration (no `⊤` forgery).
pub fn apply_channel<T: ChannelItem>(
    input: TransmittedSeq<T>,
    pattern: &NoisePattern,
    fill: Vec<Entry<T>>,
) -> Result<TransmittedSeq<T>> {
    InsdelChannel::default().apply(input, pattern, fill)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InsdelChannel {
    /// Lets the adversary place `⊤` in fabricated slots.
    pub allow_top_insertion: bool,
}

impl InsdelChannel {
    pub fn apply<T: ChannelItem>(
        &self,
        input: TransmittedSeq<T>,
        pattern: &NoisePattern,
        fill: Vec<Entry<T>>,
    ) -> Result<TransmittedSeq<T>> {
        if input.len() != pattern.n() {
            return Err(Error::PatternMismatch(format!(
                "input has {} registers, pattern expects {}",
                input.len(),
                pattern.n()
            )));
        }
        if fill.len() != pattern.q() {
            return Err(Error::PatternMismatch(format!(
                "{} fill entries for {} insertions",
                fill.len(),
                pattern.q()
            )));
        }
        for f in &fill {
            match f {
                Entry::Item(x) if x.carries_source() => {
                    return Err(Error::PatternMismatch("fill may not carry sender content".into()))
                }
                Entry::Top if !self.allow_top_insertion => {
                    return Err(Error::PatternMismatch("⊤ insertion is disabled".into()))
                }
                Entry::Bottom => {
                    return Err(Error::PatternMismatch("⊥ cannot be sent over the channel".into()))
                }
                _ => {}
            }
        }
        let mut items = Vec::with_capacity(input.len());
        for e in input.entries {
            match e {
                Entry::Item(x) => items.push(Some(x)),
                _ => return Err(Error::PatternMismatch("input contains ⊤ or ⊥".into())),
            }
        }
        let mut out: Vec<Option<Entry<T>>> = (0..pattern.output_len()).map(|_| None).collect();
        for (i, f) in pattern.landings() {
            out[f - 1] = items[i - 1].take().map(Entry::Item);
        }
        // unselected inputs are destroyed here
        drop(items);
        let mut fill = fill.into_iter();
        for slot in out.iter_mut().filter(|s| s.is_none()) {
            *slot = fill.next();
        }
        let mut entries: Vec<Entry<T>> = out.into_iter().map(|s| s.expect("slot filled")).collect();
        entries.resize_with(pattern.padded_len(), || Entry::Top);
        Ok(TransmittedSeq::new(entries))
    }
}

/// Deletions and insertions over an input of length `n`, before they are
/// turned into a [`NoisePattern`]. `inserts[g]` goes right before input `g`
/// (0-based); `inserts[n]` goes at the end.
#[derive(Debug, Clone)]
pub struct EditScript {
    pub deleted: Vec<bool>,
    pub inserts: Vec<Vec<Forgery>>,
}

impl EditScript {
    pub fn new(n: usize) -> Self {
        EditScript {
            deleted: vec![false; n],
            inserts: vec![Vec::new(); n + 1],
        }
    }

    pub fn cost(&self) -> usize {
        self.deleted.iter().filter(|&&d| d).count() + self.inserts.iter().map(Vec::len).sum::<usize>()
    }

    pub fn into_pattern(self, delta: Rational) -> Result<(NoisePattern, Vec<Forgery>)> {
        let n = self.deleted.len();
        let mut survivors = Vec::new();
        let mut landing = Vec::new();
        let mut fill = Vec::new();
        let mut out = 0;
        for (g, ins) in self.inserts.into_iter().enumerate() {
            for f in ins {
                out += 1;
                fill.push(f);
            }
            if g < n && !self.deleted[g] {
                out += 1;
                survivors.push(g + 1);
                landing.push(out);
            }
        }
        let q = fill.len();
        Ok((NoisePattern::new(n, delta, survivors, landing, q)?, fill))
    }
}

/// Protocol knowledge an adversary may exploit.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttackContext {
    /// Barrier layout of a framed bit stream: frames of `period` items, each
    /// starting with `1` followed by `zeros` zeros.
    pub barrier: Option<(usize, usize)>,
}

/// A generated channel use: pattern plus materialized fill.
#[derive(Debug)]
pub struct Attack<T> {
    pub pattern: NoisePattern,
    pub fill: Vec<Entry<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// Budget spent on random deletions and random insertions of look-alikes.
    UniformRandom,
    /// One run of consecutive deletions.
    BurstDelete,
    /// One run of consecutive insertions replaying nearby items.
    BurstInsert,
    /// Replaces items by forgeries with the same classical header.
    IndexForging,
    /// Breaks frame barriers: a `1` inside the zero run, or a deleted leading `1`.
    BarrierAttacker,
}

pub fn builtin_adversaries() -> Vec<Adversary> {
    vec![
        Adversary::UniformRandom,
        Adversary::BurstDelete,
        Adversary::BurstInsert,
        Adversary::IndexForging,
        Adversary::BarrierAttacker,
    ]
}

impl Adversary {
    pub fn name(&self) -> &'static str {
        match self {
            Adversary::UniformRandom => "uniform-random-insdel",
            Adversary::BurstDelete => "burst-delete",
            Adversary::BurstInsert => "burst-insert",
            Adversary::IndexForging => "index-forging",
            Adversary::BarrierAttacker => "barrier-attacker",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        builtin_adversaries().into_iter().find(|a| a.name() == name)
    }

    /// Plans an attack spending at most `budget` deletions plus insertions.
    pub fn plan(
        &self,
        bits: &[Option<u8>],
        budget: usize,
        ctx: &AttackContext,
        rng: &mut ChaCha8Rng,
    ) -> EditScript {
        let n = bits.len();
        let mut script = EditScript::new(n);
        match self {
            Adversary::UniformRandom => uniform(&mut script, budget, rng),
            Adversary::BurstDelete => {
                let b = budget.min(n);
                let start = rng.gen_range(0..=n - b);
                script.deleted[start..start + b].iter_mut().for_each(|d| *d = true);
            }
            Adversary::BurstInsert => {
                let g = rng.gen_range(0..=n);
                for t in 0..budget {
                    let f = if n == 0 {
                        Forgery::Garbage
                    } else if g >= budget {
                        Forgery::Copy(g - budget + t)
                    } else {
                        Forgery::Copy(t % n)
                    };
                    script.inserts[g].push(f);
                }
            }
            Adversary::IndexForging => {
                let opaque: Vec<usize> = (0..n).filter(|&i| bits[i].is_none()).collect();
                let pool = if opaque.is_empty() { (0..n).collect() } else { opaque };
                let pairs = (budget / 2).min(pool.len());
                for &t in pool.choose_multiple(rng, pairs) {
                    script.deleted[t] = true;
                    script.inserts[t].push(Forgery::Copy(t));
                }
                let rest = budget - script.cost();
                uniform_deletions(&mut script, rest, rng);
            }
            Adversary::BarrierAttacker => match ctx.barrier {
                Some((period, zeros)) if period > zeros && n >= period => {
                    let mut frames: Vec<usize> = (0..n / period).map(|k| k * period).collect();
                    frames.shuffle(rng);
                    for (u, &start) in frames.iter().cycle().take(budget).enumerate() {
                        let middle = start + 1 + zeros / 2;
                        if u % 2 == 0 || u >= frames.len() {
                            script.inserts[middle.min(n)].push(Forgery::Bit(1));
                        } else if !script.deleted[start] {
                            script.deleted[start] = true;
                        } else {
                            script.inserts[middle.min(n)].push(Forgery::Bit(1));
                        }
                    }
                }
                _ => uniform(&mut script, budget, rng),
            },
        }
        script
    }

    /// Generates a pattern and its fill for `input`.
    pub fn attack<T: ChannelItem>(
        &self,
        input: &[T],
        delta: Rational,
        budget: usize,
        ctx: &AttackContext,
        rng: &mut ChaCha8Rng,
        mint: &mut TokenMint,
    ) -> Result<Attack<T>> {
        let bits: Vec<Option<u8>> = input.iter().map(ChannelItem::classical_bit).collect();
        let budget = budget.min(error_budget(input.len(), delta));
        let script = self.plan(&bits, budget, ctx, rng);
        let (pattern, forgeries) = script.into_pattern(delta)?;
        let fill = forgeries
            .iter()
            .map(|f| match f {
                Forgery::Top => Entry::Top,
                f => Entry::Item(T::forge(f, input, mint)),
            })
            .collect();
        Ok(Attack { pattern, fill })
    }
}

fn uniform(script: &mut EditScript, budget: usize, rng: &mut ChaCha8Rng) {
    let n = script.deleted.len();
    for _ in 0..budget {
        let alive: usize = script.deleted.iter().filter(|&&d| !d).count();
        if alive > 0 && rng.gen_bool(0.5) {
            let k = rng.gen_range(0..alive);
            let idx = (0..n).filter(|&i| !script.deleted[i]).nth(k).expect("alive index");
            script.deleted[idx] = true;
        } else {
            let g = rng.gen_range(0..=n);
            let f = if n == 0 {
                Forgery::Garbage
            } else {
                Forgery::Copy(rng.gen_range(0..n))
            };
            script.inserts[g].push(f);
        }
    }
}

fn uniform_deletions(script: &mut EditScript, count: usize, rng: &mut ChaCha8Rng) {
    let alive: Vec<usize> = (0..script.deleted.len()).filter(|&i| !script.deleted[i]).collect();
    for &i in alive.choose_multiple(rng, count.min(alive.len())) {
        script.deleted[i] = true;
    }
}

/// Every pattern with `p + q ≤ budget` on `n ≤ 12` inputs, `δ = budget / n`.
pub fn enumerate_patterns(n: usize, budget: usize) -> Result<Vec<NoisePattern>> {
    if n == 0 || n > 12 || budget > 3 {
        return Err(Error::TooLarge(format!(
            "enumeration needs 1 ≤ n ≤ 12 and budget ≤ 3 (got n = {n}, budget = {budget})"
        )));
    }
    let delta = Rational::new(budget as u64, n as u64);
    let mut out = Vec::new();
    for p in 0..=budget.min(n) {
        for q in 0..=budget - p {
            for deleted in combinations(n, p) {
                let survivors: Vec<usize> = (1..=n).filter(|i| !deleted.contains(i)).collect();
                let out_len = n - p + q;
                for holes in combinations(out_len, q) {
                    let landing: Vec<usize> = (1..=out_len).filter(|x| !holes.contains(x)).collect();
                    out.push(NoisePattern::new(n, delta, survivors.clone(), landing, q)?);
                }
            }
        }
    }
    Ok(out)
}

/// All `k`-subsets of `1..=m`, ascending.
fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..=m {
            if m - x + 1 < k - cur.len() {
                break;
            }
            cur.push(x);
            rec(x + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(1, m, k, &mut cur, &mut out);
    out
}
