//! Seeded experiment runs and exhaustive bound verification.
//!
//! Each trial draws its own seed from the configuration seed, so a run is a
//! pure function of its configuration. Records are JSON lines; the summary is
//! a one-row CSV written next to them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    apply_channel, enumerate_patterns, error_budget, Adversary, AttackContext, NoisePattern,
};
use crate::error::{Error, Result};
use crate::index_decoder::{count_misdecodings, decode_symbols};
use crate::qubit::{derive_params, run_qubit_trial, ProtocolParams};
use crate::sim::{
    assign_by_claims, audit_ledger, misdecoding_bound, sync_decode_detailed, sync_encode,
    sync_half_error_bound, trivial_decode, trivial_encode,
};
use crate::symbols::{Alphabet, MeasurementPolicy, QuantumToken, Register, TokenId, TokenMint};
use crate::sync_string::{
    construct_sync_string, default_alphabet_size, format_ratio, Rational, SyncString,
};

pub const FORMAT_VERSION: u32 = 1;

/// Constant used for the empirical scaling checks of the qubit scheme.
pub const SCALING_CONSTANT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Trivial,
    Sync,
    Qubit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Trivial => "trivial",
            Scheme::Sync => "sync",
            Scheme::Qubit => "qubit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub delta: Rational,
    pub epsilon: Rational,
    pub c: u32,
    /// Header width for the qubit scheme; `None` means `s/2`.
    pub l: Option<usize>,
    pub adversary: String,
    pub trials: usize,
    pub seed: u64,
    pub policy: MeasurementPolicy,
    /// Sync alphabet for the sync scheme; `None` means `4⌈1/ε²⌉`.
    pub alphabet: Option<u32>,
}

impl ExperimentConfig {
    pub fn new(scheme: Scheme, n: usize, delta: Rational, adversary: &str) -> Self {
        ExperimentConfig {
            scheme,
            n,
            delta,
            epsilon: Rational::new(1, 2),
            c: 1,
            l: None,
            adversary: adversary.to_string(),
            trials: 1,
            seed: 0,
            policy: MeasurementPolicy::AdversarialWorstCase,
            alphabet: None,
        }
    }

    pub fn validate(&self) -> Result<Adversary> {
        let invalid = |field: &str, message: String| {
            Err(Error::ConfigInvalid {
                field: field.into(),
                message,
            })
        };
        if self.n == 0 {
            return invalid("n", "must be at least 1".into());
        }
        if *self.delta.numer() >= *self.delta.denom() {
            return invalid("delta", format!("must be below 1, got {}", format_ratio(self.delta)));
        }
        if *self.epsilon.numer() == 0 || *self.epsilon.numer() >= *self.epsilon.denom() {
            return invalid("epsilon", format!("must lie in (0, 1), got {}", format_ratio(self.epsilon)));
        }
        if self.c == 0 {
            return invalid("c", "must be positive".into());
        }
        if let Some(a) = self.alphabet {
            if a < 2 {
                return invalid("alphabet", "must be at least 2".into());
            }
        }
        match Adversary::from_name(&self.adversary) {
            Some(a) => Ok(a),
            None => invalid("adversary", format!("unknown adversary {:?}", self.adversary)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: usize,
    pub observed: usize,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(bound: usize, observed: usize) -> Self {
        BoundCheck {
            bound,
            observed,
            pass: observed <= bound,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerSummary {
    pub c: usize,
    pub e: usize,
    pub half_errors: usize,
    pub misdecodings: usize,
    pub block_cover_size: usize,
    pub double_reads: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub format_version: u32,
    pub trial: usize,
    pub seed: u64,
    pub p: usize,
    pub q: usize,
    pub ledger: LedgerSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunk_errors: Option<usize>,
    pub bound_checks: BTreeMap<String, BoundCheck>,
}

impl TrialRecord {
    pub fn passed(&self) -> bool {
        self.bound_checks.values().all(|b| b.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub format_version: u32,
    pub scheme: Scheme,
    pub n: usize,
    pub delta: String,
    pub epsilon: String,
    pub adversary: String,
    pub trials: usize,
    pub violations: usize,
    pub max_half_errors: usize,
    pub mean_half_errors: f64,
    pub max_chunk_errors: usize,
}

impl Summary {
    pub fn from_records(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Self {
        let total: usize = records.iter().map(|r| r.ledger.half_errors).sum();
        Summary {
            format_version: FORMAT_VERSION,
            scheme: cfg.scheme,
            n: cfg.n,
            delta: format_ratio(cfg.delta),
            epsilon: format_ratio(cfg.epsilon),
            adversary: cfg.adversary.clone(),
            trials: records.len(),
            violations: records.iter().filter(|r| !r.passed()).count(),
            max_half_errors: records.iter().map(|r| r.ledger.half_errors).max().unwrap_or(0),
            mean_half_errors: if records.is_empty() {
                0.0
            } else {
                total as f64 / records.len() as f64
            },
            max_chunk_errors: records.iter().filter_map(|r| r.chunk_errors).max().unwrap_or(0),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "formatVersion,scheme,n,delta,epsilon,adversary,trials,violations,maxHalfErrors,meanHalfErrors,maxChunkErrors\n",
        );
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6},{}",
            self.format_version,
            self.scheme.name(),
            self.n,
            self.delta,
            self.epsilon,
            self.adversary,
            self.trials,
            self.violations,
            self.max_half_errors,
            self.mean_half_errors,
            self.max_chunk_errors
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Seed of trial `trial` under configuration seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

/// Worker count from `INSDEL_MAX_PARALLEL`, defaulting to the machine's.
pub fn max_parallel() -> usize {
    std::env::var("INSDEL_MAX_PARALLEL")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |k| k.get()))
}

/// The sync string used by a sync-scheme configuration.
pub fn sync_string_for(n: usize, epsilon: Rational, alphabet: Option<u32>, seed: u64) -> Result<SyncString> {
    let size = alphabet.unwrap_or_else(|| default_alphabet_size(epsilon));
    construct_sync_string(n, epsilon, Alphabet::new(size)?, seed, 64)
}

enum Prepared {
    Trivial,
    Sync(SyncString),
    Qubit(ProtocolParams, SyncString),
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let adversary = cfg.validate()?;
    let prepared = match cfg.scheme {
        Scheme::Trivial => Prepared::Trivial,
        Scheme::Sync => Prepared::Sync(sync_string_for(cfg.n, cfg.epsilon, cfg.alphabet, cfg.seed)?),
        Scheme::Qubit => {
            let params = derive_params(cfg.n, cfg.delta, cfg.c, cfg.epsilon, cfg.l).map_err(|e| {
                Error::ConfigInvalid {
                    field: "n/delta/epsilon/l".into(),
                    message: e.to_string(),
                }
            })?;
            let alphabet = Alphabet::new(params.sync_alphabet())?;
            let sync = construct_sync_string(params.chunks, cfg.epsilon, alphabet, cfg.seed, 64)?;
            Prepared::Qubit(params, sync)
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_parallel())
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let records: Result<Vec<TrialRecord>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, adversary, &prepared, trial))
            .collect()
    });
    let records = records?;
    let summary = Summary::from_records(cfg, &records);
    Ok(ExperimentReport { records, summary })
}

fn run_trial(cfg: &ExperimentConfig, adversary: Adversary, prepared: &Prepared, trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.seed, trial);
    let budget = error_budget(cfg.n, cfg.delta);
    let mut checks = BTreeMap::new();
    let (p, q, ledger, chunk_errors) = match prepared {
        Prepared::Trivial | Prepared::Sync(_) => {
            let mut mint = TokenMint::new();
            let toks = mint.mint_source_tokens(cfg.n);
            let ids: Vec<TokenId> = toks.iter().map(QuantumToken::id).collect();
            let seq = match prepared {
                Prepared::Sync(s) => sync_encode(toks, s)?,
                _ => trivial_encode(toks),
            };
            let items: Vec<Register> = seq.into_received();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atk = adversary.attack(&items, cfg.delta, budget, &AttackContext::default(), &mut rng, &mut mint)?;
            let pattern = atk.pattern;
            let received = apply_channel(crate::symbols::TransmittedSeq::from_items(items), &pattern, atk.fill)?;
            let (pq, b) = (pattern.p() + pattern.q(), budget);
            checks.insert("p+q<=n*delta".to_string(), BoundCheck::new(b, pq));
            match prepared {
                Prepared::Sync(s) => {
                    let (out, decoding) = sync_decode_detailed(received, s);
                    let mut ledger = audit_ledger(&ids, &out)?;
                    ledger.misdecodings = count_misdecodings(s, &pattern, &decoding)?.count;
                    sync_checks(&mut checks, s.epsilon(), b, ledger.misdecodings, ledger.half_errors);
                    (pattern.p(), pattern.q(), ledger, None)
                }
                _ => {
                    let ledger = audit_ledger(&ids, &trivial_decode(received, cfg.n))?;
                    trivial_checks(&mut checks, pq, ledger.c, ledger.e);
                    (pattern.p(), pattern.q(), ledger, None)
                }
            }
        }
        Prepared::Qubit(params, sync) => {
            let t = run_qubit_trial(params, sync, adversary, cfg.policy, seed)?;
            checks.insert("p+q<=n*delta".to_string(), BoundCheck::new(t.budget, t.p + t.q));
            checks.insert(
                "chunkErrors<=3*n*delta".to_string(),
                BoundCheck::new(3 * t.budget, t.chunk_errors.total()),
            );
            let lg = (*cfg.delta.denom() as f64 / *cfg.delta.numer() as f64).log2();
            let d = *cfg.delta.numer() as f64 / *cfg.delta.denom() as f64;
            let scale = cfg.n as f64 * (d * lg).sqrt();
            checks.insert(
                "c+e<=C*n*sqrt(delta*log(1/delta))".to_string(),
                BoundCheck::new((SCALING_CONSTANT * scale).floor() as usize, t.ledger.c + t.ledger.e),
            );
            checks.insert(
                "blockCover<=C*n*delta".to_string(),
                BoundCheck::new((SCALING_CONSTANT * t.budget as f64) as usize, t.ledger.block_cover.len()),
            );
            (t.p, t.q, t.ledger, Some(t.chunk_errors.total()))
        }
    };
    Ok(TrialRecord {
        format_version: FORMAT_VERSION,
        trial,
        seed,
        p,
        q,
        ledger: LedgerSummary {
            c: ledger.c,
            e: ledger.e,
            half_errors: ledger.half_errors,
            misdecodings: ledger.misdecodings,
            block_cover_size: ledger.block_cover.len(),
            double_reads: ledger.double_reads,
        },
        chunk_errors,
        bound_checks: checks,
    })
}

fn trivial_checks(checks: &mut BTreeMap<String, BoundCheck>, pq: usize, c: usize, e: usize) {
    checks.insert("2c+e<=p+q".into(), BoundCheck::new(pq, 2 * c + e));
    // at least n − p − q positions restored, i.e. c + e ≤ p + q
    checks.insert("n-restored<=p+q".into(), BoundCheck::new(pq, c + e));
}

fn sync_checks(checks: &mut BTreeMap<String, BoundCheck>, eps: Rational, budget: usize, k: usize, half: usize) {
    checks.insert("misdecodings<=2/(1-eps)*n*delta".into(), BoundCheck::new(misdecoding_bound(eps, budget), k));
    checks.insert("halfErrors<=n*delta+2k".into(), BoundCheck::new(budget + 2 * k, half));
    checks.insert(
        "halfErrors<=n*delta*(1+4/(1-eps))".into(),
        BoundCheck::new(sync_half_error_bound(eps, budget), half),
    );
}

/// Writes the records as JSON lines to `path` and the summary CSV next to it.
pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<PathBuf> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in &report.records {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    let csv = summary_path(path);
    std::fs::write(&csv, report.summary.to_csv())?;
    Ok(csv)
}

pub fn summary_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".summary.csv");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counterexample {
    pub pattern: String,
    pub fill: Vec<String>,
    pub check: String,
    pub bound: usize,
    pub observed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub patterns: usize,
    pub cases: usize,
    pub max_misdecodings: usize,
    pub max_half_errors: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Header of a received item in the classical replay of a channel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    /// Survivor carrying source position `i`.
    Source(usize),
    /// Intruder with header value `h`; `None` is an unparseable header.
    Intruder(Option<u32>),
}

/// Every fill header sequence worth trying: for the trivial scheme any index
/// or garbage; for the sync scheme every symbol in the string, fresh alphabet
/// symbols up to relabeling, and garbage.
fn fill_choices(q: usize, used: &[u32], fresh: &[u32]) -> Vec<Vec<Option<u32>>> {
    let mut out = vec![(Vec::new(), 0usize)];
    for _ in 0..q {
        let mut next = Vec::new();
        for (prefix, fresh_used) in out {
            let push = |v: Option<u32>, f: usize, next: &mut Vec<(Vec<Option<u32>>, usize)>| {
                let mut p: Vec<Option<u32>> = prefix.clone();
                p.push(v);
                next.push((p, f));
            };
            for &u in used {
                push(Some(u), fresh_used, &mut next);
            }
            for (k, &f) in fresh.iter().enumerate().take(fresh_used + 1) {
                push(Some(f), fresh_used.max(k + 1), &mut next);
            }
            push(None, fresh_used, &mut next);
        }
        out = next;
    }
    out.into_iter().map(|(p, _)| p).collect()
}

/// Replays a channel use on headers only. Returns `(c, e, misdecodings)`.
fn replay(
    scheme: Scheme,
    sync: Option<&SyncString>,
    n: usize,
    pattern: &NoisePattern,
    fill: &[Option<u32>],
) -> (usize, usize, usize) {
    let mut items: Vec<Option<Item>> = vec![None; pattern.output_len()];
    for (i, f) in pattern.landings() {
        items[f - 1] = Some(Item::Source(i));
    }
    let mut fill = fill.iter();
    for slot in items.iter_mut().filter(|s| s.is_none()) {
        *slot = Some(Item::Intruder(*fill.next().expect("fill per slot")));
    }
    let items: Vec<Item> = items.into_iter().flatten().collect();
    let claims: Vec<Option<usize>> = match (scheme, sync) {
        (Scheme::Sync, Some(s)) => {
            let header = |it: &Item| match it {
                Item::Source(i) => Some(s.symbols()[i - 1]),
                Item::Intruder(h) => h.filter(|&x| s.alphabet().contains(x)),
            };
            let symbols: Vec<Option<u32>> = items.iter().map(header).collect();
            let wf: Vec<u32> = symbols.iter().flatten().copied().collect();
            let mut dec = decode_symbols(s.symbols(), &wf).per_position.into_iter();
            symbols.iter().map(|x| x.and_then(|_| dec.next().flatten())).collect()
        }
        _ => items
            .iter()
            .map(|it| match it {
                Item::Source(i) => Some(*i),
                Item::Intruder(h) => h.map(|x| x as usize),
            })
            .collect(),
    };
    let misdecodings = items
        .iter()
        .zip(&claims)
        .filter(|(it, d)| matches!(it, Item::Source(i) if **d != Some(*i)))
        .count();
    let placed = assign_by_claims(claims.into_iter().zip(items).collect(), n);
    let (mut c, mut e) = (0, 0);
    for (k, slot) in placed.into_iter().enumerate() {
        match slot {
            None => e += 1,
            Some(Item::Source(i)) if i == k + 1 => {}
            Some(_) => c += 1,
        }
    }
    (c, e, misdecodings)
}

/// Checks every bound of `scheme` on every pattern with `p + q ≤ budget` and
/// every relevant fill. The sync scheme needs its string.
pub fn verify_bounds_exhaustive(
    scheme: Scheme,
    n: usize,
    budget: usize,
    sync: Option<&SyncString>,
) -> Result<VerifyReport> {
    let patterns = enumerate_patterns(n, budget)?;
    let (used, fresh): (Vec<u32>, Vec<u32>) = match (scheme, sync) {
        (Scheme::Trivial, _) => ((1..=n as u32).collect(), vec![]),
        (Scheme::Sync, Some(s)) => {
            if s.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: s.len(),
                });
            }
            let mut used: Vec<u32> = s.symbols().to_vec();
            used.sort_unstable();
            used.dedup();
            let fresh = (0..s.alphabet().size()).filter(|x| !used.contains(x)).take(budget).collect();
            (used, fresh)
        }
        (Scheme::Sync, None) => {
            return Err(Error::ConfigInvalid {
                field: "sync".into(),
                message: "the sync scheme needs a sync string".into(),
            })
        }
        (Scheme::Qubit, _) => {
            return Err(Error::ConfigInvalid {
                field: "scheme".into(),
                message: "exhaustive verification covers the trivial and sync schemes".into(),
            })
        }
    };
    let mut report = VerifyReport {
        patterns: patterns.len(),
        ..Default::default()
    };
    let mut choices_by_q: BTreeMap<usize, Vec<Vec<Option<u32>>>> = BTreeMap::new();
    for pattern in &patterns {
        let choices = choices_by_q
            .entry(pattern.q())
            .or_insert_with(|| fill_choices(pattern.q(), &used, &fresh));
        for fill in choices.iter() {
            report.cases += 1;
            let (c, e, k) = replay(scheme, sync, n, pattern, fill);
            let half = 2 * c + e;
            report.max_half_errors = report.max_half_errors.max(half);
            report.max_misdecodings = report.max_misdecodings.max(k);
            let mut checks = BTreeMap::new();
            match (scheme, sync) {
                (Scheme::Sync, Some(s)) => sync_checks(&mut checks, s.epsilon(), budget, k, half),
                _ => trivial_checks(&mut checks, pattern.p() + pattern.q(), c, e),
            }
            for (name, check) in checks.into_iter().filter(|(_, b)| !b.pass) {
                report.counterexamples.push(Counterexample {
                    pattern: pattern.to_json(),
                    fill: fill
                        .iter()
                        .map(|h| h.map_or_else(|| "#garbage".to_string(), |x| x.to_string()))
                        .collect(),
                    check: name,
                    bound: check.bound,
                    observed: check.observed,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::InsdelChannel;
    use crate::sim::{sync_decode, trivial_encode};
    use crate::symbols::{Entry, Header, SymbolString};

    #[test]
    fn trivial_run_example() {
        let mut cfg = ExperimentConfig::new(Scheme::Trivial, 50, Rational::new(1, 10), "uniform-random-insdel");
        cfg.trials = 100;
        cfg.seed = 4;
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.records.len(), 100);
        assert!(rep.records.iter().all(|r| r.bound_checks["2c+e<=p+q"].pass));
        assert_eq!(rep.summary.violations, 0);
    }

    #[test]
    fn zero_trials() {
        let mut cfg = ExperimentConfig::new(Scheme::Sync, 20, Rational::new(1, 10), "burst-delete");
        cfg.trials = 0;
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.records.is_empty());
        assert_eq!((rep.summary.trials, rep.summary.violations, rep.summary.max_half_errors), (0, 0, 0));
    }

    #[test]
    fn config_errors_name_the_field() {
        let cfg = ExperimentConfig::new(Scheme::Trivial, 10, Rational::new(1, 10), "nobody");
        match run_experiment(&cfg) {
            Err(Error::ConfigInvalid { field, .. }) => assert_eq!(field, "adversary"),
            other => panic!("{other:?}"),
        }
        let mut cfg = ExperimentConfig::new(Scheme::Trivial, 10, Rational::new(1, 10), "burst-delete");
        cfg.epsilon = Rational::new(1, 1);
        assert!(matches!(run_experiment(&cfg), Err(Error::ConfigInvalid { field, .. }) if field == "epsilon"));
    }

    #[test]
    fn records_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(Scheme::Sync, 40, Rational::new(1, 10), "index-forging");
        cfg.trials = 20;
        cfg.seed = 99;
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        write_report(&run_experiment(&cfg).unwrap(), &a).unwrap();
        write_report(&run_experiment(&cfg).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(std::fs::read(summary_path(&a)).unwrap(), std::fs::read(summary_path(&b)).unwrap());
        let first = std::fs::read_to_string(&a).unwrap();
        let rec: TrialRecord = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        assert_eq!(rec.format_version, FORMAT_VERSION);
    }

    #[test]
    fn verify_examples() {
        let rep = verify_bounds_exhaustive(Scheme::Trivial, 4, 2, None).unwrap();
        assert!(rep.passed() && rep.cases > rep.patterns);
        let s = sync_string_for(8, Rational::new(1, 2), None, 0).unwrap();
        let rep = verify_bounds_exhaustive(Scheme::Sync, 8, 2, Some(&s)).unwrap();
        assert!(rep.passed(), "{:?}", rep.counterexamples.first());
        assert!(matches!(verify_bounds_exhaustive(Scheme::Qubit, 4, 1, None), Err(Error::ConfigInvalid { .. })));
        assert!(matches!(verify_bounds_exhaustive(Scheme::Trivial, 13, 1, None), Err(Error::TooLarge(_))));
    }

    #[test]
    fn fill_choices_relabel_fresh_symbols() {
        let got = fill_choices(2, &[0], &[5, 6]);
        // per slot: used 0, the next fresh symbol, garbage
        assert_eq!(got.len(), 3 * 3 + 1);
        assert!(got.contains(&vec![Some(5), Some(6)]));
        assert!(!got.contains(&vec![Some(6), Some(5)]));
    }

    /// The header-only replay agrees with the token pipeline.
    #[test]
    fn replay_matches_token_pipeline() {
        let s = SyncString::new(
            SymbolString::new(Alphabet::new(6).unwrap(), vec![0, 1, 2, 3, 4]).unwrap(),
            Rational::new(1, 2),
        )
        .unwrap();
        for scheme in [Scheme::Trivial, Scheme::Sync] {
            let (used, fresh): (Vec<u32>, Vec<u32>) = match scheme {
                Scheme::Trivial => ((1..=5).collect(), vec![]),
                _ => ((0..5).collect(), vec![5]),
            };
            for pattern in enumerate_patterns(5, 2).unwrap() {
                for fill in fill_choices(pattern.q(), &used, &fresh) {
                    let (c, e, _) = replay(scheme, Some(&s), 5, &pattern, &fill);
                    let mut mint = TokenMint::new();
                    let toks = mint.mint_source_tokens(5);
                    let ids: Vec<TokenId> = toks.iter().map(QuantumToken::id).collect();
                    let seq = match scheme {
                        Scheme::Trivial => trivial_encode(toks),
                        _ => sync_encode(toks, &s).unwrap(),
                    };
                    let entries = fill
                        .iter()
                        .map(|h| {
                            let head = h.map_or_else(|| "#".to_string(), |x| x.to_string());
                            Entry::Item(Register::quantum(mint.adversarial("f"), Some(Header(head))))
                        })
                        .collect();
                    let out = InsdelChannel::default().apply(seq, &pattern, entries).unwrap();
                    let out = match scheme {
                        Scheme::Trivial => trivial_decode(out, 5),
                        _ => sync_decode(out, &s),
                    };
                    let l = audit_ledger(&ids, &out).unwrap();
                    assert_eq!((l.c, l.e), (c, e), "{} {:?}", pattern.to_json(), fill);
                }
            }
        }
    }
}
