//! Exact linear-algebra model of the indexing schemes on tiny instances.
//!
//! The input density matrix is purified and the run is carried out on a state
//! vector: headers are appended as basis states, the channel reorders
//! registers, deleted registers stay in the environment, intruders are fresh
//! `|0⟩` registers, headers are measured projectively, and the receiver's
//! output systems (dimension `d + 1`, `⊥ = |d⟩`) are reduced jointly with the
//! reference. Used to check that token-model verdicts are faithful.

use nalgebra::{Complex, DMatrix, DVector};

use crate::channel::{apply_channel, enumerate_patterns, NoisePattern};
use crate::error::{Error, Result};
use crate::index_decoder::decode_symbols;
use crate::qubit::E0Code;
use crate::sim::{assign_by_claims, classify, sync_decode, sync_encode, trivial_decode, trivial_encode, Verdict};
use crate::symbols::{Entry, Header, QuantumToken, Register, TokenId, TokenMint, TransmittedSeq};
use crate::sync_string::SyncString;

pub type C64 = Complex<f64>;

const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    m: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and (for dimension ≤ 256) positivity.
    pub fn new(dims: Vec<usize>, m: DMatrix<C64>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimMismatch(dim, m.nrows()));
        }
        let rho = DensityMatrix { dims, m };
        rho.validate()?;
        Ok(rho)
    }

    pub fn from_pure(dims: Vec<usize>, psi: &DVector<C64>) -> Result<Self> {
        DensityMatrix::new(dims, psi * psi.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        DensityMatrix { dims: vec![dim], m }
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.m.trace();
        if (tr.re - 1.0).abs() > TOL || tr.im.abs() > TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        if max_abs(&(&self.m - self.m.adjoint())) > TOL {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        if self.dim() <= 256 {
            let min = self
                .m
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min < -TOL {
                return Err(Error::InvalidState(format!("eigenvalue {min}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    /// Reduced state on the subsystems in `keep`, in that order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let k = self.dims.len();
        if keep.iter().any(|&s| s >= k) {
            return Err(Error::DimMismatch(k, keep.iter().copied().max().unwrap_or(0)));
        }
        let rest: Vec<usize> = (0..k).filter(|s| !keep.contains(s)).collect();
        let kd: Vec<usize> = keep.iter().map(|&s| self.dims[s]).collect();
        let rd: Vec<usize> = rest.iter().map(|&s| self.dims[s]).collect();
        let kdim: usize = kd.iter().product();
        let rdim: usize = rd.iter().product();
        let index = |a: usize, r: usize| {
            let mut digits = vec![0; k];
            scatter(a, keep, &kd, &mut digits);
            scatter(r, &rest, &rd, &mut digits);
            gather(&digits, &self.dims)
        };
        let mut out = DMatrix::zeros(kdim, kdim);
        for a in 0..kdim {
            for b in 0..kdim {
                out[(a, b)] = (0..rdim).map(|r| self.m[(index(a, r), index(b, r))]).sum();
            }
        }
        DensityMatrix::new(kd, out)
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Writes the mixed-radix digits of `x` over `dims` into `digits[subs[..]]`.
fn scatter(mut x: usize, subs: &[usize], dims: &[usize], digits: &mut [usize]) {
    for (s, d) in subs.iter().zip(dims).rev() {
        digits[*s] = x % d;
        x /= d;
    }
}

fn gather(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (x, d)| acc * d + x)
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity(rho: &DensityMatrix, psi: &DVector<C64>) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(Error::DimMismatch(rho.dim(), psi.len()));
    }
    let v = (psi.adjoint() * &rho.m * psi)[(0, 0)];
    if v.im.abs() > TOL {
        return Err(Error::InvalidState(format!("complex fidelity {v}")));
    }
    Ok(v.re.clamp(0.0, 1.0))
}

/// Pure state over an ordered list of subsystems, subsystem 0 most significant.
#[derive(Debug, Clone)]
struct Pure {
    dims: Vec<usize>,
    amp: Vec<C64>,
}

impl Pure {
    fn norm2(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self) -> Result<()> {
        if (self.norm2() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("norm² {}", self.norm2())));
        }
        Ok(())
    }

    /// Appends a subsystem prepared in `|basis⟩`; returns its label.
    fn append(&mut self, dim: usize, basis: usize) -> usize {
        let mut amp = vec![C64::new(0.0, 0.0); self.amp.len() * dim];
        for (x, a) in self.amp.iter().enumerate() {
            amp[x * dim + basis] = *a;
        }
        self.amp = amp;
        self.dims.push(dim);
        self.dims.len() - 1
    }

    fn digits(&self, mut x: usize) -> Vec<usize> {
        let mut d = vec![0; self.dims.len()];
        for (s, dim) in self.dims.iter().enumerate().rev() {
            d[s] = x % dim;
            x /= dim;
        }
        d
    }

    /// Outcome distribution of a computational-basis measurement of `sub`.
    fn distribution(&self, sub: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dims[sub]];
        for (x, a) in self.amp.iter().enumerate() {
            p[self.digits(x)[sub]] += a.norm_sqr();
        }
        p
    }

    /// Projects `sub` onto `|basis⟩` and renormalizes; returns the probability.
    fn project(&mut self, sub: usize, basis: usize) -> f64 {
        let mut prob = 0.0;
        for x in 0..self.amp.len() {
            if self.digits(x)[sub] == basis {
                prob += self.amp[x].norm_sqr();
            } else {
                self.amp[x] = C64::new(0.0, 0.0);
            }
        }
        if prob > 0.0 {
            let k = 1.0 / prob.sqrt();
            self.amp.iter_mut().for_each(|a| *a *= k);
        }
        prob
    }

    /// Isometric embedding of `sub` into a larger space (new levels empty).
    fn embed(&mut self, sub: usize, new_dim: usize) {
        let mut dims = self.dims.clone();
        dims[sub] = new_dim;
        let total: usize = dims.iter().product();
        let mut amp = vec![C64::new(0.0, 0.0); total];
        for (x, a) in self.amp.iter().enumerate() {
            amp[gather(&self.digits(x), &dims)] = *a;
        }
        self.amp = amp;
        self.dims = dims;
    }

    /// `Tr_rest |ψ⟩⟨ψ|` on `keep`, in that order.
    fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let rest: Vec<usize> = (0..self.dims.len()).filter(|s| !keep.contains(s)).collect();
        let kd: Vec<usize> = keep.iter().map(|&s| self.dims[s]).collect();
        let rd: Vec<usize> = rest.iter().map(|&s| self.dims[s]).collect();
        let kdim: usize = kd.iter().product();
        let rdim: usize = rd.iter().product();
        let mut m = DMatrix::zeros(kdim, rdim);
        for (x, a) in self.amp.iter().enumerate() {
            let d = self.digits(x);
            let kx = keep.iter().fold(0, |acc, &s| acc * self.dims[s] + d[s]);
            let rx = rest.iter().fold(0, |acc, &s| acc * self.dims[s] + d[s]);
            m[(kx, rx)] = *a;
        }
        DensityMatrix::new(kd, &m * m.adjoint())
    }
}

/// Indexing scheme run by the exact model.
#[derive(Debug, Clone, Copy)]
pub enum ExactScheme<'a> {
    /// Header of register `i` is `i`; values outside `1..=n` are malformed.
    Trivial,
    /// Header of register `i` is `S_i`; values outside the alphabet are malformed.
    Sync(&'a SyncString),
}

impl ExactScheme<'_> {
    fn header(&self, i: usize) -> usize {
        match self {
            ExactScheme::Trivial => i,
            ExactScheme::Sync(s) => s.symbols()[i - 1] as usize,
        }
    }

    fn claims(&self, headers: &[usize], n: usize) -> Vec<Option<usize>> {
        match self {
            ExactScheme::Trivial => headers.iter().map(|&h| Some(h).filter(|h| (1..=n).contains(h))).collect(),
            ExactScheme::Sync(s) => {
                let a = s.alphabet();
                let ok: Vec<Option<u32>> =
                    headers.iter().map(|&h| u32::try_from(h).ok().filter(|&x| a.contains(x))).collect();
                let wf: Vec<u32> = ok.iter().flatten().copied().collect();
                let mut dec = decode_symbols(s.symbols(), &wf).per_position.into_iter();
                ok.iter().map(|x| x.and_then(|_| dec.next().flatten())).collect()
            }
        }
    }
}

/// Runs encode, channel, header measurement and rearrangement exactly.
///
/// `input` lives on `(H_sim)^{⊗n} ⊗ R_1 ⊗ ..` with `n = pattern.n()`;
/// `fill_headers` gives the header value of each intruder in output order.
/// The result lives on `(H_sim ⊕ ⊥)^{⊗n} ⊗ R_1 ⊗ ..`.
pub fn simulate_protocol_exact(
    input: &DensityMatrix,
    scheme: ExactScheme,
    pattern: &NoisePattern,
    fill_headers: &[usize],
) -> Result<DensityMatrix> {
    let n = pattern.n();
    if n > 3 || pattern.budget() > 2 {
        return Err(Error::TooLarge(format!("exact model needs n ≤ 3 and budget ≤ 2 (n = {n})")));
    }
    if input.dims().len() < n || input.dims()[..n].iter().any(|&d| d > 2 || d != input.dims()[0]) {
        return Err(Error::DimMismatch(n, input.dims().len()));
    }
    if fill_headers.len() != pattern.q() {
        return Err(Error::PatternMismatch(format!(
            "{} intruder headers for {} insertions",
            fill_headers.len(),
            pattern.q()
        )));
    }
    let d_sim = input.dims()[0];
    let ref_dims = input.dims()[n..].to_vec();
    let eig = input.matrix().clone().symmetric_eigen();
    let support: Vec<usize> = (0..input.dim()).filter(|&k| eig.eigenvalues[k] > 1e-12).collect();
    let rank = support.len();
    let mut amp = vec![C64::new(0.0, 0.0); input.dim() * rank];
    for (col, &k) in support.iter().enumerate() {
        let w = eig.eigenvalues[k].sqrt();
        for x in 0..input.dim() {
            amp[x * rank + col] = eig.eigenvectors[(x, k)] * w;
        }
    }
    let mut dims = input.dims().to_vec();
    dims.push(rank);
    let mut psi = Pure { dims, amp };
    psi.check()?;

    let h_dim = (1..=n)
        .map(|i| scheme.header(i))
        .chain(fill_headers.iter().copied())
        .max()
        .unwrap_or(0)
        + 1;
    // register i = (sim i - 1, header)
    let mut registers: Vec<(usize, usize)> = Vec::with_capacity(n);
    for i in 1..=n {
        registers.push((i - 1, psi.append(h_dim, scheme.header(i))));
    }
    if psi.amp.len() > 1 << 22 {
        return Err(Error::TooLarge("state vector too large".into()));
    }

    let mut received: Vec<Option<(usize, usize)>> = vec![None; pattern.output_len()];
    for (i, f) in pattern.landings() {
        received[f - 1] = Some(registers[i - 1]);
    }
    let mut fill = fill_headers.iter();
    for slot in received.iter_mut().filter(|s| s.is_none()) {
        let h = *fill.next().expect("one header per intruder");
        let sim = psi.append(d_sim, 0);
        let head = psi.append(h_dim, h);
        *slot = Some((sim, head));
    }
    let received: Vec<(usize, usize)> = received.into_iter().flatten().collect();
    psi.check()?;

    let mut headers = Vec::with_capacity(received.len());
    for &(_, head) in &received {
        let dist = psi.distribution(head);
        let (outcome, p) = dist
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if (p - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("header outcome not deterministic ({p})")));
        }
        psi.project(head, outcome);
        psi.check()?;
        headers.push(outcome);
    }

    let claims = scheme.claims(&headers, n);
    let placed = assign_by_claims(claims.into_iter().zip(received.iter().map(|r| r.0)).collect(), n);
    let mut outputs = Vec::with_capacity(n);
    for slot in placed {
        match slot {
            Some(sim) => {
                psi.embed(sim, d_sim + 1);
                outputs.push(sim);
            }
            None => outputs.push(psi.append(d_sim + 1, d_sim)),
        }
    }
    psi.check()?;
    let keep: Vec<usize> = outputs.into_iter().chain(n..n + ref_dims.len()).collect();
    psi.reduce(&keep)
}

/// `(|00⟩ + |11⟩)/√2`, optionally with the first factor embedded in a qutrit.
pub fn bell_state(first_dim: usize) -> DVector<C64> {
    let mut v = DVector::zeros(first_dim * 2);
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    v[0] = h;
    v[3] = h;
    v
}

/// `n` Bell pairs laid out as `sim_1 .. sim_n, R_1 .. R_n`.
pub fn bell_pairs_input(n: usize) -> Result<DensityMatrix> {
    let dims: Vec<usize> = vec![2; 2 * n];
    let total = 1usize << (2 * n);
    let mut psi = DVector::zeros(total);
    let amp = C64::new((0.5f64).powi(n as i32).sqrt(), 0.0);
    for x in 0..(1usize << n) {
        let mut digits = vec![0; 2 * n];
        for i in 0..n {
            let b = (x >> (n - 1 - i)) & 1;
            digits[i] = b;
            digits[n + i] = b;
        }
        psi[gather(&digits, &dims)] = amp;
    }
    DensityMatrix::from_pure(dims, &psi)
}

/// Per-position verdicts from an output of [`simulate_protocol_exact`] run on
/// [`bell_pairs_input`].
pub fn exact_verdicts(out: &DensityMatrix, n: usize) -> Result<Vec<Verdict>> {
    let bell = bell_state(3);
    (0..n)
        .map(|i| {
            let pair = out.partial_trace(&[i, n + i])?;
            let bottom: f64 = (0..2).map(|r| pair.matrix()[(2 * 2 + r, 2 * 2 + r)].re).sum();
            let f = fidelity(&pair, &bell)?;
            Ok(if (bottom - 1.0).abs() < 1e-9 {
                Verdict::Erased
            } else if (f - 1.0).abs() < 1e-9 {
                Verdict::Correct
            } else {
                Verdict::Corrupted
            })
        })
        .collect()
}

/// The same run in the token model.
pub fn token_verdicts(scheme: ExactScheme, pattern: &NoisePattern, fill_headers: &[usize]) -> Result<Vec<Verdict>> {
    let n = pattern.n();
    let mut mint = TokenMint::new();
    let toks = mint.mint_source_tokens(n);
    let ids: Vec<TokenId> = toks.iter().map(QuantumToken::id).collect();
    let seq = match scheme {
        ExactScheme::Trivial => trivial_encode(toks),
        ExactScheme::Sync(s) => sync_encode(toks, s)?,
    };
    let fill = fill_headers
        .iter()
        .map(|h| Entry::Item(Register::quantum(mint.adversarial("intruder"), Some(Header(h.to_string())))))
        .collect();
    let received: TransmittedSeq = apply_channel(seq, pattern, fill)?;
    let out = match scheme {
        ExactScheme::Trivial => trivial_decode(received, n),
        ExactScheme::Sync(s) => sync_decode(received, s),
    };
    classify(&ids, &out)
}

/// Disagreement between the two models on one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionMismatch {
    pub pattern: String,
    pub fill_headers: Vec<usize>,
    pub token: Vec<Verdict>,
    pub exact: Vec<Verdict>,
}

/// Compares both models on every pattern with `p + q ≤ budget` and every
/// intruder header in `0..=max_header`.
pub fn compare_models(
    scheme: ExactScheme,
    n: usize,
    budget: usize,
    max_header: usize,
) -> Result<(usize, Vec<AbstractionMismatch>)> {
    let input = bell_pairs_input(n)?;
    let mut cases = 0;
    let mut bad = Vec::new();
    for pattern in enumerate_patterns(n, budget)? {
        let mut fills: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..pattern.q() {
            fills = fills
                .into_iter()
                .flat_map(|f| {
                    (0..=max_header).map(move |h| {
                        let mut g = f.clone();
                        g.push(h);
                        g
                    })
                })
                .collect();
        }
        for fill in fills {
            cases += 1;
            let exact = exact_verdicts(&simulate_protocol_exact(&input, scheme, &pattern, &fill)?, n)?;
            let token = token_verdicts(scheme, &pattern, &fill)?;
            if exact != token {
                bad.push(AbstractionMismatch {
                    pattern: pattern.to_json(),
                    fill_headers: fill,
                    token,
                    exact,
                });
            }
        }
    }
    Ok((cases, bad))
}

/// Result of the exact check of the chunk re-encoding on a toy instance.
#[derive(Debug, Clone)]
pub struct ToyE0Report {
    /// `max |V†V − I|`.
    pub isometry_error: f64,
    /// Pass probability and recovered fidelity of an untouched block.
    pub intact: (f64, f64),
    /// Per replaced slot: pass probability and fidelity after passing.
    pub replaced: Vec<(f64, f64)>,
}

/// Builds the re-encoding isometry for `(r, s)`, sends half of `r` Bell pairs
/// through it, and checks the support measurement on the intact block and on
/// blocks with one slot replaced by `|0⟩`.
pub fn toy_e0_check(r: usize, s: usize) -> Result<ToyE0Report> {
    let code = E0Code::new(r, s)?;
    let rp = code.encoded_len();
    if r > 3 || rp > 8 {
        return Err(Error::TooLarge(format!("toy check needs r ≤ 3 and r′ ≤ 8 (r′ = {rp})")));
    }
    let (din, dout) = (1usize << r, 1usize << rp);
    let mut v = DMatrix::<C64>::zeros(dout, din);
    for x in 0..din {
        let bits: Vec<u8> = (0..r).rev().map(|b| ((x >> b) & 1) as u8).collect();
        let y = code.encode(&bits)?.iter().fold(0usize, |acc, &b| acc * 2 + b as usize);
        v[(y, x)] = C64::new(1.0, 0.0);
    }
    let isometry_error = max_abs(&(v.adjoint() * &v - DMatrix::identity(din, din)));

    // |Φ⟩ on (data, reference), maximally entangled
    let amp = C64::new(1.0 / (din as f64).sqrt(), 0.0);
    let mut phi = DVector::<C64>::zeros(din * din);
    for x in 0..din {
        phi[x * din + x] = amp;
    }
    let v_ext = v.kronecker(&DMatrix::identity(din, din));
    let encoded = &v_ext * &phi;
    let rho = DensityMatrix::from_pure(vec![dout, din], &encoded)?;
    let proj = (&v * v.adjoint()).kronecker(&DMatrix::identity(din, din));
    let decode = v.adjoint().kronecker(&DMatrix::identity(din, din));

    let measure = |rho: &DensityMatrix| -> Result<(f64, f64)> {
        let passed = &proj * rho.matrix() * &proj;
        let p = passed.trace().re;
        if p < 1e-12 {
            return Ok((0.0, 0.0));
        }
        let back = &decode * passed * decode.adjoint() / C64::new(p, 0.0);
        let back = DensityMatrix::new(vec![din, din], back)?;
        Ok((p, fidelity(&back, &phi)?))
    };
    let intact = measure(&rho)?;

    let mut replaced = Vec::with_capacity(rp);
    let mut dims = vec![2; rp];
    dims.push(din);
    let per_qubit = DensityMatrix::new(dims.clone(), rho.matrix().clone())?;
    for slot in 0..rp {
        let keep: Vec<usize> = (0..=rp).filter(|&k| k != slot).collect();
        let rest = per_qubit.partial_trace(&keep)?;
        // re-insert |0⟩ at `slot`
        let mut m = DMatrix::<C64>::zeros(dout * din, dout * din);
        let rd = rest.dims().to_vec();
        let total_rest: usize = rd.iter().product();
        let lift = |x: usize| {
            let mut digits = vec![0; rp + 1];
            let subs: Vec<usize> = keep.clone();
            scatter(x, &subs, &rd, &mut digits);
            digits[slot] = 0;
            gather(&digits, &dims)
        };
        for a in 0..total_rest {
            for b in 0..total_rest {
                m[(lift(a), lift(b))] = rest.matrix()[(a, b)];
            }
        }
        let damaged = DensityMatrix::new(vec![dout, din], m)?;
        replaced.push(measure(&damaged)?);
    }
    Ok(ToyE0Report {
        isometry_error,
        intact,
        replaced,
    })
}
