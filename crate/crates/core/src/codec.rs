//! One-block codes between loop shifts: encoding, magic-word decoding,
//! periodic-point injectivity checks and maximal-entropy sampling.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::loopgraph::{Edge, LoopRef};
use crate::series::{big_to_f64, Series};
use crate::spectral::{self, LambdaEnclosure};

/// Mass deficit tolerated by [`sample_max_entropy`].
pub const DEFAULT_MASS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("symbol {0} is not in the domain alphabet")]
    UnknownSymbol(String),
    #[error("fewer than two magic-word occurrences")]
    NoMagicWord,
    #[error("segment at offset {0} has several loop decompositions")]
    AmbiguousParse(usize),
    #[error("segment at offset {0} has no loop decomposition")]
    NotInImage(usize),
    #[error("loop-length distribution has mass {mass}, not 1")]
    NotRecurrent { mass: String },
}

/// Injective one-block code with magic words (offset 0).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCode {
    pub symbol_map: BTreeMap<Edge, Edge>,
    /// Magic words in the image alphabet; the first is the primary one.
    pub magic: Vec<Vec<Edge>>,
    /// Image of each domain loop as a sequence of image loops.
    pub loop_table: BTreeMap<LoopRef, Vec<LoopRef>>,
    /// Domain loops are complete up to this length.
    pub budget: usize,
    index: HashMap<Edge, Vec<(Vec<Edge>, LoopRef)>>,
}

impl BlockCode {
    pub fn new(
        symbol_map: BTreeMap<Edge, Edge>,
        magic: Vec<Vec<Edge>>,
        loop_table: BTreeMap<LoopRef, Vec<LoopRef>>,
        budget: usize,
    ) -> Self {
        let mut index: HashMap<Edge, Vec<(Vec<Edge>, LoopRef)>> = HashMap::new();
        for (d, img) in &loop_table {
            let label: Vec<Edge> = img.iter().flat_map(|l| l.edges()).collect();
            if let Some(first) = label.first().cloned() {
                index.entry(first).or_default().push((label, d.clone()));
            }
        }
        BlockCode {
            symbol_map,
            magic,
            loop_table,
            budget,
            index,
        }
    }

    /// Builds a code from a domain-loop table; the symbol map sends edge `i`
    /// of a domain loop to symbol `i` of its label.
    pub fn from_loop_table(loop_table: BTreeMap<LoopRef, Vec<LoopRef>>, magic: Vec<Vec<Edge>>, budget: usize) -> Self {
        let mut symbol_map = BTreeMap::new();
        for (d, img) in &loop_table {
            for (e, s) in d.edges().zip(img.iter().flat_map(|l| l.edges())) {
                symbol_map.insert(e, s);
            }
        }
        BlockCode::new(symbol_map, magic, loop_table, budget)
    }

    /// Identity on the loops of `f` up to `budget`; every loop is magic.
    pub fn identity(f: &Series, budget: usize) -> Self {
        let mut table = BTreeMap::new();
        for n in 1..=budget.min(f.degree()) {
            let c = f.coeff_ref(n).to_u64().expect("budgeted identity");
            for r in 0..c {
                let lp = LoopRef::new(n, r);
                table.insert(lp.clone(), vec![lp]);
            }
        }
        let magic = table
            .keys()
            .next()
            .map(|l: &LoopRef| vec![l.edges().next().unwrap()])
            .into_iter()
            .collect();
        BlockCode::from_loop_table(table, magic, budget)
    }

    pub fn label(&self, d: &LoopRef) -> Option<Vec<Edge>> {
        self.loop_table
            .get(d)
            .map(|img| img.iter().flat_map(|l| l.edges()).collect())
    }

    pub fn encode(&self, word: &[Edge]) -> Result<Vec<Edge>, CodecError> {
        word.iter()
            .map(|e| {
                self.symbol_map
                    .get(e)
                    .cloned()
                    .ok_or_else(|| CodecError::UnknownSymbol(e.to_string()))
            })
            .collect()
    }

    pub fn encode_loops(&self, loops: &[LoopRef]) -> Result<Vec<Edge>, CodecError> {
        let word: Vec<Edge> = loops.iter().flat_map(|l| l.edges()).collect();
        self.encode(&word)
    }

    /// Start positions of magic-word occurrences in `word`, with lengths.
    pub fn magic_occurrences(&self, word: &[Edge]) -> Vec<(usize, usize)> {
        magic_occurrences(&self.magic, word)
    }

    /// Domain segment between the first and last magic-word occurrence.
    pub fn decode_window(&self, word: &[Edge]) -> Result<(usize, Vec<Edge>), CodecError> {
        let occ = self.magic_occurrences(word);
        if occ.len() < 2 {
            return Err(CodecError::NoMagicWord);
        }
        let first = occ[0].0;
        let last = occ.last().unwrap().0;
        let seg = &word[first..last];
        let loops = self.parse_segment(seg).map_err(|e| match e {
            CodecError::AmbiguousParse(i) => CodecError::AmbiguousParse(first + i),
            CodecError::NotInImage(i) => CodecError::NotInImage(first + i),
            other => other,
        })?;
        Ok((first, loops.iter().flat_map(|l| l.edges()).collect()))
    }

    /// Unique decomposition of `seg` into domain-loop labels.
    pub fn parse_segment(&self, seg: &[Edge]) -> Result<Vec<LoopRef>, CodecError> {
        let n = seg.len();
        // ways[i]: number of decompositions of seg[i..], capped at 2
        let mut ways = vec![0u8; n + 1];
        ways[n] = 1;
        for i in (0..n).rev() {
            let mut w = 0u8;
            if let Some(cands) = self.index.get(&seg[i]) {
                for (label, _) in cands {
                    let end = i + label.len();
                    if end <= n && ways[end] > 0 && seg[i..end] == label[..] {
                        w = (w + ways[end]).min(2);
                    }
                }
            }
            ways[i] = w;
        }
        if ways[0] == 0 {
            let bad = (0..n).find(|&i| ways[i] == 0).unwrap_or(0);
            return Err(CodecError::NotInImage(bad));
        }
        if ways[0] > 1 {
            return Err(CodecError::AmbiguousParse(0));
        }
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let (label, d) = self.index[&seg[i]]
                .iter()
                .find(|(label, _)| {
                    let end = i + label.len();
                    end <= n && ways[end] > 0 && seg[i..end] == label[..]
                })
                .expect("a decomposition exists");
            out.push(d.clone());
            i += label.len();
        }
        Ok(out)
    }

    /// Exhaustive decode(encode(x)) = x over periodic domain points.
    pub fn verify_injectivity_periodic(&self, max_period: usize) -> InjectivityReport {
        let mut report = InjectivityReport {
            max_period,
            ..Default::default()
        };
        let loops: Vec<&LoopRef> = self.loop_table.keys().filter(|l| l.len <= max_period).collect();
        let max_magic = self.magic.iter().map(Vec::len).max().unwrap_or(0);
        let mut seq: Vec<&LoopRef> = Vec::new();
        self.walk_periodic(&loops, &mut seq, 0, max_magic, &mut report);
        report
    }

    fn walk_periodic<'a>(
        &self,
        loops: &[&'a LoopRef],
        seq: &mut Vec<&'a LoopRef>,
        len: usize,
        max_magic: usize,
        report: &mut InjectivityReport,
    ) {
        if len > 0 {
            self.check_periodic(seq, len, max_magic, report);
        }
        for &l in loops {
            if len + l.len > report.max_period {
                continue;
            }
            seq.push(l);
            self.walk_periodic(loops, seq, len + l.len, max_magic, report);
            seq.pop();
        }
    }

    fn check_periodic(&self, seq: &[&LoopRef], p: usize, max_magic: usize, report: &mut InjectivityReport) {
        report.sequences += 1;
        let points = seq[0].len;
        let domain: Vec<Edge> = seq.iter().flat_map(|l| l.edges()).collect();
        let image = match self.encode(&domain) {
            Ok(w) => w,
            Err(e) => {
                report.points_checked += points;
                report.failures.push(format!("{}: {e}", show_seq(seq)));
                return;
            }
        };
        let reps = (p + max_magic) / p + 2;
        let unrolled: Vec<Edge> = image.iter().cycle().take(p * reps).cloned().collect();
        let first = magic_occurrences(&self.magic, &unrolled).into_iter().find(|&(s, _)| s < p);
        let q = match first {
            Some((q, _)) => q,
            None => {
                report.points_without_magic += points;
                return;
            }
        };
        report.points_checked += points;
        let window = &unrolled[q..q + p + max_magic];
        match self.decode_window(window) {
            Ok((off, dec)) => {
                let expect: Vec<Edge> = domain.iter().cycle().skip(q + off).take(dec.len()).cloned().collect();
                if off != 0 || dec.len() < p || dec != expect {
                    report.failures.push(format!("{}: decoded segment differs", show_seq(seq)));
                } else {
                    report.points_passed += points;
                }
            }
            Err(e) => report.failures.push(format!("{}: {e}", show_seq(seq))),
        }
    }

    /// `self` then `outer`; the caller supplies magic words for the result.
    pub fn compose(&self, outer: &BlockCode, magic: Vec<Vec<Edge>>) -> BlockCode {
        let symbol_map = self
            .symbol_map
            .iter()
            .filter_map(|(d, m)| outer.symbol_map.get(m).map(|i| (d.clone(), i.clone())))
            .collect();
        let loop_table = self
            .loop_table
            .iter()
            .filter_map(|(d, mids)| {
                let mut img = Vec::new();
                for m in mids {
                    img.extend(outer.loop_table.get(m)?.iter().cloned());
                }
                Some((d.clone(), img))
            })
            .collect();
        BlockCode::new(symbol_map, magic, loop_table, self.budget.min(outer.budget))
    }
}

fn show_seq(seq: &[&LoopRef]) -> String {
    seq.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn magic_occurrences(magic: &[Vec<Edge>], word: &[Edge]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for s in 0..word.len() {
        for w in magic {
            if !w.is_empty() && s + w.len() <= word.len() && word[s..s + w.len()] == w[..] {
                out.push((s, w.len()));
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub max_period: usize,
    /// Loop sequences enumerated (one per period class at a loop boundary).
    pub sequences: usize,
    /// Periodic points whose image contains a magic word.
    pub points_checked: usize,
    pub points_passed: usize,
    pub points_without_magic: usize,
    pub failures: Vec<String>,
}

impl InjectivityReport {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty() && self.points_passed == self.points_checked
    }
}

/// Loop-length law `P(n) ∝ f_n xⁿ` at the sampling point of `lambda`.
#[derive(Debug, Clone)]
pub struct LoopLaw {
    lengths: Vec<usize>,
    cumulative: Vec<f64>,
    counts: Vec<BigUint>,
    pub mass: f64,
}

impl LoopLaw {
    /// The mass `Σ f_n λ⁻ⁿ` includes the modelled tail beyond the
    /// truncation; sampling is restricted to lengths within it.
    pub fn new(f: &Series, lambda: &LambdaEnclosure, mass_tol: f64) -> Result<Self, CodecError> {
        let ev = spectral::classify(f, lambda).evidence;
        let mass = ev.partial_sum + ev.tail_estimate;
        if !(mass >= 1.0 - mass_tol && mass <= 1.0 + mass_tol) {
            return Err(CodecError::NotRecurrent {
                mass: format!("{mass:.6}"),
            });
        }
        let x = lambda.x_hi.as_ref().map(|x| x.to_f64().unwrap()).unwrap_or(1.0 / lambda.estimate);
        Ok(Self::at(f, x, false, mass))
    }

    /// `P(n) ∝ f_n xⁿ`, or `∝ n f_n xⁿ` when `size_biased`.
    fn at(f: &Series, x: f64, size_biased: bool, mass: f64) -> Self {
        let mut lengths = Vec::new();
        let mut cumulative = Vec::new();
        let mut counts = Vec::new();
        let mut acc = 0.0;
        for n in f.support() {
            let mut w = big_to_f64(f.coeff_ref(n)) * x.powi(n as i32);
            if size_biased {
                w *= n as f64;
            }
            acc += w;
            lengths.push(n);
            cumulative.push(acc);
            counts.push(f.coeff(n));
        }
        for c in cumulative.iter_mut() {
            *c /= acc;
        }
        LoopLaw {
            lengths,
            cumulative,
            counts,
            mass,
        }
    }

    pub fn size_biased(&self) -> Self {
        let mut weights = Vec::new();
        let mut prev = 0.0;
        for (i, c) in self.cumulative.iter().enumerate() {
            weights.push((c - prev) * self.lengths[i] as f64);
            prev = *c;
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        LoopLaw {
            lengths: self.lengths.clone(),
            cumulative,
            counts: self.counts.clone(),
            mass: self.mass,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> LoopRef {
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c < u).min(self.lengths.len() - 1);
        let rank = rng.gen_biguint_below(&self.counts[i]);
        LoopRef {
            len: self.lengths[i],
            rank,
        }
    }

    /// Probability of length `n`.
    pub fn prob(&self, n: usize) -> f64 {
        match self.lengths.iter().position(|&m| m == n) {
            Some(i) => self.cumulative[i] - if i == 0 { 0.0 } else { self.cumulative[i - 1] },
            None => 0.0,
        }
    }
}

/// Seeded loop sequence of total length at least `steps`.
pub fn sample_max_entropy(
    f: &Series,
    lambda: &LambdaEnclosure,
    steps: usize,
    seed: u64,
) -> Result<Vec<LoopRef>, CodecError> {
    let law = LoopLaw::new(f, lambda, DEFAULT_MASS_TOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut total = 0;
    while total < steps {
        let l = law.sample(&mut rng);
        total += l.len;
        out.push(l);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    /// `T(n)/T(1)` for `n = 1..=n_max`, exact.
    #[serde(skip)]
    pub tails: Vec<BigRational>,
    pub tails_f64: Vec<f64>,
    /// `T(1) = Σ f_m x^m`.
    pub mass: f64,
    /// Geometric-mean decay ratio over the last quarter of `1..=n_max`.
    pub ratio: f64,
    pub exponential: bool,
}

/// Separation between exponential and polynomial return-time tails.
pub const TAIL_MARGIN: f64 = 0.1;

/// Return-time tails `T(n) = Σ_{m≥n} f_m λ⁻ᵐ` at the estimate's exact `1/λ`.
pub fn return_time_tail(f: &Series, lambda: &LambdaEnclosure, n_max: usize) -> TailReport {
    let n_max = n_max.min(f.degree()).max(1);
    let big_n = f.degree();
    // with x = p/q, S_n = Σ_{m≥n} f_m p^m q^{N−m} is q^N T(n), an integer
    let p = lambda.x_est.numer().to_biguint().expect("x > 0");
    let q = lambda.x_est.denom().to_biguint().expect("x > 0");
    let mut qpow = Vec::with_capacity(big_n + 1);
    qpow.push(BigUint::one());
    for k in 1..=big_n {
        qpow.push(&qpow[k - 1] * &q);
    }
    let mut suffix = vec![BigUint::zero(); big_n + 2];
    let mut ppow = vec![BigUint::one(); big_n + 1];
    for m in 1..=big_n {
        ppow[m] = &ppow[m - 1] * &p;
    }
    for n in (1..=big_n).rev() {
        let term = if f.coeff_ref(n).is_zero() {
            BigUint::zero()
        } else {
            f.coeff_ref(n) * &ppow[n] * &qpow[big_n - n]
        };
        suffix[n] = &suffix[n + 1] + term;
    }
    let to_rat = |x: &BigUint| BigRational::from_integer(BigInt::from(x.clone()));
    let mass_r = to_rat(&suffix[1]) / to_rat(&qpow[big_n]);
    let suffix: Vec<BigRational> = suffix.iter().map(to_rat).collect();
    let tails: Vec<BigRational> = (1..=n_max)
        .map(|n| if suffix[1].is_zero() { BigRational::zero() } else { &suffix[n] / &suffix[1] })
        .collect();
    let w = (n_max / 4).max(1);
    let ratio = if n_max <= w {
        0.0
    } else {
        let a = &tails[n_max - 1 - w];
        let b = &tails[n_max - 1];
        if a.is_zero() || b.is_zero() {
            0.0
        } else {
            (b / a).to_f64().unwrap().powf(1.0 / w as f64)
        }
    };
    TailReport {
        tails_f64: tails.iter().map(|t| t.to_f64().unwrap_or(0.0)).collect(),
        tails,
        mass: mass_r.to_f64().unwrap_or(f64::NAN),
        ratio,
        exponential: ratio < 1.0 - TAIL_MARGIN,
    }
}

/// A chain of codes from a common loop shift into a target, seen as a map
/// from common loops to image words.
pub trait ChainCoder {
    /// Loop counts of the common (domain) shift.
    fn common(&self) -> &Series;
    /// Image edges of a common loop.
    fn image_of(&self, lp: &LoopRef) -> Vec<Edge>;
    fn magic_words(&self) -> &[Vec<Edge>];
    /// Every stage is a bijection on loops.
    fn is_identity(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodingTimeStats {
    pub samples: usize,
    pub seed: u64,
    /// `n(x)` → count.
    pub histogram: BTreeMap<usize, usize>,
    /// Samples where no occurrence was found within the loop cap.
    pub censored: usize,
    pub mean: f64,
    /// Geometric-mean decay of the empirical tail `P(n(x) ≥ k)`.
    pub tail_ratio: Option<f64>,
    /// Range of `k` used for the ratio.
    pub fit_range: Option<(usize, usize)>,
}

/// Loops drawn on each side before a sample is censored.
const MAX_LOOPS_PER_SIDE: usize = 20_000;

/// Empirical coding times `n(x)` under the maximal-entropy measure of the
/// common shift: the radius around 0 reaching a magic-word occurrence
/// starting at or before 0 and the whole next one after 0.
pub fn coding_time_stats(
    chain: &impl ChainCoder,
    lambda: &LambdaEnclosure,
    samples: usize,
    seed: u64,
) -> Result<CodingTimeStats, CodecError> {
    let mut histogram = BTreeMap::new();
    if chain.is_identity() {
        histogram.insert(0, samples);
        return Ok(CodingTimeStats {
            samples,
            seed,
            histogram,
            censored: 0,
            mean: 0.0,
            tail_ratio: Some(0.0),
            fit_range: None,
        });
    }
    let law = LoopLaw::new(chain.common(), lambda, DEFAULT_MASS_TOL)?;
    let biased = law.size_biased();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let magic = chain.magic_words();
    let mut censored = 0;
    let mut sum = 0usize;
    for _ in 0..samples {
        let l0 = biased.sample(&mut rng);
        let offset = rng.gen_range(0..l0.len);
        let mut buf: Vec<Edge> = chain.image_of(&l0);
        let mut zero = offset;
        let mut added = 0;
        let result = loop {
            if let Some(n) = coding_radius(magic, &buf, zero) {
                break Some(n);
            }
            if added >= MAX_LOOPS_PER_SIDE {
                break None;
            }
            let left = chain.image_of(&law.sample(&mut rng));
            zero += left.len();
            let mut nb = left;
            nb.extend(buf);
            buf = nb;
            buf.extend(chain.image_of(&law.sample(&mut rng)));
            added += 1;
        };
        match result {
            Some(n) => {
                *histogram.entry(n).or_insert(0) += 1;
                sum += n;
            }
            None => censored += 1,
        }
    }
    let done = samples - censored;
    let (tail_ratio, fit_range) = tail_fit(&histogram, samples);
    Ok(CodingTimeStats {
        samples,
        seed,
        histogram,
        censored,
        mean: if done > 0 { sum as f64 / done as f64 } else { f64::NAN },
        tail_ratio,
        fit_range,
    })
}

/// `max(−s_left, s_right + |W| − 1)` relative to `zero`, once both exist.
fn coding_radius(magic: &[Vec<Edge>], buf: &[Edge], zero: usize) -> Option<usize> {
    let occ = magic_occurrences(magic, buf);
    let left = occ.iter().filter(|&&(s, _)| s <= zero).map(|&(s, _)| s).max()?;
    let &(right, len) = occ.iter().find(|&&(s, _)| s > zero)?;
    Some((zero - left).max(right + len - 1 - zero))
}

/// Decay ratio of `P(n ≥ k)` between its median and the last `k` with at
/// least 50 samples in the tail.
fn tail_fit(hist: &BTreeMap<usize, usize>, samples: usize) -> (Option<f64>, Option<(usize, usize)>) {
    let max_n = match hist.keys().next_back() {
        Some(&m) => m,
        None => return (None, None),
    };
    let mut tail = vec![0usize; max_n + 2];
    for k in (0..=max_n).rev() {
        tail[k] = tail[k + 1] + hist.get(&k).copied().unwrap_or(0);
    }
    let total = samples as f64;
    let k_lo = (0..=max_n).find(|&k| (tail[k] as f64) <= 0.5 * total);
    let k_hi = (0..=max_n).rev().find(|&k| tail[k] >= 50);
    match (k_lo, k_hi) {
        (Some(a), Some(b)) if b > a => {
            let r = (tail[b] as f64 / tail[a] as f64).powf(1.0 / (b - a) as f64);
            (Some(r), Some((a, b)))
        }
        _ => (None, None),
    }
}
