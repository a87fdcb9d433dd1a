//! Loop-shift transformations: single splits, short-loop removal, gap
//! preparation, the loop-deletion run and the two-sided almost-isomorphism
//! pipeline. Every construction is kept structural as a [`CodeChain`] and
//! materialized into explicit [`BlockCode`]s only up to a small budget.

pub mod chain;
pub mod magic;
pub mod split;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::codec::BlockCode;
use crate::loopgraph::{LabeledLoopGraph, Loop, LoopRef};
use crate::series::{IntPoly, Series, SeriesError};
use crate::spectral::{self, EntropyConfig, LambdaEnclosure, SpectralError, Spr};
use crate::zeta::{self, OrbitData};

pub use chain::{CodeChain, MagicWord};
pub use magic::{find_magic_words, verify_magic, MagicSearch};
pub use split::{lowest_loops, SplitStage, StageKind};

/// Upper bound on the number of stages in one chain.
pub const MAX_STAGES: usize = 4096;
/// Upper bound on `|K|` for a single split.
pub const MAX_SPLIT_LOOPS: usize = 100_000;
/// Largest denominator used when choosing `β`.
pub const BETA_DENOMINATOR: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    F,
    G,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::F => write!(f, "F"),
            Side::G => write!(f, "G"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("entropies differ: λ_F ∈ [{f_lo}, {f_hi}], λ_G ∈ [{g_lo}, {g_hi}]")]
    EntropyMismatch { f_lo: f64, f_hi: f64, g_lo: f64, g_hi: f64 },
    #[error("periods differ: {f} vs {g}")]
    PeriodMismatch { f: usize, g: usize },
    #[error("side {0} is not SPR")]
    NotSpr(Side),
    #[error("no rational β with γ = {gamma} < β < λ = {lambda} and β ≥ 1")]
    NoValidBeta { gamma: f64, lambda: f64 },
    #[error("common series differ at z^{0}")]
    CommonSeriesMismatch(usize),
    #[error("no N satisfies the orbit-count condition within degree {0}")]
    NoValidN(usize),
    #[error("negative coefficient at z^{0}")]
    NegativeCoefficient(usize),
    #[error("positivity fails at deletion {0}")]
    PositivityViolated(usize),
    #[error("no magic word: {0}")]
    MagicWordUnavailable(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("deletions exhaust every loop")]
    Degenerate,
    #[error("f ≠ h + k at z^{0}")]
    SplitMismatch(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

impl From<SeriesError> for TransformError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::NegativeCoefficient(n) => TransformError::NegativeCoefficient(n),
            SeriesError::ZeroDegree => TransformError::Degenerate,
        }
    }
}

/// `f = h + k` as a split with `K` the lowest-rank loops counted by `k`.
/// Returns `hk*` and the stage code materialized up to `budget`, whose magic
/// word is the smallest `H` loop.
pub fn lemmazero_split(f: &Series, h: &Series, k: &Series, budget: usize) -> Result<(Series, BlockCode), TransformError> {
    let d = f.degree().min(h.degree()).min(k.degree());
    for n in 1..=d {
        if f.coeff(n) != h.coeff(n) + k.coeff(n) {
            return Err(TransformError::SplitMismatch(n));
        }
    }
    let f = f.truncate(d);
    let kloops = split_loops(&k.truncate(d))?;
    let stage = SplitStage::new(StageKind::Split, &f, kloops);
    let domain = stage.domain.clone();
    let chain = CodeChain::new(f, vec![stage], 1);
    let code = chain.stage_code(0, budget.min(d))?;
    Ok((domain, code))
}

fn split_loops(k: &Series) -> Result<Vec<LoopRef>, TransformError> {
    let total: BigUint = k.coeffs().iter().sum();
    if total > BigUint::from(MAX_SPLIT_LOOPS) {
        return Err(TransformError::BudgetExceeded(format!("split with {total} K loops")));
    }
    Ok(lowest_loops(k))
}

/// Removes loops shorter than `n` one at a time, always a rank-0 loop of the
/// shortest length. The result is truncated to `budget`.
pub fn delete_short_loops(f: &Series, n: usize, budget: usize) -> Result<(Series, CodeChain), TransformError> {
    let f = f.truncate(budget.min(f.degree()).max(1));
    let mut chain = CodeChain::identity(f, 1);
    loop {
        let cur = chain.common();
        let m = match cur.order() {
            None => return Err(TransformError::Degenerate),
            Some(m) if m >= n => break,
            Some(m) => m,
        };
        if chain.levels() >= MAX_STAGES {
            return Err(TransformError::BudgetExceeded(format!("more than {MAX_STAGES} short-loop stages")));
        }
        let stage = SplitStage::new(StageKind::ShortLoop, cur, vec![LoopRef::new(m, 0u32)]);
        if stage.domain.is_zero() {
            return Err(TransformError::Degenerate);
        }
        chain.push(stage);
    }
    Ok((chain.common().clone(), chain))
}

/// `⌈βⁿ⌉` for `n = 0..=d`.
pub fn ceil_powers(beta: &BigRational, d: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(d + 1);
    let mut p = BigRational::one();
    for _ in 0..=d {
        out.push(p.ceil().to_integer().to_biguint().expect("β ≥ 0"));
        p = &p * beta;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapChecks {
    /// `(1 − F̄)·∏_{n<N}(1 − zⁿ)^{O_n(F)} = 1 − F`, both sides.
    pub short_loop_identity: bool,
    /// `O_n(f) = O_n(g) = 0` for `n < N`.
    pub no_short_orbits: bool,
    /// `O_n(f) − O_n(g) = O_n(F) − O_n(G)` for `n ≥ N`.
    pub discrepancy_preserved: bool,
    /// `min(f_n, g_n) ≥ βⁿ` for `n ≥ N`.
    pub gap: bool,
}

impl GapChecks {
    pub fn all(&self) -> bool {
        self.short_loop_identity && self.no_short_orbits && self.discrepancy_preserved && self.gap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapPrep {
    pub n: usize,
    pub beta: BigRational,
    /// `Σ_{N≤n<2N} ⌈βⁿ⌉ zⁿ`
    pub b: Series,
    pub f_bar: Series,
    pub g_bar: Series,
    pub f: Series,
    pub g: Series,
    /// Chains from `f` into `F` and from `g` into `G`.
    pub left: CodeChain,
    pub right: CodeChain,
    pub checks: GapChecks,
}

pub fn gapprep(f: &Series, g: &Series, beta: &BigRational, budget: usize) -> Result<GapPrep, TransformError> {
    gapprep_from(f, g, beta, budget, 1)
}

/// As [`gapprep`], with `N ≥ n_min`.
pub fn gapprep_from(
    big_f: &Series,
    big_g: &Series,
    beta: &BigRational,
    budget: usize,
    n_min: usize,
) -> Result<GapPrep, TransformError> {
    let d = big_f.degree().min(big_g.degree()).min(budget);
    let big_f = big_f.truncate(d);
    let big_g = big_g.truncate(d);
    let of = OrbitData::of(&big_f);
    let og = OrbitData::of(&big_g);
    let cp = ceil_powers(beta, d);
    let last_fail = (1..=d)
        .filter(|&n| of.orbit(n).min(og.orbit(n)) < &(&cp[n] * 2u32))
        .max()
        .unwrap_or(0);
    let n = (last_fail + 1).max(n_min).max(1);
    if 2 * n - 1 > d {
        return Err(TransformError::NoValidN(d));
    }
    let (f_bar, short_f) = delete_short_loops(&big_f, n, d)?;
    let (g_bar, short_g) = delete_short_loops(&big_g, n, d)?;
    let b = Series::from_fn(d, |m| if m >= n && m < 2 * n { cp[m].clone() } else { BigUint::zero() });
    f_bar.sub_checked(&b)?;
    g_bar.sub_checked(&b)?;
    let kb = split_loops(&b)?;
    let mut left = short_f;
    left.push(SplitStage::new(StageKind::Gap, &f_bar, kb.clone()));
    let mut right = short_g;
    right.push(SplitStage::new(StageKind::Gap, &g_bar, kb));
    let f = left.common().clone();
    let g = right.common().clone();

    let short_identity = |big: &Series, bar: &Series, o: &OrbitData| {
        let mut lhs = IntPoly::one_minus(bar);
        for m in 1..n {
            lhs.mul_one_minus_power(m, o.orbit(m));
        }
        lhs == IntPoly::one_minus(big)
    };
    let ofs = OrbitData::of(&f);
    let ogs = OrbitData::of(&g);
    let checks = GapChecks {
        short_loop_identity: short_identity(&big_f, &f_bar, &of) && short_identity(&big_g, &g_bar, &og),
        no_short_orbits: (1..n).all(|m| ofs.orbit(m).is_zero() && ogs.orbit(m).is_zero()),
        discrepancy_preserved: (n..=d).all(|m| {
            signed(ofs.orbit(m)) - signed(ogs.orbit(m)) == signed(of.orbit(m)) - signed(og.orbit(m))
        }),
        gap: (n..=d).all(|m| f.coeff_ref(m).min(g.coeff_ref(m)) >= &cp[m]),
    };
    Ok(GapPrep {
        n,
        beta: beta.clone(),
        b,
        f_bar,
        g_bar,
        f,
        g,
        left,
        right,
        checks,
    })
}

fn signed(x: &BigUint) -> BigInt {
    BigInt::from(x.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopsLemmaConfig {
    /// Truncation degree.
    pub budget: usize,
    /// Delete only original loops other than `W` and certify `W`.
    pub require_magic: bool,
    /// Deletions drawn from a designated copy of `σ_R` inside `σ_f`.
    pub restrict_to_r: bool,
    /// Length budget of the explicit labeled graph and code; 0 skips them.
    pub explicit_budget: usize,
}

impl Default for LoopsLemmaConfig {
    fn default() -> Self {
        LoopsLemmaConfig {
            budget: usize::MAX,
            require_magic: true,
            restrict_to_r: false,
            explicit_budget: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoopsLemmaChecks {
    /// `(1 − f^{<∞>})·∏(1 − zⁿ)^{R_n} = 1 − f`.
    pub product_identity: bool,
    /// `O_n(f^{<∞>}) = O_n(f) − R_n`.
    pub orbit_identity: bool,
    /// Counting certificate of (***) to the truncation degree.
    pub condition_star: Option<bool>,
    /// Explicit graph census equals `f^{<∞>}` up to its budget.
    pub graph_census: Option<bool>,
    pub graph_labels_distinct: Option<bool>,
    pub graph_condition_star: Option<bool>,
    /// Every deletion lies in the designated `σ_R` loops.
    pub deletions_in_r: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct LoopsLemmaRun {
    pub f_inf: Series,
    /// Deleted lengths `r_1 ≤ r_2 ≤ …`.
    pub r: Vec<usize>,
    pub chain: CodeChain,
    /// Magic loop of `σ_f`.
    pub w: Option<LoopRef>,
    /// Deleted loops, as loops of `σ_f` when they are original ones.
    pub deleted: Vec<LoopRef>,
    pub graph: Option<LabeledLoopGraph>,
    pub code: Option<BlockCode>,
    pub checks: LoopsLemmaChecks,
}

/// Deletes loops of lengths `r_k` (with `R_n` of length `n`) from `σ_f`.
pub fn loops_lemma_run(f: &Series, r_counts: &[BigUint], cfg: &LoopsLemmaConfig) -> Result<LoopsLemmaRun, TransformError> {
    let d = f.degree().min(cfg.budget);
    let f = f.truncate(d);
    let first = r_counts.iter().position(|c| !c.is_zero()).map(|i| i + 1);
    if let Some(r1) = first {
        if r1 > d {
            return Err(TransformError::BudgetExceeded(format!("budget {d} below r₁ = {r1}")));
        }
    }
    let total: BigUint = r_counts.iter().take(d).sum();
    if total > BigUint::from(MAX_STAGES) {
        return Err(TransformError::BudgetExceeded(format!("{total} deletions")));
    }
    let mut r = Vec::new();
    for (i, c) in r_counts.iter().take(d).enumerate() {
        for _ in 0..c.to_usize().unwrap() {
            r.push(i + 1);
        }
    }
    let rn = |n: usize| r_counts.get(n - 1).cloned().unwrap_or_default();
    // positivity on counts alone, before any magic-word requirement
    let mut counts = f.clone();
    for (k, &len) in r.iter().enumerate() {
        if counts.coeff_ref(len).is_zero() {
            return Err(TransformError::PositivityViolated(k + 1));
        }
        counts = counts.divide_one_minus(&Series::monomial(len, 1, d))?;
    }
    let magic_ok = match first {
        None => true,
        Some(r1) => (1..=d).all(|n| rn(n) <= f.coeff(n)) && rn(r1) < f.coeff(r1),
    };
    let magic_mode = cfg.require_magic || cfg.restrict_to_r;
    if magic_mode && !magic_ok {
        return Err(TransformError::MagicWordUnavailable(
            "R exceeds f, or leaves no loop of length r₁".to_string(),
        ));
    }
    let w = if magic_mode {
        let len = first.or_else(|| f.order()).ok_or(TransformError::Degenerate)?;
        Some(LoopRef::new(len, 0u32))
    } else {
        None
    };

    let mut chain = CodeChain::identity(f.clone(), 1);
    let mut next_rank = vec![0u64; d + 1];
    if let Some(r1) = first {
        if magic_mode {
            next_rank[r1] = 1;
        }
    }
    let mut deleted = Vec::with_capacity(r.len());
    let mut deleted_words = Vec::with_capacity(r.len());
    for (k, &len) in r.iter().enumerate() {
        let cur = chain.common();
        if cur.coeff_ref(len).is_zero() {
            return Err(TransformError::PositivityViolated(k + 1));
        }
        let (target, base) = if magic_mode {
            let b = LoopRef::new(len, next_rank[len]);
            next_rank[len] += 1;
            let lifted = chain.lift(0, chain.levels(), &b).ok_or(TransformError::PositivityViolated(k + 1))?;
            (lifted, b)
        } else {
            let l = LoopRef::new(len, 0u32);
            let word = chain.expand(&l);
            let base = if word.len() == 1 { word[0].clone() } else { l.clone() };
            (l, base)
        };
        deleted_words.push(chain.expand(&target));
        deleted.push(base);
        chain.push(SplitStage::new(StageKind::LoopDeletion, cur, vec![target]));
    }
    let f_inf = chain.common().clone();

    let mut checks = LoopsLemmaChecks::default();
    let mut lhs = IntPoly::one_minus(&f_inf);
    for n in 1..=d {
        lhs.mul_one_minus_power(n, &rn(n));
    }
    checks.product_identity = lhs == IntPoly::one_minus(&f);
    let o = OrbitData::of(&f);
    let oi = OrbitData::of(&f_inf);
    checks.orbit_identity = (1..=d).all(|n| signed(oi.orbit(n)) == signed(o.orbit(n)) - signed(&rn(n)));
    if let Some(w) = &w {
        checks.condition_star = Some(chain.condition_star_residual(0, w, d).is_zero());
        if let Some(bad) = magic::verify_magic(&chain, &[MagicWord { loops: vec![w.clone()] }])?[0] {
            return Err(TransformError::MagicWordUnavailable(format!("W fails at deletion {bad}")));
        }
        chain.set_magic(vec![MagicWord { loops: vec![w.clone()] }]);
    }
    if cfg.restrict_to_r {
        // σ_R: the first R_n original loops of each length other than W.
        checks.deletions_in_r = Some(deleted.iter().all(|b| {
            let skip = u64::from(Some(b.len) == first);
            b.rank < BigUint::from(skip) + rn(b.len) && !(Some(b) == w.as_ref())
        }));
    }

    let mut graph = None;
    let mut code = None;
    let eb = cfg.explicit_budget.min(d);
    if eb > 0 {
        if let Ok(mut g) = LabeledLoopGraph::from_series(&f, eb) {
            let mut ok = true;
            for word in deleted_words.iter() {
                let len: usize = word.iter().map(|l| l.len).sum();
                if len > eb {
                    continue;
                }
                let l = Loop {
                    label: word.iter().flat_map(|x| x.edges().collect::<Vec<_>>()).collect(),
                    word: word.clone(),
                };
                match g.delete_loop_step(&l) {
                    Ok(next) => g = next,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                checks.graph_census = Some(g.census().iter().enumerate().all(|(i, c)| c == f_inf.coeff_ref(i + 1)));
                checks.graph_labels_distinct = Some(g.labels_distinct());
                checks.graph_condition_star = w.as_ref().map(|w| g.check_condition_star(&Loop::base(w.clone())));
                graph = Some(g);
            }
        }
        code = chain.materialize(eb).ok();
    }
    Ok(LoopsLemmaRun {
        f_inf,
        r,
        chain,
        w,
        deleted,
        graph,
        code,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tol: f64,
    pub spr_margin: f64,
    /// Overrides the default choice of `β`.
    pub beta: Option<BigRational>,
    /// Truncation degree; `None` uses the inputs' common degree.
    pub degree: Option<usize>,
    /// Accept `Spr::Inconclusive` verdicts.
    pub accept_inconclusive: bool,
    /// Reject non-SPR inputs; when false only `γ < λ` is required.
    pub require_spr: bool,
    /// Deletions restricted to designated `σ_R` loops.
    pub restrict_to_r: bool,
    /// Length budget for explicit graphs.
    pub explicit_budget: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tol: spectral::DEFAULT_TOL,
            spr_margin: spectral::DEFAULT_SPR_MARGIN,
            beta: None,
            degree: None,
            accept_inconclusive: false,
            require_spr: true,
            restrict_to_r: true,
            explicit_budget: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideDiagnostics {
    pub lambda: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub spr: Spr,
    /// `R_n` for `n = 1..=degree`.
    pub r: Vec<String>,
    pub short_stages: usize,
    pub deletion_stages: usize,
    pub loops_lemma: LoopsLemmaChecks,
    pub stage_certificates: bool,
    /// (***) counting certificate through the whole chain for `W`.
    pub condition_star: bool,
    pub magic_words: usize,
    pub magic_symbol_len: usize,
    pub magic_lifted: bool,
    pub magic_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub period: usize,
    /// Degree of the period-stripped series.
    pub degree: usize,
    pub gamma: f64,
    pub beta: String,
    pub n: usize,
    pub gap: GapChecks,
    pub f: SideDiagnostics,
    pub g: SideDiagnostics,
    pub common_equal: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Loop counts of the common shift.
    pub common: Series,
    /// Chains from the common shift into `σ_F` and `σ_G`.
    pub left: CodeChain,
    pub right: CodeChain,
    pub gap: GapPrep,
    pub diagnostics: Diagnostics,
}

impl PipelineResult {
    pub fn chain(&self, side: Side) -> &CodeChain {
        match side {
            Side::F => &self.left,
            Side::G => &self.right,
        }
    }
}

/// Rational in `(lo, hi)` with denominator at most [`BETA_DENOMINATOR`]
/// nearest the midpoint, clamped to `β ≥ 1`.
pub fn choose_beta(gamma: f64, lambda_lo: f64) -> Option<BigRational> {
    let mid = ((gamma + lambda_lo) / 2.0).max(1.0);
    let den = BETA_DENOMINATOR;
    let num = (mid * den as f64).round() as i64;
    let candidates = [num, num + 1, num - 1];
    candidates
        .iter()
        .map(|&n| BigRational::new(BigInt::from(n), BigInt::from(den)))
        .find(|b| {
            let x = b.to_f64().unwrap();
            x >= 1.0 && x > gamma && x < lambda_lo
        })
}

/// Smallest `N` with `|O_n(F) − O_n(G)| ≤ βⁿ − 1` for `N ≤ n ≤ d`.
pub fn discrepancy_threshold(delta: &[BigInt], beta: &BigRational) -> usize {
    let mut p = BigRational::one();
    let mut last_fail = 0;
    for (i, dn) in delta.iter().enumerate() {
        p = &p * beta;
        let lhs = BigRational::from_integer(dn.abs() + 1);
        if lhs > p {
            last_fail = i + 1;
        }
    }
    last_fail + 1
}

fn side_report(
    f: &Series,
    cfg: &PipelineConfig,
    side: Side,
) -> Result<(LambdaEnclosure, Spr), TransformError> {
    let ecfg = EntropyConfig {
        tol: cfg.tol,
        spr_margin: cfg.spr_margin,
    };
    let lam = spectral::entropy_with(f, &ecfg)?;
    let rep = spectral::classify_with(f, &lam, &ecfg);
    if cfg.require_spr {
        match rep.spr {
            Spr::Yes => {}
            Spr::Inconclusive if cfg.accept_inconclusive => {}
            _ => return Err(TransformError::NotSpr(side)),
        }
    }
    Ok((lam, rep.spr))
}

/// Builds a common loop shift with injective one-block codes carrying magic
/// words into `σ_F` and `σ_G`.
pub fn almost_iso(big_f: &Series, big_g: &Series, cfg: &PipelineConfig) -> Result<PipelineResult, TransformError> {
    let d0 = big_f.degree().min(big_g.degree()).min(cfg.degree.unwrap_or(usize::MAX));
    let big_f = big_f.truncate(d0);
    let big_g = big_g.truncate(d0);
    let pf = spectral::period(&big_f)?;
    let pg = spectral::period(&big_g)?;
    if pf != pg {
        return Err(TransformError::PeriodMismatch { f: pf, g: pg });
    }
    let p = pf;
    let a = spectral::strip_period(&big_f, p)?;
    let b = spectral::strip_period(&big_g, p)?;
    let d = a.degree();

    let (lam_a, spr_a) = side_report(&a, cfg, Side::F)?;
    let (lam_b, spr_b) = side_report(&b, cfg, Side::G)?;
    if !lam_a.overlaps(&lam_b, 2.0 * cfg.tol) {
        return Err(TransformError::EntropyMismatch {
            f_lo: lam_a.lo.powf(1.0 / p as f64),
            f_hi: lam_a.hi.powf(1.0 / p as f64),
            g_lo: lam_b.lo.powf(1.0 / p as f64),
            g_hi: lam_b.hi.powf(1.0 / p as f64),
        });
    }
    let delta = zeta::orbit_discrepancy(&a, &b);
    let gamma = zeta::discrepancy_growth(&a, &b);
    let lam_lo = lam_a.lo.min(lam_b.lo);
    let beta = match &cfg.beta {
        Some(beta) => {
            let x = beta.to_f64().unwrap_or(f64::NAN);
            if !(x >= 1.0 && x > gamma && x < lam_lo) {
                return Err(TransformError::NoValidBeta { gamma, lambda: lam_lo });
            }
            beta.clone()
        }
        None => choose_beta(gamma, lam_lo).ok_or(TransformError::NoValidBeta { gamma, lambda: lam_lo })?,
    };
    let n61 = discrepancy_threshold(&delta, &beta);
    let gp = gapprep_from(&a, &b, &beta, d, n61)?;

    let of = OrbitData::of(&gp.f);
    let og = OrbitData::of(&gp.g);
    let mut rf = Vec::with_capacity(d);
    let mut rg = Vec::with_capacity(d);
    for n in 1..=d {
        let (x, y) = (of.orbit(n), og.orbit(n));
        rf.push(if x > y { x - y } else { BigUint::zero() });
        rg.push(if y > x { y - x } else { BigUint::zero() });
    }
    let llcfg = LoopsLemmaConfig {
        budget: d,
        require_magic: true,
        restrict_to_r: cfg.restrict_to_r,
        explicit_budget: cfg.explicit_budget,
    };
    let (run_f, run_g) = std::thread::scope(|s| {
        let hf = s.spawn(|| loops_lemma_run(&gp.f, &rf, &llcfg));
        let run_g = loops_lemma_run(&gp.g, &rg, &llcfg);
        (hf.join().expect("loops-lemma thread"), run_g)
    });
    let (run_f, run_g) = (run_f?, run_g?);
    if let Some(n) = (1..=d).find(|&n| run_f.f_inf.coeff_ref(n) != run_g.f_inf.coeff_ref(n)) {
        return Err(TransformError::CommonSeriesMismatch(n * p));
    }

    let build = |gap_chain: &CodeChain, run: LoopsLemmaRun, r: &[BigUint], lam: &LambdaEnclosure, spr: Spr| {
        let ll_start = gap_chain.levels();
        let mut stages = gap_chain.stages.clone();
        stages.extend(run.chain.stages);
        let mut chain = CodeChain::new(gap_chain.target.clone(), stages, p);
        let w = run.w.clone().expect("magic mode");
        let seed = chain.lift(ll_start, chain.levels(), &w);
        let search = find_magic_words(&chain, seed.as_ref())?;
        chain.set_magic(search.words.clone());
        let certs = chain.stage_certificates(d * p);
        let diag = SideDiagnostics {
            lambda: lam.estimate.powf(1.0 / p as f64),
            lambda_lo: lam.lo.powf(1.0 / p as f64),
            lambda_hi: lam.hi.powf(1.0 / p as f64),
            spr,
            r: r.iter().map(|x| x.to_string()).collect(),
            short_stages: chain.stage_count(StageKind::ShortLoop),
            deletion_stages: chain.stage_count(StageKind::LoopDeletion),
            loops_lemma: run.checks.clone(),
            stage_certificates: certs.iter().all(|&c| c),
            condition_star: chain.condition_star_residual(ll_start, &w, d * p).is_zero(),
            magic_words: search.words.len(),
            magic_symbol_len: search.words.first().map(|m| m.symbol_len() * p).unwrap_or(0),
            magic_lifted: search.lifted,
            magic_candidates: search.candidates,
        };
        Ok::<_, TransformError>((chain, diag))
    };
    let (left, diag_f) = build(&gp.left, run_f, &rf, &lam_a, spr_a)?;
    let (right, diag_g) = build(&gp.right, run_g, &rg, &lam_b, spr_b)?;
    let common = left.common_inflated().clone();
    let diagnostics = Diagnostics {
        period: p,
        degree: d,
        gamma,
        beta: format!("{}/{}", beta.numer(), beta.denom()),
        n: gp.n,
        gap: gp.checks.clone(),
        f: diag_f,
        g: diag_g,
        common_equal: left.common() == right.common(),
    };
    Ok(PipelineResult {
        common,
        left,
        right,
        gap: gp,
        diagnostics,
    })
}
