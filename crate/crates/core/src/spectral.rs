//! Entropy, period and recurrence classification of a loop shift from its
//! truncated first-return series.
//!
//! `λ` is located by bisection on exact partial sums. The partial sum gives a
//! certified lower bound; the upper end adds an estimated tail, either by
//! extrapolating a linear recurrence that the coefficients are confirmed to
//! satisfy, or by a growth fit `f_n ≈ A ρⁿ n^c` over the last third.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::series::{big_ln, big_to_f64, Series};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_SPR_MARGIN: f64 = 0.05;
/// Fewer nonzero window coefficients than this are read as a polynomial.
const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("series vanishes up to its degree")]
    ZeroSeries,
    #[error("entropy is zero at this truncation")]
    EntropyAtOrBelowZero,
    #[error("root and radius cannot be separated: λ somewhere in [{lo}, {hi}]")]
    Inconclusive { lo: f64, hi: f64 },
    #[error("nonzero coefficient off the period grid at z^{0}")]
    PeriodMismatch(usize),
    #[error("tolerance must be positive")]
    InvalidTolerance,
}

/// Which quantity fixed `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    /// Root of `f(x) = 1`.
    Root,
    /// Coefficient growth `limsup f_n^{1/n}`.
    Radius,
    /// Supplied in closed form by the caller.
    Exact,
}

/// How the coefficients beyond the truncation are modelled.
#[derive(Debug, Clone, PartialEq)]
pub enum TailModel {
    /// The last third of the coefficients vanishes; no tail assumed.
    Finite,
    /// `f_n = Σ a_i f_{n−i}` confirmed on the data and by integrality.
    Recurrence { start: usize, coeffs: Vec<BigRational> },
    /// `f_n ≈ A ρⁿ n^c` beyond the truncation.
    Fit(GrowthFit),
}

/// Least-squares fit of `ln f_n = a + n ln ρ + c ln n` over the window.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GrowthFit {
    pub rho: f64,
    pub poly_exponent: f64,
    /// `ln A`, chosen so that every window point lies on or under the model.
    pub ln_amplitude: f64,
    pub points: usize,
    pub window: (usize, usize),
}

/// Enclosure of `λ` with the exact dyadic bracket on `x = 1/λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEnclosure {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    /// Smallest dyadic `x` found with partial sum `≥ 1`; `λ ≥ 1/x_hi`.
    pub x_hi: Option<BigRational>,
    /// The estimate as an exact rational `1/λ`.
    pub x_est: BigRational,
    pub method: Method,
    /// The partial sum hits 1 exactly at `x_hi` and no tail is modelled.
    pub exact: bool,
    pub tail: TailModel,
}

impl LambdaEnclosure {
    /// Closed-form `λ = num/den`.
    pub fn exact(num: u64, den: u64) -> Self {
        let lam = num as f64 / den as f64;
        let x = BigRational::new(BigInt::from(den), BigInt::from(num));
        LambdaEnclosure {
            lo: lam,
            hi: lam,
            estimate: lam,
            x_hi: Some(x.clone()),
            x_est: x,
            method: Method::Exact,
            exact: true,
            tail: TailModel::Finite,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, lam: f64, slack: f64) -> bool {
        self.lo - slack <= lam && lam <= self.hi + slack
    }

    pub fn overlaps(&self, other: &LambdaEnclosure, slack: f64) -> bool {
        self.lo <= other.hi + slack && other.lo <= self.hi + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum VereJones {
    Transient,
    RecurrentNotPositive,
    PositiveRecurrent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Spr {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Evidence {
    /// `Σ_{n≤N} f_n λ⁻ⁿ` at the estimate.
    pub partial_sum: f64,
    /// Estimated `Σ_{n>N} f_n λ⁻ⁿ`.
    pub tail_estimate: f64,
    /// Growth estimate `ρ` of the coefficients.
    pub growth: f64,
    /// `ρ / λ`.
    pub ratio: f64,
    pub fit: Option<GrowthFit>,
    pub tail_model: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub lambda: LambdaEnclosure,
    pub period: usize,
    pub vere_jones: VereJones,
    pub spr: Spr,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig {
    pub tol: f64,
    pub spr_margin: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            tol: DEFAULT_TOL,
            spr_margin: DEFAULT_SPR_MARGIN,
        }
    }
}

/// gcd of the indices of nonzero coefficients.
pub fn period(f: &Series) -> Result<usize, SpectralError> {
    let support = f.support();
    if support.is_empty() {
        return Err(SpectralError::ZeroSeries);
    }
    Ok(support.iter().fold(0usize, |g, &n| g.gcd(&n)))
}

/// `a_n = F_{pn}`, degree `⌊N/p⌋`.
pub fn strip_period(f: &Series, p: usize) -> Result<Series, SpectralError> {
    assert!(p >= 1);
    if let Some(&n) = f.support().iter().find(|&&n| n % p != 0) {
        return Err(SpectralError::PeriodMismatch(n));
    }
    let d = f.degree() / p;
    if d == 0 {
        return Err(SpectralError::ZeroSeries);
    }
    Ok(Series::from_fn(d, |n| f.coeff(n * p)))
}

/// `F(z) = a(z^p)`.
pub fn inflate_period(a: &Series, p: usize) -> Series {
    a.inflate(p)
}

pub fn entropy(f: &Series, tol: f64) -> Result<LambdaEnclosure, SpectralError> {
    entropy_with(
        f,
        &EntropyConfig {
            tol,
            ..EntropyConfig::default()
        },
    )
}

pub fn entropy_with(f: &Series, cfg: &EntropyConfig) -> Result<LambdaEnclosure, SpectralError> {
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(SpectralError::InvalidTolerance);
    }
    if f.is_zero() {
        return Err(SpectralError::ZeroSeries);
    }
    let tail = tail_model(f);
    let growth = growth_rate(f);
    let total: BigUint = f.coeffs().iter().sum();

    // Certified bracket from exact partial sums.
    let bracket = if total > BigUint::one() {
        Some(bisect_partial(f, cfg.tol))
    } else {
        None
    };

    if let TailModel::Finite = tail {
        let (x_lo, x_hi, exact) = match bracket {
            Some(b) => b,
            None => return Err(SpectralError::EntropyAtOrBelowZero),
        };
        let lo = 1.0 / x_hi.to_f64().unwrap();
        let hi = if exact { lo } else { 1.0 / x_lo.to_f64().unwrap() };
        let (estimate, x_est) = if exact {
            (lo, x_hi.clone())
        } else {
            let mid = (&x_lo + &x_hi) / BigRational::from_integer(2.into());
            (1.0 / mid.to_f64().unwrap(), mid)
        };
        return Ok(LambdaEnclosure {
            lo,
            hi,
            estimate,
            x_hi: Some(x_hi),
            x_est,
            method: Method::Root,
            exact,
            tail,
        });
    }

    let tail_fn = TailEval::new(f, &tail);
    let x_cap = match tail_fn.rho() {
        r if r > 1.0 => 1.0 / r,
        _ => 1.0,
    };
    let x_hi_f = bracket
        .as_ref()
        .map(|b| b.1.to_f64().unwrap())
        .unwrap_or(1.0)
        .min(x_cap);
    let g = |x: f64| f.eval_f64(x) + tail_fn.eval(x);

    // Tail-corrected root, if the corrected sum reaches 1 inside the disc.
    let probe = x_hi_f * (1.0 - 1e-15);
    if g(probe) >= 1.0 {
        let (mut lo, mut hi) = (0.0f64, probe);
        while 1.0 / lo.max(f64::MIN_POSITIVE) - 1.0 / hi > cfg.tol / 4.0 && hi - lo > 0.0 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let estimate = 2.0 / (lo + hi);
        let tail_at = tail_fn.eval(hi);
        let lam_lo = bracket
            .as_ref()
            .map(|b| 1.0 / b.1.to_f64().unwrap())
            .unwrap_or(1.0)
            .min(1.0 / hi);
        let lam_hi = 1.0 / lo;
        if tail_at > 0.5 && matches!(tail, TailModel::Fit(_)) {
            return Err(SpectralError::Inconclusive {
                lo: lam_lo,
                hi: lam_hi,
            });
        }
        let x_est = BigRational::from_float(1.0 / estimate).unwrap();
        return Ok(LambdaEnclosure {
            lo: lam_lo,
            hi: lam_hi,
            estimate,
            x_hi: bracket.map(|b| b.1),
            x_est,
            method: Method::Root,
            exact: false,
            tail,
        });
    }

    // No root inside the disc of convergence: λ is the growth rate.
    match growth {
        Some(fit) if fit.rho > 1.0 => {
            let lam_cert = bracket
                .as_ref()
                .map(|b| 1.0 / b.1.to_f64().unwrap())
                .unwrap_or(1.0);
            let spread = (fit.rho * 1e-3).max(cfg.tol);
            Ok(LambdaEnclosure {
                lo: lam_cert.min(fit.rho - spread),
                hi: fit.rho + spread,
                estimate: fit.rho,
                x_hi: bracket.map(|b| b.1),
                x_est: BigRational::from_float(1.0 / fit.rho).unwrap(),
                method: Method::Radius,
                exact: false,
                tail,
            })
        }
        _ => Err(SpectralError::EntropyAtOrBelowZero),
    }
}

pub fn classify(f: &Series, lambda: &LambdaEnclosure) -> SpectralReport {
    classify_with(f, lambda, &EntropyConfig::default())
}

pub fn classify_with(f: &Series, lambda: &LambdaEnclosure, cfg: &EntropyConfig) -> SpectralReport {
    let period = period(f).unwrap_or(0);
    let fit = growth_rate(f);
    let growth = match (&lambda.tail, &fit) {
        (TailModel::Finite, _) => 0.0,
        (_, Some(fit)) => fit.rho,
        (_, None) => 0.0,
    };
    let lam = lambda.estimate;
    let x = 1.0 / lam;
    let partial_sum = f.eval_f64(x);
    let tail_estimate = TailEval::new(f, &lambda.tail).eval(x);
    let ratio = growth / lam;
    let spr = if ratio <= 1.0 - cfg.spr_margin {
        Spr::Yes
    } else if ratio >= 1.0 - cfg.spr_margin / 2.0 {
        Spr::No
    } else {
        Spr::Inconclusive
    };
    let sum = partial_sum + tail_estimate;
    let vere_jones = match lambda.method {
        Method::Radius => {
            if sum.is_finite() && sum < 1.0 - cfg.tol {
                VereJones::Transient
            } else {
                VereJones::Inconclusive
            }
        }
        _ => {
            if spr == Spr::Yes {
                VereJones::PositiveRecurrent
            } else if sum.is_finite() && sum < 1.0 - cfg.tol.max(1e-9) {
                VereJones::Transient
            } else {
                VereJones::Inconclusive
            }
        }
    };
    SpectralReport {
        lambda: lambda.clone(),
        period,
        vere_jones,
        spr,
        evidence: Evidence {
            partial_sum,
            tail_estimate,
            growth,
            ratio,
            fit,
            tail_model: match &lambda.tail {
                TailModel::Finite => "finite".into(),
                TailModel::Recurrence { coeffs, .. } => format!("recurrence(order {})", coeffs.len()),
                TailModel::Fit(_) => "growth-fit".into(),
            },
        },
    }
}

/// `entropy` then `classify`.
pub fn analyze(f: &Series, cfg: &EntropyConfig) -> Result<SpectralReport, SpectralError> {
    let lam = entropy_with(f, cfg)?;
    Ok(classify_with(f, &lam, cfg))
}

/// Window of the last `⌈N/3⌉` indices.
fn window(f: &Series) -> (usize, usize) {
    let n = f.degree();
    let w = n.div_ceil(3).max(1);
    (n + 1 - w, n)
}

/// Growth fit over the last third; `None` if the window has no nonzero entry.
pub fn growth_rate(f: &Series) -> Option<GrowthFit> {
    let (a, b) = window(f);
    let pts: Vec<(f64, f64)> = (a..=b)
        .filter(|&n| !f.coeff_ref(n).is_zero())
        .map(|n| (n as f64, big_ln(f.coeff_ref(n))))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let (ln_rho, c) = if pts.len() == 1 {
        (pts[0].1 / pts[0].0, 0.0)
    } else if pts.len() >= 8 {
        match fit3(&pts) {
            Some((lr, c)) if c.abs() <= 8.0 => (lr, c),
            _ => (fit2(&pts), 0.0),
        }
    } else {
        (fit2(&pts), 0.0)
    };
    let ln_amp = pts
        .iter()
        .map(|&(n, y)| y - n * ln_rho - c * n.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    Some(GrowthFit {
        rho: ln_rho.exp(),
        poly_exponent: c,
        ln_amplitude: ln_amp,
        points: pts.len(),
        window: (a, b),
    })
}

/// Slope of `y` against `n`.
fn fit2(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// `y ≈ a + b n + c ln n`; returns `(b, c)`.
fn fit3(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let m = pts.len() as f64;
    let mean = |g: &dyn Fn(&(f64, f64)) -> f64| pts.iter().map(g).sum::<f64>() / m;
    let mu = mean(&|p| p.0);
    let ml = mean(&|p| p.0.ln());
    let my = mean(&|p| p.1);
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pts {
        let u = p.0 - mu;
        let l = p.0.ln() - ml;
        let y = p.1 - my;
        s11 += u * u;
        s12 += u * l;
        s22 += l * l;
        s1y += u * y;
        s2y += l * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-12 * s11 * s22 {
        return None;
    }
    let b = (s1y * s22 - s2y * s12) / det;
    let c = (s2y * s11 - s1y * s12) / det;
    Some((b, c))
}

/// Bisection on dyadic `x` for the exact partial sum; returns
/// `(x_lo, x_hi, exact)` with `P(x_lo) < 1 ≤ P(x_hi)`.
fn bisect_partial(f: &Series, tol: f64) -> (BigRational, BigRational, bool) {
    let n = f.degree();
    let (mut lo, mut hi) = (BigUint::zero(), BigUint::one());
    let mut k: u64 = 0;
    let mut exact = false;
    loop {
        let lo_f = ratio_f64(&lo, k);
        let hi_f = ratio_f64(&hi, k);
        if lo_f > 0.0 && 1.0 / lo_f - 1.0 / hi_f <= tol {
            break;
        }
        if k >= 400 {
            break;
        }
        k += 1;
        lo <<= 1u32;
        hi <<= 1u32;
        let mid = (&lo + &hi) >> 1u32;
        match cmp_partial(f, n, &mid, k) {
            std::cmp::Ordering::Less => lo = mid,
            std::cmp::Ordering::Equal => {
                exact = true;
                hi = mid;
                break;
            }
            std::cmp::Ordering::Greater => hi = mid,
        }
    }
    let den = BigInt::one() << k;
    if exact {
        // The exact root: the lower end only needs to sit just below it.
        let lo_r = BigRational::new(BigInt::from(hi.clone()) * 2 - 1, den.clone() * 2);
        return (lo_r, BigRational::new(BigInt::from(hi), den), true);
    }
    (
        BigRational::new(BigInt::from(lo), den.clone()),
        BigRational::new(BigInt::from(hi), den),
        false,
    )
}

fn ratio_f64(m: &BigUint, k: u64) -> f64 {
    big_to_f64(m) / 2f64.powi(k as i32)
}

/// Compares `Σ f_j (m/2^k)^j` with 1 in integer arithmetic.
fn cmp_partial(f: &Series, n: usize, m: &BigUint, k: u64) -> std::cmp::Ordering {
    // acc = Σ_j f_j m^{j-1} 2^{k(n-j)}
    let mut acc = f.coeff(n);
    for j in (1..n).rev() {
        acc = acc * m + (f.coeff(j) << (k * (n - j) as u64));
    }
    let lhs = acc * m;
    let rhs = BigUint::one() << (k * n as u64);
    lhs.cmp(&rhs)
}

/// Picks the tail model for `f`.
pub fn tail_model(f: &Series) -> TailModel {
    let (a, b) = window(f);
    if (a..=b).all(|n| f.coeff_ref(n).is_zero()) {
        return TailModel::Finite;
    }
    if let Some((start, coeffs)) = find_recurrence(f) {
        return TailModel::Recurrence { start, coeffs };
    }
    match growth_rate(f) {
        Some(fit) if fit.points >= MIN_FIT_POINTS => TailModel::Fit(fit),
        _ => TailModel::Finite,
    }
}

/// Searches for a linear recurrence that the data over-determines and whose
/// continuation stays integral and nonnegative.
fn find_recurrence(f: &Series) -> Option<(usize, Vec<BigRational>)> {
    let n = f.degree();
    let seq: Vec<BigRational> = f
        .coeffs()
        .iter()
        .map(|c| BigRational::from_integer(BigInt::from(c.clone())))
        .collect();
    let residues: Vec<u64> = f.coeffs().iter().map(|c| (c % BM_PRIME).to_u64().unwrap()).collect();
    for start in 1..=(n / 4).max(1) {
        let s = &seq[start - 1..];
        // the order mod p never exceeds the order over Q
        if 2 * linear_complexity_mod_p(&residues[start - 1..]) >= s.len() {
            continue;
        }
        let conn = berlekamp_massey(s);
        let order = conn.len() - 1;
        if order == 0 || 2 * order >= s.len() {
            continue;
        }
        // a_i = −C_i
        let coeffs: Vec<BigRational> = conn[1..].iter().map(|c| -c.clone()).collect();
        if continuation_is_integral(&seq, &coeffs, 2 * n) {
            return Some((start, coeffs));
        }
    }
    None
}

fn continuation_is_integral(seq: &[BigRational], coeffs: &[BigRational], extra: usize) -> bool {
    let mut v: Vec<BigRational> = seq.to_vec();
    for _ in 0..extra {
        let len = v.len();
        let mut next = BigRational::zero();
        for (i, a) in coeffs.iter().enumerate() {
            next += a * &v[len - 1 - i];
        }
        if !next.is_integer() || next.is_negative() {
            return false;
        }
        v.push(next);
    }
    true
}

const BM_PRIME: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % BM_PRIME as u128) as u64
}

fn inv_mod(a: u64) -> u64 {
    let (mut base, mut e, mut acc) = (a, BM_PRIME - 2, 1u64);
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        e >>= 1;
    }
    acc
}

/// Length of the shortest linear recurrence of `s` over `Z/p`.
fn linear_complexity_mod_p(s: &[u64]) -> usize {
    let p = BM_PRIME;
    let mut c = vec![1u64];
    let mut b = vec![1u64];
    let (mut l, mut m, mut bd) = (0usize, 1usize, 1u64);
    for i in 0..s.len() {
        let mut d = s[i];
        for j in 1..=l.min(c.len() - 1) {
            d = (d + mul_mod(c[j], s[i - j])) % p;
        }
        if d == 0 {
            m += 1;
            continue;
        }
        let coef = mul_mod(d, inv_mod(bd));
        let t = c.clone();
        if c.len() < b.len() + m {
            c.resize(b.len() + m, 0);
        }
        for (j, &bj) in b.iter().enumerate() {
            c[j + m] = (c[j + m] + p - mul_mod(coef, bj)) % p;
        }
        if 2 * l <= i {
            l = i + 1 - l;
            b = t;
            bd = d;
            m = 1;
        } else {
            m += 1;
        }
    }
    l
}

/// Connection polynomial `C` (with `C_0 = 1`) of the shortest linear
/// recurrence generating `s`.
pub fn berlekamp_massey(s: &[BigRational]) -> Vec<BigRational> {
    let mut c = vec![BigRational::one()];
    let mut b = vec![BigRational::one()];
    let mut l = 0usize;
    let mut m = 1usize;
    let mut bd = BigRational::one();
    for i in 0..s.len() {
        let mut d = s[i].clone();
        for j in 1..=l {
            if j < c.len() {
                d += &c[j] * &s[i - j];
            }
        }
        if d.is_zero() {
            m += 1;
            continue;
        }
        let coef = &d / &bd;
        let t = c.clone();
        if c.len() < b.len() + m {
            c.resize(b.len() + m, BigRational::zero());
        }
        for (j, bj) in b.iter().enumerate() {
            c[j + m] -= &coef * bj;
        }
        if 2 * l <= i {
            l = i + 1 - l;
            b = t;
            bd = d;
            m = 1;
        } else {
            m += 1;
        }
    }
    c.resize(l + 1, BigRational::zero());
    c
}

/// Evaluates the modelled tail `Σ_{n>N} f̂_n xⁿ` in floating point.
struct TailEval {
    degree: usize,
    kind: TailKind,
}

enum TailKind {
    Zero,
    Rec { coeffs: Vec<f64>, last: Vec<f64> },
    Fit(GrowthFit),
}

impl TailEval {
    fn new(f: &Series, model: &TailModel) -> Self {
        let degree = f.degree();
        let kind = match model {
            TailModel::Finite => TailKind::Zero,
            TailModel::Recurrence { coeffs, .. } => {
                let k = coeffs.len();
                TailKind::Rec {
                    coeffs: coeffs.iter().map(|c| c.to_f64().unwrap()).collect(),
                    // f_{N-k+1..N}, most recent last
                    last: (degree + 1 - k..=degree).map(|n| big_to_f64(f.coeff_ref(n))).collect(),
                }
            }
            TailModel::Fit(fit) => TailKind::Fit(fit.clone()),
        };
        TailEval { degree, kind }
    }

    fn rho(&self) -> f64 {
        match &self.kind {
            TailKind::Fit(fit) => fit.rho,
            _ => 0.0,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        const MAX_TERMS: usize = 200_000;
        match &self.kind {
            TailKind::Zero => 0.0,
            TailKind::Rec { coeffs, last } => {
                // Work with t_n = f_n xⁿ to avoid overflow.
                let k = coeffs.len();
                let n0 = self.degree;
                let mut window: Vec<f64> = last
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * x.powi((n0 + 1 - k + i) as i32))
                    .collect();
                if window.iter().any(|v| !v.is_finite()) {
                    return f64::INFINITY;
                }
                let scaled: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * x.powi(i as i32 + 1))
                    .collect();
                let mut sum = 0.0;
                let mut quiet = 0;
                for _ in 0..MAX_TERMS {
                    let mut t = 0.0;
                    for (i, a) in scaled.iter().enumerate() {
                        t += a * window[k - 1 - i];
                    }
                    sum += t;
                    if !sum.is_finite() || t > 1e6 {
                        return f64::INFINITY;
                    }
                    window.remove(0);
                    window.push(t);
                    if t.abs() <= 1e-18 * sum.abs().max(1e-300) {
                        quiet += 1;
                        if quiet > k + 2 {
                            return sum;
                        }
                    } else {
                        quiet = 0;
                    }
                }
                f64::INFINITY
            }
            TailKind::Fit(fit) => {
                let q = (fit.rho * x).ln();
                let mut sum = 0.0;
                let mut n = self.degree + 1;
                for _ in 0..MAX_TERMS {
                    let lt = fit.ln_amplitude + (n as f64) * q + fit.poly_exponent * (n as f64).ln();
                    let t = lt.exp();
                    sum += t;
                    if !sum.is_finite() {
                        return f64::INFINITY;
                    }
                    if t <= 1e-18 * sum.max(1e-300) && q < 0.0 {
                        return sum;
                    }
                    n += 1;
                }
                if q >= 0.0 && fit.poly_exponent >= -1.0 {
                    return f64::INFINITY;
                }
                // Integral remainder for n^c decay when ρx is at or near 1.
                let c = fit.poly_exponent;
                let lt = fit.ln_amplitude + (n as f64) * q.min(0.0);
                sum + lt.exp() * (n as f64).powf(c + 1.0) / (-c - 1.0).max(1e-9)
            }
        }
    }
}
