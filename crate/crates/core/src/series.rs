//! Truncated power series in `z·Z₊[[z]]` with arbitrary-precision coefficients.
//!
//! A [`Series`] of degree `N` stores `f_1, …, f_N`; the constant term is
//! always zero. Binary operations are exact up to the smaller degree.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("negative coefficient at z^{0}")]
    NegativeCoefficient(usize),
    #[error("series degree must be at least 1")]
    ZeroDegree,
}

/// Truncated series `f_1 z + … + f_N z^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Series {
    coeffs: Vec<BigUint>,
}

impl Series {
    /// Builds a series from `f_1..f_N`; the degree is the vector length.
    pub fn new(coeffs: Vec<BigUint>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::ZeroDegree);
        }
        Ok(Series { coeffs })
    }

    pub fn from_u64s(coeffs: &[u64]) -> Self {
        assert!(!coeffs.is_empty(), "series degree must be at least 1");
        Series {
            coeffs: coeffs.iter().map(|&c| BigUint::from(c)).collect(),
        }
    }

    pub fn zero(degree: usize) -> Self {
        assert!(degree >= 1, "series degree must be at least 1");
        Series {
            coeffs: vec![BigUint::zero(); degree],
        }
    }

    /// `c·z^n` truncated at `degree` (zero if `n > degree`).
    pub fn monomial(n: usize, c: u64, degree: usize) -> Self {
        let mut s = Series::zero(degree);
        if n >= 1 && n <= degree {
            s.coeffs[n - 1] = BigUint::from(c);
        }
        s
    }

    /// Coefficients given by a closure on `n = 1..=degree`.
    pub fn from_fn(degree: usize, mut f: impl FnMut(usize) -> BigUint) -> Self {
        assert!(degree >= 1, "series degree must be at least 1");
        Series {
            coeffs: (1..=degree).map(&mut f).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `z^n`; zero for `n = 0` and for `n` past the degree.
    pub fn coeff(&self, n: usize) -> BigUint {
        if n == 0 || n > self.coeffs.len() {
            BigUint::zero()
        } else {
            self.coeffs[n - 1].clone()
        }
    }

    pub fn coeff_ref(&self, n: usize) -> &BigUint {
        &self.coeffs[n - 1]
    }

    /// `f_1..f_N` as a slice (index `i` holds `f_{i+1}`).
    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn truncate(&self, degree: usize) -> Series {
        assert!(degree >= 1);
        let mut coeffs: Vec<BigUint> = self.coeffs.iter().take(degree).cloned().collect();
        coeffs.resize(degree.min(self.degree()), BigUint::zero());
        Series { coeffs }
    }

    /// Indices `n` with `f_n > 0`.
    pub fn support(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Smallest `n` with `f_n > 0`.
    pub fn order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|i| i + 1)
    }

    pub fn add(&self, other: &Series) -> Series {
        let d = self.degree().min(other.degree());
        Series {
            coeffs: (0..d).map(|i| &self.coeffs[i] + &other.coeffs[i]).collect(),
        }
    }

    /// Coefficientwise difference; fails at the first `n` with `a_n < b_n`.
    pub fn sub_checked(&self, other: &Series) -> Result<Series, SeriesError> {
        let d = self.degree().min(other.degree());
        let mut coeffs = Vec::with_capacity(d);
        for i in 0..d {
            if self.coeffs[i] < other.coeffs[i] {
                return Err(SeriesError::NegativeCoefficient(i + 1));
            }
            coeffs.push(&self.coeffs[i] - &other.coeffs[i]);
        }
        Ok(Series { coeffs })
    }

    /// Cauchy product truncated to the smaller degree.
    pub fn mul(&self, other: &Series) -> Series {
        let d = self.degree().min(other.degree());
        let mut out = vec![BigUint::zero(); d];
        for (i, a) in self.coeffs.iter().enumerate().take(d) {
            if a.is_zero() {
                continue;
            }
            // (i+1) + (j+1) ≤ d
            for (j, b) in other.coeffs.iter().enumerate().take(d.saturating_sub(i + 1)) {
                if !b.is_zero() {
                    out[i + j + 1] += a * b;
                }
            }
        }
        Series { coeffs: out }
    }

    /// `k* = 1 + k + k² + …` truncated at the degree of `k`.
    pub fn star(&self) -> Star {
        let d = self.degree();
        // s_0 = 1, s_n = Σ_{m=1..n} k_m s_{n-m}
        let mut s = vec![BigUint::zero(); d + 1];
        s[0] = BigUint::one();
        let support = self.support();
        for n in 1..=d {
            let mut acc = BigUint::zero();
            for &m in support.iter().take_while(|&&m| m <= n) {
                if !s[n - m].is_zero() {
                    acc += &self.coeffs[m - 1] * &s[n - m];
                }
            }
            s[n] = acc;
        }
        s.remove(0);
        Star {
            tail: Series { coeffs: s },
        }
    }

    /// The series `g` with `(1 − g) = (1 − f)/(1 − k)`, i.e. `g = (f − k)·k*`.
    pub fn divide_one_minus(&self, k: &Series) -> Result<Series, SeriesError> {
        let d = self.degree().min(k.degree());
        let diff = IntPoly::from_series(self).sub(&IntPoly::from_series(k));
        let star = IntPoly::from_star(&k.truncate(d).star());
        let g = diff.mul_trunc(&star, d);
        g.to_series(d)
    }

    /// Exact partial sum `Σ_{n≤N} f_n x^n`.
    pub fn eval_partial(&self, x: &BigRational) -> BigRational {
        // Horner from the top.
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = (acc + BigRational::from_integer(BigInt::from(c.clone()))) * x;
        }
        acc
    }

    /// Partial sum in floating point, for diagnostics.
    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = (acc + big_to_f64(c)) * x;
        }
        acc
    }

    /// `f(z^p)`, truncated at `p·N`.
    pub fn inflate(&self, p: usize) -> Series {
        assert!(p >= 1);
        let mut coeffs = vec![BigUint::zero(); self.degree() * p];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[(i + 1) * p - 1] = c.clone();
        }
        Series { coeffs }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let n = i + 1;
            let coef = if c.is_one() { String::new() } else { c.to_string() };
            match n {
                1 => write!(f, "{coef}z")?,
                _ => write!(f, "{coef}z^{n}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(z^{})", self.degree() + 1)
    }
}

/// `1 + tail`, the result of [`Series::star`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Star {
    tail: Series,
}

impl Star {
    pub fn tail(&self) -> &Series {
        &self.tail
    }

    pub fn degree(&self) -> usize {
        self.tail.degree()
    }

    /// Coefficient of `z^n`, including the unit at `n = 0`.
    pub fn coeff(&self, n: usize) -> BigUint {
        if n == 0 {
            BigUint::one()
        } else {
            self.tail.coeff(n)
        }
    }

    /// `a · (1 + tail)`.
    pub fn apply(&self, a: &Series) -> Series {
        a.add(&a.mul(&self.tail))
    }
}

/// Signed polynomial with an explicit constant term, truncated at its length − 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPoly {
    pub coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn one(degree: usize) -> Self {
        let mut coeffs = vec![BigInt::zero(); degree + 1];
        coeffs[0] = BigInt::one();
        IntPoly { coeffs }
    }

    /// `0 + f_1 z + …`
    pub fn from_series(f: &Series) -> Self {
        let mut coeffs = Vec::with_capacity(f.degree() + 1);
        coeffs.push(BigInt::zero());
        coeffs.extend(f.coeffs().iter().map(|c| BigInt::from(c.clone())));
        IntPoly { coeffs }
    }

    /// `1 − f`
    pub fn one_minus(f: &Series) -> Self {
        let mut p = IntPoly::from_series(f);
        for c in p.coeffs.iter_mut() {
            *c = -c.clone();
        }
        p.coeffs[0] = BigInt::one();
        p
    }

    pub fn from_star(s: &Star) -> Self {
        let mut p = IntPoly::from_series(s.tail());
        p.coeffs[0] = BigInt::one();
        p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> BigInt {
        self.coeffs.get(n).cloned().unwrap_or_default()
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        let d = self.degree().min(other.degree());
        IntPoly {
            coeffs: (0..=d).map(|i| &self.coeffs[i] - &other.coeffs[i]).collect(),
        }
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let d = self.degree().min(other.degree());
        IntPoly {
            coeffs: (0..=d).map(|i| &self.coeffs[i] + &other.coeffs[i]).collect(),
        }
    }

    pub fn mul_trunc(&self, other: &IntPoly, degree: usize) -> IntPoly {
        let d = degree.min(self.degree()).min(other.degree());
        let mut out = vec![BigInt::zero(); d + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(d + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(d + 1 - i) {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        IntPoly { coeffs: out }
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        self.mul_trunc(other, self.degree().min(other.degree()))
    }

    /// Multiplies by `(1 − z^n)^e` in place, via the binomial expansion.
    pub fn mul_one_minus_power(&mut self, n: usize, e: &BigUint) {
        if e.is_zero() {
            return;
        }
        let d = self.degree();
        let jmax = d / n;
        // C(e, j) for j ≤ jmax; e may be huge, j stays small.
        let e_int = BigInt::from(e.clone());
        let mut binom = Vec::with_capacity(jmax + 1);
        let mut c = BigInt::one();
        binom.push(c.clone());
        for j in 1..=jmax {
            c = c * (&e_int - BigInt::from(j - 1)) / BigInt::from(j);
            binom.push(c.clone());
        }
        let old = self.coeffs.clone();
        for m in 0..=d {
            let mut acc = BigInt::zero();
            for (j, b) in binom.iter().enumerate() {
                if j * n > m {
                    break;
                }
                if b.is_zero() || old[m - j * n].is_zero() {
                    continue;
                }
                let term = b * &old[m - j * n];
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            self.coeffs[m] = acc;
        }
    }

    /// Divides by `(1 − z^n)` in place (multiplies by `1 + z^n + z^{2n} + …`).
    pub fn div_one_minus_monomial(&mut self, n: usize) {
        for m in n..=self.degree() {
            let prev = self.coeffs[m - n].clone();
            self.coeffs[m] += prev;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// First index with a nonzero coefficient.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    /// Drops the constant term and converts; fails on a negative coefficient.
    pub fn to_series(&self, degree: usize) -> Result<Series, SeriesError> {
        let d = degree.min(self.degree());
        let mut coeffs = Vec::with_capacity(d);
        for n in 1..=d {
            let c = &self.coeffs[n];
            if c.is_negative() {
                return Err(SeriesError::NegativeCoefficient(n));
            }
            coeffs.push(c.magnitude().clone());
        }
        Series::new(coeffs)
    }
}

pub(crate) fn big_to_f64(c: &BigUint) -> f64 {
    let bits = c.bits();
    if bits <= 1000 {
        num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    }
}

/// Natural log of a positive integer, accurate for any size.
pub(crate) fn big_ln(c: &BigUint) -> f64 {
    let bits = c.bits();
    if bits <= 900 {
        big_to_f64(c).ln()
    } else {
        let shift = bits - 64;
        let top = c >> shift;
        big_to_f64(&top).ln() + (shift as f64) * std::f64::consts::LN_2
    }
}

pub(crate) fn bigint_abs_ln(c: &BigInt) -> f64 {
    big_ln(c.magnitude())
}
