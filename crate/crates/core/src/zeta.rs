//! Periodic-point data of a loop shift: `Fix_n`, orbit counts `O_n`, the
//! product formula and the growth rate of orbit-count discrepancies.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::series::{bigint_abs_ln, IntPoly, Series};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZetaError {
    #[error("Möbius inversion sum at n = {0} is not divisible by n")]
    NotRealizable(usize),
    #[error("negative orbit count at n = {0}")]
    NegativeOrbitCount(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitData {
    /// `Fix_1..Fix_N`
    pub fix: Vec<BigUint>,
    /// `O_1..O_N`
    pub orbits: Vec<BigUint>,
}

impl OrbitData {
    pub fn of(f: &Series) -> Self {
        let fix = fix_counts(f);
        let orbits = orbit_counts(&fix).expect("fixed-point counts of a series are realizable");
        OrbitData { fix, orbits }
    }

    pub fn orbit(&self, n: usize) -> &BigUint {
        &self.orbits[n - 1]
    }

    pub fn degree(&self) -> usize {
        self.fix.len()
    }
}

/// Coefficients of `z f'(z)/(1 − f(z))`.
pub fn fix_counts(f: &Series) -> Vec<BigUint> {
    let n = f.degree();
    let support = f.support();
    // Fix_n = n f_n + Σ_{k<n} f_k Fix_{n−k}
    let mut fix: Vec<BigUint> = Vec::with_capacity(n);
    for m in 1..=n {
        let mut acc = f.coeff(m) * BigUint::from(m);
        for &k in support.iter().take_while(|&&k| k < m) {
            acc += f.coeff_ref(k) * &fix[m - k - 1];
        }
        fix.push(acc);
    }
    fix
}

pub fn mobius(n: usize) -> i8 {
    assert!(n >= 1);
    let mut m = n;
    let mut sign = 1i8;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            m /= p;
            if m.is_multiple_of(p) {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if m > 1 {
        sign = -sign;
    }
    sign
}

/// `O_n = (1/n) Σ_{k|n} μ(n/k) Fix_k`.
pub fn orbit_counts(fix: &[BigUint]) -> Result<Vec<BigUint>, ZetaError> {
    let mut out = Vec::with_capacity(fix.len());
    for n in 1..=fix.len() {
        let mut acc = BigInt::zero();
        for k in divisors(n) {
            match mobius(n / k) {
                1 => acc += BigInt::from(fix[k - 1].clone()),
                -1 => acc -= BigInt::from(fix[k - 1].clone()),
                _ => {}
            }
        }
        let (q, r) = acc.div_rem(&BigInt::from(n));
        if !r.is_zero() {
            return Err(ZetaError::NotRealizable(n));
        }
        if q.is_negative() {
            return Err(ZetaError::NegativeOrbitCount(n));
        }
        out.push(q.magnitude().clone());
    }
    Ok(out)
}

/// `Fix_n = Σ_{k|n} k O_k`.
pub fn fix_from_orbits(orbits: &[BigUint]) -> Vec<BigUint> {
    (1..=orbits.len())
        .map(|n| {
            divisors(n)
                .into_iter()
                .map(|k| &orbits[k - 1] * BigUint::from(k))
                .sum()
        })
        .collect()
}

pub fn divisors(n: usize) -> Vec<usize> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// `∏_{n≤N} (1 − zⁿ)^{O_n} − (1 − f)`, as a signed sequence indexed from `z⁰`.
pub fn product_formula_residual(f: &Series, orbits: &[BigUint]) -> IntPoly {
    let d = f.degree().min(orbits.len());
    let mut prod = IntPoly::one(d);
    for (i, o) in orbits.iter().enumerate().take(d) {
        prod.mul_one_minus_power(i + 1, o);
    }
    prod.sub(&IntPoly::one_minus(&f.truncate(d)))
}

/// `O_n(F) − O_n(G)` for `n` up to the common degree.
pub fn orbit_discrepancy(f: &Series, g: &Series) -> Vec<BigInt> {
    let of = OrbitData::of(f);
    let og = OrbitData::of(g);
    of.orbits
        .iter()
        .zip(og.orbits.iter())
        .map(|(a, b)| BigInt::from(a.clone()) - BigInt::from(b.clone()))
        .collect()
}

/// Window `[from, to]` used by [`discrepancy_growth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthWindow {
    pub from: usize,
    pub to: usize,
}

impl GrowthWindow {
    /// The last half of `1..=n`.
    pub fn last_half(n: usize) -> Self {
        GrowthWindow {
            from: n / 2 + 1,
            to: n,
        }
    }
}

/// `max (n·|ΔO_n|)^{1/n}` over the last half of the common degree; 0 if all
/// discrepancies in the window vanish. The factor `n` cancels the `1/n` in
/// `O_n ≈ λⁿ/n` and does not change the limsup.
pub fn discrepancy_growth(f: &Series, g: &Series) -> f64 {
    let delta = orbit_discrepancy(f, g);
    discrepancy_growth_in(&delta, GrowthWindow::last_half(delta.len()))
}

pub fn discrepancy_growth_in(delta: &[BigInt], w: GrowthWindow) -> f64 {
    let mut best = 0.0f64;
    for n in w.from.max(1)..=w.to.min(delta.len()) {
        let d = &delta[n - 1];
        if d.is_zero() {
            continue;
        }
        best = best.max(((bigint_abs_ln(d) + (n as f64).ln()) / n as f64).exp());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn mobius_values() {
        assert_eq!(mobius(1), 1);
        assert_eq!(mobius(4), 0);
        assert_eq!(mobius(6), 1);
        assert_eq!(mobius(30), -1);
    }

    #[test]
    fn single_fixed_point() {
        assert_eq!(orbit_counts(&u(&[1, 1, 1, 1])).unwrap(), u(&[1, 0, 0, 0]));
    }

    #[test]
    fn corrupted_fix_is_not_realizable() {
        assert_eq!(orbit_counts(&u(&[2, 5])), Err(ZetaError::NotRealizable(2)));
    }

    #[test]
    fn perturbed_orbits_leave_residual_at_degree_one() {
        let f = Series::from_u64s(&[2, 0, 0, 0, 0, 0]);
        let mut o = OrbitData::of(&f).orbits;
        assert!(product_formula_residual(&f, &o).is_zero());
        o[0] = BigUint::from(3u32);
        let r = product_formula_residual(&f, &o);
        assert_eq!(r.first_nonzero(), Some(1));
    }

    #[test]
    fn divisors_sorted() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
    }
}
