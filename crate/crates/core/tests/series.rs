mod common;

use common::{naive_mul, one_minus};
use loopshift::series::{IntPoly, Series, SeriesError};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use proptest::prelude::*;

fn s(c: &[u64]) -> Series {
    Series::from_u64s(c)
}

fn arb_series(max_deg: usize, max_c: u64) -> impl Strategy<Value = Series> {
    prop::collection::vec(0..=max_c, 1..=max_deg).prop_map(|v| Series::from_u64s(&v))
}

fn ints(f: &Series) -> Vec<BigInt> {
    std::iter::once(BigInt::zero()).chain(f.coeffs().iter().map(|c| BigInt::from(c.clone()))).collect()
}

#[test]
fn arithmetic_examples() {
    assert_eq!(s(&[1, 0]).add(&s(&[0, 1])), s(&[1, 1]));
    assert_eq!(s(&[2]).add(&s(&[0])), s(&[2]));
    assert_eq!(s(&[1, 1]).add(&s(&[1, 1])), s(&[2, 2]));
    assert_eq!(s(&[2]).sub_checked(&s(&[1])).unwrap(), s(&[1]));
    assert_eq!(s(&[1, 1]).sub_checked(&s(&[0, 1])).unwrap(), s(&[1, 0]));
    assert_eq!(s(&[1]).sub_checked(&s(&[2])), Err(SeriesError::NegativeCoefficient(1)));
    assert_eq!(s(&[1, 0]).mul(&s(&[1, 0])), s(&[0, 1]));
    assert_eq!(s(&[1, 1, 0]).mul(&s(&[1, 0, 0])), s(&[0, 1, 1]));
    assert_eq!(s(&[2, 0, 0]).mul(&s(&[1, 1, 0])), s(&[0, 2, 2]));
}

#[test]
fn star_examples() {
    assert_eq!(s(&[1, 0, 0, 0]).star().tail(), &s(&[1, 1, 1, 1]));
    assert!(s(&[0, 0, 0]).star().tail().is_zero());
    assert_eq!(s(&[0, 1, 0, 0, 0]).star().tail(), &s(&[0, 1, 0, 1, 0]));
}

#[test]
fn divide_one_minus_examples() {
    let g = Series::monomial(1, 2, 10).divide_one_minus(&Series::monomial(1, 1, 10));
    assert_eq!(g.unwrap(), s(&[1; 10]));
    let f = Series::from_u64s(&[1, 1, 0, 0, 0, 0, 0, 0]);
    let g = f.divide_one_minus(&Series::monomial(2, 1, 8)).unwrap();
    // multiply back: (1 − g)(1 − z²) = 1 − z − z²
    let back = naive_mul(&one_minus(&g, 8), &one_minus(&Series::monomial(2, 1, 8), 8), 8);
    assert_eq!(back, one_minus(&f, 8));
    assert!(s(&[1, 0, 0]).divide_one_minus(&s(&[1, 0, 0])).unwrap().is_zero());
}

#[test]
fn eval_partial_examples() {
    let half = BigRational::new(1.into(), 2.into());
    assert_eq!(s(&[2]).eval_partial(&half), BigRational::one());
    assert_eq!(s(&[1, 1]).eval_partial(&half), BigRational::new(3.into(), 4.into()));
    let expect = BigRational::one() - half.clone().pow(20u32);
    assert_eq!(s(&[1; 20]).eval_partial(&half), expect);
}

proptest! {
    #[test]
    fn add_and_sub_are_inverse(a in arb_series(12, 50), b in arb_series(12, 50)) {
        let d = a.degree().min(b.degree());
        let sum = a.add(&b);
        prop_assert_eq!(sum.degree(), d);
        prop_assert_eq!(sum.sub_checked(&b).unwrap(), a.truncate(d));
    }

    #[test]
    fn mul_matches_naive_convolution(a in arb_series(12, 1000), b in arb_series(12, 1000)) {
        let d = a.degree().min(b.degree());
        let expect = naive_mul(&ints(&a), &ints(&b), d);
        prop_assert_eq!(ints(&a.mul(&b)), expect);
    }

    #[test]
    fn star_inverts_one_minus(k in arb_series(15, 5)) {
        let d = k.degree();
        let star: Vec<BigInt> = (0..=d).map(|n| BigInt::from(k.star().coeff(n))).collect();
        let mut unit = vec![BigInt::zero(); d + 1];
        unit[0] = BigInt::one();
        prop_assert_eq!(naive_mul(&one_minus(&k, d), &star, d), unit);
    }

    #[test]
    fn divide_one_minus_multiplies_back(h in arb_series(12, 4), k in arb_series(12, 4)) {
        let d = h.degree().min(k.degree());
        let f = h.add(&k);
        let g = f.divide_one_minus(&k).unwrap();
        prop_assert_eq!(naive_mul(&one_minus(&g, d), &one_minus(&k, d), d), one_minus(&f, d));
        // g = h·k*
        prop_assert_eq!(&g, &k.truncate(d).star().apply(&h.truncate(d)));
    }

    #[test]
    fn eval_partial_matches_direct_sum(a in arb_series(10, 100), num in 1u32..20, den in 21u32..40) {
        let x = BigRational::new(num.into(), den.into());
        let direct: BigRational = a
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| BigRational::from_integer(BigInt::from(c.clone())) * x.clone().pow(i as u32 + 1))
            .sum();
        prop_assert_eq!(a.eval_partial(&x), direct);
    }

    #[test]
    fn intpoly_round_trip(a in arb_series(10, 100)) {
        let p = IntPoly::from_series(&a);
        prop_assert_eq!(p.to_series(a.degree()).unwrap(), a.clone());
        prop_assert_eq!(a.inflate(3).coeff(3 * a.degree()), a.coeff(a.degree()));
    }
}

#[test]
fn coefficients_are_arbitrary_precision() {
    let big = BigUint::from(u64::MAX);
    let f = Series::new(vec![big.clone(), big.clone()]).unwrap();
    let sq = f.mul(&f);
    assert_eq!(sq.coeff(2), &big * &big);
}
