use loopshift::series::Series;
use loopshift::spectral::{classify, entropy, Method, Spr, VereJones, DEFAULT_TOL};
use num_bigint::BigUint;
use num_traits::One;

/// Plain f64 bisection on a closed-form equation, independent of the library.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    1.0 / hi
}

fn floor_family(n_max: usize) -> Series {
    Series::from_fn(n_max, |n| (BigUint::one() << n) / BigUint::from(8 * (n * n * n) as u64))
}

#[test]
fn golden_mean_entropy() {
    let oracle = bisect(|x| x + x * x, 0.0, 1.0);
    let lam = entropy(&Series::from_u64s(&[1, 1]), DEFAULT_TOL).unwrap();
    assert!(lam.contains(oracle, 1e-9), "{lam:?} vs {oracle}");
    assert!(lam.width() <= DEFAULT_TOL);
    assert!((lam.estimate - 1.6180339887).abs() < 1e-9);
}

#[test]
fn geometric_series_entropy() {
    let lam = entropy(&Series::from_u64s(&[1; 60]), DEFAULT_TOL).unwrap();
    assert!(lam.contains(2.0, 1e-9), "{lam:?}");
    assert!((lam.estimate - 2.0).abs() < 1e-9);
    let rep = classify(&Series::from_u64s(&[1; 60]), &lam);
    assert_eq!(rep.spr, Spr::Yes);
    assert_eq!(rep.vere_jones, VereJones::PositiveRecurrent);
}

#[test]
fn two_z_classification() {
    let f = Series::from_u64s(&[2, 0, 0, 0, 0, 0]);
    let lam = entropy(&f, DEFAULT_TOL).unwrap();
    assert_eq!(lam.estimate, 2.0);
    let rep = classify(&f, &lam);
    assert_eq!(rep.period, 1);
    assert_eq!(rep.spr, Spr::Yes);
    assert_eq!(rep.vere_jones, VereJones::PositiveRecurrent);
}

#[test]
fn floor_power_over_cube_is_transient_and_not_spr() {
    let f = floor_family(60);
    // Exact partial sum oracle at x = 1/2 stays far below 1.
    let x = num_rational::BigRational::new(1.into(), 2.into());
    assert!(f.eval_partial(&x) < num_rational::BigRational::new(1.into(), 100.into()));
    let lam = entropy(&f, DEFAULT_TOL).unwrap();
    assert_eq!(lam.method, Method::Radius);
    assert!((lam.estimate - 2.0).abs() < 0.02, "{lam:?}");
    let rep = classify(&f, &lam);
    assert_eq!(rep.vere_jones, VereJones::Transient);
    assert_eq!(rep.spr, Spr::No, "{:?}", rep.evidence);
}

mod common;

use loopshift::spectral::{inflate_period, period, strip_period, SpectralError};
use proptest::prelude::*;

#[test]
fn period_and_strip_examples() {
    assert_eq!(period(&Series::from_u64s(&[2])).unwrap(), 1);
    assert_eq!(period(&Series::from_u64s(&[0, 1, 0, 1])).unwrap(), 2);
    assert_eq!(period(&Series::from_u64s(&[0, 0, 1, 0, 1])).unwrap(), 1);
    assert_eq!(strip_period(&Series::from_u64s(&[0, 1, 0, 1]), 2).unwrap(), Series::from_u64s(&[1, 1]));
    assert_eq!(inflate_period(&Series::from_u64s(&[2]), 3), Series::from_u64s(&[0, 0, 2]));
    assert_eq!(
        strip_period(&Series::from_u64s(&[1, 1]), 2),
        Err(SpectralError::PeriodMismatch(1))
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Polynomial inputs, padded with zeros so the tail reads as finite: the
    /// enclosure contains the bisection oracle and SPR implies positive
    /// recurrence.
    #[test]
    fn polynomial_entropy_against_oracle(mut c in prop::collection::vec(0u64..=3, 1..=10)) {
        prop_assume!(c.iter().sum::<u64>() >= 2);
        c.resize(40, 0);
        let f = Series::from_u64s(&c);
        let oracle = common::lambda_bisect(&f);
        let lam = entropy(&f, DEFAULT_TOL).unwrap();
        prop_assert!(lam.contains(oracle, 1e-9), "{:?} vs {}", lam, oracle);
        prop_assert!(lam.width() <= DEFAULT_TOL);
        let rep = classify(&f, &lam);
        if rep.spr == Spr::Yes {
            prop_assert_eq!(rep.vere_jones, VereJones::PositiveRecurrent);
        }
    }

    #[test]
    fn strip_inverts_inflate(c in prop::collection::vec(0u64..=5, 1..=8), p in 1usize..=4) {
        let a = Series::from_u64s(&c);
        prop_assume!(!a.is_zero());
        let inflated = inflate_period(&a, p);
        prop_assert_eq!(strip_period(&inflated, p).unwrap(), a.clone());
        prop_assert_eq!(period(&inflated).unwrap() % p, 0);
    }
}
