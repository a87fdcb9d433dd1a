//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls the library's own algorithms.
#![allow(dead_code)]

use std::collections::BTreeSet;

use loopshift::series::Series;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Edges `(src, dst)` of the petal graph with `f_n` loops of length `n`
/// through vertex 0.
pub fn petal_edges(f: &[u64]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut next = 1;
    for (i, &c) in f.iter().enumerate() {
        let len = i + 1;
        for _ in 0..c {
            if len == 1 {
                edges.push((0, 0));
                continue;
            }
            let mut prev = 0;
            for _ in 0..len - 1 {
                edges.push((prev, next));
                prev = next;
                next += 1;
            }
            edges.push((prev, 0));
        }
    }
    edges
}

/// All edge sequences `e_0…e_{n−1}` closing up into a cycle, by DFS.
pub fn periodic_sequences(edges: &[(usize, usize)], n: usize) -> Vec<Vec<usize>> {
    fn go(edges: &[(usize, usize)], n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if edges[*cur.last().unwrap()].1 == edges[cur[0]].0 {
                out.push(cur.clone());
            }
            return;
        }
        let at = edges[*cur.last().unwrap()].1;
        for (i, e) in edges.iter().enumerate() {
            if e.0 == at {
                cur.push(i);
                go(edges, n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    for start in 0..edges.len() {
        let mut cur = vec![start];
        go(edges, n, &mut cur, &mut out);
    }
    out
}

fn least_period(s: &[usize]) -> usize {
    let n = s.len();
    (1..=n).find(|&p| n.is_multiple_of(p) && (0..n).all(|i| s[i] == s[(i + p) % n])).unwrap()
}

/// `(Fix_n, O_n)` by explicit enumeration of periodic points.
pub fn brute_fix_and_orbits(edges: &[(usize, usize)], n: usize) -> (u64, u64) {
    let seqs = periodic_sequences(edges, n);
    let mut orbits = BTreeSet::new();
    for s in &seqs {
        if least_period(s) == n {
            let canon = (0..n).map(|r| [&s[r..], &s[..r]].concat()).min().unwrap();
            orbits.insert(canon);
        }
    }
    (seqs.len() as u64, orbits.len() as u64)
}

/// `Fix_n = n·[zⁿ](−log(1 − f)) = n Σ_k [zⁿ]f^k / k`.
pub fn fix_via_log(f: &Series) -> Vec<BigInt> {
    let d = f.degree();
    let fc: Vec<BigInt> = (0..=d).map(|n| if n == 0 { BigInt::zero() } else { f.coeff(n).into() }).collect();
    let mut pow = fc.clone();
    let mut log = vec![BigRational::zero(); d + 1];
    for k in 1..=d {
        for n in 1..=d {
            if !pow[n].is_zero() {
                log[n] += BigRational::new(pow[n].clone(), BigInt::from(k));
            }
        }
        pow = naive_mul(&pow, &fc, d);
    }
    (1..=d)
        .map(|n| {
            let v = &log[n] * BigRational::from_integer(BigInt::from(n));
            assert!(v.is_integer());
            v.to_integer()
        })
        .collect()
}

pub fn naive_mul(a: &[BigInt], b: &[BigInt], d: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); d + 1];
    for i in 0..=d.min(a.len() - 1) {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..=(d - i).min(b.len() - 1) {
            out[i + j] += &a[i] * &b[j];
        }
    }
    out
}

pub fn mobius_naive(n: usize) -> i64 {
    let mut m = n;
    let mut sign = 1;
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

/// Orbit counts by Möbius inversion of `Fix`.
pub fn orbits_from_fix(fix: &[BigInt]) -> Vec<BigInt> {
    (1..=fix.len())
        .map(|n| {
            let s: BigInt = (1..=n)
                .filter(|d| n % d == 0)
                .map(|d| BigInt::from(mobius_naive(n / d)) * &fix[d - 1])
                .sum();
            assert!((&s % BigInt::from(n)).is_zero());
            s / BigInt::from(n)
        })
        .collect()
}

fn binom(n: &BigInt, k: usize) -> BigInt {
    let mut out = BigInt::one();
    for i in 0..k {
        out = out * (n - BigInt::from(i)) / BigInt::from(i + 1);
    }
    out
}

/// Coefficients `0..=d` of `∏_{n≤d}(1 − zⁿ)^{e_n}` with `e_n ≥ 0`.
pub fn product_oracle(e: &[BigInt], d: usize) -> Vec<BigInt> {
    let mut acc = vec![BigInt::zero(); d + 1];
    acc[0] = BigInt::one();
    for (i, en) in e.iter().enumerate().take(d) {
        let n = i + 1;
        assert!(!en.is_negative());
        if en.is_zero() {
            continue;
        }
        let mut factor = vec![BigInt::zero(); d + 1];
        for j in 0..=d / n {
            let c = binom(en, j);
            factor[n * j] = if j % 2 == 0 { c } else { -c };
        }
        acc = naive_mul(&acc, &factor, d);
    }
    acc
}

pub fn one_minus(f: &Series, d: usize) -> Vec<BigInt> {
    (0..=d)
        .map(|n| {
            if n == 0 {
                BigInt::one()
            } else {
                -BigInt::from(f.coeff(n))
            }
        })
        .collect()
}

/// Series with `f_n` uniform in `0..=max` for `n ≤ support`, zero beyond.
pub fn random_series(rng: &mut ChaCha8Rng, degree: usize, support: usize, max: u64) -> Series {
    loop {
        let f = Series::from_fn(degree, |n| {
            if n <= support {
                BigUint::from(rng.gen_range(0..=max))
            } else {
                BigUint::zero()
            }
        });
        if !f.is_zero() {
            return f;
        }
    }
}

/// Root of `Σ f_n xⁿ = 1` on `(0, 1)` by plain f64 bisection; returns `1/x`.
pub fn lambda_bisect(f: &Series) -> f64 {
    let g = |x: f64| -> f64 {
        f.coeffs().iter().enumerate().map(|(i, c)| c.to_f64().unwrap() * x.powi(i as i32 + 1)).sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
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

/// Perron root of a nonnegative irreducible matrix: power iteration on
/// `A + I`, which is primitive with spectral radius `ρ(A) + 1`.
pub fn perron_root(a: &[Vec<u64>]) -> f64 {
    let n = a.len();
    let mut v = vec![1.0f64; n];
    let mut rho = 0.0;
    for _ in 0..200_000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[i] = v[i];
            for j in 0..n {
                w[i] += a[i][j] as f64 * v[j];
            }
        }
        // v is normalized to max 1, so the max of w estimates the root
        let norm = w.iter().cloned().fold(0.0, f64::max);
        for x in w.iter_mut() {
            *x /= norm;
        }
        let change = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rho = norm;
        v = w;
        if change < 1e-15 {
            break;
        }
    }
    rho - 1.0
}

/// Every vertex reaches and is reached from every other.
pub fn is_irreducible(a: &[Vec<u64>]) -> bool {
    let n = a.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let e = if forward { a[u][v] } else { a[v][u] };
                if e > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(true) && reach(false)
}

/// First-return counts to `vertex` by explicit path enumeration.
pub fn first_return_dfs(a: &[Vec<u64>], vertex: usize, degree: usize) -> Vec<u64> {
    fn go(a: &[Vec<u64>], vertex: usize, at: usize, len: usize, weight: u64, degree: usize, out: &mut [u64]) {
        for (v, &m) in a[at].iter().enumerate() {
            if m == 0 {
                continue;
            }
            if v == vertex {
                out[len] += weight * m;
            } else if len < degree {
                go(a, vertex, v, len + 1, weight * m, degree, out);
            }
        }
    }
    let mut out = vec![0u64; degree + 1];
    go(a, vertex, vertex, 1, 1, degree, &mut out);
    out[1..].to_vec()
}

pub fn random_irreducible(rng: &mut ChaCha8Rng, max_size: usize, max_entry: u64) -> Vec<Vec<u64>> {
    loop {
        let n = rng.gen_range(1..=max_size);
        let a: Vec<Vec<u64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.gen_bool(0.45) { rng.gen_range(1..=max_entry) } else { 0 })
                    .collect()
            })
            .collect();
        if is_irreducible(&a) {
            return a;
        }
    }
}

/// Random `(f, R)` satisfying the magic-word condition: `f` is supported on
/// `n ≤ 8` with `f_n ≤ 3`, plus optionally `c·z^a/(1 − z)`; `R_n ≤ f_n` on
/// `n ≤ degree/2` with `R_{r₁} < f_{r₁}` and `Σ n·R_n ≤ 16`.
pub fn random_admissible(rng: &mut ChaCha8Rng, degree: usize) -> (Series, Vec<BigUint>) {
    loop {
        let tail = if rng.gen_bool(0.5) { Some((rng.gen_range(1..=2u32), rng.gen_range(3..=8usize))) } else { None };
        let f = Series::from_fn(degree, |n| {
            let mut c = if n <= 8 && rng.gen_bool(0.6) { rng.gen_range(0..=3u32) } else { 0 };
            if let Some((k, a)) = tail {
                if n >= a {
                    c += k;
                }
            }
            BigUint::from(c)
        });
        let mut r = vec![BigUint::zero(); degree];
        let mut weight = 0;
        for _ in 0..rng.gen_range(1..=4) {
            let n = rng.gen_range(1..=degree / 2);
            if weight + n > 16 || r[n - 1] >= f.coeff(n) {
                continue;
            }
            r[n - 1] += 1u32;
            weight += n;
        }
        let Some(r1) = r.iter().position(|c| !c.is_zero()) else { continue };
        if r[r1] < f.coeff(r1 + 1) && lambda_bisect(&f) > 1.05 {
            return (f, r);
        }
    }
}
