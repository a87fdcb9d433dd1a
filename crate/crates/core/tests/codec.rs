mod common;

use loopshift::codec::{
    coding_time_stats, return_time_tail, sample_max_entropy, BlockCode, CodecError, LoopLaw, DEFAULT_MASS_TOL,
};
use loopshift::loopgraph::{Edge, EdgeNamer, LoopRef};
use loopshift::series::Series;
use loopshift::spectral::{entropy, LambdaEnclosure, DEFAULT_TOL};
use loopshift::transform::{almost_iso, loops_lemma_run, LoopsLemmaConfig, PipelineConfig};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Pow};

fn two_z_plus_z2(d: usize) -> Series {
    Series::from_fn(d, |n| BigUint::from(match n {
        1 => 2u32,
        2 => 1,
        _ => 0,
    }))
}

fn deletion_code(f: &Series, budget: usize) -> BlockCode {
    let r: Vec<BigUint> = (1..=f.degree()).map(|n| BigUint::from(u32::from(n == 1))).collect();
    let run = loops_lemma_run(f, &r, &LoopsLemmaConfig::default()).unwrap();
    run.chain.materialize(budget).unwrap()
}

#[test]
fn identity_code_round_trip() {
    let f = Series::from_u64s(&[2, 0, 0, 0, 0]);
    let code = BlockCode::identity(&f, 5);
    let (a, b) = (LoopRef::new(1, 0u32), LoopRef::new(1, 1u32));
    let word = code.encode_loops(&[a.clone(), b.clone(), a.clone()]).unwrap();
    assert_eq!(EdgeNamer::new(&f).word(&word), "a b a");
    assert!(code.verify_injectivity_periodic(5).all_pass());
    let foreign = Edge { lp: LoopRef::new(3, 0u32), pos: 0 };
    assert!(matches!(code.encode(&[foreign]), Err(CodecError::UnknownSymbol(_))));
}

#[test]
fn decode_window_examples() {
    let f = two_z_plus_z2(8);
    let code = deletion_code(&f, 6);
    let names = EdgeNamer::new(&f);
    let a = LoopRef::new(1, 0u32).edges().next().unwrap();
    let b = LoopRef::new(1, 1u32).edges().next().unwrap();
    let c1 = LoopRef::new(2, 0u32).edges().next().unwrap();
    assert_eq!(code.decode_window(&[b.clone(), b.clone(), b.clone()]), Err(CodecError::NoMagicWord));
    assert!(matches!(
        code.decode_window(&[a.clone(), c1.clone(), a.clone()]),
        Err(CodecError::NotInImage(_))
    ));
    let (off, seg) = code.decode_window(&[a.clone(), b.clone(), b.clone(), a.clone()]).unwrap();
    assert_eq!(off, 0);
    assert_eq!(seg, LoopRef::new(3, 0u32).edges().collect::<Vec<_>>());
    assert_eq!(names.word(&code.encode(&seg).unwrap()), "a b b");
}

#[test]
fn two_z_deletion_code_is_injective() {
    let code = deletion_code(&Series::monomial(1, 2, 10), 8);
    let rep = code.verify_injectivity_periodic(8);
    assert!(rep.all_pass(), "{rep:?}");
    assert!(rep.points_checked > 0);
}

#[test]
fn corrupted_symbol_map_is_reported() {
    let mut code = deletion_code(&Series::monomial(1, 2, 10), 6);
    // send the last edge of `ab` to `a`
    let e = LoopRef::new(2, 0u32).edges().nth(1).unwrap();
    let a = LoopRef::new(1, 0u32).edges().next().unwrap();
    code.symbol_map.insert(e, a);
    let rep = code.verify_injectivity_periodic(6);
    assert!(!rep.all_pass());
    assert!(!rep.failures.is_empty());
}

/// Composing explicit stage codes agrees with encoding through the chain.
#[test]
fn composition_equals_chain_encoding() {
    let d = 20;
    let f = Series::monomial(1, 3, d);
    let r: Vec<BigUint> = (1..=d).map(|n| BigUint::from(if n == 1 { 2u32 } else { 0 })).collect();
    let run = loops_lemma_run(&f, &r, &LoopsLemmaConfig::default()).unwrap();
    let chain = &run.chain;
    assert_eq!(chain.levels(), 2);
    let b = 7;
    let composed = chain.stage_code(1, b).unwrap().compose(&chain.stage_code(0, b).unwrap(), vec![]);
    let direct = chain.materialize(b).unwrap();
    assert_eq!(composed.loop_table, direct.loop_table);
    assert_eq!(composed.symbol_map, direct.symbol_map);
}

/// Length frequencies within 3σ of `f_n λ⁻ⁿ`.
#[test]
fn sampling_frequencies() {
    let golden = Series::from_fn(30, |n| BigUint::from(u32::from(n <= 2)));
    let lam = entropy(&golden, DEFAULT_TOL).unwrap();
    let steps = 30_000;
    let path = sample_max_entropy(&golden, &lam, steps, 7).unwrap();
    let m = path.len() as f64;
    let ones = path.iter().filter(|l| l.len == 1).count() as f64;
    let p = 1.0 / 1.618_033_988_749_895;
    let sigma = (m * p * (1.0 - p)).sqrt();
    assert!((ones - m * p).abs() < 3.0 * sigma, "{ones} vs {}", m * p);

    let path = sample_max_entropy(&Series::monomial(1, 2, 10), &LambdaEnclosure::exact(2, 1), 20_000, 8).unwrap();
    let m = path.len() as f64;
    let zeros = path.iter().filter(|l| l.rank == BigUint::from(0u32)).count() as f64;
    let sigma = (m * 0.25).sqrt();
    assert!((zeros - m / 2.0).abs() < 3.0 * sigma);
}

#[test]
fn transient_input_is_not_recurrent() {
    let f = Series::from_fn(60, |n| (BigUint::one() << n) / BigUint::from(8 * (n * n * n) as u64));
    let lam = entropy(&f, DEFAULT_TOL).unwrap();
    assert!(matches!(LoopLaw::new(&f, &lam, DEFAULT_MASS_TOL), Err(CodecError::NotRecurrent { .. })));
}

#[test]
fn return_time_tail_examples() {
    let rep = return_time_tail(&Series::monomial(1, 2, 10), &LambdaEnclosure::exact(2, 1), 6);
    assert_eq!(rep.tails[0], BigRational::one());
    assert!(rep.tails[1..].iter().all(|t| *t == BigRational::from_integer(0.into())));

    // truncated geometric oracle: (2^{1−n} − 2^{−N}) / (1 − 2^{−N})
    let big_n = 60u32;
    let rep = return_time_tail(&Series::from_u64s(&[1; 60]), &LambdaEnclosure::exact(2, 1), 20);
    let half = BigRational::new(1.into(), 2.into());
    let tail_n = half.clone().pow(big_n);
    for n in 1..=20u32 {
        let expect = (half.clone().pow(n - 1) - &tail_n) / (BigRational::one() - &tail_n);
        assert_eq!(rep.tails[n as usize - 1], expect);
    }
    assert!((rep.ratio - 0.5).abs() < 1e-9);
    assert!(rep.exponential);
}

#[test]
fn coding_times_identity_and_determinism() {
    let f = Series::from_u64s(&[2, 0, 0, 0, 0, 0]);
    let id = loopshift::transform::CodeChain::identity(f.clone(), 1);
    let stats = coding_time_stats(&id, &LambdaEnclosure::exact(2, 1), 100, 1).unwrap();
    assert_eq!(stats.histogram.get(&0), Some(&100));

    let d = 30;
    let res = almost_iso(&Series::monomial(1, 2, d), &Series::from_u64s(&[1; 30]), &PipelineConfig::default()).unwrap();
    let lam = entropy(res.left.common_inflated(), DEFAULT_TOL).unwrap();
    let a = coding_time_stats(&res.left, &lam, 500, 42).unwrap();
    let b = coding_time_stats(&res.left, &lam, 500, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.censored, 0);
}
