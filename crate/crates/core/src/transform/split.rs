//! Structural form of a splitting stage `f = h + k`.
//!
//! Codomain loops are `LoopRef`s `(len, rank)`. `K` is a finite list of
//! codomain loops and `H` is everything else. A domain loop is `h·k₁…k_r`
//! with `h ∈ H`, `kᵢ ∈ K`, ranked by the length of `h`, then the index of `h`
//! within `H`, then the tail in lexicographic order over the list `K`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::loopgraph::LoopRef;
use crate::series::{IntPoly, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StageKind {
    /// Removes one loop of the shortest length.
    ShortLoop,
    /// Splits off the block `b` of gap preparation.
    Gap,
    /// Deletes one lifted base loop.
    LoopDeletion,
    /// A caller-supplied split.
    Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitStage {
    pub kind: StageKind,
    /// Loop counts of the codomain.
    pub codomain: Series,
    /// `K`, sorted by `(len, rank)`.
    pub k: Vec<LoopRef>,
    /// `H = codomain − K` as counts.
    pub h: Series,
    /// `T_t` = number of `K`-words of total length `t`, `t = 0..=N`.
    pub tails: Vec<BigUint>,
    /// Loop counts of the domain, `h·k*`.
    pub domain: Series,
}

impl SplitStage {
    /// Builds the stage; `k` must list distinct codomain loops.
    pub fn new(kind: StageKind, codomain: &Series, mut k: Vec<LoopRef>) -> Self {
        k.sort();
        k.dedup();
        let d = codomain.degree();
        let kser = Series::from_fn(d, |n| BigUint::from(k.iter().filter(|l| l.len == n).count()));
        for l in &k {
            assert!(l.len <= d && l.rank < codomain.coeff(l.len), "K loop {l} not in codomain");
        }
        let h = codomain.sub_checked(&kser).expect("K is a subset of the codomain");
        let star = kser.star();
        let mut tails = vec![BigUint::one()];
        tails.extend(star.tail().coeffs().iter().cloned());
        let domain = star.apply(&h);
        SplitStage {
            kind,
            codomain: codomain.clone(),
            k,
            h,
            tails,
            domain,
        }
    }

    pub fn degree(&self) -> usize {
        self.codomain.degree()
    }

    pub fn k_series(&self) -> Series {
        let d = self.degree();
        Series::from_fn(d, |n| BigUint::from(self.k.iter().filter(|l| l.len == n).count()))
    }

    pub fn is_identity(&self) -> bool {
        self.k.is_empty()
    }

    fn k_ranks(&self, len: usize) -> impl Iterator<Item = &BigUint> {
        self.k.iter().filter(move |l| l.len == len).map(|l| &l.rank)
    }

    /// Codomain rank of the `idx`-th `H` loop of length `len`.
    pub fn h_rank(&self, len: usize, idx: &BigUint) -> BigUint {
        let mut r = idx.clone();
        for kr in self.k_ranks(len) {
            if *kr <= r {
                r += 1u32;
            } else {
                break;
            }
        }
        r
    }

    /// Index within `H` of a codomain loop, or `None` if it lies in `K`.
    pub fn h_index(&self, lp: &LoopRef) -> Option<BigUint> {
        let mut below = 0u64;
        for kr in self.k_ranks(lp.len) {
            if *kr == lp.rank {
                return None;
            }
            if *kr < lp.rank {
                below += 1;
            }
        }
        Some(&lp.rank - BigUint::from(below))
    }

    pub fn k_position(&self, lp: &LoopRef) -> Option<usize> {
        self.k.iter().position(|l| l == lp)
    }

    /// Decomposes a domain loop into `h` and its `K`-tail.
    pub fn unrank(&self, lp: &LoopRef) -> (LoopRef, Vec<LoopRef>) {
        let n = lp.len;
        assert!(n >= 1 && n <= self.degree(), "domain loop {lp} beyond degree");
        let mut r = lp.rank.clone();
        for m in 1..=n {
            let hm = self.h.coeff_ref(m);
            let t = &self.tails[n - m];
            if hm.is_zero() || t.is_zero() {
                continue;
            }
            let block = hm * t;
            if r < block {
                let idx = &r / t;
                let trank = &r % t;
                let h = LoopRef {
                    len: m,
                    rank: self.h_rank(m, &idx),
                };
                return (h, self.unrank_tail(n - m, trank));
            }
            r -= block;
        }
        panic!("rank {} out of range for domain length {n}", lp.rank);
    }

    fn unrank_tail(&self, mut t: usize, mut r: BigUint) -> Vec<LoopRef> {
        let mut out = Vec::new();
        'outer: while t > 0 {
            for k in &self.k {
                if k.len > t {
                    continue;
                }
                let block = &self.tails[t - k.len];
                if r < *block {
                    out.push(k.clone());
                    t -= k.len;
                    continue 'outer;
                }
                r -= block;
            }
            panic!("tail rank out of range");
        }
        out
    }

    /// Inverse of [`unrank`](Self::unrank); `None` if `h` is in `K` or a tail
    /// entry is not.
    pub fn rank(&self, h: &LoopRef, tail: &[LoopRef]) -> Option<LoopRef> {
        let idx = self.h_index(h)?;
        let tlen: usize = tail.iter().map(|l| l.len).sum();
        let n = h.len + tlen;
        if n > self.degree() {
            return None;
        }
        let mut r = BigUint::zero();
        for m in 1..h.len {
            r += self.h.coeff_ref(m) * &self.tails[n - m];
        }
        r += idx * &self.tails[tlen];
        let mut t = tlen;
        for k in tail {
            let pos = self.k_position(k)?;
            for kk in &self.k[..pos] {
                if kk.len <= t {
                    r += &self.tails[t - kk.len];
                }
            }
            t -= k.len;
        }
        Some(LoopRef { len: n, rank: r })
    }

    /// Parses a codomain loop sequence into domain loops; the sequence must
    /// start with an `H` loop and end at the end of a tail.
    pub fn parse(&self, seq: &[LoopRef]) -> Option<Vec<LoopRef>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < seq.len() {
            let h = &seq[i];
            self.h_index(h)?;
            let mut j = i + 1;
            while j < seq.len() && self.k_position(&seq[j]).is_some() {
                j += 1;
            }
            out.push(self.rank(h, &seq[i + 1..j])?);
            i = j;
        }
        Some(out)
    }

    /// Counting certificate for (***) with `w` = the stage's magic loop:
    /// number of domain loops up to `budget` whose label meets `w` away from
    /// the initial position. Zero certifies the condition.
    pub fn star_violations(&self, w: &LoopRef, budget: usize) -> IntPoly {
        let d = budget.min(self.degree());
        let k = self.k_series().truncate(d);
        let in_k = self.k_position(w).is_some();
        let mut k_without = k.clone();
        if in_k {
            k_without = k
                .sub_checked(&Series::monomial(w.len, 1, d))
                .expect("w counted in K");
        }
        // h · (k* − (k∖w)*) counts tails that use w.
        let with = IntPoly::from_star(&k.star());
        let without = IntPoly::from_star(&k_without.star());
        IntPoly::from_series(&self.h.truncate(d)).mul_trunc(&with.sub(&without), d)
    }

    /// Smallest `H` loop, the stage's own magic word.
    pub fn magic_loop(&self) -> Option<LoopRef> {
        (1..=self.degree()).find_map(|m| {
            if self.h.coeff_ref(m).is_zero() {
                None
            } else {
                Some(LoopRef {
                    len: m,
                    rank: self.h_rank(m, &BigUint::zero()),
                })
            }
        })
    }
}

/// Lowest-rank loops of the given lengths, `counts[n-1]` of length `n`.
pub fn lowest_loops(counts: &Series) -> Vec<LoopRef> {
    let mut out = Vec::new();
    for n in 1..=counts.degree() {
        let c = counts.coeff_ref(n).to_u64().expect("small K");
        for r in 0..c {
            out.push(LoopRef::new(n, r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_unrank_round_trip() {
        let f = Series::from_u64s(&[2, 1, 3, 2, 5, 4, 6, 7]);
        let stage = SplitStage::new(StageKind::Split, &f, vec![LoopRef::new(1, 1u32), LoopRef::new(3, 0u32)]);
        for n in 1..=8 {
            let c = stage.domain.coeff(n).to_u64().unwrap();
            for r in 0..c {
                let lp = LoopRef::new(n, r);
                let (h, tail) = stage.unrank(&lp);
                assert!(stage.h_index(&h).is_some());
                assert_eq!(h.len + tail.iter().map(|l| l.len).sum::<usize>(), n);
                assert_eq!(stage.rank(&h, &tail), Some(lp));
            }
        }
    }

    #[test]
    fn deleting_a_loop_of_2z() {
        let f = Series::from_u64s(&[2, 0, 0, 0]);
        let stage = SplitStage::new(StageKind::ShortLoop, &f, vec![LoopRef::new(1, 0u32)]);
        assert_eq!(stage.domain, Series::from_u64s(&[1, 1, 1, 1]));
        let (h, tail) = stage.unrank(&LoopRef::new(3, 0u32));
        assert_eq!(h, LoopRef::new(1, 1u32));
        assert_eq!(tail, vec![LoopRef::new(1, 0u32); 2]);
        assert!(stage.star_violations(&LoopRef::new(1, 1u32), 4).is_zero());
        assert!(!stage.star_violations(&LoopRef::new(1, 0u32), 4).is_zero());
    }
}
