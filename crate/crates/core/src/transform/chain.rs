use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::codec::{BlockCode, ChainCoder};
use crate::loopgraph::{Edge, LoopRef};
use crate::series::{IntPoly, Series};
use crate::spectral::inflate_period;

use super::split::{SplitStage, StageKind};
use super::TransformError;

/// Loops materialized by [`CodeChain::materialize`] before giving up.
pub const MAX_MATERIALIZED_LOOPS: usize = 200_000;

/// A magic word given as target loops `w₁…w_q`; its symbols are the edges
/// of `w₁…w_{q−1}` followed by the first edge of `w_q`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MagicWord {
    pub loops: Vec<LoopRef>,
}

impl MagicWord {
    pub fn symbol_len(&self) -> usize {
        let q = self.loops.len();
        self.loops[..q - 1].iter().map(|l| l.len).sum::<usize>() + 1
    }

    pub fn symbols(&self, period: usize) -> Vec<Edge> {
        let q = self.loops.len();
        let mut out: Vec<Edge> = self.loops[..q - 1]
            .iter()
            .flat_map(|l| l.inflate(period).edges().collect::<Vec<_>>())
            .collect();
        out.push(self.loops[q - 1].inflate(period).edges().next().unwrap());
        out
    }
}

/// Chain of split stages from a common loop shift down to a target.
/// `stages[0]` has the target as codomain; level `s` is the domain of
/// `stages[s-1]`; the last level is the common shift. Loop lengths are in
/// the period-stripped scale and multiplied by `period` on output.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeChain {
    pub target: Series,
    pub stages: Vec<SplitStage>,
    pub period: usize,
    pub magic: Vec<MagicWord>,
    magic_symbols: Vec<Vec<Edge>>,
    common_inflated: Series,
}

impl CodeChain {
    pub fn new(target: Series, stages: Vec<SplitStage>, period: usize) -> Self {
        let common = stages.last().map(|s| s.domain.clone()).unwrap_or_else(|| target.clone());
        CodeChain {
            common_inflated: inflate_period(&common, period),
            target,
            stages,
            period,
            magic: Vec::new(),
            magic_symbols: Vec::new(),
        }
    }

    pub fn set_magic(&mut self, words: Vec<MagicWord>) {
        self.magic_symbols = words.iter().map(|m| m.symbols(self.period)).collect();
        self.magic = words;
    }

    pub fn magic_symbols(&self) -> &[Vec<Edge>] {
        &self.magic_symbols
    }

    pub fn identity(target: Series, period: usize) -> Self {
        Self::new(target, Vec::new(), period)
    }

    /// Loop counts of the common shift, period-stripped.
    pub fn common(&self) -> &Series {
        self.stages.last().map(|s| &s.domain).unwrap_or(&self.target)
    }

    pub fn common_inflated(&self) -> &Series {
        &self.common_inflated
    }

    pub fn levels(&self) -> usize {
        self.stages.len()
    }

    pub fn stage_count(&self, kind: StageKind) -> usize {
        self.stages.iter().filter(|s| s.kind == kind).count()
    }

    pub fn push(&mut self, stage: SplitStage) {
        debug_assert_eq!(&stage.codomain, self.common());
        self.stages.push(stage);
        self.common_inflated = inflate_period(self.common(), self.period);
        self.magic.clear();
        self.magic_symbols.clear();
    }

    pub fn extend(&mut self, other: CodeChain) {
        for s in other.stages {
            self.push(s);
        }
    }

    /// Target loops spelled by a loop of level `level`.
    pub fn expand_from(&self, level: usize, lp: &LoopRef) -> Vec<LoopRef> {
        self.expand_between(level, 0, lp)
    }

    /// Target loops spelled by a common loop (stripped scale).
    pub fn expand(&self, lp: &LoopRef) -> Vec<LoopRef> {
        self.expand_from(self.levels(), lp)
    }

    /// Lifts a loop of level `from` to level `to ≥ from` as a one-loop word.
    pub fn lift(&self, from: usize, to: usize, lp: &LoopRef) -> Option<LoopRef> {
        let mut cur = lp.clone();
        for s in from..to {
            cur = self.stages[s].rank(&cur, &[])?;
        }
        Some(cur)
    }

    /// Parses target loops into common loops; the sequence must begin and
    /// end at common-loop boundaries.
    pub fn parse(&self, seq: &[LoopRef]) -> Option<Vec<LoopRef>> {
        let mut cur = seq.to_vec();
        for stage in &self.stages {
            cur = stage.parse(&cur)?;
        }
        Some(cur)
    }

    /// Image edges of a common loop given in the inflated scale.
    pub fn image_edges(&self, lp: &LoopRef) -> Vec<Edge> {
        let stripped = LoopRef {
            len: lp.len / self.period,
            rank: lp.rank.clone(),
        };
        self.expand(&stripped)
            .iter()
            .flat_map(|l| l.inflate(self.period).edges().collect::<Vec<_>>())
            .collect()
    }

    /// Explicit one-block code on the common loops of (inflated) length at
    /// most `budget`.
    pub fn materialize(&self, budget: usize) -> Result<BlockCode, TransformError> {
        let common = self.common();
        let stripped_budget = (budget / self.period).min(common.degree());
        let total: BigUint = common.coeffs().iter().take(stripped_budget).sum();
        if total > BigUint::from(MAX_MATERIALIZED_LOOPS) {
            return Err(TransformError::BudgetExceeded(format!(
                "{total} common loops up to length {budget}"
            )));
        }
        let mut table = BTreeMap::new();
        for n in 1..=stripped_budget {
            let c = common.coeff_ref(n).to_u64().unwrap();
            for r in 0..c {
                let lp = LoopRef::new(n, r);
                let img = self.expand(&lp).iter().map(|l| l.inflate(self.period)).collect();
                table.insert(lp.inflate(self.period), img);
            }
        }
        Ok(BlockCode::from_loop_table(table, self.magic_symbols.clone(), budget))
    }

    /// Explicit code of a single stage `s`, level `s+1` into level `s`, with
    /// the stage's smallest `H` loop as magic word.
    pub fn stage_code(&self, s: usize, budget: usize) -> Result<BlockCode, TransformError> {
        let stage = &self.stages[s];
        let stripped_budget = (budget / self.period).min(stage.degree());
        let total: BigUint = stage.domain.coeffs().iter().take(stripped_budget).sum();
        if total > BigUint::from(MAX_MATERIALIZED_LOOPS) {
            return Err(TransformError::BudgetExceeded(format!(
                "{total} domain loops up to length {budget} in stage {s}"
            )));
        }
        let mut table = BTreeMap::new();
        for n in 1..=stripped_budget {
            let c = stage.domain.coeff_ref(n).to_u64().unwrap();
            for r in 0..c {
                let lp = LoopRef::new(n, r);
                let (h, tail) = stage.unrank(&lp);
                let img = std::iter::once(h).chain(tail).map(|l| l.inflate(self.period)).collect();
                table.insert(lp.inflate(self.period), img);
            }
        }
        let magic = stage
            .magic_loop()
            .map(|w| vec![w.inflate(self.period).edges().collect()])
            .unwrap_or_default();
        Ok(BlockCode::from_loop_table(table, magic, budget))
    }

    /// Per-stage (***) counts: stage `s` is certified when the tails of its
    /// domain loops never use the stage's magic loop.
    pub fn stage_certificates(&self, budget: usize) -> Vec<bool> {
        let b = budget / self.period;
        self.stages
            .iter()
            .map(|st| match st.magic_loop() {
                Some(w) => st.star_violations(&w, b).is_zero(),
                None => st.is_identity(),
            })
            .collect()
    }

    /// Counting certificate of (***) for the loop `w` of level `from`
    /// through the stages `from..`: occurrences of symbols of `w` in loop
    /// labels minus those inside an initial copy of `w`, as a series that
    /// must vanish to `budget`.
    pub fn condition_star_residual(&self, from: usize, w: &LoopRef, budget: usize) -> IntPoly {
        let d = (budget / self.period).min(self.common().degree());
        let lw = w.len as i64;
        let mut occ = IntPoly::from_series(&Series::zero(d));
        let mut start = occ.clone();
        if w.len <= d {
            occ.coeffs[w.len] = lw.into();
            start.coeffs[w.len] = lw.into();
        }
        for s in from..self.levels() {
            let st = &self.stages[s];
            let t = IntPoly::from_star(&st.k_series().truncate(d).star());
            let h = IntPoly::from_series(&st.h.truncate(d));
            let mut occ_k = IntPoly::from_series(&Series::zero(d));
            let mut start_k = occ_k.clone();
            for k in st.k.iter().filter(|k| k.len <= d) {
                let word = self.expand_between(s, from, k);
                let hits = word.iter().filter(|l| *l == w).count() as i64;
                occ_k.coeffs[k.len] += hits * lw;
                if word.first() == Some(w) {
                    start_k.coeffs[k.len] += lw;
                }
            }
            let tails = h.mul_trunc(&t, d).mul_trunc(&occ_k, d).mul_trunc(&t, d);
            occ = occ.sub(&occ_k).mul_trunc(&t, d).add(&tails);
            start = start.sub(&start_k).mul_trunc(&t, d);
        }
        occ.sub(&start)
    }

    /// Loops of level `to ≤ level` spelled by a loop of level `level`.
    pub fn expand_between(&self, level: usize, to: usize, lp: &LoopRef) -> Vec<LoopRef> {
        let mut cur = vec![lp.clone()];
        for s in (to..level).rev() {
            let stage = &self.stages[s];
            let mut next = Vec::with_capacity(cur.len());
            for l in &cur {
                let (h, tail) = stage.unrank(l);
                next.push(h);
                next.extend(tail);
            }
            cur = next;
        }
        cur
    }
}

impl ChainCoder for CodeChain {
    fn common(&self) -> &Series {
        &self.common_inflated
    }

    fn image_of(&self, lp: &LoopRef) -> Vec<Edge> {
        self.image_edges(lp)
    }

    fn magic_words(&self) -> &[Vec<Edge>] {
        &self.magic_symbols
    }

    fn is_identity(&self) -> bool {
        self.stages.iter().all(SplitStage::is_identity)
    }
}
