//! Labeled loop graphs, single-loop deletion, condition (***) and
//! first-return series of finite graphs.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::Series;

/// Upper bound on the number of loops an explicit graph may hold.
pub const MAX_EXPLICIT_LOOPS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoopGraphError {
    #[error("loop not present in the graph")]
    LoopNotFound,
    #[error("budget {budget} exceeds series degree {degree}")]
    BudgetExceedsDegree { budget: usize, degree: usize },
    #[error("explicit loop set would exceed {0} loops")]
    TooManyLoops(usize),
    #[error("state {0} is not bi-reachable from the base vertex")]
    NotIrreducible(usize),
    #[error("adjacency matrix is not square or vertex out of range")]
    BadMatrix,
}

/// The `rank`-th loop of length `len` in some loop graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LoopRef {
    pub len: usize,
    pub rank: BigUint,
}

impl LoopRef {
    pub fn new(len: usize, rank: impl Into<BigUint>) -> Self {
        LoopRef {
            len,
            rank: rank.into(),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.len).map(move |pos| Edge {
            lp: self.clone(),
            pos,
        })
    }

    /// Same loop in the `p`-fold inflated graph.
    pub fn inflate(&self, p: usize) -> LoopRef {
        LoopRef {
            len: self.len * p,
            rank: self.rank.clone(),
        }
    }
}

impl fmt::Display for LoopRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}.{}", self.len, self.rank)
    }
}

/// Edge `pos` of a loop; the symbols of every loop shift here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub lp: LoopRef,
    pub pos: usize,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lp, self.pos)
    }
}

/// Letter names `a, b, …, z, aa, ab, …` for base loops in `(len, rank)` order.
pub fn base_name(index: usize) -> String {
    let mut n = index;
    let mut out = Vec::new();
    loop {
        out.push((b'a' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.iter().rev().collect()
}

/// Names edges of a base graph: `a` for a one-edge loop, `c1 c2` otherwise.
#[derive(Debug, Clone)]
pub struct EdgeNamer {
    offsets: Vec<BigUint>,
}

impl EdgeNamer {
    pub fn new(f: &Series) -> Self {
        let mut offsets = vec![BigUint::zero()];
        let mut acc = BigUint::zero();
        for c in f.coeffs() {
            acc += c;
            offsets.push(acc.clone());
        }
        EdgeNamer { offsets }
    }

    pub fn loop_name(&self, lp: &LoopRef) -> String {
        match self.offsets.get(lp.len - 1).map(|o| o + &lp.rank).and_then(|i| i.to_usize()) {
            Some(i) => base_name(i),
            None => lp.to_string(),
        }
    }

    pub fn edge_name(&self, e: &Edge) -> String {
        let base = self.loop_name(&e.lp);
        if e.lp.len == 1 {
            base
        } else {
            format!("{base}{}", e.pos + 1)
        }
    }

    pub fn word(&self, w: &[Edge]) -> String {
        w.iter().map(|e| self.edge_name(e)).collect::<Vec<_>>().join(" ")
    }
}

/// A loop as a word over base loops, with its edge label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loop {
    pub word: Vec<LoopRef>,
    pub label: Vec<Edge>,
}

impl Loop {
    pub fn base(lp: LoopRef) -> Self {
        Loop {
            label: lp.edges().collect(),
            word: vec![lp],
        }
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    fn concat_pow(&self, l: &Loop, n: usize) -> Loop {
        let mut word = self.word.clone();
        let mut label = self.label.clone();
        for _ in 0..n {
            word.extend(l.word.iter().cloned());
            label.extend(l.label.iter().cloned());
        }
        Loop { word, label }
    }
}

/// Loops sorted by `(length, label)`, complete up to `budget`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledLoopGraph {
    pub base: Series,
    pub loops: Vec<Loop>,
    pub budget: usize,
    pub deleted: Vec<Loop>,
}

impl LabeledLoopGraph {
    pub fn from_series(f: &Series, budget: usize) -> Result<Self, LoopGraphError> {
        if budget > f.degree() {
            return Err(LoopGraphError::BudgetExceedsDegree {
                budget,
                degree: f.degree(),
            });
        }
        let total: BigUint = f.coeffs().iter().take(budget).sum();
        if total > BigUint::from(MAX_EXPLICIT_LOOPS) {
            return Err(LoopGraphError::TooManyLoops(MAX_EXPLICIT_LOOPS));
        }
        let mut loops = Vec::new();
        for n in 1..=budget {
            let c = f.coeff_ref(n).to_usize().unwrap();
            for r in 0..c {
                loops.push(Loop::base(LoopRef::new(n, r as u64)));
            }
        }
        Ok(LabeledLoopGraph {
            base: f.clone(),
            loops,
            budget,
            deleted: Vec::new(),
        })
    }

    pub fn contains(&self, l: &Loop) -> bool {
        self.loops.binary_search_by(|x| cmp_loops(x, l)).is_ok()
    }

    /// Lexicographically smallest loop of length `len` satisfying `pred`.
    pub fn smallest(&self, len: usize, pred: impl Fn(&Loop) -> bool) -> Option<&Loop> {
        self.loops.iter().find(|l| l.len() == len && pred(l))
    }

    /// Replaces the loop set by `{ c·lⁿ : c ≠ l }` up to the budget.
    pub fn delete_loop_step(&self, l: &Loop) -> Result<Self, LoopGraphError> {
        if !self.contains(l) {
            return Err(LoopGraphError::LoopNotFound);
        }
        let mut loops = Vec::new();
        for c in self.loops.iter().filter(|c| *c != l) {
            let mut n = 0;
            while c.len() + n * l.len() <= self.budget {
                loops.push(c.concat_pow(l, n));
                if loops.len() > MAX_EXPLICIT_LOOPS {
                    return Err(LoopGraphError::TooManyLoops(MAX_EXPLICIT_LOOPS));
                }
                n += 1;
            }
        }
        loops.sort_by(cmp_loops);
        let mut deleted = self.deleted.clone();
        deleted.push(l.clone());
        Ok(LabeledLoopGraph {
            base: self.base.clone(),
            loops,
            budget: self.budget,
            deleted,
        })
    }

    /// Number of loops of each length `1..=budget`.
    pub fn census(&self) -> Vec<BigUint> {
        let mut out = vec![BigUint::zero(); self.budget];
        for l in &self.loops {
            out[l.len() - 1] += 1u32;
        }
        out
    }

    /// Condition (***): symbols of `w` occur only inside a prefix equal to `w`.
    pub fn check_condition_star(&self, w: &Loop) -> bool {
        self.condition_star_violation(w).is_none()
    }

    /// First loop breaking (***) for `w`, if any.
    pub fn condition_star_violation(&self, w: &Loop) -> Option<&Loop> {
        let symbols: BTreeSet<&Edge> = w.label.iter().collect();
        self.loops.iter().find(|l| {
            let prefix_ok = l.label.starts_with(&w.label);
            l.label
                .iter()
                .enumerate()
                .any(|(i, e)| symbols.contains(e) && !(prefix_ok && i < w.len()))
        })
    }

    /// All labels are pairwise distinct.
    pub fn labels_distinct(&self) -> bool {
        self.loops.windows(2).all(|p| p[0].label != p[1].label)
    }
}

fn cmp_loops(a: &Loop, b: &Loop) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.label.cmp(&b.label))
}

/// Checks that every state is reachable from and co-reachable to `vertex`.
pub fn check_irreducible(adj: &[Vec<u64>], vertex: usize) -> Result<(), LoopGraphError> {
    let n = adj.len();
    if vertex >= n || adj.iter().any(|r| r.len() != n) {
        return Err(LoopGraphError::BadMatrix);
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![vertex];
        seen[vertex] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward { adj[u][v] } else { adj[v][u] };
                if w > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    match (0..n).find(|&v| !fwd[v] || !bwd[v]) {
        Some(v) => Err(LoopGraphError::NotIrreducible(v)),
        None => Ok(()),
    }
}

/// `f_n` = number of paths of length `n` from `vertex` back to it that avoid
/// `vertex` in between, with edge multiplicities.
pub fn first_return_series(adj: &[Vec<u64>], vertex: usize, degree: usize) -> Result<Series, LoopGraphError> {
    check_irreducible(adj, vertex)?;
    let n = adj.len();
    let a = |u: usize, v: usize| BigUint::from(adj[u][v]);
    // paths[u] = walks vertex → u of the current length avoiding vertex after the start
    let mut paths: Vec<BigUint> = (0..n).map(|u| if u == vertex { BigUint::zero() } else { a(vertex, u) }).collect();
    let mut coeffs = vec![a(vertex, vertex)];
    for _ in 2..=degree {
        let back: BigUint = (0..n).filter(|&u| u != vertex).map(|u| &paths[u] * a(u, vertex)).sum();
        coeffs.push(back);
        let mut next = vec![BigUint::zero(); n];
        for u in (0..n).filter(|&u| u != vertex) {
            if paths[u].is_zero() {
                continue;
            }
            for v in (0..n).filter(|&v| v != vertex) {
                if adj[u][v] > 0 {
                    next[v] += &paths[u] * a(u, v);
                }
            }
        }
        paths = next;
    }
    coeffs.truncate(degree);
    Ok(Series::new(coeffs).expect("degree at least 1"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(base_name(0), "a");
        assert_eq!(base_name(25), "z");
        assert_eq!(base_name(26), "aa");
        let namer = EdgeNamer::new(&Series::from_u64s(&[2, 1]));
        let c = LoopRef::new(2, 0u32);
        let w: Vec<Edge> = c.edges().collect();
        assert_eq!(namer.word(&w), "c1 c2");
    }

    #[test]
    fn from_series_examples() {
        let g = LabeledLoopGraph::from_series(&Series::from_u64s(&[2, 0, 0]), 3).unwrap();
        assert_eq!(g.loops.len(), 2);
        let g = LabeledLoopGraph::from_series(&Series::from_u64s(&[1, 1]), 2).unwrap();
        assert_eq!(g.loops.len(), 2);
        assert_eq!(g.loops[1].len(), 2);
        let g = LabeledLoopGraph::from_series(&Series::zero(4), 4).unwrap();
        assert!(g.loops.is_empty());
    }

    #[test]
    fn star_violation_is_detected() {
        // labels a, b a b in a graph from 2z; W = a
        let f = Series::from_u64s(&[2, 0, 0]);
        let mut g = LabeledLoopGraph::from_series(&f, 3).unwrap();
        let a = Loop::base(LoopRef::new(1, 0u32));
        let b = Loop::base(LoopRef::new(1, 1u32));
        let bab = b.concat_pow(&a, 1).concat_pow(&b, 1);
        g.loops = vec![a.clone(), bab];
        assert!(!g.check_condition_star(&a));
    }

    #[test]
    fn irreducibility() {
        assert!(first_return_series(&[vec![1, 1], vec![0, 1]], 0, 4).is_err());
        assert_eq!(
            first_return_series(&[vec![0, 1], vec![2, 0]], 0, 4).unwrap(),
            Series::from_u64s(&[0, 2, 0, 0])
        );
    }
}
