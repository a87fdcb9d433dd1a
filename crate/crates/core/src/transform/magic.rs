//! Exact magic-word verification for a chain of split stages.
//!
//! Words are handled over target loops. Loops that occur in no `K`
//! expansion behave identically in every level language and share the
//! letter `0`. `L_0` is the set of one-letter words and
//! `L_s = (L_{s−1} ∖ K_s)·K_s*`. A word `W` is magic for the chain when, for
//! every stage, no occurrence can start at a position that is not a level-`s`
//! loop boundary, i.e. `W` is not a prefix of
//! `(Suf⁺(L_{s−1}) ∪ K_s)·L_{s−1}*`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::ToPrimitive;

use crate::loopgraph::LoopRef;

use super::chain::{CodeChain, MagicWord};
use super::TransformError;

/// Common loops whose expansions seed the candidate list.
const CANDIDATE_LOOPS: usize = 64;
/// DFA size past which verification gives up.
const MAX_DFA_STATES: usize = 200_000;

#[derive(Debug, Clone)]
struct Dfa {
    start: usize,
    accept: Vec<bool>,
    trans: Vec<Vec<usize>>,
    live: Vec<bool>,
}

impl Dfa {
    fn one_letter(letters: usize) -> Dfa {
        // 0 start, 1 accept, 2 dead
        Dfa {
            start: 0,
            accept: vec![false, true, false],
            trans: vec![vec![1; letters], vec![2; letters], vec![2; letters]],
            live: vec![true, true, false],
        }
    }

    fn states(&self) -> usize {
        self.accept.len()
    }

    fn compute_live(&mut self) {
        let n = self.states();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (q, row) in self.trans.iter().enumerate() {
            for &r in row {
                rev[r].push(q);
            }
        }
        let mut live = self.accept.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&q| live[q]).collect();
        while let Some(q) = queue.pop_front() {
            for &p in &rev[q] {
                if !live[p] {
                    live[p] = true;
                    queue.push_back(p);
                }
            }
        }
        self.live = live;
    }

    /// Moore partition refinement.
    fn minimize(&self) -> Dfa {
        let n = self.states();
        let letters = self.trans.first().map(Vec::len).unwrap_or(0);
        let mut class: Vec<usize> = self.accept.iter().map(|&a| a as usize).collect();
        let mut count = class.iter().collect::<BTreeSet<_>>().len();
        loop {
            let mut sig: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
            let mut next = vec![0; n];
            for q in 0..n {
                let key = (class[q], self.trans[q].iter().map(|&r| class[r]).collect::<Vec<_>>());
                let len = sig.len();
                next[q] = *sig.entry(key).or_insert(len);
            }
            let new_count = sig.len();
            class = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let mut trans = vec![vec![0; letters]; count];
        let mut accept = vec![false; count];
        for q in 0..n {
            trans[class[q]] = self.trans[q].iter().map(|&r| class[r]).collect();
            accept[class[q]] = self.accept[q];
        }
        let mut out = Dfa {
            start: class[self.start],
            accept,
            trans,
            live: Vec::new(),
        };
        out.compute_live();
        out
    }

    /// States reachable from the start by at least one letter.
    fn reach_plus(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states()];
        let mut queue = VecDeque::new();
        for &r in &self.trans[self.start] {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
        while let Some(q) = queue.pop_front() {
            for &r in &self.trans[q] {
                if !seen[r] {
                    seen[r] = true;
                    queue.push_back(r);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Default)]
struct Trie {
    children: Vec<BTreeMap<usize, usize>>,
    end: Vec<bool>,
}

impl Trie {
    fn new(words: &[Vec<usize>]) -> Trie {
        let mut t = Trie {
            children: vec![BTreeMap::new()],
            end: vec![false],
        };
        for w in words {
            let mut node = 0;
            for &x in w {
                node = match t.children[node].get(&x) {
                    Some(&c) => c,
                    None => {
                        t.children.push(BTreeMap::new());
                        t.end.push(false);
                        let c = t.children.len() - 1;
                        t.children[node].insert(x, c);
                        c
                    }
                };
            }
            t.end[node] = true;
        }
        t
    }

    fn child(&self, node: usize, x: usize) -> Option<usize> {
        self.children[node].get(&x).copied()
    }
}

/// Level languages and `K` tries of a chain, over a shared letter map.
pub(crate) struct ChainAutomata {
    letters: BTreeMap<LoopRef, usize>,
    languages: Vec<Dfa>,
    tries: Vec<Trie>,
}

impl ChainAutomata {
    pub(crate) fn new(chain: &CodeChain) -> Result<Self, TransformError> {
        let k_words: Vec<Vec<Vec<LoopRef>>> = chain
            .stages
            .iter()
            .enumerate()
            .map(|(s, st)| st.k.iter().map(|k| chain.expand_from(s, k)).collect())
            .collect();
        let mut letters = BTreeMap::new();
        for w in k_words.iter().flatten().flatten() {
            let next = letters.len() + 1;
            letters.entry(w.clone()).or_insert(next);
        }
        let alphabet = letters.len() + 1;
        let tries: Vec<Trie> = k_words
            .iter()
            .map(|ws| {
                let coded: Vec<Vec<usize>> = ws.iter().map(|w| w.iter().map(|l| letters[l]).collect()).collect();
                Trie::new(&coded)
            })
            .collect();
        let mut languages = vec![Dfa::one_letter(alphabet)];
        for trie in tries.iter().take(tries.len().saturating_sub(1)) {
            let next = next_language(languages.last().unwrap(), trie, alphabet)?;
            languages.push(next);
        }
        Ok(ChainAutomata {
            letters,
            languages,
            tries,
        })
    }

    fn letter(&self, l: &LoopRef) -> usize {
        self.letters.get(l).copied().unwrap_or(0)
    }

    /// First stage (1-based) at which `w` can start off a loop boundary.
    pub(crate) fn violation(&self, w: &[LoopRef]) -> Option<usize> {
        let word: Vec<usize> = w.iter().map(|l| self.letter(l)).collect();
        (0..self.tries.len()).find(|&s| stage_violated(&self.languages[s], &self.tries[s], &word)).map(|s| s + 1)
    }
}

/// DFA of `(L ∖ K)·K*` from the DFA of `L` and the trie of `K`.
fn next_language(prev: &Dfa, trie: &Trie, alphabet: usize) -> Result<Dfa, TransformError> {
    // State: the deterministic L∖K part (None once dead) and a set of K* trie nodes.
    type State = (Option<(usize, Option<usize>)>, BTreeSet<usize>);
    let close = |mut st: State| -> State {
        if let Some((q, t)) = st.0 {
            let in_k = t.map(|t| trie.end[t]).unwrap_or(false);
            if prev.accept[q] && !in_k {
                st.1.insert(0);
            }
        }
        let ends: Vec<usize> = st.1.iter().copied().filter(|&n| trie.end[n]).collect();
        if !ends.is_empty() {
            st.1.insert(0);
        }
        st
    };
    let start: State = (Some((prev.start, Some(0))), BTreeSet::new());
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states: Vec<State> = Vec::new();
    let mut trans: Vec<Vec<usize>> = Vec::new();
    index.insert(start.clone(), 0);
    states.push(start);
    let mut i = 0;
    while i < states.len() {
        let (a, b) = states[i].clone();
        let mut row = Vec::with_capacity(alphabet);
        for x in 0..alphabet {
            let na = a.and_then(|(q, t)| {
                let q2 = prev.trans[q][x];
                if prev.live[q2] {
                    Some((q2, t.and_then(|t| trie.child(t, x))))
                } else {
                    None
                }
            });
            let nb: BTreeSet<usize> = b.iter().filter_map(|&n| trie.child(n, x)).collect();
            let st = close((na, nb));
            let id = match index.get(&st) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= MAX_DFA_STATES {
                        return Err(TransformError::MagicWordUnavailable(
                            "level automaton too large".to_string(),
                        ));
                    }
                    index.insert(st.clone(), id);
                    states.push(st);
                    id
                }
            };
            row.push(id);
        }
        trans.push(row);
        i += 1;
    }
    let accept = states.iter().map(|(_, b)| b.contains(&0)).collect();
    let dfa = Dfa {
        start: 0,
        accept,
        trans,
        live: Vec::new(),
    };
    Ok(dfa.minimize())
}

/// Whether `w` is a prefix of `(Suf⁺(L) ∪ K)·L*`.
fn stage_violated(lang: &Dfa, trie: &Trie, w: &[usize]) -> bool {
    let reach = lang.reach_plus();
    let mut d: BTreeSet<usize> = (0..lang.states())
        .filter(|&q| reach[q] && lang.live[q])
        .map(|q| lang.trans[q][w[0]])
        .filter(|&q| lang.live[q])
        .collect();
    let mut t: BTreeSet<usize> = trie.child(0, w[0]).into_iter().collect();
    let close = |d: &mut BTreeSet<usize>, t: &BTreeSet<usize>| {
        if d.iter().any(|&q| lang.accept[q]) || t.iter().any(|&n| trie.end[n]) {
            d.insert(lang.start);
        }
    };
    close(&mut d, &t);
    for &x in &w[1..] {
        let mut nd: BTreeSet<usize> = d.iter().map(|&q| lang.trans[q][x]).filter(|&q| lang.live[q]).collect();
        let nt: BTreeSet<usize> = t.iter().filter_map(|&n| trie.child(n, x)).collect();
        close(&mut nd, &nt);
        d = nd;
        t = nt;
        if d.is_empty() && t.is_empty() {
            return false;
        }
    }
    !(d.is_empty() && t.is_empty())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MagicSearch {
    pub words: Vec<MagicWord>,
    /// Candidates checked, and whether the lifted fallback was used.
    pub candidates: usize,
    pub lifted: bool,
}

/// All verified magic words of minimal symbol length among prefixes of
/// expansions of the smallest common loops; falls back to a word lifted
/// through every stage.
pub fn find_magic_words(chain: &CodeChain, seed: Option<&LoopRef>) -> Result<MagicSearch, TransformError> {
    let auto = ChainAutomata::new(chain)?;
    let common = chain.common();
    let mut cands: BTreeSet<(usize, MagicWord)> = BTreeSet::new();
    let mut taken = 0;
    'outer: for n in 1..=common.degree() {
        let c = common.coeff_ref(n).to_usize().unwrap_or(usize::MAX);
        for r in 0..c {
            if taken >= CANDIDATE_LOOPS {
                break 'outer;
            }
            taken += 1;
            let exp = chain.expand(&LoopRef::new(n, r as u64));
            for q in 1..=exp.len() {
                let m = MagicWord {
                    loops: exp[..q].to_vec(),
                };
                cands.insert((m.symbol_len(), m));
            }
        }
    }
    let mut best: Option<usize> = None;
    let mut words = Vec::new();
    let candidates = cands.len();
    for (len, m) in cands {
        if best.map(|b| len > b).unwrap_or(false) {
            break;
        }
        if auto.violation(&m.loops).is_none() {
            best = Some(len);
            words.push(m);
        }
    }
    if !words.is_empty() {
        return Ok(MagicSearch {
            words,
            candidates,
            lifted: false,
        });
    }
    let w = lifted_word(chain, seed)?;
    match auto.violation(&w.loops) {
        None => Ok(MagicSearch {
            words: vec![w],
            candidates,
            lifted: true,
        }),
        Some(s) => Err(TransformError::MagicWordUnavailable(format!(
            "lifted word fails at stage {s}"
        ))),
    }
}

/// `X_S = [seed]`, `X_{s−1} = φ_s(X_s)·(smallest H_s loop)`.
fn lifted_word(chain: &CodeChain, seed: Option<&LoopRef>) -> Result<MagicWord, TransformError> {
    let top = match seed {
        Some(s) => s.clone(),
        None => smallest_loop(chain.common())
            .ok_or_else(|| TransformError::MagicWordUnavailable("empty common shift".to_string()))?,
    };
    let mut word = vec![top];
    for s in (0..chain.levels()).rev() {
        let st = &chain.stages[s];
        let mut next = Vec::new();
        for l in &word {
            let (h, tail) = st.unrank(l);
            next.push(h);
            next.extend(tail);
        }
        let h = st
            .magic_loop()
            .ok_or_else(|| TransformError::MagicWordUnavailable(format!("stage {} has no H loop", s + 1)))?;
        next.push(h);
        word = next;
    }
    Ok(MagicWord { loops: word })
}

fn smallest_loop(f: &crate::series::Series) -> Option<LoopRef> {
    f.support().into_iter().next().map(|n| LoopRef::new(n, 0u32))
}

/// Verifies given words against the chain; returns the first failing stage.
pub fn verify_magic(chain: &CodeChain, words: &[MagicWord]) -> Result<Vec<Option<usize>>, TransformError> {
    let auto = ChainAutomata::new(chain)?;
    Ok(words.iter().map(|w| auto.violation(&w.loops)).collect())
}
