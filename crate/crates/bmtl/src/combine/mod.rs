//! Multi-engine hypothesis combination: align the systems' word
//! hypotheses pairwise, then beam-search an output sequence under four
//! constraints — sentence framing (BOS/EOS), single consumption of each
//! aligned token class, weak per-system monotonicity within a radius-R
//! window past the frontier, and no skipped tokens except at sentence end.
//!
//! Scoring is linear: w_lm * LM log-probability + w_sys * the confidence
//! weights of every consumed token + w_len * output length. Fully
//! identical inputs and single-system sets pass through unchanged; search
//! ties break toward the lexicographically smaller word sequence.

pub mod align;
pub mod lm;

pub use align::{align_pair, AlignmentGraph, Link, MatchKind};
pub use lm::{default_lambdas, train_lm, NGramLM, LM_EOS};

use std::collections::HashSet;

use crate::error::{Error, Result};

/// N word-token hypotheses for one source sentence with per-system
/// confidence weights.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub systems: Vec<Vec<String>>,
    pub weights: Vec<f64>,
}

impl HypothesisSet {
    pub fn new(systems: Vec<Vec<String>>, weights: Option<Vec<f64>>) -> Result<HypothesisSet> {
        if systems.is_empty() {
            return Err(Error::EmptyCorpus("hypothesis set".into()));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; systems.len()]);
        if weights.len() != systems.len() {
            return Err(Error::Config(format!(
                "{} confidence weights for {} systems",
                weights.len(),
                systems.len()
            )));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Config("confidence weights must be positive".into()));
        }
        Ok(HypothesisSet { systems, weights })
    }

    fn all_identical(&self) -> bool {
        self.systems.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombineParams {
    pub beam_size: usize,
    /// How far past a system's frontier a token may be taken, and the cap
    /// on unconsumed holes below any system's furthest consumed position.
    pub radius: usize,
    pub w_lm: f64,
    pub w_sys: f64,
    pub w_len: f64,
}

impl Default for CombineParams {
    fn default() -> Self {
        CombineParams { beam_size: 32, radius: 3, w_lm: 1.0, w_sys: 1.0, w_len: 0.0 }
    }
}

impl CombineParams {
    /// No pruning: the beam holds every state, so search is exhaustive.
    pub fn exhaustive(mut self) -> Self {
        self.beam_size = usize::MAX;
        self
    }
}

/// One output word with the token class it consumed. The first consumed
/// entry is the anchor position the word was taken from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub system: usize,
    pub position: usize,
    pub word: String,
    pub consumed: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Combined {
    pub words: Vec<String>,
    pub score: f64,
    pub trace: Vec<Emission>,
}

fn frontier(used: &[bool]) -> usize {
    used.iter().position(|&u| !u).unwrap_or(used.len())
}

fn holes(used: &[bool]) -> usize {
    match used.iter().rposition(|&u| u) {
        Some(max_used) => used[..max_used].iter().filter(|&&u| !u).count(),
        None => 0,
    }
}

#[derive(Clone, Debug)]
struct State {
    used: Vec<Vec<bool>>,
    words: Vec<String>,
    score: f64,
    trace: Vec<Emission>,
}

impl State {
    fn context<'a>(&'a self) -> Vec<&'a str> {
        self.words.iter().map(String::as_str).collect()
    }
}

/// The token class an anchor consumes: itself plus its direct links.
fn consumed_class(graph: &AlignmentGraph, system: usize, position: usize) -> Vec<(usize, usize)> {
    let mut class = vec![(system, position)];
    class.extend_from_slice(graph.linked(system, position));
    class
}

fn legal_extensions(
    set: &HypothesisSet,
    graph: &AlignmentGraph,
    params: &CombineParams,
    lm: &NGramLM,
    state: &State,
) -> Vec<State> {
    let mut out = Vec::new();
    let mut seen: HashSet<(Vec<(usize, usize)>, &str)> = HashSet::new();
    for (s, hyp) in set.systems.iter().enumerate() {
        let front = frontier(&state.used[s]);
        let hi = (front + params.radius).min(hyp.len().saturating_sub(1));
        for p in front..=hi {
            if hyp.is_empty() || state.used[s][p] {
                continue;
            }
            let mut class = consumed_class(graph, s, p);
            class.sort_unstable();
            // the same class/word reached from another anchor is the same move
            if class.iter().any(|&(cs, cp)| state.used[cs][cp]) {
                continue;
            }
            let word = hyp[p].as_str();
            if !seen.insert((class.clone(), word)) {
                continue;
            }
            let mut used = state.used.clone();
            for &(cs, cp) in &class {
                used[cs][cp] = true;
            }
            if used.iter().any(|u| holes(u) > params.radius) {
                continue;
            }
            let confidence: f64 = class.iter().map(|&(cs, _)| set.weights[cs]).sum();
            let delta = params.w_lm * lm.logp(&state.context(), word)
                + params.w_sys * confidence
                + params.w_len;
            let mut words = state.words.clone();
            words.push(word.to_string());
            let mut trace = state.trace.clone();
            trace.push(Emission {
                system: s,
                position: p,
                word: word.to_string(),
                consumed: class,
            });
            out.push(State { used, words, score: state.score + delta, trace });
        }
    }
    out
}

fn finish(state: &State, params: &CombineParams, lm: &NGramLM) -> (Vec<String>, f64, Vec<Emission>) {
    let score = state.score + params.w_lm * lm.logp(&state.context(), LM_EOS);
    (state.words.clone(), score, state.trace.clone())
}

fn better(candidate: &(Vec<String>, f64, Vec<Emission>), incumbent: &(Vec<String>, f64, Vec<Emission>)) -> bool {
    candidate.1 > incumbent.1 || (candidate.1 == incumbent.1 && candidate.0 < incumbent.0)
}

fn identity_result(set: &HypothesisSet, graph: &AlignmentGraph, params: &CombineParams, lm: &NGramLM) -> Combined {
    let words = set.systems[0].clone();
    let mut state = State {
        used: set.systems.iter().map(|h| vec![false; h.len()]).collect(),
        words: Vec::new(),
        score: 0.0,
        trace: Vec::new(),
    };
    for (p, word) in words.iter().enumerate() {
        let mut class = consumed_class(graph, 0, p);
        class.sort_unstable();
        class.retain(|&(cs, cp)| !state.used[cs][cp]);
        let confidence: f64 = class.iter().map(|&(cs, _)| set.weights[cs]).sum();
        state.score += params.w_lm * lm.logp(&state.context(), word)
            + params.w_sys * confidence
            + params.w_len;
        for &(cs, cp) in &class {
            state.used[cs][cp] = true;
        }
        state.trace.push(Emission { system: 0, position: p, word: word.clone(), consumed: class });
        state.words.push(word.clone());
    }
    let (words, score, trace) = finish(&state, params, lm);
    Combined { words, score, trace }
}

/// Combines one hypothesis set. `graph` must come from
/// [`AlignmentGraph::build`] over the same systems.
pub fn combine(
    set: &HypothesisSet,
    graph: &AlignmentGraph,
    lm: &NGramLM,
    params: &CombineParams,
) -> Result<Combined> {
    if set.systems.is_empty() {
        return Err(Error::EmptyCorpus("hypothesis set".into()));
    }
    // Degenerate sets pass through: with every system identical the search
    // could only reorder inside the radius window, and no reordering can
    // gain confidence score.
    if set.systems.len() == 1 || set.all_identical() {
        return Ok(identity_result(set, graph, params, lm));
    }

    let total_positions: usize = set.systems.iter().map(Vec::len).sum();
    let mut live = vec![State {
        used: set.systems.iter().map(|h| vec![false; h.len()]).collect(),
        words: Vec::new(),
        score: 0.0,
        trace: Vec::new(),
    }];
    let mut best: Option<(Vec<String>, f64, Vec<Emission>)> = None;

    for _ in 0..=total_positions {
        for state in &live {
            let candidate = finish(state, params, lm);
            if best.as_ref().is_none_or(|b| better(&candidate, b)) {
                best = Some(candidate);
            }
        }
        let mut pool: Vec<State> = Vec::new();
        let mut seen: HashSet<(Vec<Vec<bool>>, Vec<String>)> = HashSet::new();
        for state in &live {
            for next in legal_extensions(set, graph, params, lm, state) {
                // equal (used, words) states carry equal scores
                if seen.insert((next.used.clone(), next.words.clone())) {
                    pool.push(next);
                }
            }
        }
        pool.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.words.cmp(&b.words))
        });
        if params.beam_size < pool.len() {
            pool.truncate(params.beam_size);
        }
        live = pool;
        if live.is_empty() {
            break;
        }
    }

    let (words, score, trace) = best.expect("the empty emission always terminates");
    Ok(Combined { words, score, trace })
}

/// Builds the alignment graph and combines in one call.
pub fn combine_line(
    set: &HypothesisSet,
    lm: &NGramLM,
    params: &CombineParams,
) -> Result<Combined> {
    let graph = AlignmentGraph::build(&set.systems);
    combine(set, &graph, lm, params)
}

/// Replays a combination trace against the four constraints; any
/// violation is an error naming the emission.
pub fn audit(
    set: &HypothesisSet,
    graph: &AlignmentGraph,
    params: &CombineParams,
    combined: &Combined,
) -> Result<()> {
    let fail = |i: usize, what: String| {
        Err(Error::Mismatch(format!("emission {i}: {what}")))
    };
    if combined.words.len() != combined.trace.len() {
        return Err(Error::Mismatch("trace length differs from output length".into()));
    }
    let mut used: Vec<Vec<bool>> = set.systems.iter().map(|h| vec![false; h.len()]).collect();
    for (i, em) in combined.trace.iter().enumerate() {
        if combined.words[i] != em.word {
            return fail(i, format!("word {:?} vs trace {:?}", combined.words[i], em.word));
        }
        let hyp = &set.systems[em.system];
        if em.position >= hyp.len() || hyp[em.position] != em.word {
            return fail(i, "anchor does not carry the emitted word".into());
        }
        let front = frontier(&used[em.system]);
        if em.position < front || em.position > front + params.radius {
            return fail(i, format!("anchor {} outside window [{front}, {}]", em.position, front + params.radius));
        }
        let mut class = consumed_class(graph, em.system, em.position);
        class.sort_unstable();
        class.retain(|&(cs, cp)| !used[cs][cp]);
        let mut declared = em.consumed.clone();
        declared.sort_unstable();
        if declared != class {
            return fail(i, "consumed set differs from the anchor's link class".into());
        }
        if declared.is_empty() {
            return fail(i, "word not traceable to any consumption".into());
        }
        for &(cs, cp) in &declared {
            if used[cs][cp] {
                return fail(i, format!("({cs}, {cp}) consumed twice"));
            }
            used[cs][cp] = true;
        }
        for (s, u) in used.iter().enumerate() {
            if holes(u) > params.radius {
                return fail(i, format!("system {s} holds {} holes mid-search", holes(u)));
            }
        }
    }
    Ok(())
}
