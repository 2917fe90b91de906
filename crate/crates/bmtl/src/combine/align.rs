//! Pairwise monolingual word alignment for hypothesis combination.
//!
//! Words match exactly (case-insensitive) or by stem (shared prefix of at
//! least four characters). Among maximum-cardinality one-to-one matchings
//! the aligner returns one minimizing crossing link pairs, found by exact
//! branch-and-bound for sentences of at most twenty tokens and by a
//! left-to-right greedy pass beyond that.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    Exact,
    Stem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub a_pos: usize,
    pub b_pos: usize,
    pub kind: MatchKind,
}

const EXHAUSTIVE_LIMIT: usize = 20;
const STEM_PREFIX: usize = 4;
/// Degenerate inputs (periodic repetitions of interchangeable words) blow
/// the branch-and-bound up combinatorially; past this many nodes the best
/// matching found so far stands. Realistic sentences stay far below it.
const NODE_BUDGET: usize = 500_000;

pub fn word_match(a: &str, b: &str) -> Option<MatchKind> {
    let la = a.to_lowercase();
    let lb = b.to_lowercase();
    if la == lb {
        return Some(MatchKind::Exact);
    }
    let shared = la
        .chars()
        .zip(lb.chars())
        .take_while(|(x, y)| x == y)
        .count();
    if shared >= STEM_PREFIX {
        Some(MatchKind::Stem)
    } else {
        None
    }
}

struct Search<'a> {
    edges: &'a [Vec<usize>], // compatible b positions per a position, ascending
    n_b: usize,
    best_links: Vec<(usize, usize)>,
    best_card: usize,
    best_crossings: usize,
    has_best: bool,
    nodes: usize,
}

impl<'a> Search<'a> {
    fn run(&mut self, a_pos: usize, chosen: &mut Vec<(usize, usize)>, used_b: &mut Vec<bool>, crossings: usize) {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return;
        }
        if a_pos == self.edges.len() {
            let card = chosen.len();
            let better = !self.has_best
                || card > self.best_card
                || (card == self.best_card && crossings < self.best_crossings);
            if better {
                self.best_links = chosen.clone();
                self.best_card = card;
                self.best_crossings = crossings;
                self.has_best = true;
            }
            return;
        }
        // optimistic cardinality: everything remaining matches
        let unused_b = used_b.iter().filter(|&&u| !u).count();
        let bound = chosen.len() + (self.edges.len() - a_pos).min(unused_b);
        if self.has_best
            && (bound < self.best_card
                || (bound == self.best_card && crossings >= self.best_crossings))
        {
            return;
        }
        for &b in &self.edges[a_pos] {
            if used_b[b] {
                continue;
            }
            // new link (a_pos, b) crosses every chosen (a', b') with b' > b
            let added = chosen.iter().filter(|(_, b2)| *b2 > b).count();
            used_b[b] = true;
            chosen.push((a_pos, b));
            self.run(a_pos + 1, chosen, used_b, crossings + added);
            chosen.pop();
            used_b[b] = false;
        }
        self.run(a_pos + 1, chosen, used_b, crossings);
    }
}

fn greedy(a: &[String], b: &[String], edges: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut used_b = vec![false; b.len()];
    let mut links = Vec::new();
    for (a_pos, candidates) in edges.iter().enumerate() {
        // exact matches first, then stems, lowest position first
        let pick = candidates
            .iter()
            .find(|&&q| !used_b[q] && word_match(&a[a_pos], &b[q]) == Some(MatchKind::Exact))
            .or_else(|| candidates.iter().find(|&&q| !used_b[q]));
        if let Some(&q) = pick {
            used_b[q] = true;
            links.push((a_pos, q));
        }
    }
    links
}

/// Aligns two tokenized hypotheses. Deterministic: the branch-and-bound
/// explores candidates in ascending position order and only strict
/// improvements replace the incumbent.
pub fn align_pair(a: &[String], b: &[String]) -> Vec<Link> {
    let edges: Vec<Vec<usize>> = a
        .iter()
        .map(|wa| {
            b.iter()
                .enumerate()
                .filter(|(_, wb)| word_match(wa, wb).is_some())
                .map(|(q, _)| q)
                .collect()
        })
        .collect();

    let pairs = if a.len() <= EXHAUSTIVE_LIMIT && b.len() <= EXHAUSTIVE_LIMIT {
        let mut search = Search {
            edges: &edges,
            n_b: b.len(),
            best_links: Vec::new(),
            best_card: 0,
            best_crossings: 0,
            has_best: false,
            nodes: 0,
        };
        let mut used_b = vec![false; search.n_b];
        search.run(0, &mut Vec::new(), &mut used_b, 0);
        search.best_links
    } else {
        greedy(a, b, &edges)
    };

    pairs
        .into_iter()
        .map(|(a_pos, b_pos)| Link {
            a_pos,
            b_pos,
            kind: word_match(&a[a_pos], &b[b_pos]).expect("edge implies match"),
        })
        .collect()
}

/// Symmetric pairwise links over all systems of one hypothesis set:
/// `(system, position)` maps to every directly linked position.
#[derive(Debug, Clone, Default)]
pub struct AlignmentGraph {
    links: HashMap<(usize, usize), Vec<(usize, usize)>>,
}

impl AlignmentGraph {
    pub fn build(systems: &[Vec<String>]) -> AlignmentGraph {
        let mut links: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for i in 0..systems.len() {
            for j in i + 1..systems.len() {
                for link in align_pair(&systems[i], &systems[j]) {
                    links.entry((i, link.a_pos)).or_default().push((j, link.b_pos));
                    links.entry((j, link.b_pos)).or_default().push((i, link.a_pos));
                }
            }
        }
        for targets in links.values_mut() {
            targets.sort_unstable();
        }
        AlignmentGraph { links }
    }

    pub fn linked(&self, system: usize, position: usize) -> &[(usize, usize)] {
        self.links
            .get(&(system, position))
            .map_or(&[], Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn count_crossings(links: &[Link]) -> usize {
        let mut n = 0;
        for i in 0..links.len() {
            for j in i + 1..links.len() {
                let (a, b) = (&links[i], &links[j]);
                if (a.a_pos < b.a_pos) != (a.b_pos < b.b_pos) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn word_match_kinds() {
        assert_eq!(word_match("The", "the"), Some(MatchKind::Exact));
        assert_eq!(word_match("walked", "walking"), Some(MatchKind::Stem));
        assert_eq!(word_match("cat", "cap"), None); // shared prefix of 2
        assert_eq!(word_match("a", "a"), Some(MatchKind::Exact));
    }

    #[test]
    fn identical_sentences_align_identity() {
        let s = toks(&["the", "black", "cat"]);
        let links = align_pair(&s, &s);
        assert_eq!(links.len(), 3);
        for (i, l) in links.iter().enumerate() {
            assert_eq!((l.a_pos, l.b_pos), (i, i));
            assert_eq!(l.kind, MatchKind::Exact);
        }
        assert_eq!(count_crossings(&links), 0);
    }

    #[test]
    fn deletion_keeps_remaining_links() {
        let a = toks(&["the", "black", "cat"]);
        let b = toks(&["the", "cat"]);
        let links = align_pair(&a, &b);
        assert_eq!(links.len(), 2);
        assert!(links.contains(&Link { a_pos: 0, b_pos: 0, kind: MatchKind::Exact }));
        assert!(links.contains(&Link { a_pos: 2, b_pos: 1, kind: MatchKind::Exact }));
        assert_eq!(count_crossings(&links), 0);
    }

    #[test]
    fn swap_needs_one_crossing() {
        let a = toks(&["a", "b"]);
        let b = toks(&["b", "a"]);
        let links = align_pair(&a, &b);
        assert_eq!(links.len(), 2);
        assert_eq!(count_crossings(&links), 1);
    }

    #[test]
    fn repeated_words_align_monotone() {
        let a = toks(&["a", "a", "a"]);
        let links = align_pair(&a, &a);
        assert_eq!(links.len(), 3);
        assert_eq!(count_crossings(&links), 0);
    }

    /// Oracle: enumerate every one-to-one matching and keep the best.
    fn oracle(a: &[String], b: &[String]) -> (usize, usize) {
        fn recur(
            a: &[String],
            b: &[String],
            p: usize,
            used: &mut Vec<bool>,
            chosen: &mut Vec<(usize, usize)>,
            best: &mut (usize, usize),
        ) {
            if p == a.len() {
                let crossings = {
                    let mut n = 0;
                    for i in 0..chosen.len() {
                        for j in i + 1..chosen.len() {
                            if (chosen[i].0 < chosen[j].0) != (chosen[i].1 < chosen[j].1) {
                                n += 1;
                            }
                        }
                    }
                    n
                };
                if chosen.len() > best.0 || (chosen.len() == best.0 && crossings < best.1) {
                    *best = (chosen.len(), crossings);
                }
                return;
            }
            for q in 0..b.len() {
                if !used[q] && word_match(&a[p], &b[q]).is_some() {
                    used[q] = true;
                    chosen.push((p, q));
                    recur(a, b, p + 1, used, chosen, best);
                    chosen.pop();
                    used[q] = false;
                }
            }
            recur(a, b, p + 1, used, chosen, best);
        }
        let mut best = (0, usize::MAX);
        recur(a, b, 0, &mut vec![false; b.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn matches_exhaustive_oracle_on_random_pairs() {
        let vocab = ["the", "cat", "cats", "sat", "mat", "a", "black", "walked"];
        let mut rng = crate::rng::Rng::new(77);
        for _ in 0..60 {
            let len_a = rng.below(6) + 1;
            let len_b = rng.below(6) + 1;
            let a: Vec<String> =
                (0..len_a).map(|_| vocab[rng.below(vocab.len())].to_string()).collect();
            let b: Vec<String> =
                (0..len_b).map(|_| vocab[rng.below(vocab.len())].to_string()).collect();
            let links = align_pair(&a, &b);
            let (best_card, best_cross) = oracle(&a, &b);
            assert_eq!(links.len(), best_card, "{a:?} vs {b:?}");
            assert_eq!(count_crossings(&links), best_cross, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn long_sentences_use_greedy() {
        let a: Vec<String> = (0..25).map(|i| format!("word{i}")).collect();
        let links = align_pair(&a, &a);
        // word10..word19 etc. stem-match each other, but the greedy pass
        // prefers the exact match at the same position
        assert_eq!(links.len(), 25);
        for (i, l) in links.iter().enumerate() {
            assert_eq!((l.a_pos, l.b_pos), (i, i));
        }
    }

    #[test]
    fn graph_links_are_symmetric_and_single_per_system() {
        let systems = vec![
            toks(&["the", "cat", "sat"]),
            toks(&["the", "black", "cat"]),
            toks(&["a", "cat", "sat", "down"]),
        ];
        let graph = AlignmentGraph::build(&systems);
        for s in 0..systems.len() {
            for p in 0..systems[s].len() {
                let mut seen = std::collections::HashSet::new();
                for &(s2, p2) in graph.linked(s, p) {
                    assert_ne!(s2, s, "self-system link");
                    assert!(seen.insert(s2), "two links into system {s2}");
                    assert!(graph.linked(s2, p2).contains(&(s, p)), "asymmetric link");
                }
            }
        }
    }
}
