//! Frequency-based subword segmentation (byte-pair encoding) at arbitrary
//! vocabulary budgets.
//!
//! Learning starts each word as its characters plus a separate terminal
//! `</w>` marker and greedily merges the most frequent adjacent symbol
//! pair. Output segmentations fuse a still-separate trailing marker into
//! the word's last symbol, so `lowest` under a small merge table comes out
//! as `["low", "e", "s", "t</w>"]` and segmentations are invertible.
//!
//! The vocabulary extracted after learning is exactly the set of symbols
//! the corpus segments into (plus the four reserved ids), which guarantees
//! that every training-corpus word round-trips through encode/decode
//! without `<unk>`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

const END_MARKER: &str = "</w>";
const MERGES_HEADER: &str = "#bpe-merges v1";

/// Ordered merge rules; rank equals position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
}

impl MergeTable {
    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// True when `self`'s rules are the leading rules of `other`; budgets
    /// learned on the same corpus nest this way.
    pub fn is_prefix_of(&self, other: &MergeTable) -> bool {
        other.merges.len() >= self.merges.len()
            && other.merges[..self.merges.len()] == self.merges[..]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from(MERGES_HEADER);
        out.push('\n');
        for (rank, (left, right)) in self.merges.iter().enumerate() {
            out.push_str(&format!("{rank}\t{left}\t{right}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MergeTable> {
        let text = crate::textpipe::read_utf8(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == MERGES_HEADER => {}
            other => {
                return Err(Error::VersionMismatch {
                    found: other.unwrap_or("").to_string(),
                    expected: MERGES_HEADER.to_string(),
                })
            }
        }
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let bad = || Error::Format {
                path: path.display().to_string(),
                detail: format!("line {}: expected rank<TAB>left<TAB>right", i + 2),
            };
            let rank: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let left = parts.next().ok_or_else(bad)?;
            let right = parts.next().ok_or_else(bad)?;
            if rank != merges.len() {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    detail: format!("rank {rank} out of order at line {}", i + 2),
                });
            }
            merges.push((left.to_string(), right.to_string()));
        }
        Ok(MergeTable { merges })
    }
}

/// Token/id bijection with the four reserved ids first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl SubwordVocabulary {
    fn from_symbols(symbols: &BTreeSet<String>) -> SubwordVocabulary {
        let mut id_to_token: Vec<String> =
            vec![PAD_TOKEN.into(), BOS_TOKEN.into(), EOS_TOKEN.into(), UNK_TOKEN.into()];
        id_to_token.extend(symbols.iter().cloned());
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        SubwordVocabulary { token_to_id, id_to_token }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// 64-bit content hash of the serialized form; checkpoints store this
    /// to detect edited or swapped vocabulary files.
    pub fn content_hash(&self) -> u64 {
        crate::rng::fnv1a64(self.to_file_string().as_bytes())
    }

    fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (id, token) in self.id_to_token.iter().enumerate() {
            out.push_str(&format!("{token}\t{id}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SubwordVocabulary> {
        let text = crate::textpipe::read_utf8(path)?;
        let mut id_to_token = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (token, id) = line.split_once('\t').ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                detail: format!("line {}: expected token<TAB>id", i + 1),
            })?;
            let id: usize = id.parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                detail: format!("line {}: bad id {id:?}", i + 1),
            })?;
            if id != id_to_token.len() {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    detail: format!("id {id} out of order at line {}", i + 1),
                });
            }
            id_to_token.push(token.to_string());
        }
        let reserved = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];
        if id_to_token.len() < 4 || id_to_token[..4] != reserved {
            return Err(Error::Format {
                path: path.display().to_string(),
                detail: "reserved tokens <pad> <s> </s> <unk> must hold ids 0-3".into(),
            });
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(SubwordVocabulary { token_to_id, id_to_token })
    }
}

/// Counts words in a tokenized corpus. BTreeMap keeps learning independent
/// of sentence order and hash-map iteration.
pub fn word_frequencies<S: AsRef<str>>(corpus: &[Vec<S>]) -> BTreeMap<String, u64> {
    let mut freqs = BTreeMap::new();
    for sentence in corpus {
        for tok in sentence {
            *freqs.entry(tok.as_ref().to_string()).or_insert(0) += 1;
        }
    }
    freqs
}

fn initial_symbols(word: &str) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    syms.push(END_MARKER.to_string());
    syms
}

/// One left-to-right pass replacing every adjacent (left, right) with their
/// concatenation. A single pass is exhaustive: a product can never recreate
/// the pair with the symbol that follows it.
fn apply_merge(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let merged = format!("{}{}", symbols[i], symbols[i + 1]);
            symbols[i] = merged;
            symbols.remove(i + 1);
        }
        i += 1;
    }
}

/// Fuses a still-separate trailing `</w>` into the preceding symbol.
fn fuse_marker(mut symbols: Vec<String>) -> Vec<String> {
    if symbols.len() >= 2 && symbols.last().map(String::as_str) == Some(END_MARKER) {
        symbols.pop();
        let last = symbols.last_mut().expect("len >= 2");
        last.push_str(END_MARKER);
    }
    symbols
}

fn fused_symbol_set(states: &[(Vec<String>, u64)]) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    for (symbols, _) in states {
        for sym in fuse_marker(symbols.clone()) {
            set.insert(sym);
        }
    }
    set
}

/// Learns merges greedily until the vocabulary (base symbols, merge
/// products, and the four reserved ids) would exceed `target_vocab_size`
/// or no pair occurs at least twice. Pair-frequency ties break
/// lexicographically on (left, right).
pub fn learn_bpe(
    word_freqs: &BTreeMap<String, u64>,
    target_vocab_size: usize,
) -> Result<(MergeTable, SubwordVocabulary)> {
    let mut states: Vec<(Vec<String>, u64)> = word_freqs
        .iter()
        .filter(|(w, _)| !w.is_empty())
        .map(|(w, &f)| (initial_symbols(w), f))
        .collect();

    let base = fused_symbol_set(&states);
    let required = base.len() + 4;
    if target_vocab_size < required {
        return Err(Error::BudgetTooSmall { budget: target_vocab_size, required });
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    loop {
        let mut counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, freq) in &states {
            for pair in symbols.windows(2) {
                *counts.entry((pair[0].as_str(), pair[1].as_str())).or_insert(0) += freq;
            }
        }
        // max by frequency, then lexicographically smallest pair
        let mut best: Option<((&str, &str), u64)> = None;
        for (&pair, &freq) in &counts {
            let better = match best {
                None => true,
                Some((bp, bf)) => freq > bf || (freq == bf && pair < bp),
            };
            if better {
                best = Some((pair, freq));
            }
        }
        let Some(((left, right), freq)) = best else { break };
        if freq < 2 {
            break;
        }
        let (left, right) = (left.to_string(), right.to_string());

        let mut next = states.clone();
        for (symbols, _) in &mut next {
            apply_merge(symbols, &left, &right);
        }
        if fused_symbol_set(&next).len() + 4 > target_vocab_size {
            break;
        }
        states = next;
        merges.push((left, right));
    }

    let vocab = SubwordVocabulary::from_symbols(&fused_symbol_set(&states));
    Ok((MergeTable { merges }, vocab))
}

/// Splits a word into subword units by replaying the merge table in rank
/// order over its characters plus the terminal marker.
pub fn segment_word(table: &MergeTable, word: &str) -> Vec<String> {
    if word.is_empty() {
        return Vec::new();
    }
    let mut symbols = initial_symbols(word);
    for (left, right) in &table.merges {
        apply_merge(&mut symbols, left, right);
    }
    fuse_marker(symbols)
}

/// BOS + per-word subword ids + EOS; subwords missing from the vocabulary
/// map to UNK.
pub fn encode_sentence<S: AsRef<str>>(
    vocab: &SubwordVocabulary,
    table: &MergeTable,
    tokens: &[S],
) -> Vec<u32> {
    let mut ids = vec![BOS_ID];
    for tok in tokens {
        for sym in segment_word(table, tok.as_ref()) {
            ids.push(vocab.id(&sym).unwrap_or(UNK_ID));
        }
    }
    ids.push(EOS_ID);
    ids
}

/// Strips BOS/EOS/PAD and reassembles words at `</w>` markers. An UNK id
/// contributes a literal `<unk>` and closes the word it ends.
pub fn decode_to_words(vocab: &SubwordVocabulary, ids: &[u32]) -> Result<Vec<String>> {
    let mut words = Vec::new();
    let mut current = String::new();
    for &id in ids {
        match id {
            PAD_ID | BOS_ID | EOS_ID => continue,
            UNK_ID => {
                current.push_str(UNK_TOKEN);
                words.push(std::mem::take(&mut current));
            }
            _ => {
                let token = vocab.token(id).ok_or(Error::UnknownId(id))?;
                match token.strip_suffix(END_MARKER) {
                    Some(stem) => {
                        current.push_str(stem);
                        words.push(std::mem::take(&mut current));
                    }
                    None => current.push_str(token),
                }
            }
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    Ok(words)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn segment_concat_is_identity(word in "[a-f]{1,12}", n_merges in 0usize..6) {
            // synthetic merge tables over the same alphabet
            let mut merges = Vec::new();
            let alphabet = ["a", "b", "c", "d", "e", "f"];
            for i in 0..n_merges {
                let l = alphabet[i % alphabet.len()].to_string();
                let r = alphabet[(i * 3 + 1) % alphabet.len()].to_string();
                merges.push((l, r));
            }
            let table = MergeTable { merges };
            let joined: String = segment_word(&table, &word)
                .iter()
                .map(|s| s.strip_suffix("</w>").unwrap_or(s))
                .collect();
            prop_assert_eq!(joined, word);
        }

        #[test]
        fn learned_vocab_respects_budget(words in proptest::collection::btree_map("[a-d]{1,6}", 1u64..9, 1..12), extra in 0usize..30) {
            let base = super::fused_symbol_set(
                &words.iter().map(|(w, &f)| (super::initial_symbols(w), f)).collect::<Vec<_>>(),
            );
            let budget = base.len() + 4 + extra;
            let (_, v) = learn_bpe(&words, budget).unwrap();
            prop_assert!(v.size() <= budget);
        }
    }
}
