//! Corpus normalization, tokenization, and truecasing, plus their inverses.
//!
//! A self-contained stand-in for the usual external preprocessing
//! scripts. The rule tables are small and fixed:
//!
//! * normalization: NFC composition, curly quotes and long dashes mapped to
//!   ASCII, ellipsis expanded, whitespace runs collapsed;
//! * tokenization: punctuation split from words, except a period between
//!   two digits ("3.14" stays one token);
//! * detokenization: spaces re-inserted, with closing punctuation attached
//!   to the left and opening punctuation to the right.
//!
//! Truecasing restores each token's statistically dominant surface form at
//! sentence starts; detruecasing re-capitalizes the first alphabetic
//! character for presentation.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// One corpus sentence moving through the pipeline.
#[derive(Debug, Clone)]
pub struct SentenceRecord {
    pub raw: String,
    pub tokens: Vec<String>,
    pub normalized: bool,
    pub truecased: bool,
}

/// Replacement table applied after NFC composition. Everything else passes
/// through untouched.
const CHAR_RULES: &[(char, &str)] = &[
    ('\u{201c}', "\""), // left double curly quote
    ('\u{201d}', "\""), // right double curly quote
    ('\u{2018}', "'"),  // left single curly quote
    ('\u{2019}', "'"),  // right single curly quote
    ('\u{2013}', "-"),  // en dash
    ('\u{2014}', "-"),  // em dash
    ('\u{2026}', "..."),
    ('\u{00a0}', " "), // no-break space
];

/// Canonicalizes a line: NFC, the fixed replacement table, collapsed
/// whitespace, trimmed ends.
pub fn normalize_text(line: &str) -> String {
    let mut mapped = String::with_capacity(line.len());
    for ch in line.nfc() {
        match CHAR_RULES.iter().find(|(from, _)| *from == ch) {
            Some((_, to)) => mapped.push_str(to),
            None => mapped.push(ch),
        }
    }
    let mut out = String::with_capacity(mapped.len());
    let mut in_space = true; // leading whitespace is dropped
    for ch in mapped.chars() {
        if ch.is_whitespace() {
            in_space = true;
        } else {
            if in_space && !out.is_empty() {
                out.push(' ');
            }
            in_space = false;
            out.push(ch);
        }
    }
    out
}

fn is_word_char(ch: char) -> bool {
    ch.is_alphanumeric() || ch == '_'
}

/// Splits punctuation from words. A period flanked by digits is kept inside
/// the token, so decimals survive. Deterministic; an empty line gives an
/// empty token sequence.
pub fn tokenize(line: &str) -> Vec<String> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if is_word_char(ch) {
            current.push(ch);
        } else if ch == '.'
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_ascii_digit()
            && chars[i + 1].is_ascii_digit()
            && !current.is_empty()
        {
            // digit-internal decimal point
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        }
        i += 1;
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Punctuation that attaches to the preceding token when detokenizing.
fn attaches_left(tok: &str) -> bool {
    matches!(tok, "," | "." | "!" | "?" | ";" | ":" | ")" | "]" | "}" | "%" | "...")
}

/// Punctuation that attaches to the following token.
fn attaches_right(tok: &str) -> bool {
    matches!(tok, "(" | "[" | "{")
}

/// Inverse of [`tokenize`] for sentences covered by the rule table. Double
/// quotes alternate between opening (attach right) and closing (attach
/// left) as they appear.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut glue_next = false; // previous token forbids a following space
    let mut quote_open = false;
    for tok in tokens {
        let is_quote = tok == "\"";
        let left = attaches_left(tok.as_str()) || (is_quote && quote_open);
        if !out.is_empty() && !left && !glue_next {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = attaches_right(tok.as_str()) || (is_quote && !quote_open);
        if is_quote {
            quote_open = !quote_open;
        }
    }
    out
}

/// Dominant surface form per lowercased token, learned from a corpus.
#[derive(Debug, Clone, Default)]
pub struct TruecaseModel {
    /// lowercased token -> (dominant surface form, count)
    casing: HashMap<String, (String, u64)>,
}

/// Picks the winner among observed surface forms: highest count, ties
/// resolved toward the lexicographically greatest form, which prefers
/// lowercase variants over capitalized ones.
fn dominant(counts: &HashMap<String, u64>) -> (String, u64) {
    let mut best: Option<(&String, u64)> = None;
    for (surface, &count) in counts {
        let better = match best {
            None => true,
            Some((bs, bc)) => count > bc || (count == bc && surface > bs),
        };
        if better {
            best = Some((surface, count));
        }
    }
    let (s, c) = best.expect("counts non-empty");
    (s.clone(), c)
}

/// Learns casing statistics. Sentence-initial occurrences are excluded
/// because their capitalization is positional; tokens seen only sentence-
/// initially fall back to all their occurrences.
pub fn train_truecaser<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<TruecaseModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("truecaser training".into()));
    }
    let mut non_initial: HashMap<String, HashMap<String, u64>> = HashMap::new();
    let mut all: HashMap<String, HashMap<String, u64>> = HashMap::new();
    for sentence in corpus {
        for (pos, tok) in sentence.iter().enumerate() {
            let tok = tok.as_ref();
            let key = tok.to_lowercase();
            *all.entry(key.clone())
                .or_default()
                .entry(tok.to_string())
                .or_insert(0) += 1;
            if pos > 0 {
                *non_initial
                    .entry(key)
                    .or_default()
                    .entry(tok.to_string())
                    .or_insert(0) += 1;
            }
        }
    }
    let mut casing = HashMap::new();
    for (key, counts) in &all {
        let chosen = dominant(non_initial.get(key).unwrap_or(counts));
        casing.insert(key.clone(), chosen);
    }
    Ok(TruecaseModel { casing })
}

impl TruecaseModel {
    pub fn lookup(&self, lowercased: &str) -> Option<&str> {
        self.casing.get(lowercased).map(|(s, _)| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.casing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.casing.is_empty()
    }

    /// Writes `surface<TAB>count` records sorted by lowercased key.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries: Vec<(&String, &(String, u64))> = self.casing.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for (_, (surface, count)) in entries {
            out.push_str(surface);
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TruecaseModel> {
        let text = read_utf8(path)?;
        let mut casing = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (surface, count) = line.split_once('\t').ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                detail: format!("line {}: expected surface<TAB>count", i + 1),
            })?;
            let count: u64 = count.parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                detail: format!("line {}: bad count {count:?}", i + 1),
            })?;
            casing.insert(surface.to_lowercase(), (surface.to_string(), count));
        }
        Ok(TruecaseModel { casing })
    }
}

/// Applies the model at the sentence head: a known first token is replaced
/// by its dominant form; an unknown one is lowercased on its first letter
/// only when the rest of the token is already lowercase (acronyms pass
/// through). Other positions are untouched.
pub fn apply_truecase(model: &TruecaseModel, tokens: &[String]) -> Vec<String> {
    let mut out = tokens.to_vec();
    if let Some(first) = out.first_mut() {
        let key = first.to_lowercase();
        if let Some(form) = model.lookup(&key) {
            *first = form.to_string();
        } else {
            let mut chars = first.chars();
            if let Some(head) = chars.next() {
                let tail: String = chars.collect();
                if tail.chars().all(|c| !c.is_uppercase()) {
                    *first = head.to_lowercase().chain(tail.chars()).collect();
                }
            }
        }
    }
    out
}

/// Re-capitalizes the first alphabetic character of the first token.
pub fn detruecase(tokens: &[String]) -> Vec<String> {
    let mut out = tokens.to_vec();
    if let Some(first) = out.first_mut() {
        let mut result = String::with_capacity(first.len());
        let mut done = false;
        for ch in first.chars() {
            if !done && ch.is_alphabetic() {
                result.extend(ch.to_uppercase());
                done = true;
            } else {
                result.push(ch);
            }
        }
        *first = result;
    }
    out
}

/// Reads a whole file as UTF-8, reporting the 1-based line number of the
/// first invalid byte sequence.
pub fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    match String::from_utf8(bytes) {
        Ok(s) => Ok(s),
        Err(e) => {
            let valid = e.utf8_error().valid_up_to();
            let line = e.as_bytes()[..valid].iter().filter(|&&b| b == b'\n').count() + 1;
            Err(Error::Decoding { line, path: path.display().to_string() })
        }
    }
}

/// Loads a one-sentence-per-line corpus, normalizing and tokenizing each line.
pub fn read_corpus(path: &Path) -> Result<Vec<SentenceRecord>> {
    let text = read_utf8(path)?;
    Ok(text
        .lines()
        .map(|line| {
            let raw = line.to_string();
            let norm = normalize_text(line);
            let tokens = tokenize(&norm);
            SentenceRecord { raw, tokens, normalized: true, truecased: false }
        })
        .collect())
}
