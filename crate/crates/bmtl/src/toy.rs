//! Synthetic word-reversal corpora for self-contained experiments.
//!
//! Sentences are short sequences of made-up consonant-vowel words; the
//! target is the source in reverse word order. Small models learn the
//! task quickly, which makes it a good stand-in for translation when
//! exercising the full pipeline.

use std::path::Path;

use crate::error::Result;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub train: Vec<(String, String)>,
    pub dev: Vec<(String, String)>,
    pub test: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ToySpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub vocab_words: usize,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            seed: 2024,
            n_train: 300,
            n_dev: 50,
            n_test: 50,
            vocab_words: 30,
            min_words: 2,
            max_words: 6,
        }
    }
}

const ONSETS: [&str; 8] = ["b", "d", "f", "g", "k", "l", "m", "n"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["", "n", "r", "s", "t", "l"];

fn make_word(rng: &mut Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.below(ONSETS.len())]);
        w.push_str(VOWELS[rng.below(VOWELS.len())]);
    }
    w.push_str(CODAS[rng.below(CODAS.len())]);
    w
}

fn capitalize(line: &str) -> String {
    let mut chars = line.chars();
    match chars.next() {
        Some(head) => head.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Deterministic reversal corpus. Raw lines are sentence-capitalized the
/// way natural text is, so the truecasing stages have real work to do;
/// the distinct-character alphabet stays under thirty.
pub fn generate_reversal(spec: &ToySpec) -> ToyCorpus {
    let mut rng = Rng::stream(spec.seed, "toy-vocab", 0);
    let mut vocab = Vec::with_capacity(spec.vocab_words);
    while vocab.len() < spec.vocab_words {
        let syllables = 1 + rng.below(2);
        let w = make_word(&mut rng, syllables);
        if !vocab.contains(&w) {
            vocab.push(w);
        }
    }

    let make_split = |name: &str, n: usize| -> Vec<(String, String)> {
        let mut rng = Rng::stream(spec.seed, name, 0);
        (0..n)
            .map(|_| {
                let len = spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
                let words: Vec<&str> =
                    (0..len).map(|_| vocab[rng.below(vocab.len())].as_str()).collect();
                let source = capitalize(&words.join(" "));
                let target =
                    capitalize(&words.iter().rev().copied().collect::<Vec<_>>().join(" "));
                (source, target)
            })
            .collect()
    };

    ToyCorpus {
        train: make_split("toy-train", spec.n_train),
        dev: make_split("toy-dev", spec.n_dev),
        test: make_split("toy-test", spec.n_test),
    }
}

impl ToyCorpus {
    /// Writes train/dev/test .src/.tgt files, one sentence per line.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, split) in
            [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
        {
            let src: String = split.iter().map(|(s, _)| format!("{s}\n")).collect();
            let tgt: String = split.iter().map(|(_, t)| format!("{t}\n")).collect();
            std::fs::write(dir.join(format!("{name}.src")), src)?;
            std::fs::write(dir.join(format!("{name}.tgt")), tgt)?;
        }
        Ok(())
    }
}
