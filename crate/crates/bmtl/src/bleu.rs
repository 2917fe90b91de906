//! Corpus-level BLEU-4 with brevity penalty and clipped n-gram counts.
//!
//! Both sides are re-tokenized with the textpipe rules, so callers hand in
//! plain detokenized text. Per-sentence match counts are clipped at the
//! reference counts and aggregated corpus-wide. Two totality rules make
//! the metric defined on any input: a zero-match order is floored at 0.1
//! matches, and orders with no hypothesis n-grams at all are dropped with
//! the geometric-mean weights renormalized over the rest.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::textpipe::tokenize;

pub const MAX_ORDER: usize = 4;
const ZERO_MATCH_FLOOR: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BleuReport {
    /// 0 to 100.
    pub bleu: f64,
    /// Clipped precisions per order; 0 for dropped orders.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BLEU = {:.2} {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            self.precisions[0] * 100.0,
            self.precisions[1] * 100.0,
            self.precisions[2] * 100.0,
            self.precisions[3] * 100.0,
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len
        )
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Aggregated clipped counts; exposed so tests can assert monotonicity of
/// the raw accumulators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BleuCounts {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuCounts {
    pub fn accumulate(&mut self, hypothesis: &str, reference: &str) {
        let hyp = tokenize(hypothesis);
        let reference = tokenize(reference);
        self.hyp_len += hyp.len() as u64;
        self.ref_len += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            let hyp_ngrams = ngram_counts(&hyp, n);
            let ref_ngrams = ngram_counts(&reference, n);
            for (gram, &count) in &hyp_ngrams {
                let clip = ref_ngrams.get(gram).copied().unwrap_or(0);
                self.matches[n - 1] += count.min(clip);
            }
            self.totals[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
        }
    }

    pub fn finish(&self) -> BleuReport {
        let mut precisions = [0.0; MAX_ORDER];
        let mut log_sum = 0.0;
        let mut kept = 0usize;
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                continue;
            }
            let matches = (self.matches[n] as f64).max(ZERO_MATCH_FLOOR);
            let p = matches / self.totals[n] as f64;
            precisions[n] = p;
            log_sum += p.ln();
            kept += 1;
        }
        let geo = if kept > 0 { (log_sum / kept as f64).exp() } else { 0.0 };
        let brevity_penalty = if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        let bleu = if self.hyp_len == 0 { 0.0 } else { 100.0 * brevity_penalty * geo };
        BleuReport {
            bleu,
            precisions,
            brevity_penalty,
            hyp_len: self.hyp_len as usize,
            ref_len: self.ref_len as usize,
        }
    }
}

/// Scores a hypothesis corpus against a single reference per line.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::Mismatch(format!(
            "hypothesis count {} does not match reference count {}",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus("BLEU scoring".into()));
    }
    let mut counts = BleuCounts::default();
    for (h, r) in hypotheses.iter().zip(references) {
        counts.accumulate(h.as_ref(), r.as_ref());
    }
    Ok(counts.finish())
}
