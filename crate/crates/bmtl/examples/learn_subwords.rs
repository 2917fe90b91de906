//! Byte-pair segmentation at a ladder of vocabulary budgets: coarser
//! budgets extend finer ones, and every corpus word survives the
//! encode/decode round trip.
//!
//! ```bash
//! cargo run -p bmtl --example learn_subwords
//! ```

use std::collections::BTreeMap;

use bmtl::subword::{decode_to_words, encode_sentence, learn_bpe, segment_word};

fn main() {
    let mut freqs: BTreeMap<String, u64> = BTreeMap::new();
    for (word, count) in [
        ("low", 9),
        ("lower", 4),
        ("lowest", 3),
        ("newer", 5),
        ("newest", 4),
        ("wider", 2),
        ("widest", 2),
    ] {
        freqs.insert(word.to_string(), count);
    }

    for budget in [24, 32, 48] {
        let (table, vocab) = learn_bpe(&freqs, budget).expect("budget above base alphabet");
        println!("budget {budget}: {} merges, vocabulary {}", table.len(), vocab.size());
        for (rank, (left, right)) in table.merges().iter().enumerate().take(6) {
            println!("  merge {rank}: {left} + {right}");
        }
        for word in ["lowest", "newest", "widen"] {
            println!("  {word} -> {:?}", segment_word(&table, word));
        }
        let ids = encode_sentence(&vocab, &table, &["lower", "newest"]);
        let back = decode_to_words(&vocab, &ids).expect("ids from this vocabulary");
        println!("  encode/decode: {ids:?} -> {back:?}");
    }
}
