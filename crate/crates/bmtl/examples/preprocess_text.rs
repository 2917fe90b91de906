//! Corpus preprocessing: normalization, tokenization, truecasing, and
//! their inverses.
//!
//! ```bash
//! cargo run -p bmtl --example preprocess_text
//! ```

use bmtl::textpipe::{
    apply_truecase, detokenize, detruecase, normalize_text, tokenize, train_truecaser,
};

fn main() {
    let raw = "The \u{201c}quick\u{201d} fox \u{2014} all 3.14 of it \u{2026} jumped!";
    println!("raw:        {raw}");
    let norm = normalize_text(raw);
    println!("normalized: {norm}");
    let tokens = tokenize(&norm);
    println!("tokens:     {tokens:?}");
    println!("detokenized: {}", detokenize(&tokens));

    // casing statistics from a tiny corpus
    let corpus: Vec<Vec<String>> = [
        "The engine room hums .",
        "Rust programs hum too .",
        "The NASA probe hums quietly .",
        "Engineers at NASA agree .",
    ]
    .iter()
    .map(|line| tokenize(&normalize_text(line)))
    .collect();
    let model = train_truecaser(&corpus).expect("non-empty corpus");

    let sentence = tokenize("NASA the engine hums .");
    for head in ["The", "Nasa", "Engineers"] {
        let mut s = sentence.clone();
        s[0] = head.to_string();
        let truecased = apply_truecase(&model, &s);
        println!("{head:>10} -> truecased {truecased:?}");
        println!("{:>10}    restored  {:?}", "", detruecase(&truecased));
    }
}
