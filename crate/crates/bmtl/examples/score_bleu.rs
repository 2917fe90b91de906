//! Corpus BLEU with clipped n-grams and brevity penalty.
//!
//! ```bash
//! cargo run -p bmtl --example score_bleu
//! ```

use bmtl::bleu::corpus_bleu;

fn main() {
    let cases = [
        ("exact match", vec!["the cat sat on the mat"], vec!["the cat sat on the mat"]),
        ("one substitution", vec!["the cat sat on the mat"], vec!["the cat sat on a mat"]),
        ("short hypothesis", vec!["the cat"], vec!["the cat on the mat"]),
        (
            "small corpus",
            vec!["the cat sat", "a dog ran far away", "birds fly south"],
            vec!["the cat sat down", "a dog ran far", "birds fly south in winter"],
        ),
    ];
    for (tag, hyps, refs) in cases {
        let report = corpus_bleu(&hyps, &refs).expect("aligned corpora");
        println!("{tag:>16}: {report}");
    }
}
