//! Multi-engine combination: three system outputs for one sentence are
//! aligned pairwise and merged by the constrained beam search.
//!
//! ```bash
//! cargo run -p bmtl --example combine_hypotheses
//! ```

use bmtl::combine::{
    align_pair, combine_line, default_lambdas, train_lm, CombineParams, HypothesisSet,
};

fn words(line: &str) -> Vec<String> {
    line.split(' ').map(str::to_string).collect()
}

fn main() {
    let lm_corpus: Vec<Vec<String>> = [
        "the black cat sat on the mat",
        "the cat slept on a mat",
        "a black dog sat there",
    ]
    .iter()
    .map(|l| words(l))
    .collect();
    let lm = train_lm(&lm_corpus, 3, &default_lambdas()).expect("weights sum to one");

    let systems = vec![
        words("the black cat sat"),
        words("the cat sat"),
        words("a black cats sat"),
    ];
    println!("pairwise alignment of systems 0 and 2:");
    for link in align_pair(&systems[0], &systems[2]) {
        println!(
            "  (0, {}) {:?} <-> (2, {}) {:?}  [{:?}]",
            link.a_pos, systems[0][link.a_pos], link.b_pos, systems[2][link.b_pos], link.kind
        );
    }

    let set = HypothesisSet::new(systems, None).expect("non-empty set");
    let out = combine_line(&set, &lm, &CombineParams::default()).expect("combination");
    println!("combined: {:?} (score {:.3})", out.words.join(" "), out.score);
    for em in &out.trace {
        println!(
            "  emitted {:?} from system {} position {}, consuming {:?}",
            em.word, em.system, em.position, em.consumed
        );
    }
}
