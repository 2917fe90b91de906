//! Greedy versus beam search on a hand-built step decoder whose greedy
//! first pick leads into a low-probability suffix.
//!
//! ```bash
//! cargo run -p bmtl --example beam_decode
//! ```

use bmtl::decoding::{beam_search_decode, greedy_decode, StepDecoder};
use bmtl::subword::{BOS_ID, EOS_ID};

/// After BOS: p(4)=0.6, p(5)=0.4. Token 4 leads nowhere good; token 5
/// finishes cleanly.
struct Trap;

impl StepDecoder for Trap {
    type State = ();
    fn vocab_size(&self) -> usize {
        6
    }
    fn start(&self) {}
    fn step(&self, _: &(), prev: u32) -> ((), Vec<f64>) {
        let mut probs = vec![1e-12; 6];
        match prev {
            BOS_ID => {
                probs[4] = 0.6;
                probs[5] = 0.4;
            }
            4 => {
                probs[EOS_ID as usize] = 0.1;
                probs[4] = 0.225;
                probs[5] = 0.225;
            }
            _ => {
                probs[EOS_ID as usize] = 0.9;
                probs[4] = 0.025;
                probs[5] = 0.025;
            }
        }
        ((), probs.into_iter().map(f64::ln).collect())
    }
}

fn main() {
    let greedy = greedy_decode(&Trap, "trap", 8, 1.0);
    println!(
        "greedy: ids {:?}  score {:.3}  normalized {:.3}",
        greedy.ids, greedy.score, greedy.normalized
    );
    for beam in [1, 2, 4] {
        let hyp = beam_search_decode(&Trap, "trap", beam, 8, 1.0);
        println!(
            "beam {beam}: ids {:?}  score {:.3}  normalized {:.3}",
            hyp.ids, hyp.score, hyp.normalized
        );
    }
    println!("beam 1 reproduces greedy; beam 2 finds the better finish through token 5");
}
