//! Retrains the bundled English POS model from the corpora under
//! `resources/tagger/` and rewrites `en-perceptron.model`.
//!
//! cargo run -p instructbias-core --example train_tagger --release

use std::path::PathBuf;

use instructbias_core::textproc::{AveragedPerceptron, TrainingSentence};

const ITERATIONS: usize = 8;
const SEED: u64 = 1;

fn read_corpus(path: &PathBuf) -> Vec<TrainingSentence> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| TrainingSentence::parse_line(l).unwrap_or_else(|| panic!("bad line: {l}")))
        .collect()
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("resources/tagger");
    let hand = read_corpus(&dir.join("handtagged.txt"));
    let synthetic = read_corpus(&dir.join("synthetic.txt"));

    // held-out check on every fifth hand-tagged sentence
    let (heldout, train_hand): (Vec<_>, Vec<_>) = hand
        .iter()
        .cloned()
        .enumerate()
        .partition(|(i, _)| i % 5 == 0);
    let mut train: Vec<TrainingSentence> = train_hand.into_iter().map(|(_, s)| s).collect();
    train.extend(synthetic.iter().cloned());
    let heldout: Vec<TrainingSentence> = heldout.into_iter().map(|(_, s)| s).collect();
    let probe = AveragedPerceptron::train(&train, ITERATIONS, SEED);
    println!("held-out accuracy: {:.4}", probe.accuracy(&heldout));

    // the shipped model sees the hand-tagged sentences three times over
    let mut all = Vec::new();
    for _ in 0..3 {
        all.extend(hand.iter().cloned());
    }
    all.extend(synthetic);
    let tagger = AveragedPerceptron::train(&all, ITERATIONS, SEED);
    println!("training accuracy: {:.4}", tagger.accuracy(&all));
    println!("features: {}", tagger.feature_count());
    let out = dir.join("en-perceptron.model");
    std::fs::write(&out, tagger.to_model_string()).expect("write model");
    println!("wrote {}", out.display());
}
