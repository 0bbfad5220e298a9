//! Stems frozen from an independent reference implementation of the original
//! Porter algorithm. Words of two letters or fewer are excluded: the reference
//! C implementation leaves them unstemmed, as does this crate.

use instructbias_core::textproc::{lemmatize, porter_stem, Language};

const GOLDEN: &str = include_str!("data/porter_golden.tsv");

#[test]
fn matches_reference_stems() {
    let mut mismatches = Vec::new();
    let mut total = 0;
    for line in GOLDEN.lines() {
        let (word, expected) = line.split_once('\t').unwrap();
        total += 1;
        let got = porter_stem(word);
        if got != expected {
            mismatches.push(format!("{word}: expected {expected}, got {got}"));
        }
    }
    assert!(total > 2000);
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}

#[test]
fn lemmatize_is_idempotent_on_reference_vocabulary() {
    let en = Language::English;
    for line in GOLDEN.lines() {
        let (word, _) = line.split_once('\t').unwrap();
        let once = lemmatize(word, &en);
        assert_eq!(lemmatize(&once, &en), once, "{word}");
    }
}
