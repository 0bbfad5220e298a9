//! Averaged-perceptron POS tagger over word, affix and context features.
//!
//! The model file is plain UTF-8 text:
//!
//! ```text
//! #instructbias-pos-tagger
//! version 1
//! classes ADJ ADP ADV ...
//! tagdict <m>
//! features <n>
//! <word>\t<TAG>                       (m lines)
//! <feature>\t<TAG>=<weight> ...       (n lines)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lemmatize, Language, PosClass, TaggedToken, TextError};

const MAGIC: &str = "#instructbias-pos-tagger";
const FORMAT_VERSION: u32 = 1;
const BUNDLED: &str = include_str!("../../resources/tagger/en-perceptron.model");

const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

/// A tokenized sentence with one gold tag per token.
#[derive(Debug, Clone)]
pub struct TrainingSentence {
    pub words: Vec<String>,
    pub tags: Vec<String>,
}

impl TrainingSentence {
    /// Parses `word/TAG word/TAG ...`; the tag is everything after the last `/`.
    pub fn parse_line(line: &str) -> Option<TrainingSentence> {
        let mut words = Vec::new();
        let mut tags = Vec::new();
        for item in line.split_whitespace() {
            let (word, tag) = item.rsplit_once('/')?;
            if word.is_empty() || tag.is_empty() {
                return None;
            }
            words.push(word.to_lowercase());
            tags.push(tag.to_string());
        }
        (!words.is_empty()).then_some(TrainingSentence { words, tags })
    }
}

fn normalize(word: &str) -> String {
    if word.contains('-') && !word.starts_with('-') {
        "!HYPHEN".to_string()
    } else if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        "!YEAR".to_string()
    } else if word.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        "!DIGITS".to_string()
    } else {
        word.to_lowercase()
    }
}

fn suffix(word: &str, n: usize) -> &str {
    let start = word
        .char_indices()
        .rev()
        .nth(n.saturating_sub(1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    &word[start..]
}

fn prefix1(word: &str) -> &str {
    word.char_indices()
        .nth(1)
        .map(|(i, _)| &word[..i])
        .unwrap_or(word)
}

fn features(i: usize, word: &str, context: &[String], prev: &str, prev2: &str) -> Vec<String> {
    // context is padded with two start and two end symbols
    let i = i + 2;
    let raw = word.to_lowercase();
    vec![
        "bias".to_string(),
        format!("i suffix {}", suffix(&raw, 3)),
        format!("i pref1 {}", prefix1(&raw)),
        format!("i-1 tag {prev}"),
        format!("i-2 tag {prev2}"),
        format!("i tag+i-2 tag {prev} {prev2}"),
        format!("i word {}", context[i]),
        format!("i-1 tag+i word {prev} {}", context[i]),
        format!("i-1 word {}", context[i - 1]),
        format!("i-1 suffix {}", suffix(&context[i - 1], 3)),
        format!("i-2 word {}", context[i - 2]),
        format!("i+1 word {}", context[i + 1]),
        format!("i+1 suffix {}", suffix(&context[i + 1], 3)),
        format!("i+2 word {}", context[i + 2]),
    ]
}

fn padded_context(words: &[String]) -> Vec<String> {
    START
        .iter()
        .map(|s| s.to_string())
        .chain(words.iter().map(|w| normalize(w)))
        .chain(END.iter().map(|s| s.to_string()))
        .collect()
}

/// The learner. Weights are averaged over every update step once training
/// finishes.
#[derive(Debug, Clone, Default)]
pub struct AveragedPerceptron {
    classes: Vec<String>,
    weights: HashMap<String, Vec<f64>>,
    totals: HashMap<(String, usize), f64>,
    stamps: HashMap<(String, usize), u64>,
    instances: u64,
}

impl AveragedPerceptron {
    pub fn new(mut classes: Vec<String>) -> Self {
        classes.sort();
        classes.dedup();
        AveragedPerceptron {
            classes,
            ..Default::default()
        }
    }

    fn predict(&self, feats: &[String]) -> usize {
        let mut scores = vec![0.0; self.classes.len()];
        for f in feats {
            if let Some(w) = self.weights.get(f) {
                for (s, x) in scores.iter_mut().zip(w) {
                    *s += x;
                }
            }
        }
        argmax(&scores)
    }

    fn update(&mut self, truth: usize, guess: usize, feats: &[String]) {
        self.instances += 1;
        if truth == guess {
            return;
        }
        let n_classes = self.classes.len();
        for f in feats {
            for (class, delta) in [(truth, 1.0), (guess, -1.0)] {
                let key = (f.clone(), class);
                let w = self
                    .weights
                    .entry(f.clone())
                    .or_insert_with(|| vec![0.0; n_classes]);
                let stamp = self.stamps.get(&key).copied().unwrap_or(0);
                *self.totals.entry(key.clone()).or_insert(0.0) +=
                    (self.instances - stamp) as f64 * w[class];
                self.stamps.insert(key, self.instances);
                w[class] += delta;
            }
        }
    }

    fn average(&mut self) {
        let instances = self.instances.max(1) as f64;
        for (feat, w) in self.weights.iter_mut() {
            for (class, weight) in w.iter_mut().enumerate() {
                let key = (feat.clone(), class);
                let total = self.totals.get(&key).copied().unwrap_or(0.0)
                    + (self.instances - self.stamps.get(&key).copied().unwrap_or(0)) as f64
                        * *weight;
                *weight = total / instances;
            }
        }
    }

    /// Trains a tagger for `iterations` epochs with a seeded shuffle.
    pub fn train(sentences: &[TrainingSentence], iterations: usize, seed: u64) -> PosTagger {
        let classes: Vec<String> = sentences
            .iter()
            .flat_map(|s| s.tags.iter().cloned())
            .collect();
        let mut model = AveragedPerceptron::new(classes);
        let tagdict = build_tagdict(sentences);
        let class_index: HashMap<String, usize> = model
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();

        let mut order: Vec<usize> = (0..sentences.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..iterations {
            for &si in &order {
                let sentence = &sentences[si];
                let context = padded_context(&sentence.words);
                let mut prev = START[0].to_string();
                let mut prev2 = START[1].to_string();
                for (i, word) in sentence.words.iter().enumerate() {
                    let guess = match tagdict.get(word) {
                        Some(tag) => class_index[tag],
                        None => {
                            let feats = features(i, word, &context, &prev, &prev2);
                            let guess = model.predict(&feats);
                            model.update(class_index[&sentence.tags[i]], guess, &feats);
                            guess
                        }
                    };
                    prev2 = prev;
                    prev = model.classes[guess].clone();
                }
            }
            order.shuffle(&mut rng);
        }
        model.average();

        PosTagger {
            classes: model.classes,
            weights: model
                .weights
                .into_iter()
                .filter_map(|(f, w)| {
                    let w: Vec<f64> = w.into_iter().map(round_weight).collect();
                    w.iter().any(|x| *x != 0.0).then_some((f, w))
                })
                .collect(),
            tagdict,
        }
    }
}

fn round_weight(w: f64) -> f64 {
    let r = (w * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Frequent words that are (almost) always seen with the same tag skip the
/// model entirely.
fn build_tagdict(sentences: &[TrainingSentence]) -> BTreeMap<String, String> {
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for s in sentences {
        for (w, t) in s.words.iter().zip(&s.tags) {
            *counts.entry(w).or_default().entry(t).or_insert(0) += 1;
        }
    }
    const FREQ_THRESHOLD: usize = 10;
    const AMBIGUITY_THRESHOLD: f64 = 0.97;
    counts
        .into_iter()
        .filter_map(|(word, tags)| {
            let n: usize = tags.values().sum();
            let (tag, mode) = tags.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))?;
            (n >= FREQ_THRESHOLD && mode as f64 / n as f64 >= AMBIGUITY_THRESHOLD)
                .then(|| (word.to_string(), tag.to_string()))
        })
        .collect()
}

/// A trained, immutable tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct PosTagger {
    classes: Vec<String>,
    weights: HashMap<String, Vec<f64>>,
    tagdict: BTreeMap<String, String>,
}

impl PosTagger {
    /// The English model compiled into the crate, parsed once.
    pub fn bundled() -> Result<&'static PosTagger, TextError> {
        static MODEL: OnceLock<Result<PosTagger, String>> = OnceLock::new();
        MODEL
            .get_or_init(|| PosTagger::parse(BUNDLED).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|reason| TextError::ModelLoadError {
                path: "<bundled en-perceptron.model>".to_string(),
                reason: reason.clone(),
            })
    }

    pub fn load(path: &Path) -> Result<PosTagger, TextError> {
        let contents = std::fs::read_to_string(path).map_err(|e| TextError::ModelLoadError {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        PosTagger::parse(&contents).map_err(|e| match e {
            TextError::ModelLoadError { reason, .. } => TextError::ModelLoadError {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn parse(contents: &str) -> Result<PosTagger, TextError> {
        let bad = |reason: String| TextError::ModelLoadError {
            path: "<memory>".to_string(),
            reason,
        };
        let mut lines = contents.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing magic header".into()));
        }
        let mut header = |key: &str| -> Result<String, TextError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
        };
        let version: u32 = header("version")?
            .parse()
            .map_err(|_| bad("unparseable version".into()))?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported model version {version}")));
        }
        let classes: Vec<String> = header("classes")?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        if classes.is_empty() {
            return Err(bad("no classes".into()));
        }
        let n_dict: usize = header("tagdict")?
            .parse()
            .map_err(|_| bad("unparseable tagdict count".into()))?;
        let n_feats: usize = header("features")?
            .parse()
            .map_err(|_| bad("unparseable feature count".into()))?;
        let class_index: HashMap<&str, usize> =
            classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

        let mut tagdict = BTreeMap::new();
        for _ in 0..n_dict {
            let line = lines.next().ok_or_else(|| bad("truncated tagdict".into()))?;
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("bad tagdict line `{line}`")))?;
            if !class_index.contains_key(tag) {
                return Err(bad(format!("unknown tag `{tag}` in tagdict")));
            }
            tagdict.insert(word.to_string(), tag.to_string());
        }

        let mut weights = HashMap::with_capacity(n_feats);
        for _ in 0..n_feats {
            let line = lines.next().ok_or_else(|| bad("truncated feature table".into()))?;
            let (feat, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("bad feature line `{line}`")))?;
            let mut w = vec![0.0; classes.len()];
            for pair in rest.split(' ') {
                let (tag, value) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("bad weight `{pair}`")))?;
                let idx = *class_index
                    .get(tag)
                    .ok_or_else(|| bad(format!("unknown tag `{tag}`")))?;
                w[idx] = value
                    .parse()
                    .map_err(|_| bad(format!("bad weight value `{value}`")))?;
            }
            weights.insert(feat.to_string(), w);
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing data after feature table".into()));
        }
        Ok(PosTagger {
            classes,
            weights,
            tagdict,
        })
    }

    /// Serializes to the model file format. Features are written sorted so the
    /// output is byte-stable.
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "version {FORMAT_VERSION}");
        let _ = writeln!(out, "classes {}", self.classes.join(" "));
        let _ = writeln!(out, "tagdict {}", self.tagdict.len());
        let _ = writeln!(out, "features {}", self.weights.len());
        for (word, tag) in &self.tagdict {
            let _ = writeln!(out, "{word}\t{tag}");
        }
        let mut feats: Vec<&String> = self.weights.keys().collect();
        feats.sort();
        for feat in feats {
            let pairs: Vec<String> = self.weights[feat]
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| format!("{}={}", self.classes[i], w))
                .collect();
            let _ = writeln!(out, "{feat}\t{}", pairs.join(" "));
        }
        out
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    /// Fine-grained tags, one per word.
    pub fn tag_words(&self, words: &[String]) -> Vec<String> {
        let context = padded_context(words);
        let mut prev = START[0].to_string();
        let mut prev2 = START[1].to_string();
        let mut tags = Vec::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            let tag = match self.tagdict.get(&word.to_lowercase()) {
                Some(tag) => tag.clone(),
                None => {
                    let feats = features(i, word, &context, &prev, &prev2);
                    let mut scores = vec![0.0; self.classes.len()];
                    for f in &feats {
                        if let Some(w) = self.weights.get(f) {
                            for (s, x) in scores.iter_mut().zip(w) {
                                *s += x;
                            }
                        }
                    }
                    self.classes[argmax(&scores)].clone()
                }
            };
            prev2 = std::mem::replace(&mut prev, tag.clone());
            tags.push(tag);
        }
        tags
    }

    pub fn tag_tokens(&self, words: &[String], language: &Language) -> Vec<TaggedToken> {
        self.tag_words(words)
            .into_iter()
            .zip(words)
            .map(|(tag, word)| TaggedToken {
                surface: word.clone(),
                lemma: lemmatize(word, language),
                pos_class: PosClass::from_tag(&tag),
            })
            .collect()
    }

    /// Token-level accuracy against gold sentences.
    pub fn accuracy(&self, sentences: &[TrainingSentence]) -> f64 {
        let (mut correct, mut total) = (0usize, 0usize);
        for s in sentences {
            for (guess, gold) in self.tag_words(&s.words).iter().zip(&s.tags) {
                correct += usize::from(guess == gold);
                total += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(lines: &[&str]) -> Vec<TrainingSentence> {
        lines
            .iter()
            .map(|l| TrainingSentence::parse_line(l).unwrap())
            .collect()
    }

    #[test]
    fn trains_on_tiny_corpus_and_round_trips() {
        let train = sentences(&[
            "the/DET dog/NOUN barks/VERB",
            "a/DET cat/NOUN sleeps/VERB",
            "the/DET big/ADJ dog/NOUN runs/VERB quickly/ADV",
            "a/DET small/ADJ cat/NOUN walks/VERB slowly/ADV",
        ]);
        let tagger = AveragedPerceptron::train(&train, 8, 7);
        assert!(tagger.accuracy(&train) > 0.9);
        let text = tagger.to_model_string();
        let reloaded = PosTagger::parse(&text).unwrap();
        assert_eq!(reloaded.to_model_string(), text);
        assert_eq!(reloaded.tag_words(&train[2].words), tagger.tag_words(&train[2].words));
    }

    #[test]
    fn corrupt_models_are_rejected() {
        assert!(matches!(
            PosTagger::parse("not a model"),
            Err(TextError::ModelLoadError { .. })
        ));
        let truncated = format!("{MAGIC}\nversion 1\nclasses A B\ntagdict 0\nfeatures 3\nbias\tA=1\n");
        assert!(PosTagger::parse(&truncated).is_err());
        let wrong_version = format!("{MAGIC}\nversion 9\nclasses A\ntagdict 0\nfeatures 0\n");
        assert!(PosTagger::parse(&wrong_version).is_err());
    }

    #[test]
    fn missing_file_is_model_load_error() {
        let err = PosTagger::load(Path::new("/nonexistent/model.txt")).unwrap_err();
        assert!(matches!(err, TextError::ModelLoadError { path, .. } if path.contains("nonexistent")));
    }

    #[test]
    fn bundled_model_loads() {
        let tagger = PosTagger::bundled().unwrap();
        assert!(tagger.feature_count() > 1000);
        assert!(tagger.classes().iter().any(|c| c == "NOUN"));
    }

    #[test]
    fn tagging_preserves_length_and_order() {
        let words: Vec<String> = "given a sentence generate a new sentence"
            .split(' ')
            .map(str::to_string)
            .collect();
        let tagged = PosTagger::bundled()
            .unwrap()
            .tag_tokens(&words, &Language::English);
        assert_eq!(tagged.len(), words.len());
        for (t, w) in tagged.iter().zip(&words) {
            assert_eq!(&t.surface, w);
        }
    }

    #[test]
    fn suffix_and_prefix_are_char_safe() {
        assert_eq!(suffix("größe", 3), "öße");
        assert_eq!(suffix("ab", 3), "ab");
        assert_eq!(prefix1("über"), "ü");
    }
}
