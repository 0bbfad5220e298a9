//! Small synthetic tasks and corpora for demos, tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Example, Instance, Languages, TaskCorpus, TaskRecord};

pub fn example(input: &str, output: &str, explanation: &str) -> Example {
    Example {
        input: input.to_string(),
        output: output.to_string(),
        explanation: explanation.to_string(),
    }
}

pub fn instance(id: &str, input: &str, outputs: &[&str]) -> Instance {
    Instance {
        instance_id: id.to_string(),
        input: input.to_string(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    }
}

/// An English task with one category, domain and source.
pub fn task(
    task_id: &str,
    task_type: &str,
    definition: &str,
    positive: Vec<Example>,
    negative: Vec<Example>,
    instances: Vec<Instance>,
) -> TaskRecord {
    TaskRecord {
        task_id: task_id.to_string(),
        name: task_id.to_string(),
        sources: vec!["synthetic".to_string()],
        categories: vec![task_type.to_string()],
        domains: vec!["General".to_string()],
        languages: Languages {
            input: vec!["English".to_string()],
            output: vec!["English".to_string()],
            instruction: vec!["English".to_string()],
        },
        definition: definition.to_string(),
        positive_examples: positive,
        negative_examples: negative,
        instances,
        version: 0,
        extra: Default::default(),
    }
}

const TOPICS: &[(&str, &str, &[&str])] = &[
    (
        "Text Modification",
        "Rewrite the given sentence so that it contradicts the premise.",
        &["man", "bicycle", "street", "woman", "bench", "park", "rides", "sits", "contradict", "premise"],
    ),
    (
        "Translation",
        "Translate the given English sentence into French.",
        &["translate", "french", "english", "house", "garden", "morning", "bread", "friend", "city", "river"],
    ),
    (
        "Sentiment Analysis",
        "Classify the sentiment of the given review as positive or negative.",
        &["review", "movie", "great", "terrible", "acting", "plot", "boring", "excellent", "service", "food"],
    ),
    (
        "Question Answering",
        "Answer the question using a span from the given passage.",
        &["passage", "question", "answer", "capital", "year", "president", "river", "mountain", "war", "city"],
    ),
];

/// `n` tasks cycling through four task types, each with `instances_per_task`
/// instances drawn from the type's vocabulary. Deterministic for a seed.
pub fn synthetic_corpus(n: usize, instances_per_task: usize, seed: u64) -> TaskCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = TaskCorpus::new();
    for i in 0..n {
        let (task_type, definition, vocab) = TOPICS[i % TOPICS.len()];
        let mut sentence = |len: usize| -> String {
            (0..len)
                .map(|_| *vocab.choose(&mut rng).expect("non-empty vocabulary"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let pos = vec![
            example(&sentence(6), &sentence(3), &sentence(5)),
            example(&sentence(6), &sentence(3), &sentence(5)),
        ];
        let neg = vec![example(&sentence(6), &sentence(3), &sentence(4))];
        let instances = (0..instances_per_task)
            .map(|j| {
                let input = sentence(5);
                instance(&format!("task{i:03}-{j}"), &input, &[&input])
            })
            .collect();
        let definition = format!("{definition} Variant {}.", rng.random_range(0..1000));
        let record = task(&format!("task{i:03}"), task_type, &definition, pos, neg, instances);
        corpus.insert(record).expect("synthetic tasks are valid");
    }
    corpus
}
