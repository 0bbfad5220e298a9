use super::*;
use crate::fixtures::{example, instance, synthetic_corpus, task};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_embeddings(n: usize, dim: usize, seed: u64) -> Embeddings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (format!("t{i:04}"), EmbeddingVector::normalized(v).unwrap())
        })
        .collect()
}

fn unit(values: &[f64]) -> EmbeddingVector {
    EmbeddingVector::normalized(values.to_vec()).unwrap()
}

#[test]
fn tfidf_contract() {
    let corpus = synthetic_corpus(3, 2, 7);
    let tasks: Vec<&TaskRecord> = corpus.current().map(|t| t.as_ref()).collect();
    let provider = TfIdfProvider::new(1);
    let emb = provider.embed(&tasks).unwrap();
    assert_eq!(emb.len(), 3);
    for v in emb.values() {
        assert_eq!(v.dim(), 256);
        let norm: f64 = v.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    for t in &tasks {
        assert_eq!(&provider.embed_one(t).unwrap(), &emb[&t.task_id]);
    }
}

#[test]
fn identical_instructions_embed_identically() {
    let make = |id: &str| {
        task(id, "x", "Rewrite the sentence.", vec![example("a dog", "a cat", "swap")], vec![], vec![instance("i", "z", &["z"])])
    };
    let other = task("c", "x", "Count the vowels.", vec![], vec![], vec![]);
    let (a, b) = (make("a"), make("b"));
    let emb = TfIdfProvider::new(3).embed(&[&a, &b, &other]).unwrap();
    assert_eq!(emb["a"], emb["b"]);
    assert_ne!(emb["a"], emb["c"]);
}

#[test]
fn tfidf_is_load_order_invariant() {
    let corpus = synthetic_corpus(8, 1, 11);
    let mut tasks: Vec<&TaskRecord> = corpus.current().map(|t| t.as_ref()).collect();
    let forward = TfIdfProvider::new(5).embed(&tasks).unwrap();
    tasks.reverse();
    tasks.swap(1, 4);
    let shuffled = TfIdfProvider::new(5).embed(&tasks).unwrap();
    assert_eq!(forward, shuffled);
}

#[test]
fn external_provider_reports_missing_ids() {
    let corpus = synthetic_corpus(3, 1, 1);
    let tasks: Vec<&TaskRecord> = corpus.current().map(|t| t.as_ref()).collect();
    let file = "dim=2 count=2\ntask000 1 0\ntask001 0 3\n";
    let provider = ExternalProvider::new(parse_embedding_file(file).unwrap());
    match provider.embed(&tasks) {
        Err(EmbedError::ProviderError { task_id, .. }) => assert_eq!(task_id, "task002"),
        other => panic!("expected ProviderError, got {other:?}"),
    }
    let v = provider.embed_one(tasks[1]).unwrap();
    assert_eq!(v.values(), &[0.0, 1.0]);
}

#[test]
fn embedding_file_round_trip_and_errors() {
    let emb = random_embeddings(4, 5, 2);
    let text = write_embedding_file(&emb);
    let back = parse_embedding_file(&text).unwrap();
    assert_eq!(back.keys().collect::<Vec<_>>(), emb.keys().collect::<Vec<_>>());
    for (a, b) in back.values().zip(emb.values()) {
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() < 1e-15));
    }
    assert!(matches!(parse_embedding_file("dim=3\n"), Err(EmbedError::File(_))));
    assert!(matches!(
        parse_embedding_file("dim=3 count=1\na 1 2\n"),
        Err(EmbedError::DimensionMismatch { expected: 3, found: 2 })
    ));
    assert!(matches!(parse_embedding_file("dim=1 count=2\na 1\n"), Err(EmbedError::File(_))));
    assert!(matches!(parse_embedding_file("dim=1 count=1\na 0\n"), Err(EmbedError::File(_))));
    assert!(matches!(parse_embedding_file("dim=1 count=1\na x\n"), Err(EmbedError::File(_))));
}

#[test]
fn similarity_examples() {
    let a = unit(&[1.0, 0.0]);
    assert_eq!(similarity(&a, &a).unwrap(), 1.0);
    assert_eq!(similarity(&a, &unit(&[0.0, 1.0])).unwrap(), 0.5);
    assert_eq!(similarity(&a, &unit(&[-1.0, 0.0])).unwrap(), 0.0);
    assert!(matches!(similarity(&a, &unit(&[1.0, 0.0, 0.0])), Err(EmbedError::DimensionMismatch { .. })));
}

#[test]
fn neighbors_errors_and_duplicates() {
    let mut emb = random_embeddings(12, 8, 4);
    let root = emb["t0003"].clone();
    emb.insert("zzz-copy".to_string(), root);
    let r = nearest_neighbors(&emb, "t0003", 9).unwrap();
    assert_eq!(r.neighbors.len(), 9);
    assert_eq!(r.neighbors[0].task_id, "zzz-copy");
    assert!((r.neighbors[0].similarity - 1.0).abs() < 1e-12);
    assert!(r.neighbors.windows(2).all(|w| w[0].similarity >= w[1].similarity));
    assert!(r.neighbors.iter().all(|n| n.task_id != "t0003"));
    assert!(matches!(nearest_neighbors(&emb, "nope", 9), Err(EmbedError::UnknownTask(_))));
    assert!(matches!(nearest_neighbors(&emb, "t0003", 13), Err(EmbedError::CorpusTooSmall { size: 13, needed: 14 })));
    assert!(matches!(nearest_neighbors(&emb, "t0003", 0), Err(EmbedError::InvalidK)));
}

#[test]
fn neighbor_ties_break_by_id() {
    let emb: Embeddings = ["d", "b", "c", "root"]
        .iter()
        .map(|id| (id.to_string(), unit(&[1.0, 0.0])))
        .collect();
    let r = nearest_neighbors(&emb, "root", 2).unwrap();
    let ids: Vec<&str> = r.neighbors.iter().map(|n| n.task_id.as_str()).collect();
    assert_eq!(ids, ["b", "c"]);
}

fn full_sort_oracle(emb: &Embeddings, root: &str, k: usize) -> Vec<String> {
    let r = &emb[root];
    let mut all: Vec<(String, f64)> = emb
        .iter()
        .filter(|(id, _)| id.as_str() != root)
        .map(|(id, v)| {
            let dot: f64 = r.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
            (id.clone(), (1.0 + dot) / 2.0)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(id, _)| id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn knn_matches_full_sort(seed in any::<u64>(), root in 0usize..50, k in 1usize..12) {
        let emb = random_embeddings(50, 16, seed);
        let root_id = format!("t{root:04}");
        let got: Vec<String> = nearest_neighbors(&emb, &root_id, k).unwrap().neighbors.into_iter().map(|n| n.task_id).collect();
        prop_assert_eq!(got, full_sort_oracle(&emb, &root_id, k));
    }

    #[test]
    fn similarity_symmetric_and_bounded(seed in any::<u64>()) {
        let emb = random_embeddings(2, 6, seed);
        let (a, b) = (&emb["t0000"], &emb["t0001"]);
        let s = similarity(a, b).unwrap();
        prop_assert_eq!(s, similarity(b, a).unwrap());
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((similarity(a, a).unwrap() - 1.0).abs() < 1e-9);
    }
}

/// 60 points in three well-separated 50-d Gaussian clusters.
pub(crate) fn clustered(seed: u64) -> (Embeddings, BTreeMap<String, usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..50).map(|d| if d % 3 == c { 10.0 } else { 0.0 }).collect())
        .collect();
    let mut emb = Embeddings::new();
    let mut label = BTreeMap::new();
    for i in 0..60 {
        let c = i % 3;
        let v: Vec<f64> = centers[c]
            .iter()
            .map(|m| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                m + noise
            })
            .collect();
        let id = format!("p{i:02}");
        // raw coordinates, not re-normalized, keep clusters tight
        emb.insert(id.clone(), EmbeddingVector(v));
        label.insert(id, c);
    }
    (emb, label)
}

fn own_cluster_rate(points: &[ProjectionPoint], label: &BTreeMap<String, usize>) -> f64 {
    let hits = points
        .iter()
        .filter(|p| {
            let nearest = points
                .iter()
                .filter(|q| q.task_id != p.task_id)
                .min_by(|a, b| {
                    let d = |q: &ProjectionPoint| q.coords.iter().zip(&p.coords).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                    d(a).total_cmp(&d(b))
                })
                .unwrap();
            label[&nearest.task_id] == label[&p.task_id]
        })
        .count();
    hits as f64 / points.len() as f64
}

#[test]
fn tsne_separates_clusters_deterministically() {
    let (emb, label) = clustered(9);
    let cfg = TsneConfig::new(2, 42);
    let a = project_tsne(&emb, &cfg).unwrap();
    let b = project_tsne(&emb, &cfg).unwrap();
    assert_eq!(a.len(), 60);
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.task_id, q.task_id);
        assert!(p.coords.iter().zip(&q.coords).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(p.coords.iter().all(|x| x.is_finite()));
    }
    assert!(own_cluster_rate(&a, &label) >= 0.9);
}

#[test]
fn tsne_preconditions_and_3d() {
    let emb = random_embeddings(4, 5, 1);
    assert!(matches!(project_tsne(&emb, &TsneConfig::new(2, 0)), Err(EmbedError::TooFewPoints(4))));
    let emb = random_embeddings(12, 5, 1);
    assert!(matches!(project_tsne(&emb, &TsneConfig::new(4, 0)), Err(EmbedError::InvalidDims(4))));
    let cfg = TsneConfig { iterations: 100, ..TsneConfig::new(3, 0) };
    let pts = project_tsne(&emb, &cfg).unwrap();
    assert_eq!(pts.len(), 12);
    assert!(pts.iter().all(|p| p.coords.len() == 3));
    let ids: Vec<&String> = pts.iter().map(|p| &p.task_id).collect();
    assert_eq!(ids, emb.keys().collect::<Vec<_>>());
}

#[test]
fn tsne_handles_duplicate_points() {
    let mut emb = random_embeddings(6, 4, 3);
    let dup = emb["t0000"].clone();
    emb.insert("t0000b".into(), dup.clone());
    emb.insert("t0000c".into(), dup);
    let cfg = TsneConfig { iterations: 200, ..TsneConfig::new(2, 1) };
    let pts = project_tsne(&emb, &cfg).unwrap();
    assert!(pts.iter().all(|p| p.coords.iter().all(|x| x.is_finite())));
}

#[test]
fn incremental_placement_sits_among_neighbors() {
    let (emb, label) = clustered(2);
    let pts = project_tsne(&emb, &TsneConfig::new(2, 3)).unwrap();
    let probe = emb["p00"].clone();
    let coords = place_incremental(&pts, &emb, "p00-v1", &probe, DEFAULT_K).unwrap();
    let nearest = pts
        .iter()
        .min_by(|a, b| {
            let d = |q: &ProjectionPoint| q.coords.iter().zip(&coords).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    assert_eq!(label[&nearest.task_id], label["p00"]);
}
