use super::*;
use crate::biasmetrics::{overlap, ItemUnit};
use crate::embedspace::{nearest_neighbors, EmbeddingVector};
use crate::fixtures::{example, task};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_embeddings(n: usize, dim: usize, seed: u64) -> Embeddings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (format!("t{i:02}"), EmbeddingVector::normalized(v).unwrap())
        })
        .collect()
}

#[test]
fn graph_threshold_extremes() {
    let emb = random_embeddings(15, 8, 1);
    let ranking = nearest_neighbors(&emb, "t03", 9).unwrap();
    let g = build_graph(&ranking, &emb, 0.0).unwrap();
    assert_eq!(g.nodes.len(), 10);
    assert_eq!(g.edges.len(), 45);
    assert_eq!(g.nodes[0].label, "T1");
    assert_eq!(g.nodes[0].task_id, "t03");
    assert_eq!(g.nodes[0].similarity, 1.0);
    assert_eq!(g.nodes[9].label, "T10");
    assert!(g.edges.iter().all(|e| e.i < e.j));
    assert!(build_graph(&ranking, &emb, 1.0).unwrap().edges.is_empty());
    assert!(matches!(build_graph(&ranking, &emb, 1.5), Err(RelationError::InvalidThreshold(_))));
}

#[test]
fn graph_matches_pair_filter() {
    let emb = random_embeddings(10, 3, 8);
    let ranking = nearest_neighbors(&emb, "t00", 9).unwrap();
    let g = build_graph(&ranking, &emb, 0.7).unwrap();
    let ids = selection(&ranking);
    let mut expected = Vec::new();
    for i in 0..10 {
        for j in i + 1..10 {
            let (a, b) = (&emb[&ids[i]], &emb[&ids[j]]);
            let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
            if (1.0 + dot) / 2.0 >= 0.7 {
                expected.push((i, j));
            }
        }
    }
    let got: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.i, e.j)).collect();
    assert_eq!(got, expected);
}

#[test]
fn chord_examples() {
    let words = |n: usize| vec!["word"; n].join(" ");
    let a = task("a", "x", &words(40), vec![example("dog runs", "x", "")], vec![], vec![]);
    let b = task("b", "x", &words(50), vec![example("dog runs", "x", "")], vec![example("cat", "y", "")], vec![]);
    let m = build_chord(&[&a, &b], ChordRelation::NormLengthRatio, &ComponentSelector::Definition, 0.5).unwrap();
    assert!((m.values[0][1] - 0.8).abs() < 1e-15);
    assert_eq!(m.values[0][0], 1.0);
    let m = build_chord(&[&a, &b], ChordRelation::NormWordOverlap, &ComponentSelector::PositiveExamples, 0.5).unwrap();
    assert_eq!(m.values[0][1], 1.0);
    assert_eq!(m.ribbons(), vec![(0, 1)]);
    for rel in [ChordRelation::NormWordOverlap, ChordRelation::NormLengthRatio] {
        let m = build_chord(&[&a, &b], rel, &ComponentSelector::NegativeExamples, 0.5).unwrap();
        assert_eq!(m.values[0][1], 0.0);
        assert_eq!(m.values[1][0], 0.0);
        assert_eq!(m.values[0][0], 1.0);
    }
    assert!(matches!(
        build_chord(&[&a], ChordRelation::NormWordOverlap, &ComponentSelector::Instance("i".into()), 0.5),
        Err(RelationError::InvalidComponent(_))
    ));
}

#[test]
fn length_ratio_conventions() {
    assert_eq!(length_ratio(0, 0), 1.0);
    assert_eq!(length_ratio(0, 3), 0.0);
    assert_eq!(length_ratio(3, 0), 0.0);
    assert_eq!(length_ratio(5, 5), 1.0);
}

const VOCAB: &[&str] = &["dog", "cat", "runs", "the", "river", "stone", "green", "sings", "houses"];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 0..12).prop_map(|v| v.join(" "))
}

proptest! {
    #[test]
    fn graph_edges_nested(seed in any::<u64>(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let emb = random_embeddings(12, 4, seed);
        let ranking = nearest_neighbors(&emb, "t05", 9).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let low: Vec<(usize, usize)> = build_graph(&ranking, &emb, lo).unwrap().edges.iter().map(|e| (e.i, e.j)).collect();
        let high = build_graph(&ranking, &emb, hi).unwrap();
        prop_assert!(high.edges.iter().all(|e| low.contains(&(e.i, e.j))));
    }

    #[test]
    fn chord_symmetric_and_matches_overlap(texts in prop::collection::vec((text(), text()), 2..6)) {
        let tasks: Vec<TaskRecord> = texts
            .iter()
            .enumerate()
            .map(|(i, (d, e))| task(&format!("t{i}"), "x", d, vec![example(e, "", "")], vec![], vec![]))
            .collect();
        let refs: Vec<&TaskRecord> = tasks.iter().collect();
        let analyzer = Analyzer::english();
        for comp in ComponentSelector::INSTRUCTION_KINDS {
            for rel in [ChordRelation::NormWordOverlap, ChordRelation::NormLengthRatio] {
                let m = build_chord(&refs, rel, &comp, 0.5).unwrap();
                for i in 0..refs.len() {
                    prop_assert_eq!(m.values[i][i], 1.0);
                    for j in 0..refs.len() {
                        prop_assert_eq!(m.values[i][j], m.values[j][i]);
                        prop_assert!((0.0..=1.0).contains(&m.values[i][j]));
                        if i != j && rel == ChordRelation::NormWordOverlap {
                            let a = component_text(refs[i], &comp).unwrap();
                            let b = component_text(refs[j], &comp).unwrap();
                            prop_assert_eq!(m.values[i][j], overlap(&a, &b, ItemUnit::Word, &analyzer).unwrap());
                        }
                    }
                }
            }
        }
    }
}
