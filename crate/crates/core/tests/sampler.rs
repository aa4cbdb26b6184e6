mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::dfs_reachability;
use taxoprobe_core::sampler::{
    build_examples, expand_triplet, make_splits, sample_triplets, OccurrenceIndex, SampleConfig,
};
use taxoprobe_core::synthetic::{random_tree, synthetic_glosses, toy_graph};
use taxoprobe_core::{Split, TaxonomyGraph};

fn lemma_splits(g: &TaxonomyGraph, splits: &taxoprobe_core::SplitAssignment) -> BTreeMap<String, BTreeSet<Split>> {
    let mut seen: BTreeMap<String, BTreeSet<Split>> = BTreeMap::new();
    for (i, s) in g.synsets().iter().enumerate() {
        for l in &s.lemmas {
            seen.entry(l.clone()).or_default().insert(splits.split_of(i));
        }
    }
    seen
}

#[test]
fn toy_graph_splits_are_disjoint_and_on_target() {
    let g = toy_graph(7);
    let splits = make_splits(&g, 7).unwrap();
    assert!(lemma_splits(&g, &splits).values().all(|s| s.len() == 1));
    for (split, want) in [(Split::Train, 0.70), (Split::Valid, 0.15), (Split::Test, 0.15)] {
        let got = splits.count(split) as f64 / g.len() as f64;
        assert!((got - want).abs() <= 0.02, "{split:?}: {got}");
    }
}

#[test]
fn triplet_labels_agree_with_reachability() {
    for seed in [7, 8, 9] {
        let g = toy_graph(seed);
        let reach = dfs_reachability(&g);
        let splits = make_splits(&g, seed).unwrap();
        let occ = OccurrenceIndex::new(&g, &synthetic_glosses(&g, 2)).unwrap();
        let (triplets, _) = sample_triplets(&g, &splits, &occ, &SampleConfig::new(seed)).unwrap();
        assert!(!triplets.is_empty());
        for st in &triplets {
            let idx = |id: &str| g.index_of(id).unwrap();
            let (a, b, c) = (idx(&st.triplet.a), idx(&st.triplet.b), idx(&st.triplet.c));
            for v in [a, b, c] {
                assert_eq!(splits.split_of(v), st.split);
            }
            assert!(reach[b][a]);
            for pair in expand_triplet(&st.triplet) {
                let (x, y) = (idx(&pair.x), idx(&pair.y));
                assert_eq!(pair.label, reach[y][x], "{pair:?}");
            }
        }
    }
}

#[test]
fn examples_keep_one_positive_per_five_negatives() {
    let g = random_tree(200, 3, 3);
    let splits = make_splits(&g, 3).unwrap();
    let occ = OccurrenceIndex::uniform(&g, 3);
    let (triplets, _) = sample_triplets(&g, &splits, &occ, &SampleConfig::new(3)).unwrap();
    let examples = build_examples(&g, &triplets, &occ, 3).unwrap();
    assert_eq!(examples.len(), 6 * triplets.len());
    for chunk in examples.chunks(6) {
        assert_eq!(chunk.iter().filter(|e| e.label).count(), 1);
        assert!(chunk.iter().all(|e| e.split == chunk[0].split));
        assert!(chunk.iter().all(|e| e.x_sentence < 3 && e.y_sentence < 3));
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let g = toy_graph(7);
    let occ = OccurrenceIndex::uniform(&g, 2);
    let run = |seed| {
        let splits = make_splits(&g, seed).unwrap();
        let (t, _) = sample_triplets(&g, &splits, &occ, &SampleConfig::new(seed)).unwrap();
        build_examples(&g, &t, &occ, seed).unwrap()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn validation_cap_leaves_training_untouched() {
    let g = random_tree(300, 3, 5);
    let splits = make_splits(&g, 5).unwrap();
    let occ = OccurrenceIndex::uniform(&g, 1);
    let full = SampleConfig::new(5);
    let capped = SampleConfig { max_triplets: Some(3), ..full.clone() };
    let (a, _) = sample_triplets(&g, &splits, &occ, &full).unwrap();
    let (b, _) = sample_triplets(&g, &splits, &occ, &capped).unwrap();
    let count = |t: &[taxoprobe_core::sampler::SampledTriplet], s| t.iter().filter(|x| x.split == s).count();
    assert_eq!(count(&a, Split::Train), count(&b, Split::Train));
    assert!(count(&b, Split::Valid) <= 3 && count(&b, Split::Test) <= 3);
}

#[test]
fn default_proportions_are_70_15_15() {
    let p = taxoprobe_core::sampler::SplitProportions::default();
    assert_eq!((p.train, p.valid, p.test), (0.70, 0.15, 0.15));
}
