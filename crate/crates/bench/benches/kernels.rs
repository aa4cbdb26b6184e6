use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxoprobe_core::embeddings::{generate_planted, occurrence_keys};
use taxoprobe_core::evaluation::{tree_edit_distance, LabeledTree};
use taxoprobe_core::probe::{train, TrainedOn};
use taxoprobe_core::reconstruction::{min_arborescence, tim_distance, Edge, ScoreMatrix, Weight};
use taxoprobe_core::sampler::{build_examples, make_splits, sample_triplets, OccurrenceIndex, SampleConfig};
use taxoprobe_core::synthetic::random_tree;
use taxoprobe_core::{LayerSelector, PlantedConfig, ProbeConfig, ProbeModel};

fn dense_edges(n: usize, seed: u64) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * n);
    for from in 0..n {
        for to in 0..n {
            if from != to {
                edges.push(Edge { from, to, weight: Weight::new(rng.random::<f64>(), 0.0) });
            }
        }
    }
    edges
}

fn bench_edmonds(c: &mut Criterion) {
    let mut group = c.benchmark_group("edmonds");
    for n in [50, 200] {
        let edges = dense_edges(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &edges, |b, e| {
            b.iter(|| min_arborescence(n, 0, black_box(e)))
        });
    }
    group.finish();
}

fn tree_of(n: usize, seed: u64) -> LabeledTree {
    let g = random_tree(n, 3, seed);
    let nodes: Vec<String> = g.synsets().iter().map(|s| s.id.clone()).collect();
    LabeledTree::induced(&g, &nodes).unwrap()
}

fn bench_ted(c: &mut Criterion) {
    let mut group = c.benchmark_group("zhang_shasha");
    for n in [50, 200] {
        let (a, b) = (tree_of(n, 1), tree_of(n, 2));
        group.bench_function(BenchmarkId::from_parameter(n), |bench| {
            bench.iter(|| tree_edit_distance(black_box(&a), black_box(&b)))
        });
    }
    group.finish();
}

fn bench_tim(c: &mut Criterion) {
    let mut group = c.benchmark_group("tim_distance");
    for n in [50, 200] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let s = ScoreMatrix::from_fn(nodes, |_, _| rng.random()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| b.iter(|| tim_distance(black_box(s), 0.5)));
    }
    group.finish();
}

fn bench_probe(c: &mut Criterion) {
    let on = TrainedOn { selector: LayerSelector::AllLayers, fingerprint: String::new() };
    let model = ProbeModel::init(ProbeConfig::default(), 768, on).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f64> = (0..768).map(|_| rng.random()).collect();
    let y: Vec<f64> = (0..768).map(|_| rng.random()).collect();
    c.bench_function("probe_forward_768", |b| b.iter(|| model.forward(black_box(&x), black_box(&y))));

    let g = random_tree(100, 4, 5);
    let splits = make_splits(&g, 5).unwrap();
    let occ = OccurrenceIndex::uniform(&g, 2);
    let (triplets, _) = sample_triplets(&g, &splits, &occ, &SampleConfig::new(5)).unwrap();
    let examples = build_examples(&g, &triplets, &occ, 5).unwrap();
    let planted = PlantedConfig { dim: 128, sigma: 0.05, layers: 1, layer_growth: 0.0, seed: 5 };
    let store = generate_planted(&g, &occurrence_keys(&g, 2), &planted).unwrap();
    let cfg = ProbeConfig { max_epochs: 1, seed: 5, ..ProbeConfig::default() };
    c.bench_function("probe_train_epoch_100_synsets", |b| {
        b.iter(|| train(&cfg, &store, LayerSelector::AllLayers, black_box(&examples)).unwrap())
    });
}

criterion_group!(benches, bench_edmonds, bench_ted, bench_tim, bench_probe);
criterion_main!(benches);
