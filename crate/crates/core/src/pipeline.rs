//! End-to-end synthetic run: tree, splits, triplets, planted embeddings,
//! probe training and reconstruction.

use serde::{Deserialize, Serialize};

use crate::embeddings::{
    anchor_dims, generate_planted, occurrence_keys, LayerSelector, PlantedConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_reconstruction, ReconstructionReport};
use crate::probe::{evaluate, train, ProbeConfig};
use crate::reconstruction::{reconstruct, Metric, Reconstruction, DEFAULT_THRESHOLD};
use crate::sampler::{build_examples, examples_in, make_splits, sample_triplets, OccurrenceIndex, SampleConfig, Split};
use crate::synthetic::random_tree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eConfig {
    pub nodes: usize,
    pub max_children: usize,
    pub sigma: f64,
    pub seed: u64,
    /// `0` picks 64, or the anchor dimension count of the tree if larger.
    pub dim: usize,
    pub occurrences_per_synset: usize,
    pub triplets_per_synset: usize,
    pub metric: Metric,
    pub threshold: f64,
    pub probe: ProbeConfig,
}

impl E2eConfig {
    pub fn new(nodes: usize, sigma: f64, seed: u64) -> Self {
        E2eConfig {
            nodes,
            max_children: 4,
            sigma,
            seed,
            dim: 0,
            occurrences_per_synset: 4,
            triplets_per_synset: 8,
            metric: Metric::Tim,
            threshold: DEFAULT_THRESHOLD,
            probe: ProbeConfig {
                seed,
                ..ProbeConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub config: E2eConfig,
    pub dim: usize,
    pub train_examples: usize,
    pub valid_examples: usize,
    pub test_examples: usize,
    pub best_epoch: usize,
    pub valid_f1: f64,
    /// `None` when the test split produced no triplets.
    pub test_f1: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// `None` when no root admits a spanning arborescence.
    pub reconstruction: Option<Reconstruction>,
    pub evaluation: Option<ReconstructionReport>,
    pub reconstruction_error: Option<String>,
}

pub fn run_e2e(cfg: &E2eConfig) -> Result<E2eReport> {
    let g = random_tree(cfg.nodes, cfg.max_children, cfg.seed);
    let splits = make_splits(&g, cfg.seed)?;
    let occ = OccurrenceIndex::uniform(&g, cfg.occurrences_per_synset);
    let sample_cfg = SampleConfig {
        triplets_per_synset: cfg.triplets_per_synset,
        ..SampleConfig::new(cfg.seed)
    };
    let (triplets, _) = sample_triplets(&g, &splits, &occ, &sample_cfg)?;
    let examples = build_examples(&g, &triplets, &occ, cfg.seed)?;

    let dim = if cfg.dim == 0 {
        anchor_dims(&g).max(64)
    } else {
        cfg.dim
    };
    let keys = occurrence_keys(&g, cfg.occurrences_per_synset);
    let planted = PlantedConfig {
        dim,
        sigma: cfg.sigma,
        layers: 1,
        layer_growth: 0.0,
        seed: cfg.seed,
    };
    let store = generate_planted(&g, &keys, &planted)?;
    let sel = LayerSelector::AllLayers;

    let outcome = train(&cfg.probe, &store, sel, &examples)?;
    let test = examples_in(&examples, Split::Test);
    let test_report = if test.is_empty() {
        None
    } else {
        Some(evaluate(&outcome.model, &store, sel, &test)?)
    };

    let nodes: Vec<String> = g.synsets().iter().map(|s| s.id.clone()).collect();
    let (reconstruction, evaluation, reconstruction_error) =
        match reconstruct(&outcome.model, &store, sel, &nodes, cfg.metric, cfg.threshold) {
            Ok(r) => {
                let ev = evaluate_reconstruction(&r.solution, &g)?;
                (Some(r), Some(ev), None)
            }
            Err(e @ Error::NoFeasibleRoot { .. }) => (None, None, Some(e.to_string())),
            Err(e) => return Err(e),
        };

    let count = |s: Split| examples.iter().filter(|e| e.split == s).count();
    Ok(E2eReport {
        config: cfg.clone(),
        dim,
        train_examples: count(Split::Train),
        valid_examples: count(Split::Valid),
        test_examples: count(Split::Test),
        best_epoch: outcome.best_epoch,
        valid_f1: outcome.best_valid_f1,
        test_f1: test_report.as_ref().map(|r| r.f1),
        test_accuracy: test_report.as_ref().map(|r| r.accuracy),
        reconstruction,
        evaluation,
        reconstruction_error,
    })
}

impl E2eReport {
    pub fn ted(&self) -> Option<usize> {
        self.evaluation.as_ref().map(|e| e.ted.distance)
    }
}
