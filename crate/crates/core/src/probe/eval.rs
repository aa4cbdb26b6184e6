use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{encode, predict_all, train, FeatureCache};
use super::{ProbeConfig, ProbeModel, DECISION_THRESHOLD};
use crate::embeddings::{EmbeddingStore, LayerSelector};
use crate::error::{Error, Result};
use crate::sampler::{LabeledEdgeExample, Split};

/// F1 of the positive class; 1.0 when there is nothing to find and nothing
/// was wrongly flagged.
pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, label: bool) {
        match (predicted, label) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.tp, self.fp, self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }
}

pub(crate) fn confusion(probs: &[f64], labels: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (&h, &l) in probs.iter().zip(labels) {
        c.add(h > DECISION_THRESHOLD, l);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub x: String,
    pub y: String,
    pub label: bool,
    pub h: f64,
}

impl Prediction {
    pub fn predicted(&self) -> bool {
        self.h > DECISION_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: Confusion,
    /// Standard deviation of F1 over bootstrap resamples of the examples.
    pub bootstrap_std: f64,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    /// Metrics at threshold 0.5 with a seeded bootstrap over examples.
    pub fn from_predictions(predictions: Vec<Prediction>, resamples: usize, seed: u64) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::EmptyExamples("evaluation"));
        }
        let mut c = Confusion::default();
        for p in &predictions {
            c.add(p.predicted(), p.label);
        }
        let n = predictions.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007_57a9);
        let scores: Vec<f64> = (0..resamples)
            .map(|_| {
                let mut bc = Confusion::default();
                for _ in 0..n {
                    let p = &predictions[rng.random_range(0..n)];
                    bc.add(p.predicted(), p.label);
                }
                bc.f1()
            })
            .collect();
        let bootstrap_std = if scores.len() < 2 {
            0.0
        } else {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64).sqrt()
        };
        Ok(EvalReport {
            f1: c.f1(),
            accuracy: c.accuracy(),
            precision: c.precision(),
            recall: c.recall(),
            confusion: c,
            bootstrap_std,
            predictions,
        })
    }
}

/// Scores `examples` with `model` (inference mode) and summarises them.
pub fn evaluate(
    model: &ProbeModel,
    store: &EmbeddingStore,
    sel: LayerSelector,
    examples: &[LabeledEdgeExample],
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::EmptyExamples("evaluation"));
    }
    if store.width(sel) != model.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: model.input_dim(),
            found: store.width(sel),
        });
    }
    let mut cache = FeatureCache::new(store, sel)?;
    let refs: Vec<&LabeledEdgeExample> = examples.iter().collect();
    let data = encode(&mut cache, store, sel, &refs)?;
    let probs = predict_all(&model.params, &cache, &data);
    let predictions = examples
        .iter()
        .zip(probs)
        .map(|(e, h)| Prediction {
            x: e.x.clone(),
            y: e.y.clone(),
            label: e.label,
            h,
        })
        .collect();
    EvalReport::from_predictions(predictions, model.config.bootstrap_resamples, model.config.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub layer: usize,
    pub best_epoch: usize,
    pub valid_f1: f64,
    pub report: EvalReport,
}

/// Trains one probe per layer with identical configuration and seed, and
/// evaluates each on the `eval_split` examples.
pub fn layer_sweep(
    cfg: &ProbeConfig,
    store: &EmbeddingStore,
    examples: &[LabeledEdgeExample],
    eval_split: Split,
) -> Result<Vec<LayerResult>> {
    let eval: Vec<LabeledEdgeExample> = examples.iter().filter(|e| e.split == eval_split).cloned().collect();
    if eval.is_empty() {
        return Err(Error::EmptyExamples("layer sweep evaluation split"));
    }
    (0..store.layer_count())
        .map(|k| {
            let sel = LayerSelector::SingleLayer(k);
            let outcome = train(cfg, store, sel, examples)?;
            Ok(LayerResult {
                layer: k,
                best_epoch: outcome.best_epoch,
                valid_f1: outcome.best_valid_f1,
                report: evaluate(&outcome.model, store, sel, &eval)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(pairs: &[(bool, f64)]) -> Vec<Prediction> {
        pairs
            .iter()
            .map(|&(label, h)| Prediction { x: "a".into(), y: "b".into(), label, h })
            .collect()
    }

    #[test]
    fn perfect_classifier() {
        let r = EvalReport::from_predictions(preds(&[(true, 0.9), (false, 0.1), (false, 0.2)]), 100, 0).unwrap();
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion.total(), 3);
    }

    #[test]
    fn all_positive_on_one_to_five() {
        let mut p = vec![(true, 0.9)];
        p.extend([(false, 0.8); 5]);
        let r = EvalReport::from_predictions(preds(&p), 0, 0).unwrap();
        assert!((r.precision - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn independent_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<(bool, f64)> = (0..500).map(|_| (rng.random_bool(0.2), rng.random::<f64>())).collect();
        let r = EvalReport::from_predictions(preds(&p), 50, 1).unwrap();
        // precision/recall harmonic mean recomputed from raw counts
        let tp = p.iter().filter(|(l, h)| *l && *h > 0.5).count() as f64;
        let pp = p.iter().filter(|(_, h)| *h > 0.5).count() as f64;
        let ap = p.iter().filter(|(l, _)| *l).count() as f64;
        let (prec, rec) = (tp / pp, tp / ap);
        assert!((r.f1 - 2.0 * prec * rec / (prec + rec)).abs() < 1e-9);
        assert!(r.bootstrap_std > 0.0);
        let again = EvalReport::from_predictions(preds(&p), 50, 1).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(EvalReport::from_predictions(vec![], 10, 0), Err(Error::EmptyExamples(_))));
    }
}
