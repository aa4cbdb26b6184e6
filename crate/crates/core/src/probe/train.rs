use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::confusion;
use super::{backward, forward_trace, logit_loss, sigmoid, ParamGroup, Params, ProbeConfig, ProbeModel, TrainedOn};
use crate::embeddings::{EmbeddingStore, LayerSelector};
use crate::error::{Error, Result};
use crate::sampler::{LabeledEdgeExample, Split};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Embedding vectors widened to f64, one per distinct occurrence key.
pub(crate) struct FeatureCache {
    rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl FeatureCache {
    pub fn new(store: &EmbeddingStore, sel: LayerSelector) -> Result<Self> {
        store.check_selector(sel)?;
        Ok(FeatureCache {
            rows: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        FeatureCache {
            rows,
            index: HashMap::new(),
        }
    }

    pub fn intern(&mut self, store: &EmbeddingStore, sel: LayerSelector, key: &str) -> Result<usize> {
        if let Some(&i) = self.index.get(key) {
            return Ok(i);
        }
        let row = store.fetch(key, sel)?.iter().map(|&v| f64::from(v)).collect();
        self.rows.push(row);
        self.index.insert(key.to_string(), self.rows.len() - 1);
        Ok(self.rows.len() - 1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

/// Example with its feature rows resolved.
#[derive(Clone, Copy)]
pub(crate) struct Encoded {
    pub x: usize,
    pub y: usize,
    pub label: bool,
}

pub(crate) fn encode(
    cache: &mut FeatureCache,
    store: &EmbeddingStore,
    sel: LayerSelector,
    examples: &[&LabeledEdgeExample],
) -> Result<Vec<Encoded>> {
    examples
        .iter()
        .map(|e| {
            Ok(Encoded {
                x: cache.intern(store, sel, &e.x_key())?,
                y: cache.intern(store, sel, &e.y_key())?,
                label: e.label,
            })
        })
        .collect()
}

pub(crate) fn predict_all(params: &Params, cache: &FeatureCache, data: &[Encoded]) -> Vec<f64> {
    data.iter()
        .map(|e| {
            let t = forward_trace(params, cache.row(e.x), cache.row(e.y), None);
            sigmoid(t.logit).clamp(super::PROB_EPS, 1.0 - super::PROB_EPS)
        })
        .collect()
}

/// Mean weighted cross-entropy plus the L2 penalty, inference mode.
pub(crate) fn objective(params: &Params, cfg: &ProbeConfig, cache: &FeatureCache, data: &[Encoded]) -> f64 {
    let data_loss: f64 = data
        .iter()
        .map(|e| {
            let t = forward_trace(params, cache.row(e.x), cache.row(e.y), None);
            logit_loss(t.logit, e.label, cfg).0
        })
        .sum::<f64>()
        / data.len() as f64;
    data_loss + cfg.l2_lambda * params.weight_norm_sq()
}

/// Gradient of [`objective`] (or its dropout counterpart) over `data`.
pub(crate) fn batch_gradient(
    params: &Params,
    cfg: &ProbeConfig,
    cache: &FeatureCache,
    data: &[Encoded],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
    grad: &mut Params,
) -> f64 {
    grad.as_mut_slice().fill(0.0);
    let inv = 1.0 / data.len() as f64;
    let mut total = 0.0;
    for e in data {
        let (x, y) = (cache.row(e.x), cache.row(e.y));
        let dropout = dropout_rng.as_deref_mut().map(|rng| (cfg.dropout_rate, rng));
        let t = forward_trace(params, x, y, dropout);
        let (l, dlogit) = logit_loss(t.logit, e.label, cfg);
        total += l;
        backward(params, x, y, &t, dlogit * inv, grad);
    }
    if cfg.l2_lambda > 0.0 {
        for g in ParamGroup::ALL.into_iter().filter(|g| g.is_weight()) {
            let r = params.range(g);
            let (w, gw) = (&params.as_slice()[r.clone()], &mut grad.as_mut_slice()[r]);
            for (gi, wi) in gw.iter_mut().zip(w) {
                *gi += 2.0 * cfg.l2_lambda * wi;
            }
        }
    }
    total * inv + cfg.l2_lambda * params.weight_norm_sq()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean batch objective seen during the epoch (dropout on).
    pub train_loss: f64,
    pub valid_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ProbeModel,
    pub best_epoch: usize,
    pub best_valid_f1: f64,
    pub history: Vec<EpochStats>,
}

/// Trains a probe on the `train` split with Adam, keeping the parameters of
/// the epoch with the best validation F1 and stopping after `patience`
/// epochs without improvement.
pub fn train(
    cfg: &ProbeConfig,
    store: &EmbeddingStore,
    sel: LayerSelector,
    examples: &[LabeledEdgeExample],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_ex: Vec<&LabeledEdgeExample> = examples.iter().filter(|e| e.split == Split::Train).collect();
    let valid_ex: Vec<&LabeledEdgeExample> = examples.iter().filter(|e| e.split == Split::Valid).collect();
    if train_ex.is_empty() {
        return Err(Error::EmptyExamples("training split"));
    }
    if valid_ex.is_empty() {
        return Err(Error::EmptyExamples("validation split"));
    }
    let mut cache = FeatureCache::new(store, sel)?;
    let train_data = encode(&mut cache, store, sel, &train_ex)?;
    let valid_data = encode(&mut cache, store, sel, &valid_ex)?;
    let valid_labels: Vec<bool> = valid_data.iter().map(|e| e.label).collect();

    let trained_on = TrainedOn {
        selector: sel,
        fingerprint: store.fingerprint(),
    };
    let mut model = ProbeModel::init(cfg.clone(), store.width(sel), trained_on)?;
    let mut grad = Params::zeros(model.params.shape());
    let mut adam = Adam::new(grad.as_slice().len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let mut best = model.params.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_data[i]));
            let l = batch_gradient(&model.params, cfg, &cache, &batch, Some(&mut rng), &mut grad);
            if !l.is_finite() {
                return Err(Error::Diverged { epoch, loss: l });
            }
            adam.update(model.params.as_mut_slice(), grad.as_slice());
            loss_sum += l;
            batches += 1;
        }
        if !model.params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        let probs = predict_all(&model.params, &cache, &valid_data);
        let f1 = confusion(&probs, &valid_labels).f1();
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            valid_f1: f1,
        });
        if f1 > best_f1 {
            best_f1 = f1;
            best_epoch = epoch;
            best.clone_from(&model.params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.params = best;
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_valid_f1: best_f1,
        history,
    })
}

/// Inference-mode training objective of `model` over `examples`.
pub fn mean_loss(
    model: &ProbeModel,
    store: &EmbeddingStore,
    sel: LayerSelector,
    examples: &[LabeledEdgeExample],
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyExamples("loss"));
    }
    let mut cache = FeatureCache::new(store, sel)?;
    let refs: Vec<&LabeledEdgeExample> = examples.iter().collect();
    let data = encode(&mut cache, store, sel, &refs)?;
    if model.input_dim() != store.width(sel) {
        return Err(Error::ShapeMismatch {
            expected: model.input_dim(),
            found: store.width(sel),
        });
    }
    Ok(objective(&model.params, &model.config, &cache, &data))
}
