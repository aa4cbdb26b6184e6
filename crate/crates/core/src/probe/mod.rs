//! Edge-probing classifier over frozen embeddings.
//!
//! Both concepts of a pair go through one shared linear projection; the two
//! projections are concatenated and scored by a one-hidden-layer ReLU MLP
//! with a sigmoid output:
//!
//! ```text
//! h(x, y) = sigmoid(w_out . drop(relu(W_hid [P x + b; P y + b] + b_hid)) + b_out)
//! ```
//!
//! `h(x, y)` estimates the probability that `y` is a direct or transitive
//! hypernym of `x`. Only the projection and the MLP are trained; embedding
//! stores are borrowed immutably throughout.

mod eval;
mod format;
mod gradcheck;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::LayerSelector;
use crate::error::{Error, Result};

pub use eval::{evaluate, f1_score, layer_sweep, Confusion, EvalReport, LayerResult, Prediction};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use train::{mean_loss, train, EpochStats, TrainOutcome};

/// Lower/upper clamp applied to emitted probabilities.
pub const PROB_EPS: f64 = 1e-7;
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub projection_dim: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub positive_weight: f64,
    pub negative_weight: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub bootstrap_resamples: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            projection_dim: 64,
            hidden_units: 384,
            dropout_rate: 0.425,
            l2_lambda: 1e-4,
            positive_weight: 5.0,
            negative_weight: 1.0,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            bootstrap_resamples: 1000,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail("dropout_rate must be in [0, 1)");
        }
        if !(self.positive_weight > 0.0 && self.negative_weight > 0.0) {
            return fail("class weights must be positive");
        }
        if self.hidden_units == 0 || self.projection_dim == 0 {
            return fail("hidden_units and projection_dim must be positive");
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return fail("l2_lambda must be a non-negative number");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return fail("batch_size and max_epochs must be positive");
        }
        Ok(())
    }

    pub fn class_weight(&self, label: bool) -> f64 {
        if label {
            self.positive_weight
        } else {
            self.negative_weight
        }
    }
}

/// Weighted binary cross-entropy of one prediction, `h` clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`. The L2 term is added per batch, not here.
pub fn loss(h: f64, label: bool, cfg: &ProbeConfig) -> f64 {
    let h = h.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label {
        -cfg.positive_weight * h.ln()
    } else {
        -cfg.negative_weight * (1.0 - h).ln()
    }
}

/// Layer sizes of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub input: usize,
    pub projection: usize,
    pub hidden: usize,
}

impl Shape {
    fn len(&self) -> usize {
        let (i, p, h) = (self.input, self.projection, self.hidden);
        p * i + p + h * 2 * p + h + h + 1
    }

    fn offsets(&self) -> [usize; 7] {
        let (i, p, h) = (self.input, self.projection, self.hidden);
        let o1 = p * i;
        let o2 = o1 + p;
        let o3 = o2 + h * 2 * p;
        let o4 = o3 + h;
        let o5 = o4 + h;
        [0, o1, o2, o3, o4, o5, o5 + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    ProjectionWeight,
    ProjectionBias,
    HiddenWeight,
    HiddenBias,
    OutputWeight,
    OutputBias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 6] = [
        ParamGroup::ProjectionWeight,
        ParamGroup::ProjectionBias,
        ParamGroup::HiddenWeight,
        ParamGroup::HiddenBias,
        ParamGroup::OutputWeight,
        ParamGroup::OutputBias,
    ];

    /// Weight matrices receive L2 regularisation, biases do not.
    pub fn is_weight(self) -> bool {
        matches!(
            self,
            ParamGroup::ProjectionWeight | ParamGroup::HiddenWeight | ParamGroup::OutputWeight
        )
    }
}

/// All trainable values in one flat buffer, groups laid out in
/// [`ParamGroup::ALL`] order. Matrices are row-major with one row per output
/// unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    shape: Shape,
    data: Vec<f64>,
}

impl Params {
    pub fn zeros(shape: Shape) -> Self {
        Params {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    /// Uniform He initialisation of the weights, zero biases.
    pub fn he_uniform(shape: Shape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(shape);
        let fan_in = [
            (ParamGroup::ProjectionWeight, shape.input),
            (ParamGroup::HiddenWeight, 2 * shape.projection),
            (ParamGroup::OutputWeight, shape.hidden),
        ];
        for (group, fan) in fan_in {
            let limit = (6.0 / fan as f64).sqrt();
            for w in p.group_mut(group) {
                *w = rng.random_range(-limit..limit);
            }
        }
        p
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.len(),
                found: data.len(),
            });
        }
        Ok(Params { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn range(&self, group: ParamGroup) -> std::ops::Range<usize> {
        let o = self.shape.offsets();
        let i = group as usize;
        o[i]..o[i + 1]
    }

    pub fn group(&self, group: ParamGroup) -> &[f64] {
        &self.data[self.range(group)]
    }

    pub fn group_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        let r = self.range(group);
        &mut self.data[r]
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        ParamGroup::ALL
            .iter()
            .filter(|g| g.is_weight())
            .flat_map(|&g| self.group(g))
            .map(|w| w * w)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainedOn {
    pub selector: LayerSelector,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub config: ProbeConfig,
    pub params: Params,
    pub trained_on: TrainedOn,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub projected: Vec<f64>,
    pub pre: Vec<f64>,
    pub scale: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logit: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Forward pass. `dropout` is `Some((rate, rng))` during training only.
pub(crate) fn forward_trace(
    p: &Params,
    x: &[f64],
    y: &[f64],
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Trace {
    let Shape {
        input,
        projection,
        hidden,
    } = p.shape;
    let pw = p.group(ParamGroup::ProjectionWeight);
    let pb = p.group(ParamGroup::ProjectionBias);
    let mut projected = vec![0.0; 2 * projection];
    for (side, v) in [x, y].into_iter().enumerate() {
        for r in 0..projection {
            let row = &pw[r * input..(r + 1) * input];
            projected[side * projection + r] = pb[r] + dot(row, v);
        }
    }

    let hw = p.group(ParamGroup::HiddenWeight);
    let hb = p.group(ParamGroup::HiddenBias);
    let width = 2 * projection;
    let mut pre = vec![0.0; hidden];
    for (j, pre_j) in pre.iter_mut().enumerate() {
        *pre_j = hb[j] + dot(&hw[j * width..(j + 1) * width], &projected);
    }

    let mut scale = vec![1.0; hidden];
    if let Some((rate, rng)) = dropout {
        if rate > 0.0 {
            let keep = 1.0 / (1.0 - rate);
            for s in &mut scale {
                *s = if rng.random::<f64>() < rate { 0.0 } else { keep };
            }
        }
    }
    let hidden_act: Vec<f64> = pre
        .iter()
        .zip(&scale)
        .map(|(&z, &s)| z.max(0.0) * s)
        .collect();
    let logit =
        p.group(ParamGroup::OutputBias)[0] + dot(p.group(ParamGroup::OutputWeight), &hidden_act);
    Trace {
        projected,
        pre,
        scale,
        hidden: hidden_act,
        logit,
    }
}

/// Accumulates `dlogit`-scaled gradients of one example into `grad`.
pub(crate) fn backward(p: &Params, x: &[f64], y: &[f64], t: &Trace, dlogit: f64, grad: &mut Params) {
    let Shape {
        input,
        projection,
        hidden,
    } = p.shape;
    let width = 2 * projection;
    let ow = p.group(ParamGroup::OutputWeight);
    grad.group_mut(ParamGroup::OutputBias)[0] += dlogit;
    let gow = grad.group_mut(ParamGroup::OutputWeight);
    for (g, h) in gow.iter_mut().zip(&t.hidden) {
        *g += dlogit * h;
    }

    let dpre: Vec<f64> = (0..hidden)
        .map(|j| {
            if t.pre[j] > 0.0 {
                dlogit * ow[j] * t.scale[j]
            } else {
                0.0
            }
        })
        .collect();
    let hw = p.group(ParamGroup::HiddenWeight);
    let mut dproj = vec![0.0; width];
    {
        let ghw = grad.group_mut(ParamGroup::HiddenWeight);
        for j in 0..hidden {
            let d = dpre[j];
            if d == 0.0 {
                continue;
            }
            let row = &hw[j * width..(j + 1) * width];
            let grow = &mut ghw[j * width..(j + 1) * width];
            for k in 0..width {
                grow[k] += d * t.projected[k];
                dproj[k] += d * row[k];
            }
        }
    }
    let ghb = grad.group_mut(ParamGroup::HiddenBias);
    for j in 0..hidden {
        ghb[j] += dpre[j];
    }

    let gpb = grad.group_mut(ParamGroup::ProjectionBias);
    for r in 0..projection {
        gpb[r] += dproj[r] + dproj[projection + r];
    }
    let gpw = grad.group_mut(ParamGroup::ProjectionWeight);
    for r in 0..projection {
        let (dx, dy) = (dproj[r], dproj[projection + r]);
        let row = &mut gpw[r * input..(r + 1) * input];
        for m in 0..input {
            row[m] += dx * x[m] + dy * y[m];
        }
    }
}

/// Weighted cross-entropy written against the logit; equals [`loss`] while
/// the probability stays inside the clamp.
pub(crate) fn logit_loss(logit: f64, label: bool, cfg: &ProbeConfig) -> (f64, f64) {
    // softplus(-z) = -ln sigmoid(z), softplus(z) = -ln(1 - sigmoid(z))
    let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
    let s = sigmoid(logit);
    if label {
        (cfg.positive_weight * softplus(-logit), cfg.positive_weight * (s - 1.0))
    } else {
        (cfg.negative_weight * softplus(logit), cfg.negative_weight * s)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ProbeModel {
    /// Freshly initialised, untrained probe.
    pub fn init(config: ProbeConfig, input_dim: usize, trained_on: TrainedOn) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let shape = Shape {
            input: input_dim,
            projection: config.projection_dim,
            hidden: config.hidden_units,
        };
        let params = Params::he_uniform(shape, config.seed);
        Ok(ProbeModel {
            config,
            params,
            trained_on,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.params.shape.input
    }

    /// Probability that `y` is a hypernym of `x`, in inference mode.
    pub fn forward(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.input_dim();
        for v in [x, y] {
            if v.len() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        Ok(self.forward_unchecked(x, y))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let t = forward_trace(&self.params, x, y, None);
        sigmoid(t.logit).clamp(PROB_EPS, 1.0 - PROB_EPS)
    }

    pub fn fingerprint(&self) -> String {
        crate::io::sha256_hex(&self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on() -> TrainedOn {
        TrainedOn {
            selector: LayerSelector::AllLayers,
            fingerprint: String::new(),
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut m = ProbeModel::init(ProbeConfig { projection_dim: 3, hidden_units: 5, ..Default::default() }, 4, on()).unwrap();
        m.params.as_mut_slice().fill(0.0);
        assert_eq!(m.forward(&[1.0; 4], &[2.0; 4]).unwrap(), 0.5);
        m.params.group_mut(ParamGroup::OutputBias)[0] = 2.0;
        assert!((m.forward(&[1.0; 4], &[2.0; 4]).unwrap() - sigmoid(2.0)).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_tiny_network() {
        // input 2 -> projection 1 -> hidden 2
        let cfg = ProbeConfig { projection_dim: 1, hidden_units: 2, ..Default::default() };
        let mut m = ProbeModel::init(cfg, 2, on()).unwrap();
        let shape = m.params.shape();
        let data = vec![
            0.5, -1.0, // projection weight
            0.1, // projection bias
            1.0, 2.0, // hidden row 0
            -1.0, 0.5, // hidden row 1
            0.0, 0.2, // hidden bias
            1.5, -2.0, // output weight
            0.3, // output bias
        ];
        m.params = Params::from_vec(shape, data).unwrap();
        let (x, y) = ([2.0, 1.0], [1.0, 3.0]);
        // px = 0.5*2 - 1*1 + 0.1 = 0.1 ; py = 0.5 - 3 + 0.1 = -2.4
        // pre0 = 0.1 - 4.8 + 0 = -4.7 -> 0 ; pre1 = -0.1 - 1.2 + 0.2 = -1.1 -> 0
        // logit = 0.3
        let expected = 1.0 / (1.0 + (-0.3f64).exp());
        assert!((m.forward(&x, &y).unwrap() - expected).abs() < 1e-12);
        // swapped: px = -2.4, py = 0.1 ; pre0 = -2.4 + 0.2 = -2.2 -> 0 ;
        // pre1 = 2.4 + 0.05 + 0.2 = 2.65 ; logit = 0.3 - 5.3 = -5.0
        let expected = 1.0 / (1.0 + 5.0f64.exp());
        assert!((m.forward(&y, &x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn order_matters() {
        let m = ProbeModel::init(ProbeConfig { projection_dim: 4, hidden_units: 8, seed: 3, ..Default::default() }, 5, on()).unwrap();
        let x = [0.3, -1.2, 0.8, 0.1, 2.0];
        let y = [1.1, 0.4, -0.6, -2.0, 0.5];
        let a = m.forward(&x, &y).unwrap();
        let b = m.forward(&y, &x).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, m.forward(&x, &y).unwrap());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let m = ProbeModel::init(ProbeConfig { projection_dim: 2, hidden_units: 2, ..Default::default() }, 3, on()).unwrap();
        assert!(matches!(m.forward(&[0.0; 2], &[0.0; 3]), Err(Error::ShapeMismatch { expected: 3, found: 2 })));
    }

    #[test]
    fn weighted_loss_closed_forms() {
        let cfg = ProbeConfig::default();
        let ln2 = std::f64::consts::LN_2;
        assert!((loss(0.5, true, &cfg) - 5.0 * ln2).abs() < 1e-15);
        assert!((loss(0.5, false, &cfg) - ln2).abs() < 1e-15);
        let pos = loss(0.5, true, &cfg);
        let neg: f64 = (0..5).map(|_| loss(0.5, false, &cfg)).sum();
        assert!((pos / (pos + neg) - 0.5).abs() < 1e-12);
        assert!(loss(0.0, true, &cfg).is_finite());
        assert!(loss(1.0, false, &cfg).is_finite());
    }

    #[test]
    fn logit_loss_matches_clamped_loss() {
        let cfg = ProbeConfig::default();
        for z in [-8.0, -1.0, 0.0, 0.7, 5.0] {
            for label in [true, false] {
                let (l, _) = logit_loss(z, label, &cfg);
                assert!((l - loss(sigmoid(z), label, &cfg)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(ProbeConfig { dropout_rate: 1.0, ..Default::default() }.validate().is_err());
        assert!(ProbeConfig { positive_weight: 0.0, ..Default::default() }.validate().is_err());
        assert!(ProbeConfig { hidden_units: 0, ..Default::default() }.validate().is_err());
        assert!(ProbeConfig::default().validate().is_ok());
    }
}
