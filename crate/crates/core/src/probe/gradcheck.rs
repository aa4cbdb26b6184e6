use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::train::{batch_gradient, objective, Encoded, FeatureCache};
use super::{ParamGroup, Params, ProbeConfig, Shape};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub group: ParamGroup,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientEntry {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(REL_FLOOR);
        (self.analytic - self.numeric).abs() / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub shape: Shape,
    pub max_relative_error: f64,
    pub per_group: Vec<(ParamGroup, f64)>,
}

/// Analytic gradient of the full objective (dropout off) against central
/// finite differences, for every parameter.
pub fn compare_gradients(
    cfg: &ProbeConfig,
    params: &Params,
    samples: &[(Vec<f64>, Vec<f64>, bool)],
) -> Vec<GradientEntry> {
    let mut rows = Vec::with_capacity(samples.len() * 2);
    let mut data = Vec::with_capacity(samples.len());
    for (x, y, label) in samples {
        rows.push(x.clone());
        rows.push(y.clone());
        data.push(Encoded {
            x: rows.len() - 2,
            y: rows.len() - 1,
            label: *label,
        });
    }
    let cache = FeatureCache::from_rows(rows);
    let mut grad = Params::zeros(params.shape());
    batch_gradient(params, cfg, &cache, &data, None, &mut grad);

    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.as_slice().len());
    for group in ParamGroup::ALL {
        for (offset, i) in params.range(group).enumerate() {
            let orig = probe.as_slice()[i];
            probe.as_mut_slice()[i] = orig + FD_STEP;
            let up = objective(&probe, cfg, &cache, &data);
            probe.as_mut_slice()[i] = orig - FD_STEP;
            let down = objective(&probe, cfg, &cache, &data);
            probe.as_mut_slice()[i] = orig;
            out.push(GradientEntry {
                group,
                index: offset,
                analytic: grad.as_slice()[i],
                numeric: (up - down) / (2.0 * FD_STEP),
            });
        }
    }
    out
}

/// Gradient check on a seeded tiny probe (every dimension at most 8) with
/// random parameters and a small batch of mixed-label examples.
pub fn gradient_check(cfg: &ProbeConfig, seed: u64) -> Result<GradCheckReport> {
    let mut cfg = cfg.clone();
    cfg.dropout_rate = 0.0;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape {
        input: rng.random_range(2..=8),
        projection: rng.random_range(1..=cfg.projection_dim.min(8)),
        hidden: rng.random_range(2..=cfg.hidden_units.min(8)),
    };
    if shape.hidden < 2 {
        return Err(Error::Config("gradient check needs at least 2 hidden units".into()));
    }
    let len = Params::zeros(shape).as_slice().len();
    let params = Params::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let samples: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..6)
        .map(|k| {
            let x = (0..shape.input).map(|_| normal()).collect();
            let y = (0..shape.input).map(|_| normal()).collect();
            (x, y, k % 3 == 0)
        })
        .collect();

    let entries = compare_gradients(&cfg, &params, &samples);
    let per_group: Vec<(ParamGroup, f64)> = ParamGroup::ALL
        .iter()
        .map(|&g| {
            let worst = entries
                .iter()
                .filter(|e| e.group == g)
                .map(GradientEntry::relative_error)
                .fold(0.0, f64::max);
            (g, worst)
        })
        .collect();
    let max_relative_error = per_group.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        shape,
        max_relative_error,
        per_group,
    })
}
