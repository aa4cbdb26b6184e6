//! Edge distances derived from a [`ScoreMatrix`].
//!
//! Direction convention: `d(u, v)` is the cost of the edge `u -> v`, with `u`
//! the parent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scores::ScoreMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Model confidence: `d = 1 - h`.
    Mcm,
    /// Transitive intersections of predicted ancestors and descendants.
    Tim,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Mcm => "mcm",
            Metric::Tim => "tim",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcm" => Ok(Metric::Mcm),
            "tim" => Ok(Metric::Tim),
            other => Err(Error::Config(format!("unknown metric {other:?}, expected mcm or tim"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    nodes: Vec<String>,
    d: Vec<Option<f64>>,
    metric: Metric,
    threshold: f64,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Distance of edge `u -> v`, or `None` when the edge was not admitted.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.d[u * self.len() + v]
    }

    pub fn admitted_count(&self) -> usize {
        self.d.iter().filter(|d| d.is_some()).count()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold must lie in [0, 1), got {threshold}")))
    }
}

fn build(
    s: &ScoreMatrix,
    threshold: f64,
    metric: Metric,
    mut f: impl FnMut(usize, usize) -> f64,
) -> Result<DistanceMatrix> {
    check_threshold(threshold)?;
    let n = s.len();
    let mut d = vec![None; n * n];
    for u in 0..n {
        for v in 0..n {
            if u != v && s.get(u, v) > threshold {
                d[u * n + v] = Some(f(u, v));
            }
        }
    }
    Ok(DistanceMatrix {
        nodes: s.nodes().to_vec(),
        d,
        metric,
        threshold,
    })
}

/// `d(u, v) = 1 - h(u, v)` for edges with `h > threshold`.
pub fn mcm_distance(s: &ScoreMatrix, threshold: f64) -> Result<DistanceMatrix> {
    build(s, threshold, Metric::Mcm, |u, v| 1.0 - s.get(u, v))
}

/// For edges with `h(u, v) > threshold`:
///
/// ```text
/// d(u, v) = -( sum_{j != u, v} h(u, j) h(v, j) + h(j, u) h(j, v) ) * h(u, v)
/// ```
///
/// The first term measures shared descendants, the second shared ancestors.
/// Raw scores are used inside the sum; the threshold only gates admission.
pub fn tim_distance(s: &ScoreMatrix, threshold: f64) -> Result<DistanceMatrix> {
    let n = s.len();
    build(s, threshold, Metric::Tim, |u, v| {
        let mut shared = 0.0;
        for j in 0..n {
            if j != u && j != v {
                shared += s.get(u, j) * s.get(v, j) + s.get(j, u) * s.get(j, v);
            }
        }
        -shared * s.get(u, v)
    })
}

pub fn distance(s: &ScoreMatrix, metric: Metric, threshold: f64) -> Result<DistanceMatrix> {
    match metric {
        Metric::Mcm => mcm_distance(s, threshold),
        Metric::Tim => tim_distance(s, threshold),
    }
}
