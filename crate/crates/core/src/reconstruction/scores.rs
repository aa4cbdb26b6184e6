//! Dense pairwise probe scores and the `SCM1` file format.
//!
//! Direction convention: `h(u, v)` is the probability that `u` is a
//! (direct or transitive) parent of `v`.
//!
//! ```text
//! "SCM1" | u32 n | n x (u16 len, node id) | n x n f32 row-major, diagonal = -1
//! ```

use std::path::Path;

use rayon::prelude::*;

use crate::embeddings::{EmbeddingStore, LayerSelector};
use crate::error::{Error, Result};
use crate::io::{put_string, read_file, write_atomic, Reader};
use crate::probe::ProbeModel;
use crate::sampler::occurrence_key;

pub const SCM_MAGIC: &[u8; 4] = b"SCM1";
const FORMAT: &str = "SCM1";
const DIAGONAL_SENTINEL: f32 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    nodes: Vec<String>,
    h: Vec<f64>,
}

impl ScoreMatrix {
    /// `h` is row-major `n x n`; the diagonal is ignored.
    pub fn new(nodes: Vec<String>, mut h: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::format(FORMAT, "score matrix needs at least 2 nodes"));
        }
        if h.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                found: h.len(),
            });
        }
        for u in 0..n {
            h[u * n + u] = 0.0;
        }
        if let Some(i) = h.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                FORMAT,
                format!("non-finite score for ({}, {})", nodes[i / n], nodes[i % n]),
            ));
        }
        Ok(ScoreMatrix { nodes, h })
    }

    /// Builds a matrix from `f(u, v)` for every ordered pair `u != v`.
    pub fn from_fn(nodes: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = nodes.len();
        let mut h = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    h[u * n + v] = f(u, v);
                }
            }
        }
        ScoreMatrix::new(nodes, h)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// Probability that `u` is a parent of `v`.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.h[u * self.len() + v]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = self.len();
        let mut out = Vec::with_capacity(8 + n * 16 + 4 * n * n);
        out.extend_from_slice(SCM_MAGIC);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for id in &self.nodes {
            put_string(&mut out, id, FORMAT)?;
        }
        for u in 0..n {
            for v in 0..n {
                let value = if u == v {
                    DIAGONAL_SENTINEL
                } else {
                    self.get(u, v) as f32
                };
                out.extend_from_slice(&value.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, FORMAT);
        if r.take(4, "magic")? != SCM_MAGIC {
            return Err(Error::format(FORMAT, "bad magic"));
        }
        let n = r.u32("node count")? as usize;
        let nodes = (0..n)
            .map(|i| r.string(&format!("node {i}")))
            .collect::<Result<Vec<_>>>()?;
        if r.remaining() != n * n * 4 {
            return Err(Error::format(FORMAT, "matrix block length does not match n"));
        }
        let h = (0..n * n)
            .map(|_| r.f32("score").map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        ScoreMatrix::new(nodes, h)
    }

    pub fn read(path: &Path) -> Result<Self> {
        ScoreMatrix::from_bytes(&read_file(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Scores every ordered pair of `nodes` with the probe, using each node's
/// first occurrence (`id#0`). Element `(u, v)` is `forward(emb(v), emb(u))`,
/// the probe's probability that `u` is a hypernym of `v`.
pub fn score_all_pairs(
    model: &ProbeModel,
    store: &EmbeddingStore,
    sel: LayerSelector,
    nodes: &[String],
) -> Result<ScoreMatrix> {
    if store.width(sel) != model.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: model.input_dim(),
            found: store.width(sel),
        });
    }
    let vectors: Vec<Vec<f64>> = nodes
        .iter()
        .map(|id| {
            let v = store.fetch(&occurrence_key(id, 0), sel)?;
            Ok(v.iter().map(|&x| f64::from(x)).collect())
        })
        .collect::<Result<_>>()?;
    let n = nodes.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|u| {
            (0..n)
                .map(|v| {
                    if u == v {
                        0.0
                    } else {
                        model.forward_unchecked(&vectors[v], &vectors[u])
                    }
                })
                .collect()
        })
        .collect();
    ScoreMatrix::new(nodes.to_vec(), rows.concat())
}
