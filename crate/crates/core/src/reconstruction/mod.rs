//! Taxonomy reconstruction from pairwise probe scores.
//!
//! Direction convention throughout: `h(u, v)` is P(`u` is a parent of `v`)
//! and `d(u, v)` is the cost of the edge `u -> v`.

mod edmonds;
mod metrics;
mod scores;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use edmonds::{min_arborescence, Edge, Weight};
pub use metrics::{distance, mcm_distance, tim_distance, DistanceMatrix, Metric, DEFAULT_THRESHOLD};
pub use scores::{score_all_pairs, ScoreMatrix, SCM_MAGIC};

use crate::embeddings::{EmbeddingStore, LayerSelector};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::probe::ProbeModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArborescenceSolution {
    pub root: String,
    pub nodes: Vec<String>,
    /// `(parent, child)` pairs, sorted.
    pub edges: Vec<(String, String)>,
    /// Sum of `d` over the chosen edges.
    pub objective_cost: f64,
    /// Sum of `h` over the chosen edges.
    pub root_score: f64,
}

impl ArborescenceSolution {
    /// Checks that the edges form a spanning tree of `nodes` rooted at `root`.
    pub fn validate(&self) -> Result<()> {
        validate_tree(&self.nodes, &self.root, &self.edges)
    }

    pub fn parent_of(&self, child: &str) -> Option<&str> {
        self.edges
            .iter()
            .find(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.edges {
            let _ = writeln!(out, "{p}\t{c}");
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph taxonomy {\n  rankdir=TB;\n  node [shape=box];\n");
        let _ = writeln!(out, "  \"{}\" [style=bold];", escape(&self.root));
        for (p, c) in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(p), escape(c));
        }
        out.push_str("}\n");
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn write_dot(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_dot().as_bytes())
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(crate) fn validate_tree(nodes: &[String], root: &str, edges: &[(String, String)]) -> Result<()> {
    let index: std::collections::HashMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let bad = |m: String| Err(Error::InvalidTree(m));
    let Some(&r) = index.get(root) else {
        return bad(format!("root {root} is not a node"));
    };
    if edges.len() + 1 != nodes.len() {
        return bad(format!("{} edges for {} nodes", edges.len(), nodes.len()));
    }
    let mut parent = vec![usize::MAX; nodes.len()];
    for (p, c) in edges {
        let (Some(&pi), Some(&ci)) = (index.get(p.as_str()), index.get(c.as_str())) else {
            return bad(format!("edge {p} -> {c} mentions an unknown node"));
        };
        if ci == r {
            return bad(format!("root {root} has a parent"));
        }
        if parent[ci] != usize::MAX {
            return bad(format!("{c} has more than one parent"));
        }
        parent[ci] = pi;
    }
    for start in 0..nodes.len() {
        let mut v = start;
        let mut steps = 0;
        while v != r {
            v = parent[v];
            steps += 1;
            if v == usize::MAX || steps > nodes.len() {
                return bad(format!("{} is not reachable from the root", nodes[start]));
            }
        }
    }
    Ok(())
}

/// Solves the minimum arborescence for every candidate root (nodes with at
/// least one admitted outgoing edge) and keeps the solution with the largest
/// total score; remaining ties go to the smallest root id.
///
/// Within one root, equal-cost arborescences are separated by preferring the
/// larger total score.
pub fn solve_msa(d: &DistanceMatrix, h: &ScoreMatrix) -> Result<ArborescenceSolution> {
    let n = d.len();
    let nodes = d.nodes();
    if h.nodes() != d.nodes() {
        return Err(Error::Config("distance and score matrices cover different nodes".into()));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if let Some(cost) = d.get(u, v) {
                edges.push(Edge {
                    from: u,
                    to: v,
                    weight: Weight::new(cost, -h.get(u, v)),
                });
            }
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&u| edges.iter().any(|e| e.from == u)).collect();
    roots.sort_by(|&a, &b| nodes[a].cmp(&nodes[b]));

    let solutions: Vec<Option<(usize, Vec<usize>)>> = roots
        .par_iter()
        .map(|&r| min_arborescence(n, r, &edges).map(|t| (r, t)))
        .collect();

    let mut best: Option<(usize, Vec<usize>, f64)> = None;
    for (r, t) in solutions.into_iter().flatten() {
        let score: f64 = t.iter().map(|&i| -edges[i].weight.tie).sum();
        if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
            best = Some((r, t, score));
        }
    }
    let Some((r, t, root_score)) = best else {
        return Err(Error::NoFeasibleRoot {
            largest_component: largest_reachable(n, &edges)
                .into_iter()
                .map(|i| nodes[i].clone())
                .collect(),
            total: n,
        });
    };
    let objective_cost = t.iter().map(|&i| edges[i].weight.cost).sum();
    let mut tree: Vec<(String, String)> = t
        .iter()
        .map(|&i| (nodes[edges[i].from].clone(), nodes[edges[i].to].clone()))
        .collect();
    tree.sort();
    let sol = ArborescenceSolution {
        root: nodes[r].clone(),
        nodes: nodes.to_vec(),
        edges: tree,
        objective_cost,
        root_score,
    };
    sol.validate()?;
    Ok(sol)
}

/// Node set reachable from the best single start node, ties to the lowest index.
fn largest_reachable(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut out = vec![Vec::new(); n];
    for e in edges {
        out[e.from].push(e.to);
    }
    (0..n)
        .map(|s| {
            let mut seen = BTreeSet::from([s]);
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &out[u] {
                    if seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
            seen
        })
        .fold(BTreeSet::new(), |best, s| if s.len() > best.len() { s } else { best })
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub metric: Metric,
    pub threshold: f64,
    pub seed: Option<u64>,
    pub model_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub solution: ArborescenceSolution,
    pub provenance: Provenance,
}

/// Distance computation and MSA over an existing score matrix.
pub fn reconstruct_from_scores(s: &ScoreMatrix, metric: Metric, threshold: f64) -> Result<ArborescenceSolution> {
    let d = distance(s, metric, threshold)?;
    solve_msa(&d, s)
}

/// Scores `nodes` with the probe, then builds the tree.
pub fn reconstruct(
    model: &ProbeModel,
    store: &EmbeddingStore,
    sel: LayerSelector,
    nodes: &[String],
    metric: Metric,
    threshold: f64,
) -> Result<Reconstruction> {
    let s = score_all_pairs(model, store, sel, nodes)?;
    Ok(Reconstruction {
        solution: reconstruct_from_scores(&s, metric, threshold)?,
        provenance: Provenance {
            metric,
            threshold,
            seed: Some(model.config.seed),
            model_fingerprint: Some(model.fingerprint()),
        },
    })
}

/// Reads a `parent \t child` edge list.
pub fn read_tree_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    // two tab-separated columns, returned in file order
    crate::taxonomy::read_edges(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    #[test]
    fn chain_with_tim() {
        let nodes = vec!["entity".to_string(), "animal".into(), "dog".into()];
        let s = ScoreMatrix::from_fn(nodes, |u, v| if u < v { 1.0 } else { 0.0 }).unwrap();
        let sol = reconstruct_from_scores(&s, Metric::Tim, 0.5).unwrap();
        assert_eq!(sol.root, "entity");
        assert_eq!(
            sol.edges,
            vec![("animal".into(), "dog".into()), ("entity".into(), "animal".into())]
        );
        assert_eq!(sol.objective_cost, -2.0);
    }

    #[test]
    fn two_candidates() {
        let s = ScoreMatrix::new(vec!["a".into(), "b".into()], vec![0.0, 0.9, 0.6, 0.0]).unwrap();
        let sol = reconstruct_from_scores(&s, Metric::Mcm, 0.5).unwrap();
        assert_eq!(sol.root, "a");
        assert_eq!(sol.edges, vec![("a".into(), "b".into())]);
        assert!((sol.root_score - 0.9).abs() < 1e-12);
    }

    #[test]
    fn root_tie_goes_to_smallest_id() {
        let s = ScoreMatrix::from_fn(names(2), |_, _| 0.8).unwrap();
        assert_eq!(reconstruct_from_scores(&s, Metric::Mcm, 0.5).unwrap().root, "n0");
    }

    #[test]
    fn infeasible_reports_component() {
        // n0 -> n1 only; n2, n3 isolated
        let s = ScoreMatrix::from_fn(names(4), |u, v| if (u, v) == (0, 1) { 0.9 } else { 0.1 }).unwrap();
        match reconstruct_from_scores(&s, Metric::Mcm, 0.5) {
            Err(Error::NoFeasibleRoot { largest_component, total }) => {
                assert_eq!(largest_component, ["n0", "n1"]);
                assert_eq!(total, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_bad_trees() {
        let nodes = names(3);
        let e = |p: &str, c: &str| (p.to_string(), c.to_string());
        assert!(validate_tree(&nodes, "n0", &[e("n0", "n1"), e("n1", "n2")]).is_ok());
        assert!(validate_tree(&nodes, "n0", &[e("n0", "n1")]).is_err());
        assert!(validate_tree(&nodes, "n0", &[e("n0", "n1"), e("n0", "n1")]).is_err());
        assert!(validate_tree(&nodes, "n0", &[e("n1", "n2"), e("n2", "n1")]).is_err());
        assert!(validate_tree(&nodes, "n0", &[e("n1", "n0"), e("n0", "n2")]).is_err());
    }

    #[test]
    fn dot_and_tsv() {
        let s = ScoreMatrix::new(vec!["a".into(), "b".into()], vec![0.0, 0.9, 0.1, 0.0]).unwrap();
        let sol = reconstruct_from_scores(&s, Metric::Mcm, 0.5).unwrap();
        assert_eq!(sol.to_tsv(), "a\tb\n");
        assert!(sol.to_dot().contains("\"a\" -> \"b\";"));
        assert_eq!(sol.parent_of("b"), Some("a"));
    }
}
