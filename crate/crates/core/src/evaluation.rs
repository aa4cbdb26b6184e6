//! Tree comparison: canonical labeled trees, Zhang-Shasha edit distance and
//! structural agreement metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruction::ArborescenceSolution;
use crate::taxonomy::TaxonomyGraph;

/// Rooted, ordered tree over unique string labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTree {
    root: String,
    children: BTreeMap<String, Vec<String>>,
}

impl LabeledTree {
    /// Builds a tree from `(parent, child)` edges. Sibling order follows the
    /// edge order. Every node must appear in `nodes`.
    pub fn from_edges(nodes: &[String], edges: &[(String, String)]) -> Result<Self> {
        let known: BTreeSet<&str> = nodes.iter().map(String::as_str).collect();
        if known.len() != nodes.len() {
            return Err(Error::InvalidTree("duplicate node label".into()));
        }
        let mut children: BTreeMap<String, Vec<String>> =
            nodes.iter().map(|n| (n.clone(), Vec::new())).collect();
        let mut has_parent = BTreeSet::new();
        for (p, c) in edges {
            if !known.contains(p.as_str()) || !known.contains(c.as_str()) {
                return Err(Error::InvalidTree(format!("edge {p} -> {c} mentions an unknown node")));
            }
            if !has_parent.insert(c.as_str()) {
                return Err(Error::InvalidTree(format!("{c} has more than one parent")));
            }
            children.get_mut(p).unwrap().push(c.clone());
        }
        let roots: Vec<String> = nodes
            .iter()
            .filter(|n| !has_parent.contains(n.as_str()))
            .cloned()
            .collect();
        let root = match roots.len() {
            1 => roots.into_iter().next().unwrap(),
            0 => return Err(Error::Cycle(nodes.to_vec())),
            _ => return Err(Error::MultipleRoots(roots)),
        };
        let t = LabeledTree { root, children };
        let reached = t.preorder().len();
        if reached != nodes.len() {
            let seen: BTreeSet<String> = t.preorder().into_iter().collect();
            let stuck = nodes.iter().filter(|n| !seen.contains(*n)).cloned().collect();
            return Err(Error::Cycle(stuck));
        }
        Ok(t)
    }

    pub fn from_solution(sol: &ArborescenceSolution) -> Result<Self> {
        LabeledTree::from_edges(&sol.nodes, &sol.edges)
    }

    /// Tree induced on `nodes` by nearest in-set ancestors of `g`.
    pub fn induced(g: &TaxonomyGraph, nodes: &[String]) -> Result<Self> {
        LabeledTree::from_edges(nodes, &g.induced_tree(nodes)?)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn children(&self, label: &str) -> &[String] {
        self.children.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.children.keys().map(String::as_str)
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.len().saturating_sub(1));
        for n in self.preorder() {
            for c in self.children(&n) {
                out.push((n.clone(), c.clone()));
            }
        }
        out
    }

    pub fn parent_map(&self) -> HashMap<&str, &str> {
        let mut out = HashMap::new();
        for (p, cs) in &self.children {
            for c in cs {
                out.insert(c.as_str(), p.as_str());
            }
        }
        out
    }

    pub fn preorder(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root.as_str()];
        while let Some(n) = stack.pop() {
            if out.len() > self.len() {
                break;
            }
            out.push(n.to_string());
            for c in self.children(n).iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Labels in postorder, with each node's leftmost-leaf postorder index.
    fn postorder(&self) -> (Vec<&str>, Vec<usize>) {
        let mut labels = Vec::with_capacity(self.len());
        let mut lml = Vec::with_capacity(self.len());
        let mut stack: Vec<(&str, usize, Option<usize>)> = vec![(&self.root, 0, None)];
        while let Some((n, next, first)) = stack.pop() {
            let cs = self.children(n);
            if next < cs.len() {
                stack.push((n, next + 1, first));
                stack.push((&cs[next], 0, None));
                continue;
            }
            let idx = labels.len();
            labels.push(n);
            let leftmost = first.unwrap_or(idx);
            lml.push(leftmost);
            if let Some(parent) = stack.last_mut() {
                // a parent records the leftmost leaf of its first child
                if parent.2.is_none() {
                    parent.2 = Some(leftmost);
                }
            }
        }
        (labels, lml)
    }

    /// Ancestor-descendant pairs of the transitive closure.
    pub fn closure_pairs(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        let mut stack = vec![(self.root.clone(), Vec::<String>::new())];
        while let Some((n, anc)) = stack.pop() {
            for a in &anc {
                out.insert((a.clone(), n.clone()));
            }
            let mut next = anc.clone();
            next.push(n.clone());
            for c in self.children(&n) {
                stack.push((c.clone(), next.clone()));
            }
        }
        out
    }
}

/// Sorts every child list by label. Idempotent.
pub fn canonicalize(t: &LabeledTree) -> LabeledTree {
    let mut out = t.clone();
    for cs in out.children.values_mut() {
        cs.sort();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TedCosts {
    pub insert: usize,
    pub delete: usize,
    pub relabel: usize,
}

impl Default for TedCosts {
    fn default() -> Self {
        TedCosts {
            insert: 1,
            delete: 1,
            relabel: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TedResult {
    pub distance: usize,
    pub costs: TedCosts,
    pub canonicalization: String,
}

/// Unit-cost tree edit distance between the canonical forms of `a` and `b`.
pub fn tree_edit_distance(a: &LabeledTree, b: &LabeledTree) -> TedResult {
    let costs = TedCosts::default();
    TedResult {
        distance: zhang_shasha(&canonicalize(a), &canonicalize(b), costs),
        costs,
        canonicalization: "children-sorted-by-label".into(),
    }
}

/// Ordered tree edit distance (Zhang and Shasha) respecting the sibling
/// order of the inputs as given.
pub fn zhang_shasha(a: &LabeledTree, b: &LabeledTree, costs: TedCosts) -> usize {
    let (la, lml_a) = a.postorder();
    let (lb, lml_b) = b.postorder();
    let (n, m) = (la.len(), lb.len());
    let keyroots = |lml: &[usize]| -> Vec<usize> {
        let mut last = BTreeMap::new();
        for (i, &l) in lml.iter().enumerate() {
            last.insert(l, i);
        }
        let mut k: Vec<usize> = last.into_values().collect();
        k.sort_unstable();
        k
    };
    let (kr_a, kr_b) = (keyroots(&lml_a), keyroots(&lml_b));
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];
    for &i in &kr_a {
        for &j in &kr_b {
            let (li, lj) = (lml_a[i], lml_b[j]);
            fd[0][0] = 0;
            for di in li..=i {
                fd[di - li + 1][0] = fd[di - li][0] + costs.delete;
            }
            for dj in lj..=j {
                fd[0][dj - lj + 1] = fd[0][dj - lj] + costs.insert;
            }
            for di in li..=i {
                let x = di - li + 1;
                for dj in lj..=j {
                    let y = dj - lj + 1;
                    let del = fd[x - 1][y] + costs.delete;
                    let ins = fd[x][y - 1] + costs.insert;
                    if lml_a[di] == li && lml_b[dj] == lj {
                        let rel = if la[di] == lb[dj] { 0 } else { costs.relabel };
                        fd[x][y] = del.min(ins).min(fd[x - 1][y - 1] + rel);
                        td[di][dj] = fd[x][y];
                    } else {
                        let sub = fd[lml_a[di] - li][lml_b[dj] - lj] + td[di][dj];
                        fd[x][y] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub nodes: usize,
    pub ted: TedResult,
    /// Fraction of non-root truth nodes whose predicted parent is correct.
    pub parent_rate: f64,
    pub root_correct: bool,
    pub ancestor_precision: f64,
    pub ancestor_recall: f64,
}

/// Compares two trees over the same label set.
pub fn compare_trees(pred: &LabeledTree, truth: &LabeledTree) -> Result<ReconstructionReport> {
    let p: BTreeSet<&str> = pred.labels().collect();
    let t: BTreeSet<&str> = truth.labels().collect();
    if p != t {
        return Err(Error::NodeSetMismatch {
            only_pred: p.difference(&t).map(|s| s.to_string()).collect(),
            only_truth: t.difference(&p).map(|s| s.to_string()).collect(),
        });
    }
    let (pp, tp) = (pred.parent_map(), truth.parent_map());
    let correct = tp.iter().filter(|(c, par)| pp.get(*c) == Some(*par)).count();
    let parent_rate = if tp.is_empty() {
        1.0
    } else {
        correct as f64 / tp.len() as f64
    };
    let (pc, tc) = (pred.closure_pairs(), truth.closure_pairs());
    let shared = pc.intersection(&tc).count() as f64;
    let ratio = |den: usize| if den == 0 { 1.0 } else { shared / den as f64 };
    Ok(ReconstructionReport {
        nodes: t.len(),
        ted: tree_edit_distance(pred, truth),
        parent_rate,
        root_correct: pred.root() == truth.root(),
        ancestor_precision: ratio(pc.len()),
        ancestor_recall: ratio(tc.len()),
    })
}

/// Compares a reconstructed tree with the tree `truth` induces on its nodes.
pub fn evaluate_reconstruction(pred: &ArborescenceSolution, truth: &TaxonomyGraph) -> Result<ReconstructionReport> {
    let missing: Vec<String> = pred.nodes.iter().filter(|n| !truth.contains(n)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::NodeSetMismatch {
            only_pred: missing,
            only_truth: Vec::new(),
        });
    }
    let p = LabeledTree::from_solution(pred)?;
    let t = LabeledTree::induced(truth, &pred.nodes)?;
    compare_trees(&p, &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(nodes: &[&str], edges: &[(&str, &str)]) -> LabeledTree {
        let nodes: Vec<String> = nodes.iter().map(|s| s.to_string()).collect();
        let edges: Vec<(String, String)> = edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        LabeledTree::from_edges(&nodes, &edges).unwrap()
    }

    #[test]
    fn canonical_order_and_idempotence() {
        let t = tree(&["r", "a", "b"], &[("r", "b"), ("r", "a")]);
        assert_eq!(t.children("r"), ["b", "a"]);
        let c = canonicalize(&t);
        assert_eq!(c.children("r"), ["a", "b"]);
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn identity_and_relabel() {
        let t = tree(&["r", "a", "b"], &[("r", "a"), ("r", "b")]);
        assert_eq!(tree_edit_distance(&t, &t).distance, 0);
        let u = tree(&["r", "a", "z"], &[("r", "a"), ("r", "z")]);
        assert_eq!(tree_edit_distance(&t, &u).distance, 1);
    }

    #[test]
    fn textbook_pair() {
        // f(d(a, c(b)), e) vs f(c(d(a, b)), e): distance 2
        let a = tree(
            &["f", "d", "a", "c", "b", "e"],
            &[("f", "d"), ("f", "e"), ("d", "a"), ("d", "c"), ("c", "b")],
        );
        let b = tree(
            &["f", "c", "d", "a", "b", "e"],
            &[("f", "c"), ("f", "e"), ("c", "d"), ("d", "a"), ("d", "b")],
        );
        assert_eq!(zhang_shasha(&a, &b, TedCosts::default()), 2);
    }

    #[test]
    fn chain_vs_reattached_leaf() {
        let truth = tree(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let pred = tree(&["a", "b", "c"], &[("a", "c"), ("a", "b")]);
        let r = compare_trees(&pred, &truth).unwrap();
        assert_eq!(r.ted.distance, 2);
        assert_eq!(r.parent_rate, 0.5);
        assert!(r.root_correct);
        assert_eq!(r.ancestor_precision, 1.0);
        assert!((r.ancestor_recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn structural_errors() {
        let nodes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let e = |p: &str, c: &str| (p.to_string(), c.to_string());
        assert!(matches!(
            LabeledTree::from_edges(&nodes, &[e("a", "b")]),
            Err(Error::MultipleRoots(_))
        ));
        assert!(matches!(
            LabeledTree::from_edges(&nodes, &[e("b", "c"), e("c", "b")]),
            Err(Error::Cycle(_))
        ));
    }

    #[test]
    fn node_set_mismatch() {
        let a = tree(&["a", "b"], &[("a", "b")]);
        let b = tree(&["a", "c"], &[("a", "c")]);
        match compare_trees(&a, &b) {
            Err(Error::NodeSetMismatch { only_pred, only_truth }) => {
                assert_eq!(only_pred, ["b"]);
                assert_eq!(only_truth, ["c"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
