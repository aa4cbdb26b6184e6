//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxoprobe_core::evaluation::{canonicalize, LabeledTree};
use taxoprobe_core::taxonomy::{Synset, TaxonomyGraph};

/// Minimum total cost of an arborescence rooted at `root`, found by trying
/// every parent assignment. `cost[u][v]` is the cost of `u -> v`, `None` when
/// the edge is absent. Returns `(cost, parents)` or `None` if infeasible.
pub fn brute_arborescence(cost: &[Vec<Option<f64>>], root: usize) -> Option<(f64, Vec<usize>)> {
    let n = cost.len();
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut parent = vec![usize::MAX; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    fn rec(
        k: usize,
        others: &[usize],
        cost: &[Vec<Option<f64>>],
        root: usize,
        parent: &mut Vec<usize>,
        acc: f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if k == others.len() {
            if reaches_root(parent, root) && best.as_ref().is_none_or(|(b, _)| acc < *b) {
                *best = Some((acc, parent.clone()));
            }
            return;
        }
        let v = others[k];
        for u in 0..cost.len() {
            if let Some(c) = cost[u][v] {
                if u != v {
                    parent[v] = u;
                    rec(k + 1, others, cost, root, parent, acc + c, best);
                }
            }
        }
        parent[v] = usize::MAX;
    }
    rec(0, &others, cost, root, &mut parent, 0.0, &mut best);
    best
}

fn reaches_root(parent: &[usize], root: usize) -> bool {
    (0..parent.len()).all(|start| {
        let mut v = start;
        for _ in 0..=parent.len() {
            if v == root {
                return true;
            }
            v = parent[v];
            if v == usize::MAX {
                return false;
            }
        }
        false
    })
}

/// Tree edit distance as the cheapest Tai mapping between the canonical
/// forms: pairs must keep ancestry and preorder, unmapped nodes cost one
/// each, mapped pairs with different labels cost one.
pub fn tai_ted(a: &LabeledTree, b: &LabeledTree) -> usize {
    let (pa, anc_a) = order_and_ancestry(&canonicalize(a));
    let (pb, anc_b) = order_and_ancestry(&canonicalize(b));
    let mut best = pa.len() + pb.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        min_j: usize,
        pa: &[String],
        pb: &[String],
        anc_a: &[Vec<bool>],
        anc_b: &[Vec<bool>],
        pairs: &mut Vec<(usize, usize)>,
        best: &mut usize,
    ) {
        if i == pa.len() {
            let relabel = pairs.iter().filter(|&&(x, y)| pa[x] != pb[y]).count();
            let cost = pa.len() + pb.len() - 2 * pairs.len() + relabel;
            *best = (*best).min(cost);
            return;
        }
        rec(i + 1, min_j, pa, pb, anc_a, anc_b, pairs, best);
        for j in min_j..pb.len() {
            if pairs.iter().all(|&(x, y)| anc_a[x][i] == anc_b[y][j]) {
                pairs.push((i, j));
                rec(i + 1, j + 1, pa, pb, anc_a, anc_b, pairs, best);
                pairs.pop();
            }
        }
    }
    rec(0, 0, &pa, &pb, &anc_a, &anc_b, &mut pairs, &mut best);
    best
}

/// Preorder labels, and `anc[x][y]` = node `x` is a proper ancestor of `y`
/// (preorder indices).
fn order_and_ancestry(t: &LabeledTree) -> (Vec<String>, Vec<Vec<bool>>) {
    let order = t.preorder();
    let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let n = order.len();
    let mut anc = vec![vec![false; n]; n];
    for (a, d) in t.closure_pairs() {
        anc[pos[a.as_str()]][pos[d.as_str()]] = true;
    }
    (order, anc)
}

/// Random labeled tree with `n` nodes whose labels are drawn without
/// repetition from `pool`.
pub fn random_labeled_tree(n: usize, pool: &[&str], rng: &mut ChaCha8Rng) -> LabeledTree {
    let mut labels: Vec<String> = pool.iter().map(|s| s.to_string()).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels.truncate(n);
    let edges: Vec<(String, String)> = (1..n)
        .map(|i| (labels[rng.random_range(0..i)].clone(), labels[i].clone()))
        .collect();
    LabeledTree::from_edges(&labels, &edges).unwrap()
}

/// Random DAG over `n` synsets `d0..`: each non-root node gets one or two
/// parents among lower-numbered nodes.
pub fn random_dag(n: usize, seed: u64) -> TaxonomyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let synsets = (0..n)
        .map(|i| Synset::new(format!("d{i}"), &[format!("w{i}").as_str()], ""))
        .collect();
    let mut edges = Vec::new();
    for i in 1..n {
        let k = if i > 1 && rng.random_bool(0.4) { 2 } else { 1 };
        let mut ps = BTreeSet::new();
        while ps.len() < k {
            ps.insert(rng.random_range(0..i));
        }
        for p in ps {
            edges.push((format!("d{i}"), format!("d{p}")));
        }
    }
    TaxonomyGraph::new(synsets, &edges).unwrap()
}

/// `reach[u][v]` = `v` is reachable from `u` by following child edges,
/// computed by an explicit depth-first search from every node.
pub fn dfs_reachability(g: &TaxonomyGraph) -> Vec<Vec<bool>> {
    let n = g.len();
    (0..n)
        .map(|u| {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = g.children(u).to_vec();
            while let Some(v) = stack.pop() {
                if !seen[v] {
                    seen[v] = true;
                    stack.extend_from_slice(g.children(v));
                }
            }
            seen
        })
        .collect()
}

/// Ground-truth ancestor matrix of a tree in node order:
/// `h[u][v] = 1` iff `u` is a proper ancestor of `v`.
pub fn closure_scores(g: &TaxonomyGraph) -> Vec<Vec<f64>> {
    dfs_reachability(g)
        .into_iter()
        .map(|row| row.into_iter().map(|r| if r { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Shortest upward hop count from `v` to each of its ancestors, by BFS.
pub fn upward_bfs(g: &TaxonomyGraph, v: usize) -> HashMap<usize, usize> {
    let mut dist = HashMap::from([(v, 0)]);
    let mut queue = std::collections::VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        for &p in g.parents(x) {
            if !dist.contains_key(&p) {
                dist.insert(p, dist[&x] + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

/// Depth percentages from an explicit longest-path dynamic program over all
/// root-to-leaf paths: `100 * depth / (depth + height)`.
pub fn longest_path_depth(g: &TaxonomyGraph) -> Vec<f64> {
    let n = g.len();
    fn longest_up(g: &TaxonomyGraph, v: usize, memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(d) = memo[v] {
            return d;
        }
        let d = g.parents(v).iter().map(|&p| longest_up(g, p, memo) + 1).max().unwrap_or(0);
        memo[v] = Some(d);
        d
    }
    fn longest_down(g: &TaxonomyGraph, v: usize, memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(d) = memo[v] {
            return d;
        }
        let d = g.children(v).iter().map(|&c| longest_down(g, c, memo) + 1).max().unwrap_or(0);
        memo[v] = Some(d);
        d
    }
    let (mut up, mut down) = (vec![None; n], vec![None; n]);
    (0..n)
        .map(|v| {
            let (d, h) = (longest_up(g, v, &mut up), longest_down(g, v, &mut down));
            if d + h == 0 {
                0.0
            } else {
                100.0 * d as f64 / (d + h) as f64
            }
        })
        .collect()
}

/// TIM distance straight from its definition, one triple loop.
pub fn tim_reference(h: &[Vec<f64>], u: usize, v: usize) -> f64 {
    let mut shared = 0.0;
    for (j, row) in h.iter().enumerate() {
        if j != u && j != v {
            shared += h[u][j] * h[v][j] + row[u] * row[v];
        }
    }
    -shared * h[u][v]
}
