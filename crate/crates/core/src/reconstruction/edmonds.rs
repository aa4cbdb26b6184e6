//! Chu-Liu/Edmonds minimum spanning arborescence for a fixed root.
//!
//! Edge weights are compared lexicographically on `(cost, tie)`, so equal
//! costs are resolved by the secondary key before falling back to the input
//! edge order.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Weight {
    pub cost: f64,
    pub tie: f64,
}

impl Weight {
    pub fn new(cost: f64, tie: f64) -> Self {
        Weight { cost, tie }
    }

    fn cmp(&self, other: &Weight) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.tie.total_cmp(&other.tie))
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, o: Weight) -> Weight {
        Weight::new(self.cost + o.cost, self.tie + o.tie)
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, o: Weight) -> Weight {
        Weight::new(self.cost - o.cost, self.tie - o.tie)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: Weight,
}

struct LevelEdge {
    from: usize,
    to: usize,
    weight: Weight,
    /// Index of the edge this one was derived from, one level up.
    prev: usize,
}

/// Minimum arborescence of the `n`-node graph rooted at `root`, returned as
/// indices into `edges`, or `None` when some node is unreachable from `root`.
pub fn min_arborescence(n: usize, root: usize, edges: &[Edge]) -> Option<Vec<usize>> {
    let level: Vec<LevelEdge> = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.from != e.to && e.to != root && e.from < n && e.to < n)
        .map(|(i, e)| LevelEdge {
            from: e.from,
            to: e.to,
            weight: e.weight,
            prev: i,
        })
        .collect();
    let chosen = solve(n, root, &level)?;
    let mut out: Vec<usize> = chosen.into_iter().map(|i| level[i].prev).collect();
    out.sort_unstable();
    Some(out)
}

/// Returns indices into `edges`.
fn solve(n: usize, root: usize, edges: &[LevelEdge]) -> Option<Vec<usize>> {
    const NONE: usize = usize::MAX;
    let mut best_in = vec![NONE; n];
    for (i, e) in edges.iter().enumerate() {
        let b = best_in[e.to];
        if b == NONE || e.weight.cmp(&edges[b].weight) == Ordering::Less {
            best_in[e.to] = i;
        }
    }
    if (0..n).any(|v| v != root && best_in[v] == NONE) {
        return None;
    }

    // Walk parent pointers to find one cycle.
    let mut state = vec![0u8; n];
    state[root] = 2;
    let mut cycle = Vec::new();
    'outer: for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = edges[best_in[v]].from;
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).unwrap();
            cycle = path[pos..].to_vec();
            break 'outer;
        }
        for p in path {
            state[p] = 2;
        }
    }
    if cycle.is_empty() {
        return Some((0..n).filter(|&v| v != root).map(|v| best_in[v]).collect());
    }

    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let c = n - cycle.len();
    let mut map = vec![0; n];
    let mut next = 0;
    for v in 0..n {
        if in_cycle[v] {
            map[v] = c;
        } else {
            map[v] = next;
            next += 1;
        }
    }
    let contracted: Vec<LevelEdge> = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| !(in_cycle[e.from] && in_cycle[e.to]))
        .map(|(i, e)| LevelEdge {
            from: map[e.from],
            to: map[e.to],
            weight: if in_cycle[e.to] {
                e.weight - edges[best_in[e.to]].weight
            } else {
                e.weight
            },
            prev: i,
        })
        .collect();
    let sub = solve(c + 1, map[root], &contracted)?;

    let mut out = Vec::with_capacity(n - 1);
    let mut entered = NONE;
    for i in sub {
        let orig = contracted[i].prev;
        if in_cycle[edges[orig].to] {
            entered = edges[orig].to;
        }
        out.push(orig);
    }
    out.extend(cycle.iter().filter(|&&v| v != entered).map(|&v| best_in[v]));
    Some(out)
}
