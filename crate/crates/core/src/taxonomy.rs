//! Ground-truth concept graph: loading, validation and hierarchy queries.
//!
//! Edges point from hyponym (child) to hypernym (parent). Nodes are held in
//! the order they were declared in the synset table; that order doubles as
//! the sense order used by the analysis module.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synset {
    pub id: String,
    pub lemmas: Vec<String>,
    pub gloss: String,
}

impl Synset {
    pub fn new(id: impl Into<String>, lemmas: &[&str], gloss: impl Into<String>) -> Self {
        Synset {
            id: id.into(),
            lemmas: lemmas.iter().map(|l| l.to_string()).collect(),
            gloss: gloss.into(),
        }
    }
}

/// Result of [`TaxonomyGraph::wordnet_distance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDistance {
    pub hops: usize,
    /// Set only when neither synset is an ancestor of the other's path
    /// upwards (the common-ancestor case).
    pub lowest_common_ancestor: Option<String>,
}

/// Immutable hypernymy DAG.
#[derive(Debug, Clone)]
pub struct TaxonomyGraph {
    synsets: Vec<Synset>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Parents always precede their children.
    topo: Vec<usize>,
    virtual_root: Option<usize>,
}

impl TaxonomyGraph {
    /// Builds and validates a graph from synsets and `(child, parent)` edges.
    ///
    /// Duplicate edges are collapsed. Self-loops and longer cycles are
    /// rejected with the ids that could not be ordered.
    pub fn new<S: AsRef<str>>(synsets: Vec<Synset>, edges: &[(S, S)]) -> Result<Self> {
        let mut index = HashMap::with_capacity(synsets.len());
        for (i, s) in synsets.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateSynset(s.id.clone()));
            }
        }

        let n = synsets.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (child, parent) in edges {
            let (child, parent) = (child.as_ref(), parent.as_ref());
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| Error::DanglingEdge {
                    child: child.to_string(),
                    parent: parent.to_string(),
                    missing: id.to_string(),
                })
            };
            let c = lookup(child)?;
            let p = lookup(parent)?;
            if !parents[c].contains(&p) {
                parents[c].push(p);
                children[p].push(c);
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm from the roots downwards.
        let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            topo.push(u);
            for &c in &children[u] {
                pending[c] -= 1;
                if pending[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n)
                .filter(|&i| pending[i] > 0)
                .map(|i| synsets[i].id.clone())
                .collect();
            return Err(Error::Cycle(stuck));
        }

        Ok(TaxonomyGraph {
            synsets,
            index,
            parents,
            children,
            topo,
            virtual_root: None,
        })
    }

    /// Reads `synsets.tsv` (`id \t lemma,lemma \t gloss`) and `edges.tsv`
    /// (`child \t parent`).
    pub fn load(synset_table: &Path, edge_list: &Path) -> Result<Self> {
        let synsets = read_synsets(synset_table)?;
        let edges = read_edges(edge_list)?;
        TaxonomyGraph::new(synsets, &edges)
    }

    /// Loads `DIR/synsets.tsv` and `DIR/edges.tsv`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        TaxonomyGraph::load(&dir.join("synsets.tsv"), &dir.join("edges.tsv"))
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut table = Vec::new();
        for s in &self.synsets {
            writeln!(table, "{}\t{}\t{}", s.id, s.lemmas.join(","), s.gloss).expect("vec write");
        }
        write_atomic(&dir.join("synsets.tsv"), &table)?;
        let mut edges = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                writeln!(edges, "{}\t{}", self.synsets[c].id, self.synsets[p].id).expect("vec write");
            }
        }
        write_atomic(&dir.join("edges.tsv"), &edges)
    }

    /// Adds a synthetic synset above every current root when there is more
    /// than one. Returns `true` if the graph was changed.
    pub fn inject_virtual_root(&mut self, name: &str) -> Result<bool> {
        let roots = self.root_indices();
        if roots.len() <= 1 {
            return Ok(false);
        }
        if self.index.contains_key(name) {
            return Err(Error::DuplicateSynset(name.to_string()));
        }
        let v = self.synsets.len();
        self.synsets.push(Synset {
            id: name.to_string(),
            lemmas: vec![name.to_string()],
            gloss: String::new(),
        });
        self.index.insert(name.to_string(), v);
        self.parents.push(Vec::new());
        self.children.push(roots.clone());
        for r in roots {
            self.parents[r].push(v);
        }
        self.topo.insert(0, v);
        self.virtual_root = Some(v);
        Ok(true)
    }

    pub fn virtual_root(&self) -> Option<&str> {
        self.virtual_root.map(|v| self.synsets[v].id.as_str())
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn synset(&self, idx: usize) -> &Synset {
        &self.synsets[idx]
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.synsets[idx].id
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSynset(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn parents(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.children[idx].is_empty()
    }

    pub fn root_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parents[i].is_empty()).collect()
    }

    pub fn roots(&self) -> Vec<&str> {
        self.root_indices().into_iter().map(|i| self.id(i)).collect()
    }

    /// Node order in which every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All direct and transitive hypernyms of `idx`, sorted, excluding `idx`.
    pub fn ancestors(&self, idx: usize) -> Vec<usize> {
        self.reach(idx, &self.parents)
    }

    /// All direct and transitive hyponyms of `idx`, sorted, excluding `idx`.
    pub fn descendants(&self, idx: usize) -> Vec<usize> {
        self.reach(idx, &self.children)
    }

    fn reach(&self, start: usize, adj: &[Vec<usize>]) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    out.push(w);
                    stack.push(w);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Index form of [`is_ancestor`](Self::is_ancestor).
    pub fn is_ancestor_idx(&self, u: usize, v: usize) -> bool {
        if u == v {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![v];
        while let Some(w) = stack.pop() {
            for &p in &self.parents[w] {
                if p == u {
                    return true;
                }
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        false
    }

    /// True iff `u` is a direct or transitive hypernym of `v`.
    pub fn is_ancestor(&self, u: &str, v: &str) -> Result<bool> {
        Ok(self.is_ancestor_idx(self.index_of(u)?, self.index_of(v)?))
    }

    /// Dense ancestor relation, `closure[u][v]` iff `u` is an ancestor of `v`.
    /// Quadratic memory; meant for subgraphs of a few thousand nodes.
    pub fn ancestor_closure(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        let mut closure = vec![vec![false; n]; n];
        for &v in &self.topo {
            for &p in &self.parents[v] {
                closure[p][v] = true;
                for row in closure.iter_mut() {
                    if row[p] {
                        row[v] = true;
                    }
                }
            }
        }
        closure
    }

    /// Hop counts along parent edges from `idx` to each ancestor-or-self.
    fn upward_hops(&self, idx: usize) -> HashMap<usize, usize> {
        let mut dist = HashMap::new();
        dist.insert(idx, 0);
        let mut queue = VecDeque::from([idx]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for &p in &self.parents[u] {
                dist.entry(p).or_insert_with(|| {
                    queue.push_back(p);
                    d + 1
                });
            }
        }
        dist
    }

    /// Hop distance between two synsets in the hierarchy.
    ///
    /// When `y` is an ancestor of `x` this is the shortest upward path from
    /// `x` to `y`. Otherwise it is the sum of the upward paths from both
    /// synsets to the common ancestor-or-self `z` that minimises that sum,
    /// ties going to the smallest id.
    pub fn wordnet_distance(&self, x: &str, y: &str) -> Result<GraphDistance> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        self.wordnet_distance_idx(xi, yi).ok_or_else(|| Error::NoCommonAncestor {
            x: x.to_string(),
            y: y.to_string(),
        })
    }

    pub fn wordnet_distance_idx(&self, x: usize, y: usize) -> Option<GraphDistance> {
        if x == y {
            return Some(GraphDistance {
                hops: 0,
                lowest_common_ancestor: None,
            });
        }
        let from_x = self.upward_hops(x);
        if let Some(&h) = from_x.get(&y) {
            return Some(GraphDistance {
                hops: h,
                lowest_common_ancestor: None,
            });
        }
        let from_y = self.upward_hops(y);
        from_x
            .iter()
            .filter_map(|(&z, &dx)| from_y.get(&z).map(|&dy| (dx + dy, z)))
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| self.id(a.1).cmp(self.id(b.1))))
            .map(|(hops, z)| GraphDistance {
                hops,
                lowest_common_ancestor: Some(self.id(z).to_string()),
            })
    }

    /// Specificity of each synset in percent: 0 for the root, 100 for leaves.
    ///
    /// Interior nodes get `depth / (depth + height)` where `depth` is the
    /// longest path from the root and `height` the longest path to a leaf.
    pub fn depth_scores(&self) -> Result<Vec<f64>> {
        let roots = self.root_indices();
        if roots.len() != 1 {
            return Err(Error::MultipleRoots(
                roots.iter().map(|&r| self.id(r).to_string()).collect(),
            ));
        }
        let n = self.len();
        let mut depth = vec![0usize; n];
        for &v in &self.topo {
            for &c in &self.children[v] {
                depth[c] = depth[c].max(depth[v] + 1);
            }
        }
        let mut height = vec![0usize; n];
        for &v in self.topo.iter().rev() {
            for &p in &self.parents[v] {
                height[p] = height[p].max(height[v] + 1);
            }
        }
        Ok((0..n)
            .map(|v| {
                let span = depth[v] + height[v];
                if span == 0 {
                    0.0
                } else {
                    100.0 * depth[v] as f64 / span as f64
                }
            })
            .collect())
    }

    /// Induces the tree over `nodes` obtained by attaching each node to its
    /// nearest ancestor inside the set (fewest hops, ties to the smallest id).
    /// Returns `(parent, child)` id pairs; nodes with no ancestor in the set
    /// are roots of the induced forest.
    pub fn induced_tree(&self, nodes: &[String]) -> Result<Vec<(String, String)>> {
        let members: BTreeSet<usize> = nodes
            .iter()
            .map(|id| self.index_of(id))
            .collect::<Result<_>>()?;
        let mut edges = Vec::new();
        for &v in &members {
            let hops = self.upward_hops(v);
            let best = hops
                .iter()
                .filter(|(&a, _)| a != v && members.contains(&a))
                .min_by(|a, b| a.1.cmp(b.1).then_with(|| self.id(*a.0).cmp(self.id(*b.0))));
            if let Some((&p, _)) = best {
                edges.push((self.id(p).to_string(), self.id(v).to_string()));
            }
        }
        Ok(edges)
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| Error::io(path, e)))))
}

pub fn read_synsets(path: &Path) -> Result<Vec<Synset>> {
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let id = cols.next().unwrap_or_default().trim();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty synset id".into(),
            });
        }
        let lemmas = cols
            .next()
            .unwrap_or_default()
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let gloss = cols.next().unwrap_or_default().to_string();
        out.push(Synset {
            id: id.to_string(),
            lemmas,
            gloss,
        });
    }
    Ok(out)
}

pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        match cols.as_slice() {
            [child, parent] if !child.is_empty() && !parent.is_empty() => {
                out.push((child.to_string(), parent.to_string()))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("expected `child \\t parent`, got {line:?}"),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> TaxonomyGraph {
        TaxonomyGraph::new(
            vec![
                Synset::new("entity.n.01", &["entity"], ""),
                Synset::new("animal.n.01", &["animal"], ""),
                Synset::new("dog.n.01", &["dog"], ""),
            ],
            &[("dog.n.01", "animal.n.01"), ("animal.n.01", "entity.n.01")],
        )
        .unwrap()
    }

    fn with_cat() -> TaxonomyGraph {
        TaxonomyGraph::new(
            vec![
                Synset::new("entity.n.01", &["entity"], ""),
                Synset::new("animal.n.01", &["animal"], ""),
                Synset::new("dog.n.01", &["dog"], ""),
                Synset::new("cat.n.01", &["cat"], ""),
            ],
            &[
                ("dog.n.01", "animal.n.01"),
                ("cat.n.01", "animal.n.01"),
                ("animal.n.01", "entity.n.01"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn minimal_chain() {
        let g = chain();
        assert_eq!(g.len(), 3);
        assert_eq!(g.ancestors(g.index_of("dog.n.01").unwrap()).len(), 2);
        assert!(g.is_ancestor("entity.n.01", "dog.n.01").unwrap());
        assert!(!g.is_ancestor("dog.n.01", "entity.n.01").unwrap());
        assert!(!g.is_ancestor("dog.n.01", "dog.n.01").unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let s = || vec![Synset::new("dog.n.01", &["dog"], ""), Synset::new("animal.n.01", &["animal"], "")];
        assert!(matches!(
            TaxonomyGraph::new(s(), &[("dog.n.01", "dog.n.01")]),
            Err(Error::Cycle(ids)) if ids == vec!["dog.n.01".to_string()]
        ));
        assert!(matches!(
            TaxonomyGraph::new(s(), &[("dog.n.01", "animal.n.01"), ("animal.n.01", "dog.n.01")]),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(
            TaxonomyGraph::new(s(), &[("dog.n.01", "wolf.n.01")]),
            Err(Error::DanglingEdge { missing, .. }) if missing == "wolf.n.01"
        ));
        let mut dup = s();
        dup.push(Synset::new("dog.n.01", &["hound"], ""));
        assert!(matches!(
            TaxonomyGraph::new(dup, &[] as &[(&str, &str)]),
            Err(Error::DuplicateSynset(id)) if id == "dog.n.01"
        ));
        assert!(matches!(chain().is_ancestor("x", "dog.n.01"), Err(Error::UnknownSynset(_))));
    }

    #[test]
    fn distances() {
        let g = with_cat();
        assert_eq!(g.wordnet_distance("dog.n.01", "dog.n.01").unwrap().hops, 0);
        let up = g.wordnet_distance("dog.n.01", "entity.n.01").unwrap();
        assert_eq!(up.hops, 2);
        assert_eq!(up.lowest_common_ancestor, None);
        let sib = g.wordnet_distance("cat.n.01", "dog.n.01").unwrap();
        assert_eq!(sib.hops, 2);
        assert_eq!(sib.lowest_common_ancestor.as_deref(), Some("animal.n.01"));
        // Downward pair falls into the common-ancestor case with z = x.
        let down = g.wordnet_distance("entity.n.01", "dog.n.01").unwrap();
        assert_eq!(down.hops, 2);
        assert_eq!(down.lowest_common_ancestor.as_deref(), Some("entity.n.01"));
    }

    #[test]
    fn no_common_ancestor() {
        let g = TaxonomyGraph::new(
            vec![Synset::new("a", &["a"], ""), Synset::new("b", &["b"], "")],
            &[] as &[(&str, &str)],
        )
        .unwrap();
        assert!(matches!(g.wordnet_distance("a", "b"), Err(Error::NoCommonAncestor { .. })));
    }

    #[test]
    fn depth_of_chain_and_singleton() {
        let g = chain();
        assert_eq!(g.depth_scores().unwrap(), vec![0.0, 50.0, 100.0]);
        let single = TaxonomyGraph::new(vec![Synset::new("a", &["a"], "")], &[] as &[(&str, &str)]).unwrap();
        assert_eq!(single.depth_scores().unwrap(), vec![0.0]);
    }

    #[test]
    fn virtual_root_unifies_forest() {
        let mut g = TaxonomyGraph::new(
            vec![Synset::new("a", &["a"], ""), Synset::new("b", &["b"], ""), Synset::new("c", &["c"], "")],
            &[("c", "a")],
        )
        .unwrap();
        assert!(matches!(g.depth_scores(), Err(Error::MultipleRoots(_))));
        assert!(g.inject_virtual_root("ROOT").unwrap());
        assert_eq!(g.roots(), vec!["ROOT"]);
        assert_eq!(g.virtual_root(), Some("ROOT"));
        assert!(g.is_ancestor("ROOT", "c").unwrap());
        assert_eq!(g.topological_order()[0], g.index_of("ROOT").unwrap());
        assert!(!g.inject_virtual_root("ROOT2").unwrap());
    }

    #[test]
    fn induced_tree_skips_missing_levels() {
        let g = with_cat();
        let nodes: Vec<String> = ["entity.n.01", "dog.n.01", "cat.n.01"].iter().map(|s| s.to_string()).collect();
        let mut edges = g.induced_tree(&nodes).unwrap();
        edges.sort();
        assert_eq!(
            edges,
            vec![
                ("entity.n.01".to_string(), "cat.n.01".to_string()),
                ("entity.n.01".to_string(), "dog.n.01".to_string())
            ]
        );
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = with_cat();
        g.write_dir(dir.path()).unwrap();
        let back = TaxonomyGraph::load_dir(dir.path()).unwrap();
        assert_eq!(back.synsets(), g.synsets());
        assert_eq!(back.edge_count(), 3);
    }
}
