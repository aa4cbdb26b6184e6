//! Seeded synthetic taxonomies and gloss corpora for desk-scale runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sampler::GlossOccurrence;
use crate::taxonomy::{Synset, TaxonomyGraph};

pub fn synset_id(i: usize) -> String {
    format!("c{i:04}.n.01")
}

/// Random recursive tree rooted at node 0: node `i` picks a parent uniformly
/// among earlier nodes that still have fewer than `max_children` children.
pub fn random_tree(n: usize, max_children: usize, seed: u64) -> TaxonomyGraph {
    assert!(n >= 1 && max_children >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut child_count = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let open: Vec<usize> = (0..i).filter(|&p| child_count[p] < max_children).collect();
        let p = open[rng.random_range(0..open.len())];
        child_count[p] += 1;
        edges.push((synset_id(i), synset_id(p)));
    }
    let synsets = (0..n)
        .map(|i| Synset {
            id: synset_id(i),
            lemmas: vec![format!("concept_{i}")],
            gloss: format!("synthetic concept number {i}"),
        })
        .collect();
    TaxonomyGraph::new(synsets, &edges).expect("random tree is acyclic")
}

/// The 100-synset toy graph used by split and sampling checks. Every tenth
/// synset (offset 5) also carries the lemma of its predecessor, so lemma
/// groups span two synsets.
pub fn toy_graph(seed: u64) -> TaxonomyGraph {
    let base = random_tree(100, 4, seed);
    let mut synsets = base.synsets().to_vec();
    for i in (5..100).step_by(10) {
        let shared = synsets[i - 1].lemmas[0].clone();
        synsets[i].lemmas.push(shared);
    }
    let edges: Vec<(String, String)> = (0..base.len())
        .flat_map(|c| {
            base.parents(c)
                .iter()
                .map(|&p| (base.id(c).to_string(), base.id(p).to_string()))
                .collect::<Vec<_>>()
        })
        .collect();
    TaxonomyGraph::new(synsets, &edges).expect("toy graph is acyclic")
}

/// `per_synset` template sentences for every synset, each annotating the
/// synset's first lemma.
pub fn synthetic_glosses(g: &TaxonomyGraph, per_synset: usize) -> Vec<GlossOccurrence> {
    let mut out = Vec::with_capacity(g.len() * per_synset);
    for s in g.synsets() {
        let lemma = &s.lemmas[0];
        for k in 0..per_synset {
            let prefix = format!("example {k}: the ");
            let sentence = format!("{prefix}{lemma} appears in context");
            out.push(GlossOccurrence {
                synset_id: s.id.clone(),
                sentence,
                span: (prefix.len(), prefix.len() + lemma.len()),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_tree_shape() {
        let g = random_tree(50, 3, 9);
        assert_eq!(g.len(), 50);
        assert_eq!(g.edge_count(), 49);
        assert_eq!(g.roots(), vec![synset_id(0).as_str()]);
        assert!((0..50).all(|i| g.children(i).len() <= 3));
        assert_eq!(random_tree(50, 3, 9).edge_count(), 49);
    }

    #[test]
    fn toy_graph_has_shared_lemmas() {
        let g = toy_graph(1);
        assert_eq!(g.len(), 100);
        assert_eq!(g.synset(5).lemmas, vec!["concept_5".to_string(), "concept_4".to_string()]);
    }
}
