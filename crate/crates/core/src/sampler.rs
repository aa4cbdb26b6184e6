//! Leak-free concept splits and labeled edge examples.
//!
//! Synsets that share a lemma always land in the same split, so no surface
//! form seen in training reappears at evaluation time. Each triplet
//! `<A, B, C>` (B a hypernym of A, C unrelated to both) expands to one
//! positive and five negative directed pairs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic};
use crate::taxonomy::TaxonomyGraph;

pub const MIN_SPLIT_SYNSETS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitProportions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitProportions {
    fn default() -> Self {
        SplitProportions {
            train: 0.70,
            valid: 0.15,
            test: 0.15,
        }
    }
}

impl SplitProportions {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    /// Split of each synset, indexed like the graph.
    pub splits: Vec<Split>,
    pub lemma_index: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn split_of(&self, idx: usize) -> Split {
        self.splits[idx]
    }

    pub fn members(&self, split: Split) -> Vec<usize> {
        (0..self.splits.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }

    pub fn write_tsv(&self, g: &TaxonomyGraph, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for (i, s) in self.splits.iter().enumerate() {
            writeln!(out, "{}\t{}", g.id(i), s).expect("vec write");
        }
        write_atomic(path, &out)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn quotas(total: usize, props: [f64; 3]) -> [i64; 3] {
    let sum: f64 = props.iter().sum();
    let mut q = props.map(|p| (total as f64 * p / sum).round() as i64);
    q[0] += total as i64 - q.iter().sum::<i64>();
    q
}

pub fn make_splits(g: &TaxonomyGraph, seed: u64) -> Result<SplitAssignment> {
    make_splits_with(g, SplitProportions::default(), seed)
}

/// Assigns every synset to a split.
///
/// Lemma-connected groups are placed whole, largest first, into whichever
/// split has the biggest remaining quota of leaves and internal nodes, which
/// keeps both the split sizes and the per-split leaf ratio on target.
pub fn make_splits_with(
    g: &TaxonomyGraph,
    props: SplitProportions,
    seed: u64,
) -> Result<SplitAssignment> {
    let n = g.len();
    if n < MIN_SPLIT_SYNSETS {
        return Err(Error::GraphTooSmall {
            found: n,
            required: MIN_SPLIT_SYNSETS,
        });
    }
    let props = props.as_array();
    if props.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || props.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config(format!("invalid split proportions {props:?}")));
    }

    let mut uf = UnionFind((0..n).collect());
    let mut first_owner: HashMap<&str, usize> = HashMap::new();
    for (i, s) in g.synsets().iter().enumerate() {
        for lemma in &s.lemmas {
            match first_owner.get(lemma.as_str()) {
                Some(&j) => uf.union(i, j),
                None => {
                    first_owner.insert(lemma, i);
                }
            }
        }
    }
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        grouped.entry(r).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = grouped.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    groups.sort_by_key(|grp| std::cmp::Reverse(grp.len()));

    let leaves = (0..n).filter(|&i| g.is_leaf(i)).count();
    let size_quota = quotas(n, props);
    let leaf_quota = quotas(leaves, props);
    let inner_quota: [i64; 3] = std::array::from_fn(|s| size_quota[s] - leaf_quota[s]);
    let mut leaf_used = [0i64; 3];
    let mut inner_used = [0i64; 3];

    let mut splits = vec![Split::Train; n];
    for grp in &groups {
        let l = grp.iter().filter(|&&i| g.is_leaf(i)).count() as i64;
        let m = grp.len() as i64 - l;
        let score = |s: usize| {
            let fit = l * (leaf_quota[s] - leaf_used[s]) + m * (inner_quota[s] - inner_used[s]);
            let slack = (leaf_quota[s] - leaf_used[s]) + (inner_quota[s] - inner_used[s]);
            (fit, slack)
        };
        let best = (0..3)
            .max_by(|&a, &b| score(a).cmp(&score(b)).then(b.cmp(&a)))
            .expect("three splits");
        leaf_used[best] += l;
        inner_used[best] += m;
        for &i in grp {
            splits[i] = Split::ALL[best];
        }
    }

    let mut lemma_index = BTreeMap::new();
    for (i, s) in g.synsets().iter().enumerate() {
        for lemma in &s.lemmas {
            lemma_index.insert(lemma.clone(), splits[i]);
        }
    }
    Ok(SplitAssignment {
        splits,
        lemma_index,
    })
}

/// One annotated mention of a synset inside a gloss sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlossOccurrence {
    pub synset_id: String,
    pub sentence: String,
    pub span: (usize, usize),
}

pub fn read_glosses(path: &Path) -> Result<Vec<GlossOccurrence>> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|_| Error::format("glosses.jsonl", "file is not UTF-8"))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let occ: GlossOccurrence = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let chars = occ.sentence.chars().count();
        if occ.span.0 > occ.span.1 || occ.span.1 > chars {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("span {:?} outside sentence of {chars} chars", occ.span),
            });
        }
        out.push(occ);
    }
    Ok(out)
}

pub fn write_glosses(path: &Path, glosses: &[GlossOccurrence]) -> Result<()> {
    let mut out = Vec::new();
    for occ in glosses {
        serde_json::to_writer(&mut out, occ)?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

/// Number of gloss occurrences per synset; an occurrence's ordinal within its
/// synset is its sentence index.
#[derive(Debug, Clone)]
pub struct OccurrenceIndex {
    counts: Vec<usize>,
}

impl OccurrenceIndex {
    pub fn new(g: &TaxonomyGraph, glosses: &[GlossOccurrence]) -> Result<Self> {
        let mut counts = vec![0; g.len()];
        for occ in glosses {
            counts[g.index_of(&occ.synset_id)?] += 1;
        }
        Ok(OccurrenceIndex { counts })
    }

    /// Every synset gets `per_synset` occurrences.
    pub fn uniform(g: &TaxonomyGraph, per_synset: usize) -> Self {
        OccurrenceIndex {
            counts: vec![per_synset; g.len()],
        }
    }

    pub fn count(&self, idx: usize) -> usize {
        self.counts[idx]
    }
}

/// Occurrence keys of `glosses`, numbering sentences per synset in file order.
pub fn gloss_keys(glosses: &[GlossOccurrence]) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    glosses
        .iter()
        .map(|occ| {
            let k = seen.entry(occ.synset_id.as_str()).or_insert(0);
            *k += 1;
            occurrence_key(&occ.synset_id, *k - 1)
        })
        .collect()
}

pub fn occurrence_key(synset_id: &str, sentence_idx: usize) -> String {
    format!("{synset_id}#{sentence_idx}")
}

/// Synset id part of an occurrence key.
pub fn key_synset(key: &str) -> &str {
    key.rsplit_once('#').map_or(key, |(id, _)| id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub a: String,
    pub b: String,
    pub c: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub x: String,
    pub y: String,
    pub label: bool,
}

/// The six directed pairs of a triplet: `<A, B>` is the only positive.
pub fn expand_triplet(t: &Triplet) -> [LabeledPair; 6] {
    let pair = |x: &str, y: &str, label| LabeledPair {
        x: x.to_string(),
        y: y.to_string(),
        label,
    };
    [
        pair(&t.a, &t.b, true),
        pair(&t.a, &t.c, false),
        pair(&t.b, &t.c, false),
        pair(&t.b, &t.a, false),
        pair(&t.c, &t.a, false),
        pair(&t.c, &t.b, false),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    /// Rounds over each split in which every eligible synset serves as A once.
    pub triplets_per_synset: usize,
    /// Cap on validation and test triplets per split.
    pub max_triplets: Option<usize>,
}

impl SampleConfig {
    pub fn new(seed: u64) -> Self {
        SampleConfig {
            seed,
            triplets_per_synset: 1,
            max_triplets: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleReport {
    /// Synsets skipped because they have no gloss occurrence.
    pub no_gloss: Vec<String>,
    pub skipped_roots: usize,
    pub no_hypernym_in_split: usize,
    pub no_unrelated_in_split: usize,
    /// Training synsets that appear in no triplet.
    pub unseen_train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledTriplet {
    pub split: Split,
    pub triplet: Triplet,
}

struct SplitSampler<'a> {
    g: &'a TaxonomyGraph,
    ancestors: &'a [Vec<usize>],
    eligible: Vec<usize>,
    is_eligible: Vec<bool>,
}

impl SplitSampler<'_> {
    fn related(&self, x: usize, y: usize) -> bool {
        x == y || self.ancestors[y].binary_search(&x).is_ok() || self.ancestors[x].binary_search(&y).is_ok()
    }

    fn pick_unrelated(&self, a: usize, b: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        let ok = |c: usize| !self.related(a, c) && !self.related(b, c);
        for _ in 0..64 {
            let c = self.eligible[rng.random_range(0..self.eligible.len())];
            if ok(c) {
                return Some(c);
            }
        }
        let all: Vec<usize> = self.eligible.iter().copied().filter(|&c| ok(c)).collect();
        (!all.is_empty()).then(|| all[rng.random_range(0..all.len())])
    }

    fn in_split_ancestors(&self, a: usize) -> Vec<usize> {
        self.ancestors[a]
            .iter()
            .copied()
            .filter(|&b| self.is_eligible[b])
            .collect()
    }

    fn triplet(&self, a: usize, b: usize, c: usize) -> Triplet {
        Triplet {
            a: self.g.id(a).to_string(),
            b: self.g.id(b).to_string(),
            c: self.g.id(c).to_string(),
        }
    }
}

/// Samples triplets within each split.
///
/// Every eligible synset (one with a gloss occurrence and a hypernym in its
/// split) serves as A once per round. B is drawn uniformly among A's
/// in-split ancestors whose hypernym/hyponym balance is currently lowest, and
/// C uniformly among in-split synsets unrelated to both. A final pass adds
/// triplets for any training synset that still appears in none.
pub fn sample_triplets(
    g: &TaxonomyGraph,
    splits: &SplitAssignment,
    occurrences: &OccurrenceIndex,
    cfg: &SampleConfig,
) -> Result<(Vec<SampledTriplet>, SampleReport)> {
    if cfg.triplets_per_synset == 0 {
        return Err(Error::Config("triplets_per_synset must be at least 1".into()));
    }
    let ancestors: Vec<Vec<usize>> = (0..g.len()).map(|i| g.ancestors(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SampleReport::default();
    let mut out = Vec::new();
    // Positive-pair roles: appearances as hypernym (B) and as hyponym (A).
    let mut as_hyper = vec![0i64; g.len()];
    let mut as_hypo = vec![0i64; g.len()];

    for i in 0..g.len() {
        if occurrences.count(i) == 0 {
            report.no_gloss.push(g.id(i).to_string());
        }
    }

    for split in Split::ALL {
        let eligible: Vec<usize> = splits
            .members(split)
            .into_iter()
            .filter(|&i| occurrences.count(i) > 0)
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let mut is_eligible = vec![false; g.len()];
        for &i in &eligible {
            is_eligible[i] = true;
        }
        let sampler = SplitSampler {
            g,
            ancestors: &ancestors,
            eligible,
            is_eligible,
        };
        let cap = match split {
            Split::Train => None,
            _ => cfg.max_triplets,
        };
        let mut seen = vec![false; g.len()];
        let mut produced = 0usize;

        'rounds: for round in 0..cfg.triplets_per_synset {
            let mut order = sampler.eligible.clone();
            order.shuffle(&mut rng);
            for a in order {
                if cap.is_some_and(|c| produced >= c) {
                    break 'rounds;
                }
                let count_skip = round == 0;
                if g.parents(a).is_empty() {
                    report.skipped_roots += usize::from(count_skip);
                    continue;
                }
                let candidates = sampler.in_split_ancestors(a);
                if candidates.is_empty() {
                    report.no_hypernym_in_split += usize::from(count_skip);
                    continue;
                }
                let Some((b, c)) = pick_hypernym(&sampler, a, candidates, &as_hyper, &as_hypo, &mut rng) else {
                    report.no_unrelated_in_split += usize::from(count_skip);
                    continue;
                };
                as_hyper[b] += 1;
                as_hypo[a] += 1;
                for v in [a, b, c] {
                    seen[v] = true;
                }
                produced += 1;
                out.push(SampledTriplet {
                    split,
                    triplet: sampler.triplet(a, b, c),
                });
            }
        }

        if split == Split::Train {
            cover_unseen(&sampler, &ancestors, &mut seen, &mut rng, &mut out);
            report.unseen_train = sampler
                .eligible
                .iter()
                .filter(|&&v| !seen[v])
                .map(|&v| g.id(v).to_string())
                .collect();
        }
    }
    Ok((out, report))
}

/// Picks B among `candidates` with the lowest hypernym/hyponym balance,
/// uniformly, moving to the next balance level when no unrelated C exists
/// for any ancestor at the current one.
fn pick_hypernym(
    sampler: &SplitSampler<'_>,
    a: usize,
    mut candidates: Vec<usize>,
    as_hyper: &[i64],
    as_hypo: &[i64],
    rng: &mut ChaCha8Rng,
) -> Option<(usize, usize)> {
    let balance = |b: usize| as_hyper[b] - as_hypo[b];
    candidates.sort_by_key(|&b| (balance(b), b));
    for level in candidates.chunk_by_mut(|&x, &y| balance(x) == balance(y)) {
        level.shuffle(rng);
        for &b in level.iter() {
            if let Some(c) = sampler.pick_unrelated(a, b, rng) {
                return Some((b, c));
            }
        }
    }
    None
}

/// Adds a triplet for every unseen training synset: as B above a random
/// in-split descendant if it has one, otherwise as C beside a random pair.
fn cover_unseen(
    sampler: &SplitSampler<'_>,
    ancestors: &[Vec<usize>],
    seen: &mut [bool],
    rng: &mut ChaCha8Rng,
    out: &mut Vec<SampledTriplet>,
) {
    let pairs: Vec<(usize, usize)> = sampler
        .eligible
        .iter()
        .flat_map(|&a| sampler.in_split_ancestors(a).into_iter().map(move |b| (a, b)))
        .collect();
    for &v in &sampler.eligible {
        if seen[v] {
            continue;
        }
        let below: Vec<usize> = sampler
            .eligible
            .iter()
            .copied()
            .filter(|&a| ancestors[a].binary_search(&v).is_ok())
            .collect();
        let mut found = None;
        if !below.is_empty() {
            let a = below[rng.random_range(0..below.len())];
            found = sampler.pick_unrelated(a, v, rng).map(|c| (a, v, c));
        }
        if found.is_none() {
            let fits: Vec<&(usize, usize)> = pairs
                .iter()
                .filter(|(a, b)| !sampler.related(*a, v) && !sampler.related(*b, v))
                .collect();
            if !fits.is_empty() {
                let &(a, b) = fits[rng.random_range(0..fits.len())];
                found = Some((a, b, v));
            }
        }
        if let Some((a, b, c)) = found {
            for w in [a, b, c] {
                seen[w] = true;
            }
            out.push(SampledTriplet {
                split: Split::Train,
                triplet: sampler.triplet(a, b, c),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEdgeExample {
    pub x: String,
    pub y: String,
    pub label: bool,
    pub split: Split,
    pub x_sentence: usize,
    pub y_sentence: usize,
}

impl LabeledEdgeExample {
    pub fn x_key(&self) -> String {
        occurrence_key(&self.x, self.x_sentence)
    }

    pub fn y_key(&self) -> String {
        occurrence_key(&self.y, self.y_sentence)
    }
}

/// Expands triplets and attaches a uniformly drawn sentence to each side.
pub fn build_examples(
    g: &TaxonomyGraph,
    triplets: &[SampledTriplet],
    occurrences: &OccurrenceIndex,
    seed: u64,
) -> Result<Vec<LabeledEdgeExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e47_e1ce);
    let draw = |id: &str, rng: &mut ChaCha8Rng| -> Result<usize> {
        let n = occurrences.count(g.index_of(id)?);
        if n == 0 {
            return Err(Error::Sampling(format!("synset `{id}` has no gloss occurrence")));
        }
        Ok(rng.random_range(0..n))
    };
    let mut out = Vec::with_capacity(triplets.len() * 6);
    for st in triplets {
        for pair in expand_triplet(&st.triplet) {
            let x_sentence = draw(&pair.x, &mut rng)?;
            let y_sentence = draw(&pair.y, &mut rng)?;
            out.push(LabeledEdgeExample {
                x: pair.x,
                y: pair.y,
                label: pair.label,
                split: st.split,
                x_sentence,
                y_sentence,
            });
        }
    }
    Ok(out)
}

pub fn write_examples(path: &Path, examples: &[LabeledEdgeExample]) -> Result<()> {
    let mut out = Vec::new();
    for ex in examples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            ex.x,
            ex.y,
            u8::from(ex.label),
            ex.split,
            ex.x_sentence,
            ex.y_sentence
        )
        .expect("vec write");
    }
    write_atomic(path, &out)
}

pub fn read_examples(path: &Path) -> Result<Vec<LabeledEdgeExample>> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|_| Error::format("examples.tsv", "file is not UTF-8"))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [x, y, label, split, xs, ys] = cols.as_slice() else {
            return Err(parse_err(i + 1, format!("expected 6 columns, got {}", cols.len())));
        };
        let label = match *label {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(i + 1, format!("label must be 0 or 1, got `{other}`"))),
        };
        let index = |s: &str| s.parse::<usize>().map_err(|e| parse_err(i + 1, format!("sentence index `{s}`: {e}")));
        out.push(LabeledEdgeExample {
            x: x.to_string(),
            y: y.to_string(),
            label,
            split: split.parse().map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
            x_sentence: index(xs)?,
            y_sentence: index(ys)?,
        });
    }
    Ok(out)
}

pub fn examples_in(examples: &[LabeledEdgeExample], split: Split) -> Vec<LabeledEdgeExample> {
    examples.iter().filter(|e| e.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{random_tree, toy_graph};
    use crate::taxonomy::Synset;
    use std::collections::HashSet;

    fn chain_with_rock() -> TaxonomyGraph {
        TaxonomyGraph::new(
            vec![
                Synset::new("entity", &["entity"], ""),
                Synset::new("animal", &["animal"], ""),
                Synset::new("dog", &["dog"], ""),
                Synset::new("object", &["object"], ""),
                Synset::new("rock", &["rock"], ""),
            ],
            &[("dog", "animal"), ("animal", "entity"), ("rock", "object"), ("object", "entity")],
        )
        .unwrap()
    }

    #[test]
    fn expansion_has_one_positive() {
        let t = Triplet {
            a: "dog".into(),
            b: "animal".into(),
            c: "rock".into(),
        };
        let pairs = expand_triplet(&t);
        let positives: Vec<_> = pairs.iter().filter(|p| p.label).collect();
        assert_eq!(positives.len(), 1);
        assert_eq!((positives[0].x.as_str(), positives[0].y.as_str()), ("dog", "animal"));
        assert!(pairs.iter().any(|p| p.x == "animal" && p.y == "dog" && !p.label));
        assert!(pairs.iter().all(|p| p.x != p.y));
    }

    #[test]
    fn only_option_triplet() {
        let g = chain_with_rock();
        let splits = SplitAssignment {
            splits: vec![Split::Train; 5],
            lemma_index: BTreeMap::new(),
        };
        let occ = OccurrenceIndex::uniform(&g, 1);
        let (triplets, _) = sample_triplets(&g, &splits, &occ, &SampleConfig::new(3)).unwrap();
        for st in triplets.iter().filter(|t| t.triplet.a == "dog") {
            assert!(["animal", "entity"].contains(&st.triplet.b.as_str()));
            assert!(["rock", "object"].contains(&st.triplet.c.as_str()));
        }
        assert!(triplets.iter().all(|t| t.triplet.a != "entity"));
    }

    #[test]
    fn too_small_graph() {
        let g = random_tree(19, 3, 1);
        assert!(matches!(make_splits(&g, 0), Err(Error::GraphTooSmall { found: 19, .. })));
    }

    #[test]
    fn shared_lemma_keeps_synsets_together() {
        let g = toy_graph(11);
        let s = make_splits(&g, 7).unwrap();
        for i in (5..100).step_by(10) {
            assert_eq!(s.split_of(i), s.split_of(i - 1));
        }
    }

    #[test]
    fn splits_are_deterministic() {
        let g = toy_graph(11);
        assert_eq!(make_splits(&g, 7).unwrap(), make_splits(&g, 7).unwrap());
        let a = serde_json::to_vec(&make_splits(&g, 7).unwrap()).unwrap();
        let b = serde_json::to_vec(&make_splits(&g, 7).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lemma_disjoint_and_proportional() {
        let g = toy_graph(11);
        let s = make_splits(&g, 7).unwrap();
        let lemma_sets: Vec<HashSet<&str>> = Split::ALL
            .iter()
            .map(|&sp| {
                s.members(sp)
                    .iter()
                    .flat_map(|&i| g.synset(i).lemmas.iter().map(String::as_str))
                    .collect()
            })
            .collect();
        for i in 0..3 {
            for j in i + 1..3 {
                assert_eq!(lemma_sets[i].intersection(&lemma_sets[j]).count(), 0);
            }
        }
        for (sp, target) in [(Split::Train, 70), (Split::Valid, 15), (Split::Test, 15)] {
            assert!((s.count(sp) as i64 - target).abs() <= 2, "{sp}: {}", s.count(sp));
        }
    }

    #[test]
    fn leaf_ratio_per_split() {
        let g = random_tree(400, 4, 21);
        let s = make_splits(&g, 2).unwrap();
        let global = (0..g.len()).filter(|&i| g.is_leaf(i)).count() as f64 / g.len() as f64;
        for sp in Split::ALL {
            let m = s.members(sp);
            let r = m.iter().filter(|&&i| g.is_leaf(i)).count() as f64 / m.len() as f64;
            assert!((r - global).abs() <= 0.03, "{sp}: {r} vs {global}");
        }
    }

    #[test]
    fn sampled_triplets_are_valid_and_cover_training() {
        let g = toy_graph(11);
        let s = make_splits(&g, 7).unwrap();
        let occ = OccurrenceIndex::uniform(&g, 2);
        let mut cfg = SampleConfig::new(5);
        cfg.triplets_per_synset = 3;
        let (triplets, report) = sample_triplets(&g, &s, &occ, &cfg).unwrap();
        assert!(triplets.len() >= 200, "{}", triplets.len());
        for st in &triplets {
            let t = &st.triplet;
            let [a, b, c] = [&t.a, &t.b, &t.c].map(|id| g.index_of(id).unwrap());
            assert!(g.is_ancestor_idx(b, a));
            for (p, q) in [(c, a), (a, c), (c, b), (b, c)] {
                assert!(!g.is_ancestor_idx(p, q));
            }
            assert!([a, b, c].iter().all(|&v| s.split_of(v) == st.split));
        }
        // only synsets related to every other training synset can stay unseen
        let train = s.members(Split::Train);
        for id in &report.unseen_train {
            let v = g.index_of(id).unwrap();
            assert!(train.iter().all(|&u| u == v || g.is_ancestor_idx(u, v) || g.is_ancestor_idx(v, u)), "{id}");
        }
    }

    #[test]
    fn missing_gloss_is_reported() {
        let g = chain_with_rock();
        let glosses = vec![
            GlossOccurrence { synset_id: "dog".into(), sentence: "a dog".into(), span: (2, 5) },
            GlossOccurrence { synset_id: "animal".into(), sentence: "an animal".into(), span: (3, 9) },
            GlossOccurrence { synset_id: "rock".into(), sentence: "a rock".into(), span: (2, 6) },
        ];
        let occ = OccurrenceIndex::new(&g, &glosses).unwrap();
        let splits = SplitAssignment {
            splits: vec![Split::Train; 5],
            lemma_index: BTreeMap::new(),
        };
        let (triplets, report) = sample_triplets(&g, &splits, &occ, &SampleConfig::new(1)).unwrap();
        assert_eq!(report.no_gloss, vec!["entity".to_string(), "object".to_string()]);
        assert_eq!(
            triplets[0].triplet,
            Triplet { a: "dog".into(), b: "animal".into(), c: "rock".into() }
        );
    }

    #[test]
    fn tsv_round_trip() {
        let g = toy_graph(3);
        let s = make_splits(&g, 1).unwrap();
        let occ = OccurrenceIndex::uniform(&g, 3);
        let (triplets, _) = sample_triplets(&g, &s, &occ, &SampleConfig::new(1)).unwrap();
        let examples = build_examples(&g, &triplets, &occ, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("examples.tsv");
        write_examples(&path, &examples).unwrap();
        assert_eq!(read_examples(&path).unwrap(), examples);
        assert!(examples.iter().all(|e| e.x_sentence < 3 && e.y_sentence < 3));
    }

    #[test]
    fn glosses_jsonl_round_trip_and_span_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        std::fs::write(&path, "{\"synset_id\":\"dog\",\"sentence\":\"a dog\",\"span\":[2,5]}\n").unwrap();
        let g = read_glosses(&path).unwrap();
        assert_eq!(g[0].span, (2, 5));
        std::fs::write(&path, "{\"synset_id\":\"dog\",\"sentence\":\"a dog\",\"span\":[2,9]}\n").unwrap();
        assert!(matches!(read_glosses(&path), Err(Error::Parse { line: 1, .. })));
    }
}
