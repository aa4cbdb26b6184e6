//! Per-concept F1, semantic factor curves and category tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{Confusion, LayerResult, Prediction};
use crate::taxonomy::TaxonomyGraph;

pub const MIN_BIN_SAMPLES: usize = 100;
pub const CI_LEVEL: f64 = 0.90;

/// F1 of every synset over the predictions it takes part in, in either role.
pub fn concept_f1(predictions: &[Prediction]) -> BTreeMap<String, f64> {
    let mut by_synset: BTreeMap<&str, Confusion> = BTreeMap::new();
    for p in predictions {
        by_synset.entry(&p.x).or_default().add(p.predicted(), p.label);
        if p.y != p.x {
            by_synset.entry(&p.y).or_default().add(p.predicted(), p.label);
        }
    }
    by_synset.into_iter().map(|(s, c)| (s.to_string(), c.f1())).collect()
}

/// Reads `lemma \t count` lines.
pub fn read_frequencies(path: &Path) -> Result<HashMap<String, u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (lemma, count) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `lemma \\t count`".into()))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad count {count:?}")))?;
        *out.entry(lemma.trim().to_string()).or_insert(0) += count;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    DepthPercent,
    Subclasses,
    Frequency,
    Senses,
    SenseRank,
    Siblings,
    Synonyms,
}

impl Factor {
    pub const ALL: [Factor; 7] = [
        Factor::DepthPercent,
        Factor::Subclasses,
        Factor::Frequency,
        Factor::Senses,
        Factor::SenseRank,
        Factor::Siblings,
        Factor::Synonyms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::DepthPercent => "depth_percent",
            Factor::Subclasses => "n_subclasses",
            Factor::Frequency => "frequency",
            Factor::Senses => "n_senses",
            Factor::SenseRank => "sense_rank",
            Factor::Siblings => "n_siblings",
            Factor::Synonyms => "n_synonyms",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "depth" => "depth_percent",
            "subclasses" => "n_subclasses",
            "senses" => "n_senses",
            "siblings" => "n_siblings",
            "synonyms" => "n_synonyms",
            other => other,
        };
        Factor::ALL
            .into_iter()
            .find(|f| f.as_str() == alias)
            .ok_or(Error::UnknownFactor(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptFactors {
    pub synset_id: String,
    pub depth_percent: f64,
    /// Transitive hyponym count.
    pub n_subclasses: usize,
    /// Summed corpus counts of the synset's lemmas; `None` without a table.
    pub frequency: Option<u64>,
    /// Synsets sharing the first lemma, this one included.
    pub n_senses: usize,
    /// 1-based position among those synsets in the synset table's order.
    pub sense_rank: usize,
    /// Distinct other children of the synset's parents.
    pub n_siblings: usize,
    pub n_synonyms: usize,
}

impl ConceptFactors {
    pub fn value(&self, f: Factor) -> Option<f64> {
        Some(match f {
            Factor::DepthPercent => self.depth_percent,
            Factor::Subclasses => self.n_subclasses as f64,
            Factor::Frequency => self.frequency? as f64,
            Factor::Senses => self.n_senses as f64,
            Factor::SenseRank => self.sense_rank as f64,
            Factor::Siblings => self.n_siblings as f64,
            Factor::Synonyms => self.n_synonyms as f64,
        })
    }
}

pub fn concept_factors(g: &TaxonomyGraph, frequencies: Option<&HashMap<String, u64>>) -> Result<Vec<ConceptFactors>> {
    let depth = g.depth_scores()?;
    let mut senses: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in g.synsets().iter().enumerate() {
        for l in &s.lemmas {
            senses.entry(l.as_str()).or_default().push(i);
        }
    }
    Ok((0..g.len())
        .map(|i| {
            let s = g.synset(i);
            let (n_senses, sense_rank) = match s.lemmas.first().and_then(|l| senses.get(l.as_str())) {
                Some(list) => (list.len(), list.iter().position(|&j| j == i).unwrap() + 1),
                None => (1, 1),
            };
            let mut siblings: Vec<usize> = g
                .parents(i)
                .iter()
                .flat_map(|&p| g.children(p).iter().copied())
                .filter(|&c| c != i)
                .collect();
            siblings.sort_unstable();
            siblings.dedup();
            ConceptFactors {
                synset_id: s.id.clone(),
                depth_percent: depth[i],
                n_subclasses: g.descendants(i).len(),
                frequency: frequencies.map(|f| s.lemmas.iter().map(|l| f.get(l).copied().unwrap_or(0)).sum()),
                n_senses,
                sense_rank,
                n_siblings: siblings.len(),
                n_synonyms: s.lemmas.len().saturating_sub(1),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum BinSpec {
    /// Equal-population bins from `k`-quantile edges.
    Quantiles(usize),
    /// Explicit ascending edges; values outside are dropped.
    Edges(Vec<f64>),
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::Quantiles(10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCurve {
    pub factor: String,
    pub ci_level: f64,
    pub min_samples: usize,
    pub bins: Vec<Bin>,
    /// Bins dropped for having fewer than `min_samples` concepts.
    pub excluded: Vec<Bin>,
    /// Concepts with both an F1 value and a factor value.
    pub total: usize,
}

impl BinnedCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("factor,lo,hi,count,mean,ci_low,ci_high\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.factor, b.lo, b.hi, b.count, b.mean, b.ci_low, b.ci_high
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub min_samples: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            seed: 0,
            min_samples: MIN_BIN_SAMPLES,
        }
    }
}

/// Mean of `values` with a percentile bootstrap interval at [`CI_LEVEL`].
/// The interval is widened if needed so that it contains the mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if resamples == 0 || n == 0 {
        return (mean, mean, mean);
    }
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - CI_LEVEL) / 2.0;
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (mean, at(tail).min(mean), at(1.0 - tail).max(mean))
}

fn bin_edges(sorted: &[f64], spec: &BinSpec) -> Result<Vec<f64>> {
    let mut edges = match spec {
        BinSpec::Quantiles(k) => {
            if *k == 0 {
                return Err(Error::Config("quantile bin count must be positive".into()));
            }
            let n = sorted.len();
            (0..=*k)
                .map(|i| sorted[((i * (n - 1)) as f64 / *k as f64).round() as usize])
                .collect::<Vec<_>>()
        }
        BinSpec::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("bin edges must be strictly ascending, at least two".into()));
            }
            e.clone()
        }
    };
    edges.dedup();
    if edges.len() == 1 {
        edges.push(edges[0]);
    }
    Ok(edges)
}

/// Groups concepts by the value of `factor` and reports mean F1 per bin with
/// a bootstrap interval. Bins are half-open `[lo, hi)` except the last.
pub fn bin_by_factor(
    f1: &BTreeMap<String, f64>,
    factors: &[ConceptFactors],
    factor: Factor,
    spec: &BinSpec,
    boot: BootstrapConfig,
) -> Result<BinnedCurve> {
    let mut points: Vec<(f64, f64)> = factors
        .iter()
        .filter_map(|c| Some((c.value(factor)?, *f1.get(&c.synset_id)?)))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyExamples("factor binning"));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = points.iter().map(|p| p.0).collect();
    let edges = bin_edges(&sorted, spec)?;
    let last = edges.len() - 2;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); edges.len() - 1];
    for &(v, score) in &points {
        let slot = (0..=last).find(|&b| {
            let (lo, hi) = (edges[b], edges[b + 1]);
            (v >= lo && v < hi) || (b == last && v >= lo && v <= hi)
        });
        if let Some(b) = slot {
            groups[b].push(score);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(boot.seed);
    let mut bins = Vec::new();
    let mut excluded = Vec::new();
    for (b, scores) in groups.iter().enumerate() {
        let (lo, hi) = (edges[b], edges[b + 1]);
        if scores.len() < boot.min_samples {
            let mean = if scores.is_empty() {
                f64::NAN
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            };
            excluded.push(Bin { lo, hi, count: scores.len(), mean, ci_low: mean, ci_high: mean });
            continue;
        }
        let (mean, ci_low, ci_high) = bootstrap_mean_ci(scores, boot.resamples, &mut rng);
        bins.push(Bin { lo, hi, count: scores.len(), mean, ci_low, ci_high });
    }
    Ok(BinnedCurve {
        factor: factor.to_string(),
        ci_level: CI_LEVEL,
        min_samples: boot.min_samples,
        bins,
        excluded,
        total: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub hops: usize,
    pub count: usize,
    pub f1: f64,
    pub accuracy: f64,
}

/// Example-level F1 grouped by the hop distance between `x` and `y`.
/// Pairs without a common ancestor are skipped; bins under `min_samples`
/// examples are dropped.
pub fn pair_distance_f1(predictions: &[Prediction], g: &TaxonomyGraph, min_samples: usize) -> Result<Vec<DistanceBin>> {
    let mut by_hops: BTreeMap<usize, Confusion> = BTreeMap::new();
    for p in predictions {
        let (x, y) = (g.index_of(&p.x)?, g.index_of(&p.y)?);
        if let Some(d) = g.wordnet_distance_idx(x, y) {
            by_hops.entry(d.hops).or_default().add(p.predicted(), p.label);
        }
    }
    Ok(by_hops
        .into_iter()
        .filter(|(_, c)| c.total() >= min_samples)
        .map(|(hops, c)| DistanceBin {
            hops,
            count: c.total(),
            f1: c.f1(),
            accuracy: c.accuracy(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub root: String,
    pub members: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
}

/// Mean and population standard deviation of F1 over each category root and
/// all of its descendants that have an F1 value.
pub fn category_f1(f1: &BTreeMap<String, f64>, g: &TaxonomyGraph, roots: &[String]) -> Result<Vec<CategoryRow>> {
    roots
        .iter()
        .map(|root| {
            let r = g.index_of(root)?;
            let mut members = g.descendants(r);
            members.push(r);
            let mut scores: Vec<f64> = members.iter().filter_map(|&i| f1.get(g.id(i)).copied()).collect();
            if scores.is_empty() {
                return Err(Error::EmptyCategory(root.clone()));
            }
            scores.sort_by(f64::total_cmp);
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
            Ok(CategoryRow {
                root: root.clone(),
                members: scores.len(),
                mean_f1: mean,
                std_f1: var.sqrt(),
            })
        })
        .collect()
}

pub fn categories_csv(rows: &[CategoryRow]) -> String {
    let mut out = String::from("root,members,mean_f1,std_f1\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.root, r.members, r.mean_f1, r.std_f1);
    }
    out
}

/// z-score of a two-sided 90% normal interval.
const Z90: f64 = 1.6448536269514722;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: usize,
    pub f1: f64,
    pub bootstrap_std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub best_epoch: usize,
    pub valid_f1: f64,
}

pub fn layer_rows(results: &[LayerResult]) -> Vec<LayerRow> {
    results
        .iter()
        .map(|r| LayerRow {
            layer: r.layer,
            f1: r.report.f1,
            bootstrap_std: r.report.bootstrap_std,
            ci_low: r.report.f1 - Z90 * r.report.bootstrap_std,
            ci_high: r.report.f1 + Z90 * r.report.bootstrap_std,
            best_epoch: r.best_epoch,
            valid_f1: r.valid_f1,
        })
        .collect()
}

/// Adjacent layer pairs `(k, k + 1)` where F1 rises beyond interval overlap.
pub fn layer_increases(rows: &[LayerRow]) -> Vec<(usize, usize)> {
    rows.windows(2)
        .filter(|w| w[1].ci_low > w[0].ci_high)
        .map(|w| (w[0].layer, w[1].layer))
        .collect()
}

pub fn layers_csv(rows: &[LayerRow]) -> String {
    let mut out = String::from("layer,f1,bootstrap_std,ci_low,ci_high,best_epoch,valid_f1\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.layer, r.f1, r.bootstrap_std, r.ci_low, r.ci_high, r.best_epoch, r.valid_f1
        );
    }
    out
}
