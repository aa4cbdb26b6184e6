use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use taxoprobe_core::analysis::{
    bin_by_factor, categories_csv, category_f1, concept_f1, concept_factors, layer_increases, layer_rows,
    layers_csv, read_frequencies, BinSpec, BootstrapConfig, Factor,
};
use taxoprobe_core::embeddings::{generate_planted, generate_random};
use taxoprobe_core::evaluation::{compare_trees, LabeledTree};
use taxoprobe_core::pipeline::{run_e2e, E2eConfig};
use taxoprobe_core::probe::{evaluate, layer_sweep, train, LayerResult};
use taxoprobe_core::reconstruction::{distance, read_tree_tsv, score_all_pairs, solve_msa};
use taxoprobe_core::sampler::{
    build_examples, examples_in, gloss_keys, make_splits, read_examples, read_glosses, sample_triplets,
    write_examples, OccurrenceIndex, SampleConfig,
};
use taxoprobe_core::taxonomy::{read_edges, read_synsets};
use taxoprobe_core::{
    EmbeddingStore, EvalReport, LayerSelector, Metric, PlantedConfig, ProbeConfig, ProbeModel, ScoreMatrix,
    Split, TaxonomyGraph,
};

use crate::run::Run;
use crate::{
    Command, E2eArgs, EmbArgs, EmbKind, EvalArgs, EvalTedArgs, ImportArgs, ProbeFlags, ReconstructArgs,
    ReportCategoriesArgs, ReportFactorsArgs, ReportLayersArgs, SampleArgs, ScoreArgs, TrainArgs,
};

pub fn dispatch(command: Command, run: &mut Run) -> Result<()> {
    match command {
        Command::Import(a) => import(a, run),
        Command::Sample(a) => sample(a, run),
        Command::Emb(a) => emb(a, run),
        Command::Train(a) => train_cmd(a, run),
        Command::Eval(a) => eval(a, run),
        Command::Score(a) => score(a, run),
        Command::Reconstruct(a) => reconstruct(a, run),
        Command::EvalTed(a) => eval_ted(a, run),
        Command::ReportFactors(a) => report_factors(a, run),
        Command::ReportCategories(a) => report_categories(a, run),
        Command::ReportLayers(a) => report_layers(a, run),
        Command::E2eSynthetic(a) => e2e(a, run),
    }
}

fn load_taxonomy(dir: &Path, run: &mut Run) -> Result<TaxonomyGraph> {
    run.input(dir)?;
    for f in ["synsets.tsv", "edges.tsv"] {
        run.input(&dir.join(f))?;
    }
    Ok(TaxonomyGraph::load_dir(dir)?)
}

fn load_store(path: &Path, run: &mut Run) -> Result<EmbeddingStore> {
    run.input(path)?;
    EmbeddingStore::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_lines(path: &Path, run: &mut Run) -> Result<Vec<String>> {
    run.input(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_split(s: &str) -> Result<Split> {
    s.parse().map_err(|_| anyhow::anyhow!("unknown split `{s}` (train, valid or test)"))
}

fn parse_metric(s: &str) -> Result<Metric> {
    Ok(s.parse()?)
}

/// Config file first, then explicit flags.
fn probe_config(flags: &ProbeFlags, seed: u64, run: &mut Run) -> Result<ProbeConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            run.input(path)?;
            let text = fs::read_to_string(path)?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ProbeConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = flags.$field { cfg.$field = v; } )* };
    }
    set!(projection_dim, hidden_units, dropout_rate, l2_lambda, learning_rate, batch_size, max_epochs, patience);
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn import(a: ImportArgs, run: &mut Run) -> Result<()> {
    run.input(&a.synsets)?;
    run.input(&a.edges)?;
    run.set_config(json!({ "virtual_root": a.virtual_root }), None)?;
    let mut g = TaxonomyGraph::new(read_synsets(&a.synsets)?, &read_edges(&a.edges)?)?;
    let injected = match &a.virtual_root {
        Some(name) => g.inject_virtual_root(name)?,
        None => false,
    };
    let roots = g.roots().len();
    if roots > 1 {
        run.log.info("warning", json!({ "message": format!("{roots} roots; pass --virtual-root NAME to unify them") }));
    }
    run.ensure_dir(&a.out)?;
    g.write_dir(&a.out)?;
    for f in ["synsets.tsv", "edges.tsv"] {
        run.track(&a.out.join(f));
    }
    run.finish(Some(&a.out))?;
    run.log.info(
        "imported",
        json!({ "synsets": g.len(), "edges": g.edge_count(), "roots": roots, "virtual_root": injected }),
    );
    Ok(())
}

fn sample(a: SampleArgs, run: &mut Run) -> Result<()> {
    let g = load_taxonomy(&a.taxonomy, run)?;
    run.input(&a.glosses)?;
    let glosses = read_glosses(&a.glosses)?;
    let cfg = SampleConfig {
        seed: a.seed,
        triplets_per_synset: a.triplets_per_synset,
        max_triplets: a.max_triplets,
    };
    run.set_config(&cfg, Some(a.seed))?;
    let splits = make_splits(&g, a.seed)?;
    let occ = OccurrenceIndex::new(&g, &glosses)?;
    let (triplets, report) = sample_triplets(&g, &splits, &occ, &cfg)?;
    let examples = build_examples(&g, &triplets, &occ, a.seed)?;
    run.prepare(&a.out)?;
    write_examples(&a.out, &examples)?;
    run.track(&a.out);
    if let Some(p) = &a.splits_out {
        run.prepare(p)?;
        splits.write_tsv(&g, p)?;
        run.track(p);
    }
    if let Some(p) = &a.keys_out {
        let mut text = gloss_keys(&glosses).join("\n");
        text.push('\n');
        run.write(p, text.as_bytes())?;
    }
    run.finish(None)?;
    let count = |s: Split| examples.iter().filter(|e| e.split == s).count();
    run.log.info(
        "sampled",
        json!({
            "triplets": triplets.len(),
            "train_examples": count(Split::Train),
            "valid_examples": count(Split::Valid),
            "test_examples": count(Split::Test),
            "report": report,
        }),
    );
    Ok(())
}

fn emb(a: EmbArgs, run: &mut Run) -> Result<()> {
    let keys = read_lines(&a.keys, run)?;
    let store = match a.kind {
        EmbKind::Random => {
            run.set_config(json!({ "kind": "random", "dim": a.dim }), Some(a.seed))?;
            generate_random(&keys, a.dim, a.seed)?
        }
        EmbKind::Planted => {
            let g = load_taxonomy(a.taxonomy.as_deref().expect("required by clap"), run)?;
            let cfg = PlantedConfig {
                dim: a.dim,
                sigma: a.sigma,
                layers: a.layers,
                layer_growth: a.layer_growth,
                seed: a.seed,
            };
            run.set_config(json!({ "kind": "planted", "planted": cfg }), Some(a.seed))?;
            generate_planted(&g, &keys, &cfg)?
        }
    };
    run.write(&a.out, &store.to_bytes()?)?;
    run.finish(None)?;
    run.log.info(
        "embeddings",
        json!({ "records": store.len(), "layers": store.layer_count(), "dim": store.dim_per_layer() }),
    );
    Ok(())
}

fn train_cmd(a: TrainArgs, run: &mut Run) -> Result<()> {
    let store = load_store(&a.emb, run)?;
    run.input(&a.examples)?;
    let examples = read_examples(&a.examples)?;
    let sel: LayerSelector = a.layer.parse()?;
    let cfg = probe_config(&a.probe, a.seed, run)?;
    run.set_config(json!({ "layer": sel.to_string(), "probe": cfg }), Some(a.seed))?;
    let before = store.fingerprint();
    let outcome = train(&cfg, &store, sel, &examples)?;
    if store.fingerprint() != before {
        bail!("embedding store changed during training");
    }
    run.write(&a.out, &outcome.model.to_bytes())?;
    if let Some(p) = &a.history {
        run.write_json(p, &outcome.history)?;
    }
    run.finish(None)?;
    run.log.info(
        "trained",
        json!({ "best_epoch": outcome.best_epoch, "valid_f1": outcome.best_valid_f1, "epochs": outcome.history.len() }),
    );
    Ok(())
}

fn eval(a: EvalArgs, run: &mut Run) -> Result<()> {
    run.input(&a.model)?;
    let model = ProbeModel::read(&a.model)?;
    let store = load_store(&a.emb, run)?;
    run.input(&a.examples)?;
    let split = parse_split(&a.split)?;
    let examples = examples_in(&read_examples(&a.examples)?, split);
    run.set_config(json!({ "split": split }), Some(model.config.seed))?;
    let report = evaluate(&model, &store, model.trained_on.selector, &examples)?;
    if let Some(p) = &a.json {
        run.write_json(p, &report)?;
        run.finish(None)?;
    }
    println!(
        "f1 {:.4} accuracy {:.4} precision {:.4} recall {:.4} bootstrap_std {:.4} n {}",
        report.f1,
        report.accuracy,
        report.precision,
        report.recall,
        report.bootstrap_std,
        report.predictions.len()
    );
    Ok(())
}

fn score(a: ScoreArgs, run: &mut Run) -> Result<()> {
    run.input(&a.model)?;
    let model = ProbeModel::read(&a.model)?;
    let store = load_store(&a.emb, run)?;
    let nodes = read_lines(&a.nodes, run)?;
    run.set_config(json!({ "nodes": nodes.len() }), Some(model.config.seed))?;
    let s = score_all_pairs(&model, &store, model.trained_on.selector, &nodes)?;
    run.write(&a.out, &s.to_bytes()?)?;
    run.finish(None)?;
    run.log.info("scored", json!({ "nodes": s.len() }));
    Ok(())
}

#[derive(Serialize)]
struct ReconstructSummary {
    metric: Metric,
    threshold: f64,
    nodes: usize,
    admitted_edges: usize,
    root: String,
    objective_cost: f64,
    root_score: f64,
}

fn reconstruct(a: ReconstructArgs, run: &mut Run) -> Result<()> {
    run.input(&a.scores)?;
    let s = ScoreMatrix::read(&a.scores)?;
    let metric = parse_metric(&a.metric)?;
    run.set_config(json!({ "metric": metric, "threshold": a.threshold }), None)?;
    let d = distance(&s, metric, a.threshold)?;
    let sol = solve_msa(&d, &s)?;
    run.write(&a.out_tree, sol.to_tsv().as_bytes())?;
    if let Some(p) = &a.out_dot {
        run.write(p, sol.to_dot().as_bytes())?;
    }
    let summary = ReconstructSummary {
        metric,
        threshold: a.threshold,
        nodes: sol.nodes.len(),
        admitted_edges: d.admitted_count(),
        root: sol.root.clone(),
        objective_cost: sol.objective_cost,
        root_score: sol.root_score,
    };
    if let Some(p) = &a.json {
        run.write_json(p, &summary)?;
    }
    run.finish(None)?;
    run.log.info("reconstructed", serde_json::to_value(&summary)?);
    Ok(())
}

fn eval_ted(a: EvalTedArgs, run: &mut Run) -> Result<()> {
    run.input(&a.pred)?;
    let edges = read_tree_tsv(&a.pred)?;
    let g = load_taxonomy(&a.truth, run)?;
    let nodes = match &a.nodes {
        Some(p) => read_lines(p, run)?,
        None => {
            let mut n: Vec<String> = edges.iter().flat_map(|(p, c)| [p.clone(), c.clone()]).collect();
            n.sort();
            n.dedup();
            n
        }
    };
    run.set_config(json!({ "nodes": nodes.len() }), None)?;
    let pred = LabeledTree::from_edges(&nodes, &edges)?;
    let truth = LabeledTree::induced(&g, &nodes)?;
    let report = compare_trees(&pred, &truth)?;
    if let Some(p) = &a.json {
        run.write_json(p, &report)?;
        run.finish(None)?;
    }
    println!(
        "ted {} parent_rate {:.4} root_correct {} ancestor_precision {:.4} ancestor_recall {:.4}",
        report.ted.distance, report.parent_rate, report.root_correct, report.ancestor_precision, report.ancestor_recall
    );
    Ok(())
}

fn load_concept_f1(path: &Path, run: &mut Run) -> Result<BTreeMap<String, f64>> {
    run.input(path)?;
    let report: EvalReport = serde_json::from_slice(&fs::read(path)?)
        .with_context(|| format!("{} is not an eval report", path.display()))?;
    Ok(concept_f1(&report.predictions))
}

fn report_factors(a: ReportFactorsArgs, run: &mut Run) -> Result<()> {
    let g = load_taxonomy(&a.common.taxonomy, run)?;
    let f1 = load_concept_f1(&a.common.predictions, run)?;
    let freq = match &a.frequencies {
        Some(p) => {
            run.input(p)?;
            Some(read_frequencies(p)?)
        }
        None => None,
    };
    let factors: Vec<Factor> = if a.factor == "all" {
        Factor::ALL
            .iter()
            .copied()
            .filter(|f| freq.is_some() || *f != Factor::Frequency)
            .collect()
    } else {
        vec![a.factor.parse()?]
    };
    let spec = match &a.edges {
        Some(e) => BinSpec::Edges(e.clone()),
        None => BinSpec::Quantiles(a.bins),
    };
    let boot = BootstrapConfig {
        resamples: a.resamples,
        seed: a.seed,
        min_samples: a.min_samples,
    };
    run.set_config(
        json!({ "factors": factors.iter().map(|f| f.as_str()).collect::<Vec<_>>(), "bins": spec, "resamples": a.resamples, "min_samples": a.min_samples }),
        Some(a.seed),
    )?;
    let values = concept_factors(&g, freq.as_ref())?;
    let curves = factors
        .iter()
        .map(|&f| bin_by_factor(&f1, &values, f, &spec, boot))
        .collect::<taxoprobe_core::Result<Vec<_>>>()?;
    run.write_json(&a.common.out, &curves)?;
    if let Some(p) = &a.common.csv {
        let mut csv = String::new();
        for (i, c) in curves.iter().enumerate() {
            let body = c.to_csv();
            csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
        }
        run.write(p, csv.as_bytes())?;
    }
    run.finish(None)?;
    for c in &curves {
        run.log.info(
            "factor",
            json!({ "factor": c.factor, "bins": c.bins.len(), "excluded": c.excluded.len(), "concepts": c.total }),
        );
    }
    Ok(())
}

fn report_categories(a: ReportCategoriesArgs, run: &mut Run) -> Result<()> {
    let g = load_taxonomy(&a.common.taxonomy, run)?;
    let f1 = load_concept_f1(&a.common.predictions, run)?;
    run.set_config(json!({ "roots": a.roots }), None)?;
    let rows = category_f1(&f1, &g, &a.roots)?;
    run.write_json(&a.common.out, &rows)?;
    if let Some(p) = &a.common.csv {
        run.write(p, categories_csv(&rows).as_bytes())?;
    }
    run.finish(None)?;
    for r in &rows {
        println!("{}\t{}\t{:.4}\t{:.4}", r.root, r.members, r.mean_f1, r.std_f1);
    }
    Ok(())
}

fn report_layers(a: ReportLayersArgs, run: &mut Run) -> Result<()> {
    let results: Vec<LayerResult> = match &a.sweep {
        Some(p) => {
            run.input(p)?;
            run.set_config(json!({ "sweep": p.display().to_string() }), None)?;
            serde_json::from_slice(&fs::read(p)?).with_context(|| format!("{} is not a layer sweep", p.display()))?
        }
        None => {
            let (Some(emb), Some(ex), Some(seed)) = (&a.emb, &a.examples, a.seed) else {
                bail!("pass --sweep FILE, or --emb, --examples and --seed");
            };
            let store = load_store(emb, run)?;
            run.input(ex)?;
            let examples = read_examples(ex)?;
            let split = parse_split(&a.split)?;
            let cfg = probe_config(&a.probe, seed, run)?;
            run.set_config(json!({ "split": split, "probe": cfg }), Some(seed))?;
            let results = layer_sweep(&cfg, &store, &examples, split)?;
            if let Some(p) = &a.sweep_out {
                run.write_json(p, &results)?;
            }
            results
        }
    };
    let rows = layer_rows(&results);
    let increases = layer_increases(&rows);
    run.write_json(&a.out, &json!({ "rows": rows, "increases": increases }))?;
    if let Some(p) = &a.csv {
        run.write(p, layers_csv(&rows).as_bytes())?;
    }
    run.finish(None)?;
    for r in &rows {
        println!("layer {} f1 {:.4} ci [{:.4}, {:.4}]", r.layer, r.f1, r.ci_low, r.ci_high);
    }
    if !increases.is_empty() {
        run.log.info("increases", json!({ "pairs": increases }));
    }
    Ok(())
}

fn e2e(a: E2eArgs, run: &mut Run) -> Result<()> {
    let mut cfg = E2eConfig::new(a.nodes, a.sigma, a.seed);
    cfg.metric = parse_metric(&a.metric)?;
    cfg.threshold = a.threshold;
    cfg.dim = a.dim;
    cfg.probe = probe_config(&a.probe, a.seed, run)?;
    run.set_config(&cfg, Some(a.seed))?;
    let report = run_e2e(&cfg)?;
    if let Some(p) = &a.json {
        run.write_json(p, &report)?;
    }
    if let (Some(p), Some(r)) = (&a.out_tree, &report.reconstruction) {
        run.write(p, r.solution.to_tsv().as_bytes())?;
    }
    run.finish(None)?;
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    run.log.info(
        "e2e",
        json!({
            "dim": report.dim,
            "train_examples": report.train_examples,
            "best_epoch": report.best_epoch,
            "valid_f1": report.valid_f1,
            "test_f1": report.test_f1,
        }),
    );
    match (&report.evaluation, &report.reconstruction_error) {
        (Some(ev), _) => println!(
            "ted {} valid_f1 {:.4} test_f1 {} parent_rate {:.4}",
            ev.ted.distance,
            report.valid_f1,
            opt(report.test_f1),
            ev.parent_rate
        ),
        (None, err) => {
            println!("ted n/a valid_f1 {:.4} test_f1 {}", report.valid_f1, opt(report.test_f1));
            bail!("reconstruction failed: {}", err.as_deref().unwrap_or("unknown"));
        }
    }
    Ok(())
}
