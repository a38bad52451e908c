use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use protodep::corpus::{
    format_annotations, generate_pairs, load_annotations, section_identifiers, split, AnnotatedSample,
};
use protodep::depgraph::{
    build_graph, graph_diff, intent_filter, merge_graphs, to_dot, DependencyEdge, DependencyGraph, EdgeProvenance,
    FilterOutcome, FlowGraph,
};
use protodep::feedback::{
    evidence_samples, feedback_round, select_low_confidence, with_evidence, FeedbackRound, GroundTruthStore,
    ScriptTemplate, TruthTable,
};
use protodep::formalgen::{emit_formal_model, emit_report};
use protodep::model::{format_predictions, load_checkpoint, parse_predictions, save_checkpoint, CalModel, Prediction};
use protodep::training::{evaluate, sample_vocab, train, train_from, History, Metrics};

use crate::config::{require, ConfigError, PipelineConfig};

pub type Model = CalModel<f64>;

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn save_model(path: &Path, model: &Model) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(save_checkpoint(path, model)?)
}

fn read(path: &Path, what: &str) -> Result<String> {
    require(path, what)?;
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Labeled samples completed with generated negatives for every
/// unlabeled ordered pair of each section.
pub fn load_pairs(cfg: &PipelineConfig) -> Result<Vec<AnnotatedSample>> {
    require(&cfg.paths.corpus, "corpus")?;
    let labeled = load_annotations(&cfg.paths.corpus)?;
    Ok(generate_pairs(&section_identifiers(&labeled), &labeled))
}

pub fn split_pairs(cfg: &PipelineConfig, pairs: &[AnnotatedSample]) -> (Vec<AnnotatedSample>, Vec<AnnotatedSample>) {
    split(pairs, cfg.split_ratio, cfg.seed.unwrap_or_default())
}

pub fn load_model(cfg: &PipelineConfig) -> Result<Model> {
    require(&cfg.paths.checkpoint, "checkpoint")?;
    Ok(load_checkpoint(&cfg.paths.checkpoint)?)
}

pub fn load_flow(cfg: &PipelineConfig) -> Result<FlowGraph> {
    require(&cfg.paths.flow, "flow graph")?;
    Ok(FlowGraph::load(&cfg.paths.flow)?)
}

pub fn load_graph(path: &Path) -> Result<DependencyGraph> {
    Ok(DependencyGraph::from_text(&read(path, "graph")?)?)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    Ok(parse_predictions(&read(path, "predictions")?)?)
}

pub fn load_template(cfg: &PipelineConfig) -> Result<ScriptTemplate> {
    match &cfg.paths.template {
        Some(p) => Ok(ScriptTemplate::new(&read(p, "script template")?)?),
        None => Ok(ScriptTemplate::default()),
    }
}

pub fn load_oracle(cfg: &PipelineConfig) -> Result<TruthTable> {
    require(&cfg.paths.oracle, "oracle table")?;
    Ok(TruthTable::load(&cfg.paths.oracle)?)
}

/// Expert graph holding every positive label of `samples`.
pub fn label_graph(samples: &[AnnotatedSample]) -> Result<DependencyGraph> {
    let mut g = DependencyGraph::new();
    for s in samples {
        for k in s.labels.kinds() {
            g.insert(DependencyEdge::new(
                &s.source,
                &s.destination,
                k,
                1.0,
                EdgeProvenance::Expert,
            ))?;
        }
    }
    Ok(g)
}

pub struct Trained {
    pub model: Model,
    pub history: History,
}

/// Trains from scratch and writes the checkpoint and history.
pub fn run_train(cfg: &PipelineConfig, pairs: &[AnnotatedSample]) -> Result<Trained> {
    let seed = cfg
        .seed
        .ok_or_else(|| ConfigError("seed is required for training".into()))?;
    let (train_set, valid_set) = split_pairs(cfg, pairs);
    let vocab = sample_vocab(pairs, 1)?;
    let mut tcfg = cfg.train.clone();
    tcfg.seed = seed;
    let out = train::<f64>(&train_set, &valid_set, vocab, cfg.model.clone(), &tcfg)?;
    save_model(&cfg.paths.checkpoint, &out.model)?;
    write(&cfg.out("history.jsonl"), &out.history.to_jsonl())?;
    Ok(Trained {
        model: out.model,
        history: out.history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub train: Metrics,
    pub valid: Option<Metrics>,
}

pub fn run_eval(cfg: &PipelineConfig, model: &Model, pairs: &[AnnotatedSample]) -> Result<EvalReport> {
    let (train_set, valid_set) = split_pairs(cfg, pairs);
    let thr = cfg.train.eval_threshold;
    let report = EvalReport {
        train: evaluate(model, &train_set, thr)?,
        valid: if valid_set.is_empty() {
            None
        } else {
            Some(evaluate(model, &valid_set, thr)?)
        },
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    write(&cfg.out("metrics.json"), &json)?;
    Ok(report)
}

/// Scores every ordered identifier pair of every corpus section.
pub fn extract(cfg: &PipelineConfig, model: &Model, pairs: &[AnnotatedSample]) -> Result<Vec<Prediction>> {
    let band = cfg.thresholds.band();
    let mut out = Vec::new();
    for sec in section_identifiers(pairs) {
        let preds = model
            .predict_all_pairs(&sec.context, &sec.identifiers, &band)
            .with_context(|| format!("section {}/{}", sec.doc_id, sec.section_id))?;
        out.extend(preds.into_iter().map(|p| p.with_section(&sec.doc_id, &sec.section_id)));
    }
    Ok(out)
}

pub fn run_extract(
    cfg: &PipelineConfig,
    model: &Model,
    pairs: &[AnnotatedSample],
    name: &str,
) -> Result<Vec<Prediction>> {
    let preds = extract(cfg, model, pairs)?;
    write(&cfg.out(name), &format_predictions(&preds))?;
    Ok(preds)
}

pub fn run_graph(cfg: &PipelineConfig, preds: &[Prediction]) -> Result<DependencyGraph> {
    let g = build_graph(preds, cfg.thresholds.accept)?;
    write(&cfg.out("graph.txt"), &g.to_text())?;
    write(&cfg.out("graph.dot"), &to_dot(&g))?;
    Ok(g)
}

pub fn run_filter(cfg: &PipelineConfig, g: &DependencyGraph, flow: &FlowGraph) -> Result<FilterOutcome> {
    let outcome = intent_filter(g, flow);
    write(&cfg.out("filtered_graph.txt"), &outcome.graph.to_text())?;
    write(&cfg.out("filtered_graph.dot"), &to_dot(&outcome.graph))?;
    write(&cfg.out("removed.tsv"), &outcome.report())?;
    Ok(outcome)
}

fn script_name(index: usize, probe_id: &str) -> String {
    let clean: String = probe_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{:03}_{clean}.probe", index + 1)
}

/// One evidence round over `graph`. Scripts replace any previous set; the
/// store at `out/ground_truth.tsv` is appended to.
pub fn run_feedback(cfg: &PipelineConfig, graph: &mut DependencyGraph, preds: &[Prediction]) -> Result<FeedbackRound> {
    let template = load_template(cfg)?;
    let table = load_oracle(cfg)?;
    let store_path = cfg.out("ground_truth.tsv");
    let mut store = GroundTruthStore::open(&store_path)?;
    let round = feedback_round(graph, &mut store, preds, &cfg.thresholds.band(), &template, &table)?;

    let dir = cfg.out("scripts");
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("cannot clear {}", dir.display()))?;
    }
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (i, (id, script)) in round.scripts.iter().enumerate() {
        write(&dir.join(script_name(i, id)), script)?;
    }
    write(&cfg.out("evidence.log"), &round.log)?;
    write(&cfg.out("feedback_graph.txt"), &graph.to_text())?;
    store.flush(&store_path)?;
    Ok(round)
}

/// Formal model and report. The low-confidence list comes from `preds`.
pub fn run_emit(
    cfg: &PipelineConfig,
    g: &DependencyGraph,
    flow: &FlowGraph,
    preds: &[Prediction],
    truth: Option<&DependencyGraph>,
) -> Result<String> {
    let formal = emit_formal_model(g, flow)?;
    let diff = truth.map(|t| graph_diff(g, t));
    let low = select_low_confidence(preds, &cfg.thresholds.band());
    write(&cfg.out("formal_model.txt"), &formal)?;
    write(&cfg.out("report.txt"), &emit_report(g, diff.as_ref(), &low))?;
    Ok(formal)
}

/// What a demo run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoSummary {
    pub pairs: usize,
    pub epochs: usize,
    pub valid_accuracy: Option<f64>,
    pub graph_edges: usize,
    pub probes: usize,
    pub confirmed: Vec<String>,
    pub refuted: Vec<String>,
    pub final_edges: usize,
    pub filtered_edges: usize,
    pub removed: usize,
    pub artifacts: Vec<PathBuf>,
}

pub const DEMO_ARTIFACTS: &[&str] = &[
    "pairs.jsonl",
    "model.ckpt",
    "history.jsonl",
    "metrics.json",
    "predictions.jsonl",
    "graph.txt",
    "graph.dot",
    "evidence.log",
    "ground_truth.tsv",
    "feedback_graph.txt",
    "model_retrained.ckpt",
    "history_retrained.jsonl",
    "predictions_retrained.jsonl",
    "final_graph.txt",
    "filtered_graph.txt",
    "filtered_graph.dot",
    "removed.tsv",
    "formal_model.txt",
    "report.txt",
];

/// Runs the whole loop into `out_dir`: train, evaluate, extract, build the
/// graph, one evidence round, retrain on the evidence, rebuild, filter by
/// the flow graph, and emit the formal model. The checkpoint path is
/// forced into `out_dir` and the evidence store starts empty.
pub fn run_demo(cfg: &PipelineConfig) -> Result<DemoSummary> {
    let mut cfg = cfg.clone();
    cfg.paths.checkpoint = cfg.out("model.ckpt");
    let flow = load_flow(&cfg).context("stage demo/load")?;
    load_oracle(&cfg).context("stage demo/load")?;
    load_template(&cfg).context("stage demo/load")?;
    fs::create_dir_all(&cfg.paths.out_dir).with_context(|| format!("cannot create {}", cfg.paths.out_dir.display()))?;
    let store_path = cfg.out("ground_truth.tsv");
    if store_path.exists() {
        fs::remove_file(&store_path).with_context(|| format!("cannot reset {}", store_path.display()))?;
    }

    let pairs = load_pairs(&cfg).context("stage demo/pairs")?;
    write(&cfg.out("pairs.jsonl"), &format_annotations(&pairs))?;
    let trained = run_train(&cfg, &pairs).context("stage demo/train")?;
    let metrics = run_eval(&cfg, &trained.model, &pairs).context("stage demo/eval")?;
    let preds = run_extract(&cfg, &trained.model, &pairs, "predictions.jsonl").context("stage demo/extract")?;
    let graph = run_graph(&cfg, &preds).context("stage demo/graph")?;

    let mut fb_graph = graph.clone();
    let round = run_feedback(&cfg, &mut fb_graph, &preds).context("stage demo/feedback")?;

    let (train_set, valid_set) = split_pairs(&cfg, &pairs);
    let mut retrain_set = with_evidence(&train_set, &round.records);
    retrain_set.extend(evidence_samples(&valid_set, &round.records));
    let mut rcfg = cfg.train.clone();
    rcfg.seed = cfg.seed.unwrap_or_default();
    rcfg.epochs = cfg.retrain_epochs.max(1);
    let retrained = train_from(trained.model.clone(), &retrain_set, &valid_set, &rcfg).context("stage demo/retrain")?;
    save_model(&cfg.out("model_retrained.ckpt"), &retrained.model)?;
    write(&cfg.out("history_retrained.jsonl"), &retrained.history.to_jsonl())?;
    let new_preds =
        run_extract(&cfg, &retrained.model, &pairs, "predictions_retrained.jsonl").context("stage demo/extract")?;

    let rebuilt = build_graph(&new_preds, cfg.thresholds.accept).context("stage demo/graph")?;
    let final_graph = merge_graphs(&rebuilt, &fb_graph);
    write(&cfg.out("final_graph.txt"), &final_graph.to_text())?;
    let filtered = run_filter(&cfg, &final_graph, &flow).context("stage demo/filter")?;
    let truth = label_graph(&pairs)?;
    run_emit(&cfg, &filtered.graph, &flow, &new_preds, Some(&truth)).context("stage demo/emit")?;

    let verdicts = |confirmed: bool| {
        round
            .records
            .iter()
            .filter(|r| (r.verdict == protodep::feedback::Verdict::Confirmed) == confirmed)
            .map(|r| r.key().to_string())
            .collect()
    };
    Ok(DemoSummary {
        pairs: pairs.len(),
        epochs: trained.history.records.len(),
        valid_accuracy: metrics.valid.map(|m| m.micro.accuracy),
        graph_edges: graph.edge_count(),
        probes: round.probes.len(),
        confirmed: verdicts(true),
        refuted: verdicts(false),
        final_edges: final_graph.edge_count(),
        filtered_edges: filtered.graph.edge_count(),
        removed: filtered.removed.len(),
        artifacts: DEMO_ARTIFACTS.iter().map(|a| cfg.out(a)).collect(),
    })
}
