use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use protodep::model::Prediction;
use protodep_cli::config::PipelineConfig;
use protodep_cli::pipeline::{self as stage, load_graph, load_predictions};
use protodep_cli::{exit_code, EXIT_OK};

#[derive(Parser)]
#[command(name = "protodep")]
#[command(about = "Extract, verify and export security dependencies between protocol identifiers")]
#[command(version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Settings that replace the corresponding config-file values.
#[derive(Args)]
struct Overrides {
    /// TOML pipeline configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Annotation corpus (JSON lines)
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    /// Message flow graph (TSV)
    #[arg(long, global = true)]
    flow: Option<PathBuf>,

    /// Truth table for the simulated test platform
    #[arg(long, global = true)]
    oracle: Option<PathBuf>,

    /// Test-script template
    #[arg(long, global = true)]
    template: Option<PathBuf>,

    /// Reference graph compared against in the report
    #[arg(long, global = true)]
    truth_graph: Option<PathBuf>,

    #[arg(long, global = true)]
    epochs: Option<usize>,

    #[arg(long, global = true)]
    retrain_epochs: Option<usize>,

    #[arg(long, global = true)]
    learning_rate: Option<f64>,

    #[arg(long, global = true)]
    batch_size: Option<usize>,

    #[arg(long, global = true)]
    split_ratio: Option<f64>,

    /// Lower edge of the low-confidence band
    #[arg(long, global = true)]
    tau_low: Option<f64>,

    /// Upper edge of the low-confidence band
    #[arg(long, global = true)]
    tau_high: Option<f64>,

    /// Minimum probability for a graph edge
    #[arg(long, global = true)]
    tau_accept: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the checkpoint and history
    Train,
    /// Evaluate the checkpoint on the train/validation split
    Eval,
    /// Score every identifier pair of every corpus section
    Extract,
    /// Build the dependency graph and its DOT rendering
    Graph {
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Drop edges not supported by the message flow
    Filter {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Probe low-confidence edges and apply the evidence
    Feedback {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Write the formal model and a plain-text report
    Emit {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Source of the low-confidence list; skipped when absent
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run the full loop on the configured corpus
    Demo,
}

fn load_config(o: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($src:expr, $dst:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    if o.seed.is_some() {
        cfg.seed = o.seed;
    }
    set!(o.out_dir, cfg.paths.out_dir);
    set!(o.corpus, cfg.paths.corpus);
    set!(o.checkpoint, cfg.paths.checkpoint);
    set!(o.flow, cfg.paths.flow);
    set!(o.oracle, cfg.paths.oracle);
    if o.template.is_some() {
        cfg.paths.template = o.template.clone();
    }
    if o.truth_graph.is_some() {
        cfg.paths.truth_graph = o.truth_graph.clone();
    }
    set!(o.epochs, cfg.train.epochs);
    set!(o.retrain_epochs, cfg.retrain_epochs);
    set!(o.learning_rate, cfg.train.learning_rate);
    set!(o.batch_size, cfg.train.batch_size);
    set!(o.split_ratio, cfg.split_ratio);
    set!(o.tau_low, cfg.thresholds.low);
    set!(o.tau_high, cfg.thresholds.high);
    set!(o.tau_accept, cfg.thresholds.accept);
    cfg.validate()?;
    Ok(cfg)
}

fn input(flag: &Option<PathBuf>, cfg: &PipelineConfig, default: &str) -> PathBuf {
    flag.clone().unwrap_or_else(|| cfg.out(default))
}

fn optional_predictions(path: &Path) -> Result<Vec<Prediction>> {
    if path.exists() {
        load_predictions(path)
    } else {
        Ok(Vec::new())
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.overrides).context("stage config")?;
    let out = &cfg.paths.out_dir;
    match &cli.command {
        Command::Train => {
            let pairs = stage::load_pairs(&cfg).context("stage train")?;
            let t = stage::run_train(&cfg, &pairs).context("stage train")?;
            let last = t.history.records.last();
            println!(
                "trained {} epochs, kept epoch {}, train accuracy {:.4}",
                t.history.records.len(),
                t.history.best_epoch,
                last.map_or(0.0, |r| r.train_accuracy)
            );
            println!("checkpoint {}", cfg.paths.checkpoint.display());
        }
        Command::Eval => {
            let model = stage::load_model(&cfg).context("stage eval")?;
            let pairs = stage::load_pairs(&cfg).context("stage eval")?;
            let r = stage::run_eval(&cfg, &model, &pairs).context("stage eval")?;
            println!("train accuracy {:.4}", r.train.micro.accuracy);
            if let Some(v) = &r.valid {
                println!("valid accuracy {:.4}", v.micro.accuracy);
            }
        }
        Command::Extract => {
            let model = stage::load_model(&cfg).context("stage extract")?;
            let pairs = stage::load_pairs(&cfg).context("stage extract")?;
            let preds = stage::run_extract(&cfg, &model, &pairs, "predictions.jsonl").context("stage extract")?;
            println!("{} predictions in {}", preds.len(), out.display());
        }
        Command::Graph { predictions } => {
            let preds = load_predictions(&input(predictions, &cfg, "predictions.jsonl")).context("stage graph")?;
            let g = stage::run_graph(&cfg, &preds).context("stage graph")?;
            println!("{} nodes, {} edges", g.node_count(), g.edge_count());
        }
        Command::Filter { graph } => {
            let g = load_graph(&input(graph, &cfg, "graph.txt")).context("stage filter")?;
            let flow = stage::load_flow(&cfg).context("stage filter")?;
            let f = stage::run_filter(&cfg, &g, &flow).context("stage filter")?;
            println!("kept {} edges, removed {}", f.graph.edge_count(), f.removed.len());
        }
        Command::Feedback { graph, predictions } => {
            let path = input(graph, &cfg, "graph.txt");
            let mut g = load_graph(&path).context("stage feedback")?;
            let preds = load_predictions(&input(predictions, &cfg, "predictions.jsonl")).context("stage feedback")?;
            let r = stage::run_feedback(&cfg, &mut g, &preds).context("stage feedback")?;
            println!(
                "{} probes: {} confirmed, {} refuted",
                r.probes.len(),
                r.summary.confirmed,
                r.summary.refuted
            );
        }
        Command::Emit { graph, predictions } => {
            let g = load_graph(&input(graph, &cfg, "filtered_graph.txt")).context("stage emit")?;
            let flow = stage::load_flow(&cfg).context("stage emit")?;
            let preds = optional_predictions(&input(predictions, &cfg, "predictions.jsonl")).context("stage emit")?;
            let truth = match &cfg.paths.truth_graph {
                Some(p) => Some(load_graph(p).context("stage emit")?),
                None => None,
            };
            stage::run_emit(&cfg, &g, &flow, &preds, truth.as_ref()).context("stage emit")?;
            println!("formal model {}", cfg.out("formal_model.txt").display());
        }
        Command::Demo => {
            let s = stage::run_demo(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
