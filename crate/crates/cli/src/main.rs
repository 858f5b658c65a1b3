//! `tdg`: graph extraction, corpus generation, training, prediction,
//! evaluation and ablation runs from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 input error, 3 internal error.
//! `TDG_THREADS` sets the worker count for per-project work.

mod corpus;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tdg_core::eval::{
    evaluate_baseline, evaluate_model, format_table, generate_corpus, most_frequent_type,
    run_ablation, AblationVariant, EvalReport, SyntheticSpec,
};
use tdg_core::frontend::SourceProject;
use tdg_core::gnn::{Ablation, ModelConfig, ParameterStore};
use tdg_core::predictor::{declared_nodes, predict, CandidateSet};
use tdg_core::tensor::{Checkpoint, WeightDecay};
use tdg_core::trainer::{init_store, train_from, LogRow, TrainConfig, TrainLog, EVAL_RUN_SEED};

const MANIFEST_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "tdg",
    version,
    about = "Type inference with graph neural networks over type dependency graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract the type dependency graph of a source directory.
    ExtractGraph {
        src: PathBuf,
        /// Write graph JSON here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus.
    GenCorpus {
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        train: usize,
        #[arg(long, default_value_t = 10)]
        val: usize,
        #[arg(long, default_value_t = 10)]
        test: usize,
        #[arg(long, default_value_t = 0.7)]
        name_correlation: f64,
    },
    /// Train a model on a corpus directory.
    Train {
        corpus: PathBuf,
        /// Output directory for checkpoint, log and manifest.
        #[arg(short, long)]
        out: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict types for every declared variable of a source directory.
    Predict {
        checkpoint: PathBuf,
        src: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        /// Restrict candidates to library types.
        #[arg(long)]
        lib_only: bool,
    },
    /// Evaluate a checkpoint and the name baseline on a corpus split.
    Evaluate {
        checkpoint: PathBuf,
        corpus: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        lib_only: bool,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train and evaluate several variants of one configuration.
    Ablation {
        corpus: PathBuf,
        /// Comma-separated variants: full, k=N, no-contextual, no-logical,
        /// no-npair-attention, simple-aggregation.
        #[arg(long, default_value = "full,k=0,k=1,k=2,no-contextual")]
        variants: String,
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr_start: Option<f64>,
    #[arg(long)]
    lr_end: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Decay weights directly instead of through the gradient.
    #[arg(long)]
    decoupled_decay: bool,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Zero wall-clock fields so repeated runs are byte-identical.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    ablation: Option<String>,
    /// Do not read or write per-project graph caches.
    #[arg(long)]
    no_cache: bool,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig, Failure> {
        let mut c = TrainConfig::default();
        let mut m = ModelConfig::default();
        if let Some(k) = self.k {
            m.k = k;
        }
        if let Some(d) = self.dim {
            m.dim = d;
            m.hidden = d;
        }
        if let Some(a) = &self.ablation {
            m.ablation = Ablation::parse(a).ok_or_else(|| {
                Failure::Usage(anyhow!(
                    "unknown ablation `{a}`; expected one of {}",
                    Ablation::NAMES.join(", ")
                ))
            })?;
        }
        c.model = m;
        if let Some(x) = self.lr_start {
            c.lr_start = x;
        }
        if let Some(x) = self.lr_end {
            c.lr_end = x;
        }
        if let Some(x) = self.weight_decay {
            c.weight_decay = x;
        }
        if self.decoupled_decay {
            c.decay_mode = WeightDecay::Decoupled;
        }
        if let Some(x) = self.max_epochs {
            c.max_epochs = x;
        }
        if let Some(x) = self.patience {
            c.patience = x;
        }
        c.batch_cap = self.batch_cap;
        c.seed = self.seed;
        c.deterministic = self.deterministic;
        c.validate().map_err(|e| Failure::Usage(e.into()))?;
        Ok(c)
    }
}

enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = std::env::var("TDG_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, e) = match f {
                Failure::Usage(e) => (1, e),
                Failure::Input(e) => (2, e),
                Failure::Internal(e) => (3, e),
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::ExtractGraph { src, out } => extract_graph(&src, out.as_deref()),
        Cmd::GenCorpus {
            out,
            seed,
            train,
            val,
            test,
            name_correlation,
        } => {
            if !(0.0..=1.0).contains(&name_correlation) {
                return Err(Failure::Usage(anyhow!(
                    "--name-correlation must be in [0, 1]"
                )));
            }
            let spec = SyntheticSpec {
                train,
                val,
                test,
                name_correlation,
                ..SyntheticSpec::default()
            };
            let files = corpus::write_corpus(&out, &generate_corpus(&spec, seed)).input()?;
            emit(&format!(
                "wrote {} projects ({files} files) to {}\n",
                train + val + test,
                out.display()
            ))
        }
        Cmd::Train {
            corpus,
            out,
            resume,
            train,
        } => cmd_train(&corpus, &out, resume.as_deref(), &train),
        Cmd::Predict {
            checkpoint,
            src,
            top_n,
            lib_only,
        } => cmd_predict(&checkpoint, &src, top_n, lib_only),
        Cmd::Evaluate {
            checkpoint,
            corpus,
            split,
            lib_only,
            json,
        } => cmd_evaluate(&checkpoint, &corpus, &split, lib_only, json.as_deref()),
        Cmd::Ablation {
            corpus,
            variants,
            json,
            train,
        } => cmd_ablation(&corpus, &variants, json.as_deref(), &train),
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Internal(e.into())),
        _ => Ok(()),
    }
}

fn extract_graph(src: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let project = SourceProject::from_dir(src).input()?;
    let g = corpus::extract(&project).input()?;
    let text = g.to_json();
    match out {
        Some(p) => fs::write(p, &text)
            .with_context(|| format!("writing {}", p.display()))
            .input()?,
        None => emit(&(text + "\n"))?,
    }
    eprintln!("nodes {}", g.num_nodes());
    eprintln!("edges {}", g.edges.len());
    for (kind, n) in g.edge_counts() {
        eprintln!("  {kind:<12} {n}");
    }
    Ok(())
}

fn load_store(path: &Path) -> Result<(ParameterStore<f32>, Checkpoint), Failure> {
    let ck = Checkpoint::load(path)
        .with_context(|| format!("loading checkpoint {}", path.display()))
        .input()?;
    let store = ParameterStore::from_checkpoint(&ck)
        .with_context(|| format!("checkpoint {}", path.display()))
        .input()?;
    Ok((store, ck))
}

fn cmd_train(
    corpus_dir: &Path,
    out: &Path,
    resume: Option<&Path>,
    args: &TrainArgs,
) -> Result<(), Failure> {
    let mut config = args.config()?;
    let corpus = corpus::load_corpus(corpus_dir, !args.no_cache).input()?;
    let store = match resume {
        Some(path) => {
            let (store, ck) = load_store(path)?;
            if store.config != config.model {
                log::warn!("model flags ignored; using the checkpoint's model configuration");
                config.model = store.config;
            }
            config.start_epoch = ck.meta["epoch"].as_u64().map_or(0, |e| e as usize + 1);
            config.validate().map_err(|e| Failure::Usage(e.into()))?;
            store
        }
        None => init_store(&corpus, &config),
    };
    log::info!(
        "config {}",
        serde_json::to_string(&config).expect("config serializes")
    );
    log::info!(
        "corpus {} train / {} val / {} test projects",
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len()
    );

    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .input()?;
    let log_path = out.join("train_log.csv");
    let mut partial = TrainLog::default();
    let outcome = train_from(&corpus, &config, store, |row: &LogRow| {
        partial.rows.push(row.clone());
        // Keep the log current so an interrupted run still leaves one.
        let _ = fs::write(&log_path, partial.to_csv());
    })
    .internal()?;

    let mut ck = outcome.store.to_checkpoint(config.seed);
    ck.meta["epoch"] = json!(outcome.best_epoch);
    ck.meta["train_config"] = serde_json::to_value(&config).expect("config serializes");
    let ck_path = out.join("model.ckpt.json");
    ck.save(&ck_path).internal()?;
    fs::write(&log_path, outcome.log.to_csv()).internal()?;

    let names =
        |ps: &[tdg_core::trainer::Project]| ps.iter().map(|p| p.name.clone()).collect::<Vec<_>>();
    let manifest = json!({
        "format_version": MANIFEST_VERSION,
        "checkpoint": "model.ckpt.json",
        "log": "train_log.csv",
        "seed": config.seed,
        "config": config,
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.log.rows.len(),
        "batch_cap": outcome.batch_cap,
        "vocab_size": outcome.store.vocab.len(),
        "lib_types": outcome.store.lib_types,
        "corpus": {
            "train": names(&corpus.train),
            "val": names(&corpus.val),
            "test": names(&corpus.test),
        },
    });
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .internal()?;
    let best = outcome
        .log
        .rows
        .iter()
        .find(|r| r.epoch == outcome.best_epoch);
    emit(&format!(
        "trained {} epochs; best epoch {} (val loss {:.4}); wrote {}\n",
        outcome.log.rows.len(),
        outcome.best_epoch,
        best.map_or(f64::NAN, |r| r.val_loss),
        ck_path.display()
    ))
}

fn cmd_predict(checkpoint: &Path, src: &Path, top_n: usize, lib_only: bool) -> Result<(), Failure> {
    if top_n == 0 {
        return Err(Failure::Usage(anyhow!("--top-n must be positive")));
    }
    let (store, _) = load_store(checkpoint)?;
    let project = SourceProject::from_dir(src).input()?;
    let g = corpus::extract(&project).input()?;
    let cands = if lib_only {
        CandidateSet::lib_only(&store.lib_types)
    } else {
        CandidateSet::for_graph(&store.lib_types, &g)
    };
    let preds = predict(&store, &g, &declared_nodes(&g), &cands, EVAL_RUN_SEED).internal()?;
    let out = serde_json::to_string_pretty(&preds.to_json(top_n)).expect("predictions serialize");
    emit(&(out + "\n"))
}

fn write_reports(path: &Path, reports: &[EvalReport]) -> Result<(), Failure> {
    let v: Vec<_> = reports.iter().map(EvalReport::to_json).collect();
    fs::write(
        path,
        serde_json::to_string_pretty(&v).expect("reports serialize") + "\n",
    )
    .with_context(|| format!("writing {}", path.display()))
    .input()
}

fn cmd_evaluate(
    checkpoint: &Path,
    corpus_dir: &Path,
    split: &str,
    lib_only: bool,
    json_out: Option<&Path>,
) -> Result<(), Failure> {
    if !corpus::SPLITS.contains(&split) {
        return Err(Failure::Usage(anyhow!("unknown split `{split}`")));
    }
    let (store, _) = load_store(checkpoint)?;
    let projects = corpus::load_split(corpus_dir, split, true).input()?;
    if projects.is_empty() {
        return Err(Failure::Input(anyhow!(
            "{}: split `{split}` is empty",
            corpus_dir.display()
        )));
    }
    let train = corpus::load_split(corpus_dir, "train", true).input()?;
    let model = evaluate_model("model", &store, &projects, lib_only).internal()?;
    let baseline = evaluate_baseline(
        &projects,
        &store.lib_types,
        most_frequent_type(&train).as_deref(),
    )
    .internal()?;
    let reports = [model, baseline];
    if let Some(p) = json_out {
        write_reports(p, &reports)?;
    }
    emit(&format_table(&reports))
}

fn cmd_ablation(
    corpus_dir: &Path,
    variants: &str,
    json_out: Option<&Path>,
    args: &TrainArgs,
) -> Result<(), Failure> {
    let base = args.config()?;
    let variants = variants
        .split(',')
        .map(|v| {
            AblationVariant::parse(v.trim())
                .ok_or_else(|| Failure::Usage(anyhow!("unknown variant `{v}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let corpus = corpus::load_corpus(corpus_dir, !args.no_cache).input()?;
    let mut reports = Vec::new();
    for v in variants {
        log::info!("variant {}", v.name());
        reports.push(run_ablation(&corpus, &base, v).internal()?.report);
    }
    if let Some(p) = json_out {
        write_reports(p, &reports)?;
    }
    emit(&format_table(&reports))
}
