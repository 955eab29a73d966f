//! Command-line front end: parse, graphify, stats, gen-corpus, train, eval,
//! and prove subcommands over the library pipeline.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use graphtactic::corpus::{
    self, generate, load_proof_log, load_theorem_db, metrics, save_proof_log, save_theorem_db,
    Split, ToyCorpusConfig,
};
use graphtactic::gnn::GnnConfig;
use graphtactic::graphrep::{self, Direction, RepresentationConfig, Sharing, TermGraph};
use graphtactic::model::trainer::{train, TrainConfig};
use graphtactic::model::{
    build_premise_cache, load_premise_cache, save_premise_cache, Model, ModelConfig,
};
use graphtactic::numerics::{
    checkpoint_file_id, load_checkpoint, peek_dtype, save_checkpoint, AdamConfig, Dtype,
    LoadedCheckpoint, Scalar,
};
use graphtactic::prover::{
    evaluate_prover, render_report, Engine, ModelPolicy, OraclePolicy, Policy, ProveConfig,
    RandomPolicy,
};
use graphtactic::sexpr;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Parser)]
#[command(
    name = "graphtactic",
    version,
    about = "HOL term graphs, GNN embeddings, tactic/premise selection, and toy proof search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RepresentationArg {
    Ast,
    Leaf,
    Subexpr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Both,
    Topdown,
    Bottomup,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args, Clone)]
struct RepresentationFlags {
    /// Graph representation of terms.
    #[arg(long, value_enum, default_value = "subexpr")]
    representation: RepresentationArg,
    /// Rename all variable names to x after graph construction.
    #[arg(long)]
    blind_variables: bool,
    /// Add 3 seeded random edges per node.
    #[arg(long)]
    random_edges: bool,
    /// Message-passing direction restriction (needs subexpr sharing).
    #[arg(long, value_enum, default_value = "both")]
    direction: DirectionArg,
    /// Seed for random-edge placement.
    #[arg(long, default_value_t = 0)]
    rep_seed: u64,
}

impl RepresentationFlags {
    fn to_config(&self) -> RepresentationConfig {
        RepresentationConfig {
            sharing: match self.representation {
                RepresentationArg::Ast => Sharing::None,
                RepresentationArg::Leaf => Sharing::Leaf,
                RepresentationArg::Subexpr => Sharing::Subexpression,
            },
            variable_blinding: self.blind_variables,
            random_edges: self.random_edges,
            direction: match self.direction {
                DirectionArg::Both => Direction::Both,
                DirectionArg::Topdown => Direction::TopDown,
                DirectionArg::Bottomup => Direction::BottomUp,
            },
            random_seed: self.rep_seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a term and echo its canonical form.
    Parse {
        /// Term text; reads stdin when omitted.
        term: Option<String>,
    },
    /// Emit the graph interchange format for a term.
    Graphify {
        term: Option<String>,
        #[command(flatten)]
        rep: RepresentationFlags,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Node/edge/depth statistics for one term or a whole database.
    Stats {
        /// Single term; mutually exclusive with --theorem-db.
        term: Option<String>,
        #[arg(long)]
        theorem_db: Option<PathBuf>,
        /// Also write a tab-separated table for external plotting.
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Generate a synthetic theorem database and proof log.
    GenCorpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        n_theorems: usize,
        #[arg(long, default_value_t = 41)]
        n_tactics: usize,
        #[arg(long)]
        theorem_db: PathBuf,
        #[arg(long)]
        proof_log: PathBuf,
    },
    /// Train a model and write the selected checkpoint.
    Train(Box<TrainArgs>),
    /// Print the two proxy metrics for a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        theorem_db: PathBuf,
        #[arg(long)]
        proof_log: PathBuf,
        #[arg(long, value_enum, default_value = "valid")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run guided proof search over a split and write the report.
    Prove(ProveArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    theorem_db: PathBuf,
    #[arg(long)]
    proof_log: PathBuf,
    /// Output path for the selected (best proxy score) checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Also write the final (last step) checkpoint here.
    #[arg(long)]
    final_checkpoint: Option<PathBuf>,
    #[command(flatten)]
    rep: RepresentationFlags,
    /// Message-passing rounds.
    #[arg(long, default_value_t = 2)]
    hops: usize,
    #[arg(long, default_value_t = 3000)]
    steps: usize,
    #[arg(long, default_value_t = 25)]
    eval_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train in f64 instead of f32.
    #[arg(long)]
    f64: bool,
    /// Node embedding width.
    #[arg(long, default_value_t = 128)]
    node_dim: usize,
    /// Hidden width of the internal MLPs.
    #[arg(long, default_value_t = 256)]
    mlp_hidden: usize,
    /// Projection widths before max pooling (last = graph embedding size).
    #[arg(long, num_args = 1.., default_values_t = [512usize, 1024])]
    pool_dims: Vec<usize>,
    /// Tactic classifier hidden widths.
    #[arg(long, num_args = 1.., default_values_t = [512usize, 256])]
    tactic_hidden: Vec<usize>,
    /// Combiner hidden widths.
    #[arg(long, num_args = 1.., default_values_t = [1024usize, 512])]
    combiner_hidden: Vec<usize>,
    #[arg(long, default_value_t = 41)]
    n_tactics: usize,
    #[arg(long, default_value_t = 16)]
    batch_goals: usize,
    #[arg(long, default_value_t = 15)]
    negatives_per_goal: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.98)]
    decay_rate: f64,
    #[arg(long, default_value_t = 1000)]
    decay_period: u64,
    #[arg(long, default_value_t = 0.9999)]
    polyak: f64,
    #[arg(long, default_value_t = 0.7)]
    dropout_keep_dense: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout_keep_gnn: f64,
    #[arg(long, default_value_t = 1.0)]
    w_tactic: f64,
    #[arg(long, default_value_t = 0.2)]
    w_pairwise: f64,
    #[arg(long, default_value_t = 4.0)]
    w_aucroc: f64,
    /// Holdout fraction of training theorems for checkpoint selection.
    #[arg(long, default_value_t = 0.05)]
    holdout_frac: f64,
    /// Stop once proxy metrics reach tactic,premise thresholds (e.g. 0.95,0.95).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    early_stop: Option<Vec<f64>>,
    /// Write the metric log to this file as well as stdout.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct ProveArgs {
    #[arg(long)]
    theorem_db: PathBuf,
    #[arg(long)]
    proof_log: Option<PathBuf>,
    /// Model checkpoint; omit to use --policy random or oracle.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Policy when no checkpoint is given: random or oracle.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, value_enum, default_value = "valid")]
    split: SplitArg,
    #[arg(long, default_value_t = 5)]
    k1: usize,
    #[arg(long, default_value_t = 20)]
    k2: usize,
    /// Goal-expansion budget per theorem.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// Per-theorem wall clock in seconds; 0 disables it.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 41)]
    n_tactics: usize,
    /// Premise-embedding cache file (created when absent or stale).
    #[arg(long)]
    premise_cache: Option<PathBuf>,
    /// Report output path.
    #[arg(long)]
    report: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn read_term(arg: Option<String>) -> Result<String> {
    match arg {
        Some(t) => Ok(t),
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            Ok(buf)
        }
    }
}

/// Write via a temporary file so failures never leave partial outputs.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { term } => {
            let text = read_term(term)?;
            let expr = sexpr::parse(&text).context("parse failed")?;
            println!("{}", sexpr::serialize(&expr));
        }
        Command::Graphify { term, rep, out } => {
            let text = read_term(term)?;
            let expr = sexpr::parse(&text).context("parse failed")?;
            let graph = graphrep::represent(&expr, &rep.to_config())?;
            let rendered = graphrep::write_interchange(&graph);
            match out {
                Some(path) => write_atomic(&path, &rendered)?,
                None => print!("{rendered}"),
            }
        }
        Command::Stats {
            term,
            theorem_db,
            table_out,
        } => run_stats(term, theorem_db, table_out)?,
        Command::GenCorpus {
            seed,
            n_theorems,
            n_tactics,
            theorem_db,
            proof_log,
        } => {
            let cfg = ToyCorpusConfig::sized(seed, n_theorems, n_tactics);
            let (db, log) = generate(&cfg);
            save_theorem_db(&theorem_db, &db)?;
            save_proof_log(&proof_log, &log)?;
            println!(
                "wrote {} database entries and {} proof steps",
                db.len(),
                log.steps.len()
            );
        }
        Command::Train(args) => {
            if args.f64 {
                run_train::<f64>(&args)?;
            } else {
                run_train::<f32>(&args)?;
            }
        }
        Command::Eval {
            checkpoint,
            theorem_db,
            proof_log,
            split,
            seed,
        } => match peek_dtype(&checkpoint)? {
            Dtype::F32 => {
                run_eval::<f32>(&checkpoint, &theorem_db, &proof_log, split.into(), seed)?
            }
            Dtype::F64 => {
                run_eval::<f64>(&checkpoint, &theorem_db, &proof_log, split.into(), seed)?
            }
        },
        Command::Prove(args) => match &args.checkpoint {
            Some(ckpt) => match peek_dtype(ckpt)? {
                Dtype::F32 => run_prove_model::<f32>(&args)?,
                Dtype::F64 => run_prove_model::<f64>(&args)?,
            },
            None => run_prove_baseline(&args)?,
        },
    }
    Ok(())
}

fn representation_stats(graph: &TermGraph) -> Result<(usize, usize, usize)> {
    let s = graphrep::stats(graph)?;
    Ok((s.node_count, s.edge_count, s.depth))
}

fn run_stats(
    term: Option<String>,
    theorem_db: Option<PathBuf>,
    table_out: Option<PathBuf>,
) -> Result<()> {
    let reps: [(&str, Sharing); 3] = [
        ("ast", Sharing::None),
        ("leaf", Sharing::Leaf),
        ("subexpr", Sharing::Subexpression),
    ];
    let build = |expr: &sexpr::SExpr, sharing: Sharing| -> Result<TermGraph> {
        let cfg = RepresentationConfig {
            sharing,
            ..Default::default()
        };
        Ok(graphrep::represent(expr, &cfg)?)
    };

    match (term, theorem_db) {
        (Some(_), Some(_)) => bail!("give either a term or --theorem-db, not both"),
        (None, None) => bail!("give a term or --theorem-db"),
        (Some(text), None) => {
            let expr = sexpr::parse(&text).context("parse failed")?;
            println!("{:<10} {:>6} {:>6} {:>6}", "rep", "nodes", "edges", "depth");
            let mut table = String::from("rep\tnodes\tedges\tdepth\n");
            for (name, sharing) in reps {
                let (n, e, d) = representation_stats(&build(&expr, sharing)?)?;
                println!("{name:<10} {n:>6} {e:>6} {d:>6}");
                table.push_str(&format!("{name}\t{n}\t{e}\t{d}\n"));
            }
            if let Some(path) = table_out {
                write_atomic(&path, &table)?;
            }
        }
        (None, Some(db_path)) => {
            let db = load_theorem_db(&db_path)?;
            if db.is_empty() {
                bail!("empty theorem database");
            }
            let mut table = String::from("rep\tindex\tnodes\tedges\tdepth\n");
            println!(
                "{:<10} {:>9} {:>9} {:>10} {:>10}",
                "rep", "mean_n", "max_n", "mean_dep", "max_dep"
            );
            for (name, sharing) in reps {
                let mut nodes = Vec::new();
                let mut depths = Vec::new();
                for r in &db.records {
                    let (n, _e, d) = representation_stats(&build(&r.statement, sharing)?)?;
                    table.push_str(&format!("{name}\t{}\t{n}\t{d}\n", r.index));
                    nodes.push(n as f64);
                    depths.push(d as f64);
                }
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let max = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
                println!(
                    "{name:<10} {:>9.2} {:>9} {:>10.2} {:>10}",
                    mean(&nodes),
                    max(&nodes) as usize,
                    mean(&depths),
                    max(&depths) as usize
                );
                print_histogram(&format!("{name} node counts"), &nodes);
            }
            if let Some(path) = table_out {
                write_atomic(&path, &table)?;
            }
        }
    }
    Ok(())
}

fn print_histogram(title: &str, values: &[f64]) {
    let max = values.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let buckets = 8usize;
    let width = (max / buckets as f64).ceil().max(1.0);
    let mut counts = vec![0usize; buckets];
    for &v in values {
        let b = ((v / width) as usize).min(buckets - 1);
        counts[b] += 1;
    }
    println!("  {title}:");
    for (b, &c) in counts.iter().enumerate() {
        let lo = b as f64 * width;
        let hi = lo + width;
        let bar = "#".repeat((c * 40).div_ceil(values.len().max(1)));
        println!("  [{lo:>5.0},{hi:>5.0}) {c:>5} {bar}");
    }
}

fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            gnn: GnnConfig {
                hops: args.hops,
                node_dim: args.node_dim,
                mlp_hidden: vec![args.mlp_hidden],
                pool_dims: args.pool_dims.clone(),
                dropout_keep: args.dropout_keep_gnn,
            },
            n_tactics: args.n_tactics,
            tactic_hidden: args.tactic_hidden.clone(),
            combiner_hidden: args.combiner_hidden.clone(),
            dropout_keep_dense: args.dropout_keep_dense,
            goals_per_batch: args.batch_goals,
            negatives_per_goal: args.negatives_per_goal,
            loss_weights: graphtactic::model::LossWeights {
                tactic: args.w_tactic,
                pairwise: args.w_pairwise,
                aucroc: args.w_aucroc,
            },
            representation: args.rep.to_config(),
        },
        adam: AdamConfig {
            learning_rate: args.learning_rate,
            decay_rate: args.decay_rate,
            decay_period: args.decay_period,
            polyak: args.polyak,
            ..Default::default()
        },
        steps: args.steps,
        eval_every: args.eval_every,
        seed: args.seed,
        holdout_frac: args.holdout_frac,
        early_stop: args.early_stop.as_ref().map(|v| (v[0], v[1])),
        metric_examples_cap: 512,
        metric_samples_per_positive: 3,
    }
}

fn checkpoint_meta<T: Scalar>(model: &Model<T>) -> Vec<(String, String)> {
    vec![
        ("model".to_string(), model.cfg.to_meta()),
        ("vocab".to_string(), model.vocab.tokens().join(" ")),
    ]
}

fn run_train<T: Scalar>(args: &TrainArgs) -> Result<()> {
    args.rep.to_config().validate()?;
    let db = load_theorem_db(&args.theorem_db)?;
    let log = load_proof_log(&args.proof_log, &db, args.n_tactics)?;
    let cfg = train_config(args);
    let mut lines = Vec::new();
    let result = train::<T>(&cfg, &db, &log, |line| {
        println!("{line}");
        lines.push(line.to_string());
    })?;

    let meta = checkpoint_meta(&result.model);
    match &result.best {
        Some(best) => {
            save_checkpoint(&args.checkpoint, &meta, &best.store, &best.optimizer)?;
            println!(
                "selected checkpoint from step {} (proxy score {:?})",
                best.step, best.score
            );
        }
        None => {
            save_checkpoint(
                &args.checkpoint,
                &meta,
                &result.model.store,
                &result.optimizer,
            )?;
        }
    }
    if let Some(path) = &args.final_checkpoint {
        save_checkpoint(path, &meta, &result.model.store, &result.optimizer)?;
    }
    if let Some(path) = &args.metrics_out {
        write_atomic(path, &(lines.join("\n") + "\n"))?;
    }
    Ok(())
}

/// Rebuild a model from a checkpoint, using Polyak shadows for evaluation.
fn model_from_checkpoint<T: Scalar>(path: &Path) -> Result<(Model<T>, u64)> {
    let LoadedCheckpoint {
        meta,
        store,
        optimizer,
    } = load_checkpoint::<T>(path)?;
    let get = |key: &str| -> Result<&str> {
        meta.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .with_context(|| format!("checkpoint missing `{key}` meta"))
    };
    let cfg = ModelConfig::from_meta(get("model")?)?;
    let vocab = graphtactic::gnn::Vocab::build_closed(get("vocab")?.split(' '));
    let template: Model<T> = Model::init(cfg, vocab, 0);
    let live_values: Vec<_> = store.iter().map(|(_, _, v)| v.clone()).collect();
    let live = template.with_values(&live_values);
    // Checkpoints hold live params; evaluation uses the Polyak shadows.
    let eval = live.with_values(optimizer.shadow());
    let id = checkpoint_file_id(path)?;
    Ok((eval, id))
}

fn run_eval<T: Scalar>(
    checkpoint: &Path,
    theorem_db: &Path,
    proof_log: &Path,
    split: Split,
    seed: u64,
) -> Result<()> {
    let db = load_theorem_db(theorem_db)?;
    let (model, ckpt_id) = model_from_checkpoint::<T>(checkpoint)?;
    let log = load_proof_log(proof_log, &db, model.cfg.n_tactics)?;
    let examples = corpus::extract_examples(&db, &log, split);
    if examples.is_empty() {
        bail!("no examples in split {split}");
    }
    let cache = build_premise_cache(&model, &db, ckpt_id)?;
    let ta = metrics::tactic_accuracy(&model, &examples)?;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pa = metrics::relative_premise_accuracy(&model, &examples, &cache, &mut rng, 1)?;
    println!("split {split} examples {}", examples.len());
    println!("tactic_accuracy {ta:?}");
    println!("relative_premise_accuracy {pa:?}");
    Ok(())
}

fn prove_config(args: &ProveArgs) -> ProveConfig {
    ProveConfig {
        k1: args.k1,
        k2: args.k2,
        max_expansions: args.budget,
        wall_clock: if args.timeout_secs == 0 {
            None
        } else {
            Some(Duration::from_secs(args.timeout_secs))
        },
    }
}

fn run_prove_model<T: Scalar>(args: &ProveArgs) -> Result<()> {
    let db = load_theorem_db(&args.theorem_db)?;
    let ckpt = args.checkpoint.as_ref().expect("checked by caller");
    let (model, ckpt_id) = model_from_checkpoint::<T>(ckpt)?;
    let cache = match &args.premise_cache {
        Some(path) if path.exists() => match load_premise_cache::<T>(path, ckpt_id) {
            Ok(cache) => cache,
            Err(e) => {
                eprintln!("rebuilding premise cache: {e}");
                let cache = build_premise_cache(&model, &db, ckpt_id)?;
                save_premise_cache(path, &cache)?;
                cache
            }
        },
        Some(path) => {
            let cache = build_premise_cache(&model, &db, ckpt_id)?;
            save_premise_cache(path, &cache)?;
            cache
        }
        None => build_premise_cache(&model, &db, ckpt_id)?,
    };
    let policy = ModelPolicy {
        model: &model,
        cache: &cache,
    };
    run_prove_common(args, &db, &policy, model.cfg.n_tactics)
}

fn run_prove_baseline(args: &ProveArgs) -> Result<()> {
    let db = load_theorem_db(&args.theorem_db)?;
    match args.policy.as_deref() {
        Some("random") => {
            let policy = RandomPolicy {
                seed: args.seed,
                n_tactics: args.n_tactics,
            };
            run_prove_common(args, &db, &policy, args.n_tactics)
        }
        Some("oracle") => {
            let log_path = args
                .proof_log
                .as_ref()
                .context("--policy oracle needs --proof-log")?;
            let log = load_proof_log(log_path, &db, args.n_tactics)?;
            let policy = OraclePolicy::new(&log, args.n_tactics);
            run_prove_common(args, &db, &policy, args.n_tactics)
        }
        other => bail!("without --checkpoint, --policy must be random or oracle (got {other:?})"),
    }
}

fn run_prove_common(
    args: &ProveArgs,
    db: &corpus::TheoremDb,
    policy: &dyn Policy,
    n_tactics: usize,
) -> Result<()> {
    let theorems = db.indices_in_split(args.split.into());
    if theorems.is_empty() {
        bail!("no theorems in split");
    }
    let engine = Engine::new(n_tactics);
    let cfg = prove_config(args);
    let report = evaluate_prover(&engine, db, &theorems, policy, &cfg);
    let rendered = render_report(&report);
    write_atomic(&args.report, &rendered)?;
    print!("{rendered}");
    if report.outcomes.iter().any(|o| !o.replay_ok) {
        bail!("a reported closure failed proof replay");
    }
    Ok(())
}
