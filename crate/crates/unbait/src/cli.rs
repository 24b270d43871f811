//! The `unbait` command-line harness.
//!
//! Subcommands: `synth`, `train`, `eval`, `compare`, `poison`,
//! `analyze`. Every command resolves its configuration (flat config
//! file, then flag overrides), runs deterministically for the given
//! seeds, writes machine-readable outputs (CSV/JSON), and drops a
//! `manifest.json` recording exactly what produced them. Re-running a
//! command with identical inputs reproduces every output byte for byte
//! in single-threaded mode (`--threads 1`, the default).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{
    derive_seed, filter_by_ratio, like_click_ratio, ratio_groups, split_dataset,
    FeatureTable, InteractionLog, RatioStats,
};
use crate::effects::{EffectKind, EffectRanker, ReferenceScope};
use crate::error::{Error, Result};
use crate::eval::{compare, evaluate, Ranker, RatioReranker};
use crate::fusion::FusionStrategy;
use crate::manifest::RunManifest;
use crate::scorer::TwoBranchScorer;
use crate::synth::{generate_world, poison_test, rank_diff, rank_diff_summary, WorldConfig};
use crate::train::{train, LossKind, Optimizer, TrainConfig, TrainMode, ALPHA_GRID};

#[derive(Debug, Parser)]
#[command(
    name = "unbait",
    version,
    about = "Counterfactual click-debiasing for implicit-feedback recommenders"
)]
pub struct Cli {
    /// Worker threads for per-user scoring (1 = fully serial).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic clickbait world into a dataset directory.
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate one checkpoint on the like-labeled test split.
    Eval(EvalArgs),
    /// Evaluate several methods side by side with relative improvements.
    Compare(CompareArgs),
    /// Fake-item poisoning probe: rank_diff per method.
    Poison(PoisonArgs),
    /// Like/click-ratio distribution and the dataset-cleanness sweep.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Flat `key = value` world config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override individual world config keys (`-s key=value`).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Override the world seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory (interactions.csv + features.csv).
    #[arg(long)]
    pub data: PathBuf,
    /// Flat `key = value` training config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for checkpoint(s), report(s), and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the train/validation/test split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Train one checkpoint per alpha in the standard grid and select
    /// the best by validation recall@10.
    #[arg(long)]
    pub alpha_sweep: bool,

    #[arg(long)]
    pub mode: Option<TrainMode>,
    #[arg(long)]
    pub strategy: Option<FusionStrategy>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub nr_lambda: Option<f64>,
    #[arg(long)]
    pub ipw_gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub val_likes_only: bool,
    #[arg(long)]
    pub plain_nt: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Effect kind ranking the items; defaults to the checkpoint mode's rule.
    #[arg(long)]
    pub inference: Option<EffectKind>,
    /// Cutoffs, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20])]
    pub ks: Vec<usize>,
    /// Average expectation constants over the whole catalog or only the
    /// candidate items.
    #[arg(long, default_value = "catalog")]
    pub reference_scope: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Methods as NAME=CHECKPOINT[:INFERENCE]; INFERENCE is one of
    /// fused/te/nde/tie/nie/tde/rr (rr = ratio re-ranking of FUSED).
    #[arg(long = "method", value_name = "NAME=CKPT[:KIND]", required = true)]
    pub methods: Vec<String>,
    #[arg(long, default_value = "nt")]
    pub baseline: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20])]
    pub ks: Vec<usize>,
    /// Ratio groups for the recommendation-frequency table.
    #[arg(long, default_value_t = 5)]
    pub ratio_groups: usize,
}

#[derive(Debug, Args)]
pub struct PoisonArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Methods as NAME=CHECKPOINT[:INFERENCE] (one or two; two methods
    /// additionally produce the paired scatter file).
    #[arg(long = "method", value_name = "NAME=CKPT[:KIND]", required = true)]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram bucket width (rank_diff units).
    #[arg(long, default_value_t = 100)]
    pub bucket_width: i64,
    /// Paired triples exported for scatter plotting.
    #[arg(long, default_value_t = 5000)]
    pub scatter_samples: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Groups for the ratio histogram.
    #[arg(long, default_value_t = 101)]
    pub ratio_groups: usize,
    /// Run the cleanness sweep: discard top-ratio items at each
    /// proportion, train NT and CR on what remains, and compare.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.2, 0.4, 0.6, 0.8])]
    pub proportions: Vec<f64>,
    /// Seeds for the sweep trainings, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
    pub sweep_seeds: Vec<u64>,
    /// Flat training config for the sweep.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

/// Parses a flat `key = value` config file (`#` starts a comment).
pub fn parse_flat_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("expected `key = value`, got `{line}`"))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn load_world_config(args: &SynthArgs) -> Result<WorldConfig> {
    let mut config = WorldConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (key, value) in parse_flat_config(&text)? {
            config.set_key(&key, &value)?;
        }
    }
    for setting in &args.set {
        let (key, value) = setting.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("expected KEY=VALUE, got `{setting}`"))
        })?;
        config.set_key(key.trim(), value.trim())?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn load_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (key, value) in parse_flat_config(&text)? {
            config.set_key(&key, &value)?;
        }
    }
    if let Some(v) = args.mode {
        config.mode = v;
    }
    if let Some(v) = args.strategy {
        config.strategy = v;
    }
    if let Some(v) = args.loss {
        config.loss = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.l2 {
        config.l2 = v;
    }
    if let Some(v) = args.epochs {
        config.max_epochs = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.optimizer {
        config.optimizer = v;
    }
    if let Some(v) = args.nr_lambda {
        config.nr_lambda = v;
    }
    if let Some(v) = args.ipw_gamma {
        config.ipw_gamma = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.val_likes_only {
        config.val_likes_only = true;
    }
    if args.plain_nt {
        config.plain_nt = true;
    }
    Ok(config)
}

/// Loads `interactions.csv` + `features.csv` from a dataset directory.
/// Feature-only items extend the catalog.
pub fn load_dataset(dir: &Path) -> Result<(InteractionLog, FeatureTable)> {
    let interactions = dir.join("interactions.csv");
    let features_path = dir.join("features.csv");
    let mut log = InteractionLog::load_csv(&interactions)?;
    let features = FeatureTable::load_csv(&features_path, log.items_mut())?;
    Ok((log, features))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One parsed NAME=CKPT[:KIND] method spec.
struct MethodSpec {
    name: String,
    checkpoint: PathBuf,
    /// None = the checkpoint mode's default rule; `rr` is modeled apart.
    kind: Option<EffectKind>,
    rerank_by_ratio: bool,
}

fn parse_method_spec(spec: &str) -> Result<MethodSpec> {
    let (name, rest) = spec.split_once('=').ok_or_else(|| {
        Error::InvalidArgument(format!("expected NAME=CKPT[:KIND], got `{spec}`"))
    })?;
    let (path, kind) = match rest.rsplit_once(':') {
        Some((path, token)) if !token.contains('/') && !token.contains('\\') => {
            if token == "rr" {
                return Ok(MethodSpec {
                    name: name.to_string(),
                    checkpoint: PathBuf::from(path),
                    kind: None,
                    rerank_by_ratio: true,
                });
            }
            (PathBuf::from(path), Some(token.parse::<EffectKind>()?))
        }
        _ => (PathBuf::from(rest), None),
    };
    Ok(MethodSpec {
        name: name.to_string(),
        checkpoint: path,
        kind,
        rerank_by_ratio: false,
    })
}

/// A loaded checkpoint with its training config.
struct LoadedMethod {
    name: String,
    scorer: TwoBranchScorer,
    strategy: FusionStrategy,
    kind: EffectKind,
    rerank_by_ratio: bool,
}

fn load_method(spec: &MethodSpec) -> Result<LoadedMethod> {
    let (scorer, config_json) = TwoBranchScorer::load(&spec.checkpoint)?;
    let train_config: TrainConfig =
        serde_json::from_value(config_json).map_err(|e| Error::Checkpoint {
            path: spec.checkpoint.clone(),
            message: format!("bad embedded train config: {e}"),
        })?;
    let kind = spec
        .kind
        .unwrap_or_else(|| train_config.mode.inference_kind());
    Ok(LoadedMethod {
        name: spec.name.clone(),
        scorer,
        strategy: train_config.strategy,
        kind,
        rerank_by_ratio: spec.rerank_by_ratio,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    // Scoring parallelism is opt-in; N > 1 forfeits the bitwise
    // determinism contract on output files.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global();
    match cli.command {
        Command::Synth(args) => cmd_synth(args, cli.threads),
        Command::Train(args) => cmd_train(args, cli.threads),
        Command::Eval(args) => cmd_eval(args, cli.threads),
        Command::Compare(args) => cmd_compare(args, cli.threads),
        Command::Poison(args) => cmd_poison(args, cli.threads),
        Command::Analyze(args) => cmd_analyze(args, cli.threads),
    }
}

fn cmd_synth(args: SynthArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config = load_world_config(&args)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let (log, features, truth) = generate_world(&config)?;

    let interactions = args.out.join("interactions.csv");
    let features_path = args.out.join("features.csv");
    let truth_path = args.out.join("ground_truth.json");
    log.write_csv(&interactions)?;
    features.write_csv(&features_path, log.items())?;
    truth.save(&truth_path)?;

    let mut manifest = RunManifest::new(
        "synth",
        serde_json::to_value(&config)?,
        config.seed,
        threads,
    );
    manifest
        .output(&interactions)
        .output(&features_path)
        .output(&truth_path);
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&args.out.join("manifest.json"))?;
    println!(
        "synth: {} users, {} items, {} clicks -> {}",
        log.n_users(),
        log.n_items(),
        log.clicks().count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config = load_train_config(&args)?;
    config.validate()?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let (log, features) = load_dataset(&args.data)?;
    let split = split_dataset(&log, args.split_seed)?;

    let mut manifest = RunManifest::new(
        "train",
        serde_json::json!({
            "train": config,
            "split_seed": args.split_seed,
            "alpha_sweep": args.alpha_sweep,
        }),
        config.seed,
        threads,
    );
    manifest
        .input(args.data.join("interactions.csv"))
        .input(args.data.join("features.csv"));

    let alphas: Vec<f64> = if args.alpha_sweep {
        ALPHA_GRID.to_vec()
    } else {
        vec![config.alpha]
    };

    let mut best: Option<(f64, f64, Vec<u8>)> = None; // (val recall, alpha, checkpoint bytes)
    let mut sweep_rows = String::from("alpha,best_epoch,stopped_epoch,val_recall@10\n");
    for alpha in alphas {
        let run_config = TrainConfig {
            alpha,
            ..config.clone()
        };
        let (scorer, report) = train(&split, &features, &run_config)?;
        let val = report.epochs[report.best_epoch - 1].val_recall10;
        sweep_rows.push_str(&format!(
            "{},{},{},{}\n",
            alpha, report.best_epoch, report.stopped_epoch, val
        ));

        let suffix = if args.alpha_sweep {
            format!("-alpha{alpha}")
        } else {
            String::new()
        };
        let ckpt_path = args.out.join(format!("checkpoint{suffix}.json"));
        let report_path = args.out.join(format!("report{suffix}.csv"));
        scorer.save(&ckpt_path, &serde_json::to_value(&run_config)?)?;
        write_text(&report_path, &report.to_csv())?;
        manifest.output(&ckpt_path).output(&report_path);
        println!(
            "train {} alpha={alpha}: best epoch {} (val recall@10 {}), stopped at {}",
            config.mode, report.best_epoch, val, report.stopped_epoch
        );

        let bytes = fs::read(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
        if best.as_ref().is_none_or(|(v, _, _)| val > *v) {
            best = Some((val, alpha, bytes));
        }
    }

    if args.alpha_sweep {
        let (_, best_alpha, bytes) = best.expect("at least one alpha");
        let best_path = args.out.join("checkpoint.json");
        fs::write(&best_path, bytes).map_err(|e| Error::io(&best_path, e))?;
        let sweep_path = args.out.join("alpha_sweep.csv");
        write_text(&sweep_path, &sweep_rows)?;
        manifest.output(&best_path).output(&sweep_path);
        println!("alpha sweep: best alpha = {best_alpha} -> checkpoint.json");
    }

    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&args.out.join("manifest.json"))?;
    Ok(())
}

fn build_ranker<'a>(
    method: &'a LoadedMethod,
    features: &'a FeatureTable,
    stats: &'a RatioStats,
    scope: ReferenceScope,
) -> Box<dyn Ranker + 'a> {
    let effect =
        EffectRanker::new(&method.scorer, features, method.strategy, method.kind).with_scope(scope);
    if method.rerank_by_ratio {
        Box::new(RatioReranker::new(effect, stats))
    } else {
        Box::new(effect)
    }
}

fn cmd_eval(args: EvalArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let scope = match args.reference_scope.as_str() {
        "catalog" => ReferenceScope::Catalog,
        "candidates" => ReferenceScope::Candidates,
        other => {
            return Err(Error::UnknownName {
                what: "reference scope",
                value: other.to_string(),
                expected: "catalog, candidates",
            })
        }
    };
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let (log, features) = load_dataset(&args.data)?;
    let split = split_dataset(&log, args.split_seed)?;
    let (scorer, config_json) = TwoBranchScorer::load(&args.checkpoint)?;
    let train_config: TrainConfig =
        serde_json::from_value(config_json).map_err(|e| Error::Checkpoint {
            path: args.checkpoint.clone(),
            message: format!("bad embedded train config: {e}"),
        })?;
    let kind = args
        .inference
        .unwrap_or_else(|| train_config.mode.inference_kind());
    let ranker =
        EffectRanker::new(&scorer, &features, train_config.strategy, kind).with_scope(scope);
    let metrics = evaluate(&ranker, &split, &args.ks)?;

    let mut csv = String::from("k,precision,recall,ndcg\n");
    for m in &metrics {
        csv.push_str(&format!("{},{},{},{}\n", m.k, m.precision, m.recall, m.ndcg));
    }
    let csv_path = args.out.join("metrics.csv");
    let json_path = args.out.join("metrics.json");
    write_text(&csv_path, &csv)?;
    write_text(
        &json_path,
        &serde_json::to_string_pretty(&serde_json::json!({
            "checkpoint": args.checkpoint,
            "inference": kind.to_string(),
            "metrics": metrics,
        }))?,
    )?;

    let mut manifest = RunManifest::new(
        "eval",
        serde_json::json!({
            "checkpoint": args.checkpoint,
            "inference": kind.to_string(),
            "ks": args.ks,
            "split_seed": args.split_seed,
            "reference_scope": args.reference_scope,
        }),
        args.split_seed,
        threads,
    );
    manifest
        .input(args.data.join("interactions.csv"))
        .input(args.data.join("features.csv"))
        .input(&args.checkpoint)
        .output(&csv_path)
        .output(&json_path);
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&args.out.join("manifest.json"))?;
    for m in &metrics {
        println!(
            "eval {} @{}: precision {} recall {} ndcg {}",
            kind, m.k, m.precision, m.recall, m.ndcg
        );
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let (log, features) = load_dataset(&args.data)?;
    let split = split_dataset(&log, args.split_seed)?;
    let stats = like_click_ratio(&log);

    let specs: Vec<MethodSpec> = args
        .methods
        .iter()
        .map(|s| parse_method_spec(s))
        .collect::<Result<_>>()?;
    let loaded: Vec<LoadedMethod> = specs.iter().map(load_method).collect::<Result<_>>()?;
    let rankers: Vec<Box<dyn Ranker + '_>> = loaded
        .iter()
        .map(|m| build_ranker(m, &features, &stats, ReferenceScope::Catalog))
        .collect();
    let methods: Vec<(String, &dyn Ranker)> = loaded
        .iter()
        .zip(&rankers)
        .map(|(m, r)| (m.name.clone(), r.as_ref()))
        .collect();

    let report = compare(&methods, &split, &args.ks, &args.baseline)?;
    let csv_path = args.out.join("comparison.csv");
    let json_path = args.out.join("comparison.json");
    write_text(&csv_path, &report.to_csv())?;
    write_text(&json_path, &serde_json::to_string_pretty(&report)?)?;

    // Recommendation-frequency table: how often each method's top-3
    // recommendations fall into each like/click-ratio group.
    let groups = args.ratio_groups.max(1);
    let mut freq_csv = String::from("method,group_low,group_high,count\n");
    let exclusions = split.train.clicked_sets();
    for (name, ranker) in &methods {
        let mut counts = vec![0usize; groups];
        let mut undefined = 0usize;
        for user in 0..split.train.n_users() as u32 {
            let ranked = ranker.rank(user, &exclusions[user as usize]);
            for item in ranked.into_iter().take(3) {
                match stats.ratio(item) {
                    None => undefined += 1,
                    Some(r) => {
                        let idx = ((r * groups as f64).floor() as usize).min(groups - 1);
                        counts[idx] += 1;
                    }
                }
            }
        }
        for (g, count) in counts.iter().enumerate() {
            freq_csv.push_str(&format!(
                "{},{},{},{}\n",
                name,
                g as f64 / groups as f64,
                (g + 1) as f64 / groups as f64,
                count
            ));
        }
        freq_csv.push_str(&format!("{name},undefined,undefined,{undefined}\n"));
    }
    let freq_path = args.out.join("rec_frequency.csv");
    write_text(&freq_path, &freq_csv)?;

    let mut manifest = RunManifest::new(
        "compare",
        serde_json::json!({
            "methods": args.methods,
            "baseline": args.baseline,
            "ks": args.ks,
            "split_seed": args.split_seed,
            "ratio_groups": groups,
        }),
        args.split_seed,
        threads,
    );
    manifest
        .input(args.data.join("interactions.csv"))
        .input(args.data.join("features.csv"))
        .output(&csv_path)
        .output(&json_path)
        .output(&freq_path);
    for spec in &specs {
        manifest.input(&spec.checkpoint);
    }
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&args.out.join("manifest.json"))?;

    for method in &report.methods {
        for (m, imp) in method.metrics.iter().zip(&method.improvement) {
            let fmt = |v: Option<f64>| {
                v.map(|x| format!("{:+.2}%", 100.0 * x))
                    .unwrap_or_else(|| "n/a".into())
            };
            println!(
                "{} @{}: P {} R {} N {} (vs {}: P {} R {} N {})",
                method.name,
                m.k,
                m.precision,
                m.recall,
                m.ndcg,
                report.baseline,
                fmt(imp.precision),
                fmt(imp.recall),
                fmt(imp.ndcg),
            );
        }
    }
    Ok(())
}

fn cmd_poison(args: PoisonArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let (log, features) = load_dataset(&args.data)?;
    let split = split_dataset(&log, args.split_seed)?;
    if split.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats = like_click_ratio(&log);
    let (triples, extended) = poison_test(&split, &features, &stats, args.seed)?;
    let fake_to_real: Vec<u32> = triples.iter().map(|t| t.real_item).collect();

    let specs: Vec<MethodSpec> = args
        .methods
        .iter()
        .map(|s| parse_method_spec(s))
        .collect::<Result<_>>()?;
    let mut manifest = RunManifest::new(
        "poison",
        serde_json::json!({
            "methods": args.methods,
            "seed": args.seed,
            "split_seed": args.split_seed,
            "bucket_width": args.bucket_width,
            "scatter_samples": args.scatter_samples,
        }),
        args.seed,
        threads,
    );
    manifest
        .input(args.data.join("interactions.csv"))
        .input(args.data.join("features.csv"));

    let mut all_diffs: Vec<(String, Vec<i64>)> = Vec::new();
    for spec in &specs {
        let method = load_method(spec)?;
        if method.rerank_by_ratio {
            return Err(Error::InvalidArgument(
                "rr methods are not rankable over fake items (no ratio data)".into(),
            ));
        }
        let scorer = method.scorer.extend_for_fakes(&fake_to_real);
        let ranker = EffectRanker::new(&scorer, &extended, method.strategy, method.kind);
        let diffs = rank_diff(&ranker, &triples, &split, features.n_items(), extended.n_items());
        let summary = rank_diff_summary(&diffs, args.bucket_width)?;
        let path = args.out.join(format!("rank_diff-{}.csv", method.name));
        write_text(&path, &summary.to_csv())?;
        manifest.input(&spec.checkpoint).output(&path);
        println!(
            "poison {}: mean rank_diff {:.2} over {} triples",
            method.name,
            summary.mean,
            diffs.len()
        );
        all_diffs.push((method.name.clone(), diffs));
    }

    if all_diffs.len() >= 2 {
        let (name_a, diffs_a) = &all_diffs[0];
        let (name_b, diffs_b) = &all_diffs[1];
        let n = triples.len();
        let take = args.scatter_samples.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 0x5CA7));
        let mut chosen: Vec<usize> = index_sample(&mut rng, n, take).into_iter().collect();
        chosen.sort_unstable();
        let mut scatter = format!("user,real_item,fake_item,{name_a},{name_b}\n");
        for idx in chosen {
            let t = &triples[idx];
            scatter.push_str(&format!(
                "{},{},{},{},{}\n",
                t.user, t.real_item, t.fake_item, diffs_a[idx], diffs_b[idx]
            ));
        }
        let scatter_path = args.out.join("rank_diff_scatter.csv");
        write_text(&scatter_path, &scatter)?;
        manifest.output(&scatter_path);
    }

    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&args.out.join("manifest.json"))?;
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let (log, features) = load_dataset(&args.data)?;
    if log.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats = like_click_ratio(&log);
    let histogram = ratio_groups(&stats, args.ratio_groups)?;

    // Ratio distribution with per-group click/like mass and the
    // cumulative item proportion.
    let groups = args.ratio_groups;
    let mut clicks_per_group = vec![0u64; groups];
    let mut likes_per_group = vec![0u64; groups];
    for (item, ratio) in stats.defined_ratios() {
        let idx = ((ratio * groups as f64).floor() as usize).min(groups - 1);
        clicks_per_group[idx] += u64::from(stats.click_count[item as usize]);
        likes_per_group[idx] += u64::from(stats.like_count[item as usize]);
    }
    let defined_total: usize = histogram.buckets.iter().sum();
    let mut cumulative = 0usize;
    let mut csv =
        String::from("group_low,group_high,items,clicks,likes,cumulative_item_fraction\n");
    for g in 0..groups {
        cumulative += histogram.buckets[g];
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            g as f64 / groups as f64,
            (g + 1) as f64 / groups as f64,
            histogram.buckets[g],
            clicks_per_group[g],
            likes_per_group[g],
            cumulative as f64 / defined_total.max(1) as f64,
        ));
    }
    csv.push_str(&format!("undefined,undefined,{},0,0,\n", histogram.undefined));
    let hist_path = args.out.join("ratio_histogram.csv");
    write_text(&hist_path, &csv)?;

    let mut manifest = RunManifest::new(
        "analyze",
        serde_json::json!({
            "ratio_groups": groups,
            "sweep": args.sweep,
            "proportions": args.proportions,
            "sweep_seeds": args.sweep_seeds,
            "split_seed": args.split_seed,
        }),
        args.split_seed,
        threads,
    );
    manifest
        .input(args.data.join("interactions.csv"))
        .input(args.data.join("features.csv"))
        .output(&hist_path);

    if args.sweep {
        let mut base = TrainConfig::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (key, value) in parse_flat_config(&text)? {
                base.set_key(&key, &value)?;
            }
        }
        if let Some(alpha) = args.alpha {
            base.alpha = alpha;
        }
        let mut sweep_csv = String::from(
            "proportion,seed,rickrolled_fraction,nt_ndcg@10,cr_ndcg@10,relative_gain\n",
        );
        for &proportion in &args.proportions {
            let filtered = filter_by_ratio(&log, proportion)?;
            let observed: Vec<&crate::data::Interaction> = filtered
                .clicks()
                .filter(|it| it.liked.is_some())
                .collect();
            let rickrolled = observed
                .iter()
                .filter(|it| it.liked == Some(false))
                .count() as f64
                / observed.len().max(1) as f64;
            for &seed in &args.sweep_seeds {
                let split = split_dataset(&filtered, args.split_seed ^ seed)?;
                let nt_cfg = TrainConfig {
                    mode: TrainMode::Nt,
                    seed,
                    ..base.clone()
                };
                let cr_cfg = TrainConfig {
                    mode: TrainMode::Cr,
                    seed,
                    ..base.clone()
                };
                let (nt, _) = train(&split, &features, &nt_cfg)?;
                let (cr, _) = train(&split, &features, &cr_cfg)?;
                let nt_ranker =
                    EffectRanker::new(&nt, &features, nt_cfg.strategy, EffectKind::Fused);
                let cr_ranker =
                    EffectRanker::new(&cr, &features, cr_cfg.strategy, EffectKind::Tie);
                let nt_m = evaluate(&nt_ranker, &split, &[10])?;
                let cr_m = evaluate(&cr_ranker, &split, &[10])?;
                let gain = if nt_m[0].ndcg > 0.0 {
                    (cr_m[0].ndcg - nt_m[0].ndcg) / nt_m[0].ndcg
                } else {
                    0.0
                };
                sweep_csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    proportion, seed, rickrolled, nt_m[0].ndcg, cr_m[0].ndcg, gain
                ));
                println!(
                    "analyze sweep p={proportion} seed={seed}: rickrolled {:.3}, NT {:.5}, CR {:.5} ({:+.2}%)",
                    rickrolled,
                    nt_m[0].ndcg,
                    cr_m[0].ndcg,
                    100.0 * gain
                );
            }
        }
        let sweep_path = args.out.join("cleanness_sweep.csv");
        write_text(&sweep_path, &sweep_csv)?;
        manifest.output(&sweep_path);
    }

    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.save(&args.out.join("manifest.json"))?;
    println!(
        "analyze: {} items bucketed, {} without clicks -> {}",
        defined_total,
        histogram.undefined,
        args.out.display()
    );
    Ok(())
}

// Keep clap in sync with the FromStr impls for enum-valued flags.
impl clap::builder::ValueParserFactory for TrainMode {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<TrainMode>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for FusionStrategy {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| {
            s.parse::<FusionStrategy>().map_err(|e| e.to_string())
        })
    }
}

impl clap::builder::ValueParserFactory for LossKind {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<LossKind>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for Optimizer {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Optimizer>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for EffectKind {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| {
            s.parse::<EffectKind>().map_err(|e| e.to_string())
        })
    }
}
