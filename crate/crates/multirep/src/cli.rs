//! Command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use multirep_core::data::{make_synthetic, monte_carlo_split, SyntheticKind};
use multirep_core::metrics::{aggregate, Metric, RunRecord};
use multirep_core::models::{ExitGate, ModelConfig, ModelKind};
use multirep_core::representations::{build_stack, parse_kinds, Preset, RepKind};
use multirep_core::stats::RankingReport;
use multirep_core::training::{auto_batch_size, evaluate, train, RunSpec, StackedSet, TrainConfig};

use crate::bench::{load_bench_datasets, run_sweep, with_timing, TimingMode};
use crate::config_text::{self, ModelFile};
use crate::error::{exit, Error, Result};
use crate::journal::{read_journal, Journal};
use crate::report;
use crate::svg;
use crate::tsv::{load_tsv, load_tsv_pair, write_file, write_row};
use crate::weights::save_weights;

#[derive(Debug, Parser)]
#[command(name = "multirep", version, about = "Multi-representation time series classification benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic TRAIN/TEST pair.
    Synth(SynthArgs),
    /// Write the representation stack of every series.
    Transform(TransformArgs),
    /// Train one model and save its configuration and weights.
    Train(TrainArgs),
    /// Run a resumable benchmark sweep.
    Bench(BenchArgs),
    /// Rank models across datasets and draw the critical-difference diagram.
    Compare(CompareArgs),
    /// Cost / score trade-off and calibration plots.
    Pareto(ParetoArgs),
}

#[derive(Debug, Args)]
pub struct RepArgs {
    /// Comma-separated representation names, e.g. TIME,DT1,FFT_MAG.
    #[arg(long, conflicts_with = "preset")]
    pub reps: Option<String>,
    /// raw, minimal or default.
    #[arg(long)]
    pub preset: Option<String>,
}

impl RepArgs {
    fn kinds(&self, fallback: Preset) -> Result<Vec<RepKind>> {
        Ok(match (&self.reps, &self.preset) {
            (Some(list), _) => parse_kinds(list)?,
            (None, Some(p)) => p.parse::<Preset>()?.kinds(),
            (None, None) => fallback.kinds(),
        })
    }
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Early-exit threshold for LMRMS-Net.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Early-exit gating for LMRMS-Net: per-sample or batch-mean.
    #[arg(long, value_parser = ["per-sample", "batch-mean"])]
    pub gate: Option<String>,
    #[arg(long, value_enum, default_value_t = TimingMode::Wall)]
    pub timing: TimingMode,
}

impl TrainingArgs {
    fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            patience: self.patience.unwrap_or(d.patience),
            seed: self.seed,
            batch_size: self.batch_size,
            ..d
        }
    }

    fn apply(&self, model: &mut ModelConfig) {
        if let ModelConfig::Lmrms(c) = model {
            if let Some(tau) = self.tau {
                c.tau = tau;
            }
            match self.gate.as_deref() {
                Some("batch-mean") => c.gate = ExitGate::BatchMean,
                Some("per-sample") => c.gate = ExitGate::PerSample,
                _ => {}
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// two_sines or noise_vs_trend.
    #[arg(long, default_value = "two_sines")]
    pub kind: String,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Dataset name; defaults to the kind.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, env = "MULTIREP_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub reps: RepArgs,
    #[arg(long, env = "MULTIREP_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out file; when given, test metrics are written too.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value = "mrms")]
    pub model: String,
    /// Model configuration file (key=value); overrides --model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub reps: RepArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, env = "MULTIREP_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of <name>_TRAIN.tsv / <name>_TEST.tsv pairs.
    #[arg(long)]
    pub datasets: PathBuf,
    #[arg(long, default_value = "mrms,lmrms")]
    pub models: String,
    #[arg(long, default_value_t = 5)]
    pub resamples: usize,
    /// Training share of resamples beyond the first; defaults to each
    /// dataset's own TRAIN/TEST ratio.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub reps: RepArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, env = "MULTIREP_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub journal: PathBuf,
    #[arg(long, default_value = "acc")]
    pub metric: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Also report the Iman-Davenport F statistic.
    #[arg(long)]
    pub iman_davenport: bool,
    /// Comma-separated subset of models.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long, env = "MULTIREP_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub journal: PathBuf,
    #[arg(long, default_value = "train_s")]
    pub cost: String,
    #[arg(long, default_value = "acc")]
    pub score: String,
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long, env = "MULTIREP_OUT")]
    pub out: PathBuf,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}

fn model_list(list: &str) -> Result<Vec<ModelKind>> {
    let mut out: Vec<ModelKind> = Vec::new();
    for name in list.split(',').filter(|s| !s.trim().is_empty()) {
        let k: ModelKind = name.parse()?;
        if out.contains(&k) {
            return Err(Error::Usage(format!("model `{k}` listed twice")));
        }
        out.push(k);
    }
    if out.is_empty() {
        return Err(Error::Usage("no models given".into()));
    }
    Ok(out)
}

fn synth(args: &SynthArgs) -> Result<i32> {
    let kind: SyntheticKind = args.kind.parse()?;
    let name = args.name.clone().unwrap_or_else(|| kind.as_str().to_string());
    let ds = make_synthetic(kind, args.n, args.len, args.seed)?;
    let plan = &monte_carlo_split(&ds, 1, args.seed, args.train_fraction)?[0];
    for (part, indices) in [("TRAIN", &plan.train), ("TEST", &plan.test)] {
        let mut text = String::new();
        for &i in indices {
            let s = &ds.series()[i];
            write_row(&mut text, s.label, &s.values);
        }
        write_text(&args.out.join(format!("{name}_{part}.tsv")), &text)?;
    }
    eprintln!("wrote {name}: {} train / {} test series", plan.train.len(), plan.test.len());
    Ok(exit::OK)
}

fn transform(args: &TransformArgs) -> Result<i32> {
    let kinds = args.reps.kinds(Preset::Default)?;
    let ds = load_tsv(&args.input)?;
    let mut files: Vec<String> = vec![String::new(); kinds.len()];
    for s in ds.series() {
        let stack = build_stack(&s.values, &kinds)?;
        for (c, text) in files.iter_mut().enumerate() {
            write_row(text, s.label, stack.channel(c));
        }
    }
    for (kind, text) in kinds.iter().zip(&files) {
        write_text(&args.out.join(format!("{kind}.tsv")), text)?;
    }
    let mut manifest = String::new();
    let _ = writeln!(manifest, "source={}", args.input.display());
    let _ = writeln!(manifest, "series={}", ds.len());
    let _ = writeln!(manifest, "length={}", ds.series_len());
    let _ = writeln!(manifest, "channels={}", kinds.len());
    let names: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
    let _ = writeln!(manifest, "kinds={}", names.join(","));
    write_text(&args.out.join("manifest.txt"), &manifest)?;
    Ok(exit::OK)
}

fn train_cmd(args: &TrainArgs) -> Result<i32> {
    let (dataset, split) = match &args.test {
        Some(test) => {
            let d = load_tsv_pair(&args.train, test)?;
            let n = d.original_train().expect("pairs carry their split");
            (d, n)
        }
        None => {
            let d = load_tsv(&args.train)?;
            let n = d.len();
            (d, n)
        }
    };
    let (mut model_cfg, kinds) = match &args.config {
        Some(path) => {
            let file = config_text::load(path)?;
            let kinds = match (&file.reps, args.reps.reps.is_some() || args.reps.preset.is_some()) {
                (Some(r), false) => r.clone(),
                _ => args.reps.kinds(Preset::Default)?,
            };
            (file.model, kinds)
        }
        None => (ModelConfig::new(args.model.parse()?, 2), args.reps.kinds(Preset::Default)?),
    };
    model_cfg = model_cfg.with_num_classes(dataset.num_classes());
    args.training.apply(&mut model_cfg);
    let config = args.training.train_config();
    let train_idx: Vec<usize> = (0..split).collect();
    let test_idx: Vec<usize> = (split..dataset.len()).collect();
    let train_set = StackedSet::from_dataset(&dataset, &train_idx, &kinds)?;
    let model = model_cfg.build(kinds.len(), config.seed)?;
    let params = model.param_count();
    let outcome = with_timing(args.training.timing, |t| train(model, &train_set, &config, t))?;
    eprintln!(
        "trained {} for {} epochs, best train loss {:.6} at epoch {}",
        model_cfg.kind(),
        outcome.epochs_run,
        outcome.best_train_loss,
        outcome.best_epoch + 1
    );

    let file = ModelFile {
        model: model_cfg.clone(),
        in_channels: kinds.len(),
        reps: Some(kinds.clone()),
    };
    config_text::save(&file, &args.out.join("model.cfg"))?;
    save_weights(&outcome.model, &args.out.join("weights.bin"))?;
    let mut history = String::from("epoch,loss\n");
    for (i, l) in outcome.loss_history.iter().enumerate() {
        let _ = writeln!(history, "{},{l}", i + 1);
    }
    write_text(&args.out.join("history.csv"), &history)?;

    if !test_idx.is_empty() {
        let test_set = StackedSet::from_dataset(&dataset, &test_idx, &kinds)?;
        let batch = config.batch_size.unwrap_or_else(|| auto_batch_size(train_set.len(), train_set.series_len()));
        let eval = with_timing(args.training.timing, |t| evaluate(&outcome.model, &test_set, batch, t))?;
        let record = RunRecord {
            model: model_cfg.kind().to_string(),
            dataset: dataset.name().to_string(),
            resample: 0,
            accuracy: eval.accuracy,
            macro_f1: eval.macro_f1,
            auc: eval.auc,
            nll: eval.nll,
            train_seconds: outcome.train_seconds,
            test_seconds: eval.test_seconds,
            epochs: outcome.epochs_run,
            params,
        };
        write_text(&args.out.join("record.json"), &crate::journal::record_line(&record))?;
        eprintln!(
            "test accuracy {:.4}, nll {:.4}, early exits {:.1}%",
            eval.accuracy,
            eval.nll,
            100.0 * eval.early_exit_fraction
        );
    }
    Ok(exit::OK)
}

fn bench(args: &BenchArgs) -> Result<i32> {
    if args.resamples == 0 {
        return Err(Error::Usage("--resamples must be at least 1".into()));
    }
    let kinds = args.reps.kinds(Preset::Default)?;
    let train = args.training.train_config();
    train.validate()?;
    let specs: Vec<RunSpec> = model_list(&args.models)?
        .into_iter()
        .map(|k| {
            let mut m = ModelConfig::new(k, 2);
            args.training.apply(&mut m);
            m.validate().map(|_| RunSpec::new(m, kinds.clone(), train.clone()))
        })
        .collect::<multirep_core::Result<_>>()?;
    let (datasets, failed) = load_bench_datasets(&args.datasets, args.resamples, args.training.seed, args.train_fraction)?;
    for (name, e) in &failed {
        eprintln!("skipping dataset {name}: {e}");
    }
    if datasets.is_empty() && failed.is_empty() {
        return Err(Error::Usage(format!(
            "no <name>_TRAIN.tsv / <name>_TEST.tsv pairs in {}",
            args.datasets.display()
        )));
    }
    let mut journal = Journal::open(&args.out)?;
    let summary = run_sweep(
        &mut journal,
        &specs,
        &datasets,
        args.jobs.max(1),
        args.training.timing,
        &mut |line| eprintln!("{line}"),
    )?;
    eprintln!(
        "{} runs done, {} failed, {} already journaled",
        summary.succeeded, summary.failed, summary.skipped
    );
    match aggregate(journal.records()) {
        Ok(table) => write_file(&args.out.join("aggregate.csv"), &report::aggregate_csv(&table))?,
        Err(e) => eprintln!("aggregate.csv not written: {e}"),
    }
    Ok(if journal.records().is_empty() { exit::RUNTIME } else { exit::OK })
}

fn load_filtered(journal: &Path, models: &Option<String>) -> Result<Vec<RunRecord>> {
    let mut records = read_journal(journal)?;
    if let Some(list) = models {
        let keep: Vec<&str> = list.split(',').map(str::trim).collect();
        records.retain(|r| keep.contains(&r.model.as_str()));
    }
    Ok(records)
}

fn compare(args: &CompareArgs) -> Result<i32> {
    let metric: Metric = args.metric.parse()?;
    let records = load_filtered(&args.journal, &args.models)?;
    let table = aggregate(&records)?;
    let scores = report::score_matrix(&table, metric)?;
    let ranking = RankingReport::compute(&scores, args.alpha, args.iman_davenport)?;
    write_file(&args.out.join("ranks.csv"), &report::ranks_csv(&ranking))?;
    write_file(&args.out.join("report.csv"), &report::report_csv(&ranking, metric))?;
    write_file(&args.out.join("mcm.csv"), &report::mcm_csv(&scores))?;
    let orientation = if metric.higher_is_better() { "higher is better" } else { "lower is better" };
    let title = format!("average rank by {metric} ({orientation}), {} datasets", scores.n());
    write_text(&args.out.join("cd_diagram.svg"), &svg::cd_diagram(&ranking, &title))?;
    for i in ranking.order() {
        println!("{}\t{:.4}", ranking.models[i], ranking.average_ranks[i]);
    }
    println!("chi2={:.4} p={:.4} cd={:.4}", ranking.chi2, ranking.p_value, ranking.cd);
    Ok(exit::OK)
}

fn pareto(args: &ParetoArgs) -> Result<i32> {
    let cost: Metric = args.cost.parse()?;
    let score: Metric = args.score.parse()?;
    let records = load_filtered(&args.journal, &args.models)?;
    let table = aggregate(&records)?;
    let points = report::tradeoff_points(&table, cost, score)?;
    let frontier = report::frontier(&points);
    write_file(&args.out.join("pareto_points.csv"), &report::points_csv(&points, &frontier))?;
    write_file(&args.out.join("pareto_frontier.csv"), &report::frontier_csv(&points, &frontier))?;
    write_text(
        &args.out.join("pareto.svg"),
        &svg::pareto_plot(&points, &frontier, cost.key(), score.key()),
    )?;
    write_file(&args.out.join("calibration.csv"), &report::calibration_csv(&points))?;
    write_text(&args.out.join("calibration.svg"), &svg::calibration_plot(&points))?;
    for &i in &frontier {
        println!("{}\t{}\t{}", points[i].model, points[i].cost, points[i].score);
    }
    Ok(exit::OK)
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Transform(a) => transform(a),
        Command::Train(a) => train_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Compare(a) => compare(a),
        Command::Pareto(a) => pareto(a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

