use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use irrobust_core::corruption::is_image_path;
use irrobust_core::dataset::BuildOptions;
use irrobust_core::eval::{discover_corrupted_sets, EvalConfig, Interpolation, SetKey};
use irrobust_core::report::{
    load_results_dir, parse_lambda_label, severity_curves, Aggregation, CellRounding, MethodRuns, TableOptions,
};
use irrobust_core::weight_ensemble::{merge_to_file, parse_lambda_grid};
use irrobust_core::{
    corrupt_encoded, derive_seed, lambda_sweep, load_checkpoint, CorruptionKind, CorruptionSpec, Error, FrostOverlays,
    ImageBuffer, MergePolicy, MismatchPolicy, MissingKeyPolicy, Severity,
};
use rayon::prelude::*;

use crate::config::GlobalConfig;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt individual images or a directory of images.
    Corrupt(CorruptArgs),
    /// Build a corrupted benchmark tree from a COCO test set.
    BuildBench(BuildBenchArgs),
    /// Interpolate two checkpoints: (1-λ)·base + λ·tuned.
    Merge(MergeArgs),
    /// Write one merged checkpoint per λ in a grid.
    Sweep(SweepArgs),
    /// Compute AP50, per-corruption AP50 and mPC.
    Eval(EvalArgs),
    /// Render tables and severity curves from evaluation results.
    Report(ReportArgs),
}

pub fn dispatch(cmd: Command, cfg: &GlobalConfig) -> Result<()> {
    match cmd {
        Command::Corrupt(a) => corrupt(a, cfg),
        Command::BuildBench(a) => build_bench(a, cfg),
        Command::Merge(a) => merge(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    }
}

fn domain(msg: impl Into<String>) -> anyhow::Error {
    Error::Domain(msg.into()).into()
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Image file or directory of images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma list of kinds, or `all`.
    #[arg(long, default_value = "all")]
    kinds: String,
    /// Range `1-5` or comma list.
    #[arg(long, default_value = "1-5")]
    severities: String,
    /// Directory of frost photographs replacing the procedural texture.
    #[arg(long)]
    frost_dir: Option<PathBuf>,
}

fn corrupt(a: CorruptArgs, cfg: &GlobalConfig) -> Result<()> {
    let kinds = CorruptionKind::parse_list(&a.kinds)?;
    let severities = Severity::parse_list(&a.severities)?;
    let schedule = cfg.load_schedule()?;
    schedule.validate()?;
    let overlays = a.frost_dir.as_deref().map(FrostOverlays::load_dir).transpose()?;

    let inputs: Vec<PathBuf> = if a.input.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(&a.input)
            .with_context(|| format!("listing {}", a.input.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_path(p))
            .collect();
        v.sort();
        v
    } else {
        vec![a.input.clone()]
    };
    if inputs.is_empty() {
        return Err(domain(format!("no images found in {}", a.input.display())));
    }
    let jobs: Vec<(CorruptionKind, Severity)> =
        kinds.iter().flat_map(|&k| severities.iter().map(move |&s| (k, s))).collect();
    let written: usize = inputs
        .par_iter()
        .map(|path| -> Result<usize> {
            let img = ImageBuffer::open(path)?;
            let name = path.file_name().and_then(|n| n.to_str()).context("non UTF-8 file name")?;
            jobs.par_iter()
                .map(|&(kind, severity)| -> Result<usize> {
                    let spec = CorruptionSpec {
                        kind,
                        severity,
                        seed: derive_seed(cfg.seed, name, kind, severity.get()),
                    };
                    let (bytes, _) = corrupt_encoded(&img, &spec, &schedule, overlays.as_ref())
                        .with_context(|| format!("{} with {kind} severity {severity}", path.display()))?;
                    let dir = a.out.join(kind.name()).join(format!("severity_{severity}"));
                    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    let dst = dir.join(name);
                    std::fs::write(&dst, bytes).with_context(|| format!("writing {}", dst.display()))?;
                    Ok(1)
                })
                .sum()
        })
        .sum::<Result<usize>>()?;
    log::info!("wrote {written} corrupted images under {}", a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildBenchArgs {
    #[arg(long)]
    images: PathBuf,
    /// COCO annotation file of the clean test set.
    #[arg(long)]
    ann: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "all")]
    kinds: String,
    #[arg(long, default_value = "1-5")]
    severities: String,
    /// Dataset family; selects the recommended severity cap.
    #[arg(long, default_value = "unnamed")]
    dataset: String,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    frost_dir: Option<PathBuf>,
    /// Reuse a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

fn build_bench(a: BuildBenchArgs, cfg: &GlobalConfig) -> Result<()> {
    let opts = BuildOptions {
        dataset_name: a.dataset,
        split: a.split,
        global_seed: cfg.seed,
        kinds: CorruptionKind::parse_list(&a.kinds)?,
        severities: Severity::parse_list(&a.severities)?,
        schedule: cfg.load_schedule()?,
        frost_overlays: a.frost_dir.as_deref().map(FrostOverlays::load_dir).transpose()?,
        overwrite: a.overwrite,
    };
    let m = irrobust_core::build_corrupted_set(&a.images, &a.ann, &a.out, &opts)?;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    log::info!(
        "built {} products for {} images in {}",
        m.products.len(),
        m.entries.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MismatchArg {
    Error,
    TakeTuned,
    TakeBase,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MissingArg {
    Error,
    TakePresent,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// What to do with floating tensors whose shapes differ.
    #[arg(long, value_enum, default_value = "take-tuned")]
    on_mismatch: MismatchArg,
    /// What to do with keys present in only one checkpoint.
    #[arg(long, value_enum, default_value = "take-present")]
    on_missing: MissingArg,
}

impl PolicyArgs {
    fn policy(&self, lambda: f64) -> Result<MergePolicy> {
        let mismatch = match self.on_mismatch {
            MismatchArg::Error => MismatchPolicy::Error,
            MismatchArg::TakeTuned => MismatchPolicy::TakeTuned,
            MismatchArg::TakeBase => MismatchPolicy::TakeBase,
        };
        let missing = match self.on_missing {
            MissingArg::Error => MissingKeyPolicy::Error,
            MissingArg::TakePresent => MissingKeyPolicy::TakePresent,
        };
        Ok(MergePolicy::new(lambda)?.with_mismatch(mismatch).with_missing(missing))
    }
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Zero-shot checkpoint (weight 1-λ).
    #[arg(long)]
    base: PathBuf,
    /// Adapted checkpoint (weight λ).
    #[arg(long)]
    tuned: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[command(flatten)]
    policy: PolicyArgs,
}

fn merge(a: MergeArgs) -> Result<()> {
    let policy = a.policy.policy(a.lambda)?;
    let base = load_checkpoint(&a.base)?;
    let tuned = load_checkpoint(&a.tuned)?;
    let report = merge_to_file(&base, &tuned, &policy, &a.out)?;
    log::info!(
        "merged {} tensors at λ={} into {}",
        report.interpolated_count,
        report.lambda,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    tuned: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// `start:stop:step` (inclusive) or a comma list.
    #[arg(long, default_value = "0:1:0.1")]
    lambdas: String,
    #[command(flatten)]
    policy: PolicyArgs,
}

fn sweep(a: SweepArgs) -> Result<()> {
    let lambdas = parse_lambda_grid(&a.lambdas)?;
    let template = a.policy.policy(0.5)?;
    let base = load_checkpoint(&a.base)?;
    let tuned = load_checkpoint(&a.tuned)?;
    let written = lambda_sweep(&base, &tuned, &lambdas, &a.out_dir, &template)?;
    log::info!("wrote {} checkpoints to {}", written.len(), a.out_dir.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InterpolationArg {
    Coco101,
    Voc11,
    AllPoint,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// COCO annotation file.
    #[arg(long)]
    gt: PathBuf,
    /// COCO results for the clean test set.
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Directory of `<kind>_severity_<s>.json` or `<kind>/severity_<s>.json` results.
    #[arg(long)]
    corrupted: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value = "coco101")]
    interpolation: InterpolationArg,
}

fn eval(a: EvalArgs) -> Result<()> {
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(domain(format!("IoU threshold {} must be in (0, 1]", a.iou)));
    }
    let mut sets = BTreeMap::new();
    if let Some(c) = a.clean {
        sets.insert(SetKey::Clean, c);
    }
    if let Some(dir) = &a.corrupted {
        let found = discover_corrupted_sets(dir)?;
        if found.is_empty() {
            return Err(domain(format!("no corrupted result files found in {}", dir.display())));
        }
        sets.extend(found);
    }
    if sets.is_empty() {
        return Err(domain("pass --clean and/or --corrupted"));
    }
    let cfg = EvalConfig {
        iou_threshold: a.iou,
        interpolation: match a.interpolation {
            InterpolationArg::Coco101 => Interpolation::Coco101,
            InterpolationArg::Voc11 => Interpolation::Voc11,
            InterpolationArg::AllPoint => Interpolation::AllPoint,
        },
    };
    let result = irrobust_core::evaluate_run(&a.gt, &sets, &cfg)?;
    let (json, _) = result.write(&a.out)?;
    match (result.ap50, result.mpc) {
        (Some(p), Some(m)) => log::info!("P = {:.2}, mPC = {:.2}", p * 100.0, m * 100.0),
        (Some(p), None) => log::info!("P = {:.2}", p * 100.0),
        (None, Some(m)) => log::info!("mPC = {:.2}", m * 100.0),
        (None, None) => {}
    }
    log::info!("results in {}", json.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportKind {
    Table,
    LambdaTable,
    Curves,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoundingArg {
    Truncate,
    Nearest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregationArg {
    Stddev,
    Range,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(value_enum)]
    kind: ReportKind,
    /// Directory of `<method>.json` files or `<method>/[<seed>/]eval.json` trees.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Severity to tabulate when results hold several.
    #[arg(long)]
    severity: Option<u8>,
    #[arg(long, value_enum, default_value = "truncate")]
    rounding: RoundingArg,
    /// Spread reported when a method has several runs.
    #[arg(long, value_enum, default_value = "stddev")]
    aggregation: AggregationArg,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report(a: ReportArgs) -> Result<()> {
    let methods = load_results_dir(&a.input)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let opts = TableOptions {
        severity: a.severity.map(Severity::new).transpose()?,
        aggregation: match a.aggregation {
            AggregationArg::Stddev => Aggregation::Stddev,
            AggregationArg::Range => Aggregation::Range,
        },
    };
    let rounding = match a.rounding {
        RoundingArg::Truncate => CellRounding::Truncate,
        RoundingArg::Nearest => CellRounding::Nearest,
    };
    let (table, stem) = match a.kind {
        ReportKind::Table => (irrobust_core::per_corruption_table(&methods, &opts)?, "table"),
        ReportKind::LambdaTable => {
            let mut rows: Vec<(f64, MethodRuns)> = Vec::new();
            for m in methods {
                let l = parse_lambda_label(&m.label)
                    .ok_or_else(|| domain(format!("cannot read λ from result name `{}`", m.label)))?;
                rows.push((l, m));
            }
            rows.sort_by(|x, y| x.0.total_cmp(&y.0));
            (irrobust_core::lambda_table(&rows, &opts)?, "lambda_table")
        }
        ReportKind::Curves => {
            let firsts: Vec<(String, irrobust_core::EvalResult)> = methods
                .into_iter()
                .map(|m| {
                    if m.runs.len() > 1 {
                        log::warn!("{}: plotting the first of {} runs", m.label, m.runs.len());
                    }
                    (m.label, m.runs.into_iter().next().expect("non-empty runs"))
                })
                .collect();
            let written = severity_curves(&firsts, &a.out)?;
            log::info!("wrote {} files to {}", written.len(), a.out.display());
            return Ok(());
        }
    };
    write(&a.out.join(format!("{stem}.csv")), &table.to_csv(rounding))?;
    write(&a.out.join(format!("{stem}_precise.csv")), &table.to_precise_csv())?;
    log::info!("wrote {stem}.csv and {stem}_precise.csv to {}", a.out.display());
    Ok(())
}
