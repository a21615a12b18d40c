//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 for invalid arguments or inputs, 2 for runtime failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attention::{heatmap_csv, heatmap_export};
use crate::error::{Error, Result};
use crate::experiment::{
    ablation_grid, align_cohort, cross_validate, gene_lengths, mean_std, pooled_points, CvRun, MeanStd,
};
use crate::io::{read_cohort, write_cohort};
use crate::membank::MemoryBank;
use crate::metrics::{km_csv, km_curve, logrank_test, median, stratify_median, SurvPoint};
use crate::model::{evaluate, forward, prepare, Checkpoint, EdgeMode, FusionMode, Missing, TrainConfig};
use crate::synth::{generate, SynthConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const BANK_FILE: &str = "bank.txt";

#[derive(Debug, Parser)]
#[command(name = "hgsurv", version, about = "Hypergraph multimodal survival analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort with a planted risk signal.
    Generate(GenerateArgs),
    /// Cross-validated training; saves a checkpoint and bank per fold.
    Train(TrainArgs),
    /// Re-evaluate a training run, optionally withholding a modality.
    Eval(EvalArgs),
    /// Train every cell of the λ × edge mode × fusion mode grid.
    Ablate(AblateArgs),
    /// Export gene-to-patch attention weights for one patient.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gene_groups: Option<usize>,
    #[arg(long)]
    pub signal: Option<f64>,
    #[arg(long)]
    pub censor_rate: Option<f64>,
    #[arg(long)]
    pub patches: Option<usize>,
    #[arg(long)]
    pub min_slides: Option<usize>,
    #[arg(long)]
    pub max_slides: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
}

/// Training hyperparameters. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// TOML file with any subset of the training config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    #[arg(long)]
    pub lambda: Option<usize>,
    #[arg(long)]
    pub beta_frac: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_enum)]
    pub edge_mode: Option<EdgeMode>,
    #[arg(long, value_enum)]
    pub fusion: Option<FusionMode>,
    #[arg(long)]
    pub max_patches: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub mu: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str::<TrainConfig>(&text)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        take!(seed => seed, epochs => epochs, lr => lr, wd => weight_decay, lambda => lambda,
              beta_frac => beta_fraction, bins => bins, edge_mode => edge_mode, fusion => fusion_mode,
              max_patches => max_patches, theta => theta, mu => mu);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Modality withheld when scoring the held-out folds.
    #[arg(long, value_enum, default_value_t = Missing::None)]
    pub missing: Missing,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    /// Output directory of a previous `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_enum, default_value_t = Missing::None)]
    pub missing: Missing,
    /// Write Kaplan–Meier tables for the median risk split here.
    #[arg(long)]
    pub km_export: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub patient: String,
    /// Checkpoint to use; defaults to the fold holding the patient out.
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub c_index: f64,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub threshold: f64,
    pub n_high: usize,
    pub n_low: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub prepare_seconds: f64,
    pub fold_train_seconds: Vec<f64>,
    pub fold_eval_seconds: Vec<f64>,
    pub total_seconds: f64,
}

/// Result of `train` or `eval`. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: TrainConfig,
    pub seed: u64,
    pub num_folds: usize,
    pub missing: Missing,
    pub folds: Vec<FoldRow>,
    pub c_index: MeanStd,
    pub stratification: Option<Stratification>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub lambda: usize,
    pub edge_mode: EdgeMode,
    pub fusion_mode: FusionMode,
    pub config: TrainConfig,
    pub fold_c_index: Vec<f64>,
    pub c_index: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTiming {
    pub row_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub num_folds: usize,
    pub rows: Vec<AblationRow>,
    pub timing: AblationTiming,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn fold_dir(run: &Path, fold: usize) -> PathBuf {
    run.join(format!("fold_{fold}"))
}

fn stratify(points: &[SurvPoint]) -> Option<(Stratification, Vec<SurvPoint>, Vec<SurvPoint>)> {
    let (high, low) = stratify_median(points).ok()?;
    let lr = logrank_test(&high, &low).ok()?;
    let threshold = median(&points.iter().map(|p| p.risk).collect::<Vec<_>>());
    let s = Stratification {
        threshold,
        n_high: high.len(),
        n_low: low.len(),
        statistic: lr.statistic,
        p_value: lr.p_value,
    };
    Some((s, high, low))
}

fn risks_csv(rows: &[(String, usize, f64, SurvPoint)]) -> String {
    let mut out = String::from("patient_id,fold,risk,time_months,event\n");
    for (id, fold, risk, p) in rows {
        let _ = writeln!(out, "{id},{fold},{risk},{},{}", p.time, u8::from(p.event));
    }
    out
}

fn cmd_generate(args: &GenerateArgs) -> Result<String> {
    let mut c = SynthConfig {
        n_patients: args.n,
        seed: args.seed,
        ..Default::default()
    };
    macro_rules! take {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag { c.$field = v; })*
        };
    }
    take!(d => d, gene_groups => num_gene_groups, signal => signal_strength, censor_rate => censor_rate,
          patches => patches_per_slide, min_slides => min_slides, max_slides => max_slides,
          bins => bins, folds => folds);
    let synth = generate(&c)?;
    write_cohort(&synth.cohort, &args.out)?;
    let events = synth.cohort.patients.iter().filter(|p| p.label.censor.is_event()).count();
    Ok(format!(
        "wrote {} patients ({events} events) to {}",
        synth.cohort.patients.len(),
        args.out.display()
    ))
}

fn fold_rows(run: &CvRun) -> Vec<FoldRow> {
    run.folds
        .iter()
        .map(|f| {
            let (train, val) = run.cohort.split(f.fold);
            FoldRow {
                fold: f.fold,
                n_train: train.len(),
                n_val: val.len(),
                c_index: f.validation.c_index,
                final_loss: f.epoch_losses.last().copied(),
            }
        })
        .collect()
}

fn cmd_train(args: &TrainArgs) -> Result<String> {
    let start = Instant::now();
    let config = args.config.resolve()?;
    let cohort = read_cohort(&args.cohort)?;
    let (_, gene_names) = gene_lengths(&cohort)?;
    let run = cross_validate(&cohort, &config, args.folds, args.missing)?;

    create_dir(&args.out)?;
    let mut oof = Vec::new();
    for f in &run.folds {
        let dir = fold_dir(&args.out, f.fold);
        create_dir(&dir)?;
        Checkpoint::new(f.state.params.clone(), config.clone(), gene_names.clone()).save(&dir.join(CHECKPOINT_FILE))?;
        f.state.bank.save(&dir.join(BANK_FILE))?;
        let rows: Vec<_> = f
            .validation
            .patient_ids
            .iter()
            .zip(f.validation.points())
            .map(|(id, p)| (id.clone(), f.fold, p.risk, p))
            .collect();
        fs::write(dir.join("risks.csv"), risks_csv(&rows)).map_err(|e| Error::io(&dir, e))?;
        oof.extend(rows);
    }
    fs::write(args.out.join("oof_risks.csv"), risks_csv(&oof)).map_err(|e| Error::io(&args.out, e))?;

    let manifest = RunManifest {
        command: "train".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        config,
        num_folds: args.folds,
        missing: args.missing,
        folds: fold_rows(&run),
        c_index: run.c_index,
        stratification: stratify(&pooled_points(&run.folds)).map(|s| s.0),
        timing: Timing {
            prepare_seconds: run.prepare_seconds,
            fold_train_seconds: run.folds.iter().map(|f| f.train_seconds).collect(),
            fold_eval_seconds: run.folds.iter().map(|f| f.eval_seconds).collect(),
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    Ok(format!(
        "{}-fold C-index {:.4} ± {:.4}; run saved to {}",
        args.folds,
        manifest.c_index.mean,
        manifest.c_index.std,
        args.out.display()
    ))
}

fn load_run_manifest(run: &Path) -> Result<RunManifest> {
    let path = run.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let start = Instant::now();
    let trained = load_run_manifest(&args.run)?;
    let config = trained.config.clone();
    let cohort = align_cohort(&read_cohort(&args.cohort)?, &config, trained.num_folds)?;

    let prep_start = Instant::now();
    let prepared = crate::experiment::prepare_all(&cohort, &config)?;
    let prepare_seconds = prep_start.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    let mut eval_seconds = Vec::new();
    let mut points = Vec::new();
    for fold in 0..trained.num_folds {
        let dir = fold_dir(&args.run, fold);
        let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
        ck.check_shape(cohort.d, cohort.num_bins())?;
        let bank = MemoryBank::load(&dir.join(BANK_FILE))?;
        let (train_idx, val_idx) = cohort.split(fold);
        let val: Vec<_> = val_idx.iter().map(|i| prepared[*i].clone()).collect();
        let t = Instant::now();
        let e = evaluate(&ck.params, &val, &config, Some(&bank), args.missing)?;
        eval_seconds.push(t.elapsed().as_secs_f64());
        points.extend(e.points());
        rows.push(FoldRow {
            fold,
            n_train: train_idx.len(),
            n_val: val_idx.len(),
            c_index: e.c_index,
            final_loss: None,
        });
    }
    let strat = stratify(&points);
    if let Some(path) = &args.km_export {
        let (_, high, low) = strat
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("risk split is degenerate; no KM export".into()))?;
        let text = km_csv(&[("high", &km_curve(high)), ("low", &km_curve(low))]);
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    create_dir(&args.out)?;
    let c: Vec<f64> = rows.iter().map(|r| r.c_index).collect();
    let manifest = RunManifest {
        command: "eval".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        config,
        num_folds: trained.num_folds,
        missing: args.missing,
        folds: rows,
        c_index: mean_std(&c),
        stratification: strat.map(|s| s.0),
        timing: Timing {
            prepare_seconds,
            fold_train_seconds: Vec::new(),
            fold_eval_seconds: eval_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    let p = manifest
        .stratification
        .as_ref()
        .map_or_else(|| "n/a".to_string(), |s| format!("{:.3e}", s.p_value));
    Ok(format!(
        "C-index {:.4} ± {:.4} (missing={:?}), median-split log-rank p={p}",
        manifest.c_index.mean, manifest.c_index.std, args.missing
    ))
}

fn cmd_ablate(args: &AblateArgs) -> Result<String> {
    let start = Instant::now();
    let base = args.config.resolve()?;
    let cohort = read_cohort(&args.cohort)?;
    let mut rows = Vec::new();
    let mut row_seconds = Vec::new();
    let mut table = String::from("lambda,edge_mode,fusion_mode,c_index_mean,c_index_std\n");
    for cell in ablation_grid(&base) {
        let t = Instant::now();
        let run = cross_validate(&cohort, &cell, args.folds, Missing::None)?;
        row_seconds.push(t.elapsed().as_secs_f64());
        let edge = serde_json::to_value(cell.edge_mode)?;
        let fusion = serde_json::to_value(cell.fusion_mode)?;
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            cell.lambda,
            edge.as_str().unwrap_or_default(),
            fusion.as_str().unwrap_or_default(),
            run.c_index.mean,
            run.c_index.std
        );
        rows.push(AblationRow {
            lambda: cell.lambda,
            edge_mode: cell.edge_mode,
            fusion_mode: cell.fusion_mode,
            fold_c_index: run.fold_c_indices(),
            c_index: run.c_index,
            config: cell,
        });
    }
    create_dir(&args.out)?;
    fs::write(args.out.join("ablation.csv"), table).map_err(|e| Error::io(&args.out, e))?;
    let manifest = AblationManifest {
        command: "ablate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: base.seed,
        num_folds: args.folds,
        rows,
        timing: AblationTiming {
            row_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    Ok(format!("{} ablation cells written to {}", manifest.rows.len(), args.out.display()))
}

fn cmd_heatmap(args: &HeatmapArgs) -> Result<String> {
    let trained = load_run_manifest(&args.run)?;
    let config = trained.config.clone();
    let cohort = align_cohort(&read_cohort(&args.cohort)?, &config, trained.num_folds)?;
    let idx = cohort
        .patients
        .iter()
        .position(|p| p.patient_id == args.patient)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown patient {}", args.patient)))?;
    let fold = args.fold.unwrap_or(cohort.folds[idx]);
    if fold >= trained.num_folds {
        return Err(Error::InvalidArgument(format!("fold {fold} out of range")));
    }
    let dir = fold_dir(&args.run, fold);
    let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    ck.check_shape(cohort.d, cohort.num_bins())?;
    let record = prepare(&cohort.patients[idx], &config)?;
    if !record.is_complete() {
        return Err(Error::InvalidArgument("heatmaps need both modalities".into()));
    }
    let pass = forward(&ck.params, &record, &config, None)?;
    let scores = pass
        .attention_scores
        .ok_or_else(|| Error::InvalidArgument("run did not use attention fusion".into()))?;
    let rows = heatmap_export(scores.view(), &record.coords, &record.gene_names)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&args.out, heatmap_csv(&rows)).map_err(|e| Error::io(&args.out, e))?;
    Ok(format!("{} heatmap rows written to {}", rows.len(), args.out.display()))
}

pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Heatmap(a) => cmd_heatmap(a),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
