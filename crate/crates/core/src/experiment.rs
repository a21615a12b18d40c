//! Cross-validated training runs and the ablation grid.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::Cohort;
use crate::error::{Error, Result};
use crate::model::{evaluate, prepare, train_epoch, Evaluation, Missing, PreparedRecord, TrainConfig, TrainState};
use crate::model::{EdgeMode, FusionMode};

pub const ABLATION_LAMBDAS: [usize; 3] = [5, 9, 25];
pub const ABLATION_EDGE_MODES: [EdgeMode; 3] = [EdgeMode::IntraOnly, EdgeMode::InterOnly, EdgeMode::Both];
pub const ABLATION_FUSION_MODES: [FusionMode; 3] =
    [FusionMode::HypergraphAttn, FusionMode::RandomEdges, FusionMode::ConcatBaseline];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: f64::NAN, std: f64::NAN };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

/// Raw lengths of the gene groups, taken from the first record with genomics.
pub fn gene_lengths(cohort: &Cohort) -> Result<(Vec<usize>, Vec<String>)> {
    let genes = cohort
        .patients
        .iter()
        .find_map(|p| p.genes.as_ref())
        .ok_or_else(|| Error::InvalidArgument("cohort has no genomic records".into()))?;
    Ok((genes.groups.iter().map(Vec::len).collect(), genes.group_names.clone()))
}

pub fn prepare_all(cohort: &Cohort, config: &TrainConfig) -> Result<Vec<PreparedRecord>> {
    cohort.patients.par_iter().map(|p| prepare(p, config)).collect()
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub state: TrainState,
    pub epoch_losses: Vec<f64>,
    pub validation: Evaluation,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

fn select(records: &[PreparedRecord], idx: &[usize]) -> Vec<PreparedRecord> {
    idx.iter().map(|i| records[*i].clone()).collect()
}

/// Train on every fold but `fold`, then evaluate the held-out fold.
pub fn run_fold(
    cohort: &Cohort,
    prepared: &[PreparedRecord],
    fold: usize,
    config: &TrainConfig,
    missing: Missing,
) -> Result<FoldRun> {
    let (train_idx, val_idx) = cohort.split(fold);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::InvalidArgument(format!("fold {fold} leaves an empty split")));
    }
    let train = select(prepared, &train_idx);
    let val = select(prepared, &val_idx);
    let (gene_lens, _) = gene_lengths(cohort)?;

    let start = Instant::now();
    let mut state = TrainState::new(cohort.d, cohort.num_bins(), &gene_lens, config)?;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        epoch_losses.push(train_epoch(&mut state, &train)?);
    }
    let train_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let validation = evaluate(&state.params, &val, config, Some(&state.bank), missing)?;
    Ok(FoldRun {
        fold,
        state,
        epoch_losses,
        validation,
        train_seconds,
        eval_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct CvRun {
    pub cohort: Cohort,
    pub folds: Vec<FoldRun>,
    pub c_index: MeanStd,
    pub prepare_seconds: f64,
}

impl CvRun {
    pub fn fold_c_indices(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.validation.c_index).collect()
    }
}

/// Rebin and refold `cohort` when its stored bins or folds differ from
/// what the run asks for. Training and evaluation both go through this so
/// they see the same splits.
pub fn align_cohort(cohort: &Cohort, config: &TrainConfig, num_folds: usize) -> Result<Cohort> {
    let mut cohort = cohort.clone();
    if cohort.num_bins() != config.bins {
        cohort.rebin(config.bins)?;
    }
    if cohort.num_folds != num_folds || cohort.folds.len() != cohort.patients.len() {
        cohort.assign_folds(num_folds, config.seed)?;
    }
    Ok(cohort)
}

/// Out-of-fold survival points from every fold's validation set.
pub fn pooled_points(folds: &[FoldRun]) -> Vec<crate::metrics::SurvPoint> {
    folds.iter().flat_map(|f| f.validation.points()).collect()
}

/// Full k-fold run. Folds come from the cohort unless `num_folds` differs,
/// in which case they are reassigned from the config seed.
pub fn cross_validate(cohort: &Cohort, config: &TrainConfig, num_folds: usize, missing: Missing) -> Result<CvRun> {
    config.validate()?;
    let cohort = align_cohort(cohort, config, num_folds)?;
    let start = Instant::now();
    let prepared = prepare_all(&cohort, config)?;
    let prepare_seconds = start.elapsed().as_secs_f64();
    let folds = (0..num_folds)
        .into_par_iter()
        .map(|f| run_fold(&cohort, &prepared, f, config, missing))
        .collect::<Result<Vec<_>>>()?;
    let c: Vec<f64> = folds.iter().map(|f| f.validation.c_index).collect();
    Ok(CvRun {
        c_index: mean_std(&c),
        cohort,
        folds,
        prepare_seconds,
    })
}

/// Every (λ, edge mode, fusion mode) cell applied to `base`.
pub fn ablation_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for lambda in ABLATION_LAMBDAS {
        for edge_mode in ABLATION_EDGE_MODES {
            for fusion_mode in ABLATION_FUSION_MODES {
                out.push(TrainConfig {
                    lambda,
                    edge_mode,
                    fusion_mode,
                    ..base.clone()
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_27_distinct_cells() {
        let grid = ablation_grid(&TrainConfig::default());
        assert_eq!(grid.len(), 27);
        let mut keys: Vec<_> = grid.iter().map(|c| (c.lambda, c.edge_mode, c.fusion_mode)).collect();
        keys.sort_by_key(|k| format!("{k:?}"));
        keys.dedup();
        assert_eq!(keys.len(), 27);
    }

    #[test]
    fn population_std() {
        let m = mean_std(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
    }
}
