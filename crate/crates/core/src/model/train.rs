use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::SurvivalLabel;
use crate::error::{Error, Result};
use crate::membank::MemoryBank;
use crate::metrics::{c_index, SurvPoint};
use crate::rng::substream;
use crate::survival::{risk_score, sample_nll, HazardOutput};

use super::forward::{backward, forward, modality_summaries, PreparedRecord};
use super::{Missing, ModelParams, TrainConfig};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Array2<f64>> = params.tensors().iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        Adam {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (lr, wd, b1, b2, eps) = (self.lr, self.weight_decay, self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                *p -= lr * (update + wd * *p);
            });
        }
    }
}

/// Parameters, optimizer and memory bank for one training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam: Adam,
    pub bank: MemoryBank,
    pub config: TrainConfig,
    pub epochs_done: usize,
}

impl TrainState {
    pub fn new(d: usize, bins: usize, gene_lens: &[usize], config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(d, bins, gene_lens, config);
        let adam = Adam::new(&params, config.lr, config.weight_decay);
        Ok(TrainState {
            params,
            adam,
            bank: MemoryBank::new(d, config.theta)?,
            config: config.clone(),
            epochs_done: 0,
        })
    }
}

/// One pass over `records` in a seeded shuffled order, one optimizer step
/// per patient followed by its bank update. Returns the mean loss.
pub fn train_epoch(state: &mut TrainState, records: &[PreparedRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(r) = records.iter().find(|r| !r.is_complete()) {
        return Err(Error::IncompleteTrainingRecord(r.patient_id.clone()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = substream(state.config.seed, "shuffle", state.epochs_done as u64);
    order.shuffle(&mut rng);

    let mut total = 0.0;
    for i in order {
        let record = &records[i];
        let pass = forward(&state.params, record, &state.config, None)?;
        let (loss, dlogits) = sample_nll(&pass.output, &record.label)?;
        let grads = backward(&state.params, record, &pass, &dlogits)?;
        state.adam.step(&mut state.params, &grads);
        total += loss;

        let (path, gene) = modality_summaries(&state.params, record)?;
        let (path, gene) = (path.expect("complete record"), gene.expect("complete record"));
        state.bank.update(
            &record.patient_id,
            path.as_slice().expect("contiguous"),
            gene.as_slice().expect("contiguous"),
        )?;
    }
    state.epochs_done += 1;
    Ok(total / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub patient_ids: Vec<String>,
    pub risks: Vec<f64>,
    pub outputs: Vec<HazardOutput>,
    pub labels: Vec<SurvivalLabel>,
    pub c_index: f64,
}

impl Evaluation {
    pub fn points(&self) -> Vec<SurvPoint> {
        self.labels
            .iter()
            .zip(&self.risks)
            .map(|(l, r)| SurvPoint {
                time: l.time,
                event: l.censor.is_event(),
                risk: *r,
            })
            .collect()
    }
}

/// Risks for every record with `missing` withheld, evaluated in parallel.
pub fn evaluate(
    params: &ModelParams,
    records: &[PreparedRecord],
    config: &TrainConfig,
    bank: Option<&MemoryBank>,
    missing: Missing,
) -> Result<Evaluation> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let outputs = records
        .par_iter()
        .map(|r| forward(params, &r.withhold(missing), config, bank).map(|p| p.output))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = outputs.iter().map(risk_score).collect();
    let mut eval = Evaluation {
        patient_ids: records.iter().map(|r| r.patient_id.clone()).collect(),
        risks,
        outputs,
        labels: records.iter().map(|r| r.label).collect(),
        c_index: 0.0,
    };
    eval.c_index = c_index(&eval.points())?;
    Ok(eval)
}
