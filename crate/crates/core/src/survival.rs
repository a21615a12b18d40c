//! Discrete-time hazard head and the censored negative log-likelihood.
//!
//! For a label in bin `t`:
//! - event: `−log h(t) − log S(t−1)` with `S(−1) = 1`
//! - censored: `−log S(t)`
//!
//! where `h = sigmoid(logit)` clamped to `[ε, 1 − ε]` and `S(t) = Π_{τ≤t}(1 − h(τ))`.

use serde::{Deserialize, Serialize};

use crate::datamodel::SurvivalLabel;
use crate::error::{Error, Result};

pub const HAZARD_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardOutput {
    pub hazards: Vec<f64>,
    pub survival: Vec<f64>,
    pub risk: f64,
}

impl HazardOutput {
    pub fn num_bins(&self) -> usize {
        self.hazards.len()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn clamp_hazard(h: f64) -> f64 {
    h.clamp(HAZARD_EPS, 1.0 - HAZARD_EPS)
}

pub fn from_hazards(hazards: Vec<f64>) -> HazardOutput {
    let mut survival = Vec::with_capacity(hazards.len());
    let mut s = 1.0;
    for h in &hazards {
        s *= 1.0 - h;
        survival.push(s);
    }
    let risk = -survival.iter().sum::<f64>();
    HazardOutput {
        hazards,
        survival,
        risk,
    }
}

pub fn hazards_from_logits(logits: &[f64]) -> HazardOutput {
    from_hazards(logits.iter().map(|l| clamp_hazard(sigmoid(*l))).collect())
}

pub fn risk_score(output: &HazardOutput) -> f64 {
    -output.survival.iter().sum::<f64>()
}

/// Loss for one sample and its gradient with respect to the logits.
pub fn sample_nll(output: &HazardOutput, label: &SurvivalLabel) -> Result<(f64, Vec<f64>)> {
    let b = output.num_bins();
    if label.bin >= b {
        return Err(Error::InvalidArgument(format!(
            "label bin {} out of range for {b} bins",
            label.bin
        )));
    }
    let t = label.bin;
    let mut loss = 0.0;
    let mut grad = vec![0.0; b];
    // Clamped hazards have zero derivative with respect to the logit.
    let live = |tau: usize| {
        let h = output.hazards[tau];
        h > HAZARD_EPS && h < 1.0 - HAZARD_EPS
    };
    // survival terms: −log(1 − h) has logit derivative h
    let survived_through = if label.censor.is_event() { t } else { t + 1 };
    for tau in 0..survived_through {
        let h = output.hazards[tau];
        loss -= (1.0 - h).ln();
        if live(tau) {
            grad[tau] += h;
        }
    }
    if label.censor.is_event() {
        let h = output.hazards[t];
        loss -= h.ln();
        if live(t) {
            grad[t] -= 1.0 - h;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub loss: f64,
    pub per_sample: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// Summed NLL over a batch, with per-sample logit gradients.
pub fn nll_loss(outputs: &[HazardOutput], labels: &[SurvivalLabel]) -> Result<LossResult> {
    if outputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if outputs.len() != labels.len() {
        return Err(Error::DimensionMismatch("outputs and labels differ in length".into()));
    }
    let mut per_sample = Vec::with_capacity(outputs.len());
    let mut grads = Vec::with_capacity(outputs.len());
    for (o, y) in outputs.iter().zip(labels) {
        let (loss, g) = sample_nll(o, y)?;
        per_sample.push(loss);
        grads.push(g);
    }
    let loss = per_sample.iter().sum();
    Ok(LossResult {
        loss,
        per_sample,
        grads,
    })
}
