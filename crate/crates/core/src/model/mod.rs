//! End-to-end pipeline: genomic encoder, multi-slide hypergraph stack,
//! gene-attentive hypergraph stack, pooling and the discrete hazard head.

mod checkpoint;
mod forward;
mod train;

pub use checkpoint::Checkpoint;
pub use forward::{backward, forward, modality_summaries, prepare, ForwardPass, PreparedRecord};
pub use train::{evaluate, train_epoch, Adam, Evaluation, TrainState};

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::attention::AttnParams;
use crate::datamodel::DEFAULT_BINS;
use crate::error::{Error, Result};
use crate::hgcore::ConvLayerParams;
use crate::hyperedges::{DEFAULT_BETA_FRACTION, DEFAULT_LAMBDA};
use crate::membank::{DEFAULT_MU, DEFAULT_THETA};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    #[value(name = "intra")]
    #[serde(rename = "intra")]
    IntraOnly,
    #[value(name = "inter")]
    #[serde(rename = "inter")]
    InterOnly,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum FusionMode {
    /// Gene-attentive hyperedges chosen by cross-attention.
    #[value(name = "hga")]
    #[serde(rename = "hga")]
    HypergraphAttn,
    /// Gene edges to uniformly sampled patches.
    #[value(name = "random")]
    #[serde(rename = "random")]
    RandomEdges,
    /// No gene-attentive stage; pooled features are concatenated.
    #[value(name = "concat")]
    #[serde(rename = "concat")]
    ConcatBaseline,
}

/// Which modality to withhold at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Missing {
    None,
    Path,
    Gene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub lambda: usize,
    pub beta_fraction: f64,
    pub seed: u64,
    pub bins: usize,
    pub edge_mode: EdgeMode,
    pub fusion_mode: FusionMode,
    pub theta: f64,
    pub mu: usize,
    pub max_patches: usize,
    pub multi_slide_layers: usize,
    pub gene_attn_layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            weight_decay: 1e-5,
            epochs: 30,
            lambda: DEFAULT_LAMBDA,
            beta_fraction: DEFAULT_BETA_FRACTION,
            seed: 0,
            bins: DEFAULT_BINS,
            edge_mode: EdgeMode::Both,
            fusion_mode: FusionMode::HypergraphAttn,
            theta: DEFAULT_THETA,
            mu: DEFAULT_MU,
            max_patches: 64,
            multi_slide_layers: 2,
            gene_attn_layers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be nonnegative, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be nonnegative, got {}", self.weight_decay));
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.lambda < 1 {
            return bad("lambda must be at least 1".into());
        }
        if !(self.beta_fraction > 0.0 && self.beta_fraction <= 1.0) {
            return bad(format!("beta fraction must lie in (0, 1], got {}", self.beta_fraction));
        }
        if self.bins < 2 {
            return bad(format!("need at least 2 bins, got {}", self.bins));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("momentum must lie in [0, 1], got {}", self.theta));
        }
        if self.mu < 1 || self.max_patches < 1 {
            return bad("mu and max patches must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-group MLP `raw → d → d` with one leaky-rectified hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneEncoder {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub bins: usize,
    pub gene_encoders: Vec<GeneEncoder>,
    pub adapter_w: Array2<f64>,
    pub adapter_b: Array2<f64>,
    pub attn: AttnParams,
    pub multi_slide_layers: Vec<ConvLayerParams>,
    pub gene_attn_layers: Vec<ConvLayerParams>,
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

impl ModelParams {
    /// Seeded symmetric-uniform initialization; biases start at zero.
    pub fn init(d: usize, bins: usize, gene_lens: &[usize], config: &TrainConfig) -> Self {
        let mut rng = substream(config.seed, "init", 0);
        let gene_encoders = gene_lens
            .iter()
            .map(|r| GeneEncoder {
                w1: glorot(&mut rng, *r, d),
                b1: Array2::zeros((1, d)),
                w2: glorot(&mut rng, d, d),
                b2: Array2::zeros((1, d)),
            })
            .collect();
        let adapter_w = glorot(&mut rng, d, d);
        let attn = AttnParams {
            wq: glorot(&mut rng, d, d),
            wk: glorot(&mut rng, d, d),
        };
        let conv = |rng: &mut Rng| ConvLayerParams {
            theta: glorot(rng, d, d),
            use_nonlinearity: true,
        };
        let multi_slide_layers = (0..config.multi_slide_layers).map(|_| conv(&mut rng)).collect();
        let gene_attn_layers = (0..config.gene_attn_layers).map(|_| conv(&mut rng)).collect();
        ModelParams {
            d,
            bins,
            gene_encoders,
            adapter_w,
            adapter_b: Array2::zeros((1, d)),
            attn,
            multi_slide_layers,
            gene_attn_layers,
            head_w: glorot(&mut rng, 2 * d, bins),
            head_b: Array2::zeros((1, bins)),
        }
    }

    pub fn num_gene_groups(&self) -> usize {
        self.gene_encoders.len()
    }

    /// Every learnable tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for g in &self.gene_encoders {
            out.extend([&g.w1, &g.b1, &g.w2, &g.b2]);
        }
        out.extend([&self.adapter_w, &self.adapter_b, &self.attn.wq, &self.attn.wk]);
        out.extend(self.multi_slide_layers.iter().map(|l| &l.theta));
        out.extend(self.gene_attn_layers.iter().map(|l| &l.theta));
        out.extend([&self.head_w, &self.head_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for g in &mut self.gene_encoders {
            out.extend([&mut g.w1, &mut g.b1, &mut g.w2, &mut g.b2]);
        }
        out.extend([
            &mut self.adapter_w,
            &mut self.adapter_b,
            &mut self.attn.wq,
            &mut self.attn.wk,
        ]);
        out.extend(self.multi_slide_layers.iter_mut().map(|l| &mut l.theta));
        out.extend(self.gene_attn_layers.iter_mut().map(|l| &mut l.theta));
        out.extend([&mut self.head_w, &mut self.head_b]);
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for w in 0..self.gene_encoders.len() {
            for part in ["w1", "b1", "w2", "b2"] {
                out.push(format!("gene_encoder[{w}].{part}"));
            }
        }
        out.extend(["adapter.w", "adapter.b", "attn.wq", "attn.wk"].map(String::from));
        out.extend((0..self.multi_slide_layers.len()).map(|l| format!("multi_slide[{l}].theta")));
        out.extend((0..self.gene_attn_layers.len()).map(|l| format!("gene_attn[{l}].theta")));
        out.extend(["head.w", "head.b"].map(String::from));
        out
    }

    /// Same shapes, all zeros. Used as the gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}
