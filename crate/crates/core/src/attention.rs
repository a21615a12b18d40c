//! Single-head scaled dot-product cross-attention scores between gene groups
//! and patches: `(G Wq)(P Wk)ᵀ / √d_k`.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
}

impl AttnParams {
    pub fn identity(d: usize) -> Self {
        AttnParams {
            wq: Array2::eye(d),
            wk: Array2::eye(d),
        }
    }

    pub fn key_dim(&self) -> usize {
        self.wq.ncols()
    }

    fn check(&self, genes: ArrayView2<f64>, patches: ArrayView2<f64>) -> Result<()> {
        if self.wq.dim() != self.wk.dim() {
            return Err(Error::DimensionMismatch("Wq and Wk shapes differ".into()));
        }
        if genes.ncols() != self.wq.nrows() || patches.ncols() != self.wk.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "gene width {} / patch width {} vs projection rows {}",
                genes.ncols(),
                patches.ncols(),
                self.wq.nrows()
            )));
        }
        Ok(())
    }
}

pub fn attn_scores(genes: ArrayView2<f64>, patches: ArrayView2<f64>, params: &AttnParams) -> Result<Array2<f64>> {
    params.check(genes, patches)?;
    let scale = 1.0 / (params.key_dim() as f64).sqrt();
    let q = genes.dot(&params.wq);
    let k = patches.dot(&params.wk);
    Ok(q.dot(&k.t()) * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnGrads {
    pub dgenes: Array2<f64>,
    pub dpatches: Array2<f64>,
    pub dwq: Array2<f64>,
    pub dwk: Array2<f64>,
}

pub fn attn_scores_backward(
    genes: ArrayView2<f64>,
    patches: ArrayView2<f64>,
    params: &AttnParams,
    dscores: ArrayView2<f64>,
) -> Result<AttnGrads> {
    params.check(genes, patches)?;
    if dscores.dim() != (genes.nrows(), patches.nrows()) {
        return Err(Error::DimensionMismatch("score gradient shape".into()));
    }
    let scale = 1.0 / (params.key_dim() as f64).sqrt();
    let q = genes.dot(&params.wq);
    let k = patches.dot(&params.wk);
    let dq = dscores.dot(&k) * scale;
    let dk = dscores.t().dot(&q) * scale;
    Ok(AttnGrads {
        dgenes: dq.dot(&params.wq.t()),
        dpatches: dk.dot(&params.wk.t()),
        dwq: genes.t().dot(&dq),
        dwk: patches.t().dot(&dk),
    })
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(scores: ArrayView2<f64>) -> Array2<f64> {
    let mut out = scores.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|s| (s - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub gene: String,
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

/// One row per (gene, patch) with the softmax-normalized attention weight.
pub fn heatmap_export(scores: ArrayView2<f64>, coords: &[(f64, f64)], gene_names: &[String]) -> Result<Vec<HeatmapRow>> {
    if scores.ncols() != coords.len() || scores.nrows() != gene_names.len() {
        return Err(Error::DimensionMismatch(format!(
            "scores {:?} vs {} genes and {} patches",
            scores.dim(),
            gene_names.len(),
            coords.len()
        )));
    }
    let weights = softmax_rows(scores);
    let mut rows = Vec::with_capacity(scores.len());
    for (w, name) in gene_names.iter().enumerate() {
        for (j, (x, y)) in coords.iter().enumerate() {
            rows.push(HeatmapRow {
                gene: name.clone(),
                x: *x,
                y: *y,
                weight: weights[[w, j]],
            });
        }
    }
    Ok(rows)
}

/// `gene,x,y,weight` table.
pub fn heatmap_csv(rows: &[HeatmapRow]) -> String {
    let mut out = String::from("gene,x,y,weight\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.gene, r.x, r.y, r.weight);
    }
    out
}
