//! Hyperedge builders: spatial (intra-slide) neighbourhoods, feature-similarity
//! (inter-slide) neighbourhoods, gene-attentive edges, and their union.
//!
//! Thresholds are rank based: each patch is grouped with its `λ − 1` nearest
//! (or most similar) patches. Ties always go to the lowest vertex index.

use std::cmp::Ordering;
use std::collections::HashSet;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::attention::{attn_scores, softmax_rows, AttnParams};
use crate::datamodel::Slide;
use crate::error::{Error, Result};
use crate::hgcore::{Hyperedge, Hypergraph};

pub const DEFAULT_LAMBDA: usize = 9;
pub const DEFAULT_BETA_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieRule {
    #[default]
    LowestIndexFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeBuildConfig {
    pub lambda: usize,
    pub beta_fraction: f64,
    pub tie_rule: TieRule,
}

impl Default for EdgeBuildConfig {
    fn default() -> Self {
        EdgeBuildConfig {
            lambda: DEFAULT_LAMBDA,
            beta_fraction: DEFAULT_BETA_FRACTION,
            tie_rule: TieRule::LowestIndexFirst,
        }
    }
}

impl EdgeBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 1 {
            return Err(Error::InvalidArgument("lambda must be at least 1".into()));
        }
        if !(self.beta_fraction > 0.0 && self.beta_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta fraction must lie in (0, 1], got {}",
                self.beta_fraction
            )));
        }
        Ok(())
    }
}

/// The `k` best candidates under `better` (a total order); result is unordered.
fn select_best<T: Copy>(mut candidates: Vec<T>, k: usize, better: impl Fn(&T, &T) -> Ordering) -> Vec<T> {
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, &better);
        candidates.truncate(k);
    }
    candidates
}

/// Indices of the `k` largest values; ties to the lowest index. Sorted by rank.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    let mut best = select_best((0..values.len()).collect(), k.min(values.len()), cmp);
    best.sort_by(cmp);
    best
}

fn knn_edges(n: usize, lambda: usize, key: impl Fn(usize, usize) -> f64, smaller_is_better: bool) -> Vec<Hyperedge> {
    let neighbours = lambda.saturating_sub(1);
    (0..n)
        .map(|center| {
            let candidates: Vec<(f64, usize)> = (0..n)
                .filter(|j| *j != center)
                .map(|j| (key(center, j), j))
                .collect();
            let best = select_best(candidates, neighbours, |a, b| {
                let by_key = if smaller_is_better {
                    a.0.total_cmp(&b.0)
                } else {
                    b.0.total_cmp(&a.0)
                };
                by_key.then(a.1.cmp(&b.1))
            });
            Hyperedge::unit(std::iter::once(center).chain(best.into_iter().map(|(_, j)| j)))
        })
        .collect()
}

/// One edge per patch: the patch plus its `λ − 1` spatially nearest patches
/// within the slide. Vertex ids are local to the slide.
pub fn intra_slide_edges(slide: &Slide, lambda: usize) -> Vec<Hyperedge> {
    let coords: Vec<(f64, f64)> = slide.patches.iter().map(|p| p.coord).collect();
    spatial_edges(&coords, lambda)
}

pub fn spatial_edges(coords: &[(f64, f64)], lambda: usize) -> Vec<Hyperedge> {
    knn_edges(
        coords.len(),
        lambda,
        |a, b| {
            let dx = coords[a].0 - coords[b].0;
            let dy = coords[a].1 - coords[b].1;
            dx * dx + dy * dy
        },
        true,
    )
}

/// Cosine similarity; zero-norm vectors are dissimilar (0) to everything.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na > 0.0 && nb > 0.0 {
        dot / (na * nb)
    } else {
        0.0
    }
}

/// One edge per patch: the patch plus its `λ − 1` most cosine-similar patches
/// over all slides (global ids).
pub fn inter_slide_edges(features: ArrayView2<f64>, lambda: usize) -> Vec<Hyperedge> {
    let n = features.nrows();
    let rows: Vec<Vec<f64>> = features.rows().into_iter().map(|r| r.to_vec()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    knn_edges(
        n,
        lambda,
        |a, b| {
            if norms[a] > 0.0 && norms[b] > 0.0 {
                let dot: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
                dot / (norms[a] * norms[b])
            } else {
                0.0
            }
        },
        false,
    )
}

pub fn offset_edges(edges: &[Hyperedge], offset: usize) -> Vec<Hyperedge> {
    edges
        .iter()
        .map(|e| Hyperedge::new(e.vertices.iter().map(|v| v + offset), e.weight))
        .collect()
}

/// Number of patches each gene edge keeps.
pub fn retained_count(beta_fraction: f64, num_patches: usize) -> Result<usize> {
    let k = (beta_fraction * num_patches as f64).ceil() as usize;
    if k == 0 {
        return Err(Error::EmptyGeneEdge {
            beta_fraction,
            num_patches,
        });
    }
    Ok(k.min(num_patches))
}

/// Gene-attentive edges over the joint vertex set: patches take ids `0..N`,
/// gene group `w` takes id `N + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneEdges {
    pub edges: Vec<Hyperedge>,
    /// Retained patch ids per gene, best first.
    pub retained: Vec<Vec<usize>>,
    pub scores: Array2<f64>,
    pub weights: Array2<f64>,
}

pub fn gene_attentive_edges(
    genes: ArrayView2<f64>,
    patches: ArrayView2<f64>,
    params: &AttnParams,
    beta_fraction: f64,
) -> Result<GeneEdges> {
    let n = patches.nrows();
    if genes.nrows() == 0 || n == 0 {
        return Err(Error::InvalidArgument("gene-attentive edges need genes and patches".into()));
    }
    let k = retained_count(beta_fraction, n)?;
    let scores = attn_scores(genes, patches, params)?;
    let weights = softmax_rows(scores.view());
    let mut retained = Vec::with_capacity(genes.nrows());
    let mut edges = Vec::with_capacity(genes.nrows());
    for (w, row) in weights.rows().into_iter().enumerate() {
        let keep = top_k_indices(row.as_slice().expect("standard layout"), k);
        edges.push(Hyperedge::unit(keep.iter().copied().chain(std::iter::once(n + w))));
        retained.push(keep);
    }
    Ok(GeneEdges {
        edges,
        retained,
        scores,
        weights,
    })
}

/// Feature-independent gene edges: each gene keeps `k` uniformly sampled patches.
pub fn random_gene_edges(num_genes: usize, num_patches: usize, k: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    (0..num_genes)
        .map(|_| {
            let mut picked = sample(rng, num_patches, k.min(num_patches)).into_vec();
            picked.sort_unstable();
            picked
        })
        .collect()
}

/// Union of edge lists; set-identical edges are kept once (first occurrence).
pub fn merge(num_vertices: usize, lists: &[&[Hyperedge]]) -> Result<Hypergraph> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut edges = Vec::new();
    for list in lists {
        for e in *list {
            if seen.insert(e.vertices.clone()) {
                edges.push(e.clone());
            }
        }
    }
    Hypergraph::new(num_vertices, edges)
}
