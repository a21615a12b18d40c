use ndarray::{s, Array1, Array2, Axis};

use crate::attention::softmax;
use crate::datamodel::{PatientRecord, SurvivalLabel};
use crate::error::{Error, Result};
use crate::hgcore::{
    leaky_relu, leaky_relu_grad, masked_row_mean, stack_backward_with, stack_forward_with, Hyperedge, Hypergraph,
    Propagator,
};
use crate::hyperedges::{
    gene_attentive_edges, inter_slide_edges, merge, offset_edges, random_gene_edges, retained_count, spatial_edges,
};
use crate::membank::{MemoryBank, Modality, Retrieval};
use crate::rng::{key_index, substream};
use crate::survival::{hazards_from_logits, HazardOutput};

use super::{EdgeMode, FusionMode, Missing, ModelParams, TrainConfig};

/// A patient with its parameter-independent structure precomputed:
/// subsampled patches, the multi-slide hypergraph and raw gene vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub patient_id: String,
    pub label: SurvivalLabel,
    pub patches: Option<Array2<f64>>,
    pub coords: Vec<(f64, f64)>,
    pub multi_slide: Option<Hypergraph>,
    pub genes: Option<Vec<Array2<f64>>>,
    pub gene_names: Vec<String>,
}

impl PreparedRecord {
    pub fn withhold(&self, missing: Missing) -> Self {
        let mut out = self.clone();
        match missing {
            Missing::None => {}
            Missing::Path => {
                out.patches = None;
                out.coords.clear();
                out.multi_slide = None;
            }
            Missing::Gene => {
                out.genes = None;
                out.gene_names.clear();
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        self.patches.is_some() && self.genes.is_some()
    }
}

pub fn prepare(record: &PatientRecord, config: &TrainConfig) -> Result<PreparedRecord> {
    let mut patches = None;
    let mut coords = Vec::new();
    let mut multi_slide = None;
    if record.has_pathology() {
        let mut rng = substream(config.seed, "subsample", key_index(&record.patient_id));
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut intra: Vec<Hyperedge> = Vec::new();
        for slide in &record.slides {
            let mut keep: Vec<usize> = (0..slide.patches.len()).collect();
            if keep.len() > config.max_patches {
                keep = rand::seq::index::sample(&mut rng, slide.patches.len(), config.max_patches).into_vec();
                keep.sort_unstable();
            }
            let slide_coords: Vec<(f64, f64)> = keep.iter().map(|i| slide.patches[*i].coord).collect();
            intra.extend(offset_edges(&spatial_edges(&slide_coords, config.lambda), rows.len()));
            for i in &keep {
                rows.push(slide.patches[*i].feature.clone());
            }
            coords.extend(slide_coords);
        }
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let x = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
            .map_err(|e| Error::DimensionMismatch(format!("patient {}: {e}", record.patient_id)))?;
        let inter = match config.edge_mode {
            EdgeMode::IntraOnly => Vec::new(),
            _ => inter_slide_edges(x.view(), config.lambda),
        };
        if config.edge_mode == EdgeMode::InterOnly {
            intra.clear();
        }
        multi_slide = Some(merge(n, &[&intra, &inter])?);
        patches = Some(x);
    }
    let (genes, gene_names) = match &record.genes {
        Some(g) => (
            Some(
                g.groups
                    .iter()
                    .map(|v| Array2::from_shape_vec((1, v.len()), v.clone()).expect("row vector"))
                    .collect(),
            ),
            g.group_names.clone(),
        ),
        None => (None, Vec::new()),
    };
    Ok(PreparedRecord {
        patient_id: record.patient_id.clone(),
        label: record.label,
        patches,
        coords,
        multi_slide,
        genes,
        gene_names,
    })
}

#[derive(Debug, Clone)]
struct GeneCache {
    inputs: Vec<Array2<f64>>,
    hidden_pre: Vec<Array2<f64>>,
    hidden: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
struct GraphFusion {
    hg: Hypergraph,
    membership: Vec<Vec<f64>>,
    acts: Vec<Array2<f64>>,
    connected: Vec<bool>,
    connected_patches: usize,
    /// Retained patch ids and their in-edge softmax weights (attention mode only).
    attention: Option<Vec<(Vec<usize>, Vec<f64>)>>,
    retained_count: usize,
}

/// Everything the backward pass needs, plus the prediction itself.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: HazardOutput,
    pub logits: Vec<f64>,
    /// Pre-fusion pooled summaries of the modalities that were present.
    pub path_summary: Option<Array1<f64>>,
    pub gene_summary: Option<Array1<f64>>,
    pub retrieved: Option<(Modality, Retrieval)>,
    /// Cross-attention scores (genes × patches) when the attention stage ran.
    pub attention_scores: Option<Array2<f64>>,
    gene_cache: Option<GeneCache>,
    genes: Array2<f64>,
    path_acts: Option<Vec<Array2<f64>>>,
    path_h: Array2<f64>,
    fusion: Option<GraphFusion>,
    pooled: Array1<f64>,
}

fn encode_genes(params: &ModelParams, raw: &[Array2<f64>]) -> Result<(Array2<f64>, GeneCache)> {
    if raw.len() != params.gene_encoders.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gene groups vs {} encoders",
            raw.len(),
            params.gene_encoders.len()
        )));
    }
    let d = params.d;
    let mut genes = Array2::zeros((raw.len(), d));
    let mut cache = GeneCache {
        inputs: Vec::new(),
        hidden_pre: Vec::new(),
        hidden: Vec::new(),
    };
    for (w, (x, enc)) in raw.iter().zip(&params.gene_encoders).enumerate() {
        if x.ncols() != enc.w1.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "gene group {w} has {} values, encoder expects {}",
                x.ncols(),
                enc.w1.nrows()
            )));
        }
        let pre = x.dot(&enc.w1) + &enc.b1;
        let hidden = pre.mapv(leaky_relu);
        let out = hidden.dot(&enc.w2) + &enc.b2;
        genes.row_mut(w).assign(&out.row(0));
        cache.inputs.push(x.clone());
        cache.hidden_pre.push(pre);
        cache.hidden.push(hidden);
    }
    Ok((genes, cache))
}

fn mean_rows(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

fn broadcast(v: &[f64], rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, v.len()), |(_, j)| v[j])
}

/// Pathology-side then genomics-side processing, memory-bank substitution
/// for a missing modality, fusion, pooling and the hazard head.
pub fn forward(
    params: &ModelParams,
    record: &PreparedRecord,
    config: &TrainConfig,
    bank: Option<&MemoryBank>,
) -> Result<ForwardPass> {
    let d = params.d;
    let num_genes = params.num_gene_groups();

    let (mut genes, gene_cache) = match &record.genes {
        Some(raw) => {
            let (g, c) = encode_genes(params, raw)?;
            (Some(g), Some(c))
        }
        None => (None, None),
    };

    let mut path_acts = None;
    let mut path_h = None;
    if let (Some(x), Some(hg)) = (&record.patches, &record.multi_slide) {
        if x.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "patient {}: patch width {} vs model width {d}",
                record.patient_id,
                x.ncols()
            )));
        }
        let p0 = x.dot(&params.adapter_w) + &params.adapter_b;
        let acts = stack_forward_with(&Propagator::new(hg), p0.view(), &params.multi_slide_layers)?;
        path_h = acts.last().cloned();
        path_acts = Some(acts);
    }

    let path_summary = path_h.as_ref().map(mean_rows);
    let gene_summary = genes.as_ref().map(mean_rows);

    let mut retrieved = None;
    match (&path_summary, &gene_summary) {
        (None, None) => return Err(Error::EmptyRecord(record.patient_id.clone())),
        (Some(ps), None) => {
            let bank = bank.ok_or_else(|| Error::MissingBank(record.patient_id.clone()))?;
            let r = bank.retrieve_missing(ps.as_slice().expect("contiguous"), Modality::Path, config.mu)?;
            genes = Some(broadcast(&r.vector, num_genes));
            retrieved = Some((Modality::Path, r));
        }
        (None, Some(gs)) => {
            let bank = bank.ok_or_else(|| Error::MissingBank(record.patient_id.clone()))?;
            let r = bank.retrieve_missing(gs.as_slice().expect("contiguous"), Modality::Gene, config.mu)?;
            path_h = Some(broadcast(&r.vector, 1));
            retrieved = Some((Modality::Gene, r));
        }
        (Some(_), Some(_)) => {}
    }
    let genes = genes.expect("genes present or substituted");
    let path_h = path_h.expect("pathology present or substituted");
    let n = path_h.nrows();

    let mut attention_scores = None;
    let (fusion, path_pool, gene_pool) = match config.fusion_mode {
        FusionMode::ConcatBaseline => (None, mean_rows(&path_h), mean_rows(&genes)),
        mode => {
            let k = retained_count(config.beta_fraction, n)?;
            let (retained, attention): (Vec<Vec<usize>>, Option<Vec<(Vec<usize>, Vec<f64>)>>) =
                if mode == FusionMode::HypergraphAttn {
                    let ge = gene_attentive_edges(genes.view(), path_h.view(), &params.attn, config.beta_fraction)?;
                    let per_gene = ge
                        .retained
                        .iter()
                        .enumerate()
                        .map(|(w, keep)| {
                            let mut sorted = keep.clone();
                            sorted.sort_unstable();
                            let scores: Vec<f64> = sorted.iter().map(|j| ge.scores[[w, *j]]).collect();
                            (sorted, softmax(&scores))
                        })
                        .collect::<Vec<_>>();
                    attention_scores = Some(ge.scores);
                    (per_gene.iter().map(|(r, _)| r.clone()).collect(), Some(per_gene))
                } else {
                    let mut rng = substream(config.seed, "random-edges", key_index(&record.patient_id));
                    (random_gene_edges(num_genes, n, k, &mut rng), None)
                };

            let mut edges = Vec::with_capacity(num_genes);
            let mut membership = Vec::with_capacity(num_genes);
            for (w, keep) in retained.iter().enumerate() {
                let edge = Hyperedge::unit(keep.iter().copied().chain(std::iter::once(n + w)));
                let strengths = edge
                    .vertices
                    .iter()
                    .map(|v| match &attention {
                        Some(att) if *v < n => {
                            let (ids, probs) = &att[w];
                            let pos = ids.binary_search(v).expect("retained patch");
                            k as f64 * probs[pos]
                        }
                        _ => 1.0,
                    })
                    .collect();
                edges.push(edge);
                membership.push(strengths);
            }
            let hg = Hypergraph::new(n + num_genes, edges)?;
            let mut x = Array2::zeros((n + num_genes, d));
            x.slice_mut(s![..n, ..]).assign(&path_h);
            x.slice_mut(s![n.., ..]).assign(&genes);
            let prop = Propagator::with_membership(&hg, &membership)?;
            let acts = stack_forward_with(&prop, x.view(), &params.gene_attn_layers)?;
            let connected = prop.connected();
            let out = acts.last().expect("input activation");
            let (path_pool, connected_patches) = masked_row_mean(out.slice(s![..n, ..]), &connected[..n]);
            let gene_pool = mean_rows(&out.slice(s![n.., ..]).to_owned());
            let fusion = GraphFusion {
                hg: hg.clone(),
                membership: membership.clone(),
                acts,
                connected,
                connected_patches,
                attention,
                retained_count: k,
            };
            (Some(fusion), path_pool, gene_pool)
        }
    };

    let mut pooled = Array1::zeros(2 * d);
    pooled.slice_mut(s![..d]).assign(&path_pool);
    pooled.slice_mut(s![d..]).assign(&gene_pool);
    let logits = (pooled.dot(&params.head_w) + params.head_b.row(0)).to_vec();
    let output = hazards_from_logits(&logits);

    Ok(ForwardPass {
        output,
        logits,
        path_summary,
        gene_summary,
        retrieved,
        attention_scores,
        gene_cache,
        genes,
        path_acts,
        path_h,
        fusion,
        pooled,
    })
}

/// Reverse pass from `dlogits`; returns gradients shaped like `params`.
/// Substituted (retrieved) inputs are constants and receive no gradient.
pub fn backward(params: &ModelParams, record: &PreparedRecord, pass: &ForwardPass, dlogits: &[f64]) -> Result<ModelParams> {
    let d = params.d;
    let mut grads = params.zeros_like();
    let dl = Array1::from(dlogits.to_vec());
    if dl.len() != params.bins {
        return Err(Error::DimensionMismatch("logit gradient length".into()));
    }

    grads.head_w = pass
        .pooled
        .view()
        .insert_axis(Axis(1))
        .dot(&dl.view().insert_axis(Axis(0)));
    grads.head_b.row_mut(0).assign(&dl);
    let dpooled = params.head_w.dot(&dl);
    let dpath_pool = dpooled.slice(s![..d]).to_owned();
    let dgene_pool = dpooled.slice(s![d..]).to_owned();

    let n = pass.path_h.nrows();
    let w_count = pass.genes.nrows();
    let mut dpath_h = Array2::<f64>::zeros((n, d));
    let mut dgenes = Array2::<f64>::zeros((w_count, d));

    match &pass.fusion {
        None => {
            for mut row in dpath_h.rows_mut() {
                row.scaled_add(1.0 / n as f64, &dpath_pool);
            }
            for mut row in dgenes.rows_mut() {
                row.scaled_add(1.0 / w_count as f64, &dgene_pool);
            }
        }
        Some(f) => {
            let mut dout = Array2::<f64>::zeros((n + w_count, d));
            let count = f.connected_patches;
            for v in 0..n {
                if count == 0 || f.connected[v] {
                    let denom = if count == 0 { n } else { count };
                    dout.row_mut(v).scaled_add(1.0 / denom as f64, &dpath_pool);
                }
            }
            for w in 0..w_count {
                dout.row_mut(n + w).scaled_add(1.0 / w_count as f64, &dgene_pool);
            }
            let prop = Propagator::with_membership(&f.hg, &f.membership)?;
            let sg = stack_backward_with(&prop, &f.acts, &params.gene_attn_layers, dout.view())?;
            for (g, dt) in grads.gene_attn_layers.iter_mut().zip(sg.dthetas) {
                g.theta = dt;
            }
            dpath_h += &sg.dx.slice(s![..n, ..]);
            dgenes += &sg.dx.slice(s![n.., ..]);

            if let (Some(att), Some(dm)) = (&f.attention, &sg.dmembership) {
                let k = f.retained_count as f64;
                let mut dscores = Array2::<f64>::zeros((w_count, n));
                for (w, ((ids, probs), edge)) in att.iter().zip(f.hg.edges()).enumerate() {
                    // memberships are k·softmax over the retained scores
                    let dm_patch: Vec<f64> = ids
                        .iter()
                        .map(|j| {
                            let pos = edge.vertices.binary_search(j).expect("retained patch in edge");
                            dm[w][pos]
                        })
                        .collect();
                    let mean: f64 = probs.iter().zip(&dm_patch).map(|(p, g)| p * g).sum();
                    for ((j, p), g) in ids.iter().zip(probs).zip(&dm_patch) {
                        dscores[[w, *j]] = k * p * (g - mean);
                    }
                }
                let ag = crate::attention::attn_scores_backward(
                    pass.genes.view(),
                    pass.path_h.view(),
                    &params.attn,
                    dscores.view(),
                )?;
                grads.attn.wq = ag.dwq;
                grads.attn.wk = ag.dwk;
                dgenes += &ag.dgenes;
                dpath_h += &ag.dpatches;
            }
        }
    }

    if let (Some(acts), Some(hg), Some(x)) = (&pass.path_acts, &record.multi_slide, &record.patches) {
        let sg = stack_backward_with(&Propagator::new(hg), acts, &params.multi_slide_layers, dpath_h.view())?;
        for (g, dt) in grads.multi_slide_layers.iter_mut().zip(sg.dthetas) {
            g.theta = dt;
        }
        grads.adapter_w = x.t().dot(&sg.dx);
        grads.adapter_b = sg.dx.sum_axis(Axis(0)).insert_axis(Axis(0));
    }

    if let Some(cache) = &pass.gene_cache {
        for (w, enc) in params.gene_encoders.iter().enumerate() {
            let dg = dgenes.row(w).insert_axis(Axis(0)).to_owned();
            let g = &mut grads.gene_encoders[w];
            g.w2 = cache.hidden[w].t().dot(&dg);
            g.b2 = dg.clone();
            let mut dh = dg.dot(&enc.w2.t());
            ndarray::Zip::from(&mut dh)
                .and(&cache.hidden_pre[w])
                .for_each(|g, p| *g *= leaky_relu_grad(*p));
            g.w1 = cache.inputs[w].t().dot(&dh);
            g.b1 = dh;
        }
    }
    Ok(grads)
}

/// Pre-fusion pathology and genomics summaries; what the memory bank stores.
pub fn modality_summaries(
    params: &ModelParams,
    record: &PreparedRecord,
) -> Result<(Option<Array1<f64>>, Option<Array1<f64>>)> {
    let gene = match &record.genes {
        Some(raw) => Some(mean_rows(&encode_genes(params, raw)?.0)),
        None => None,
    };
    let path = match (&record.patches, &record.multi_slide) {
        (Some(x), Some(hg)) => {
            let p0 = x.dot(&params.adapter_w) + &params.adapter_b;
            let acts = stack_forward_with(&Propagator::new(hg), p0.view(), &params.multi_slide_layers)?;
            Some(mean_rows(acts.last().expect("input activation")))
        }
        _ => None,
    };
    Ok((path, gene))
}
