//! Hypergraph representation and the normalized hypergraph convolution
//! `σ(Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2} X Θ)` with its reverse-mode gradient.
//!
//! The sparse [`Propagator`] is the production path. [`propagation_matrix`]
//! builds the same operator densely and is intended for small graphs and
//! test oracles.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    /// Sorted, duplicate-free vertex ids.
    pub vertices: Vec<usize>,
    pub weight: f64,
}

impl Hyperedge {
    pub fn new(vertices: impl IntoIterator<Item = usize>, weight: f64) -> Self {
        let mut vertices: Vec<usize> = vertices.into_iter().collect();
        vertices.sort_unstable();
        vertices.dedup();
        Hyperedge { vertices, weight }
    }

    pub fn unit(vertices: impl IntoIterator<Item = usize>) -> Self {
        Self::new(vertices, 1.0)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypergraph {
    num_vertices: usize,
    edges: Vec<Hyperedge>,
}

impl Hypergraph {
    pub fn new(num_vertices: usize, edges: Vec<Hyperedge>) -> Result<Self> {
        for e in &edges {
            if e.vertices.is_empty() {
                return Err(Error::InvalidArgument("hyperedge is empty".into()));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "hyperedge weight must be positive, got {}",
                    e.weight
                )));
            }
            if let Some(&v) = e.vertices.iter().find(|v| **v >= num_vertices) {
                return Err(Error::IndexOutOfRange {
                    index: v,
                    num_vertices,
                });
            }
        }
        Ok(Hypergraph {
            num_vertices,
            edges,
        })
    }

    pub fn empty(num_vertices: usize) -> Self {
        Hypergraph {
            num_vertices,
            edges: Vec::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    /// Relabel vertices: vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Hyperedge::new(e.vertices.iter().map(|v| perm[*v]), e.weight))
            .collect();
        Hypergraph::new(self.num_vertices, edges)
    }

    /// Debug dump: one line per edge, `w v0 v1 ...`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = write!(out, "{}", e.weight);
            for v in &e.vertices {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_edge_list(num_vertices: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let bad = |m: &str| Error::parse("<edge list>", lineno + 1, m);
            let weight: f64 = fields
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| bad("bad edge weight"))?;
            let vertices = fields
                .map(|v| v.parse::<usize>().map_err(|_| bad("bad vertex id")))
                .collect::<Result<Vec<_>>>()?;
            edges.push(Hyperedge::new(vertices, weight));
        }
        Hypergraph::new(num_vertices, edges)
    }
}

/// Column-sparse incidence: column `e` lists the vertices of edge `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    pub num_vertices: usize,
    pub columns: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl Incidence {
    pub fn num_edges(&self) -> usize {
        self.columns.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut h = Array2::zeros((self.num_vertices, self.columns.len()));
        for (e, col) in self.columns.iter().enumerate() {
            for v in col {
                h[[*v, e]] = 1.0;
            }
        }
        h
    }
}

pub fn incidence(hg: &Hypergraph) -> Incidence {
    Incidence {
        num_vertices: hg.num_vertices,
        columns: hg.edges.iter().map(|e| e.vertices.clone()).collect(),
        weights: hg.edges.iter().map(|e| e.weight).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Degrees {
    /// Weighted vertex degree `Σ_e w_e·[v ∈ e]`.
    pub vertex: Vec<f64>,
    /// Edge cardinality `|e|`.
    pub edge: Vec<f64>,
}

pub fn degrees(hg: &Hypergraph) -> Degrees {
    let mut vertex = vec![0.0; hg.num_vertices];
    for e in &hg.edges {
        for v in &e.vertices {
            vertex[*v] += e.weight;
        }
    }
    Degrees {
        vertex,
        edge: hg.edges.iter().map(|e| e.len() as f64).collect(),
    }
}

fn inv_sqrt_or_zero(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x.sqrt()
    } else {
        0.0
    }
}

/// Dense `Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2}`; degree-0 vertices get zero rows.
pub fn propagation_matrix(hg: &Hypergraph) -> Array2<f64> {
    let inc = incidence(hg);
    let deg = degrees(hg);
    let h = inc.to_dense();
    let dv = Array2::from_diag(&ndarray::Array1::from_iter(
        deg.vertex.iter().map(|d| inv_sqrt_or_zero(*d)),
    ));
    let we = Array2::from_diag(&ndarray::Array1::from_iter(
        inc.weights.iter().zip(&deg.edge).map(|(w, de)| w / de),
    ));
    dv.dot(&h).dot(&we).dot(&h.t()).dot(&dv)
}

/// Sparse propagation operator, optionally with soft membership strengths
/// on the incidence entries. Degrees always come from the binary incidence.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    hg: &'a Hypergraph,
    inv_sqrt_dv: Vec<f64>,
    edge_coef: Vec<f64>,
    membership: Option<&'a [Vec<f64>]>,
}

impl<'a> Propagator<'a> {
    pub fn new(hg: &'a Hypergraph) -> Self {
        let deg = degrees(hg);
        Propagator {
            hg,
            inv_sqrt_dv: deg.vertex.iter().map(|d| inv_sqrt_or_zero(*d)).collect(),
            edge_coef: hg
                .edges
                .iter()
                .zip(&deg.edge)
                .map(|(e, de)| e.weight / de)
                .collect(),
            membership: None,
        }
    }

    /// `membership[e][i]` scales the incidence entry of `hg.edges()[e].vertices[i]`.
    pub fn with_membership(hg: &'a Hypergraph, membership: &'a [Vec<f64>]) -> Result<Self> {
        if membership.len() != hg.num_edges()
            || membership
                .iter()
                .zip(hg.edges())
                .any(|(m, e)| m.len() != e.len())
        {
            return Err(Error::DimensionMismatch(
                "membership strengths do not match the hypergraph edges".into(),
            ));
        }
        let mut p = Self::new(hg);
        p.membership = Some(membership);
        Ok(p)
    }

    pub fn hypergraph(&self) -> &Hypergraph {
        self.hg
    }

    /// Vertices that belong to at least one edge.
    pub fn connected(&self) -> Vec<bool> {
        self.inv_sqrt_dv.iter().map(|s| *s > 0.0).collect()
    }

    fn strength(&self, e: usize, i: usize) -> f64 {
        self.membership.map_or(1.0, |m| m[e][i])
    }

    fn edge_messages(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut msg = Array2::zeros((self.hg.num_edges(), x.ncols()));
        for (e, edge) in self.hg.edges.iter().enumerate() {
            let mut row = msg.row_mut(e);
            for (i, v) in edge.vertices.iter().enumerate() {
                let s = self.strength(e, i) * self.inv_sqrt_dv[*v];
                row.scaled_add(s, &x.row(*v));
            }
            row *= self.edge_coef[e];
        }
        msg
    }

    /// `M·x` for the (symmetric) propagation operator `M`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.hg.num_vertices {
            return Err(Error::DimensionMismatch(format!(
                "feature rows {} vs {} vertices",
                x.nrows(),
                self.hg.num_vertices
            )));
        }
        let msg = self.edge_messages(x);
        let mut y = Array2::zeros(x.raw_dim());
        for (e, edge) in self.hg.edges.iter().enumerate() {
            for (i, v) in edge.vertices.iter().enumerate() {
                let s = self.strength(e, i) * self.inv_sqrt_dv[*v];
                y.row_mut(*v).scaled_add(s, &msg.row(e));
            }
        }
        Ok(y)
    }

    /// Gradient of `⟨dy, M·x⟩` with respect to every membership strength.
    pub fn membership_grad(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        if x.nrows() != self.hg.num_vertices || dy.dim() != x.dim() {
            return Err(Error::DimensionMismatch("membership gradient shapes".into()));
        }
        let msg = self.edge_messages(x);
        // dmsg = Dv^{-1/2}-scaled scatter of dy, the adjoint of the gather above.
        let upstream = self.edge_messages(dy);
        let mut grads = Vec::with_capacity(self.hg.num_edges());
        for (e, edge) in self.hg.edges.iter().enumerate() {
            let g = edge
                .vertices
                .iter()
                .map(|v| {
                    let s = self.inv_sqrt_dv[*v];
                    s * (dy.row(*v).dot(&msg.row(e)) + x.row(*v).dot(&upstream.row(e)))
                })
                .collect();
            grads.push(g);
        }
        Ok(grads)
    }

    pub fn dense(&self) -> Array2<f64> {
        let v = self.hg.num_vertices;
        self.apply(Array2::eye(v).view()).expect("square identity")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayerParams {
    pub theta: Array2<f64>,
    pub use_nonlinearity: bool,
}

impl ConvLayerParams {
    pub fn identity(d: usize) -> Self {
        ConvLayerParams {
            theta: Array2::eye(d),
            use_nonlinearity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub dx: Array2<f64>,
    pub dtheta: Array2<f64>,
    /// Only populated when the propagator carries membership strengths.
    pub dmembership: Option<Vec<Vec<f64>>>,
}

fn check_theta(x: ArrayView2<f64>, params: &ConvLayerParams) -> Result<()> {
    if x.ncols() != params.theta.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "feature width {} vs theta rows {}",
            x.ncols(),
            params.theta.nrows()
        )));
    }
    Ok(())
}

fn activate(pre: Array2<f64>, params: &ConvLayerParams) -> Array2<f64> {
    if params.use_nonlinearity {
        pre.mapv_into(leaky_relu)
    } else {
        pre
    }
}

pub fn conv_forward(prop: &Propagator, x: ArrayView2<f64>, params: &ConvLayerParams) -> Result<Array2<f64>> {
    check_theta(x, params)?;
    Ok(activate(prop.apply(x)?.dot(&params.theta), params))
}

pub fn conv_backward(
    prop: &Propagator,
    x: ArrayView2<f64>,
    params: &ConvLayerParams,
    dy: ArrayView2<f64>,
) -> Result<ConvGrads> {
    check_theta(x, params)?;
    if dy.dim() != (x.nrows(), params.theta.ncols()) {
        return Err(Error::DimensionMismatch("upstream gradient shape".into()));
    }
    let mx = prop.apply(x)?;
    let mut dpre = dy.to_owned();
    if params.use_nonlinearity {
        let pre = mx.dot(&params.theta);
        ndarray::Zip::from(&mut dpre)
            .and(&pre)
            .for_each(|g, p| *g *= leaky_relu_grad(*p));
    }
    let dtheta = mx.t().dot(&dpre);
    let dmx = dpre.dot(&params.theta.t());
    // M is symmetric, so the adjoint of x ↦ Mx is M itself.
    let dx = prop.apply(dmx.view())?;
    let dmembership = match prop.membership {
        Some(_) => Some(prop.membership_grad(x, dmx.view())?),
        None => None,
    };
    Ok(ConvGrads {
        dx,
        dtheta,
        dmembership,
    })
}

pub fn hg_conv_forward(x: ArrayView2<f64>, hg: &Hypergraph, params: &ConvLayerParams) -> Result<Array2<f64>> {
    conv_forward(&Propagator::new(hg), x, params)
}

pub fn hg_conv_backward(
    x: ArrayView2<f64>,
    hg: &Hypergraph,
    params: &ConvLayerParams,
    dy: ArrayView2<f64>,
) -> Result<ConvGrads> {
    conv_backward(&Propagator::new(hg), x, params, dy)
}

/// Activations of every layer; element 0 is the input.
pub fn stack_forward_with(
    prop: &Propagator,
    x: ArrayView2<f64>,
    layers: &[ConvLayerParams],
) -> Result<Vec<Array2<f64>>> {
    let mut acts = vec![x.to_owned()];
    for layer in layers {
        let next = conv_forward(prop, acts.last().expect("nonempty").view(), layer)?;
        acts.push(next);
    }
    Ok(acts)
}

pub fn stack_forward(x: ArrayView2<f64>, hg: &Hypergraph, layers: &[ConvLayerParams]) -> Result<Vec<Array2<f64>>> {
    stack_forward_with(&Propagator::new(hg), x, layers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackGrads {
    pub dx: Array2<f64>,
    pub dthetas: Vec<Array2<f64>>,
    pub dmembership: Option<Vec<Vec<f64>>>,
}

pub fn stack_backward_with(
    prop: &Propagator,
    activations: &[Array2<f64>],
    layers: &[ConvLayerParams],
    dy: ArrayView2<f64>,
) -> Result<StackGrads> {
    if activations.len() != layers.len() + 1 {
        return Err(Error::DimensionMismatch("activation count vs layer count".into()));
    }
    let mut upstream = dy.to_owned();
    let mut dthetas = vec![Array2::zeros((0, 0)); layers.len()];
    let mut dmembership: Option<Vec<Vec<f64>>> = None;
    for (l, layer) in layers.iter().enumerate().rev() {
        let g = conv_backward(prop, activations[l].view(), layer, upstream.view())?;
        dthetas[l] = g.dtheta;
        if let Some(dm) = g.dmembership {
            match &mut dmembership {
                None => dmembership = Some(dm),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(dm) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
            }
        }
        upstream = g.dx;
    }
    Ok(StackGrads {
        dx: upstream,
        dthetas,
        dmembership,
    })
}

pub fn stack_backward(
    activations: &[Array2<f64>],
    hg: &Hypergraph,
    layers: &[ConvLayerParams],
    dy: ArrayView2<f64>,
) -> Result<StackGrads> {
    stack_backward_with(&Propagator::new(hg), activations, layers, dy)
}

/// Mean of the rows flagged in `mask`; all rows when none are flagged.
pub fn masked_row_mean(x: ArrayView2<f64>, mask: &[bool]) -> (ndarray::Array1<f64>, usize) {
    let count = mask.iter().filter(|m| **m).count();
    if count == 0 {
        return (x.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(x.ncols())), 0);
    }
    let mut acc = ndarray::Array1::zeros(x.ncols());
    for (row, keep) in x.rows().into_iter().zip(mask) {
        if *keep {
            acc += &row;
        }
    }
    (acc / count as f64, count)
}
