//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use hgsurv::datamodel::{Censor, GeneGroups, PatchFeature, PatientRecord, Slide, SlideKind, SurvivalLabel};
use hgsurv::hgcore::Hypergraph;
use hgsurv::metrics::SurvPoint;
use hgsurv::model::{prepare, ModelParams, PreparedRecord, TrainConfig};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Propagation operator straight from the definition, entry by entry:
/// `M[i][j] = Σ_e w_e h_ie h_je / (δ_e √(d_i d_j))`, zero for isolated vertices.
pub fn naive_propagation(hg: &Hypergraph) -> Array2<f64> {
    let n = hg.num_vertices();
    let edges = hg.edges();
    let mut deg = vec![0.0; n];
    for e in edges {
        for v in &e.vertices {
            deg[*v] += e.weight;
        }
    }
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if deg[i] == 0.0 || deg[j] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for e in edges {
                if e.vertices.contains(&i) && e.vertices.contains(&j) {
                    acc += e.weight / e.vertices.len() as f64;
                }
            }
            m[[i, j]] = acc / (deg[i] * deg[j]).sqrt();
        }
    }
    m
}

/// O(N²) k-nearest selection: fully sort every other vertex by key, ties to
/// the lower index, keep the first `λ − 1`, add the center. Sorted ids.
pub fn brute_knn(n: usize, lambda: usize, key: impl Fn(usize, usize) -> f64, smaller_is_better: bool) -> Vec<Vec<usize>> {
    (0..n)
        .map(|c| {
            let mut others: Vec<(f64, usize)> = (0..n).filter(|j| *j != c).map(|j| (key(c, j), j)).collect();
            others.sort_by(|a, b| {
                let ord = a.0.partial_cmp(&b.0).unwrap();
                let ord = if smaller_is_better { ord } else { ord.reverse() };
                ord.then(a.1.cmp(&b.1))
            });
            let mut e: Vec<usize> = others.iter().take(lambda.saturating_sub(1)).map(|p| p.1).collect();
            e.push(c);
            e.sort_unstable();
            e
        })
        .collect()
}

pub fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na > 0.0 && nb > 0.0 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot / (na * nb)
    } else {
        0.0
    }
}

/// Harrell's C by enumerating ordered pairs (i, j): comparable when i had the
/// event strictly before j's time.
pub fn enumerate_c_index(points: &[SurvPoint]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i == j || !a.event || !(a.time < b.time) {
                continue;
            }
            den += 1.0;
            if a.risk > b.risk {
                num += 1.0;
            } else if a.risk == b.risk {
                num += 0.5;
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Norm-wise relative difference, `‖a − b‖ / max(‖a‖, ‖b‖)`; 0 when both vanish.
pub fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|x| x * x).sum().sqrt();
    let scale = a.mapv(|x| x * x).sum().sqrt().max(b.mapv(|x| x * x).sum().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    rel_err(
        &Array2::from_shape_vec((1, a.len()), a.to_vec()).unwrap(),
        &Array2::from_shape_vec((1, b.len()), b.to_vec()).unwrap(),
    )
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Array2<f64>, h: f64, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe);
        probe[idx] = orig - h;
        let down = f(&probe);
        probe[idx] = orig;
        g[idx] = (up - down) / (2.0 * h);
    }
    g
}

/// Central differences with respect to parameter tensor `t` of `params`.
pub fn numeric_param_grad(
    params: &ModelParams,
    t: usize,
    h: f64,
    mut loss: impl FnMut(&ModelParams) -> f64,
) -> Array2<f64> {
    let shape = params.tensors()[t].raw_dim();
    let mut g = Array2::zeros(shape.clone());
    let mut probe = params.clone();
    for idx in ndarray::indices(shape) {
        let orig = probe.tensors()[t][idx];
        probe.tensors_mut()[t][idx] = orig + h;
        let up = loss(&probe);
        probe.tensors_mut()[t][idx] = orig - h;
        let down = loss(&probe);
        probe.tensors_mut()[t][idx] = orig;
        g[idx] = (up - down) / (2.0 * h);
    }
    g
}

/// Patient with one slide of `patches` patches on a line and `gene_lens.len()`
/// gene groups, features drawn uniformly from [-1, 1].
pub fn toy_record(seed: u64, patches: usize, d: usize, gene_lens: &[usize], label: SurvivalLabel) -> PatientRecord {
    let mut r = rng(seed);
    let slide = Slide {
        slide_id: format!("S{seed}"),
        kind: SlideKind::Ffpe,
        patches: (0..patches)
            .map(|i| PatchFeature {
                feature: (0..d).map(|_| r.random_range(-1.0..1.0)).collect(),
                coord: (i as f64, (i % 2) as f64 * 0.5),
            })
            .collect(),
    };
    PatientRecord {
        patient_id: format!("T{seed}"),
        slides: vec![slide],
        genes: Some(GeneGroups {
            groups: gene_lens
                .iter()
                .map(|l| (0..*l).map(|_| r.random_range(-1.0..1.0)).collect())
                .collect(),
            group_names: (0..gene_lens.len()).map(|w| format!("g{w}")).collect(),
        }),
        label,
    }
}

pub const MICRO_D: usize = 4;
pub const MICRO_BINS: usize = 2;
pub const MICRO_GENES: [usize; 2] = [3, 5];

pub fn micro_config() -> TrainConfig {
    TrainConfig {
        lambda: 3,
        beta_fraction: 0.5,
        bins: MICRO_BINS,
        seed: 11,
        ..Default::default()
    }
}

/// Micro pipeline: 6 patches, 2 gene groups, d = 4, 2 bins.
pub fn micro_setup(censor: Censor, bin: usize) -> (ModelParams, PreparedRecord, TrainConfig) {
    let config = micro_config();
    let label = SurvivalLabel { time: 1.0, censor, bin };
    let record = toy_record(5, 6, MICRO_D, &MICRO_GENES, label);
    let params = ModelParams::init(MICRO_D, MICRO_BINS, &MICRO_GENES, &config);
    (params, prepare(&record, &config).unwrap(), config)
}
