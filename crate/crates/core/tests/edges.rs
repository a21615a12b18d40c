mod common;

use common::*;
use hgsurv::attention::AttnParams;
use hgsurv::hyperedges::{gene_attentive_edges, inter_slide_edges, merge, retained_count, spatial_edges, top_k_indices};
use hgsurv::Error;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn sorted_sets(edges: &[hgsurv::hgcore::Hyperedge]) -> Vec<Vec<usize>> {
    edges.iter().map(|e| e.vertices.clone()).collect()
}

/// 50 random instances per builder, N up to 200, with deliberate duplicate
/// points so the tie rule is exercised.
#[test]
fn knn_builders_match_brute_force() {
    for instance in 0..50u64 {
        let mut r = rng(1000 + instance);
        let n = r.random_range(1..=200);
        let lambda = r.random_range(1..=12);
        let coords: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                if r.random_bool(0.2) {
                    (r.random_range(0..4) as f64, r.random_range(0..4) as f64)
                } else {
                    (r.random_range(-10.0..10.0), r.random_range(-10.0..10.0))
                }
            })
            .collect();
        let oracle = brute_knn(n, lambda, |a, b| sq_dist(coords[a], coords[b]), true);
        assert_eq!(sorted_sets(&spatial_edges(&coords, lambda)), oracle, "spatial instance {instance}");

        let d = r.random_range(1..6);
        let mut feats = random_matrix(&mut r, n, d);
        for i in 0..n {
            if r.random_bool(0.05) {
                feats.row_mut(i).fill(0.0);
            } else if i > 0 && r.random_bool(0.1) {
                let prev = feats.row(i - 1).to_owned();
                feats.row_mut(i).assign(&(prev * 2.0));
            }
        }
        let rows: Vec<Vec<f64>> = feats.rows().into_iter().map(|x| x.to_vec()).collect();
        let oracle = brute_knn(n, lambda, |a, b| cosine(&rows[a], &rows[b]), false);
        assert_eq!(sorted_sets(&inter_slide_edges(feats.view(), lambda)), oracle, "feature instance {instance}");
    }
}

#[test]
fn lambda_one_gives_self_edges() {
    let coords = [(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)];
    let sets = sorted_sets(&spatial_edges(&coords, 1));
    assert_eq!(sets, vec![vec![0], vec![1], vec![2]]);
}

#[test]
fn lambda_beyond_size_takes_everyone() {
    let coords = [(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)];
    for e in spatial_edges(&coords, 10) {
        assert_eq!(e.vertices, vec![0, 1, 2]);
    }
}

#[test]
fn equidistant_neighbours_break_ties_by_index() {
    // 1 and 2 are both at distance 1 from 0; the lower index wins
    let coords = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (3.0, 0.0)];
    assert_eq!(spatial_edges(&coords, 2)[0].vertices, vec![0, 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_edge_has_lambda_vertices_including_center(n in 1usize..40, lambda in 1usize..10, seed in 0u64..500) {
        let feats = random_matrix(&mut rng(seed), n, 3);
        for (c, e) in inter_slide_edges(feats.view(), lambda).iter().enumerate() {
            prop_assert!(e.contains(c));
            prop_assert_eq!(e.len(), lambda.min(n));
        }
    }

    #[test]
    fn gene_edges_keep_top_attention(w in 1usize..5, n in 1usize..30, beta in 0.01f64..1.0, seed in 0u64..500) {
        let mut r = rng(seed);
        let genes = random_matrix(&mut r, w, 4);
        let patches = random_matrix(&mut r, n, 4);
        let params = AttnParams { wq: random_matrix(&mut r, 4, 4), wk: random_matrix(&mut r, 4, 4) };
        let ge = gene_attentive_edges(genes.view(), patches.view(), &params, beta).unwrap();
        let k = (beta * n as f64).ceil() as usize;
        for (g, (edge, keep)) in ge.edges.iter().zip(&ge.retained).enumerate() {
            prop_assert_eq!(keep.len(), k.min(n));
            prop_assert!(edge.contains(n + g));
            // every kept patch outranks every dropped one
            let row = ge.weights.row(g);
            let worst_kept = keep.iter().map(|j| row[*j]).fold(f64::INFINITY, f64::min);
            for j in (0..n).filter(|j| !keep.contains(j)) {
                prop_assert!(row[j] <= worst_kept);
            }
            let total: f64 = row.sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_is_sorted_prefix(values in prop::collection::vec(-3i32..3, 0..30), k in 0usize..35) {
        let v: Vec<f64> = values.iter().map(|x| *x as f64).collect();
        let got = top_k_indices(&v, k);
        let mut all: Vec<usize> = (0..v.len()).collect();
        all.sort_by(|a, b| v[*b].partial_cmp(&v[*a]).unwrap().then(a.cmp(b)));
        all.truncate(k.min(v.len()));
        prop_assert_eq!(got, all);
    }
}

#[test]
fn zero_retained_is_an_error() {
    assert!(matches!(retained_count(0.0, 10), Err(Error::EmptyGeneEdge { .. })));
    assert_eq!(retained_count(0.05, 1).unwrap(), 1);
    assert_eq!(retained_count(0.05, 64).unwrap(), 4);
}

#[test]
fn merge_drops_duplicate_sets() {
    let a = spatial_edges(&[(0.0, 0.0), (1.0, 0.0)], 2);
    let b = spatial_edges(&[(0.0, 0.0), (1.0, 0.0)], 2);
    let hg = merge(2, &[&a, &b]).unwrap();
    assert_eq!(hg.num_edges(), 1);
}

#[test]
fn uniform_scores_keep_lowest_indices() {
    let genes = Array2::zeros((1, 2));
    let patches = Array2::ones((5, 2));
    let ge = gene_attentive_edges(genes.view(), patches.view(), &AttnParams::identity(2), 0.4).unwrap();
    assert_eq!(ge.retained[0], vec![0, 1]);
}
