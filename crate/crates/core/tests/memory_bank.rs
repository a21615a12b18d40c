mod common;

use std::path::Path;

use common::*;
use hgsurv::membank::{MemoryBank, Modality};
use hgsurv::Error;
use proptest::prelude::*;
use rand::Rng;

fn random_bank(seed: u64, entries: usize, d: usize) -> MemoryBank {
    let mut r = rng(seed);
    let mut bank = MemoryBank::new(d, r.random_range(0.0..1.0)).unwrap();
    for i in 0..entries {
        let p: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        bank.update(&format!("k{i}"), &p, &g).unwrap();
    }
    bank
}

#[test]
fn mu_one_is_exact_nearest_neighbour() {
    for instance in 0..100u64 {
        let mut r = rng(7_000 + instance);
        let d = r.random_range(1..8);
        let n = r.random_range(1..30);
        let bank = random_bank(instance, n, d);
        let query: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        for available in [Modality::Path, Modality::Gene] {
            let best = (0..n)
                .map(|i| {
                    let e = &bank.entries()[i];
                    let stored = if available == Modality::Path { &e.path_vec } else { &e.gene_vec };
                    (cosine(&query, stored), i)
                })
                .fold((f64::NEG_INFINITY, usize::MAX), |acc, c| if c.0 > acc.0 { c } else { acc });
            let got = bank.retrieve_missing(&query, available, 1).unwrap();
            assert_eq!(got.selected, vec![best.1], "instance {instance}");
            let e = &bank.entries()[best.1];
            let expected = if available == Modality::Path { &e.gene_vec } else { &e.path_vec };
            assert_eq!(&got.vector, expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn retrieval_is_convex_combination(seed in 0u64..100_000, n in 1usize..25, mu in 1usize..6, d in 1usize..6) {
        let bank = random_bank(seed, n, d);
        let query: Vec<f64> = {
            let mut r = rng(seed + 1);
            (0..d).map(|_| r.random_range(-1.0..1.0)).collect()
        };
        let got = bank.retrieve_missing(&query, Modality::Gene, mu).unwrap();
        prop_assert_eq!(got.selected.len(), mu.min(n));
        prop_assert!((got.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(got.weights.iter().all(|w| *w > 0.0));
        let mut recon = vec![0.0; d];
        for (i, w) in got.selected.iter().zip(&got.weights) {
            for (acc, v) in recon.iter_mut().zip(&bank.entries()[*i].path_vec) {
                *acc += w * v;
            }
        }
        // inside the coordinate-wise hull of the selected entries, and equal to the weighted sum
        for j in 0..d {
            let lo = got.selected.iter().map(|i| bank.entries()[*i].path_vec[j]).fold(f64::INFINITY, f64::min);
            let hi = got.selected.iter().map(|i| bank.entries()[*i].path_vec[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(got.vector[j] >= lo - 1e-12 && got.vector[j] <= hi + 1e-12);
            prop_assert!((got.vector[j] - recon[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact(seed in 0u64..100_000, n in 0usize..20, d in 1usize..8) {
        let bank = random_bank(seed, n, d);
        let text = bank.to_text();
        let back = MemoryBank::from_text(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &bank);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn momentum_update_blends(theta in 0.0f64..=1.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let mut bank = MemoryBank::new(1, theta).unwrap();
        bank.update("k", &[a], &[a]).unwrap();
        bank.update("k", &[b], &[b]).unwrap();
        let e = bank.get("k").unwrap();
        prop_assert!((e.path_vec[0] - (theta * b + (1.0 - theta) * a)).abs() < 1e-12);
        prop_assert_eq!(bank.len(), 1);
    }
}

#[test]
fn cold_bank_errors() {
    let bank = MemoryBank::new(3, 0.9).unwrap();
    assert!(matches!(bank.retrieve_missing(&[1.0, 0.0, 0.0], Modality::Path, 1), Err(Error::ColdMemory)));
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bank = random_bank(3, 10, 4);
    let path = dir.path().join("bank.txt");
    bank.save(&path).unwrap();
    assert_eq!(MemoryBank::load(&path).unwrap(), bank);
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("d=4 theta="));
}

#[test]
fn malformed_bank_reports_line() {
    let text = "d=2 theta=0.5\nk 1 2 3 4\nbad 1 2 x 4\n";
    match MemoryBank::from_text(text, Path::new("b.txt")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}
