mod common;

use common::*;
use hgsurv::datamodel::{Censor, SurvivalLabel};
use hgsurv::metrics::{c_index, chi_square_sf, km_csv, km_curve, logrank_test, stratify_median, SurvPoint};
use hgsurv::survival::{hazards_from_logits, nll_loss, risk_score, HAZARD_EPS};
use hgsurv::Error;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn pt(time: f64, event: bool, risk: f64) -> SurvPoint {
    SurvPoint { time, event, risk }
}

fn random_points(seed: u64, n: usize) -> Vec<SurvPoint> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| pt(r.random_range(0..12) as f64, r.random_bool(0.6), r.random_range(0..8) as f64))
        .collect()
}

#[test]
fn c_index_matches_pair_enumeration() {
    let mut checked = 0;
    for instance in 0..100u64 {
        let n = rng(instance).random_range(1..=50);
        let pts = random_points(50_000 + instance, n);
        match (c_index(&pts), enumerate_c_index(&pts)) {
            (Ok(c), Some(o)) => {
                assert_eq!(c, o, "instance {instance}");
                checked += 1;
            }
            (Err(Error::UndefinedCIndex), None) => {}
            (a, b) => panic!("instance {instance}: library {a:?}, oracle {b:?}"),
        }
    }
    assert!(checked >= 90);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn c_index_is_rank_invariant_and_flips_under_negation(seed in 0u64..100_000, n in 2usize..40) {
        let pts = random_points(seed, n);
        if let Ok(c) = c_index(&pts) {
            let squashed: Vec<_> = pts.iter().map(|p| pt(p.time, p.event, (p.risk * 0.3).exp())).collect();
            prop_assert_eq!(c_index(&squashed).unwrap(), c);
            let negated: Vec<_> = pts.iter().map(|p| pt(p.time, p.event, -p.risk)).collect();
            prop_assert!((c_index(&negated).unwrap() - (1.0 - c)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn km_is_monotone_and_bounded(seed in 0u64..100_000, n in 1usize..60) {
        let curve = km_curve(&random_points(seed, n));
        let mut prev = 1.0;
        for s in &curve.steps {
            prop_assert!(s.survival <= prev && s.survival >= 0.0);
            prev = s.survival;
        }
    }

    #[test]
    fn chi_square_tail_matches_reference(x in 0.0f64..60.0, dof in 1u32..6) {
        let reference = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(x);
        let got = chi_square_sf(x, dof as f64);
        prop_assert!((got - reference).abs() <= 1e-10 * reference.max(1e-300).max(1.0), "{} vs {}", got, reference);
    }

    #[test]
    fn batch_loss_decomposes(logits in prop::collection::vec(prop::collection::vec(-6.0f64..6.0, 3), 1..6), seed in 0u64..1000) {
        let mut r = rng(seed);
        let outputs: Vec<_> = logits.iter().map(|l| hazards_from_logits(l)).collect();
        let labels: Vec<_> = (0..outputs.len()).map(|_| SurvivalLabel {
            time: 1.0,
            censor: if r.random_bool(0.5) { Censor::Event } else { Censor::Censored },
            bin: r.random_range(0..3),
        }).collect();
        let res = nll_loss(&outputs, &labels).unwrap();
        prop_assert_eq!(res.loss, res.per_sample.iter().sum::<f64>());
        prop_assert!(res.per_sample.iter().all(|l| *l >= 0.0 && l.is_finite()));
    }

    #[test]
    fn hazards_stay_in_open_interval(logits in prop::collection::vec(-1e4f64..1e4, 1..8)) {
        let out = hazards_from_logits(&logits);
        prop_assert!(out.hazards.iter().all(|h| *h >= HAZARD_EPS && *h <= 1.0 - HAZARD_EPS));
        prop_assert!(out.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(out.risk, risk_score(&out));
    }
}

/// (1,E) (2,C) (3,E) (3,E) (5,C) (6,E): S = 5/6 at 1, 5/12 at 3, 0 at 6.
#[test]
fn km_matches_hand_table() {
    let pts = [pt(1.0, true, 0.0), pt(2.0, false, 0.0), pt(3.0, true, 0.0), pt(3.0, true, 0.0), pt(5.0, false, 0.0), pt(6.0, true, 0.0)];
    let curve = km_curve(&pts);
    let expected = [(1.0, 5.0 / 6.0, 6, 1), (3.0, 5.0 / 12.0, 4, 2), (6.0, 0.0, 1, 1)];
    assert_eq!(curve.steps.len(), expected.len());
    for (s, (t, surv, at_risk, events)) in curve.steps.iter().zip(expected) {
        assert_eq!(s.time, t);
        assert!((s.survival - surv).abs() <= 1e-9);
        assert_eq!((s.at_risk, s.events), (at_risk, events));
    }
    assert!((curve.survival_at(4.0) - 5.0 / 12.0).abs() <= 1e-9);
    assert_eq!(curve.survival_at(0.5), 1.0);
    let csv = km_csv(&[("all", &curve)]);
    assert!(csv.starts_with("group,time,survival,at_risk\nall,0,1,6\n"));
}

/// A = (1,E) (3,E) (5,C), B = (2,C) (3,E) (6,E).
/// t=1: E_A = 1/2, V = 1/4; t=3: E_A = 1, V = 1/3; t=6: E_A = 0, V = 0.
/// O_A = 2, E_A = 3/2, V = 7/12, χ² = (1/2)² / (7/12) = 3/7.
#[test]
fn logrank_matches_hand_table() {
    let a = [pt(1.0, true, 0.0), pt(3.0, true, 0.0), pt(5.0, false, 0.0)];
    let b = [pt(2.0, false, 0.0), pt(3.0, true, 0.0), pt(6.0, true, 0.0)];
    let lr = logrank_test(&a, &b).unwrap();
    assert!((lr.observed_a - 2.0).abs() <= 1e-9);
    assert!((lr.expected_a - 1.5).abs() <= 1e-9);
    assert!((lr.variance - 7.0 / 12.0).abs() <= 1e-9);
    assert!((lr.statistic - 3.0 / 7.0).abs() <= 1e-9);
    let reference = 1.0 - ChiSquared::new(1.0).unwrap().cdf(3.0 / 7.0);
    assert!((lr.p_value - reference).abs() <= 1e-9);
}

#[test]
fn logrank_is_symmetric_in_groups() {
    let pts = random_points(9, 40);
    let (high, low) = stratify_median(&pts).unwrap();
    let ab = logrank_test(&high, &low).unwrap();
    let ba = logrank_test(&low, &high).unwrap();
    assert!((ab.statistic - ba.statistic).abs() <= 1e-12);
}

#[test]
fn logrank_without_events_is_degenerate() {
    let a = [pt(1.0, false, 0.0)];
    let b = [pt(2.0, false, 0.0)];
    assert!(matches!(logrank_test(&a, &b), Err(Error::DegenerateLogRank)));
}

#[test]
fn median_split_sizes() {
    let pts: Vec<_> = (0..10).map(|i| pt(i as f64, true, i as f64)).collect();
    let (high, low) = stratify_median(&pts).unwrap();
    assert_eq!((high.len(), low.len()), (5, 5));
    assert!(high.iter().all(|p| p.risk > 4.5));
}
