use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use hgsurv::datamodel::{validate_cohort, Censor};
use hgsurv::io::{read_cohort, write_cohort};
use hgsurv::synth::{generate, SynthConfig};

fn digest(dir: &std::path::Path) -> u64 {
    let mut files: Vec<_> = walk(dir);
    files.sort();
    let mut h = DefaultHasher::new();
    for f in files {
        f.strip_prefix(dir).unwrap().hash(&mut h);
        std::fs::read(&f).unwrap().hash(&mut h);
    }
    h.finish()
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

/// Fraction of (latent, time) pairs ordered oppositely: higher risk, shorter time.
fn kendall_concordance(z: &[f64], t: &[f64]) -> f64 {
    let (mut agree, mut total) = (0.0, 0.0);
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            if z[i] == z[j] || t[i] == t[j] {
                continue;
            }
            total += 1.0;
            if (z[i] > z[j]) == (t[i] < t[j]) {
                agree += 1.0;
            }
        }
    }
    agree / total
}

#[test]
fn planted_signal_orders_event_times() {
    for seed in 0..5 {
        let s = generate(&SynthConfig {
            seed,
            censor_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        let t: Vec<f64> = s.cohort.patients.iter().map(|p| p.label.time).collect();
        let k = kendall_concordance(&s.latent, &t);
        assert!(k >= 0.9, "seed {seed}: concordance {k}");
    }
}

#[test]
fn same_seed_same_bytes_different_seed_different_bytes() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, seed) in dirs.iter().zip([5, 5, 6]) {
        let s = generate(&SynthConfig { seed, n_patients: 12, ..Default::default() }).unwrap();
        write_cohort(&s.cohort, dir.path()).unwrap();
    }
    let h: Vec<u64> = dirs.iter().map(|d| digest(d.path())).collect();
    assert_eq!(h[0], h[1]);
    assert_ne!(h[0], h[2]);
}

#[test]
fn generated_cohorts_validate_and_reload() {
    for seed in 0..3 {
        let s = generate(&SynthConfig { seed, ..Default::default() }).unwrap();
        assert!(validate_cohort(&s.cohort).is_empty());
        let dir = tempfile::tempdir().unwrap();
        write_cohort(&s.cohort, dir.path()).unwrap();
        assert_eq!(read_cohort(dir.path()).unwrap(), s.cohort);
    }
}

#[test]
fn censoring_follows_rate() {
    let none = generate(&SynthConfig { censor_rate: 0.0, ..Default::default() }).unwrap();
    assert!(none.cohort.patients.iter().all(|p| p.label.censor == Censor::Event));
    let some = generate(&SynthConfig { censor_rate: 0.5, n_patients: 400, ..Default::default() }).unwrap();
    let frac = some.cohort.patients.iter().filter(|p| p.label.censor == Censor::Censored).count() as f64 / 400.0;
    assert!((0.4..0.6).contains(&frac), "{frac}");
}

#[test]
fn zero_signal_leaves_features_unrelated_to_latent() {
    let a = generate(&SynthConfig { signal_strength: 0.0, seed: 3, ..Default::default() }).unwrap();
    let b = generate(&SynthConfig { signal_strength: 2.0, seed: 3, ..Default::default() }).unwrap();
    // same draws, so the first patch only differs by the planted shift
    let pa = &a.cohort.patients[0].slides[0].patches[0].feature;
    let pb = &b.cohort.patients[0].slides[0].patches[0].feature;
    assert_ne!(pa, pb);
    let ga = &a.cohort.patients[0].genes.as_ref().unwrap().groups[0];
    let z = a.latent[0];
    let gb = &b.cohort.patients[0].genes.as_ref().unwrap().groups[0];
    let shift: f64 = ga.iter().zip(gb).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt();
    assert!((shift - 2.0 * z.abs()).abs() < 1e-9);
}

#[test]
fn slide_kinds_alternate() {
    let s = generate(&SynthConfig { min_slides: 2, max_slides: 2, n_patients: 3, folds: 3, ..Default::default() }).unwrap();
    for p in &s.cohort.patients {
        assert_eq!(p.slides.len(), 2);
        assert_ne!(p.slides[0].kind, p.slides[1].kind);
    }
}
