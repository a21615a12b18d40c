use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use hgsurv::experiment::{prepare_all, gene_lengths};
use hgsurv::model::{train_epoch, Checkpoint, TrainConfig, TrainState};
use hgsurv_ffi::*;

fn last_error() -> String {
    let p = hgs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn c_index_matches_library() {
    let times = [1.0, 2.0, 3.0, 4.0];
    let events = [1u8, 1, 0, 1];
    let risks = [4.0, 3.0, 2.0, 1.0];
    let mut out = 0.0;
    let s = unsafe { hgs_c_index(times.as_ptr(), events.as_ptr(), risks.as_ptr(), 4, &mut out) };
    assert_eq!(s, HgsStatus::Ok);
    assert_eq!(out, 1.0);
}

#[test]
fn null_pointers_are_reported() {
    let s = unsafe { hgs_c_index(ptr::null(), ptr::null(), ptr::null(), 3, ptr::null_mut()) };
    assert_eq!(s, HgsStatus::NullPointer);
    assert!(last_error().contains("null"));
}

#[test]
fn undefined_c_index_is_runtime_error() {
    let times = [1.0, 2.0];
    let events = [0u8, 0];
    let risks = [1.0, 2.0];
    let mut out = 0.0;
    let s = unsafe { hgs_c_index(times.as_ptr(), events.as_ptr(), risks.as_ptr(), 2, &mut out) };
    assert_eq!(s, HgsStatus::Runtime);
    assert!(last_error().contains("comparable"));
}

#[test]
fn logrank_separated_groups() {
    let ta = [1.0, 2.0, 3.0, 4.0, 5.0];
    let tb = [10.0, 11.0, 12.0, 13.0, 14.0];
    let e = [1u8; 5];
    let (mut stat, mut p) = (0.0, 0.0);
    let s = unsafe { hgs_logrank(ta.as_ptr(), e.as_ptr(), 5, tb.as_ptr(), e.as_ptr(), 5, &mut stat, &mut p) };
    assert_eq!(s, HgsStatus::Ok);
    assert!(stat > 0.0 && p < 0.05);
}

#[test]
fn cohort_round_trip_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let mut cohort = ptr::null_mut();
    assert_eq!(unsafe { hgs_cohort_generate(12, 3, 2.0, 0.2, &mut cohort) }, HgsStatus::Ok);
    assert_eq!(unsafe { hgs_cohort_len(cohort) }, 12);

    let cdir = dir.path().join("cohort");
    let cdir_c = CString::new(cdir.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hgs_cohort_write(cohort, cdir_c.as_ptr()) }, HgsStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { hgs_cohort_load(cdir_c.as_ptr(), &mut loaded) }, HgsStatus::Ok);

    let mut times = vec![0.0; 12];
    let mut events = vec![0u8; 12];
    assert_eq!(
        unsafe { hgs_cohort_labels(loaded, times.as_mut_ptr(), events.as_mut_ptr(), 12) },
        HgsStatus::Ok
    );

    // Train briefly through the Rust API and hand the files to the C side.
    let rust_cohort = hgsurv::io::read_cohort(&cdir).unwrap();
    let config = TrainConfig {
        epochs: 2,
        lr: 1e-3,
        ..Default::default()
    };
    let (lens, names) = gene_lengths(&rust_cohort).unwrap();
    let mut state = TrainState::new(rust_cohort.d, rust_cohort.num_bins(), &lens, &config).unwrap();
    let records = prepare_all(&rust_cohort, &config).unwrap();
    for _ in 0..config.epochs {
        train_epoch(&mut state, &records).unwrap();
    }
    let ck_path = dir.path().join("ck.json");
    let bank_path = dir.path().join("bank.txt");
    Checkpoint::new(state.params.clone(), config.clone(), names).save(&ck_path).unwrap();
    state.bank.save(&bank_path).unwrap();

    let ck_c = CString::new(ck_path.to_str().unwrap()).unwrap();
    let bank_c = CString::new(bank_path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hgs_model_load(ck_c.as_ptr(), bank_c.as_ptr(), &mut model) }, HgsStatus::Ok);

    let mut risks = vec![0.0; 12];
    for missing in [HgsMissing::None, HgsMissing::Gene, HgsMissing::Path] {
        let s = unsafe { hgs_model_predict(model, loaded, missing, risks.as_mut_ptr(), 12) };
        assert_eq!(s, HgsStatus::Ok, "{missing:?}: {}", last_error());
        assert!(risks.iter().all(|r| r.is_finite()));
    }
    // Same numbers as the Rust evaluator.
    unsafe { hgs_model_predict(model, loaded, HgsMissing::None, risks.as_mut_ptr(), 12) };
    let eval = hgsurv::model::evaluate(&state.params, &records, &config, Some(&state.bank), hgsurv::model::Missing::None)
        .unwrap();
    assert_eq!(risks, eval.risks);

    let s = unsafe { hgs_model_predict(model, loaded, HgsMissing::None, risks.as_mut_ptr(), 5) };
    assert_eq!(s, HgsStatus::InvalidArgument);

    unsafe {
        hgs_model_free(model);
        hgs_cohort_free(loaded);
        hgs_cohort_free(cohort);
    }
}

#[test]
fn missing_modality_without_bank_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = hgsurv::synth::generate(&hgsurv::synth::SynthConfig {
        n_patients: 6,
        folds: 2,
        ..Default::default()
    })
    .unwrap()
    .cohort;
    let config = TrainConfig::default();
    let (lens, names) = gene_lengths(&cohort).unwrap();
    let state = TrainState::new(cohort.d, cohort.num_bins(), &lens, &config).unwrap();
    let ck = dir.path().join("ck.json");
    Checkpoint::new(state.params, config, names).save(&ck).unwrap();
    let ck_c = CString::new(ck.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hgs_model_load(ck_c.as_ptr(), ptr::null(), &mut model) }, HgsStatus::Ok);
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { hgs_cohort_generate(6, 0, 1.0, 0.0, &mut handle) }, HgsStatus::Ok);
    let mut risks = vec![0.0; 6];
    let s = unsafe { hgs_model_predict(model, handle, HgsMissing::Gene, risks.as_mut_ptr(), 6) };
    assert_eq!(s, HgsStatus::InvalidArgument);
    assert!(last_error().contains("bank"));
    unsafe {
        hgs_model_free(model);
        hgs_cohort_free(handle);
    }
}

#[test]
fn load_errors_map_to_codes() {
    let missing = CString::new("/definitely/not/here").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hgs_cohort_load(missing.as_ptr(), &mut out) }, HgsStatus::Io);
    assert!(out.is_null());
    let bad = unsafe { hgs_cohort_generate(10, 0, 1.0, 1.0, &mut out) };
    assert_eq!(bad, HgsStatus::InvalidArgument);
    assert!(last_error().contains("censor_rate"));
}

#[test]
fn version_is_cargo_version() {
    let v = unsafe { CStr::from_ptr(hgs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// The generated header must be valid C on its own and usable from a caller.
#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hgsurv.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\n\
             int run(const char *dir) {{\n\
               HgsCohort *c = 0;\n\
               if (hgs_cohort_load(dir, &c) != HGS_STATUS_OK) return (int)hgs_cohort_len(c);\n\
               hgs_cohort_free(c);\n\
               return 0;\n\
             }}\n"
        ),
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
        .unwrap_or_else(|e| panic!("could not run {cc}: {e}"));
    assert!(status.success());
}
