//! Domain types shared across the pipeline: patches, slides, gene groups,
//! survival labels, patient records and cohorts.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 4;
pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_GENE_GROUPS: [&str; 6] = [
    "tumor_suppression",
    "oncogenesis",
    "kinases",
    "cellular_differentiation",
    "transcription",
    "cytokines",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFeature {
    pub feature: Vec<f64>,
    pub coord: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlideKind {
    #[serde(rename = "FFPE")]
    Ffpe,
    #[serde(rename = "FF")]
    Ff,
}

impl fmt::Display for SlideKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlideKind::Ffpe => f.write_str("FFPE"),
            SlideKind::Ff => f.write_str("FF"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slide {
    pub slide_id: String,
    pub kind: SlideKind,
    pub patches: Vec<PatchFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneGroups {
    pub groups: Vec<Vec<f64>>,
    pub group_names: Vec<String>,
}

impl GeneGroups {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Observation status. The loss boundary maps this onto the 0/1 censor code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Censor {
    Event,
    Censored,
}

impl Censor {
    pub fn is_event(self) -> bool {
        self == Censor::Event
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalLabel {
    pub time: f64,
    pub censor: Censor,
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub slides: Vec<Slide>,
    pub genes: Option<GeneGroups>,
    pub label: SurvivalLabel,
}

impl PatientRecord {
    pub fn has_pathology(&self) -> bool {
        !self.slides.is_empty()
    }

    pub fn has_genomics(&self) -> bool {
        self.genes.is_some()
    }

    pub fn num_patches(&self) -> usize {
        self.slides.iter().map(|s| s.patches.len()).sum()
    }

    /// All patch features stacked slide by slide (global patch order).
    pub fn patch_matrix(&self) -> Array2<f64> {
        let n = self.num_patches();
        let d = self
            .slides
            .iter()
            .flat_map(|s| s.patches.first())
            .map(|p| p.feature.len())
            .next()
            .unwrap_or(0);
        let mut out = Array2::zeros((n, d));
        let mut row = 0;
        for slide in &self.slides {
            for p in &slide.patches {
                for (j, v) in p.feature.iter().enumerate() {
                    out[[row, j]] = *v;
                }
                row += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub patients: Vec<PatientRecord>,
    pub d: usize,
    pub bin_edges: Vec<f64>,
    pub folds: Vec<usize>,
    pub num_folds: usize,
}

impl Cohort {
    pub fn num_bins(&self) -> usize {
        self.bin_edges.len().saturating_sub(1)
    }

    /// Indices of patients in `fold` (validation) and the rest (training).
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (i, f) in self.folds.iter().enumerate() {
            if *f == fold {
                val.push(i);
            } else {
                train.push(i);
            }
        }
        (train, val)
    }

    /// Recompute bin edges and every label's bin for `bins` bins.
    pub fn rebin(&mut self, bins: usize) -> Result<BinAssignment> {
        let times: Vec<f64> = self.patients.iter().map(|p| p.label.time).collect();
        let censors: Vec<Censor> = self.patients.iter().map(|p| p.label.censor).collect();
        let assignment = assign_bins(&times, &censors, bins)?;
        for (p, b) in self.patients.iter_mut().zip(&assignment.bins) {
            p.label.bin = *b;
        }
        self.bin_edges = assignment.edges.clone();
        Ok(assignment)
    }

    /// Deterministic shuffled round-robin fold assignment.
    pub fn assign_folds(&mut self, num_folds: usize, seed: u64) -> Result<()> {
        if num_folds == 0 || num_folds > self.patients.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} patients into {num_folds} folds",
                self.patients.len()
            )));
        }
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..self.patients.len()).collect();
        order.shuffle(&mut crate::rng::substream(seed, "folds", 0));
        self.folds = vec![0; self.patients.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            self.folds[idx] = rank % num_folds;
        }
        self.num_folds = num_folds;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinAssignment {
    pub edges: Vec<f64>,
    pub bins: Vec<usize>,
    /// Set when quantile edges collapsed and equal-width edges were used.
    pub fallback: bool,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Bin index of `time` given `edges`: only the interior edges cut, so times
/// outside the outer edges clamp to the first or last bin.
pub fn bin_of(time: f64, edges: &[f64]) -> usize {
    let b = edges.len() - 1;
    edges[1..b].iter().filter(|cut| time >= **cut).count()
}

/// Quantile binning of survival times using the uncensored times.
pub fn assign_bins(times: &[f64], censors: &[Censor], bins: usize) -> Result<BinAssignment> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    if times.len() != censors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times vs {} censor flags",
            times.len(),
            censors.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument("no survival times".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::InvalidArgument(format!("invalid survival time {t}")));
    }

    let mut reference: Vec<f64> = times
        .iter()
        .zip(censors)
        .filter(|(_, c)| c.is_event())
        .map(|(t, _)| *t)
        .collect();
    if reference.len() < 2 {
        reference = times.to_vec();
    }
    reference.sort_by(f64::total_cmp);

    let mut edges: Vec<f64> = (0..=bins)
        .map(|b| quantile_sorted(&reference, b as f64 / bins as f64))
        .collect();
    let strictly_increasing = edges.windows(2).all(|w| w[0] < w[1]);
    let fallback = !strictly_increasing;
    if fallback {
        let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 / bins as f64 };
        edges = (0..=bins).map(|b| lo + width * b as f64).collect();
    }
    let assigned = times.iter().map(|t| bin_of(*t, &edges)).collect();
    Ok(BinAssignment {
        edges,
        bins: assigned,
        fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Empty for cohort-level problems.
    pub patient_id: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.patient_id.is_empty() {
            write!(f, "cohort: {}", self.message)
        } else {
            write!(f, "{}: {}", self.patient_id, self.message)
        }
    }
}

/// Reports every invariant violation; an empty list means the cohort is valid.
pub fn validate_cohort(cohort: &Cohort) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut cohort_issue = |message: String| {
        out.push(Violation {
            patient_id: String::new(),
            message,
        })
    };
    if cohort.bin_edges.len() < 3 {
        cohort_issue(format!("need at least 2 bins, have {} edges", cohort.bin_edges.len()));
    } else if !cohort.bin_edges.windows(2).all(|w| w[0] < w[1]) {
        cohort_issue("bin edges are not strictly increasing".into());
    }
    if cohort.folds.len() != cohort.patients.len() {
        cohort_issue(format!(
            "{} fold indices for {} patients",
            cohort.folds.len(),
            cohort.patients.len()
        ));
    }
    let mut ids = HashSet::new();
    let mut gene_shape: Option<Vec<usize>> = None;
    let edges_ok = cohort.bin_edges.len() >= 3;

    for (i, p) in cohort.patients.iter().enumerate() {
        let mut issue = |message: String| {
            out.push(Violation {
                patient_id: p.patient_id.clone(),
                message,
            })
        };
        if !ids.insert(p.patient_id.as_str()) {
            issue("duplicate patient id".into());
        }
        if !p.has_pathology() && !p.has_genomics() {
            issue("empty record".into());
        }
        for slide in &p.slides {
            if slide.patches.is_empty() {
                issue(format!("slide {} has no patches", slide.slide_id));
            }
            for (k, patch) in slide.patches.iter().enumerate() {
                if patch.feature.len() != cohort.d {
                    issue(format!(
                        "slide {} patch {k} has feature length {} (expected {})",
                        slide.slide_id,
                        patch.feature.len(),
                        cohort.d
                    ));
                }
                if !patch.coord.0.is_finite() || !patch.coord.1.is_finite() {
                    issue(format!("slide {} patch {k} has non-finite coordinates", slide.slide_id));
                }
                if patch.feature.iter().any(|v| !v.is_finite()) {
                    issue(format!("slide {} patch {k} has non-finite features", slide.slide_id));
                }
            }
        }
        if let Some(genes) = &p.genes {
            if genes.groups.is_empty() {
                issue("gene groups are empty".into());
            }
            if genes.groups.len() != genes.group_names.len() {
                issue("gene group names do not match group count".into());
            }
            let unique: HashSet<&String> = genes.group_names.iter().collect();
            if unique.len() != genes.group_names.len() {
                issue("gene group names are not unique".into());
            }
            if genes.groups.iter().flatten().any(|v| !v.is_finite()) {
                issue("gene features are not finite".into());
            }
            let shape: Vec<usize> = genes.groups.iter().map(Vec::len).collect();
            match &gene_shape {
                None => gene_shape = Some(shape),
                Some(expected) if *expected != shape => {
                    issue("gene group lengths differ from the rest of the cohort".into())
                }
                _ => {}
            }
        }
        let label = p.label;
        if !label.time.is_finite() || label.time < 0.0 {
            issue(format!("invalid survival time {}", label.time));
        } else if edges_ok && label.bin != bin_of(label.time, &cohort.bin_edges) {
            issue(format!(
                "bin {} inconsistent with time {} and cohort bin edges",
                label.bin, label.time
            ));
        }
        if let Some(f) = cohort.folds.get(i) {
            if *f >= cohort.num_folds {
                issue(format!("fold index {f} out of range for {} folds", cohort.num_folds));
            }
        }
    }
    out
}
