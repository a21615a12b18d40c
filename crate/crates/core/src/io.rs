//! Cohort directories on disk.
//!
//! ```text
//! cohort.json             manifest: width, bins, folds, patient list
//! survival.csv            patient_id,time_months,event   (event=1: observed)
//! slides/<slide_id>.csv   x,y,f0,...,f{d-1}
//! genes/<patient_id>.csv  name,v0,v1,...                 (one row per group)
//! ```
//!
//! Reals are written with the shortest round-trip representation, so a
//! write/read cycle reproduces the cohort exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::{
    bin_of, validate_cohort, Censor, Cohort, GeneGroups, PatchFeature, PatientRecord, Slide, SlideKind, SurvivalLabel,
};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "cohort.json";
pub const SURVIVAL_FILE: &str = "survival.csv";
const FORMAT: &str = "hgsurv-cohort";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SlideEntry {
    slide_id: String,
    kind: SlideKind,
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PatientEntry {
    patient_id: String,
    fold: usize,
    slides: Vec<SlideEntry>,
    genes: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    d: usize,
    bin_edges: Vec<f64>,
    num_folds: usize,
    patients: Vec<PatientEntry>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn join_reals(out: &mut String, values: &[f64]) {
    for v in values {
        let _ = write!(out, ",{v}");
    }
}

fn check_file_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['/', '\\', ',']) || name.starts_with('.') {
        return Err(Error::InvalidArgument(format!("identifier {name:?} cannot be used as a file name")));
    }
    Ok(())
}

pub fn slide_csv(slide: &Slide, d: usize) -> String {
    let mut out = String::from("x,y");
    for j in 0..d {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for p in &slide.patches {
        let _ = write!(out, "{},{}", p.coord.0, p.coord.1);
        join_reals(&mut out, &p.feature);
        out.push('\n');
    }
    out
}

pub fn genes_csv(genes: &GeneGroups) -> String {
    let mut out = String::new();
    for (name, values) in genes.group_names.iter().zip(&genes.groups) {
        out.push_str(name);
        join_reals(&mut out, values);
        out.push('\n');
    }
    out
}

pub fn survival_csv(patients: &[PatientRecord]) -> String {
    let mut out = String::from("patient_id,time_months,event\n");
    for p in patients {
        let event = u8::from(p.label.censor.is_event());
        let _ = writeln!(out, "{},{},{event}", p.patient_id, p.label.time);
    }
    out
}

/// Write `cohort` under `dir`, creating it if needed.
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> Result<()> {
    let mut entries = Vec::with_capacity(cohort.patients.len());
    for (i, p) in cohort.patients.iter().enumerate() {
        check_file_name(&p.patient_id)?;
        let mut slides = Vec::new();
        for s in &p.slides {
            check_file_name(&s.slide_id)?;
            let file = format!("slides/{}.csv", s.slide_id);
            write_file(&dir.join(&file), &slide_csv(s, cohort.d))?;
            slides.push(SlideEntry {
                slide_id: s.slide_id.clone(),
                kind: s.kind,
                file,
            });
        }
        let genes = match &p.genes {
            Some(g) => {
                let file = format!("genes/{}.csv", p.patient_id);
                write_file(&dir.join(&file), &genes_csv(g))?;
                Some(file)
            }
            None => None,
        };
        entries.push(PatientEntry {
            patient_id: p.patient_id.clone(),
            fold: cohort.folds.get(i).copied().unwrap_or(0),
            slides,
            genes,
        });
    }
    write_file(&dir.join(SURVIVAL_FILE), &survival_csv(&cohort.patients))?;
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        d: cohort.d,
        bin_edges: cohort.bin_edges.clone(),
        num_folds: cohort.num_folds,
        patients: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), &text)
}

fn parse_real(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("not a number: {field:?}")))
}

fn read_slide(path: &Path, d: usize) -> Result<Vec<PatchFeature>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected: Vec<String> = ["x".to_string(), "y".to_string()]
        .into_iter()
        .chain((0..d).map(|j| format!("f{j}")))
        .collect();
    if cols != expected {
        return Err(Error::parse(path, 1, format!("expected header x,y,f0..f{}", d.saturating_sub(1))));
    }
    let mut patches = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(Error::parse(path, i + 1, format!("expected {} fields, got {}", d + 2, fields.len())));
        }
        let values = fields
            .iter()
            .map(|f| parse_real(path, i + 1, f))
            .collect::<Result<Vec<_>>>()?;
        patches.push(PatchFeature {
            coord: (values[0], values[1]),
            feature: values[2..].to_vec(),
        });
    }
    Ok(patches)
}

fn read_genes(path: &Path) -> Result<GeneGroups> {
    let text = read_file(path)?;
    let mut groups = Vec::new();
    let mut group_names = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or_default().trim();
        if name.is_empty() {
            return Err(Error::parse(path, i + 1, "missing group name"));
        }
        let values = fields.map(|f| parse_real(path, i + 1, f)).collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::parse(path, i + 1, format!("group {name} has no values")));
        }
        group_names.push(name.to_string());
        groups.push(values);
    }
    Ok(GeneGroups { groups, group_names })
}

fn read_survival(path: &Path) -> Result<HashMap<String, (f64, Censor)>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "patient_id,time_months,event" => {}
        _ => return Err(Error::parse(path, 1, "expected header patient_id,time_months,event")),
    }
    let mut out = HashMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, i + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let time = parse_real(path, i + 1, fields[1])?;
        let censor = match fields[2] {
            "1" => Censor::Event,
            "0" => Censor::Censored,
            other => return Err(Error::parse(path, i + 1, format!("event must be 0 or 1, got {other:?}"))),
        };
        if out.insert(fields[0].to_string(), (time, censor)).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate patient {}", fields[0])));
        }
    }
    Ok(out)
}

fn resolve(dir: &Path, file: &str) -> Result<PathBuf> {
    let rel = Path::new(file);
    if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(Error::InvalidArgument(format!("cohort file {file:?} escapes the cohort directory")));
    }
    Ok(dir.join(rel))
}

/// Read and validate a cohort directory.
pub fn read_cohort(dir: &Path) -> Result<Cohort> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_str(&read_file(&manifest_path)?)
        .map_err(|e| Error::parse(&manifest_path, e.line(), e.to_string()))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::parse(&manifest_path, 1, "unsupported cohort format"));
    }
    if manifest.bin_edges.len() < 3 {
        return Err(Error::parse(&manifest_path, 1, "need at least 2 bins"));
    }
    let survival = read_survival(&dir.join(SURVIVAL_FILE))?;

    let mut patients = Vec::with_capacity(manifest.patients.len());
    let mut folds = Vec::with_capacity(manifest.patients.len());
    for entry in &manifest.patients {
        let (time, censor) = *survival
            .get(&entry.patient_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no survival row for patient {}", entry.patient_id)))?;
        let slides = entry
            .slides
            .iter()
            .map(|s| {
                Ok(Slide {
                    slide_id: s.slide_id.clone(),
                    kind: s.kind,
                    patches: read_slide(&resolve(dir, &s.file)?, manifest.d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let genes = match &entry.genes {
            Some(file) => Some(read_genes(&resolve(dir, file)?)?),
            None => None,
        };
        if entry.fold >= manifest.num_folds.max(1) {
            return Err(Error::InvalidArgument(format!(
                "patient {} has fold {} of {}",
                entry.patient_id, entry.fold, manifest.num_folds
            )));
        }
        folds.push(entry.fold);
        patients.push(PatientRecord {
            patient_id: entry.patient_id.clone(),
            slides,
            genes,
            label: SurvivalLabel {
                time,
                censor,
                bin: bin_of(time, &manifest.bin_edges),
            },
        });
    }
    let cohort = Cohort {
        patients,
        d: manifest.d,
        bin_edges: manifest.bin_edges,
        folds,
        num_folds: manifest.num_folds,
    };
    let violations = validate_cohort(&cohort);
    if let Some(first) = violations.first() {
        return Err(Error::InvalidArgument(format!(
            "invalid cohort ({} problems), first: {first}",
            violations.len()
        )));
    }
    Ok(cohort)
}
