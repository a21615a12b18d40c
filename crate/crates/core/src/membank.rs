//! Memory bank of paired pathology / genomic summary vectors.
//!
//! Entries are momentum-updated during training and queried at inference to
//! stand in for a missing modality: cosine similarity against the available
//! modality's column selects the top-μ entries, whose missing-modality vectors
//! are averaged with softmax weights.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::softmax;
use crate::error::{Error, Result};
use crate::hyperedges::{cosine_similarity, top_k_indices};

pub const DEFAULT_THETA: f64 = 0.9;
pub const DEFAULT_MU: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Path,
    Gene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub key_id: String,
    pub path_vec: Vec<f64>,
    pub gene_vec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    d: usize,
    theta: f64,
    entries: Vec<BankEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub vector: Vec<f64>,
    /// Selected entry indices, most similar first.
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
}

impl MemoryBank {
    pub fn new(d: usize, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1], got {theta}")));
        }
        Ok(MemoryBank {
            d,
            theta,
            entries: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn get(&self, key_id: &str) -> Option<&BankEntry> {
        self.entries.iter().find(|e| e.key_id == key_id)
    }

    /// Insert a new key as-is, or blend `θ·new + (1 − θ)·old` into an existing one.
    pub fn update(&mut self, key_id: &str, path_vec: &[f64], gene_vec: &[f64]) -> Result<()> {
        if path_vec.len() != self.d || gene_vec.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "bank width {} vs vectors of length {} and {}",
                self.d,
                path_vec.len(),
                gene_vec.len()
            )));
        }
        let theta = self.theta;
        match self.entries.iter_mut().find(|e| e.key_id == key_id) {
            Some(entry) => {
                let blend = |old: &mut Vec<f64>, new: &[f64]| {
                    for (o, n) in old.iter_mut().zip(new) {
                        *o = theta * n + (1.0 - theta) * *o;
                    }
                };
                blend(&mut entry.path_vec, path_vec);
                blend(&mut entry.gene_vec, gene_vec);
            }
            None => self.entries.push(BankEntry {
                key_id: key_id.to_string(),
                path_vec: path_vec.to_vec(),
                gene_vec: gene_vec.to_vec(),
            }),
        }
        Ok(())
    }

    /// Reconstruct the modality that is not `available` from the `mu` entries
    /// most similar to `query`. `mu` is clamped to the bank size.
    pub fn retrieve_missing(&self, query: &[f64], available: Modality, mu: usize) -> Result<Retrieval> {
        if self.entries.is_empty() {
            return Err(Error::ColdMemory);
        }
        if query.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "query length {} vs bank width {}",
                query.len(),
                self.d
            )));
        }
        let mu = mu.clamp(1, self.entries.len());
        let sims: Vec<f64> = self
            .entries
            .iter()
            .map(|e| {
                let stored = match available {
                    Modality::Path => &e.path_vec,
                    Modality::Gene => &e.gene_vec,
                };
                cosine_similarity(query, stored)
            })
            .collect();
        let selected = top_k_indices(&sims, mu);
        let weights = softmax(&selected.iter().map(|i| sims[*i]).collect::<Vec<_>>());
        let mut vector = vec![0.0; self.d];
        for (i, w) in selected.iter().zip(&weights) {
            let missing = match available {
                Modality::Path => &self.entries[*i].gene_vec,
                Modality::Gene => &self.entries[*i].path_vec,
            };
            for (acc, v) in vector.iter_mut().zip(missing) {
                *acc += w * v;
            }
        }
        Ok(Retrieval {
            vector,
            selected,
            weights,
        })
    }

    /// Text form: header `d=<int> theta=<real>`, then `key p0 .. p{d-1} g0 .. g{d-1}` per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("d={} theta={}\n", self.d, self.theta);
        for e in &self.entries {
            out.push_str(&e.key_id);
            for v in e.path_vec.iter().chain(&e.gene_vec) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let mut d = None;
        let mut theta = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("d", v)) => d = v.parse::<usize>().ok(),
                Some(("theta", v)) => theta = v.parse::<f64>().ok(),
                _ => return Err(Error::parse(origin, 1, format!("unexpected header field `{field}`"))),
            }
        }
        let (d, theta) = match (d, theta) {
            (Some(d), Some(t)) => (d, t),
            _ => return Err(Error::parse(origin, 1, "header must be `d=<int> theta=<real>`")),
        };
        let mut bank = MemoryBank::new(d, theta).map_err(|e| Error::parse(origin, 1, e.to_string()))?;
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let key = fields.next().expect("nonempty line");
            let values = fields
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::parse(origin, lineno, format!("bad number: {e}")))?;
            if values.len() != 2 * d {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {} values, found {}", 2 * d, values.len()),
                ));
            }
            if bank.get(key).is_some() {
                return Err(Error::parse(origin, lineno, format!("duplicate key `{key}`")));
            }
            bank.entries.push(BankEntry {
                key_id: key.to_string(),
                path_vec: values[..d].to_vec(),
                gene_vec: values[d..].to_vec(),
            });
        }
        Ok(bank)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}
