use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ModelParams, TrainConfig};

const FORMAT: &str = "hgsurv-checkpoint";
const VERSION: u32 = 1;

/// JSON container for trained parameters plus the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub bins: usize,
    pub gene_names: Vec<String>,
    pub config: TrainConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(params: ModelParams, config: TrainConfig, gene_names: Vec<String>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            d: params.d,
            bins: params.bins,
            gene_names,
            config,
            params,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "unsupported container {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.params.d != ck.d || ck.params.bins != ck.bins {
            return Err(Error::CheckpointMismatch("header disagrees with stored parameters".into()));
        }
        if !ck.params.is_finite() {
            return Err(Error::CheckpointMismatch("non-finite parameters".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Reject a checkpoint whose width or bin count differ from the data.
    pub fn check_shape(&self, d: usize, bins: usize) -> Result<()> {
        if self.d != d || self.bins != bins {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint has d={} B={}, data has d={d} B={bins}",
                self.d, self.bins
            )));
        }
        Ok(())
    }
}
