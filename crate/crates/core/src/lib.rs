//! Multimodal survival prediction over hypergraphs of pathology patches and
//! genomic groups, with a momentum memory bank for missing modalities.

pub mod attention;
pub mod cli;
pub mod datamodel;
pub mod error;
pub mod experiment;
pub mod hgcore;
pub mod hyperedges;
pub mod io;
pub mod membank;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod survival;
pub mod synth;

pub use error::{Error, Result};
