mod bytes;
pub mod eegdata;
pub mod error;
pub mod evaluation;
pub mod hpo;
pub mod kv;
pub mod models;
pub mod numcore;
pub mod perturbviz;
pub mod reports;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
