//! Deep, shallow and linear pathology classifiers built from an
//! [`ArchitectureConfig`].

mod config;
mod io;
mod network;

pub use config::{ArchKind, ArchitectureConfig, BlockConfig, Nonlinearity, PoolKind, N_CLASSES};
pub use io::{decode_network, encode_network, load_network, save_network};
pub use network::{build_deep, build_from_hpo, build_linear, build_shallow, Layer, Network};

#[cfg(test)]
mod tests;
