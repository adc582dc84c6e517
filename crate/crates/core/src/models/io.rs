//! Model files: 8-byte magic `EEGNET01`, the architecture as flat text, a
//! dropout seed, every parameter value (f64, little-endian) and the running
//! batch-norm statistics.

use std::path::Path;

use super::{ArchitectureConfig, Network};
use crate::bytes::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::kv::FlatConfig;
use crate::numcore::{ParamStore, Parameter, RunningStats, Tensor};

const MAGIC: &[u8; 8] = b"EEGNET01";

pub fn encode_network(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let text = net.config().to_flat().to_text();
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    for p in net.params.iter() {
        out.extend_from_slice(&(p.name.len() as u64).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.shape().len() as u64).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(net.bn_stats.len() as u64).to_le_bytes());
    for s in &net.bn_stats {
        out.push(s.initialized as u8);
        out.extend_from_slice(&(s.mean.len() as u64).to_le_bytes());
        for &v in s.mean.iter().chain(&s.var) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_network(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::new(bytes);
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let n = r.usize()?;
    let text = r.utf8(n)?;
    let config = ArchitectureConfig::from_flat(&FlatConfig::parse(&text)?)?;
    let mut params = ParamStore::new();
    for _ in 0..r.usize()? {
        let n = r.usize()?;
        let name = r.utf8(n)?;
        let rank = r.usize()?;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let numel = numel.ok_or_else(|| Error::Corruption("parameter shape overflows".into()))?;
        let value = Tensor::new(shape, r.f64_vec(numel)?).map_err(|e| Error::Corruption(e.to_string()))?;
        params.add(Parameter::new(name, value));
    }
    let mut stats = Vec::new();
    for _ in 0..r.usize()? {
        let initialized = r.u8()? != 0;
        let c = r.usize()?;
        let mut s = RunningStats::new(c);
        s.mean = r.f64_vec(c)?;
        s.var = r.f64_vec(c)?;
        s.initialized = initialized;
        stats.push(s);
    }
    if !r.is_at_end() {
        return Err(Error::Corruption("trailing bytes after model".into()));
    }
    Network::from_parts(config, params, stats, 0)
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    write_file(path, &encode_network(net))
}

pub fn load_network(path: &Path) -> Result<Network> {
    decode_network(&read_file(path)?)
}
