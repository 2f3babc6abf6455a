//! Model file layout (little-endian):
//!
//! | bytes          | field                                          |
//! |----------------|------------------------------------------------|
//! | 4              | magic `QSNN`                                   |
//! | 4  u32         | format version (1)                             |
//! | 4  u32 + n     | architecture as JSON                           |
//! | 4  u32 + n     | invocation line                                |
//! | 4  u32         | tensor count                                   |
//! | per tensor     | u32 name length, name, u32 rank, u32 per dim   |
//! | 8  u64         | parameter count                                |
//! | 8 per param    | f64 parameters in manifest order               |
//!
//! Loading rebuilds the network from the architecture and rejects the file
//! unless the stored manifest matches it exactly.

use std::io::Read;
use std::path::Path;

use super::network::{Architecture, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QSNN";
pub const MODEL_VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated model: {e}")))?;
    Ok(b)
}

fn take_u32(r: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(take(r)?))
}

fn take_str(r: &mut &[u8]) -> Result<String> {
    let n = take_u32(r)? as usize;
    if n > r.len() {
        return Err(Error::Format("truncated model string".into()));
    }
    let s = String::from_utf8(r[..n].to_vec()).map_err(|e| Error::Format(e.to_string()))?;
    *r = &r[n..];
    Ok(s)
}

pub fn model_to_bytes(net: &Network, invocation: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let arch = serde_json::to_string(net.architecture()).map_err(|e| Error::Format(e.to_string()))?;
    put_str(&mut out, &arch);
    put_str(&mut out, invocation);
    let manifest = net.manifest();
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    for (name, shape) in &manifest {
        put_str(&mut out, name);
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(net.params().len() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

/// Network and stored invocation line.
pub fn model_from_bytes(mut bytes: &[u8]) -> Result<(Network, String)> {
    let r = &mut bytes;
    if &take::<4>(r)? != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = take_u32(r)?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let arch: Architecture = serde_json::from_str(&take_str(r)?).map_err(|e| Error::Format(e.to_string()))?;
    let invocation = take_str(r)?;
    let mut net = Network::zeroed(arch)?;
    let n = take_u32(r)? as usize;
    let mut manifest = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let name = take_str(r)?;
        let rank = take_u32(r)? as usize;
        let shape = (0..rank).map(|_| take_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        manifest.push((name, shape));
    }
    if manifest != net.manifest() {
        return Err(Error::Format("layer manifest does not match the architecture".into()));
    }
    let count = u64::from_le_bytes(take(r)?) as usize;
    if count != net.params().len() || r.len() != 8 * count {
        return Err(Error::Format(format!(
            "expected {} parameters, header says {count} with {} bytes left",
            net.params().len(),
            r.len()
        )));
    }
    let params = r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    net.set_params(params)?;
    Ok((net, invocation))
}

pub fn save_model(net: &Network, invocation: &str, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(net, invocation)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Network, String)> {
    model_from_bytes(&std::fs::read(path)?)
}
