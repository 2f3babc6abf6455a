//! Grid of trained gaits indexed by speed and turning radius.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! | bytes      | field                                                |
//! |------------|------------------------------------------------------|
//! | 4          | magic `QSGL`                                         |
//! | 4  u32     | format version (1)                                   |
//! | 4  u32     | flags, bit 0 = partial (some cells failed)           |
//! | 4  u32     | `nv`, speed axis length                              |
//! | 4  u32     | `nr`, radius axis length                             |
//! | 4  u32     | invocation length `n`, then `n` bytes of UTF-8       |
//! | 8·nv f64   | speed axis, m/s                                      |
//! | 8·nr f64   | radius axis, m (`+inf` = straight)                   |
//! | per cell   | speed-major, radius inner:                           |
//! |   1  u8    | status, 0 = trained, 1 = failed                      |
//! |   8  f64   | best surrogate cost                                  |
//! |   8·40 f64 | log-weights, leg-major (fl, fr, bl, br), 10 per leg  |

use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::ars::{self, ArsConfig};
use crate::error::{Error, Result};
use crate::planner::{GaitDefaults, GaitParams, Radius, WEIGHTS_PER_LEG};
use crate::sim::{LegWeights, Surrogate};

const MAGIC: &[u8; 4] = b"QSGL";
pub const LIBRARY_VERSION: u32 = 1;
const THETA_LEN: usize = 4 * WEIGHTS_PER_LEG;

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryCell {
    pub trained: bool,
    pub cost: f64,
    /// Leg-major log-weights.
    pub theta: Vec<f64>,
}

impl LibraryCell {
    pub fn weights(&self) -> Result<LegWeights> {
        ars::decode(&self.theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitLibrary {
    pub v_axis: Vec<f64>,
    pub r_axis: Vec<Radius>,
    /// Speed-major.
    pub cells: Vec<LibraryCell>,
    pub invocation: String,
}

impl GaitLibrary {
    pub fn is_partial(&self) -> bool {
        self.cells.iter().any(|c| !c.trained)
    }

    pub fn cell(&self, iv: usize, ir: usize) -> &LibraryCell {
        &self.cells[iv * self.r_axis.len() + ir]
    }

    /// Nearest cell in `(speed, curvature)`; straight has zero curvature.
    pub fn nearest(&self, v: f64, r: Radius) -> (usize, usize) {
        let nearest = |xs: &mut dyn Iterator<Item = f64>, x: f64| {
            xs.enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        let iv = nearest(&mut self.v_axis.iter().copied(), v);
        let ir = nearest(&mut self.r_axis.iter().map(|r| r.curvature()), r.curvature());
        (iv, ir)
    }

    pub fn lookup(&self, v: f64, r: Radius) -> &LibraryCell {
        let (iv, ir) = self.nearest(v, r);
        self.cell(iv, ir)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&LIBRARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.is_partial() as u32).to_le_bytes());
        out.extend_from_slice(&(self.v_axis.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.r_axis.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.invocation.len() as u32).to_le_bytes());
        out.extend_from_slice(self.invocation.as_bytes());
        for v in &self.v_axis {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for r in &self.r_axis {
            out.extend_from_slice(&r.to_f64().to_le_bytes());
        }
        for c in &self.cells {
            out.push(if c.trained { 0 } else { 1 });
            out.extend_from_slice(&c.cost.to_le_bytes());
            for t in &c.theta {
                out.extend_from_slice(&t.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let r = &mut bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(fmt_err)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a gait library file".into()));
        }
        let version = read_u32(r)?;
        if version != LIBRARY_VERSION {
            return Err(Error::Format(format!("unsupported library version {version}")));
        }
        let _flags = read_u32(r)?;
        let nv = read_u32(r)? as usize;
        let nr = read_u32(r)? as usize;
        let n_inv = read_u32(r)? as usize;
        if n_inv > r.len() {
            return Err(Error::Format("truncated invocation".into()));
        }
        let invocation = String::from_utf8(r[..n_inv].to_vec()).map_err(|e| Error::Format(e.to_string()))?;
        *r = &r[n_inv..];
        let v_axis = (0..nv).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let r_axis = (0..nr).map(|_| read_f64(r).map(Radius::from_f64)).collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(nv * nr);
        for _ in 0..nv * nr {
            let mut status = [0u8; 1];
            r.read_exact(&mut status).map_err(fmt_err)?;
            let cost = read_f64(r)?;
            let theta = (0..THETA_LEN).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
            cells.push(LibraryCell { trained: status[0] == 0, cost, theta });
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.len())));
        }
        Ok(Self { v_axis, r_axis, cells, invocation })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn fmt_err(e: std::io::Error) -> Error {
    Error::Format(format!("truncated library: {e}"))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(fmt_err)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(fmt_err)?;
    Ok(f64::from_le_bytes(b))
}

/// Trains every `(v, r)` cell. Cell `(iv, ir)` draws from RNG stream
/// `iv·nr + ir`, so the result does not depend on evaluation order. Failed
/// cells keep uniform weights and mark the library partial.
pub fn train_library(
    v_axis: &[f64],
    r_axis: &[Radius],
    surrogate: &Surrogate,
    gait: &GaitDefaults,
    cfg: &ArsConfig,
    invocation: &str,
) -> Result<GaitLibrary> {
    if v_axis.is_empty() || r_axis.is_empty() {
        return Err(Error::Config("library axes must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(v_axis.len() * r_axis.len());
    for (iv, &v) in v_axis.iter().enumerate() {
        for (ir, &r) in r_axis.iter().enumerate() {
            let cell = (iv * r_axis.len() + ir) as u64;
            let params = GaitParams::trot(v, r, gait.cycle_time);
            match ars::train_gait(surrogate, &params, cfg, cell) {
                Ok(t) => cells.push(LibraryCell { trained: true, cost: t.cost.total, theta: t.theta }),
                Err(e) => {
                    warn!("cell v = {v}, r = {:?} failed: {e}", r);
                    cells.push(LibraryCell { trained: false, cost: f64::NAN, theta: vec![0.0; THETA_LEN] });
                }
            }
        }
    }
    Ok(GaitLibrary { v_axis: v_axis.to_vec(), r_axis: r_axis.to_vec(), cells, invocation: invocation.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GaitLibrary {
        GaitLibrary {
            v_axis: vec![0.1, 0.3],
            r_axis: vec![Radius::Finite(-0.5), Radius::Straight],
            cells: (0..4)
                .map(|i| LibraryCell { trained: i != 2, cost: i as f64, theta: vec![0.01 * i as f64; THETA_LEN] })
                .collect(),
            invocation: "quadshape train-gaits --grid 2x2".into(),
        }
    }

    #[test]
    fn bytes_roundtrip() {
        let lib = tiny();
        let bytes = lib.to_bytes();
        let back = GaitLibrary::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.r_axis, lib.r_axis);
        assert!(back.is_partial());
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    }

    #[test]
    fn rejects_corrupt() {
        let bytes = tiny().to_bytes();
        assert!(GaitLibrary::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(GaitLibrary::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(GaitLibrary::from_bytes(&extra).is_err());
    }

    #[test]
    fn nearest_lookup() {
        let lib = tiny();
        assert_eq!(lib.nearest(0.25, Radius::Straight), (1, 1));
        assert_eq!(lib.nearest(0.0, Radius::Finite(-0.4)), (0, 0));
        assert_eq!(lib.nearest(0.0, Radius::Finite(5.0)), (0, 1));
    }
}
