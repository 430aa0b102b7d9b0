//! Binary checkpoints: magic `LNDK`, format version, a fixed header and the
//! distribution values, all little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::phase::{DistributionField, Grid};

pub const MAGIC: &[u8; 4] = b"LNDK";
pub const VERSION: u32 = 1;
/// Magic, version, four integers and four reals.
pub const HEADER_BYTES: usize = 4 + 4 + 8 * 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub gamma: f64,
    pub field: DistributionField,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let g = &self.field.grid;
        let mut out = Vec::with_capacity(HEADER_BYTES + 8 * self.field.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for n in [g.d_x, g.d_v, g.n_x, g.n_v] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for r in [g.l_x, g.v_max, self.gamma, self.field.time] {
            out.extend_from_slice(&r.to_le_bytes());
        }
        for v in &self.field.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("missing LNDK magic".into()));
        }
        let word = |i: usize| -> [u8; 8] { bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let ints: Vec<usize> = (0..4).map(|i| u64::from_le_bytes(word(i)) as usize).collect();
        let reals: Vec<f64> = (4..8).map(|i| f64::from_le_bytes(word(i))).collect();
        let (d_x, d_v, n_x, n_v) = (ints[0], ints[1], ints[2], ints[3]);
        let grid = if d_v == 1 {
            Grid::transport_only(d_x, d_v, n_x, n_v, reals[0], reals[1])?
        } else {
            Grid::new(d_x, d_v, n_x, n_v, reals[0], reals[1])?
        };
        let body = &bytes[HEADER_BYTES..];
        if body.len() != 8 * grid.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} values, found {} bytes",
                grid.len(),
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            gamma: reals[2],
            field: DistributionField::from_values(&grid, reals[3], values)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
