//! Cartesian parameter grids and per-cell seeds.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `"model.gamma:10,20;model.omega:0.5,1"`.
pub fn parse_axes(spec: &str) -> Result<Vec<SweepAxis>> {
    let mut axes: Vec<SweepAxis> = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, vals) = part
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("sweep axis `{part}` lacks `key:values`")))?;
        let key = key.trim().to_string();
        let values: Vec<String> = vals
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if key.is_empty() || values.is_empty() {
            return Err(Error::invalid(format!("sweep axis `{part}` is empty")));
        }
        if axes.iter().any(|a| a.key == key) {
            return Err(Error::invalid(format!("sweep axis `{key}` repeated")));
        }
        axes.push(SweepAxis { key, values });
    }
    if axes.is_empty() {
        return Err(Error::invalid("sweep needs at least one axis"));
    }
    Ok(axes)
}

/// All grid cells; the first axis varies slowest.
pub fn cells(axes: &[SweepAxis]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    out
}

/// Seed of grid cell `index`: the master seed for cell 0, otherwise the
/// first eight bytes of `SHA-256(tag ‖ master ‖ index)`.
pub fn derived_seed(master: u64, index: usize) -> u64 {
    if index == 0 {
        return master;
    }
    let mut h = Sha256::new();
    h.update(b"qel.sweep.cell.v1");
    h.update(master.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

pub fn cell_dir_name(index: usize) -> String {
    format!("cell_{index:04}")
}
