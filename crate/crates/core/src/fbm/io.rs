//! Binary path files.
//!
//! Layout (all little-endian):
//!
//! | field   | type  |
//! |---------|-------|
//! | magic   | `b"FBMP"` |
//! | version | u16   |
//! | d       | u16   |
//! | n       | u64   |
//! | H       | f64   |
//! | t       | f64   |
//! | seed    | u64   |
//! | method  | u8    |
//!
//! followed by `d·(n+1)` f64 values, component-major.

use std::io::{Read, Write};

use super::{FbmPath, HurstModel, SynthesisMethod, TimeGrid};
use crate::error::{Error, Result};

pub const PATH_FILE_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"FBMP";

pub fn write_path<W: Write>(path: &FbmPath, mut out: W) -> Result<()> {
    let d = u16::try_from(path.dim())
        .map_err(|_| Error::Format(format!("dimension {} does not fit in u16", path.dim())))?;
    out.write_all(MAGIC)?;
    out.write_all(&PATH_FILE_VERSION.to_le_bytes())?;
    out.write_all(&d.to_le_bytes())?;
    out.write_all(&(path.grid().n() as u64).to_le_bytes())?;
    out.write_all(&path.model().hurst().to_le_bytes())?;
    out.write_all(&path.grid().horizon().to_le_bytes())?;
    out.write_all(&path.seed().to_le_bytes())?;
    out.write_all(&[path.method().code()])?;
    for comp in path.components() {
        for v in comp {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a path file. The file carries no multi-index, so the returned
/// model has `k = e_1`.
pub fn read_path<R: Read>(mut input: R) -> Result<FbmPath> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not an FBMP file".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut input)?);
    if version != PATH_FILE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = u16::from_le_bytes(read_array(&mut input)?) as usize;
    let n = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let hurst = f64::from_le_bytes(read_array(&mut input)?);
    let horizon = f64::from_le_bytes(read_array(&mut input)?);
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let [code] = read_array::<1, _>(&mut input)?;
    let method = SynthesisMethod::from_code(code)?;

    let model = HurstModel::first_order(hurst, d, horizon)?;
    let grid = TimeGrid::new(n, horizon)?;
    let mut values = Vec::with_capacity(d);
    for _ in 0..d {
        let mut comp = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            comp.push(f64::from_le_bytes(read_array(&mut input)?));
        }
        values.push(comp);
    }
    FbmPath::from_values(model, grid, values, seed, method)
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}
