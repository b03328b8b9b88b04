//! Network file coding: a compact little-endian binary layout plus a JSON
//! alternative for debugging.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic "RNWK" | version u16 | mode u8 | depth u32 | widths (depth+2) x u32
//! for i in 0..=depth:  weight block  = count u64, then count x (row u32, col u32, value f64)
//! for i in 1..=depth:  shift block   = count u64, then count x (index u32, value f64)
//! ```
//!
//! There is no shift block for the input, matching the in-memory layout.

use super::{Architecture, Network, SparseMat, SparseVec, WeightMode};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"RNWK";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Binary,
    Json,
}

impl FileFormat {
    /// Pick a format from a file extension; `.json` is JSON, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => FileFormat::Json,
            _ => FileFormat::Binary,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonEnvelope {
    format: String,
    version: u16,
    mode: WeightMode,
    depth: usize,
    widths: Vec<usize>,
    weights: Vec<Vec<(u32, u32, f64)>>,
    shifts: Vec<Vec<(u32, f64)>>,
}

pub fn write_network(net: &Network, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    match FileFormat::from_path(path) {
        FileFormat::Binary => write_binary(net, &mut file),
        FileFormat::Json => write_json(net, &mut file),
    }
}

pub fn read_network(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes)
    } else {
        read_json(&bytes)
    }
}

pub(crate) fn write_binary(net: &Network, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match net.mode() {
        WeightMode::Strict => 0u8,
        WeightMode::Relaxed => 1u8,
    }])?;
    w.write_all(&(net.depth() as u32).to_le_bytes())?;
    for &p in net.widths() {
        w.write_all(&(p as u32).to_le_bytes())?;
    }
    for mat in net.weights() {
        w.write_all(&(mat.entries.len() as u64).to_le_bytes())?;
        for &(r, c, v) in &mat.entries {
            w.write_all(&r.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for sv in net.shifts() {
        w.write_all(&(sv.entries.len() as u64).to_le_bytes())?;
        for &(i, v) in &sv.entries {
            w.write_all(&i.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated file: needed {n} bytes for {what} at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub(crate) fn read_binary(bytes: &[u8]) -> Result<Network> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic; not a network file".into()));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::Version { got: version, supported: VERSION });
    }
    let mode = match cur.take(1, "mode")?[0] {
        0 => WeightMode::Strict,
        1 => WeightMode::Relaxed,
        m => return Err(Error::Format(format!("unknown weight mode tag {m}"))),
    };
    let depth = cur.u32("depth")? as usize;
    let mut widths = Vec::with_capacity(depth + 2);
    for _ in 0..depth + 2 {
        widths.push(cur.u32("width")? as usize);
    }
    let arch = Architecture::new(depth, widths.clone())?;
    let mut weights = Vec::with_capacity(depth + 1);
    for i in 0..=depth {
        let count = cur.u64("weight count")? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let r = cur.u32("weight row")?;
            let c = cur.u32("weight col")?;
            let v = cur.f64("weight value")?;
            entries.push((r, c, v));
        }
        weights.push(SparseMat::new(widths[i + 1], widths[i], entries)?);
    }
    let mut shifts = Vec::with_capacity(depth);
    for i in 1..=depth {
        let count = cur.u64("shift count")? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let idx = cur.u32("shift index")?;
            let v = cur.f64("shift value")?;
            entries.push((idx, v));
        }
        shifts.push(SparseVec::new(widths[i], entries)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after network data",
            bytes.len() - cur.pos
        )));
    }
    Network::new(arch, weights, shifts, mode)
}

pub(crate) fn write_json(net: &Network, w: &mut impl Write) -> Result<()> {
    let env = JsonEnvelope {
        format: "relunet".into(),
        version: VERSION,
        mode: net.mode(),
        depth: net.depth(),
        widths: net.widths().to_vec(),
        weights: net.weights().iter().map(|m| m.entries.clone()).collect(),
        shifts: net.shifts().iter().map(|s| s.entries.clone()).collect(),
    };
    serde_json::to_writer_pretty(w, &env)?;
    Ok(())
}

pub(crate) fn read_json(bytes: &[u8]) -> Result<Network> {
    let env: JsonEnvelope = serde_json::from_slice(bytes)?;
    if env.version != VERSION {
        return Err(Error::Version { got: env.version, supported: VERSION });
    }
    let arch = Architecture::new(env.depth, env.widths.clone())?;
    let mut weights = Vec::new();
    for (i, entries) in env.weights.into_iter().enumerate() {
        weights.push(SparseMat::new(env.widths[i + 1], env.widths[i], entries)?);
    }
    let mut shifts = Vec::new();
    for (i, entries) in env.shifts.into_iter().enumerate() {
        shifts.push(SparseVec::new(env.widths[i + 1], entries)?);
    }
    Network::new(arch, weights, shifts, env.mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_net() -> Network {
        let arch = Architecture::new(1, vec![2, 3, 1]).unwrap();
        Network::new(
            arch,
            vec![
                SparseMat::new(3, 2, vec![(0, 0, 0.125), (1, 1, -1.0), (2, 0, 1e-300)]).unwrap(),
                SparseMat::new(1, 3, vec![(0, 0, 0.3), (0, 2, -0.7)]).unwrap(),
            ],
            vec![SparseVec::new(3, vec![(0, 0.5), (1, -0.25)]).unwrap()],
            WeightMode::Strict,
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip_is_entry_exact() {
        let net = sample_net();
        let mut buf = Vec::new();
        write_binary(&net, &mut buf).unwrap();
        let back = read_binary(&buf).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn json_round_trip_is_entry_exact() {
        let net = sample_net();
        let mut buf = Vec::new();
        write_json(&net, &mut buf).unwrap();
        let back = read_json(&buf).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let net = sample_net();
        let mut buf = Vec::new();
        write_binary(&net, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        let err = read_binary(&buf).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn unknown_version_is_explicit() {
        let net = sample_net();
        let mut buf = Vec::new();
        write_binary(&net, &mut buf).unwrap();
        buf[4] = 99;
        assert!(matches!(read_binary(&buf).unwrap_err(), Error::Version { got: 99, .. }));
    }
}
