//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 0   8 bytes  magic "CBOTGAN\n"
//! 8   u32      format version
//! 12  u64      header length H
//! 20  H bytes  JSON header (class, config, stats, static head, shapes, loss curve)
//! ..  u64      parameter count P
//! ..  P * f64  parameters of embedder, recovery, generator, supervisor, discriminator
//! ..  32 bytes SHA-256 of everything before it
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::gru::GruNet;
use super::timegan::{NetId, Networks};
use super::{GanConfig, GanModel, LossRecord, NormStats, StaticHead};
use crate::error::{Error, Result};
use crate::kinematics::CarefulnessClass;

const MAGIC: &[u8; 8] = b"CBOTGAN\n";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct NetShape {
    input: usize,
    hidden: usize,
    output: usize,
    activation: super::gru::Activation,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    class: CarefulnessClass,
    config: GanConfig,
    stats: NormStats,
    static_head: StaticHead,
    trained_steps: usize,
    nets: Vec<NetShape>,
    loss_curve: Vec<LossRecord>,
}

pub fn to_bytes(model: &GanModel) -> Result<Vec<u8>> {
    let header = Header {
        class: model.class,
        config: model.config.clone(),
        stats: model.stats,
        static_head: model.static_head,
        trained_steps: model.trained_steps,
        nets: NetId::ALL
            .iter()
            .map(|&id| {
                let n = model.nets.get(id);
                NetShape {
                    input: n.input,
                    hidden: n.hidden,
                    output: n.output,
                    activation: n.activation,
                }
            })
            .collect(),
        loss_curve: model.loss_curve.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let params: Vec<f64> = NetId::ALL.iter().flat_map(|&id| model.nets.get(id).params.iter().copied()).collect();

    let mut out = Vec::with_capacity(64 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ModelFormat {
                offset: self.bytes.len() as u64,
                message: format!("truncated while reading {what} ({n} bytes needed at offset {})", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::ModelFormat {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<GanModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != MAGIC {
        return Err(format_err(0, "not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(c.take(4, "version")?.try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(format_err(
            8,
            format!("format version {version}, this build reads version {MODEL_FORMAT_VERSION}"),
        ));
    }
    let header_len = c.u64("header length")? as usize;
    let header_at = c.pos;
    let header: Header = serde_json::from_slice(c.take(header_len, "header")?)
        .map_err(|e| format_err(header_at, format!("bad header: {e}")))?;
    if header.nets.len() != NetId::ALL.len() {
        return Err(format_err(header_at, "header must describe five networks"));
    }
    let count_at = c.pos;
    let count = c.u64("parameter count")? as usize;
    let expected: usize = header
        .nets
        .iter()
        .map(|s| super::gru::param_count(s.input, s.hidden, s.output))
        .sum();
    if count != expected {
        return Err(format_err(count_at, format!("{count} parameters, shapes need {expected}")));
    }
    let raw = c.take(count.checked_mul(8).ok_or_else(|| format_err(count_at, "overflow"))?, "parameters")?;
    let checksum_at = c.pos;
    let stored = c.take(32, "checksum")?;
    if Sha256::digest(&bytes[..checksum_at]).as_slice() != stored {
        return Err(format_err(checksum_at, "checksum mismatch"));
    }
    if c.pos != bytes.len() {
        return Err(format_err(c.pos, "trailing bytes after checksum"));
    }

    let mut values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    let mut nets = header.nets.iter().map(|s| {
        let n = super::gru::param_count(s.input, s.hidden, s.output);
        GruNet {
            input: s.input,
            hidden: s.hidden,
            output: s.output,
            activation: s.activation,
            params: values.by_ref().take(n).collect(),
        }
    });
    let mut next = || nets.next().expect("five shapes checked");
    let nets = Networks {
        embedder: next(),
        recovery: next(),
        generator: next(),
        supervisor: next(),
        discriminator: next(),
    };
    Ok(GanModel {
        class: header.class,
        config: header.config,
        stats: header.stats,
        static_head: header.static_head,
        nets,
        trained_steps: header.trained_steps,
        loss_curve: header.loss_curve,
    })
}

pub fn save(model: &GanModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<GanModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::LossRecord;

    fn model() -> GanModel {
        let mut m = GanModel::untrained(CarefulnessClass::NotCareful, GanConfig::tiny()).unwrap();
        m.trained_steps = 5;
        m.loss_curve.push(LossRecord {
            step: 0,
            phase: crate::gan::Phase::Embed,
            loss: "recon".into(),
            value: 0.1 + 0.2,
        });
        m
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = model();
        let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.class, CarefulnessClass::NotCareful);
        for id in NetId::ALL {
            let a: Vec<u64> = m.nets.get(id).params.iter().map(|p| p.to_bits()).collect();
            let b: Vec<u64> = back.nets.get(id).params.iter().map(|p| p.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = to_bytes(&model()).unwrap();
        for cut in [0, 5, 13, 40, bytes.len() - 100, bytes.len() - 1] {
            let err = from_bytes(&bytes[..cut]).unwrap_err();
            match err {
                Error::ModelFormat { offset, .. } => assert!(offset <= cut as u64),
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn corruption_and_version_mismatch() {
        let mut bytes = to_bytes(&model()).unwrap();
        let n = bytes.len();
        bytes[n - 40] ^= 0x55;
        assert!(from_bytes(&bytes).unwrap_err().to_string().contains("checksum"));

        let mut bytes = to_bytes(&model()).unwrap();
        bytes[8] = 9;
        assert!(from_bytes(&bytes).unwrap_err().to_string().contains("version 9"));

        assert!(from_bytes(b"NOTAMODELFILE").unwrap_err().to_string().contains("magic"));
    }
}
