//! Weight file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "LANMSFFW"
//! version   u32      1
//! confhash  u64      FNV-1a 64 of the canonical JSON of the config
//! count     u32      number of parameter records
//! record    repeated: name_len u16, name bytes (UTF-8),
//!                     rank u8, extents u32 x rank,
//!                     values f32 x product(extents)
//! checksum  u64      FNV-1a 64 over every preceding byte
//! ```
//!
//! Records appear in the model's documented parameter order and include the
//! batch-norm running statistics. Values are stored as 32-bit floats: a
//! freshly built model round-trips bit-exactly (initialization draws on the
//! f32 grid); saving after f64 training rounds each value to its nearest f32.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{LanmsffConfig, Model};
use crate::error::{Error, Result};
use crate::hash::{fnv1a64, Fnv64};

const MAGIC: &[u8; 8] = b"LANMSFFW";
const VERSION: u32 = 1;

/// Hash of the canonical JSON encoding of a config; written into the header
/// so a weight file can only load against the config that produced it.
pub fn config_hash(config: &LanmsffConfig) -> u64 {
    let canonical = serde_json::to_string(config).expect("config serializes");
    fnv1a64(canonical.as_bytes())
}

/// Serializes the model (all parameters and frozen state) into the format
/// above.
pub fn save_weights(model: &Model, path: &Path) -> Result<()> {
    let params = model.params();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&config_hash(&model.config).to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in &params {
        let name = p.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(p.value.shape().len() as u8);
        for &e in p.value.shape() {
            buf.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in p.value.data().iter() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut h = Fnv64::new();
    h.write(&buf);
    buf.extend_from_slice(&h.finish().to_le_bytes());

    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedPayload(format!(
                "need {} bytes for {} at offset {}, file has {}",
                n,
                what,
                self.pos,
                self.bytes.len()
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
}

/// Loads weights saved by [`save_weights`] into a freshly built model.
///
/// The header's config hash must match `config`; structural damage reports a
/// truncated payload, value damage a checksum failure, and a mismatched
/// config its hash comparison — each distinctly.
pub fn load_weights(path: &Path, config: &LanmsffConfig) -> Result<Model> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    let magic = cur.take(8, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let file_hash = cur.u64("config hash")?;
    let expected = config_hash(config);
    if file_hash != expected {
        return Err(Error::ConfigHashMismatch { file: file_hash, expected });
    }

    let count = cur.u32("record count")? as usize;
    let model = Model::build(config, 0)?;
    let params = model.params();

    // Integrity of the trailer: a failed checksum means corruption unless the
    // structural parse below shows the file simply ends early, in which case
    // truncation is the better diagnosis.
    let checksum_result = if bytes.len() < cur.pos + 8 {
        Err(Error::TruncatedPayload(format!("file of {} bytes has no room for a checksum trailer", bytes.len())))
    } else {
        let payload_end = bytes.len() - 8;
        let stored = u64::from_le_bytes(bytes[payload_end..].try_into().unwrap());
        let computed = fnv1a64(&bytes[..payload_end]);
        if stored == computed {
            Ok(())
        } else {
            Err(Error::ChecksumMismatch { stored, computed })
        }
    };

    let parse = (|| -> Result<Vec<Vec<f64>>> {
        if count != params.len() {
            return Err(Error::data(format!("file holds {} parameter records, model has {}", count, params.len())));
        }
        let mut records: Vec<Vec<f64>> = Vec::with_capacity(count);
        for p in &params {
            let name_len = cur.u16("name length")? as usize;
            let name = std::str::from_utf8(cur.take(name_len, "name")?)
                .map_err(|_| Error::data("parameter name is not UTF-8"))?;
            if name != p.name {
                return Err(Error::data(format!(
                    "parameter order mismatch: file has `{name}`, model expects `{}`",
                    p.name
                )));
            }
            let rank = cur.take(1, "rank")?[0] as usize;
            let mut numel = 1usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let e = cur.u32("extent")? as usize;
                shape.push(e);
                numel *= e;
            }
            if shape != p.value.shape() {
                return Err(Error::data(format!(
                    "parameter `{}` has shape {:?} in the file, model expects {:?}",
                    p.name,
                    shape,
                    p.value.shape()
                )));
            }
            let raw = cur.take(4 * numel, "values")?;
            let vals: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            records.push(vals);
        }
        if cur.pos + 8 != bytes.len() {
            return Err(Error::TruncatedPayload(format!(
                "{} unexpected bytes between the records and the checksum",
                bytes.len() - cur.pos - 8
            )));
        }
        Ok(records)
    })();

    let records = match (checksum_result, parse) {
        (Err(_), Err(e @ Error::TruncatedPayload(_))) => return Err(e),
        (Err(e), _) => return Err(e),
        (Ok(()), Err(e)) => return Err(e),
        (Ok(()), Ok(records)) => records,
    };

    for (p, vals) in params.iter().zip(records) {
        p.value.data_mut().copy_from_slice(&vals);
    }
    Ok(model)
}
