//! Normalized binary sample cache, the fast path between `data-prepare` and
//! training runs.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    8 bytes "LANMSFFC"
//! version  u32     1
//! channels u8
//! count    u64
//! sample   repeated: id_len u16, id bytes, label u16,
//!                    pose i16 (degrees, i16::MIN = unknown), split u8,
//!                    pixels f32 x (64*64*channels)
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{Pose, Sample, Split, IMAGE_SIDE};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LANMSFFC";
const VERSION: u32 = 1;
const POSE_UNKNOWN: i16 = i16::MIN;

fn split_code(s: Split) -> u8 {
    match s {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    }
}

fn split_from(code: u8) -> Result<Split> {
    match code {
        0 => Ok(Split::Train),
        1 => Ok(Split::Val),
        2 => Ok(Split::Test),
        other => Err(Error::data(format!("unknown split code {other} in cache"))),
    }
}

pub fn write_cache(samples: &[Sample], path: &Path) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::data("refusing to write an empty sample cache"));
    }
    let channels = samples[0].channels;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(channels as u8);
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        if s.channels != channels {
            return Err(Error::data(format!("sample {} has {} channels, cache is {}-channel", s.id, s.channels, channels)));
        }
        if s.image.len() != s.pixel_count() {
            return Err(Error::data(format!("sample {} has {} pixels, expected {}", s.id, s.image.len(), s.pixel_count())));
        }
        let id = s.id.as_bytes();
        buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
        buf.extend_from_slice(id);
        buf.extend_from_slice(&(s.label as u16).to_le_bytes());
        let pose = match s.pose {
            Pose::Deg(d) => d,
            Pose::Unknown => POSE_UNKNOWN,
        };
        buf.extend_from_slice(&pose.to_le_bytes());
        buf.push(split_code(s.split));
        for &v in &s.image {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<Vec<Sample>> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize, what: &str| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::data(format!("cache truncated reading {what} at offset {pos}")));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 8, "magic")? != MAGIC {
        return Err(Error::data("not a sample cache (bad magic)"));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::data(format!("unsupported cache version {version}")));
    }
    let channels = take(&mut pos, 1, "channels")?[0] as usize;
    let count = u64::from_le_bytes(take(&mut pos, 8, "count")?.try_into().unwrap()) as usize;
    let pixels = channels * IMAGE_SIDE * IMAGE_SIDE;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = u16::from_le_bytes(take(&mut pos, 2, "id length")?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(take(&mut pos, id_len, "id")?)
            .map_err(|_| Error::data("cache sample id is not UTF-8"))?
            .to_string();
        let label = u16::from_le_bytes(take(&mut pos, 2, "label")?.try_into().unwrap()) as usize;
        let pose_raw = i16::from_le_bytes(take(&mut pos, 2, "pose")?.try_into().unwrap());
        let pose = if pose_raw == POSE_UNKNOWN { Pose::Unknown } else { Pose::Deg(pose_raw) };
        let split = split_from(take(&mut pos, 1, "split")?[0])?;
        let raw = take(&mut pos, 4 * pixels, "pixels")?;
        let image: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        samples.push(Sample { id, channels, image, label, pose, split });
    }
    if pos != bytes.len() {
        return Err(Error::data(format!("{} trailing bytes after the last cache record", bytes.len() - pos)));
    }
    Ok(samples)
}
