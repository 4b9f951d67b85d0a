//! `IOSR1` feature container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "IOSR1" | u8 version = 1 | u32 dim | u32 class_count
//! class_count × (u16 id | u16 name_len | name bytes, UTF-8)
//! u32 example_count
//! example_count × (u16 label | dim × f32)
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{ClassLabel, CorpusError, Example, LabeledFeatureSet, Result};

pub const MAGIC: &[u8; 5] = b"IOSR1";
pub const VERSION: u8 = 1;

pub fn encode_feature_file(set: &LabeledFeatureSet) -> Result<Vec<u8>> {
    if set.is_empty() {
        return Err(CorpusError::Empty);
    }
    let record = 2 + 4 * set.dim;
    let mut out = Vec::with_capacity(64 + set.len() * record);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    out.extend_from_slice(&(set.classes.len() as u32).to_le_bytes());
    for c in &set.classes {
        let name = c.name.as_bytes();
        let len = u16::try_from(name.len()).map_err(|_| CorpusError::InvalidName)?;
        out.extend_from_slice(&c.id.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
    }
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    for e in &set.examples {
        out.extend_from_slice(&e.label.to_le_bytes());
        for &v in &e.features {
            let f = v as f32;
            if f64::from(f) != v {
                return Err(CorpusError::PrecisionLoss(v));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes `set` to `path`. Values must be exactly representable as `f32`
/// (see [`LabeledFeatureSet::quantized`]) so that loading returns an equal set.
pub fn write_feature_file(set: &LabeledFeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_feature_file(set)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<LabeledFeatureSet> {
    decode_feature_file(&fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(CorpusError::Truncated(what));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_feature_file(bytes: &[u8]) -> Result<LabeledFeatureSet> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len(), "magic").map_err(|_| CorpusError::BadMagic)? != MAGIC {
        return Err(CorpusError::BadMagic);
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(CorpusError::UnsupportedVersion(version));
    }
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(CorpusError::DimensionMismatch { expected: 1, found: 0 });
    }
    let class_count = r.u32("class count")? as usize;
    let mut classes = Vec::with_capacity(class_count.min(1 << 16));
    for _ in 0..class_count {
        let id = r.u16("class id")?;
        let len = r.u16("class name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "class name")?)
            .map_err(|_| CorpusError::InvalidName)?
            .to_string();
        classes.push(ClassLabel { id, name });
    }
    let ids: HashSet<u16> = classes.iter().map(|c| c.id).collect();
    let mut set = LabeledFeatureSet::new(dim, classes)?;

    let count = r.u32("example count")? as usize;
    let record = 2 + 4 * dim;
    set.examples.reserve(count.min(r.buf.len() / record + 1));
    for _ in 0..count {
        let label = r.u16("record label")?;
        if !ids.contains(&label) {
            return Err(CorpusError::UnknownLabel(label));
        }
        let raw = r.take(4 * dim, "record features")?;
        let features = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect::<Vec<_>>();
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite(*v));
        }
        set.examples.push(Example { label, features });
    }
    if !r.buf.is_empty() {
        // trailing bytes: records are wider than the declared dimension
        let found = dim + r.buf.len() / (4 * count.max(1));
        return Err(CorpusError::DimensionMismatch { expected: dim, found });
    }
    Ok(set)
}
