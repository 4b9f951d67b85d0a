//! `IOSH1` head checkpoint.
//!
//! ```text
//! magic "IOSH1" | u8 format = 1 | u64 head version | u32 dim | u32 n
//! u8 has_digest | 32 digest bytes (zero when absent)
//! n × (u16 id | u8 origin | u16 name_len | name bytes)
//! dim·n × f64 weights, column-major | n × f64 biases
//! ```
//!
//! Origin byte: 0 base, 1 added, 2 added but not yet trained.

use std::fs;
use std::path::Path;

use super::{ClassId, ClassifierHead, HeadError, Origin, Result};
use crate::embed::Digest;

const MAGIC: &[u8; 5] = b"IOSH1";
const FORMAT: u8 = 1;

pub fn encode_checkpoint(head: &ClassifierHead) -> Vec<u8> {
    let n = head.num_classes();
    let mut out = Vec::with_capacity(64 + 8 * (head.weights.len() + n));
    out.extend_from_slice(MAGIC);
    out.push(FORMAT);
    out.extend_from_slice(&head.version.to_le_bytes());
    out.extend_from_slice(&(head.dim as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    match head.extractor_digest {
        Some(d) => {
            out.push(1);
            out.extend_from_slice(&d.0);
        }
        None => {
            out.push(0);
            out.extend_from_slice(&[0; 32]);
        }
    }
    for (i, c) in head.registry.iter().enumerate() {
        let origin = match c.origin {
            Origin::Base => 0u8,
            Origin::Added if head.pending && i == n - 1 => 2,
            Origin::Added => 1,
        };
        out.extend_from_slice(&c.id.to_le_bytes());
        out.push(origin);
        out.extend_from_slice(&(c.name.len() as u16).to_le_bytes());
        out.extend_from_slice(c.name.as_bytes());
    }
    for v in head.weights.iter().chain(&head.biases) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_checkpoint(head: &ClassifierHead, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(head))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ClassifierHead> {
    decode_checkpoint(&fs::read(path)?)
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(HeadError::Truncated(what));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().unwrap())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ClassifierHead> {
    let mut r = Reader(bytes);
    if r.take(5, "magic").map_err(|_| HeadError::BadMagic)? != MAGIC {
        return Err(HeadError::BadMagic);
    }
    let [format] = r.array::<1>("format")?;
    if format != FORMAT {
        return Err(HeadError::UnsupportedVersion(format));
    }
    let version = u64::from_le_bytes(r.array("version")?);
    let dim = u32::from_le_bytes(r.array("dim")?) as usize;
    let n = u32::from_le_bytes(r.array("class count")?) as usize;
    if dim == 0 {
        return Err(HeadError::Corrupt("zero dimension"));
    }
    if n > usize::from(u16::MAX) {
        return Err(HeadError::Corrupt("class count out of range"));
    }
    let [has_digest] = r.array::<1>("digest flag")?;
    let digest: [u8; 32] = r.array("digest")?;
    let extractor_digest = match has_digest {
        0 => None,
        1 => Some(Digest(digest)),
        _ => return Err(HeadError::Corrupt("digest flag")),
    };

    let mut registry = Vec::with_capacity(n);
    let mut pending = false;
    for i in 0..n {
        let id = u16::from_le_bytes(r.array("class id")?);
        let [origin] = r.array::<1>("class origin")?;
        let len = u16::from_le_bytes(r.array("class name length")?) as usize;
        let name = std::str::from_utf8(r.take(len, "class name")?)
            .map_err(|_| HeadError::Corrupt("class name is not UTF-8"))?
            .to_string();
        if usize::from(id) != i {
            return Err(HeadError::Corrupt("class ids are not dense"));
        }
        if name.is_empty() || registry.iter().any(|c: &ClassId| c.name == name) {
            return Err(HeadError::Corrupt("empty or duplicate class name"));
        }
        let origin = match origin {
            0 => Origin::Base,
            1 => Origin::Added,
            2 if i == n - 1 => {
                pending = true;
                Origin::Added
            }
            _ => return Err(HeadError::Corrupt("class origin")),
        };
        registry.push(ClassId { id, name, origin });
    }

    let mut read_f64s = |count: usize, what| -> Result<Vec<f64>> {
        let raw = r.take(count.checked_mul(8).ok_or(HeadError::Corrupt("size overflow"))?, what)?;
        let v: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(HeadError::Corrupt("non-finite parameter"));
        }
        Ok(v)
    };
    let weights = read_f64s(dim * n, "weights")?;
    let biases = read_f64s(n, "biases")?;
    if !r.0.is_empty() {
        return Err(HeadError::Corrupt("trailing bytes"));
    }
    Ok(ClassifierHead {
        dim,
        weights,
        biases,
        registry,
        extractor_digest,
        version,
        pending,
    })
}
