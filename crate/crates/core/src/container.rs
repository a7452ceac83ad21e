//! Versioned binary container for trained models.
//!
//! Layout (little endian): magic `POVSHIFT`, format version `u16`, model kind `u8`,
//! provider version (`u32` length + UTF-8), JSON header (`u64` length + bytes),
//! parameter blob (`u64` count + `f64` values).

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"POVSHIFT";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ModelKind {
    Ranker = 1,
    Tree = 2,
}

impl ModelKind {
    fn from_u8(b: u8) -> Option<Self> {
        match b {
            1 => Some(ModelKind::Ranker),
            2 => Some(ModelKind::Tree),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: ModelKind,
    pub provider_version: String,
    pub header: Vec<u8>,
    pub blob: Vec<f64>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.header.len() + 8 * self.blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.provider_version.len() as u32).to_le_bytes());
        out.extend_from_slice(self.provider_version.as_bytes());
        out.extend_from_slice(&(self.header.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.header);
        out.extend_from_slice(&(self.blob.len() as u64).to_le_bytes());
        for v in &self.blob {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a container. When `provider_version` is given it must match the stored
    /// one unless `force` is set.
    pub fn from_bytes(bytes: &[u8], provider_version: Option<&str>, force: bool) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Model("not a povshift model file".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let kind = ModelKind::from_u8(r.take(1)?[0])
            .ok_or_else(|| Error::Model("unknown model kind".into()))?;
        let plen = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
        let stored = String::from_utf8(r.take(plen)?.to_vec())
            .map_err(|_| Error::Model("provider version is not UTF-8".into()))?;
        if let Some(expected) = provider_version {
            if expected != stored && !force {
                return Err(Error::Model(format!(
                    "model was trained with embedding provider {stored}, current provider is {expected} (use --force to load anyway)"
                )));
            }
        }
        let hlen = r.u64()? as usize;
        let header = r.take(hlen)?.to_vec();
        let n = r.u64()? as usize;
        if n.checked_mul(8).map_or(true, |b| b > bytes.len()) {
            return Err(Error::Model("truncated model file".into()));
        }
        let mut blob = Vec::with_capacity(n);
        for _ in 0..n {
            blob.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        if r.pos != bytes.len() {
            return Err(Error::Model("trailing bytes after model payload".into()));
        }
        Ok(Container { kind, provider_version: stored, header, blob })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Model("truncated model file".into())),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            kind: ModelKind::Ranker,
            provider_version: "hash-v1-d32".into(),
            header: b"{}".to_vec(),
            blob: vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300],
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = Container::from_bytes(&c.to_bytes(), Some("hash-v1-d32"), false).unwrap();
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn provider_mismatch() {
        let bytes = sample().to_bytes();
        assert!(matches!(Container::from_bytes(&bytes, Some("other"), false), Err(Error::Model(_))));
        assert!(Container::from_bytes(&bytes, Some("other"), true).is_ok());
    }

    #[test]
    fn truncated() {
        let bytes = sample().to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 3], None, false).is_err());
        assert!(Container::from_bytes(b"garbage", None, false).is_err());
    }
}
