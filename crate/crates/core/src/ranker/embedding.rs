//! Token embedding providers.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Maps tokens to fixed-size vectors. Implementations must be deterministic for a
/// given version string.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, token: &str) -> Vec<f64>;

    /// Compatibility of a candidate string with the surrounding context; higher is better.
    /// The default is the negative distance between the mean candidate embedding and
    /// the mean context embedding.
    fn context_fit(&self, candidate: &[String], left: &[String], right: &[String]) -> f64 {
        let mean = |toks: &mut dyn Iterator<Item = &String>| {
            let mut acc = vec![0.0; self.dim()];
            let mut n = 0usize;
            for t in toks {
                for (a, v) in acc.iter_mut().zip(self.embed(t)) {
                    *a += v;
                }
                n += 1;
            }
            if n > 0 {
                acc.iter_mut().for_each(|a| *a /= n as f64);
            }
            acc
        };
        let c = mean(&mut candidate.iter());
        let ctx = mean(&mut left.iter().chain(right.iter()));
        -c.iter().zip(&ctx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn version(&self) -> &str {
        (**self).version()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        (**self).embed(token)
    }

    fn context_fit(&self, candidate: &[String], left: &[String], right: &[String]) -> f64 {
        (**self).context_fit(candidate, left, right)
    }
}

/// Embeddings drawn from a generator seeded with a hash of the lowercased token.
#[derive(Clone, Debug)]
pub struct HashEmbedding {
    dim: usize,
    version: String,
}

impl HashEmbedding {
    pub const DEFAULT_DIM: usize = 32;

    pub fn new(dim: usize) -> Self {
        HashEmbedding { dim, version: format!("hash-v1-d{dim}") }
    }
}

impl Default for HashEmbedding {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashEmbedding {
    fn name(&self) -> &str {
        "hash"
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::digest(token.to_lowercase().as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

/// Memoizes another provider, persisting vectors under a cache directory.
pub struct CachedEmbedding<P> {
    inner: P,
    path: Option<PathBuf>,
    memo: Mutex<HashMap<String, Vec<f64>>>,
    dirty: Mutex<bool>,
}

impl<P: EmbeddingProvider> CachedEmbedding<P> {
    /// In-memory cache only.
    pub fn new(inner: P) -> Self {
        CachedEmbedding { inner, path: None, memo: Mutex::new(HashMap::new()), dirty: Mutex::new(false) }
    }

    /// Cache backed by `<dir>/<name>-<version>.tsv`; existing entries are loaded.
    pub fn with_dir(inner: P, dir: &Path) -> Result<Self> {
        let file = dir.join(format!("{}-{}.tsv", inner.name(), inner.version()));
        let mut memo = HashMap::new();
        if file.exists() {
            let text = fs::read_to_string(&file)?;
            for (i, line) in text.lines().enumerate() {
                let Some((tok, rest)) = line.split_once('\t') else { continue };
                let vec: std::result::Result<Vec<f64>, _> = rest.split(' ').map(str::parse).collect();
                match vec {
                    Ok(v) if v.len() == inner.dim() => {
                        memo.insert(tok.to_owned(), v);
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("bad embedding cache entry in {}", file.display()),
                        })
                    }
                }
            }
        }
        Ok(CachedEmbedding { inner, path: Some(file), memo: Mutex::new(memo), dirty: Mutex::new(false) })
    }

    /// From the `POVSHIFT_CACHE` environment variable when set.
    pub fn from_env(inner: P) -> Result<Self> {
        match std::env::var_os("POVSHIFT_CACHE") {
            Some(dir) if !dir.is_empty() => Self::with_dir(inner, Path::new(&dir)),
            _ => Ok(Self::new(inner)),
        }
    }

    /// Writes new entries to the cache file, if any.
    pub fn flush(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut dirty = self.dirty.lock().expect("cache lock");
        if !*dirty {
            return Ok(());
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serialize(&self.memo.lock().expect("cache lock")))?;
        *dirty = false;
        Ok(())
    }
}

fn serialize(memo: &HashMap<String, Vec<f64>>) -> String {
    let mut keys: Vec<&String> = memo.keys().filter(|k| !k.contains(['\t', '\n'])).collect();
    keys.sort();
    let mut out = String::new();
    for k in keys {
        let vals: Vec<String> = memo[k].iter().map(|v| format!("{v:?}")).collect();
        out.push_str(k);
        out.push('\t');
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedding<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn version(&self) -> &str {
        self.inner.version()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.memo.lock().expect("cache lock").get(token) {
            return v.clone();
        }
        let v = self.inner.embed(token);
        self.memo.lock().expect("cache lock").insert(token.to_owned(), v.clone());
        *self.dirty.lock().expect("cache lock") = true;
        v
    }
}

impl<P> Drop for CachedEmbedding<P> {
    fn drop(&mut self) {
        let Some(path) = &self.path else { return };
        if !self.dirty.get_mut().map(|d| *d).unwrap_or(false) {
            return;
        }
        if let Ok(memo) = self.memo.get_mut() {
            let _ = path.parent().map(fs::create_dir_all);
            let _ = fs::write(path, serialize(memo));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_embedding_is_deterministic() {
        let p = HashEmbedding::default();
        assert_eq!(p.embed("Nick"), p.embed("Nick"));
        assert_eq!(p.embed("Nick"), p.embed("nick"));
        assert_ne!(p.embed("Nick"), p.embed("Phil"));
        assert_eq!(p.embed("x").len(), 32);
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("povshift-cache-{}", std::process::id()));
        {
            let c = CachedEmbedding::with_dir(HashEmbedding::new(4), &dir).unwrap();
            c.embed("hello");
            c.flush().unwrap();
        }
        let c = CachedEmbedding::with_dir(HashEmbedding::new(4), &dir).unwrap();
        assert_eq!(c.memo.lock().unwrap().get("hello"), Some(&HashEmbedding::new(4).embed("hello")));
        let _ = fs::remove_dir_all(dir);
    }
}
