//! On-disk cache of sofic approximations keyed by their recipe.
//!
//! Each entry is one JSON file named after the recipe hash. `verify`
//! rebuilds every entry from its stored recipe and compares bytes.

use super::group::{GroupElement, GroupSpec};
use super::sofic::{perturb, quotient_sofic, Quotient, SoficApproximation};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const CACHE_DIR_ENV: &str = "SOFICLAB_CACHE_DIR";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub rate: f64,
    pub seed: u64,
}

/// Everything needed to rebuild an approximation deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoficRecipe {
    pub group: GroupSpec,
    pub quotient: Quotient,
    pub support: Vec<GroupElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

impl SoficRecipe {
    pub fn key(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        hex::encode(&Sha256::digest(bytes)[..12])
    }

    pub fn build(&self) -> Result<SoficApproximation> {
        let group = Arc::new(self.group.clone());
        let s = quotient_sofic(&group, &self.quotient, &self.support)?;
        match &self.perturbation {
            Some(p) => perturb(&s, p.rate, p.seed),
            None => Ok(s),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    format: u32,
    key: String,
    recipe: SoficRecipe,
    approximation: SoficApproximation,
}

fn entry_bytes(recipe: &SoficRecipe, approx: SoficApproximation) -> Vec<u8> {
    let entry = CacheEntry { format: FORMAT_VERSION, key: recipe.key(), recipe: recipe.clone(), approximation: approx };
    serde_json::to_vec_pretty(&entry).expect("serializable")
}

#[derive(Clone, Debug, Serialize)]
pub struct CacheEntrySummary {
    pub key: String,
    pub group: String,
    pub d: usize,
    pub support_size: usize,
    pub bytes: u64,
}

#[derive(Clone, Debug)]
pub struct SoficCache {
    dir: PathBuf,
}

impl SoficCache {
    pub fn new(dir: impl Into<PathBuf>) -> SoficCache {
        SoficCache { dir: dir.into() }
    }

    /// Uses `$SOFICLAB_CACHE_DIR`, falling back to `.soficlab-cache`.
    pub fn from_env() -> SoficCache {
        SoficCache::new(std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| ".soficlab-cache".into()))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn read(&self, key: &str) -> Result<(Vec<u8>, CacheEntry)> {
        let bytes = fs::read(self.path(key))?;
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| Error::CacheCorrupt { entry: key.to_string(), reason: format!("unreadable: {e}") })?;
        Ok((bytes, entry))
    }

    pub fn get_or_build(&self, recipe: &SoficRecipe) -> Result<SoficApproximation> {
        let key = recipe.key();
        if self.path(&key).exists() {
            let (_, entry) = self.read(&key)?;
            if entry.recipe != *recipe {
                return Err(Error::CacheCorrupt { entry: key, reason: "stored recipe does not match its key".into() });
            }
            return Ok(entry.approximation);
        }
        let approx = recipe.build()?;
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(".{key}.tmp"));
        fs::write(&tmp, entry_bytes(recipe, approx.clone()))?;
        fs::rename(tmp, self.path(&key))?;
        Ok(approx)
    }

    pub fn keys(&self) -> Result<Vec<String>> {
        if !self.dir.exists() {
            return Ok(vec![]);
        }
        let mut keys: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(String::from))
            .filter(|k| !k.starts_with('.'))
            .collect();
        keys.sort();
        Ok(keys)
    }

    pub fn list(&self) -> Result<Vec<CacheEntrySummary>> {
        let mut out = vec![];
        for key in self.keys()? {
            let bytes = fs::metadata(self.path(&key))?.len();
            match self.read(&key) {
                Ok((_, e)) => out.push(CacheEntrySummary {
                    key,
                    group: e.recipe.group.name(),
                    d: e.approximation.d(),
                    support_size: e.approximation.support().len(),
                    bytes,
                }),
                Err(_) => out.push(CacheEntrySummary { key, group: "<corrupt>".into(), d: 0, support_size: 0, bytes }),
            }
        }
        Ok(out)
    }

    pub fn clear(&self) -> Result<usize> {
        let keys = self.keys()?;
        for k in &keys {
            fs::remove_file(self.path(k))?;
        }
        Ok(keys.len())
    }

    /// Rebuilds each entry from its recipe; returns one result per entry.
    pub fn verify(&self) -> Result<Vec<(String, Result<()>)>> {
        let mut out = vec![];
        for key in self.keys()? {
            let res = self.verify_entry(&key);
            out.push((key, res));
        }
        Ok(out)
    }

    fn verify_entry(&self, key: &str) -> Result<()> {
        let corrupt = |reason: String| Error::CacheCorrupt { entry: key.to_string(), reason };
        let (bytes, entry) = self.read(key)?;
        if entry.key != key || entry.recipe.key() != key {
            return Err(corrupt("key does not match recipe".into()));
        }
        let fresh = entry.recipe.build().map_err(|e| corrupt(format!("rebuild failed: {e}")))?;
        if entry_bytes(&entry.recipe, fresh) != bytes {
            return Err(corrupt("contents differ from a fresh rebuild".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recipe(seed: u64) -> SoficRecipe {
        let g = GroupSpec::Free { rank: 2 };
        SoficRecipe { support: g.ball(2), group: g, quotient: Quotient::RandomPermutations { d: 16, seed }, perturbation: None }
    }

    #[test]
    fn build_store_verify_and_detect_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SoficCache::new(dir.path());
        let a = cache.get_or_build(&recipe(1)).unwrap();
        let b = cache.get_or_build(&recipe(1)).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        cache.get_or_build(&recipe(2)).unwrap();
        assert_eq!(cache.list().unwrap().len(), 2);
        assert!(cache.verify().unwrap().iter().all(|(_, r)| r.is_ok()));

        let key = recipe(1).key();
        let path = dir.path().join(format!("{key}.json"));
        let mut bytes = fs::read(&path).unwrap();
        let pos = bytes.len() / 2;
        bytes[pos] ^= 0x01;
        fs::write(&path, bytes).unwrap();
        let report = cache.verify().unwrap();
        let bad: Vec<_> = report.iter().filter(|(_, r)| r.is_err()).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].0, key);
        assert!(bad[0].1.as_ref().unwrap_err().to_string().contains(&key));

        assert_eq!(cache.clear().unwrap(), 2);
        assert!(cache.list().unwrap().is_empty());
    }

    #[test]
    fn perturbation_seed_is_part_of_the_key() {
        let mut a = recipe(1);
        let mut b = recipe(1);
        a.perturbation = Some(Perturbation { rate: 0.1, seed: 1 });
        b.perturbation = Some(Perturbation { rate: 0.1, seed: 2 });
        assert_ne!(a.key(), b.key());
    }
}
