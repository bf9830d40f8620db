//! Directory-tree artifact store with a JSON manifest index.
//!
//! Entries are content addressed and never rewritten: putting identical
//! bytes again returns the existing entry. Writers take a lock file next to
//! the manifest; a second writer gets [`ServiceError::Locked`].

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};

pub const STORE_ENV: &str = "HOTSPOT_STORE";
const MANIFEST: &str = "manifest.json";
const LOCK: &str = "manifest.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Dataset,
    Model,
    Forecast,
    Metrics,
    Intel,
    Report,
}

impl Kind {
    pub fn prefix(self) -> &'static str {
        match self {
            Kind::Dataset => "ds",
            Kind::Model => "model",
            Kind::Forecast => "fc",
            Kind::Metrics => "metrics",
            Kind::Intel => "intel",
            Kind::Report => "report",
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Kind::Dataset => "datasets",
            Kind::Model => "models",
            Kind::Forecast => "forecasts",
            Kind::Metrics => "metrics",
            Kind::Intel => "intel",
            Kind::Report => "reports",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub kind: Kind,
    /// Path relative to the store root.
    pub file: String,
    pub sha256: String,
    pub config_hash: String,
    pub created: String,
    #[serde(default)]
    pub meta: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub version: u32,
    pub entries: BTreeMap<String, Entry>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    writer: Mutex<()>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `--store`, then the environment, then the config, then `./hotspot-store`.
pub fn resolve_root(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(STORE_ENV).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("hotspot-store"))
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)
            .map_err(|e| ServiceError::runtime(format!("cannot create store {}: {e}", root.display())))?;
        let store = Self {
            root,
            writer: Mutex::new(()),
        };
        if !store.root.join(MANIFEST).exists() {
            let _lock = store.lock()?;
            let m = StoreManifest {
                version: 1,
                entries: BTreeMap::new(),
            };
            write_atomic(&store.root.join(MANIFEST), &serde_json::to_vec_pretty(&m)?)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> Result<LockGuard> {
        let path = self.root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(ServiceError::Locked(format!("{} exists", path.display())))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn manifest(&self) -> Result<StoreManifest> {
        let bytes = fs::read(self.root.join(MANIFEST))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Store `bytes` as a new entry, or return the entry that already holds them.
    pub fn put(&self, kind: Kind, ext: &str, bytes: &[u8], config_hash: &str, meta: Value) -> Result<Entry> {
        let sha = sha256_hex(bytes);
        let id = format!("{}-{}", kind.prefix(), &sha[..16]);
        let _local = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(e) = self.manifest()?.entries.get(&id) {
            return Ok(e.clone());
        }
        let _lock = self.lock()?;
        let mut manifest = self.manifest()?;
        let rel = format!("{}/{id}.{ext}", kind.dir());
        fs::create_dir_all(self.root.join(kind.dir()))?;
        write_atomic(&self.root.join(&rel), bytes)?;
        let entry = Entry {
            id: id.clone(),
            kind,
            file: rel,
            sha256: sha,
            config_hash: config_hash.to_string(),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            meta,
        };
        manifest.entries.insert(id, entry.clone());
        write_atomic(&self.root.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(entry)
    }

    pub fn get(&self, id: &str) -> Result<Entry> {
        self.manifest()?
            .entries
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::not_found(format!("no artifact `{id}` in the store")))
    }

    /// Entry and its bytes, after checking the hash.
    pub fn read(&self, id: &str) -> Result<(Entry, Vec<u8>)> {
        let e = self.get(id)?;
        let bytes = fs::read(self.root.join(&e.file))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(ServiceError::runtime(format!("artifact {id} fails its hash check")));
        }
        Ok((e, bytes))
    }

    pub fn read_kind(&self, id: &str, kind: Kind) -> Result<(Entry, Vec<u8>)> {
        let (e, bytes) = self.read(id)?;
        if e.kind != kind {
            return Err(ServiceError::not_found(format!("`{id}` is not a {kind:?} artifact")));
        }
        Ok((e, bytes))
    }

    pub fn path_of(&self, e: &Entry) -> PathBuf {
        self.root.join(&e.file)
    }

    pub fn list(&self, kind: Kind) -> Result<Vec<Entry>> {
        Ok(self.manifest()?.entries.into_values().filter(|e| e.kind == kind).collect())
    }
}
