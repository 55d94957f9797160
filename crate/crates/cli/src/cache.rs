//! Content-addressed cache for derived tradeoff functions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> Self {
        Cache { dir: dir.to_path_buf() }
    }

    /// Hex SHA-256 of the key's JSON form, prefixed with the crate version so
    /// that entries never survive an algorithm change.
    pub fn key<K: Serialize>(kind: &str, key: &K) -> String {
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(kind.as_bytes());
        h.update(serde_json::to_vec(key).expect("cache keys serialize"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{key}.json"))
    }

    pub fn load<V: DeserializeOwned>(&self, kind: &str, key: &str) -> Option<V> {
        let text = fs::read_to_string(self.path(kind, key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Best effort: a failed write only costs a recomputation later.
    pub fn store<V: Serialize>(&self, kind: &str, key: &str, value: &V) {
        if fs::create_dir_all(&self.dir).is_ok() {
            let tmp = self.dir.join(format!(".{kind}-{key}.tmp"));
            if let Ok(text) = serde_json::to_string_pretty(value) {
                if fs::write(&tmp, text).is_ok() {
                    let _ = fs::rename(&tmp, self.path(kind, key));
                }
            }
        }
    }
}
