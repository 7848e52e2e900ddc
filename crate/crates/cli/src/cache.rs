//! Result cache keyed by a content hash of the canonical inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Output;

/// Overrides the cache directory.
pub const CACHE_ENV: &str = "THERMOFLOW_CACHE_DIR";
const FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    format: u32,
    key: String,
    output: Output,
}

/// SHA-256 over the length-prefixed inputs and the cache format version.
pub fn cache_key(inputs: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(format!("thermoflow-cache/{FORMAT}/{}", env!("CARGO_PKG_VERSION")));
    for s in inputs {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("thermoflow-cache"))
}

pub(crate) fn read(dir: &Path, key: &str) -> Option<Output> {
    let text = std::fs::read_to_string(dir.join(format!("{key}.json"))).ok()?;
    let e: Entry = serde_json::from_str(&text).ok()?;
    (e.format == FORMAT && e.key == key).then_some(e.output)
}

pub(crate) fn write(dir: &Path, key: &str, output: &Output) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let e = Entry { format: FORMAT, key: key.to_string(), output: output.clone() };
    let tmp = dir.join(format!("{key}.json.tmp"));
    std::fs::write(&tmp, serde_json::to_string(&e).expect("cache entries serialize"))?;
    std::fs::rename(tmp, dir.join(format!("{key}.json")))
}
