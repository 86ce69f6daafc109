//! Artifact writing: metadata headers and atomic replacement.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comment lines that make an artifact reproducible from its own metadata.
pub fn header(config_hash: &str, base_seed: u64) -> String {
    format!("# basket {VERSION}\n# config_sha256: {config_hash}\n# base_seed: {base_seed}\n")
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot replace {}", path.display()))?;
    Ok(())
}

/// Header followed by the bytes produced by `body`.
pub fn write_with_header<F>(path: &Path, config_hash: &str, base_seed: u64, body: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> basket_core::Result<()>,
{
    let mut buf = header(config_hash, base_seed).into_bytes();
    body(&mut buf).with_context(|| format!("cannot render {}", path.display()))?;
    write_atomic(path, &buf)
}
