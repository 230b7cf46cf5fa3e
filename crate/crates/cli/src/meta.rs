//! Output writing with metadata sidecars.

use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of the SHA-256 of the resolved config text.
pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.resolved_text().as_bytes());
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Writes `path` and its `<path>.meta` sidecar (config hash, seed, version).
pub fn write_with_meta(path: &Path, content: &[u8], cfg: &RunConfig) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    let meta = format!(
        "config_hash = {}\nseed = {}\nversion = {}\n",
        config_hash(cfg),
        cfg.seed,
        TOOL_VERSION
    );
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta");
    std::fs::write(&meta_path, meta)
        .with_context(|| format!("writing {}", Path::new(&meta_path).display()))?;
    Ok(())
}
