//! Run manifests: enough metadata to reproduce any output bitwise.
//!
//! A manifest records the command, the FNV-1a hash of the effective config
//! text, the seed, and the grid format version. No timestamps or host
//! details: two identical runs must write identical manifests.

use std::path::Path;

use anyhow::Result;
use bevkit::grid::GRID_FORMAT_VERSION;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Running FNV-1a hasher for checksumming streamed output.
#[derive(Debug, Clone)]
pub struct Checksum(u64);

impl Checksum {
    pub fn new() -> Self {
        Checksum(0xcbf29ce484222325)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn update_f32s(&mut self, values: &[f32]) {
        for v in values {
            self.update(&v.to_le_bytes());
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Checksum {
    fn default() -> Self {
        Self::new()
    }
}

/// Write `manifest.txt` into `dir`.
pub fn write_run_manifest(
    dir: &Path,
    command: &str,
    config_text: &str,
    seed: u64,
    extra: &[(&str, String)],
) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("command={command}\n"));
    text.push_str(&format!(
        "config_hash={:016x}\n",
        fnv1a64(config_text.as_bytes())
    ));
    text.push_str(&format!("seed={seed}\n"));
    text.push_str(&format!(
        "grid_format={}\n",
        std::str::from_utf8(GRID_FORMAT_VERSION).expect("ascii magic")
    ));
    text.push_str(&format!("tool_version={}\n", env!("CARGO_PKG_VERSION")));
    for (key, value) in extra {
        text.push_str(&format!("{key}={value}\n"));
    }
    write_text_atomic(&dir.join("manifest.txt"), &text)
}

/// Write a text file via a sibling temp file and rename.
pub fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, text.as_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
