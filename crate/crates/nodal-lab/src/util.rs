//! Small shared helpers: atomic file writes and stable hashing.

use crate::error::{Error, Result};
use std::path::Path;

/// Writes via a sibling temp file and rename, so readers never observe a
/// half-written file and a crash leaves the previous version intact.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io {
            path: path.display().to_string(),
            message: "path has no file name".into(),
        })?
        .to_owned();
    let mut tmp_name = file_name.clone();
    tmp_name.push(".tmp");
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), &e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), &e))?;
    Ok(())
}

/// FNV-1a over bytes; stable across platforms and runs.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 step; decorrelates derived seeds from structured inputs.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
