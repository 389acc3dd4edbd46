//! Checksummed integral files.
//!
//! A directory may carry a `SHA256SUMS` file (`<hex digest>  <relative path>`
//! per line). Loading a file listed in the nearest such manifest fails if
//! its digest does not match.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::integrals::{load_json_integrals, parse_fcidump, IntegralError, IntegralTable};

/// Environment variable overriding the fixture root.
pub const FIXTURE_ENV: &str = "QEE_FIXTURES";

pub const MANIFEST: &str = "SHA256SUMS";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: checksum mismatch (expected {expected}, found {actual})")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("{path}: {source}")]
    Integral {
        path: PathBuf,
        source: IntegralError,
    },
    #[error("{0}: malformed checksum manifest")]
    Manifest(PathBuf),
}

/// Fixture root: `$QEE_FIXTURES` if set, else the repository's `fixtures/`.
pub fn fixture_root() -> PathBuf {
    std::env::var_os(FIXTURE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse a manifest into relative path → digest.
pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>, FixtureError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (digest, rel) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| FixtureError::Manifest(path.to_path_buf()))?;
        out.insert(rel.trim().trim_start_matches('*').to_string(), digest.to_lowercase());
    }
    Ok(out)
}

// Nearest ancestor manifest and the file's path relative to it.
fn find_manifest(file: &Path) -> Option<(PathBuf, String)> {
    let abs = fs::canonicalize(file).ok()?;
    let mut dir = abs.parent();
    while let Some(d) = dir {
        let m = d.join(MANIFEST);
        if m.is_file() {
            let rel = abs.strip_prefix(d).ok()?.to_string_lossy().replace('\\', "/");
            return Some((m, rel));
        }
        dir = d.parent();
    }
    None
}

/// Integrals read from disk, with provenance.
#[derive(Debug, Clone)]
pub struct LoadedIntegrals {
    pub table: IntegralTable,
    pub n_electrons: Option<usize>,
    pub path: PathBuf,
    pub sha256: String,
    /// Whether the digest was checked against a manifest entry.
    pub verified: bool,
}

/// Read bytes, checking them against the nearest manifest when listed.
pub fn read_verified(path: &Path) -> Result<(Vec<u8>, String, bool), FixtureError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let digest = sha256_hex(&bytes);
    let mut verified = false;
    if let Some((manifest, rel)) = find_manifest(path) {
        if let Some(expected) = read_manifest(&manifest)?.get(&rel) {
            if *expected != digest {
                return Err(FixtureError::Checksum {
                    path: path.to_path_buf(),
                    expected: expected.clone(),
                    actual: digest,
                });
            }
            verified = true;
        }
    }
    Ok((bytes, digest, verified))
}

/// Load a `.fcidump` or JSON integral file.
pub fn load_integrals(path: &Path) -> Result<LoadedIntegrals, FixtureError> {
    let (bytes, sha256, verified) = read_verified(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let wrap = |source| FixtureError::Integral {
        path: path.to_path_buf(),
        source,
    };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('{');
    let (table, n_electrons) = if is_json {
        let table = load_json_integrals(&text).map_err(wrap)?;
        let n = table
            .metadata()
            .and_then(|m| m.get("n_electrons"))
            .and_then(|v| v.as_u64())
            .map(|v| v as usize);
        (table, n)
    } else {
        let (table, meta) = parse_fcidump(&text).map_err(wrap)?;
        (table, Some(meta.nelec))
    };
    Ok(LoadedIntegrals {
        table,
        n_electrons,
        path: path.to_path_buf(),
        sha256,
        verified,
    })
}

/// Load `rel` under [`fixture_root`].
pub fn load_fixture(rel: &str) -> Result<LoadedIntegrals, FixtureError> {
    load_integrals(&fixture_root().join(rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_manifest_is_consistent() {
        let root = fixture_root();
        let manifest = read_manifest(&root.join(MANIFEST)).unwrap();
        assert!(manifest.len() > 50);
        for (rel, digest) in &manifest {
            let bytes = fs::read(root.join(rel)).unwrap();
            assert_eq!(&sha256_hex(&bytes), digest, "{rel}");
        }
    }

    #[test]
    fn tampered_file_is_rejected() {
        let dir = tempdir();
        let f = dir.join("a.fcidump");
        let text = "&FCI NORB=1,NELEC=1,MS2=1,\n&END\n-0.5 1 1 0 0\n";
        fs::write(&f, text).unwrap();
        fs::write(dir.join(MANIFEST), format!("{}  a.fcidump\n", sha256_hex(text.as_bytes()))).unwrap();
        let loaded = load_integrals(&f).unwrap();
        assert!(loaded.verified);
        assert_eq!(loaded.n_electrons, Some(1));
        fs::write(&f, text.replace("-0.5", "-0.6")).unwrap();
        assert!(matches!(load_integrals(&f), Err(FixtureError::Checksum { .. })));
        fs::remove_dir_all(dir).unwrap();
    }

    fn tempdir() -> PathBuf {
        let d = std::env::temp_dir().join(format!("qee-fixture-test-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }
}
