use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hostname suffixes of known ad and analytics servers.
///
/// Entries are lowercase bare hostnames (no scheme, no path). Matching is a
/// domain-suffix test on label boundaries: "ads.x.com" matches the entry
/// "x.com", but "badx.com" does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostnameList {
    pub entries: BTreeSet<String>,
    /// Where the list came from, for manifests and reports.
    pub source: String,
    /// SHA-256 of the raw file contents.
    pub digest: String,
}

impl HostnameList {
    pub fn empty() -> HostnameList {
        HostnameList {
            entries: BTreeSet::new(),
            source: "empty".to_string(),
            digest: hex::encode(Sha256::digest(b"")),
        }
    }

    /// Parse the one-hostname-per-line format. `#` starts a comment; blank
    /// lines are skipped. Entries are lowercased; anything that is not a
    /// bare hostname is rejected.
    pub fn from_text(raw: &str, source: &str) -> Result<HostnameList> {
        let mut entries = BTreeSet::new();
        for line in raw.lines() {
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            if entry.contains('/') || entry.contains(':') || entry.contains(char::is_whitespace) {
                return Err(Error::Data(format!(
                    "hostname list entry {entry:?} is not a bare hostname"
                )));
            }
            entries.insert(entry.to_ascii_lowercase());
        }
        Ok(HostnameList {
            entries,
            source: source.to_string(),
            digest: hex::encode(Sha256::digest(raw.as_bytes())),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<HostnameList> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)?;
        Self::from_text(&raw, &path.display().to_string())
    }

    /// True when `host` equals an entry or is a subdomain of one. A port
    /// suffix on `host` is ignored.
    pub fn matches(&self, host: &str) -> bool {
        let host = host.split(':').next().unwrap_or("").to_ascii_lowercase();
        if host.is_empty() {
            return false;
        }
        self.entries.iter().any(|entry| {
            host == *entry
                || (host.len() > entry.len()
                    && host.ends_with(entry.as_str())
                    && host.as_bytes()[host.len() - entry.len() - 1] == b'.')
        })
    }
}
