use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::dataset::{parse_libsvm, Dataset, LabelRule, ParseOptions};
use super::DataError;

/// One downloadable dataset: source location, optional content pin, and how
/// to interpret the file once fetched.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RegistryEntry {
    pub url: String,
    #[serde(default)]
    pub sha256: Option<String>,
    #[serde(default)]
    pub label_rule: LabelRule,
    #[serde(default)]
    pub num_cols: Option<usize>,
}

/// Name-to-source table for `fetch_dataset`. Loadable from JSON so
/// deployments can pin their own mirrors and checksums.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Registry {
    pub entries: BTreeMap<String, RegistryEntry>,
}

impl Registry {
    /// The two benchmark datasets, pointing at the upstream repository.
    /// Checksums are not pinned here; use a custom registry file to pin them.
    pub fn builtin() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            "w1a".to_string(),
            RegistryEntry {
                url: "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/w1a"
                    .to_string(),
                sha256: None,
                label_rule: LabelRule::LargerPositive,
                num_cols: Some(300),
            },
        );
        entries.insert(
            "breast-cancer".to_string(),
            RegistryEntry {
                url: "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/breast-cancer"
                    .to_string(),
                sha256: None,
                label_rule: LabelRule::LargerPositive,
                num_cols: Some(10),
            },
        );
        Registry { entries }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(DataError::Io)?;
        serde_json::from_str(&text)
            .map_err(|e| DataError::Invalid(format!("bad registry file {}: {e}", path.display())))
    }

    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.get(name)
    }

    pub fn parse_options(&self, name: &str) -> Option<ParseOptions> {
        let entry = self.get(name)?;
        let mut opts = ParseOptions::named(name).with_label_rule(entry.label_rule);
        opts.num_cols = entry.num_cols;
        Some(opts)
    }
}

/// Download (or reuse from `cache_dir`) the named dataset, verify its
/// checksum when one is pinned, decompress `.gz` files, and parse.
///
/// Network failures are retryable; a checksum mismatch is not, since it
/// means the source content changed out from under the pin.
pub fn fetch_dataset(registry: &Registry, name: &str, cache_dir: &Path) -> Result<Dataset, DataError> {
    let entry = registry
        .get(name)
        .ok_or_else(|| DataError::UnknownDataset(name.to_string()))?;
    let filename = entry
        .url
        .rsplit('/')
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| DataError::Invalid(format!("cannot derive a filename from {}", entry.url)))?;
    let dir = cache_dir.join(name);
    let path = dir.join(filename);

    if !path.exists() {
        fs::create_dir_all(&dir).map_err(DataError::Io)?;
        let bytes = retrieve(&entry.url)?;
        // write-then-rename so an interrupted fetch never looks like a cache hit
        let tmp = dir.join(format!("{filename}.partial"));
        fs::write(&tmp, &bytes).map_err(DataError::Io)?;
        fs::rename(&tmp, &path).map_err(DataError::Io)?;
    }

    let bytes = fs::read(&path).map_err(DataError::Io)?;
    if let Some(expected) = &entry.sha256 {
        let actual = hex::encode(Sha256::digest(&bytes));
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(DataError::ChecksumMismatch {
                name: name.to_string(),
                expected: expected.clone(),
                actual,
            });
        }
    }

    let opts = registry.parse_options(name).expect("entry just looked up");
    if filename.ends_with(".gz") {
        let decoder = flate2::read::GzDecoder::new(&bytes[..]);
        parse_libsvm(BufReader::new(decoder), &opts)
    } else {
        parse_libsvm(&bytes[..], &opts)
    }
}

/// Cache directory resolution used by callers: explicit flag, then the
/// `GRIDSGD_CACHE` environment variable, then `.gridsgd-cache` in the
/// working directory.
pub fn default_cache_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("GRIDSGD_CACHE") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from(".gridsgd-cache")
}

fn retrieve(url: &str) -> Result<Vec<u8>, DataError> {
    if let Some(rest) = url.strip_prefix("file://") {
        return fs::read(rest).map_err(|e| network_err(url, e.to_string()));
    }
    if url.starts_with("http://") || url.starts_with("https://") {
        let response = ureq::get(url).call().map_err(|e| network_err(url, e.to_string()))?;
        let mut bytes = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut bytes)
            .map_err(|e| network_err(url, e.to_string()))?;
        return Ok(bytes);
    }
    // bare filesystem path, the offline escape hatch
    fs::read(url).map_err(|e| network_err(url, e.to_string()))
}

fn network_err(url: &str, message: String) -> DataError {
    DataError::Network { url: url.to_string(), message }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn registry_for(url: &str, sha256: Option<String>) -> Registry {
        let mut entries = BTreeMap::new();
        entries.insert(
            "tiny".to_string(),
            RegistryEntry { url: url.to_string(), sha256, label_rule: LabelRule::LargerPositive, num_cols: None },
        );
        Registry { entries }
    }

    const TEXT: &str = "+1 1:0.5 3:2.0\n-1 2:1.0\n";

    #[test]
    fn fetches_verifies_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("tiny.libsvm");
        fs::write(&src, TEXT).unwrap();
        let digest = hex::encode(Sha256::digest(TEXT.as_bytes()));
        let reg = registry_for(src.to_str().unwrap(), Some(digest));
        let cache = dir.path().join("cache");

        let d = fetch_dataset(&reg, "tiny", &cache).unwrap();
        assert_eq!(d.num_rows(), 2);
        assert_eq!(d.name, "tiny");

        // second call must come from the cache: remove the source
        fs::remove_file(&src).unwrap();
        let d2 = fetch_dataset(&reg, "tiny", &cache).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn checksum_mismatch_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("tiny.libsvm");
        fs::write(&src, TEXT).unwrap();
        let reg = registry_for(src.to_str().unwrap(), Some("00".repeat(32)));
        let err = fetch_dataset(&reg, "tiny", &dir.path().join("cache")).unwrap_err();
        assert!(matches!(err, DataError::ChecksumMismatch { .. }), "{err:?}");
    }

    #[test]
    fn gzip_files_are_decompressed() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("tiny.libsvm.gz");
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(TEXT.as_bytes()).unwrap();
        fs::write(&src, enc.finish().unwrap()).unwrap();
        let reg = registry_for(src.to_str().unwrap(), None);
        let d = fetch_dataset(&reg, "tiny", &dir.path().join("cache")).unwrap();
        assert_eq!(d.num_rows(), 2);
        assert_eq!(d.matrix.nnz(), 3);
    }

    #[test]
    fn unknown_names_and_dead_sources_error() {
        let dir = tempfile::tempdir().unwrap();
        let reg = registry_for("/nonexistent/source", None);
        assert!(matches!(
            fetch_dataset(&reg, "nope", dir.path()),
            Err(DataError::UnknownDataset(_))
        ));
        assert!(matches!(
            fetch_dataset(&reg, "tiny", dir.path()),
            Err(DataError::Network { .. })
        ));
    }

    #[test]
    #[ignore = "requires outbound network access"]
    fn fetches_the_real_w1a() {
        let dir = tempfile::tempdir().unwrap();
        let d = fetch_dataset(&Registry::builtin(), "w1a", dir.path()).unwrap();
        assert_eq!(d.num_rows(), 2477);
        assert_eq!(d.num_cols(), 300);
    }
}
