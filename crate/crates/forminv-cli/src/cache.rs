//! Content-addressed cache for parsed response matrices, keyed by the
//! SHA-256 of the raw record file bytes.

use std::path::{Path, PathBuf};

use forminv::{sha256_hex, ResponseMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub puts: u64,
    pub evictions: u64,
}

#[derive(Debug)]
pub struct Cache {
    dir: PathBuf,
    stats: CacheStats,
    warnings: Vec<String>,
}

impl Cache {
    pub fn open(dir: &Path) -> std::io::Result<Cache> {
        std::fs::create_dir_all(dir)?;
        Ok(Cache {
            dir: dir.to_path_buf(),
            stats: CacheStats::default(),
            warnings: Vec::new(),
        })
    }

    /// Content-addressed key of a record file's bytes.
    pub fn key(bytes: &[u8]) -> String {
        sha256_hex(bytes)
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Parsed matrix for `key`, if present and intact. Corrupt entries are
    /// evicted with a warning and treated as misses.
    pub fn get(&mut self, key: &str) -> Option<ResponseMatrix> {
        let path = self.entry_path(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(_) => {
                self.stats.misses += 1;
                return None;
            }
        };
        match serde_json::from_str::<ResponseMatrix>(&text) {
            Ok(m) => {
                self.stats.hits += 1;
                Some(m)
            }
            Err(e) => {
                self.stats.evictions += 1;
                self.stats.misses += 1;
                self.warnings.push(format!(
                    "evicted corrupt cache entry {}: {e}",
                    path.display()
                ));
                let _ = std::fs::remove_file(&path);
                None
            }
        }
    }

    pub fn put(&mut self, key: &str, matrix: &ResponseMatrix) {
        let path = self.entry_path(key);
        if let Ok(json) = serde_json::to_string(matrix) {
            if std::fs::write(&path, json).is_ok() {
                self.stats.puts += 1;
            }
        }
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }
}

/// Read and parse a record file, going through the cache when one is given.
#[allow(clippy::result_large_err)]
pub fn load_matrix(
    path: &Path,
    cache: Option<&mut Cache>,
) -> forminv::Result<(ResponseMatrix, bool)> {
    match cache {
        None => Ok((forminv::parse_records(path)?, false)),
        Some(cache) => {
            let bytes = std::fs::read(path).map_err(|e| forminv::Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let key = Cache::key(&bytes);
            if let Some(m) = cache.get(&key) {
                return Ok((m, true));
            }
            let matrix = forminv::parse_records_reader(std::io::Cursor::new(bytes))?;
            cache.put(&key, &matrix);
            Ok((matrix, false))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn record_file(dir: &Path) -> PathBuf {
        let path = dir.join("records.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            r#"{{"model":"m","theorem_id":"t","item_id":"t_canon","family":"canonical","ground_truth":true,"answer":true}}"#
        )
        .unwrap();
        writeln!(
            f,
            r#"{{"model":"m","theorem_id":"t","item_id":"t_f1","family":"syntactic","ground_truth":true,"answer":false}}"#
        )
        .unwrap();
        path
    }

    #[test]
    fn same_bytes_hit_after_one_parse() {
        let dir = tempfile::tempdir().unwrap();
        let records = record_file(dir.path());
        let mut cache = Cache::open(&dir.path().join("cache")).unwrap();
        let (_, cached1) = load_matrix(&records, Some(&mut cache)).unwrap();
        let (m2, cached2) = load_matrix(&records, Some(&mut cache)).unwrap();
        assert!(!cached1);
        assert!(cached2);
        assert_eq!(m2.records().len(), 2);
        assert_eq!(cache.stats().puts, 1);
        assert_eq!(cache.stats().hits, 1);
    }

    #[test]
    fn changed_bytes_use_a_distinct_key() {
        assert_ne!(Cache::key(b"a"), Cache::key(b"b"));
        assert_eq!(Cache::key(b"a").len(), 64);
    }

    #[test]
    fn corrupt_entry_is_evicted_and_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let records = record_file(dir.path());
        let cache_dir = dir.path().join("cache");
        let mut cache = Cache::open(&cache_dir).unwrap();
        let (_, _) = load_matrix(&records, Some(&mut cache)).unwrap();
        // corrupt the single entry
        let entry = std::fs::read_dir(&cache_dir)
            .unwrap()
            .next()
            .unwrap()
            .unwrap()
            .path();
        std::fs::write(&entry, "not json").unwrap();
        let (m, cached) = load_matrix(&records, Some(&mut cache)).unwrap();
        assert!(!cached);
        assert_eq!(m.records().len(), 2);
        assert_eq!(cache.stats().evictions, 1);
        assert!(!cache.take_warnings().is_empty());
    }

    #[test]
    fn disabled_cache_never_touches_disk() {
        let dir = tempfile::tempdir().unwrap();
        let records = record_file(dir.path());
        let (_, cached) = load_matrix(&records, None).unwrap();
        assert!(!cached);
    }
}
