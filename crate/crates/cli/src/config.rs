//! Flat key=value config files. Keys mirror the long CLI flags one to one;
//! a flag given on the command line always wins over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Reads `key=value` lines. Blank lines and `#` comments are skipped;
    /// whitespace around key and value is trimmed; a repeated key keeps
    /// the last occurrence.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {} is not key=value: {line:?}",
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    pub fn get_str(&self, key: &str) -> Option<String> {
        self.map.get(key).cloned()
    }

    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.map.get(key).map(PathBuf::from)
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key} has unparsable value {raw:?}"))
            }),
        }
    }

    /// Comma-separated list value, each element parsed.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim().parse::<T>().map_err(|_| {
                        CliError::Usage(format!("config key {key} has unparsable item {item:?}"))
                    })
                })
                .collect::<Result<Vec<T>, CliError>>()
                .map(Some),
        }
    }
}

/// Default seed when neither flag nor config provides one: the LP_SEED
/// environment variable, or 0.
pub fn env_default_seed() -> Result<u64, CliError> {
    match std::env::var("LP_SEED") {
        Err(_) => Ok(0),
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("LP_SEED is not a u64: {raw:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_keys_comments_and_blanks() {
        let f = write_config("# header\n\np = 0.25\nout_dir=/tmp/x\nseeds = 1, 2,3\n");
        let cfg = FileConfig::load(f.path()).unwrap();
        assert_eq!(cfg.get_parsed::<f64>("p").unwrap(), Some(0.25));
        assert_eq!(cfg.get_path("out_dir"), Some(PathBuf::from("/tmp/x")));
        assert_eq!(cfg.get_list::<u64>("seeds").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(cfg.get_str("missing"), None);
    }

    #[test]
    fn last_duplicate_wins() {
        let f = write_config("seed=1\nseed=2\n");
        let cfg = FileConfig::load(f.path()).unwrap();
        assert_eq!(cfg.get_parsed::<u64>("seed").unwrap(), Some(2));
    }

    #[test]
    fn rejects_non_assignment_lines() {
        let f = write_config("just words\n");
        assert!(matches!(
            FileConfig::load(f.path()),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn rejects_bad_values() {
        let f = write_config("p=fast\n");
        let cfg = FileConfig::load(f.path()).unwrap();
        assert!(matches!(
            cfg.get_parsed::<f64>("p"),
            Err(CliError::Usage(_))
        ));
    }
}
