//! Flat key-value run configuration.
//!
//! A config file is plain text, one `key = value` per line, `#` comments,
//! keys namespaced per module (`geometry.radius_of_curvature_mm`,
//! `budget.mirror_transmission`, `trace.seed`, ...). Command-line
//! `--set key=value` flags override file entries. Unknown keys are a hard
//! error: each command consumes the keys it understands and then rejects
//! whatever is left, so a typo never passes silently.
//!
//! Every physical value carries its unit in the key name. Getters record
//! the value actually used, defaults included, so a command can emit the
//! fully resolved configuration that reproduces its run.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("one of the keys {options:?} is required")]
    MissingAlternative { options: Vec<String> },
    #[error("invalid value for `{key}`: `{value}` is not {expected}")]
    InvalidValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("unknown config keys: {}", keys.join(", "))]
    UnknownKeys { keys: Vec<String> },
}

/// The merged, consumption-tracked key-value map a command runs on.
#[derive(Debug, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    consumed: RefCell<BTreeSet<String>>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse config text; `source_name` labels parse errors.
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    source_name: source_name.to_string(),
                    line: line_no,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    source_name: source_name.to_string(),
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Parse {
                    source_name: source_name.to_string(),
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            entries,
            ..Self::default()
        })
    }

    /// Insert or override an entry (command-line flags win over the file).
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Mark a key consumed without reading it, for global flags that only
    /// some commands care about.
    pub fn mark_consumed(&self, key: &str) {
        self.consumed.borrow_mut().insert(key.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn record(&self, key: &str, value: impl ToString) {
        self.resolved
            .borrow_mut()
            .insert(key.to_string(), value.to_string());
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                let parsed: f64 = v.parse().map_err(|_| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v.clone(),
                    expected: "a number",
                })?;
                self.record(key, parsed);
                Ok(Some(parsed))
            }
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get_f64(key)?.ok_or_else(|| ConfigError::MissingKey {
            key: key.to_string(),
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let value = self.get_f64(key)?.unwrap_or(default);
        self.record(key, value);
        Ok(value)
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                let parsed: u64 = v.parse().map_err(|_| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v.clone(),
                    expected: "a non-negative integer",
                })?;
                self.record(key, parsed);
                Ok(Some(parsed))
            }
        }
    }

    pub fn require_u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.get_u64(key)?.ok_or_else(|| ConfigError::MissingKey {
            key: key.to_string(),
        })
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let value = self.get_u64(key)?.unwrap_or(default);
        self.record(key, value);
        Ok(value)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn get_string(&self, key: &str) -> Option<String> {
        let value = self.raw(key);
        if let Some(v) = &value {
            self.record(key, v);
        }
        value
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        let value = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, &value);
        value
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => {
                self.record(key, default);
                Ok(default)
            }
            Some(v) => match v.as_str() {
                "true" => {
                    self.record(key, true);
                    Ok(true)
                }
                "false" => {
                    self.record(key, false);
                    Ok(false)
                }
                _ => Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v,
                    expected: "`true` or `false`",
                }),
            },
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                let mut values = Vec::new();
                for part in v.split(',') {
                    let parsed: f64 =
                        part.trim().parse().map_err(|_| ConfigError::InvalidValue {
                            key: key.to_string(),
                            value: v.clone(),
                            expected: "a comma-separated list of numbers",
                        })?;
                    values.push(parsed);
                }
                self.record(key, &v);
                Ok(Some(values))
            }
        }
    }

    /// Hard-fail on any key no getter ever consumed.
    pub fn reject_unknown(&self) -> Result<(), ConfigError> {
        let consumed = self.consumed.borrow();
        let unknown: Vec<String> = self
            .entries
            .keys()
            .filter(|k| !consumed.contains(*k))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys { keys: unknown })
        }
    }

    /// The fully resolved configuration (defaults included) as config-file
    /// text; running the same command on it reproduces the run.
    pub fn resolved_text(&self) -> String {
        let mut text = String::new();
        for (key, value) in self.resolved.borrow().iter() {
            let _ = writeln!(text, "{key} = {value}");
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_values() {
        let cfg = RunConfig::parse(
            "# a comment\n\ngeometry.radius_of_curvature_mm = 5.5\ntrace.seed=7\n",
            "test",
        )
        .unwrap();
        assert_eq!(
            cfg.require_f64("geometry.radius_of_curvature_mm").unwrap(),
            5.5
        );
        assert_eq!(cfg.require_u64("trace.seed").unwrap(), 7);
        assert!(cfg.reject_unknown().is_ok());
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let cfg = RunConfig::parse("geometry.radius_of_curvature_m = 5.5\n", "test").unwrap();
        let err = cfg.reject_unknown().unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKeys { keys } if keys.len() == 1));
    }

    #[test]
    fn duplicate_keys_rejected_at_parse_time() {
        let err = RunConfig::parse("a.b = 1\na.b = 2\n", "test").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = RunConfig::parse("a.b = 1\nnonsense\n", "test").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn flags_override_file_entries() {
        let mut cfg = RunConfig::parse("trace.seed = 1\n", "test").unwrap();
        cfg.set("trace.seed", 42_u64);
        assert_eq!(cfg.require_u64("trace.seed").unwrap(), 42);
    }

    #[test]
    fn invalid_number_is_a_typed_error() {
        let cfg = RunConfig::parse("x = abc\n", "test").unwrap();
        assert!(matches!(
            cfg.require_f64("x"),
            Err(ConfigError::InvalidValue { .. })
        ));
    }

    #[test]
    fn resolved_text_round_trips_defaults() {
        let cfg = RunConfig::parse("a.value_mm = 2.5\n", "test").unwrap();
        let _ = cfg.require_f64("a.value_mm").unwrap();
        let _ = cfg.f64_or("a.other_mm", 7.25).unwrap();
        let _ = cfg.bool_or("a.flag", false).unwrap();
        let text = cfg.resolved_text();
        let again = RunConfig::parse(&text, "resolved").unwrap();
        assert_eq!(again.require_f64("a.value_mm").unwrap(), 2.5);
        assert_eq!(again.require_f64("a.other_mm").unwrap(), 7.25);
        assert!(!again.bool_or("a.flag", true).unwrap());
        assert!(again.reject_unknown().is_ok());
    }

    #[test]
    fn f64_list_parsing() {
        let cfg = RunConfig::parse("delays = 50, 100,150\n", "test").unwrap();
        assert_eq!(
            cfg.get_f64_list("delays").unwrap().unwrap(),
            vec![50.0, 100.0, 150.0]
        );
    }
}
