//! `key = value` run configuration files.
//!
//! ```text
//! # comment lines start with '#'; blank lines are ignored
//! seed = 7
//! max_epochs = 20
//! query = "ibuprofen"        # no trailing comments: this is part of the value
//! ```
//!
//! Keys are the long flag names; `-` and `_` are interchangeable. A value may
//! be wrapped in double quotes. Each key may appear once. A flag given on the
//! command line overrides the file, which overrides the built-in default.
//! Keys the current subcommand does not understand are rejected.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use super::CliError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    /// key → (value, 1-based line)
    pub entries: BTreeMap<String, (String, usize)>,
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

pub fn parse_config(text: &str) -> Result<ConfigFile, String> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {lineno}: expected key = value, found {line:?}"));
        };
        let key = normalize_key(k);
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("line {lineno}: invalid key {:?}", k.trim()));
        }
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        } else if value.contains('"') {
            return Err(format!("line {lineno}: unbalanced quote in value"));
        }
        if entries.insert(key.clone(), (value.to_owned(), lineno)).is_some() {
            return Err(format!("line {lineno}: duplicate key {key:?}"));
        }
    }
    Ok(ConfigFile { entries })
}

/// Resolves settings with flag > file > default precedence and records every
/// resolved value for the run manifest.
#[derive(Debug, Default)]
pub struct Settings {
    file: ConfigFile,
    used: RefCell<Vec<String>>,
    snapshot: RefCell<BTreeMap<String, Value>>,
}

impl Settings {
    pub fn new(file: ConfigFile) -> Self {
        Settings {
            file,
            ..Settings::default()
        }
    }

    fn from_file<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.file.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| {
                CliError::usage(format!("config line {line}: invalid value {v:?} for {key}: {e}"))
            }),
        }
    }

    fn record<T: Serialize>(&self, key: &str, value: &T) {
        self.snapshot.borrow_mut().insert(
            key.to_owned(),
            serde_json::to_value(value).expect("settings serialize"),
        );
    }

    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.used.borrow_mut().push(key.to_owned());
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn get_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.used.borrow_mut().push(key.to_owned());
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Boolean switch: `--flag` forces true, otherwise the file or default decides.
    pub fn switch(&self, key: &str, flag: bool, default: bool) -> Result<bool, CliError> {
        self.get(key, flag.then_some(true), default)
    }

    /// Records a value that has no config key (such as an input path list).
    pub fn note<T: Serialize>(&self, key: &str, value: &T) {
        self.record(key, value);
    }

    /// Fails on file keys that were never looked up.
    pub fn check_unused(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        for (k, (_, line)) in &self.file.entries {
            if !used.iter().any(|u| u == k) {
                return Err(CliError::usage(format!(
                    "config line {line}: unknown key {k:?} for this subcommand"
                )));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> BTreeMap<String, Value> {
        self.snapshot.borrow().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar() {
        let c = parse_config("# c\n\nseed = 3\nquery = \"a b\"\nmax-epochs=2\n").unwrap();
        assert_eq!(c.entries["seed"].0, "3");
        assert_eq!(c.entries["query"].0, "a b");
        assert_eq!(c.entries["max_epochs"], ("2".into(), 5));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("a = 1\na = 2\n").is_err());
        assert!(parse_config("a b = 1\n").is_err());
        assert!(parse_config("a = \"x\n").is_err());
    }

    #[test]
    fn precedence_flag_file_default() {
        let s = Settings::new(parse_config("k = 5\n").unwrap());
        assert_eq!(s.get("k", Some(9), 1).unwrap(), 9);
        assert_eq!(s.get("k", None, 1).unwrap(), 5);
        assert_eq!(s.get("other", None, 1).unwrap(), 1);
        assert!(s.check_unused().is_ok());
        let s = Settings::new(parse_config("k = 5\n").unwrap());
        assert_eq!(s.get("k", Some(9), 1).unwrap(), 9);
        assert!(s.check_unused().is_ok());
        let s = Settings::new(parse_config("zzz = 5\n").unwrap());
        assert!(s.check_unused().is_err());
    }
}
