//! Plain-text configuration: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Values are kept as strings until a consumer
//! asks for a typed value; consumers reject keys they do not know.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] unknown key '{key}'")]
    UnknownKey { section: String, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("[{section}] {key} = '{value}': {msg}")]
    BadValue {
        section: String,
        key: String,
        value: String,
        msg: String,
    },
    #[error("[{section}] missing key '{key}'")]
    Missing { section: String, key: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, Section>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    name: String,
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = ConfigFile::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: i + 1,
                    msg: "unterminated section header".into(),
                })?;
                let name = name.trim().to_string();
                out.sections.entry(name.clone()).or_insert_with(|| Section {
                    name: name.clone(),
                    entries: BTreeMap::new(),
                });
                current = Some(name);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            let sec = current.as_ref().ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: "key outside of any section".into(),
            })?;
            let entries = &mut out.sections.get_mut(sec).expect("section exists").entries;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    msg: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(out)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    /// Section or an empty one, so defaults apply.
    pub fn section_or_empty(&self, name: &str) -> Section {
        self.sections.get(name).cloned().unwrap_or_else(|| Section {
            name: name.to_string(),
            entries: BTreeMap::new(),
        })
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn reject_unknown_sections(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.sections.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownSection(k.clone())),
            None => Ok(()),
        }
    }

    /// Sets `section.key = value`, creating the section if needed (flag overrides).
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_insert_with(|| Section {
                name: section.to_string(),
                entries: BTreeMap::new(),
            })
            .entries
            .insert(key.to_string(), value.into());
    }
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey {
                section: self.name.clone(),
                key: k.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::BadValue {
                section: self.name.clone(),
                key: key.to_string(),
                value: v.clone(),
                msg: e.to_string(),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing {
            section: self.name.clone(),
            key: key.to_string(),
        })
    }

    /// Positive finite real, used for every tolerance knob.
    pub fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.get_or(key, default)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.bad(key, "must be a positive finite number"))
        }
    }

    pub fn bad(&self, key: &str, msg: &str) -> ConfigError {
        ConfigError::BadValue {
            section: self.name.clone(),
            key: key.to_string(),
            value: self.entries.get(key).cloned().unwrap_or_default(),
            msg: msg.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let c = ConfigFile::parse("# top\n[solve]\nnewton_tol = 1e-10 # tight\nmax_iters=30\n\n[lattice]\nkind = square\n").unwrap();
        let s = c.section("solve").unwrap();
        assert_eq!(s.get::<f64>("newton_tol").unwrap(), Some(1e-10));
        assert_eq!(s.get_or::<u32>("max_iters", 5).unwrap(), 30);
        assert_eq!(c.section("lattice").unwrap().raw("kind"), Some("square"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_syntax() {
        let c = ConfigFile::parse("[solve]\nbogus = 1\n").unwrap();
        assert!(matches!(
            c.section("solve").unwrap().reject_unknown(&["newton_tol"]),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(ConfigFile::parse("x = 1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ConfigFile::parse("[a\n"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(ConfigFile::parse("[a]\nk=1\nk=2\n"), Err(ConfigError::Syntax { line: 3, .. })));
    }

    #[test]
    fn tolerances_must_be_positive() {
        let c = ConfigFile::parse("[nodal]\ntol_zero = -1\n").unwrap();
        assert!(c.section("nodal").unwrap().positive("tol_zero", 1e-6).is_err());
        assert_eq!(Section::new("x").positive("tol_zero", 1e-6).unwrap(), 1e-6);
    }
}
