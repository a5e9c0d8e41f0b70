//! Flat `key = value` configuration text.
//!
//! One entry per line, `#` starts a comment. Keys are unique. Values are
//! stored verbatim and parsed by the consumer; lists are comma separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if map.entries.contains_key(key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            map.entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Overlays `other` on top of `self`; keys in `other` win. An angle set
    /// in `other` under either `key` or `key_deg` replaces both forms.
    pub fn merge(&mut self, other: KvMap) {
        for key in other.entries.keys() {
            match key.strip_suffix("_deg") {
                Some(stem) => self.entries.remove(stem),
                None => self.entries.remove(&format!("{key}_deg")),
            };
        }
        self.entries.extend(other.entries);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and parses `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("cannot parse `{s}` in `{key}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn take_triple(&mut self, key: &str) -> Result<Option<[f64; 3]>> {
        match self.take_list::<f64>(key)? {
            None => Ok(None),
            Some(v) => <[f64; 3]>::try_from(v.as_slice())
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}` needs exactly 3 values"))),
        }
    }

    /// Reads an angle given either in radians under `key` or in degrees under
    /// `key_deg`. Giving both is an error.
    pub fn take_angle(&mut self, key: &str) -> Result<Option<f64>> {
        let deg_key = format!("{key}_deg");
        let rad = self.take::<f64>(key)?;
        let deg = self.take::<f64>(&deg_key)?;
        match (rad, deg) {
            (Some(_), Some(_)) => Err(Error::Config(format!("both `{key}` and `{deg_key}` given"))),
            (Some(r), None) => Ok(Some(r)),
            (None, Some(d)) => Ok(Some(d.to_radians())),
            (None, None) => Ok(None),
        }
    }

    /// Fails if any key was not consumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.entries.into_keys().collect();
            Err(Error::Config(format!("unknown keys: {}", keys.join(", "))))
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub(crate) fn fmt_triple(v: &[f64; 3]) -> String {
    format!("{}, {}, {}", v[0], v[1], v[2])
}
