//! Flat `key = value` run configuration with a content digest.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub subcommand: String,
    /// Sorted, so the text form and digest ignore insertion order.
    pub entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(subcommand: &str) -> Self {
        RunConfig {
            subcommand: subcommand.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Parses the text form. Blank lines and `#` comments are skipped; the
    /// `subcommand` key is mandatory.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut sub = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if k == "subcommand" {
                sub = Some(v.to_string());
            } else if cfg.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key '{k}'")));
            }
        }
        cfg.subcommand = sub.ok_or_else(|| Error::Config("missing 'subcommand'".into()))?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("subcommand = {}\n", self.subcommand);
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("bad value for '{key}': {e}"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|e| Error::Config(format!("bad list entry for '{key}': {e}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// SHA-256 of any serializable value's JSON form.
pub fn json_digest<T: Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string(value).map_err(|e| Error::Io(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_order_independent_digest() {
        let mut a = RunConfig::new("limits");
        a.set("q", "d1(psi)").set("d", 1).set("q0", "zero");
        let mut b = RunConfig::new("limits");
        b.set("q0", "zero").set("d", 1).set("q", "d1(psi)");
        assert_eq!(a.digest(), b.digest());
        let back = RunConfig::parse_text(&a.to_text()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.required::<u32>("d").unwrap(), 1);
        b.set("d", 3);
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn rejects_malformed() {
        assert!(RunConfig::parse_text("q = psi\n").is_err());
        assert!(RunConfig::parse_text("subcommand = x\nnot a pair\n").is_err());
        assert!(RunConfig::parse_text("subcommand = x\na = 1\na = 2\n").is_err());
        let c = RunConfig::parse_text("# comment\nsubcommand = hnorm\nN = 10,20\n").unwrap();
        assert_eq!(c.list::<usize>("N").unwrap().unwrap(), vec![10, 20]);
        assert!(c.required::<f64>("s").is_err());
    }
}
