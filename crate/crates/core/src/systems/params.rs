use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named real parameters. Keys are kept sorted so serialized output is stable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

/// Accepted spellings mapped to canonical names.
const ALIASES: &[(&str, &str)] = &[
    ("ε", "eps"),
    ("epsilon", "eps"),
    ("λ", "lambda"),
    ("ω", "omega"),
    ("γ", "gamma"),
    ("μ", "mu"),
];

fn canonical(name: &str) -> &str {
    ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, c)| c)
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Self {
        let mut p = Self::new();
        for &(k, v) in pairs {
            p.insert(k, v);
        }
        p
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        self.0.insert(canonical(name).to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(canonical(name)).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses one `key=value` assignment and stores it.
    pub fn push_assignment(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("expected key=value, got `{kv}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::InvalidInput(format!("empty parameter name in `{kv}`")));
        }
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter { name: k.to_string(), reason: format!("`{}` is not a number", v.trim()) })?;
        self.insert(k, v);
        Ok(())
    }
}

impl FromStr for Params {
    type Err = Error;

    /// Comma-separated `key=value` list; the empty string is the empty map.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Params::new();
        for kv in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            p.push_assignment(kv)?;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_aliases() {
        let p: Params = "eps=0.05, λ=1,b=-1.2".parse().unwrap();
        assert_eq!(p.get("eps"), Some(0.05));
        assert_eq!(p.get("lambda"), Some(1.0));
        assert_eq!(p.get("b"), Some(-1.2));
        assert!("".parse::<Params>().unwrap().is_empty());
        assert!("eps".parse::<Params>().is_err());
        assert!("eps=x".parse::<Params>().is_err());
    }
}
