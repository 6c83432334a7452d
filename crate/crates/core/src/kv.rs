//! Flat `name = value` text files used for parameters, scenarios and run configs.
//!
//! Blank lines and lines starting with `#` are ignored. Floats are written with
//! the shortest representation that parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse { line: n + 1, message: format!("expected `name = value`, got `{line}`") });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse { line: n + 1, message: format!("invalid key `{key}`") });
            }
            if entries.insert(key.to_string(), (n + 1, value.trim().to_string())).is_some() {
                return Err(Error::Parse { line: n + 1, message: format!("duplicate key `{key}`") });
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `key` if present.
    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line: *line, message: format!("bad value `{v}` for `{key}`") }),
        }
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Rejects keys outside `known`.
    pub fn expect_only(&self, known: &[&str]) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::Parse { line: *line, message: format!("unknown key `{k}`") });
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, (_, v)) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let kv = KeyValues::parse("# comment\n a = 1.5\n\nb=hello world\n").unwrap();
        assert_eq!(kv.get::<f64>("a").unwrap(), Some(1.5));
        assert_eq!(kv.raw("b"), Some("hello world"));
        assert_eq!(kv.get_or("c", 3usize).unwrap(), 3);
        let again = KeyValues::parse(&kv.render()).unwrap();
        assert_eq!(again.raw("a"), Some("1.5"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match KeyValues::parse("a = 1\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(KeyValues::parse("a = 1\na = 2\n").is_err());
        let kv = KeyValues::parse("x = abc\n").unwrap();
        assert!(kv.get::<f64>("x").is_err());
        assert!(kv.expect_only(&["y"]).is_err());
    }
}
