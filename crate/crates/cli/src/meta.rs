//! Sidecar metadata: one `key = value` pair per line, LF endings, written
//! next to each CSV so a table is self-describing (seed, stage choices,
//! radii, fitted slopes). Insertion order is preserved.

use std::fmt::Display;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Metadata::default()
    }

    pub fn put(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        assert!(
            !key.is_empty() && !key.contains(char::is_whitespace) && !key.contains('='),
            "bad metadata key {key:?}"
        );
        assert!(!value.contains('\n'), "metadata value for {key} spans lines");
        self.entries.push((key.to_string(), value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        }
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", i + 1))?;
            if k.is_empty() {
                bail!("line {}: empty key", i + 1);
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Metadata { entries })
    }
}
