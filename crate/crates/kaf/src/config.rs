//! Flat `key = value` configuration files and sectioned recipes.
//!
//! Keys are long option names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored. A value of `true` stands for a bare
//! flag and `false` omits it.

use anyhow::{bail, Result};

use crate::UsageError;

pub type Entries = Vec<(String, String)>;

/// One `[subcommand]` or `[subcommand:label]` block of a recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub command: String,
    pub label: Option<String>,
    pub entries: Entries,
}

fn is_skipped(line: &str) -> bool {
    line.is_empty() || line.starts_with('#')
}

fn parse_entry(line: &str, lineno: usize) -> Result<(String, String)> {
    let Some((k, v)) = line.split_once('=') else {
        bail!(UsageError(format!("line {lineno}: expected key = value")));
    };
    let key = k.trim();
    if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
        bail!(UsageError(format!("line {lineno}: invalid key {key:?}")));
    }
    Ok((key.to_string(), v.trim().to_string()))
}

pub fn parse_config(text: &str) -> Result<Entries> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if is_skipped(line) {
            continue;
        }
        if line.starts_with('[') {
            bail!(UsageError(format!(
                "line {}: sections are only allowed in recipes",
                i + 1
            )));
        }
        entries.push(parse_entry(line, i + 1)?);
    }
    Ok(entries)
}

pub fn parse_recipe(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if is_skipped(line) {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                bail!(UsageError(format!("line {}: unterminated section header", i + 1)));
            };
            let (command, label) = match name.split_once(':') {
                Some((c, l)) => (c.trim(), Some(l.trim().to_string())),
                None => (name.trim(), None),
            };
            if command.is_empty() {
                bail!(UsageError(format!("line {}: empty section name", i + 1)));
            }
            sections.push(Section {
                command: command.to_string(),
                label,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(current) = sections.last_mut() else {
            bail!(UsageError(format!("line {}: entry outside of a section", i + 1)));
        };
        current.entries.push(parse_entry(line, i + 1)?);
    }
    if sections.is_empty() {
        bail!(UsageError("recipe has no sections".into()));
    }
    Ok(sections)
}

/// Turns entries into command-line arguments.
pub fn to_args(entries: &Entries) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}
