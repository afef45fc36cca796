//! Frozen constants produced by `accept --calibrate`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Copy of `constants/fitted.cfg` compiled into the binary.
pub const BUILTIN: &str = include_str!("../constants/fitted.cfg");

/// Default location of the constants file inside the source tree.
pub fn default_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("constants").join("fitted.cfg")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FittedConstants {
    pub values: BTreeMap<String, f64>,
}

impl FittedConstants {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(format!("constants line {}: expected `key = value`", i + 1))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("constants line {}: `{}` is not a number", i + 1, v.trim()))?;
            values.insert(k.trim().to_string(), v);
        }
        Ok(FittedConstants { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            Some(p) => Self::parse(&std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?),
            None => Self::parse(BUILTIN),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn render(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v:e}");
        }
        out
    }
}
