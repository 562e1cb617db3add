//! Flat `key = value` run files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

/// Keys a run file may set; they mirror the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "n", "j0", "j1", "gamma", "omega", "b", "engine", "out", "workers", "sample-dt", "rel-tol", "axis", "grid", "t-end",
    "freeze",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunFile {
    values: BTreeMap<String, String>,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<RunFile, Failure> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Invalid(format!("config line {}: expected key = value", lineno + 1)));
            };
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Failure::Invalid(format!("config line {}: unknown key '{key}'", lineno + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(RunFile { values })
    }

    pub fn load(path: &Path) -> Result<RunFile, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        RunFile::parse(&text)
    }

    /// The flag if given, else the file value parsed as `T`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Invalid(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }
}

/// `start:stop:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::Invalid(format!("grid '{spec}' must be start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() || (count > 1 && stop <= start) {
        return Err(Failure::Invalid(format!("grid '{spec}' needs count ≥ 1 and stop > start")));
    }
    Ok(xy_resonance::experiments::linspace(start, stop, count))
}
