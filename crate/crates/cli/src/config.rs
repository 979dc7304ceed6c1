//! Flat key=value configuration, value parsers for angles and grids, and the
//! flag > file > default precedence.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

/// Bad configuration or arguments. Mapped to exit code 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(usage(format!("format must be csv or json, got '{s}'"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Keys every command accepts.
pub const SHARED_KEYS: &[&str] = &["seed", "samples", "out", "format"];

/// Parses `key=value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_config_text(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!("config line {}: expected key=value, got '{line}'", i + 1)));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Resolved key/value settings for one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Layers config-file entries under flag entries, rejecting keys outside
    /// `allowed` (plus [`SHARED_KEYS`]).
    pub fn resolve(
        command: &str,
        allowed: &[&str],
        config_file: Option<&Path>,
        flags: &[(String, String)],
    ) -> anyhow::Result<Self> {
        let mut values = BTreeMap::new();
        let check = |k: &str, origin: &str| -> anyhow::Result<()> {
            if SHARED_KEYS.contains(&k) || allowed.contains(&k) {
                Ok(())
            } else {
                let mut keys: Vec<&str> = SHARED_KEYS.iter().chain(allowed).copied().collect();
                keys.sort_unstable();
                Err(usage(format!("unknown key '{k}' in {origin} for {command}; accepted keys: {}", keys.join(", "))))
            }
        };
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                check(&k, "config file")?;
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            check(k, "flags")?;
            values.insert(k.clone(), v.clone());
        }
        Ok(Settings { command: command.to_string(), values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn wrap<T>(&self, key: &str, r: anyhow::Result<T>) -> anyhow::Result<T> {
        r.map_err(|e| usage(format!("{}: invalid value for '{key}': {e}", self.command)))
    }

    pub fn real(&self, key: &str, default: f64) -> anyhow::Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => self.wrap(key, parse_angle(v)),
        }
    }

    pub fn integer<T: FromStr>(&self, key: &str, default: T) -> anyhow::Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => self.wrap(key, v.parse::<T>().map_err(|e| anyhow::anyhow!("{e}"))),
        }
    }

    pub fn grid(&self, key: &str, default: &str) -> anyhow::Result<Vec<f64>> {
        let v = self.raw(key).unwrap_or(default);
        self.wrap(key, parse_grid(v))
    }

    pub fn text<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn format(&self) -> anyhow::Result<Format> {
        self.raw("format").map_or(Ok(Format::Csv), Format::from_str)
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.raw("out").map(PathBuf::from)
    }
}

/// Real number or multiple of pi: `0.3`, `pi`, `-pi/2`, `3pi/4`, `3*pi/4`, `0.5pi`.
pub fn parse_angle(s: &str) -> anyhow::Result<f64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    if t.is_empty() {
        anyhow::bail!("empty number");
    }
    let x = match t.find("pi") {
        None => t.parse::<f64>().map_err(|_| anyhow::anyhow!("not a number: '{s}'"))?,
        Some(at) => {
            let head = t[..at].trim_end_matches('*');
            let tail = &t[at + 2..];
            let coef = match head {
                "" | "+" => 1.0,
                "-" => -1.0,
                h => h.parse::<f64>().map_err(|_| anyhow::anyhow!("bad coefficient in '{s}'"))?,
            };
            let div = match tail {
                "" => 1.0,
                d => d
                    .strip_prefix('/')
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or_else(|| anyhow::anyhow!("bad divisor in '{s}'"))?,
            };
            if div == 0.0 {
                anyhow::bail!("division by zero in '{s}'");
            }
            coef * PI / div
        }
    };
    if !x.is_finite() {
        anyhow::bail!("not finite: '{s}'");
    }
    Ok(x)
}

/// Comma-separated values and inclusive ranges `a..b:n` (n evenly spaced points).
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        if item.is_empty() {
            anyhow::bail!("empty grid entry in '{s}'");
        }
        if let Some((range, n)) = item.split_once(':') {
            let (a, b) = range.split_once("..").ok_or_else(|| anyhow::anyhow!("expected a..b:n, got '{item}'"))?;
            let (a, b) = (parse_angle(a)?, parse_angle(b)?);
            let n: usize = n.trim().parse().map_err(|_| anyhow::anyhow!("bad point count in '{item}'"))?;
            out.extend(linspace(a, b, n)?);
        } else {
            out.push(parse_angle(item)?);
        }
    }
    if out.is_empty() {
        anyhow::bail!("empty grid");
    }
    Ok(out)
}

pub fn linspace(a: f64, b: f64, n: usize) -> anyhow::Result<Vec<f64>> {
    match n {
        0 => anyhow::bail!("a range needs at least one point"),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()),
    }
}
