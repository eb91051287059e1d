//! Flat `key = value` configuration files.
//!
//! ```text
//! # learning curves at fixed psi_n
//! regimes = minf, m1
//! t = logspace:1e-3,10,50
//! psi_n = 20
//! psi_p = 1,2,4,8,16,32
//! lambda = 1e-3
//! ```
//!
//! Grids are comma lists, `logspace:lo,hi,n` or `linspace:lo,hi,n`; both
//! endpoints of a generated grid are exact. Keys are case-insensitive.
//! Every key must be consumed by the subcommand that reads the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {line}: expected key = value, got '{body}'")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(CliError::config(format!("line {line}: bad key '{key}'")));
            }
            if value.is_empty() {
                return Err(CliError::config(format!("line {line}: key '{key}' has no value")));
            }
            if let Some(prev) = entries.insert(key.clone(), Entry { value, line }) {
                return Err(CliError::config(format!("line {line}: key '{key}' already set on line {}", prev.line)));
            }
        }
        Ok(Config { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets or replaces a key, as a command-line override would.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_ascii_lowercase(), Entry { value: value.into(), line: 0 });
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn scalar<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::config(format!("{}: cannot parse '{}'", at(key, e.line), e.value))),
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.scalar(key)?.unwrap_or(default))
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.scalar(key)?.unwrap_or(default))
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        Ok(self.scalar(key)?.unwrap_or(default))
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(CliError::config(format!("{}: expected a boolean, got '{}'", at(key, e.line), e.value))),
            },
        }
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).map_or_else(|| default.to_string(), |e| e.value)
    }

    /// A value parsed with `FromStr`, reporting the library's message on failure.
    pub fn parsed_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|err| CliError::config(format!("{}: {err}", at(key, e.line)))),
        }
    }

    /// Comma-separated list of parsed values.
    pub fn list_or<T>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(e) => {
                let out = e
                    .value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|err| CliError::config(format!("{}: {err}", at(key, e.line)))))
                    .collect::<Result<Vec<T>>>()?;
                if out.is_empty() {
                    return Err(CliError::config(format!("{}: empty list", at(key, e.line))));
                }
                Ok(out)
            }
        }
    }

    pub fn grid(&mut self, key: &str) -> Result<Vec<f64>> {
        let e = self.take(key).ok_or_else(|| CliError::config(format!("missing required grid '{key}'")))?;
        parse_grid(&e.value).map_err(|err| CliError::config(format!("{}: {err}", at(key, e.line))))
    }

    pub fn grid_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        if self.contains(key) {
            self.grid(key)
        } else {
            Ok(default.to_vec())
        }
    }

    /// A grid of positive integers, such as `m` or `d`.
    pub fn count_grid_or(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        if !self.contains(key) {
            return Ok(default.to_vec());
        }
        let g = self.grid(key)?;
        g.iter()
            .map(|&v| {
                if v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                    Ok(v as usize)
                } else {
                    Err(CliError::config(format!("grid '{key}' needs positive integers, got {v}")))
                }
            })
            .collect()
    }

    /// Fails if any key was not consumed.
    pub fn finish(self, command: &str) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<String> = self.entries.iter().map(|(k, e)| at(k, e.line)).collect();
        Err(CliError::config(format!("unknown keys for '{command}': {}", keys.join(", "))))
    }
}

fn at(key: &str, line: usize) -> String {
    if line == 0 {
        format!("'{key}'")
    } else {
        format!("'{key}' (line {line})")
    }
}

/// Parses `a,b,c`, `logspace:lo,hi,n` or `linspace:lo,hi,n`.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    let (kind, body) = match s.split_once(':') {
        Some((k, b)) => (Some(k.trim().to_ascii_lowercase()), b),
        None => (None, s),
    };
    let nums = body
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("cannot parse '{}' as a number", v.trim())))
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    if nums.iter().any(|v| !v.is_finite()) {
        return Err("grid values must be finite".into());
    }
    let Some(kind) = kind else {
        return Ok(nums);
    };
    let [lo, hi, n] = nums[..] else {
        return Err(format!("{kind} needs exactly lo,hi,n"));
    };
    if !(n >= 1.0 && n.fract() == 0.0) {
        return Err(format!("{kind} count must be a positive integer, got {n}"));
    }
    let n = n as usize;
    let mut g = match kind.as_str() {
        "logspace" => {
            if !(lo > 0.0 && hi > 0.0) {
                return Err("logspace endpoints must be positive".into());
            }
            spaced(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect::<Vec<_>>()
        }
        "linspace" => spaced(lo, hi, n),
        other => return Err(format!("unknown grid generator '{other}'")),
    };
    g[0] = lo;
    if n > 1 {
        g[n - 1] = hi;
    }
    Ok(g)
}

fn spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1, 2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        let g = parse_grid("logspace:1e-3,10,5").unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[4], 10.0);
        assert!((g[1] - 1e-2).abs() < 1e-15);
        assert_eq!(parse_grid("linspace:0,1,3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("logspace:2,8,1").unwrap(), vec![2.0]);
        assert!(parse_grid("logspace:0,1,3").is_err());
        assert!(parse_grid("logspace:1,2").is_err());
        assert!(parse_grid("cubes:1,2,3").is_err());
        assert!(parse_grid("1,x").is_err());
        assert!(parse_grid("linspace:0,1,2.5").is_err());
    }

    #[test]
    fn keys_values_and_comments() {
        let mut c = Config::parse("# header\n psi_D = 0.2 # inline\n\nseed=7\nt = logspace:1e-2,1,3\n").unwrap();
        assert_eq!(c.f64_or("psi_d", 1.0).unwrap(), 0.2);
        assert_eq!(c.u64_or("seed", 0).unwrap(), 7);
        assert_eq!(c.grid("t").unwrap().len(), 3);
        assert_eq!(c.usize_or("d", 100).unwrap(), 100);
        c.finish("theory").unwrap();
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(Config::parse("t 1"), Err(CliError::Config(_))));
        assert!(Config::parse("t =").is_err());
        assert!(Config::parse("t = 1\nt = 2").is_err());
        let mut c = Config::parse("d = ten").unwrap();
        assert!(c.usize_or("d", 1).is_err());
        let c = Config::parse("colour = red").unwrap();
        let e = c.finish("theory").unwrap_err();
        assert!(e.to_string().contains("colour"));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn integer_grids() {
        let mut c = Config::parse("m = 1,5,100\nd = 1.5").unwrap();
        assert_eq!(c.count_grid_or("m", &[100]).unwrap(), vec![1, 5, 100]);
        assert!(c.count_grid_or("d", &[100]).is_err());
        assert_eq!(c.count_grid_or("n", &[3]).unwrap(), vec![3]);
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = Config::parse("seed = 1").unwrap();
        c.set("seed", "9");
        assert_eq!(c.u64_or("seed", 0).unwrap(), 9);
        assert!(!c.contains("seed"));
    }
}
