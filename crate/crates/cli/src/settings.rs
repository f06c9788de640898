//! Flat `key=value` settings shared by flags and config files.
//!
//! Values are type-checked when they are set and kept as text, so merging
//! two layers is a map union and the raw input can be echoed back verbatim.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mshom_core::{Algorithm, DiffScheme, InitialGuess, SolverKind};

use crate::grid::{parse_grid, parse_kinds};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Text,
    Float,
    Grid,
    Count,
    Seed,
    Flag,
    Kinds,
    Alg,
    Diff,
    Guess,
}

const KEYS: &[(&str, Kind)] = &[
    ("problem", Kind::Text),
    ("k", Kind::Kinds),
    ("eps", Kind::Grid),
    ("t_end", Kind::Float),
    ("dt_c", Kind::Float),
    ("dt", Kind::Grid),
    ("n_p", Kind::Count),
    ("criterion_order", Kind::Count),
    ("alg", Kind::Alg),
    ("diff", Kind::Diff),
    ("tau", Kind::Grid),
    ("M", Kind::Count),
    ("alpha", Kind::Float),
    ("initial_guess", Kind::Guess),
    ("warm_start", Kind::Flag),
    ("reference_dt", Kind::Float),
    ("jobs", Kind::Count),
    ("output", Kind::Text),
    ("seed", Kind::Seed),
    ("nx", Kind::Count),
    ("ny", Kind::Count),
    ("tol", Kind::Float),
    ("f", Kind::Text),
    ("g", Kind::Text),
    ("x0", Kind::Float),
    ("y0", Kind::Float),
    ("beta_hat", Kind::Float),
];

/// Maps spellings such as `t-end` or `micro_steps` to the canonical key.
pub fn canonical_key(key: &str) -> Result<&'static str, CliError> {
    let norm = key.trim().replace('-', "_");
    let norm = match norm.as_str() {
        "micro_steps" | "m" => "M",
        "epsilon" => "eps",
        "dt_macro" => "dt",
        "dt_coupled" => "dt_c",
        "algorithm" => "alg",
        "diff_scheme" => "diff",
        other => other,
    };
    KEYS.iter()
        .find(|(k, _)| *k == norm)
        .map(|(k, _)| *k)
        .ok_or_else(|| CliError::Usage(format!("unknown key '{}'", key.trim())))
}

fn kind_of(key: &str) -> Kind {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, t)| *t).unwrap_or(Kind::Text)
}

fn bad(key: &str, raw: &str, what: &str) -> CliError {
    CliError::Usage(format!("{key}: expected {what}, got '{raw}'"))
}

pub fn parse_float(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.trim().parse::<f64>().map_err(|_| bad(key, raw, "a number"))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, raw, "true or false")),
    }
}

fn parse_alg(key: &str, raw: &str) -> Result<Algorithm, CliError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "type1" | "1" => Ok(Algorithm::Type1),
        "type2" | "2" => Ok(Algorithm::Type2),
        _ => Err(bad(key, raw, "type1 or type2")),
    }
}

fn parse_diff(key: &str, raw: &str) -> Result<DiffScheme, CliError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "forward" => Ok(DiffScheme::Forward),
        "central" => Ok(DiffScheme::Central),
        _ => Err(bad(key, raw, "forward or central")),
    }
}

pub fn guess_name(g: InitialGuess) -> &'static str {
    match g {
        InitialGuess::PreviousValue => "previous",
        InitialGuess::Supplied => "supplied",
        InitialGuess::Zero => "zero",
    }
}

fn parse_guess(key: &str, raw: &str) -> Result<InitialGuess, CliError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "previous" => Ok(InitialGuess::PreviousValue),
        "supplied" => Ok(InitialGuess::Supplied),
        "zero" => Ok(InitialGuess::Zero),
        _ => Err(bad(key, raw, "previous, supplied or zero")),
    }
}

fn check(key: &'static str, raw: &str) -> Result<(), CliError> {
    match kind_of(key) {
        Kind::Text => {
            if raw.trim().is_empty() {
                return Err(bad(key, raw, "a non-empty value"));
            }
        }
        Kind::Float => {
            parse_float(key, raw)?;
        }
        Kind::Grid => {
            parse_grid(key, raw)?;
        }
        Kind::Count => {
            raw.trim().parse::<usize>().map_err(|_| bad(key, raw, "a non-negative integer"))?;
        }
        Kind::Seed => {
            raw.trim().parse::<u64>().map_err(|_| bad(key, raw, "an unsigned integer"))?;
        }
        Kind::Flag => {
            parse_bool(key, raw)?;
        }
        Kind::Kinds => {
            parse_kinds(key, raw)?;
        }
        Kind::Alg => {
            parse_alg(key, raw)?;
        }
        Kind::Diff => {
            parse_diff(key, raw)?;
        }
        Kind::Guess => {
            parse_guess(key, raw)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let key = canonical_key(key)?;
        check(key, raw)?;
        self.values.insert(key, raw.trim().to_string());
        Ok(())
    }

    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// skipped; a later line overrides an earlier one.
    pub fn parse_config(text: &str) -> Result<Self, CliError> {
        let mut s = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got '{line}'", i + 1)))?;
            s.set(key, value)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
        Self::parse_config(&text)
    }

    /// Keys set in `self` win over those in `lower`.
    pub fn or(mut self, lower: Settings) -> Settings {
        for (k, v) in lower.values {
            self.values.entry(k).or_insert(v);
        }
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.values.keys().copied()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Rejects any key outside `allowed`, naming the first offender.
    pub fn restrict(&self, allowed: &[&str], context: &str) -> Result<(), CliError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(CliError::Usage(format!("key '{k}' does not apply to {context}"))),
            None => Ok(()),
        }
    }

    // Getters re-parse text that `set` already checked, so they cannot fail.

    pub fn text(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        self.raw(key).and_then(|r| r.parse().ok())
    }

    pub fn count(&self, key: &str) -> Option<usize> {
        self.raw(key).and_then(|r| r.parse().ok())
    }

    pub fn seed(&self) -> Option<u64> {
        self.raw("seed").and_then(|r| r.parse().ok())
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.raw(key).and_then(|r| parse_bool(key, r).ok())
    }

    pub fn grid(&self, key: &str) -> Option<Vec<f64>> {
        self.raw(key).and_then(|r| parse_grid(key, r).ok())
    }

    pub fn kinds(&self) -> Option<Vec<SolverKind>> {
        self.raw("k").and_then(|r| parse_kinds("k", r).ok())
    }

    pub fn algorithm(&self) -> Option<Algorithm> {
        self.raw("alg").and_then(|r| parse_alg("alg", r).ok())
    }

    pub fn diff(&self) -> Option<DiffScheme> {
        self.raw("diff").and_then(|r| parse_diff("diff", r).ok())
    }

    pub fn initial_guess(&self) -> Option<InitialGuess> {
        self.raw("initial_guess").and_then(|r| parse_guess("initial_guess", r).ok())
    }

    pub fn output(&self) -> Option<PathBuf> {
        self.raw("output").map(PathBuf::from)
    }
}
