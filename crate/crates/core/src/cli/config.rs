//! Run configuration: `key=value` sources merged and validated into a
//! [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::spectral::FilterKind;
use crate::tomography::{DEFAULT_MAX_ITERS, DEFAULT_TOL};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Hom,
    Transfer,
    Erase,
    Tomo,
    Fig2,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Hom => "hom",
            Command::Transfer => "transfer",
            Command::Erase => "erase",
            Command::Tomo => "tomo",
            Command::Fig2 => "fig2",
        })
    }
}

/// Where the two-photon environment comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    /// SPDC pair, `D` by quadrature.
    Spdc,
    /// SPDC pair truncated to `d` modes per photon, simulated explicitly.
    SpdcTruncated(usize),
    Singlet,
    SymmetricBell,
    /// Product of qubit environments with overlap `c`.
    Product(f64),
    File(PathBuf),
}

impl EnvSpec {
    pub fn is_spectral(&self) -> bool {
        matches!(self, EnvSpec::Spdc | EnvSpec::SpdcTruncated(_))
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Spdc => write!(f, "spdc"),
            EnvSpec::SpdcTruncated(d) => write!(f, "spdc:{d}"),
            EnvSpec::Singlet => write!(f, "singlet"),
            EnvSpec::SymmetricBell => write!(f, "symmetric-bell"),
            EnvSpec::Product(c) => write!(f, "product:{c}"),
            EnvSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

pub const MAX_TRUNCATION: usize = 16;

impl FromStr for EnvSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("spdc", None) => Ok(EnvSpec::Spdc),
            ("spdc", Some(d)) => {
                let d: usize = d.parse().map_err(|_| format!("bad mode count '{d}'"))?;
                if !(2..=MAX_TRUNCATION).contains(&d) {
                    return Err(format!("mode count must lie in 2..={MAX_TRUNCATION}, got {d}"));
                }
                Ok(EnvSpec::SpdcTruncated(d))
            }
            ("singlet", None) => Ok(EnvSpec::Singlet),
            ("symmetric-bell", None) => Ok(EnvSpec::SymmetricBell),
            ("product", Some(c)) => {
                let c: f64 = c.parse().map_err(|_| format!("bad overlap '{c}'"))?;
                if !(-1.0..=1.0).contains(&c) {
                    return Err(format!("overlap must lie in [-1, 1], got {c}"));
                }
                Ok(EnvSpec::Product(c))
            }
            ("file", Some(p)) if !p.is_empty() => Ok(EnvSpec::File(PathBuf::from(p))),
            _ => Err(format!(
                "unknown environment '{s}' (expected spdc, spdc:<d>, singlet, symmetric-bell, product:<c> or file:<path>)"
            )),
        }
    }
}

/// Every key accepted in a config file, with its default where one exists.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("center_nm", Some("810")),
    ("fwhm_nm", Some("2.7")),
    ("shape", Some("rect")),
    ("bins", Some("4096")),
    ("delays", Some("0:0.6:16")),
    ("reference_delay", Some("2")),
    ("inset_delays", Some("-1.5:1.5:121")),
    ("thetas", Some("0,30,60,90,120,150,180")),
    ("env", Some("spdc")),
    ("mode_overlap", Some("1")),
    ("compensate_sign", Some("false")),
    ("counts", None),
    ("repeats", None),
    ("efficiencies", Some("1,1")),
    ("max_iters", None),
    ("tol", None),
    ("seed", Some("0")),
    ("out", None),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub shape: FilterKind,
    pub bins: usize,
    pub delays: Vec<f64>,
    pub reference_delay: f64,
    pub inset_delays: Vec<f64>,
    pub thetas: Vec<f64>,
    pub env: EnvSpec,
    pub mode_overlap: f64,
    pub compensate_sign: bool,
    /// Mean counts per basis; 0 selects ideal statistics.
    pub counts: f64,
    pub repeats: usize,
    pub efficiencies: [f64; 2],
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Resolved `key=value` settings, echoed into the manifest.
    pub echo: BTreeMap<String, String>,
}

fn bad(key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("invalid value for '{key}': {msg}"))
}

fn num(key: &str, s: &str) -> Result<f64, CliError> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| bad(key, format!("'{s}' is not a number")))?;
    if !x.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(x)
}

fn positive(key: &str, s: &str) -> Result<f64, CliError> {
    let x = num(key, s)?;
    if x <= 0.0 {
        return Err(bad(key, format!("must be positive, got {x}")));
    }
    Ok(x)
}

fn count(key: &str, s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| bad(key, format!("'{s}' is not a non-negative integer")))
}

fn list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let out: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| num(key, t))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(bad(key, "list is empty"));
    }
    Ok(out)
}

/// Comma list whose items are numbers or `start:stop:count` ranges with both
/// ends included.
fn delay_spec(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(num(key, x)?),
            [a, b, n] => {
                let (a, b) = (num(key, a)?, num(key, b)?);
                match count(key, n)? {
                    0 => return Err(bad(key, "range needs at least one point")),
                    1 => out.push(a),
                    n => out.extend((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64)),
                }
            }
            _ => return Err(bad(key, format!("'{item}' is neither a number nor start:stop:count"))),
        }
    }
    if out.is_empty() {
        return Err(bad(key, "list is empty"));
    }
    Ok(out)
}

fn flag(key: &str, s: &str) -> Result<bool, CliError> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(bad(key, format!("'{other}' is not a boolean"))),
    }
}

/// Parses `key=value` lines; `#` starts a comment. A JSON run manifest is
/// also accepted, in which case its `config` object is used.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        let obj = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| CliError::Config("manifest has no 'config' object".into()))?;
        let mut map = BTreeMap::new();
        for (k, val) in obj {
            let s = val
                .as_str()
                .ok_or_else(|| CliError::Config(format!("manifest value for '{k}' is not a string")))?;
            map.insert(k.clone(), s.to_string());
        }
        check_keys(&map)?;
        return Ok(map);
    }
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    check_keys(&map)?;
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn check_keys(map: &BTreeMap<String, String>) -> Result<(), CliError> {
    for k in map.keys() {
        if !KEYS.iter().any(|(name, _)| name == k) {
            return Err(CliError::Config(format!("unknown key '{k}'")));
        }
    }
    Ok(())
}

fn command_default(command: Command, key: &str) -> Option<String> {
    let v = match (key, command) {
        ("counts", Command::Tomo) => "1000000",
        ("counts", _) => "0",
        ("repeats", Command::Fig2) => "100",
        ("repeats", _) => "1",
        ("max_iters", _) => return Some(DEFAULT_MAX_ITERS.to_string()),
        ("tol", _) => return Some(format!("{DEFAULT_TOL:e}")),
        ("out", c) => return Some(format!("{c}.csv")),
        _ => return None,
    };
    Some(v.to_string())
}

impl RunConfig {
    /// Merges defaults, the file settings and the flag overrides (in rising
    /// priority) and validates every field.
    pub fn resolve(
        command: Command,
        file: &BTreeMap<String, String>,
        overrides: &BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        check_keys(file)?;
        check_keys(overrides)?;
        let mut echo = BTreeMap::new();
        for (k, default) in KEYS {
            let v = overrides
                .get(*k)
                .or_else(|| file.get(*k))
                .cloned()
                .or_else(|| default.map(str::to_string))
                .or_else(|| command_default(command, k));
            if let Some(v) = v {
                echo.insert(k.to_string(), v);
            }
        }
        let get = |k: &str| echo.get(k).map(String::as_str).unwrap_or("");

        let env: EnvSpec = get("env").parse().map_err(|e| bad("env", e))?;
        let mode_overlap = num("mode_overlap", get("mode_overlap"))?;
        if !(0.0..=1.0).contains(&mode_overlap) {
            return Err(bad("mode_overlap", format!("must lie in [0, 1], got {mode_overlap}")));
        }
        if matches!(env, EnvSpec::SpdcTruncated(_)) && mode_overlap != 1.0 {
            return Err(bad(
                "mode_overlap",
                "only the quadrature environment 'spdc' supports m < 1",
            ));
        }
        let counts = num("counts", get("counts"))?;
        if counts < 0.0 {
            return Err(bad("counts", format!("must be non-negative, got {counts}")));
        }
        let repeats = count("repeats", get("repeats"))?;
        if repeats == 0 {
            return Err(bad("repeats", "must be at least 1"));
        }
        let eff = list("efficiencies", get("efficiencies"))?;
        let efficiencies: [f64; 2] = eff
            .as_slice()
            .try_into()
            .map_err(|_| bad("efficiencies", "expected two values"))?;
        if efficiencies.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(bad("efficiencies", "each must lie in (0, 1]"));
        }
        let bins = count("bins", get("bins"))?;
        if bins < 16 {
            return Err(bad("bins", format!("need at least 16 bins, got {bins}")));
        }
        let max_iters = count("max_iters", get("max_iters"))?;
        if max_iters == 0 {
            return Err(bad("max_iters", "must be at least 1"));
        }
        let shape = get("shape").parse().map_err(|e: crate::Error| bad("shape", e))?;
        let seed = get("seed")
            .trim()
            .parse()
            .map_err(|_| bad("seed", "expected an unsigned integer"))?;
        let out = get("out").trim();
        if out.is_empty() {
            return Err(bad("out", "empty path"));
        }

        Ok(RunConfig {
            command,
            center_nm: positive("center_nm", get("center_nm"))?,
            fwhm_nm: positive("fwhm_nm", get("fwhm_nm"))?,
            shape,
            bins,
            delays: delay_spec("delays", get("delays"))?,
            reference_delay: num("reference_delay", get("reference_delay"))?,
            inset_delays: delay_spec("inset_delays", get("inset_delays"))?,
            thetas: list("thetas", get("thetas"))?,
            env,
            mode_overlap,
            compensate_sign: flag("compensate_sign", get("compensate_sign"))?,
            counts,
            repeats,
            efficiencies,
            max_iters,
            tol: positive("tol", get("tol"))?,
            seed,
            out: PathBuf::from(out),
            echo,
        })
    }

    pub fn ideal_statistics(&self) -> bool {
        self.counts == 0.0
    }
}
