//! CSV tables, environment matrix files and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::environment::EnvState;
use crate::linalg::{ComplexMatrix, DensityMatrix};

use super::config::RunConfig;
use super::CliError;

/// Shortest representation that round-trips the value rounded to 12
/// significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    // no negative zero in output
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_csv()).map_err(|e| CliError::Io(path.to_path_buf(), e))
    }
}

/// Reads an environment from `d=<int>` followed by `d²` rows of `d²`
/// comma-separated `re,im` pairs.
pub fn read_env_file(path: &Path) -> Result<EnvState, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    parse_env_text(&text).map_err(|e| CliError::Config(format!("env file {}: {e}", path.display())))
}

pub fn parse_env_text(text: &str) -> Result<EnvState, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let first = lines.next().ok_or("empty file")?;
    let d: usize = first
        .strip_prefix("d=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| format!("first line must be 'd=<int>', got '{first}'"))?;
    if d == 0 {
        return Err("d must be positive".into());
    }
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        let line = lines.next().ok_or_else(|| format!("expected {n} rows, found {r}"))?;
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("row {}: bad number '{}'", r + 1, t.trim()))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != 2 * n {
            return Err(format!(
                "row {}: expected {} numbers, found {}",
                r + 1,
                2 * n,
                vals.len()
            ));
        }
        for c in 0..n {
            m[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
        }
    }
    if lines.next().is_some() {
        return Err(format!("more than {n} rows"));
    }
    let rho = DensityMatrix::new(m).map_err(|e| e.to_string())?;
    EnvState::new(d, d, rho).map_err(|e| e.to_string())
}

pub fn format_env(env: &EnvState) -> String {
    let d = env.ds();
    let m = env.rho().matrix();
    let mut s = format!("d={d}\n");
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| format!("{:?},{:?}", m[(r, c)].re, m[(r, c)].im))
            .collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

#[derive(Debug, Serialize)]
pub struct Derived {
    pub v_rad_per_ps: f64,
    pub omega_c_rad_per_ps: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config: &'a BTreeMap<String, String>,
    pub derived: Derived,
    pub outputs: Vec<String>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `fig.csv` → `fig.inset.csv`
pub fn inset_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.inset.{ext}"))
}

pub fn write_manifest(cfg: &RunConfig, derived: Derived, outputs: &[PathBuf]) -> Result<PathBuf, CliError> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = RunManifest {
        command: cfg.command.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        timestamp,
        config: &cfg.echo,
        derived,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = manifest_path(&cfg.out);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(path.clone(), e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.95), "0.95");
        assert_eq!(fmt_num(1.0), "1.0");
        assert_eq!(fmt_num(-0.0), "0.0");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 1e-9), "6.66666666667e-10");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(123456789012345.0), "123456789012000.0");
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.5.into(), "mean".into()]);
        t.push(vec![Cell::Int(3), Cell::Num(-0.0)]);
        assert_eq!(t.to_csv(), "a,b\n1.5,mean\n3,0.0\n");
        assert_eq!(t.column("b"), Some(1));
    }

    #[test]
    fn env_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let env = EnvState::new(2, 2, sample::random_density(&mut rng, 4)).unwrap();
        let back = parse_env_text(&format_env(&env)).unwrap();
        assert_eq!(back.rho().matrix(), env.rho().matrix());
    }

    #[test]
    fn env_file_errors() {
        assert!(parse_env_text("").is_err());
        assert!(parse_env_text("dim=1\n1,0").is_err());
        assert!(parse_env_text("d=1\n1,0,0,0").is_err());
        assert!(parse_env_text("d=1\n2,0").is_err());
        assert!(parse_env_text("d=1\n1,0\n1,0").is_err());
        assert!(parse_env_text("d=1\n1,0").is_ok());
    }

    #[test]
    fn derived_paths() {
        assert_eq!(
            inset_path(Path::new("out/fig2.csv")),
            PathBuf::from("out/fig2.inset.csv")
        );
        assert_eq!(
            manifest_path(Path::new("a/b.csv")),
            PathBuf::from("a/b.csv.manifest.json")
        );
    }
}
