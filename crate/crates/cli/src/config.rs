//! Run configuration: defaults, then a flat `key=value` file, then the
//! `MOCKRAD_PRECISION` environment variable, then command-line flags.

use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl Format {
    fn parse(s: &str) -> Result<Format, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(format!("format must be json, csv or text, got `{s}`")),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "txt",
        }
    }
}

/// The resolved configuration, echoed into every JSON report.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub precision_bits: u32,
    /// `None` keeps each suite's own order.
    pub trunc_order: Option<i64>,
    /// `None` uses `4..12`, extended by `ceil(log2 m)` at order `m`.
    pub grid: Option<Vec<u32>>,
    pub tolerance: f64,
    pub output_dir: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision_bits: 128,
            trunc_order: None,
            grid: None,
            tolerance: 1e-2,
            output_dir: None,
            format: Format::Json,
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Default)]
pub struct Overrides {
    pub precision: Option<u32>,
    pub trunc: Option<i64>,
    pub tol: Option<f64>,
    pub grid: Option<String>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

/// Parses `j0..j1` (inclusive) into grid exponents.
pub fn parse_grid(s: &str) -> Result<Vec<u32>, String> {
    let bad = || format!("grid must look like `4..12`, got `{s}`");
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a < 1 || b > 40 || b < a + 2 {
        return Err(format!("grid `{s}` needs 1 <= j0, j1 <= 40 and at least 3 points"));
    }
    Ok((a..=b).collect())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("{key}: bad value `{v}`"))
}

impl RunConfig {
    pub fn resolve(file: Option<&Path>, env_precision: Option<u32>, o: &Overrides) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg.apply_file(&text)?;
        }
        if let Some(p) = env_precision {
            cfg.precision_bits = p;
        }
        if let Some(p) = o.precision {
            cfg.precision_bits = p;
        }
        if let Some(t) = o.trunc {
            cfg.trunc_order = Some(t);
        }
        if let Some(t) = o.tol {
            cfg.tolerance = t;
        }
        if let Some(g) = &o.grid {
            cfg.grid = Some(parse_grid(g)?);
        }
        if let Some(f) = &o.format {
            cfg.format = Format::parse(f)?;
        }
        if let Some(d) = &o.out {
            cfg.output_dir = Some(d.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "precision-bits" => self.precision_bits = parse_num(k, v)?,
                "trunc-order" => self.trunc_order = Some(parse_num(k, v)?),
                "grid" => self.grid = Some(parse_grid(v)?),
                "tolerance" => self.tolerance = parse_num(k, v)?,
                "output-dir" => self.output_dir = Some(PathBuf::from(v)),
                "format" => self.format = Format::parse(v)?,
                other => return Err(format!("config line {}: unknown key `{other}`", i + 1)),
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        if self.precision_bits < 64 {
            return Err(format!("precision must be at least 64 bits, got {}", self.precision_bits));
        }
        if let Some(t) = self.trunc_order {
            if t < 50 {
                return Err(format!("truncation order must be at least 50, got {t}"));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut c = RunConfig::default();
        c.apply_file("# comment\nprecision-bits = 256\ngrid=5..9\nformat=csv\n").unwrap();
        assert_eq!(c.precision_bits, 256);
        assert_eq!(c.grid, Some(vec![5, 6, 7, 8, 9]));
        assert_eq!(c.format, Format::Csv);
        assert!(c.apply_file("colour=blue").unwrap_err().contains("unknown key"));
    }

    #[test]
    fn bounds() {
        let o = Overrides { precision: Some(32), ..Overrides::default() };
        assert!(RunConfig::resolve(None, None, &o).is_err());
        let o = Overrides { trunc: Some(10), ..Overrides::default() };
        assert!(RunConfig::resolve(None, None, &o).is_err());
        assert!(parse_grid("4..5").is_err());
        assert!(parse_grid("4-12").is_err());
    }

    #[test]
    fn precedence() {
        let o = Overrides { precision: Some(512), ..Overrides::default() };
        assert_eq!(RunConfig::resolve(None, Some(200), &o).unwrap().precision_bits, 512);
        assert_eq!(RunConfig::resolve(None, Some(200), &Overrides::default()).unwrap().precision_bits, 200);
    }
}
