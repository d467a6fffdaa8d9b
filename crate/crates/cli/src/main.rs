//! `mockrad`: expand mock theta functions and their bilateral series, run the
//! identity suites, and check radial limits at roots of unity.
//!
//! Exit codes: 0 success, 1 failed check or computation error, 2 unknown name
//! or bad configuration, 3 no closed formula applies, 4 malformed root.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mockrad_core::bilateral::Registry;
use mockrad_core::radial::{check_limit, LimitPolicy, RootOfUnity, Verdict};
use mockrad_core::suites::{self, Suite, SuiteOptions};
use mockrad_core::{Error, Series};
use serde::Serialize;

use config::{Format, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "mockrad", version, about = "Mock theta functions, bilateral series and radial limits")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working precision in bits (at least 64).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Output format.
    #[arg(long, global = true, value_parser = ["json", "csv", "text"])]
    format: Option<String>,
    /// Directory for the report file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact coefficients of a catalog function or a bilateral series `B:<name>`.
    Expand {
        name: String,
        /// Coefficients below q^order.
        #[arg(long, default_value_t = 20)]
        order: i64,
    },
    /// Run an identity suite.
    Verify {
        /// order5, order3, order6, order8, watson, klein, forms or all.
        suite: String,
        /// Truncation order of exact comparisons (at least 50).
        #[arg(long)]
        trunc: Option<i64>,
        /// Perturb the first check of each suite.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Check the radial limit of a function at a root of unity.
    Radial {
        name: String,
        /// Root of unity `h/m`, meaning e^(2 pi i h/m).
        #[arg(long)]
        zeta: String,
        /// Pass tolerance for the last residual.
        #[arg(long)]
        tol: Option<f64>,
        /// Grid exponents `j0..j1` for r = 1 - 2^-j.
        #[arg(long)]
        grid: Option<String>,
        /// Shift the closed form by 1 so that the check must fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// List catalog entries and bilateral recipes.
    Catalog,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::UnknownFunction(_) => 2,
            Error::NoApplicableCase { .. } => 3,
            Error::MalformedRoot(_) => 4,
            _ => 1,
        };
        let message = match e {
            Error::UnknownFunction(ref n) => {
                format!("{e}; see `mockrad catalog` for the names in the built-in catalog (got `{n}`)")
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

fn failure(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

/// Header shared by every JSON report.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'a str,
    subject: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("mockrad: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let env_precision = match std::env::var("MOCKRAD_PRECISION") {
        Ok(v) => Some(v.trim().parse::<u32>().map_err(|_| failure(2, format!("MOCKRAD_PRECISION: bad value `{v}`")))?),
        Err(_) => None,
    };
    let (trunc, tol, grid) = match &cli.command {
        Command::Verify { trunc, .. } => (*trunc, None, None),
        Command::Radial { tol, grid, .. } => (None, *tol, grid.clone()),
        _ => (None, None, None),
    };
    let overrides = Overrides {
        precision: cli.precision,
        trunc,
        tol,
        grid,
        format: cli.format.clone(),
        out: cli.out.clone(),
    };
    let cfg = RunConfig::resolve(cli.config.as_deref(), env_precision, &overrides).map_err(|m| failure(2, m))?;
    let reg = Registry::builtin();
    match cli.command {
        Command::Expand { name, order } => expand(&reg, &cfg, &name, order),
        Command::Verify { suite, inject_fault, .. } => verify(&reg, &cfg, &suite, inject_fault),
        Command::Radial { name, zeta, inject_fault, .. } => radial(&reg, &cfg, &name, &zeta, inject_fault),
        Command::Catalog => catalog(&reg, &cfg),
    }
}

fn emit(cfg: &RunConfig, command: &str, subject: &str, body: &str) -> Result<(), Failure> {
    match &cfg.output_dir {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).map_err(|e| failure(1, e.to_string()))?;
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| failure(1, format!("{}: {e}", dir.display())))?;
            let stem: String =
                subject.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
            let path = dir.join(format!("{command}-{stem}.{}", cfg.format.extension()));
            std::fs::write(&path, body).map_err(|e| failure(1, format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn json<T: Serialize>(cfg: &RunConfig, command: &str, subject: &str, result: T) -> String {
    let env = Envelope { schema: "mockrad/1", command, subject, config: cfg, result };
    let mut s = serde_json::to_string_pretty(&env).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Coefficient {
    exponent: String,
    numerator: String,
    denominator: String,
}

fn coefficients(s: &Series, order: i64) -> Result<Vec<Coefficient>, Failure> {
    let mut out = Vec::new();
    let row = |e: String, c: &rug::Rational| Coefficient {
        exponent: e,
        numerator: c.numer().to_string(),
        denominator: c.denom().to_string(),
    };
    if s.denom() == 1 {
        let lo = s.valuation().map_or(0, |v| mockrad_core::series::floor_i64(&v).min(0));
        for e in lo..order {
            out.push(row(e.to_string(), &s.coeff_int(e)?));
        }
    } else {
        for (e, c) in s.terms() {
            out.push(row(e.to_string(), c));
        }
    }
    Ok(out)
}

fn expand(reg: &Registry, cfg: &RunConfig, name: &str, order: i64) -> Result<u8, Failure> {
    if order < 1 {
        return Err(failure(2, "--order must be positive"));
    }
    let s = reg.series(name, order)?;
    let rows = coefficients(&s, order)?;
    let body = match cfg.format {
        Format::Json => json(cfg, "expand", name, &rows),
        Format::Csv => {
            let mut b = String::from("exponent,numerator,denominator\n");
            for r in &rows {
                b.push_str(&format!("{},{},{}\n", r.exponent, r.numerator, r.denominator));
            }
            b
        }
        Format::Text => {
            let mut b = format!("{name} to q^{order}\n");
            for r in &rows {
                let c = if r.denominator == "1" { r.numerator.clone() } else { format!("{}/{}", r.numerator, r.denominator) };
                b.push_str(&format!("q^{}: {c}\n", r.exponent));
            }
            b
        }
    };
    emit(cfg, "expand", name, &body)?;
    Ok(0)
}

fn verify(reg: &Registry, cfg: &RunConfig, suite: &str, inject_fault: bool) -> Result<u8, Failure> {
    let which: Suite = suite.parse().map_err(|_| {
        failure(2, format!("unknown suite `{suite}` (order5, order3, order6, order8, watson, klein, forms, all)"))
    })?;
    let opts = SuiteOptions { trunc: cfg.trunc_order, precision: cfg.precision_bits, inject_fault };
    let checks = suites::run(which, reg, &opts)?;
    let passed = suites::all_passed(&checks);
    for c in checks.iter().filter(|c| !c.passed) {
        eprintln!("{}", c.line());
    }
    let body = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                passed: bool,
                checks: &'a [suites::Check],
            }
            json(cfg, "verify", which.as_str(), Out { passed, checks: &checks })
        }
        Format::Csv => {
            let mut b = String::from("suite,id,source,expectation,passed,status,order_or_log2_residual\n");
            for c in &checks {
                let (status, detail) = match &c.evidence {
                    suites::Evidence::Exact(r) => (format!("{:?}", r.status).to_lowercase(), r.verified_order.to_string()),
                    suites::Evidence::Numeric { log2_residual, .. } => ("numeric".to_string(), log2_residual.to_string()),
                };
                let src = serde_json::to_string(&c.source).unwrap_or_default();
                let exp = serde_json::to_string(&c.expectation).unwrap_or_default();
                b.push_str(&format!(
                    "{},{},{},{},{},{status},{detail}\n",
                    c.suite,
                    c.id,
                    src.trim_matches('"'),
                    exp.trim_matches('"'),
                    c.passed
                ));
            }
            b
        }
        Format::Text => {
            let mut b = String::new();
            for c in &checks {
                b.push_str(&c.line());
                b.push('\n');
            }
            let bad = checks.iter().filter(|c| !c.passed).count();
            b.push_str(&format!("{}: {} checks, {} failed\n", which, checks.len(), bad));
            b
        }
    };
    emit(cfg, "verify", which.as_str(), &body)?;
    Ok(if passed { 0 } else { 1 })
}

fn radial(reg: &Registry, cfg: &RunConfig, name: &str, zeta: &str, inject_fault: bool) -> Result<u8, Failure> {
    let z = RootOfUnity::parse(zeta)?;
    reg.catalog.get(name)?;
    let mut policy = match &cfg.grid {
        Some(g) => LimitPolicy { grid: g.clone(), ..LimitPolicy::default() },
        None => LimitPolicy::scaled_for(z.m),
    };
    policy.tol = cfg.tolerance;
    policy.config.precision = cfg.precision_bits;
    if inject_fault {
        policy.closed_form_offset = rug::Rational::from(1);
    }
    let (verdict, report) = check_limit(reg, name, &z, &policy)?;
    let Some(report) = report else {
        return Err(failure(3, format!("no closed formula covers `{name}` at a root of unity of order {}", z.m)));
    };
    let subject = format!("{name}@{z}");
    let body = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                verdict: Verdict,
                tolerance: f64,
                grid: &'a [u32],
                report: &'a mockrad_core::radial::RadialReport,
            }
            json(cfg, "radial", &subject, Out { verdict, tolerance: policy.tol, grid: &policy.grid, report: &report })
        }
        Format::Csv => report.csv(),
        Format::Text => {
            let mut b = format!(
                "{name} at zeta = e^(2 pi i {z}): closed form {} + {} i, c = {}, B-side {}\n",
                report.closed_form.re, report.closed_form.im, report.c, report.bside
            );
            for p in &report.points {
                b.push_str(&format!(
                    "  j={:2} diff={} + {} i  residual={:.3e}  bits={}\n",
                    p.j, p.difference.re, p.difference.im, p.residual, p.working_precision
                ));
            }
            if let Some(j) = report.truncated_at {
                b.push_str(&format!("  grid cut short at j={j}\n"));
            }
            b.push_str(&format!("verdict: {verdict:?}\n"));
            b
        }
    };
    emit(cfg, "radial", &subject, &body)?;
    Ok(if verdict == Verdict::Pass { 0 } else { 1 })
}

fn catalog(reg: &Registry, cfg: &RunConfig) -> Result<u8, Failure> {
    #[derive(Serialize)]
    struct Recipe<'a> {
        name: &'a str,
        combination_source: mockrad_core::catalog::Source,
        product_source: Option<mockrad_core::catalog::Source>,
    }
    let entries = reg.catalog.list();
    let recipes: Vec<Recipe> = reg
        .recipes()
        .iter()
        .map(|r| Recipe { name: &r.name, combination_source: r.combination_source, product_source: r.product_source })
        .collect();
    let label = |s: &mockrad_core::catalog::Source| serde_json::to_string(s).unwrap_or_default().trim_matches('"').to_string();
    let body = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                functions: &'a [mockrad_core::catalog::CatalogSummary],
                bilateral: &'a [Recipe<'a>],
            }
            json(cfg, "catalog", "builtin", Out { functions: &entries, bilateral: &recipes })
        }
        Format::Csv => {
            let mut b = String::from("name,order,start,source\n");
            for e in &entries {
                b.push_str(&format!("{},{},{},{}\n", e.name, e.order, e.start, label(&e.source)));
            }
            b
        }
        Format::Text => {
            let mut b = String::new();
            for e in &entries {
                b.push_str(&format!("{:10} order {} from n={} [{}]\n", e.name, e.order, e.start, label(&e.source)));
            }
            for r in &recipes {
                let p = r.product_source.as_ref().map_or("none".to_string(), label);
                b.push_str(&format!("{:12} combination [{}], product [{p}]\n", r.name, label(&r.combination_source)));
            }
            b
        }
    };
    emit(cfg, "catalog", "builtin", &body)?;
    Ok(0)
}
