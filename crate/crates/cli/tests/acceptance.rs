//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use mockrad_core::bilateral::Registry;
use mockrad_core::radial::{
    case_rules, check_limit, classify, regrouping_pair, smallest_orders, LimitPolicy, RadialReport, RootOfUnity,
    Verdict,
};
use mockrad_core::series::{pochhammer, Monomial, PochLength, Series};
use mockrad_core::suites::{run, Check, Evidence, Expectation, Suite, SuiteOptions};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rug::Rational;

type Outcome = Result<String, String>;

fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<Check>, String> {
    run(suite, &Registry::builtin(), opts).map_err(|e| format!("{suite}: {e}"))
}

/// Every check passes, every exact identity that should hold reaches
/// `order` (`direct` for the two-sided sums), and each of `ids` is present.
fn exact_suite(suite: Suite, order: i64, direct: i64, ids: &[&str]) -> Outcome {
    let checks = run_suite(suite, &SuiteOptions::default())?;
    if let Some(c) = checks.iter().find(|c| !c.passed) {
        return Err(c.line());
    }
    for c in &checks {
        if let (Expectation::Holds, Evidence::Exact(r)) = (c.expectation, &c.evidence) {
            let need = if c.id.ends_with(":direct") { direct } else { order };
            if r.verified_order < need {
                return Err(format!("{} verified only to q^{}", c.id, r.verified_order));
            }
        }
    }
    for id in ids {
        if !checks.iter().any(|c| c.id == *id) {
            return Err(format!("missing check {id}"));
        }
    }
    Ok(format!("{} checks to q^{order}", checks.len()))
}

fn watson() -> Outcome {
    exact_suite(Suite::Watson, 200, 200, &["C1", "C2", "C3", "C4"])
}

fn order5() -> Outcome {
    let mut ids = Vec::new();
    for f in ["f0", "f1", "F0", "F1"] {
        ids.push(format!("B:5:{f}:product"));
        ids.push(format!("B:5:{f}:direct"));
    }
    ids.push("B:5:f1:twice-B:5:psi1".into());
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    exact_suite(Suite::Order5, 200, 100, &ids)
}

fn forms() -> Outcome {
    exact_suite(Suite::Forms, 500, 500, &["rogers-ramanujan:G", "rogers-ramanujan:H", "theta4:eta", "K:eta"])
}

fn klein() -> Outcome {
    let checks = run_suite(Suite::Klein, &SuiteOptions::default())?;
    let mut worst = f64::NEG_INFINITY;
    for tau in ["2i", "1/3+2i", "-1/4+i", "1/7+3i/2", "i"] {
        for f in ["G", "H"] {
            let id = format!("{f}@{tau}");
            let c = checks.iter().find(|c| c.id == id).ok_or(format!("missing {id}"))?;
            match &c.evidence {
                Evidence::Numeric { log2_residual, precision: 128, .. } if *log2_residual < -32.0 && c.passed => {
                    worst = worst.max(*log2_residual);
                }
                _ => return Err(c.line()),
            }
        }
    }
    Ok(format!("worst residual 2^{worst:.1}"))
}

fn order3() -> Outcome {
    exact_suite(
        Suite::Order3,
        300,
        300,
        &["B:3:phi:product", "B:3:phi:psi11", "B:3:nu:product", "B:3:nu:psi11", "fine:2psi", "fine:phi/2", "fine:nu(-q)"],
    )
}

fn limit(name: &str, zeta: &RootOfUnity, policy: &LimitPolicy) -> Result<(Verdict, Option<RadialReport>), String> {
    check_limit(&Registry::builtin(), name, zeta, policy).map_err(|e| format!("{name}@{zeta}: {e}"))
}

fn spot_values() -> Outcome {
    let policy = LimitPolicy::default();
    let sqrt3 = 3f64.sqrt();
    // Hand-evaluated limits; the cube-root value is z - z^2 = i sqrt(3).
    let cases = [
        ("5:f0", (1, 2), (2.0, 0.0)),
        ("5:psi0", (0, 1), (-1.0, 0.0)),
        ("5:chi0", (1, 2), (5.0, 0.0)),
        ("3:f", (1, 2), (4.0, 0.0)),
        ("5:F0", (1, 3), (0.0, sqrt3)),
    ];
    let mut finals = Vec::new();
    for (name, (h, m), (re, im)) in cases {
        let zeta = RootOfUnity::new(h, m).map_err(|e| e.to_string())?;
        let (v, report) = limit(name, &zeta, &policy)?;
        let report = report.ok_or(format!("{name}: no report"))?;
        let js: Vec<u32> = report.points.iter().map(|p| p.j).collect();
        if js != (4..=12).collect::<Vec<_>>() {
            return Err(format!("{name}@{zeta}: grid {js:?}"));
        }
        let cre: f64 = report.closed_form.re.parse().map_err(|_| "bad closed form")?;
        let cim: f64 = report.closed_form.im.parse().map_err(|_| "bad closed form")?;
        if (cre - re).abs() > 1e-15 || (cim - im).abs() > 1e-15 {
            return Err(format!("{name}@{zeta}: closed form {cre}+{cim}i, expected {re}+{im}i"));
        }
        let last = report.points.last().unwrap().residual;
        if v != Verdict::Pass || !(last < 1e-2) {
            return Err(format!("{name}@{zeta}: {v:?}, final residual {last:e}"));
        }
        finals.push(format!("{name}@{zeta} {last:.1e}"));
    }
    Ok(finals.join(", "))
}

fn rule_names(table: bool) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in case_rules() {
        let in_table = r.function.starts_with("6:") || r.function.starts_with("8:");
        if in_table == table && !names.contains(&r.function) {
            names.push(r.function);
        }
    }
    names
}

fn limits_at_smallest_orders(names: &[String]) -> Outcome {
    let mut count = 0;
    for name in names {
        let orders = smallest_orders(name, 2);
        if orders.len() != 2 {
            return Err(format!("{name}: admissible orders {orders:?}"));
        }
        for m in orders {
            let zeta = RootOfUnity::new(1, m).map_err(|e| e.to_string())?;
            let (v, report) = limit(name, &zeta, &LimitPolicy::scaled_for(m))?;
            if v != Verdict::Pass {
                let last = report.and_then(|r| r.points.last().map(|p| p.residual));
                return Err(format!("{name}@{zeta}: {v:?}, final residual {last:?}"));
            }
            count += 1;
        }
    }
    Ok(format!("{count} limits over {} functions", names.len()))
}

fn breadth() -> Outcome {
    let summary = limits_at_smallest_orders(&rule_names(false))?;
    let mut skipped = 0;
    for name in ["5:phi0", "5:phi1"] {
        for m in [2, 6, 10, 14] {
            let zeta = RootOfUnity::new(1, m).map_err(|e| e.to_string())?;
            if classify(name, &zeta).is_ok() {
                return Err(format!("{name}@{zeta} has a closed formula"));
            }
            match limit(name, &zeta, &LimitPolicy::default())? {
                (Verdict::Skipped, None) => skipped += 1,
                (v, _) => return Err(format!("{name}@{zeta} gave {v:?}")),
            }
        }
    }
    Ok(format!("{summary}; {skipped} uncovered roots skipped"))
}

fn tables() -> Outcome {
    let mut checks = 0;
    for suite in [Suite::Order6, Suite::Order8] {
        let summary = exact_suite(suite, 200, 200, &[])?;
        checks += summary.split(' ').next().unwrap().parse::<usize>().unwrap();
        // A broken transcription must fail and say where it came from.
        let faulty = run_suite(suite, &SuiteOptions { inject_fault: true, ..SuiteOptions::default() })?;
        let first = faulty.first().ok_or(format!("{suite}: empty"))?;
        if first.passed || !first.line().starts_with("FAIL") || !first.line().contains("cited-reference") {
            return Err(format!("{suite}: injected fault reported as {}", first.line()));
        }
    }
    let limits = limits_at_smallest_orders(&rule_names(true))?;
    Ok(format!("{checks} identities; {limits}"))
}

const DENOMS: [i64; 7] = [1, 2, 3, 8, 24, 60, 120];

fn series() -> impl Strategy<Value = Series> {
    (0..DENOMS.len(), -6i64..6, 4i64..9, prop::collection::vec((-9i64..10, 1i64..4), 0..24)).prop_map(
        |(d, lo, order, cs)| {
            let den = DENOMS[d];
            let terms = cs.into_iter().enumerate().map(|(i, (n, k))| (lo + 5 * i as i64, Rational::from((n, k))));
            Series::from_terms(den, terms, order * den)
        },
    )
}

fn agree(a: &Series, b: &Series) -> bool {
    let t = a.trunc().min(b.trunc());
    a.truncate(&t) == b.truncate(&t)
}

fn fail<T: std::fmt::Debug>(what: &str, e: proptest::test_runner::TestError<T>) -> String {
    format!("{what}: {e}")
}

fn properties() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });

    runner
        .run(&(series(), series(), series()), |(a, b, c)| {
            prop_assert!(agree(&a.add(&b), &b.add(&a)));
            prop_assert!(agree(&a.add(&b).add(&c), &a.add(&b.add(&c))));
            prop_assert!(a.sub(&a).is_zero());
            prop_assert!(agree(&a.mul(&b), &b.mul(&a)));
            prop_assert!(agree(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c))));
            prop_assert!(agree(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c))));
            prop_assert!(agree(&a.mul(&Series::one(16)), &a));
            if !a.is_zero() {
                prop_assert!(agree(&a.mul(&a.invert().unwrap()), &Series::one(1000)));
            }
            Ok(())
        })
        .map_err(|e| fail("ring axioms", e))?;

    runner
        .run(&(-2i64..3, 0i64..4, 1i64..4, -4i64..6, -4i64..6), |(c, e, step, m, n)| {
            prop_assume!(c != 0);
            let a = Monomial::new(c, e);
            let s = Monomial::q_pow(step, 1);
            let trunc = Rational::from(30);
            let whole = pochhammer(&a, &s, PochLength::Finite(m + n), &trunc);
            let head = pochhammer(&a, &s, PochLength::Finite(m), &trunc);
            let tail = pochhammer(&a.mul(&s.pow(m).unwrap()), &s, PochLength::Finite(n), &trunc);
            if let (Ok(w), Ok(h), Ok(t)) = (whole, head, tail) {
                prop_assert!(agree(&w, &h.mul(&t)));
            }
            Ok(())
        })
        .map_err(|e| fail("Pochhammer splitting", e))?;

    runner
        .run(&(-3i64..4, 1i64..5, 1i64..4, 0i64..7), |(c, e, den, n)| {
            prop_assume!(c != 0);
            let a = Monomial::new(c, Rational::from((e, den)));
            let q = Monomial::q_pow(1, 1);
            let trunc = Rational::from(25);
            let neg = pochhammer(&a, &q, PochLength::Finite(-n), &trunc);
            let pos = pochhammer(&a.mul(&q.pow(-n).unwrap()), &q, PochLength::Finite(n), &trunc);
            if let (Ok(x), Ok(y)) = (neg, pos) {
                prop_assert!(agree(&x.mul(&y), &Series::one(1000)));
            }
            Ok(())
        })
        .map_err(|e| fail("negative index", e))?;

    let mut roots = 0;
    for m in [3i64, 5, 7] {
        for h in 1..m {
            let z = RootOfUnity::new(h, m).map_err(|e| e.to_string())?;
            let (full, regrouped) = regrouping_pair(&z, 192).map_err(|e| e.to_string())?;
            let err = full.sub(&regrouped).log2_abs() - regrouped.log2_abs().max(0.0);
            if !(err < -150.0) {
                return Err(format!("regrouping at {z}: 2^{err:.1}"));
            }
            roots += 1;
        }
    }
    Ok(format!("3 x 256 random cases, regrouping at {roots} roots"))
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("mockrad-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let config = dir.join("run.conf");
    std::fs::write(&config, "precision-bits = 128\nformat = json\n").map_err(|e| e.to_string())?;
    let once = || -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_mockrad"))
            .args(["--config", config.to_str().unwrap(), "verify", "all"])
            .env_remove("MOCKRAD_PRECISION")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("verify all exited with {:?}", out.status.code()));
        }
        Ok(out.stdout)
    };
    let (a, b) = (once()?, once()?);
    let _ = std::fs::remove_dir_all(&dir);
    if a.is_empty() || a != b {
        return Err("reports differ".into());
    }
    Ok(format!("{} identical bytes", a.len()))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("Watson relations vanish to q^200", 60, watson),
        ("5th-order bilateral series are modular", 120, order5),
        ("Rogers-Ramanujan, theta4 and K to q^500", 60, forms),
        ("Klein-form quotients at five points", 30, klein),
        ("3rd-order bilateral and Fine relations to q^300", 60, order3),
        ("radial limits, spot values", 300, spot_values),
        ("radial limits, breadth", 900, breadth),
        ("order 6 and 8 tables", 900, tables),
        ("property suites", 120, properties),
        ("verify all is deterministic", 600, determinism),
    ];
    let mut failed = 0;
    for (i, (title, budget, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(s) if took > Duration::from_secs(budget) => Err(format!("{s}; over the {budget} s budget")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(s) => ("PASS", s),
            Err(s) => ("FAIL", s),
        };
        failed += outcome.is_err() as usize;
        println!("criterion {:2} {tag} {title} ({:.1} s): {detail}", i + 1, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
