//! Radial limits `lim_{q -> ζ} (M(q) - c B(M; q))` at roots of unity and the
//! finite closed formulas they are compared against.

use rayon::prelude::*;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::bilateral::Registry;
use crate::catalog::{merge_loss, Accuracy, CombTerm, Combination, PochAtom, QuadExp, Source, TermRule};
use crate::error::{Error, Result};
use crate::expr::ProductExpr;
use crate::forms;
use crate::numeric::{fmt_float, note_loss, refine_from, take_loss, Cx, QPoint, TailPolicy};
use crate::rat;
use crate::series::gcd;

/// `ζ = e^(2πi h/m)` with `gcd(h, m) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootOfUnity {
    pub h: i64,
    pub m: i64,
}

/// Congruence family of the order `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `m = 2k`.
    Even,
    /// `m = 2k - 1`.
    Odd,
    /// `m = 4k`.
    Mult4,
    /// `m = 4k - 2`.
    Mult4Minus2,
}

impl Family {
    /// `k` for order `m`, when `m` belongs to the family.
    pub fn k(&self, m: i64) -> Option<i64> {
        match self {
            Family::Even if m % 2 == 0 => Some(m / 2),
            Family::Odd if m % 2 == 1 => Some((m + 1) / 2),
            Family::Mult4 if m % 4 == 0 => Some(m / 4),
            Family::Mult4Minus2 if m % 4 == 2 => Some((m + 2) / 4),
            _ => None,
        }
    }

    pub fn admits(&self, m: i64) -> bool {
        self.k(m).is_some()
    }
}

/// Finest class of an order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootClass {
    Even2k(i64),
    Odd2kMinus1(i64),
    Mult4k(i64),
    Mult4kMinus2(i64),
    Unclassified,
}

impl RootOfUnity {
    pub fn new(h: i64, m: i64) -> Result<RootOfUnity> {
        if m < 1 {
            return Err(Error::MalformedRoot(format!("{h}/{m}: order must be positive")));
        }
        if gcd(h.rem_euclid(m), m) != 1 && m != 1 {
            return Err(Error::MalformedRoot(format!("{h}/{m}: gcd(h, m) must be 1")));
        }
        Ok(RootOfUnity { h: h.rem_euclid(m), m })
    }

    /// Parses `h/m`.
    pub fn parse(s: &str) -> Result<RootOfUnity> {
        let bad = || Error::MalformedRoot(s.to_string());
        let (a, b) = s.trim().split_once('/').ok_or_else(bad)?;
        let h: i64 = a.trim().parse().map_err(|_| bad())?;
        let m: i64 = b.trim().parse().map_err(|_| bad())?;
        RootOfUnity::new(h, m)
    }

    /// All families containing the order, as classes.
    pub fn classes(&self) -> Vec<RootClass> {
        let m = self.m;
        let mut v = Vec::new();
        if let Some(k) = Family::Even.k(m) {
            v.push(RootClass::Even2k(k));
        }
        if let Some(k) = Family::Odd.k(m) {
            v.push(RootClass::Odd2kMinus1(k));
        }
        if let Some(k) = Family::Mult4.k(m) {
            v.push(RootClass::Mult4k(k));
        }
        if let Some(k) = Family::Mult4Minus2.k(m) {
            v.push(RootClass::Mult4kMinus2(k));
        }
        v
    }

    /// The finest class.
    pub fn class(&self) -> RootClass {
        let m = self.m;
        if let Some(k) = Family::Mult4.k(m) {
            RootClass::Mult4k(k)
        } else if let Some(k) = Family::Mult4Minus2.k(m) {
            RootClass::Mult4kMinus2(k)
        } else if let Some(k) = Family::Odd.k(m) {
            RootClass::Odd2kMinus1(k)
        } else {
            RootClass::Unclassified
        }
    }

    pub fn value(&self, prec: u32) -> Cx {
        Cx::root_of_unity(self.h, self.m, prec)
    }
}

impl std::fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.h, self.m)
    }
}

/// What `c` multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BSide {
    /// The bilateral series (or modified bilateral series) of the function.
    Bilateral,
    /// `b(q) = (q;q)_inf / (q^2;q^2)_inf ϑ4(q)`.
    ThetaB,
}

/// Summand of a closed formula.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summand {
    /// The term rule of a catalog function.
    Catalog { name: String },
    /// An explicit term rule.
    Rule { rule: TermRule },
}

/// `constant + scale * ζ^prefactor * sum_{n=lo}^{hi} s(n; w)` with
/// `w = ζ` or `w = -ζ` and `hi = hi_k * k + hi_c`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumFormula {
    #[serde(with = "rat")]
    pub scale: Rational,
    pub prefactor: i64,
    pub summand: Summand,
    pub negate_zeta: bool,
    pub lo: i64,
    pub hi_k: i64,
    pub hi_c: i64,
    #[serde(with = "rat")]
    pub constant: Rational,
}

/// How `c` depends on `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Fixed {
        #[serde(with = "rat")]
        value: Rational,
    },
    /// `(-1)^k`.
    MinusOnePowK,
}

impl Coefficient {
    fn at(&self, k: i64) -> Rational {
        match self {
            Coefficient::Fixed { value } => value.clone(),
            Coefficient::MinusOnePowK => Rational::from(if k % 2 == 0 { 1 } else { -1 }),
        }
    }
}

/// A row of the closed-formula table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRule {
    pub function: String,
    pub family: Family,
    pub coefficient: Coefficient,
    pub bside: BSide,
    pub formula: SumFormula,
    pub source: Source,
}

/// A closed-formula case resolved for one root of unity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedFormCase {
    pub function: String,
    pub family: Family,
    pub m: i64,
    pub k: i64,
    #[serde(with = "rat")]
    pub c: Rational,
    pub bside: BSide,
    pub formula: SumFormula,
    pub source: Source,
}

fn sum_of(
    scale: impl Into<Rational>,
    prefactor: i64,
    summand: Summand,
    negate_zeta: bool,
    lo: i64,
    hi: (i64, i64),
    constant: impl Into<Rational>,
) -> SumFormula {
    SumFormula {
        scale: scale.into(),
        prefactor,
        summand,
        negate_zeta,
        lo,
        hi_k: hi.0,
        hi_c: hi.1,
        constant: constant.into(),
    }
}

fn cat(name: &str) -> Summand {
    Summand::Catalog { name: name.to_string() }
}

fn fixed(c: i64) -> Coefficient {
    Coefficient::Fixed { value: Rational::from(c) }
}

/// The closed-formula table.
pub fn case_rules() -> Vec<CaseRule> {
    use Family::*;
    let row = |f: &str, family: Family, c: Coefficient, formula: SumFormula| CaseRule {
        function: f.to_string(),
        family,
        coefficient: c,
        bside: BSide::Bilateral,
        formula,
        source: Source::Paper,
    };
    let mh = || Rational::from((-1, 2));
    let km1 = (1, -1);
    let mut v = vec![
        row("5:f0", Even, fixed(1), sum_of(-2, 0, cat("5:psi0"), false, 0, km1, 0)),
        row("5:f1", Even, fixed(1), sum_of(-2, 0, cat("5:psi1"), false, 0, km1, 0)),
        row("5:F0", Odd, fixed(1), sum_of(-1, 0, cat("5:phi0"), true, 0, km1, 1)),
        row("5:F1", Odd, fixed(1), sum_of(1, -1, cat("5:phi1"), true, 0, km1, 0)),
        row("5:psi0", Odd, fixed(1), sum_of(-1, 0, cat("5:f0"), false, 1, (2, -1), mh())),
        row("5:psi1", Odd, fixed(1), sum_of(-1, 0, cat("5:f1"), false, 1, (2, -1), mh())),
        row("5:phi0", Odd, fixed(1), sum_of(-2, 0, cat("5:F0"), true, 1, (2, -1), 0)),
        row("5:phi0", Mult4, fixed(1), sum_of(-2, 0, cat("5:F0"), true, 1, (2, 0), 0)),
        row("5:phi1", Odd, fixed(1), sum_of(-2, 1, cat("5:F1"), true, 0, (2, -2), 0)),
        row("5:phi1", Mult4, fixed(1), sum_of(-2, 1, cat("5:F1"), true, 0, (2, -1), 0)),
        row("5:chi0", Odd, fixed(2), sum_of(-3, 0, cat("5:phi0"), true, 0, km1, 2)),
        row("5:chi1", Odd, fixed(2), sum_of(3, -1, cat("5:phi1"), true, 0, km1, 0)),
        row("5:chi0", Even, fixed(-1), sum_of(6, 0, cat("5:F0"), false, 1, (1, 0), 2)),
        row("5:chi1", Even, fixed(-1), sum_of(6, 0, cat("5:F1"), false, 0, km1, 0)),
    ];
    let rule = |r: TermRule| Summand::Rule { rule: r };
    let pa = |sign, off, step, power| PochAtom::new(sign, (0, off), step, (1, 0), power);
    v.push(row(
        "3:phi",
        Mult4,
        fixed(1),
        sum_of(-2, 1, rule(TermRule::new(1, false, QuadExp::new(0, 1, 0, 1), vec![pa(-1, 2, 2, 1)])), false, 0, km1, 0),
    ));
    v.push(row(
        "3:psi",
        Odd,
        fixed(1),
        sum_of(-1, 0, rule(TermRule::new(1, true, QuadExp::new(0, 0, 0, 1), vec![pa(1, 1, 2, 1)])), false, 0, km1, 0),
    ));
    v.push(row(
        "3:nu",
        Mult4Minus2,
        fixed(1),
        sum_of(-1, 0, rule(TermRule::new(1, false, QuadExp::new(0, 1, 0, 1), vec![pa(-1, 1, 2, 1)])), false, 0, km1, 0),
    ));
    v.push(CaseRule {
        function: "3:f".into(),
        family: Even,
        coefficient: Coefficient::MinusOnePowK,
        bside: BSide::ThetaB,
        formula: sum_of(
            -4,
            0,
            rule(TermRule::new(1, false, QuadExp::new(0, 1, 1, 1), vec![pa(-1, 1, 1, 2)])),
            false,
            0,
            km1,
            0,
        ),
        source: Source::Paper,
    });
    for (a, b) in [("lambda", "rho"), ("mu", "sigma"), ("phi", "nu"), ("psi", "xi")] {
        let (fa, fb) = (format!("6:{a}"), format!("6:{b}"));
        v.push(row(&fa, Even, fixed(1), sum_of(-2, 0, cat(&fb), false, 0, km1, 0)));
        v.push(row(&fb, Odd, fixed(1), sum_of(mh(), 0, cat(&fa), false, 0, km1, 0)));
    }
    for (a, b) in [("S0", "T0"), ("S1", "T1")] {
        let (fa, fb) = (format!("8:{a}"), format!("8:{b}"));
        v.push(row(&fa, Mult4, fixed(1), sum_of(-2, 0, cat(&fb), false, 0, km1, 0)));
        v.push(row(&fb, Mult4Minus2, fixed(1), sum_of(mh(), 0, cat(&fa), false, 0, km1, 0)));
    }
    v.push(row("8:V0", Odd, fixed(1), sum_of(-1, 0, cat("8:V0"), true, 0, km1, 0)));
    v.push(row("8:V1", Odd, fixed(1), sum_of(1, 0, cat("8:V1"), true, 0, km1, 0)));
    v
}

/// Selects the applicable closed formula for `name` at `ζ`.
pub fn classify(name: &str, zeta: &RootOfUnity) -> Result<ClosedFormCase> {
    let rules = case_rules();
    let hits: Vec<&CaseRule> = rules.iter().filter(|r| r.function == name && r.family.admits(zeta.m)).collect();
    match hits.as_slice() {
        [r] => {
            let k = r.family.k(zeta.m).expect("admitted");
            Ok(ClosedFormCase {
                function: r.function.clone(),
                family: r.family,
                m: zeta.m,
                k,
                c: r.coefficient.at(k),
                bside: r.bside,
                formula: r.formula.clone(),
                source: r.source,
            })
        }
        [] => Err(Error::NoApplicableCase { name: name.to_string(), m: zeta.m as u64 }),
        _ => Err(Error::InvalidRule(format!("ambiguous closed formula for {name} at order {}", zeta.m))),
    }
}

/// Exact powers of a root of unity `w = e^(2πi a/d)`.
struct RootPowers {
    a: i64,
    d: i64,
    table: Vec<Cx>,
}

impl RootPowers {
    fn new(a: i64, d: i64, prec: u32) -> RootPowers {
        let table = (0..d).map(|j| Cx::root_of_unity(j, d, prec)).collect();
        RootPowers { a: a.rem_euclid(d), d, table }
    }

    /// Index `j` with `w^e = e^(2πi j/d)`.
    fn index(&self, e: i64) -> i64 {
        (self.a * e.rem_euclid(self.d)).rem_euclid(self.d)
    }

    fn pow(&self, e: i64) -> &Cx {
        &self.table[self.index(e) as usize]
    }

    /// `1 - sign w^e`, exactly zero when `sign w^e = 1`.
    fn binomial(&self, sign: i64, e: i64) -> Option<Cx> {
        let j = self.index(e);
        let vanishes = if sign > 0 { j == 0 } else { 2 * j == self.d };
        if vanishes {
            return None;
        }
        let one = Cx::one(self.table[0].prec());
        let x = &self.table[j as usize];
        Some(if sign > 0 { one.sub(x) } else { one.add(x) })
    }
}

/// Evaluates a closed formula at its root of unity.
pub fn closed_form(reg: &Registry, case: &ClosedFormCase, zeta: &RootOfUnity, prec: u32) -> Result<Cx> {
    let f = &case.formula;
    let rule = match &f.summand {
        Summand::Catalog { name } => reg.catalog.get(name)?.term.clone(),
        Summand::Rule { rule } => rule.clone(),
    };
    // w = ±ζ as e^(2πi a/d) with d = 2m.
    let d = 2 * zeta.m;
    let a = 2 * zeta.h + if f.negate_zeta { zeta.m } else { 0 };
    let w = RootPowers::new(a, d, prec + 16);
    let z = RootPowers::new(2 * zeta.h, d, prec + 16);
    let hi = f.hi_k * case.k + f.hi_c;
    let underflow = -f64::from(prec) / 2.0;
    let mut acc = Cx::zero(prec + 16);
    for n in f.lo..=hi {
        let t = rule.factors(n)?;
        let mut v = w.pow(t.qexp).scale(&t.coeff);
        for &(s, e) in &t.numerator {
            match w.binomial(s, e) {
                Some(b) => v = v.mul(&b),
                None => {
                    v = Cx::zero(prec + 16);
                    break;
                }
            }
        }
        if v.is_zero() {
            continue;
        }
        for &(s, e) in &t.denominator {
            let b = w.binomial(s, e).ok_or(Error::VanishingDenominator)?;
            if b.log2_abs() < underflow {
                return Err(Error::VanishingDenominator);
            }
            v = v.div(&b);
        }
        acc.add_assign(&v);
    }
    let out = acc.mul(z.pow(f.prefactor)).scale(&f.scale).add(&Cx::from_rational(&f.constant, prec + 16));
    Ok(out.with_prec(prec))
}

/// How `M(q) - c B(q)` is evaluated numerically.
#[derive(Clone, Debug)]
pub enum DiffPlan {
    /// `M - c P` with `P` the modular product.
    Product { c: Rational, product: ProductExpr },
    /// A linear combination of catalog functions in which `M - c B` has been
    /// merged algebraically.
    Merged(Combination),
    /// `M - c b(q)`.
    ThetaB { c: Rational },
}

impl DiffPlan {
    pub fn label(&self) -> &'static str {
        match self {
            DiffPlan::Product { .. } => "modular-product",
            DiffPlan::Merged(_) => "merged-combination",
            DiffPlan::ThetaB { .. } => "theta-b",
        }
    }
}

/// Chooses the B-side evaluator. The modular product is used when one is
/// recorded and `M` has a quadratic exponent (or an alternative form);
/// otherwise the difference is merged into a combination of catalog series.
pub fn plan(reg: &Registry, case: &ClosedFormCase) -> Result<DiffPlan> {
    if case.bside == BSide::ThetaB {
        return Ok(DiffPlan::ThetaB { c: case.c.clone() });
    }
    let entry = reg.catalog.get(&case.function)?;
    let recipe = reg.recipe(&case.function)?;
    let fast = entry.term.qexp.a > 0 || entry.numeric_form.is_some();
    if let (Some(p), true) = (&recipe.product, fast) {
        return Ok(DiffPlan::Product { c: case.c.clone(), product: p.clone() });
    }
    let flat = reg.flattened(&recipe.name)?;
    let mine = Combination::new(vec![CombTerm::new(1, &case.function)], 0);
    let neg_c = Rational::from(-&case.c);
    Ok(DiffPlan::Merged(mine.plus(&flat.scaled(&neg_c))))
}

/// `M(q) - c B(q)` at `pt`, accurate to about `target` bits relative to the
/// result.
///
/// Component sums are truncated `bits` below their largest term, so the
/// truncation error is invisible until the measured loss (cancellation inside
/// the sums and between them) is compared with `bits`. The first pass guesses
/// a small loss and later passes run while the guess was short. What is lost
/// to rounding is left to the precision driver.
pub fn eval_plan(
    reg: &Registry,
    case: &ClosedFormCase,
    plan: &DiffPlan,
    pt: &QPoint,
    policy: &TailPolicy,
    target: u32,
) -> Result<Cx> {
    let cap = pt.prec().saturating_sub(16);
    let want = |loss: f64| (f64::from(target) + 40.0 + loss).min(f64::from(cap)) as u32;
    let mut bits = want(8.0);
    loop {
        let d = eval_plan_once(reg, case, plan, pt, policy, bits)?;
        let loss = take_loss();
        if want(loss) <= bits {
            note_loss(loss);
            return Ok(d);
        }
        // A result at the truncation noise understates the loss, so the
        // demand at least doubles.
        bits = want(loss + 8.0).max(bits.saturating_mul(2).min(cap));
    }
}

fn eval_plan_once(
    reg: &Registry,
    case: &ClosedFormCase,
    plan: &DiffPlan,
    pt: &QPoint,
    policy: &TailPolicy,
    bits: u32,
) -> Result<Cx> {
    let acc = Accuracy::RelativeBits(bits);
    let value = |f: &str, p: &QPoint| reg.catalog.eval_point(f, p, policy, acc);
    let parts: Vec<Cx> = match plan {
        DiffPlan::Merged(comb) => {
            let mut parts = vec![Cx::from_rational(&comb.constant, pt.prec())];
            for t in &comb.terms {
                let v = value(&t.function, &pt.scaled(t.sign, t.power))?;
                parts.push(v.mul(&pt.pow(&t.qshift)?).scale(&t.coeff));
            }
            parts
        }
        DiffPlan::Product { c, product } => {
            vec![value(&case.function, pt)?, product.eval(pt)?.scale(c).neg()]
        }
        DiffPlan::ThetaB { c } => vec![value(&case.function, pt)?, forms::b_value(&pt.q)?.scale(c).neg()],
    };
    let mut d = Cx::zero(pt.prec());
    let mut peak = f64::NEG_INFINITY;
    for v in &parts {
        peak = peak.max(v.log2_abs());
        d.add_assign(v);
    }
    merge_loss(peak, &d);
    Ok(d)
}

/// Numeric settings for radial work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialConfig {
    /// Starting working precision in bits.
    pub precision: u32,
    /// Bits of agreement required between successive precisions.
    pub target_bits: u32,
    pub max_precision: u32,
    pub tail: TailPolicy,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig { precision: 128, target_bits: 40, max_precision: 65536, tail: TailPolicy::default() }
    }
}

/// A complex number as fixed-width decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CxText {
    pub re: String,
    pub im: String,
}

impl CxText {
    pub fn of(z: &Cx) -> CxText {
        CxText { re: fmt_float(&z.re, 20), im: fmt_float(&z.im, 20) }
    }
}

/// One grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPoint {
    pub j: u32,
    /// `1 - 2^-j`.
    pub r: f64,
    pub difference: CxText,
    pub residual: f64,
    pub working_precision: u32,
}

/// Outcome of a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// Full report of a radial scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialReport {
    pub function: String,
    pub zeta: RootOfUnity,
    pub family: Family,
    pub k: i64,
    #[serde(with = "rat")]
    pub c: Rational,
    pub bside: String,
    pub source: Source,
    pub closed_form: CxText,
    pub points: Vec<RadialPoint>,
    /// Set when the grid was cut short by a tail-bound failure.
    pub truncated_at: Option<u32>,
    pub verdict: Option<Verdict>,
}

impl RadialReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.residual).collect()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("r,re_diff,im_diff,residual\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{:e}\n", p.r, p.difference.re, p.difference.im, p.residual));
        }
        out
    }
}

/// `1 - 2^-j` at precision `p`.
pub fn grid_radius(j: u32, p: u32) -> Float {
    Float::with_val(p, 1) - crate::numeric::pow2(p, -(j as i32))
}

/// Scans `M(rζ) - c B(rζ)` over `r_j = 1 - 2^-j` for `j` in `grid`.
///
/// `offset` is added to the closed form (zero except for fault injection).
pub fn radial_scan(
    reg: &Registry,
    name: &str,
    zeta: &RootOfUnity,
    grid: &[u32],
    cfg: &RadialConfig,
    offset: &Rational,
) -> Result<RadialReport> {
    let case = classify(name, zeta)?;
    let diff_plan = plan(reg, &case)?;
    let closed = closed_form(reg, &case, zeta, cfg.precision)?.add(&Cx::from_rational(offset, cfg.precision));
    let mut points = Vec::new();
    let truncated_at = scan_points(reg, &case, &diff_plan, zeta, &closed, grid, cfg, &mut points)?;
    if points.len() < 3 {
        return Err(Error::GridTooCoarse(points.len()));
    }
    Ok(RadialReport {
        function: name.to_string(),
        zeta: *zeta,
        family: case.family,
        k: case.k,
        c: case.c.clone(),
        bside: diff_plan.label().to_string(),
        source: case.source,
        closed_form: CxText::of(&closed),
        points,
        truncated_at,
        verdict: None,
    })
}

/// Evaluates the grid points in order, appending to `points`. Returns the
/// `j` at which a tail-bound failure or exhausted precision ended the scan.
#[allow(clippy::too_many_arguments)]
fn scan_points(
    reg: &Registry,
    case: &ClosedFormCase,
    diff_plan: &DiffPlan,
    zeta: &RootOfUnity,
    closed: &Cx,
    grid: &[u32],
    cfg: &RadialConfig,
    points: &mut Vec<RadialPoint>,
) -> Result<Option<u32>> {
    let results: Vec<Result<(Cx, u32)>> = grid
        .par_iter()
        .map(|&j| {
            let est = refine_from(cfg.precision, cfg.target_bits, cfg.max_precision, |p| {
                let pt = QPoint::radial(zeta.h, zeta.m, &grid_radius(j, p));
                eval_plan(reg, case, diff_plan, &pt, &cfg.tail, cfg.target_bits)
            })?;
            Ok((est.value, est.working_prec))
        })
        .collect();
    for (&j, res) in grid.iter().zip(results) {
        match res {
            Ok((v, wp)) => {
                let residual = v.sub(&closed.with_prec(v.prec())).abs().to_f64();
                points.push(RadialPoint {
                    j,
                    r: 1.0 - 2f64.powi(-(j as i32)),
                    difference: CxText::of(&v),
                    residual,
                    working_precision: wp,
                });
            }
            Err(Error::TailBoundFailure { .. }) | Err(Error::PrecisionExhausted(_)) => return Ok(Some(j)),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Pass criteria for a radial limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitPolicy {
    pub tol: f64,
    pub grid: Vec<u32>,
    pub config: RadialConfig,
    /// Residual increases tolerated among the last five points.
    pub allowed_increases: usize,
    /// Last `j` the grid may be extended to, one point at a time, while the
    /// final residual is still above `tol`. `None` keeps the grid fixed.
    #[serde(default)]
    pub extend_to: Option<u32>,
    /// Added to the closed form; nonzero only to inject a fault.
    #[serde(with = "rat")]
    pub closed_form_offset: Rational,
}

impl Default for LimitPolicy {
    fn default() -> Self {
        LimitPolicy {
            tol: 1e-2,
            grid: (4..=12).collect(),
            config: RadialConfig::default(),
            allowed_increases: 1,
            extend_to: None,
            closed_form_offset: Rational::new(),
        }
    }
}

impl LimitPolicy {
    /// Grid `4 ..= 12`, extendable to `12 + ceil(log2 m)`, which keeps
    /// `m (1 - r)` comparable across orders.
    pub fn scaled_for(m: i64) -> LimitPolicy {
        let extra = if m <= 1 { 0 } else { 64 - ((m - 1) as u64).leading_zeros() };
        LimitPolicy { extend_to: Some(12 + extra), ..LimitPolicy::default() }
    }
}

/// Applies the verdict rule to a residual sequence.
pub fn judge(residuals: &[f64], tol: f64, allowed_increases: usize) -> Verdict {
    let Some(&last) = residuals.last() else { return Verdict::Fail };
    let tail = &residuals[residuals.len().saturating_sub(5)..];
    let ups = tail.windows(2).filter(|w| w[1] > w[0]).count();
    if last.is_finite() && last <= tol && ups <= allowed_increases {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Runs the scan and applies the policy. A missing closed formula yields
/// `Skipped` with no report.
pub fn check_limit(
    reg: &Registry,
    name: &str,
    zeta: &RootOfUnity,
    policy: &LimitPolicy,
) -> Result<(Verdict, Option<RadialReport>)> {
    match classify(name, zeta) {
        Err(Error::NoApplicableCase { .. }) => return Ok((Verdict::Skipped, None)),
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let mut report = radial_scan(reg, name, zeta, &policy.grid, &policy.config, &policy.closed_form_offset)?;
    let mut v = judge(&report.residuals(), policy.tol, policy.allowed_increases);
    if let Some(limit) = policy.extend_to {
        let case = classify(name, zeta)?;
        let diff_plan = plan(reg, &case)?;
        let cfg = &policy.config;
        let closed = closed_form(reg, &case, zeta, cfg.precision)?
            .add(&Cx::from_rational(&policy.closed_form_offset, cfg.precision));
        let mut next = report.points.last().map_or(limit + 1, |p| p.j + 1);
        while v == Verdict::Fail && report.truncated_at.is_none() && next <= limit {
            let last = report.points.last().map_or(f64::INFINITY, |p| p.residual);
            if !(last > policy.tol) {
                break;
            }
            report.truncated_at = scan_points(reg, &case, &diff_plan, zeta, &closed, &[next], cfg, &mut report.points)?;
            v = judge(&report.residuals(), policy.tol, policy.allowed_increases);
            next += 1;
        }
    }
    report.verdict = Some(v);
    Ok((v, Some(report)))
}

/// The two smallest orders admitted by some closed formula of `name`.
pub fn smallest_orders(name: &str, count: usize) -> Vec<i64> {
    let rules = case_rules();
    (1..=64).filter(|&m| rules.iter().any(|r| r.function == name && r.family.admits(m))).take(count).collect()
}

/// Regrouping at odd order `m = 2k - 1`: the full sum
/// `sum_{n>=0} ζ^(n^2)/(-ζ;ζ)_n` and `1 + 2 sum_{n=1}^{2k-1} ζ^(n^2)/(-ζ;ζ)_n`.
pub fn regrouping_pair(zeta: &RootOfUnity, prec: u32) -> Result<(Cx, Cx)> {
    if zeta.m % 2 == 0 {
        return Err(Error::NoApplicableCase { name: "regrouping".into(), m: zeta.m as u64 });
    }
    let p = prec + 32;
    let w = RootPowers::new(zeta.h, zeta.m, p);
    let mut full = Cx::zero(p);
    let mut head = Cx::zero(p);
    let mut den = Cx::one(p);
    let stop = -f64::from(prec) - 8.0;
    let mut n = 0i64;
    loop {
        if n > 0 {
            den = den.mul(&w.binomial(-1, n).ok_or(Error::VanishingDenominator)?);
        }
        let t = w.pow(n * n).div(&den);
        full.add_assign(&t);
        if n >= 1 && n <= zeta.m {
            head.add_assign(&t);
        }
        if n >= zeta.m && t.log2_abs() < stop {
            break;
        }
        n += 1;
    }
    let regrouped = Cx::one(p).add(&head.scale_i(2));
    Ok((full.with_prec(prec), regrouped.with_prec(prec)))
}

/// `(-ζ;ζ)_n` at even order `m = 2k`, which vanishes for `n >= k`: the exact
/// verdict from exponent arithmetic and the numeric magnitude in bits.
pub fn truncated_product(zeta: &RootOfUnity, n: i64, prec: u32) -> (bool, f64) {
    let w = RootPowers::new(zeta.h, zeta.m, prec);
    let one = Cx::one(prec);
    let mut exact_zero = false;
    let mut v = Cx::one(prec);
    for e in 1..=n {
        exact_zero |= w.binomial(-1, e).is_none();
        v = v.mul(&one.add(w.pow(e)));
    }
    (exact_zero, v.log2_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(h: i64, m: i64) -> RootOfUnity {
        RootOfUnity::new(h, m).unwrap()
    }

    #[test]
    fn classify_examples() {
        let c = classify("5:f0", &z(1, 4)).unwrap();
        assert_eq!((c.family, c.k), (Family::Even, 2));
        let c = classify("5:psi0", &z(1, 3)).unwrap();
        assert_eq!((c.family, c.k), (Family::Odd, 2));
        assert!(matches!(classify("5:phi0", &z(1, 6)), Err(Error::NoApplicableCase { .. })));
    }

    #[test]
    fn hand_values() {
        let reg = Registry::builtin();
        let val = |n: &str, h, m| {
            let c = classify(n, &z(h, m)).unwrap();
            closed_form(&reg, &c, &z(h, m), 128).unwrap()
        };
        let close = |a: Cx, re: f64| a.sub(&Cx::from_f64(re, 0.0, 128)).log2_abs() < -100.0;
        assert!(close(val("5:f0", 1, 2), 2.0));
        assert!(close(val("5:psi0", 0, 1), -1.0));
        assert!(close(val("5:chi0", 1, 2), 5.0));
        assert!(close(val("3:f", 1, 2), 4.0));
    }

    #[test]
    fn parse_roots() {
        assert_eq!(RootOfUnity::parse("1/3").unwrap(), z(1, 3));
        assert!(RootOfUnity::parse("2/4").is_err());
        assert!(RootOfUnity::parse("x").is_err());
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(judge(&[1.0, 0.5, 0.6, 0.1, 0.05, 0.001], 1e-2, 1), Verdict::Pass);
        assert_eq!(judge(&[1.0, 0.5, 0.6, 0.1, 0.2, 0.001], 1e-2, 1), Verdict::Fail);
        assert_eq!(judge(&[1.0, 0.5, 0.02], 1e-2, 1), Verdict::Fail);
    }
}
