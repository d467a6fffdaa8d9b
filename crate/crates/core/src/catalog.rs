//! Catalog of mock theta functions of orders 3, 5, 6 and 8.
//!
//! Each entry is a term rule `c(n; q)` in a small grammar: a rational
//! coefficient, an optional `(-1)^n`, a quadratic power of `q` and a list of
//! q-Pochhammer symbols whose base offset and length are linear in `n`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms;
use crate::numeric::{check_cancellation, note_loss, take_loss, Cx, QPoint, TailPolicy};
use crate::rat;
use crate::series::{Monomial, Series};

/// `slope * n + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub slope: i64,
    pub intercept: i64,
}

impl Linear {
    pub fn new(slope: i64, intercept: i64) -> Self {
        Linear { slope, intercept }
    }

    pub fn at(&self, n: i64) -> i64 {
        self.slope * n + self.intercept
    }
}

/// `(a n^2 + b n + c) / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadExp {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub den: i64,
}

impl QuadExp {
    pub fn new(a: i64, b: i64, c: i64, den: i64) -> Self {
        QuadExp { a, b, c, den }
    }

    pub fn at(&self, n: i64) -> Result<i64> {
        let num = self.a * n * n + self.b * n + self.c;
        if num % self.den != 0 {
            return Err(Error::InvalidRule(format!("fractional exponent at n = {n}")));
        }
        Ok(num / self.den)
    }
}

/// `(sign q^offset(n); q^step)_length(n)` raised to `power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PochAtom {
    pub sign: i64,
    pub offset: Linear,
    pub step: i64,
    pub length: Linear,
    pub power: i64,
}

impl PochAtom {
    pub fn new(sign: i64, offset: (i64, i64), step: i64, length: (i64, i64), power: i64) -> Self {
        PochAtom {
            sign,
            offset: Linear::new(offset.0, offset.1),
            step,
            length: Linear::new(length.0, length.1),
            power,
        }
    }

    /// Exponents of the binomial factors `1 - sign q^e` of the symbol at `n`,
    /// and whether they sit in the numerator.
    fn factors(&self, n: i64) -> (Vec<i64>, bool) {
        let off = self.offset.at(n);
        let len = self.length.at(n);
        if len >= 0 {
            ((0..len).map(|j| off + self.step * j).collect(), true)
        } else {
            ((1..=-len).map(|j| off - self.step * j).collect(), false)
        }
    }
}

/// One summand family `c(n; q)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRule {
    #[serde(with = "rat")]
    pub coeff: Rational,
    #[serde(default)]
    pub alternating: bool,
    pub qexp: QuadExp,
    #[serde(default)]
    pub pochs: Vec<PochAtom>,
}

/// A binomial `1 - sign q^exp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Binomial {
    sign: i64,
    exp: i64,
}

/// Exact data of one summand: sign, power of `q`, numerator and denominator
/// binomials with multiplicity.
struct TermData {
    coeff: Rational,
    qexp: i64,
    num: Vec<Binomial>,
    den: Vec<Binomial>,
}

impl TermData {
    /// `None` when the numerator vanishes identically.
    fn valuation(&self) -> Result<Option<i64>> {
        if self.num.iter().any(|b| b.exp == 0 && b.sign == 1) {
            return Ok(None);
        }
        if self.den.iter().any(|b| b.exp == 0 && b.sign == 1) {
            return Err(Error::PoleInNegativeIndex);
        }
        let vn: i64 = self.num.iter().filter(|b| b.exp < 0).map(|b| b.exp).sum();
        let vd: i64 = self.den.iter().filter(|b| b.exp < 0).map(|b| b.exp).sum();
        Ok(Some(self.qexp + vn - vd))
    }

    fn series(&self, trunc: i64) -> Result<Series> {
        // Negative-exponent numerator factors lower the order, denominator
        // ones raise it; start with enough headroom to land on `trunc`.
        let vn: i64 = self.num.iter().filter(|b| b.exp < 0).map(|b| b.exp).sum();
        let vd: i64 = self.den.iter().filter(|b| b.exp < 0).map(|b| b.exp).sum();
        let start = trunc - self.qexp - vn + vd;
        let mut acc = Series::one(start);
        for b in &self.den {
            if b.exp > 0 && b.exp >= acc.trunc_ceil() {
                continue;
            }
            acc = acc.div_binomial(&Rational::from(b.sign), &Rational::from(b.exp)).map_err(|_| Error::PoleInNegativeIndex)?;
        }
        for b in &self.num {
            if b.exp > 0 && b.exp >= acc.trunc_ceil() {
                continue;
            }
            acc = acc.mul_binomial(&Rational::from(b.sign), &Rational::from(b.exp));
        }
        Ok(acc.mul_monomial(&Monomial::new(self.coeff.clone(), self.qexp)).truncate_int(trunc))
    }
}

/// Explicit factorization of one term; binomials are `(sign, e)` for
/// `1 - sign q^e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermFactors {
    pub coeff: Rational,
    pub qexp: i64,
    pub numerator: Vec<(i64, i64)>,
    pub denominator: Vec<(i64, i64)>,
}

impl TermRule {
    pub fn new(coeff: impl Into<Rational>, alternating: bool, qexp: QuadExp, pochs: Vec<PochAtom>) -> Self {
        TermRule { coeff: coeff.into(), alternating, qexp, pochs }
    }

    fn data(&self, n: i64) -> Result<TermData> {
        let mut coeff = self.coeff.clone();
        if self.alternating && n.rem_euclid(2) == 1 {
            coeff = -coeff;
        }
        let mut num = Vec::new();
        let mut den = Vec::new();
        for p in &self.pochs {
            let (exps, upstairs) = p.factors(n);
            let up = upstairs == (p.power > 0);
            let target = if up { &mut num } else { &mut den };
            for _ in 0..p.power.abs() {
                target.extend(exps.iter().map(|&e| Binomial { sign: p.sign, exp: e }));
            }
        }
        Ok(TermData { coeff, qexp: self.qexp.at(n)?, num, den })
    }

    /// The `n`-th term as `coeff * q^qexp * prod (1 - sign q^e)^(+-1)`.
    pub fn factors(&self, n: i64) -> Result<TermFactors> {
        let d = self.data(n)?;
        let pair = |b: &Binomial| (b.sign, b.exp);
        Ok(TermFactors {
            coeff: d.coeff,
            qexp: d.qexp,
            numerator: d.num.iter().map(pair).collect(),
            denominator: d.den.iter().map(pair).collect(),
        })
    }

    /// Exact valuation of the `n`-th term, `None` if the term vanishes.
    pub fn valuation(&self, n: i64) -> Result<Option<i64>> {
        self.data(n)?.valuation()
    }

    /// Exact `n`-th term to `q^trunc`.
    pub fn term(&self, n: i64, trunc: i64) -> Result<Series> {
        let d = self.data(n)?;
        match d.valuation()? {
            None => Ok(Series::zero(trunc)),
            Some(v) if v >= trunc => Ok(Series::zero(trunc)),
            Some(_) => d.series(trunc),
        }
    }

    /// Numeric value of the `n`-th term at a root-of-unity-free point by
    /// direct multiplication; used for closed formulas and spot checks.
    pub fn term_value(&self, n: i64, q: &Cx) -> Result<Cx> {
        let d = self.data(n)?;
        let p = q.prec();
        let mut acc = q.powi(d.qexp).scale(&d.coeff);
        let one = Cx::one(p);
        for b in &d.num {
            let x = q.powi(b.exp);
            let f = if b.sign > 0 { one.sub(&x) } else { one.add(&x) };
            acc = acc.mul(&f);
        }
        for b in &d.den {
            let x = q.powi(b.exp);
            let f = if b.sign > 0 { one.sub(&x) } else { one.add(&x) };
            if f.is_zero() {
                return Err(Error::VanishingDenominator);
            }
            acc = acc.div(&f);
        }
        Ok(acc)
    }
}

/// Provenance of a definition, recipe or closed formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Paper,
    CitedReference,
    /// Consequence of printed relations, derived in this crate.
    Derived,
}

/// How the one-sided sum is interpreted when its terms do not tend to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    #[default]
    None,
    /// Terms of the form `(-1)^n R_n` with `R_n -> R`: summed as the Abel
    /// mean, i.e. `sum (-1)^n (R_n - R) + R/2`.
    AlternatingLimit,
}

/// A term of a linear combination: `coeff * q^qshift * F(sign * q^power)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombTerm {
    #[serde(with = "rat")]
    pub coeff: Rational,
    pub function: String,
    #[serde(default = "one")]
    pub sign: i64,
    #[serde(default = "one")]
    pub power: i64,
    #[serde(with = "rat", default)]
    pub qshift: Rational,
}

fn one() -> i64 {
    1
}

impl CombTerm {
    pub fn new(coeff: impl Into<Rational>, function: &str) -> Self {
        CombTerm { coeff: coeff.into(), function: function.to_string(), sign: 1, power: 1, qshift: Rational::new() }
    }

    pub fn at(mut self, sign: i64, power: i64) -> Self {
        self.sign = sign;
        self.power = power;
        self
    }

    pub fn shifted(mut self, e: impl Into<Rational>) -> Self {
        self.qshift = e.into();
        self
    }
}

/// `constant + sum of terms`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combination {
    pub terms: Vec<CombTerm>,
    #[serde(with = "rat", default)]
    pub constant: Rational,
}

impl Combination {
    pub fn new(terms: Vec<CombTerm>, constant: impl Into<Rational>) -> Self {
        Combination { terms, constant: constant.into() }
    }

    /// Expands with `lookup(name, trunc)` supplying the named series.
    pub fn expand(&self, trunc: i64, lookup: &dyn Fn(&str, i64) -> Result<Series>) -> Result<Series> {
        let mut acc = Series::constant(self.constant.clone(), trunc);
        for t in &self.terms {
            let need = Rational::from(Rational::from(trunc) - &t.qshift);
            let inner = crate::series::ceil_i64(&Rational::from(&need / t.power)).max(1);
            let s = lookup(&t.function, inner)?
                .substitute(t.sign, t.power)?
                .mul_monomial(&Monomial::new(t.coeff.clone(), t.qshift.clone()))
                .truncate_int(trunc);
            acc = acc.add(&s);
        }
        Ok(acc)
    }

    /// Evaluates with `value(name, point)` supplying the named values.
    pub fn eval(&self, pt: &QPoint, value: &dyn Fn(&str, &QPoint) -> Result<Cx>) -> Result<Cx> {
        let mut acc = Cx::from_rational(&self.constant, pt.prec());
        let mut peak = acc.log2_abs();
        for t in &self.terms {
            let v = value(&t.function, &pt.scaled(t.sign, t.power))?;
            let v = v.mul(&pt.pow(&t.qshift)?).scale(&t.coeff);
            peak = peak.max(v.log2_abs());
            acc.add_assign(&v);
        }
        merge_loss(peak, &acc);
        Ok(acc)
    }

    pub fn scaled(&self, c: &Rational) -> Combination {
        Combination {
            terms: self.terms.iter().map(|t| CombTerm { coeff: Rational::from(&t.coeff * c), ..t.clone() }).collect(),
            constant: Rational::from(&self.constant * c),
        }
    }

    /// `self + other`, merging equal transforms and dropping zero terms.
    pub fn plus(&self, other: &Combination) -> Combination {
        let mut terms: Vec<CombTerm> = Vec::new();
        for t in self.terms.iter().chain(other.terms.iter()) {
            if let Some(x) = terms.iter_mut().find(|x| {
                x.function == t.function && x.sign == t.sign && x.power == t.power && x.qshift == t.qshift
            }) {
                x.coeff += &t.coeff;
            } else {
                terms.push(t.clone());
            }
        }
        terms.retain(|t| t.coeff != 0);
        Combination { terms, constant: Rational::from(&self.constant + &other.constant) }
    }
}

/// Adds the cancellation of a final sum of magnitude `|acc|` out of parts as
/// large as `2^peak` to the losses recorded while computing those parts.
pub fn merge_loss(peak: f64, acc: &Cx) {
    let inner = take_loss();
    let p = f64::from(acc.prec());
    let outer = if acc.log2_abs().is_finite() { (peak - acc.log2_abs()).clamp(0.0, p) } else { p };
    note_loss(inner + outer);
}

/// One catalog entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockThetaSpec {
    pub name: String,
    pub order: u32,
    pub symbol: String,
    pub start: i64,
    pub term: TermRule,
    #[serde(with = "rat", default)]
    pub offset: Rational,
    pub source: Source,
    #[serde(default)]
    pub regularization: Regularization,
    /// Alternative form used for numeric evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_form: Option<Combination>,
}

/// Short summary for listings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub name: String,
    pub order: u32,
    pub start: i64,
    pub source: Source,
}

/// Terms needed in a row with valuation at or above the order before a
/// one-sided sum is declared finished.
const QUIET_RUN: usize = 3;
/// Consecutive sign-alternating equal terms that trigger the Abel mean.
const STABLE_RUN: usize = 4;

/// Sums `rule` over `indices` exactly to `q^trunc`.
///
/// The walk stops once the term valuations have passed the order and keep
/// increasing. If instead the terms settle into `t, -t, t, ...`, the remaining
/// tail is assigned its Abel mean `t/2`.
pub fn sum_rule<I>(rule: &TermRule, indices: I, trunc: i64, name: &str, cap: usize) -> Result<Series>
where
    I: Iterator<Item = i64>,
{
    let mut acc = Series::zero(trunc);
    let mut quiet = 0usize;
    let mut last_val: Option<i64> = None;
    let mut falling = 0usize;
    let mut history: Vec<Series> = Vec::new();
    for (count, n) in indices.enumerate() {
        if count > cap {
            return Err(Error::NonconvergentBilateral(name.to_string()));
        }
        let v = rule.valuation(n)?;
        let v_eff = v.unwrap_or(i64::MAX);
        if v_eff >= trunc {
            let rising = last_val.map_or(true, |l| v_eff > l || v_eff == i64::MAX);
            quiet = if rising { quiet + 1 } else { 0 };
            last_val = Some(v_eff);
            if quiet >= QUIET_RUN {
                return Ok(acc);
            }
            history.clear();
            continue;
        }
        quiet = 0;
        if let Some(l) = last_val {
            falling = if v_eff < l { falling + 1 } else { 0 };
            if falling >= 12 {
                return Err(Error::NonconvergentBilateral(name.to_string()));
            }
        }
        last_val = Some(v_eff);
        let t = rule.term(n, trunc)?;
        history.push(t.clone());
        if history.len() > STABLE_RUN + 1 {
            history.remove(0);
        }
        if history.len() == STABLE_RUN + 1 && history.windows(2).all(|w| w[0].add(&w[1]).is_zero()) {
            // Rewind to the first term of the run, then add half of it.
            let mut head = acc.clone();
            for h in history.iter().take(STABLE_RUN) {
                head = head.sub(h);
            }
            let half = history[0].scale(&Rational::from((1, 2)));
            return Ok(head.add(&half));
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

impl MockThetaSpec {
    /// Indices scanned before a one-sided sum is declared nonterminating.
    fn cap(trunc: i64) -> usize {
        (8 * trunc.max(1) + 64) as usize
    }

    /// Exact unilateral expansion.
    pub fn expand(&self, trunc: i64) -> Result<Series> {
        let s = sum_rule(&self.term, self.start.., trunc, &self.name, Self::cap(trunc))
            .map_err(|e| match e {
                Error::NonconvergentBilateral(n) => Error::NonconvergentTail(n),
                other => other,
            })?;
        Ok(s.add(&Series::constant(self.offset.clone(), trunc)))
    }

    /// Exact sum of the terms with negative index shifted below `start`.
    pub fn expand_negative(&self, trunc: i64) -> Result<Series> {
        sum_rule(&self.term, (i64::MIN + 1..self.start).rev(), trunc, &self.name, Self::cap(trunc))
    }

    pub fn summary(&self) -> CatalogSummary {
        CatalogSummary { name: self.name.clone(), order: self.order, start: self.start, source: self.source }
    }
}

/// Accuracy target for a numeric sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Accuracy {
    /// Absolute tolerance.
    Absolute(f64),
    /// `2^-bits` relative to the largest term seen.
    RelativeBits(u32),
}

/// Result of a numeric sum.
#[derive(Clone, Debug)]
pub struct NumericSum {
    pub value: Cx,
    pub terms: usize,
    /// Geometric bound on the discarded tail.
    pub tail_bound: f64,
}

/// Running product window `(sign q^(u n + v); q^s)_{alpha n + beta}`.
struct Window {
    atom: PochAtom,
    /// Running product for `u = 0`.
    run: Cx,
    run_len: i64,
    /// Prefix products `prod_{k < K} (1 - sign q^(v + s k))` for `u != 0`.
    prefix: Vec<Cx>,
    qs: Cx,
    x: Cx,
    /// Smallest `log2 |1 - x|` among the factors formed so far.
    min_factor: f64,
}

impl Window {
    fn new(atom: PochAtom, q: &Cx) -> Result<Window> {
        let p = q.prec();
        if atom.offset.slope != 0 && atom.offset.slope % atom.step != 0 {
            return Err(Error::InvalidRule("moving window must shift by whole steps".into()));
        }
        let qs = q.powi(atom.step);
        let mut x = q.powi(atom.offset.intercept);
        if atom.sign < 0 {
            x = x.neg();
        }
        Ok(Window { atom, run: Cx::one(p), run_len: 0, prefix: vec![Cx::one(p)], qs, x, min_factor: f64::INFINITY })
    }

    fn next_factor(&mut self) -> Cx {
        let one = Cx::one(self.x.prec());
        let f = one.sub(&self.x);
        self.min_factor = self.min_factor.min(f.log2_abs());
        self.x = self.x.mul(&self.qs);
        f
    }

    fn value(&mut self, n: i64) -> Result<Cx> {
        let len = self.atom.length.at(n);
        if len < 0 {
            return Err(Error::InvalidRule("negative length in a numeric sum".into()));
        }
        if self.atom.offset.slope == 0 {
            if len < self.run_len {
                return Err(Error::InvalidRule("window length must be nondecreasing".into()));
            }
            while self.run_len < len {
                let f = self.next_factor();
                self.run = self.run.mul(&f);
                self.run_len += 1;
            }
            return Ok(self.run.clone());
        }
        let lo = self.atom.offset.slope / self.atom.step * n;
        if lo < 0 {
            return Err(Error::InvalidRule("window moved below its base".into()));
        }
        let hi = lo + len;
        while (self.prefix.len() as i64) <= hi {
            let f = self.next_factor();
            let last = self.prefix.last().expect("nonempty").mul(&f);
            self.prefix.push(last);
        }
        Ok(self.prefix[hi as usize].div(&self.prefix[lo as usize]))
    }
}

/// Bound in bits on `|sum_{m>n} (-1)^m (t_m - L)|` for a regularized rule whose
/// terms tend to `L` with `|L| = 2^limit_mag`, or `None` while no bound is
/// available yet.
///
/// With `t_m = L / P_m`, where `P_m` is the product of the factors not yet
/// included, `|log P_m| <= S_m = sum over windows of |power| u/((1-u)(1-|q|^s))`
/// for `u = |q|^(offset + s len)`. Then `|t_m - L| <= |L| (e^S_m - 1)`. Because
/// `S_m` falls at least geometrically, the tail is at most
/// `|L| e^S S / (1 - |q|^s_min)` with `S = S_(n+1)`.
fn regularized_tail(rule: &TermRule, n: i64, lq: f64, limit_mag: f64) -> Option<f64> {
    let mut total = 0.0;
    let mut s_min = i64::MAX;
    for a in &rule.pochs {
        let len = a.length.at(n + 1);
        let u = 2f64.powf(lq * (a.offset.intercept + a.step * len) as f64);
        if !(u < 0.5) {
            return None;
        }
        let qs = 2f64.powf(lq * a.step as f64);
        total += a.power.unsigned_abs() as f64 * u / ((1.0 - u) * (1.0 - qs));
        s_min = s_min.min(a.step);
    }
    if !(total < 1.0) {
        return None;
    }
    let decay = 1.0 - 2f64.powf(lq * s_min as f64);
    if total == 0.0 {
        return Some(f64::NEG_INFINITY);
    }
    Some(limit_mag + (total.exp() * total / decay).log2())
}

/// Successive powers `q^E(n)` by second differences when `E` has an integral
/// second difference, falling back to repeated squaring otherwise.
struct QuadPowers {
    qexp: QuadExp,
    q: Cx,
    /// `q^E(n)`, `q^(E(n+1) - E(n))` and `q^(2a/den)` for the next `n`.
    run: Option<(i64, Cx, Cx, Cx)>,
}

impl QuadPowers {
    fn new(qexp: QuadExp, start: i64, q: &Cx) -> Result<QuadPowers> {
        let run = if (2 * qexp.a) % qexp.den == 0 {
            let e0 = qexp.at(start)?;
            let e1 = qexp.at(start + 1)?;
            Some((start, q.powi(e0), q.powi(e1 - e0), q.powi(2 * qexp.a / qexp.den)))
        } else {
            None
        };
        Ok(QuadPowers { qexp, q: q.clone(), run })
    }

    fn next(&mut self, n: i64) -> Result<Cx> {
        match &mut self.run {
            Some((at, cur, step, second)) if *at == n => {
                let out = cur.clone();
                *cur = cur.mul(step);
                *step = step.mul(second);
                *at += 1;
                Ok(out)
            }
            _ => Ok(self.q.powi(self.qexp.at(n)?)),
        }
    }
}

/// Numerically sums `rule` for `n >= start` at `q`.
pub fn eval_rule(
    rule: &TermRule,
    start: i64,
    regularization: Regularization,
    q: &Cx,
    policy: &TailPolicy,
    accuracy: Accuracy,
    name: &str,
) -> Result<NumericSum> {
    let p = q.prec();
    let lq = q.log2_abs();
    if !(lq < 0.0) {
        return Err(Error::NonconvergentTail(format!("|q| >= 1 for `{name}`")));
    }
    let abs_q = 2f64.powf(lq);
    let theta = policy.threshold(abs_q);
    let mut windows = rule.pochs.iter().map(|a| Window::new(*a, q)).collect::<Result<Vec<_>>>()?;
    let limit = match regularization {
        Regularization::None => None,
        Regularization::AlternatingLimit => {
            if rule.qexp.a != 0 || rule.qexp.b != 0 {
                return Err(Error::InvalidRule("regularized rule needs a constant q-power".into()));
            }
            if !rule.alternating {
                return Err(Error::InvalidRule("regularized rule must alternate".into()));
            }
            let mut l = q.powi(rule.qexp.at(0)?).scale(&rule.coeff);
            for a in &rule.pochs {
                if a.offset.slope != 0 || a.length.slope <= 0 {
                    return Err(Error::InvalidRule("regularized rule needs growing fixed windows".into()));
                }
                let v = forms::poch_value(q, a.sign, a.offset.intercept, a.step)?;
                l = l.mul(&v.powi(a.power));
            }
            Some(l)
        }
    };
    let limit_mag = limit.as_ref().map(|l| l.log2_abs());
    let mut powers = QuadPowers::new(rule.qexp, start, q)?;
    let underflow = -(f64::from(p) / 2.0);
    // Underflow is judged on the factors `1 - x q^(sk)` entering a
    // denominator. Their running products may be far smaller, which is
    // harmless in the exponent range of `Float`; the precision actually lost
    // to large terms is measured by the cancellation check. The sum carries
    // on past a tiny factor so that the retry can be sized by the smallest.
    let mut worst_den = f64::INFINITY;
    let underflowed = |worst: f64| {
        note_loss(-2.0 * worst);
        Error::DenominatorUnderflow { name: name.to_string(), bits: p / 2 }
    };
    let mut acc = Cx::zero(p);
    let mut prev_mag = f64::NAN;
    let mut below = 0usize;
    let mut max_mag = f64::NEG_INFINITY;
    let mut peak = f64::NEG_INFINITY;
    let mut n = start;
    let mut count = 0usize;
    loop {
        if count >= policy.max_terms {
            if worst_den < underflow {
                return Err(underflowed(worst_den));
            }
            return Err(Error::TailBoundFailure { name: name.to_string(), terms: count });
        }
        let sign_odd = rule.alternating && n.rem_euclid(2) == 1;
        let mut t = powers.next(n)?.scale(&rule.coeff);
        for w in windows.iter_mut() {
            let v = w.value(n)?;
            if w.atom.power < 0 {
                worst_den = worst_den.min(w.min_factor);
            }
            t = t.mul(&v.powi(w.atom.power));
        }
        if sign_odd {
            t = t.neg();
        }
        if let Some(l) = &limit {
            t = t.sub(&if sign_odd { l.neg() } else { l.clone() });
        }
        acc.add_assign(&t);
        count += 1;
        let mag = t.log2_abs();
        peak = peak.max(mag);
        max_mag = max_mag.max(mag).max(acc.log2_abs());
        let ratio = if prev_mag.is_nan() {
            f64::INFINITY
        } else if mag == f64::NEG_INFINITY {
            0.0
        } else if prev_mag == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            2f64.powf(mag - prev_mag)
        };
        below = if ratio < theta { below + 1 } else { 0 };
        prev_mag = mag;
        let by_ratio = (below >= policy.window)
            .then(|| if mag == f64::NEG_INFINITY { f64::NEG_INFINITY } else { mag + (theta / (1.0 - theta)).log2() });
        let by_limit = limit_mag.and_then(|lm| regularized_tail(rule, n, lq, lm));
        let tail = match (by_ratio, by_limit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Some(tail) = tail {
            let goal = match accuracy {
                Accuracy::Absolute(tol) => tol.log2(),
                Accuracy::RelativeBits(bits) => max_mag.max(0.0) - f64::from(bits),
            };
            if tail < goal {
                if worst_den < underflow {
                    return Err(underflowed(worst_den));
                }
                check_cancellation(name, &acc, peak)?;
                if let Some(l) = &limit {
                    let half = if start.rem_euclid(2) == 1 { l.neg() } else { l.clone() };
                    let half = half.scale(&Rational::from((1, 2)));
                    acc.add_assign(&half);
                }
                return Ok(NumericSum { value: acc, terms: count, tail_bound: 2f64.powf(tail) });
            }
        }
        n += 1;
    }
}

/// The built-in catalog and an expansion cache.
#[derive(Debug)]
pub struct Catalog {
    entries: Vec<MockThetaSpec>,
    cache: Mutex<HashMap<String, Arc<Series>>>,
}

impl Clone for Catalog {
    fn clone(&self) -> Self {
        Catalog { entries: self.entries.clone(), cache: Mutex::new(HashMap::new()) }
    }
}

fn q2(a: i64, b: i64, c: i64, den: i64) -> QuadExp {
    QuadExp::new(a, b, c, den)
}

/// `(sign q^off; q^step)_{alpha n + beta}` raised to `power`, with a fixed base.
fn ph(sign: i64, off: i64, step: i64, len: (i64, i64), power: i64) -> PochAtom {
    PochAtom::new(sign, (0, off), step, len, power)
}

fn entry(
    name: &str,
    order: u32,
    start: i64,
    term: TermRule,
    source: Source,
) -> MockThetaSpec {
    let symbol = name.split(':').nth(1).unwrap_or(name).to_string();
    MockThetaSpec {
        name: name.to_string(),
        order,
        symbol,
        start,
        term,
        offset: Rational::new(),
        source,
        regularization: Regularization::None,
        numeric_form: None,
    }
}

/// Term rules of the built-in catalog.
pub fn builtin_entries() -> Vec<MockThetaSpec> {
    use Source::{CitedReference as Cited, Paper};
    let n1 = (1, 0);
    let n1p = (1, 1);
    let n2 = (2, 0);
    let n2p = (2, 1);
    let mut v = vec![
        // order 5
        entry("5:f0", 5, 0, TermRule::new(1, false, q2(1, 0, 0, 1), vec![ph(-1, 1, 1, n1, -1)]), Paper),
        entry("5:f1", 5, 0, TermRule::new(1, false, q2(1, 1, 0, 1), vec![ph(-1, 1, 1, n1, -1)]), Paper),
        entry("5:psi0", 5, 0, TermRule::new(1, false, q2(1, 3, 2, 2), vec![ph(-1, 1, 1, n1, 1)]), Paper),
        entry("5:psi1", 5, 0, TermRule::new(1, false, q2(1, 1, 0, 2), vec![ph(-1, 1, 1, n1, 1)]), Paper),
        entry("5:phi0", 5, 0, TermRule::new(1, false, q2(1, 0, 0, 1), vec![ph(-1, 1, 2, n1, 1)]), Paper),
        entry("5:phi1", 5, 0, TermRule::new(1, false, q2(1, 2, 1, 1), vec![ph(-1, 1, 2, n1, 1)]), Paper),
        entry("5:F0", 5, 0, TermRule::new(1, false, q2(2, 0, 0, 1), vec![ph(1, 1, 2, n1, -1)]), Paper),
        entry("5:F1", 5, 0, TermRule::new(1, false, q2(2, 2, 0, 1), vec![ph(1, 1, 2, n1p, -1)]), Paper),
        entry(
            "5:chi0",
            5,
            0,
            TermRule::new(1, false, q2(0, 1, 0, 1), vec![PochAtom::new(1, (1, 1), 1, n1, -1)]),
            Paper,
        ),
        entry(
            "5:chi1",
            5,
            0,
            TermRule::new(1, false, q2(0, 1, 0, 1), vec![PochAtom::new(1, (1, 1), 1, n1p, -1)]),
            Paper,
        ),
        // order 3
        entry("3:f", 3, 0, TermRule::new(1, false, q2(1, 0, 0, 1), vec![ph(-1, 1, 1, n1, -2)]), Paper),
        entry("3:phi", 3, 0, TermRule::new(1, false, q2(1, 0, 0, 1), vec![ph(-1, 2, 2, n1, -1)]), Paper),
        entry("3:psi", 3, 1, TermRule::new(1, false, q2(1, 0, 0, 1), vec![ph(1, 1, 2, n1, -1)]), Paper),
        entry("3:nu", 3, 0, TermRule::new(1, false, q2(1, 1, 0, 1), vec![ph(-1, 1, 2, n1p, -1)]), Paper),
        // order 6
        entry(
            "6:phi",
            6,
            0,
            TermRule::new(1, true, q2(1, 0, 0, 1), vec![ph(1, 1, 2, n1, 1), ph(-1, 1, 1, n2, -1)]),
            Cited,
        ),
        entry(
            "6:psi",
            6,
            0,
            TermRule::new(1, true, q2(1, 2, 1, 1), vec![ph(1, 1, 2, n1, 1), ph(-1, 1, 1, n2p, -1)]),
            Cited,
        ),
        entry(
            "6:rho",
            6,
            0,
            TermRule::new(1, false, q2(1, 1, 0, 2), vec![ph(-1, 1, 1, n1, 1), ph(1, 1, 2, n1p, -1)]),
            Cited,
        ),
        entry(
            "6:sigma",
            6,
            0,
            TermRule::new(1, false, q2(1, 3, 2, 2), vec![ph(-1, 1, 1, n1, 1), ph(1, 1, 2, n1p, -1)]),
            Cited,
        ),
        entry(
            "6:lambda",
            6,
            0,
            TermRule::new(1, true, q2(0, 1, 0, 1), vec![ph(1, 1, 2, n1, 1), ph(-1, 1, 1, n1, -1)]),
            Cited,
        ),
        entry(
            "6:mu",
            6,
            0,
            TermRule::new(1, true, q2(0, 0, 0, 1), vec![ph(1, 1, 2, n1, 1), ph(-1, 1, 1, n1, -1)]),
            Cited,
        ),
        entry(
            "6:nu",
            6,
            0,
            TermRule::new(1, false, q2(0, 1, 1, 1), vec![ph(-1, 1, 1, n2p, 1), ph(1, 1, 2, n1p, -1)]),
            Cited,
        ),
        entry(
            "6:xi",
            6,
            0,
            TermRule::new(1, false, q2(0, 1, 1, 1), vec![ph(-1, 1, 1, n2, 1), ph(1, 1, 2, n1p, -1)]),
            Cited,
        ),
        // order 8
        entry(
            "8:S0",
            8,
            0,
            TermRule::new(1, false, q2(1, 0, 0, 1), vec![ph(-1, 1, 2, n1, 1), ph(-1, 2, 2, n1, -1)]),
            Cited,
        ),
        entry(
            "8:S1",
            8,
            0,
            TermRule::new(1, false, q2(1, 2, 0, 1), vec![ph(-1, 1, 2, n1, 1), ph(-1, 2, 2, n1, -1)]),
            Cited,
        ),
        entry(
            "8:T0",
            8,
            0,
            TermRule::new(1, false, q2(1, 3, 2, 1), vec![ph(-1, 2, 2, n1, 1), ph(-1, 1, 2, n1p, -1)]),
            Cited,
        ),
        entry(
            "8:T1",
            8,
            0,
            TermRule::new(1, false, q2(1, 1, 0, 1), vec![ph(-1, 2, 2, n1, 1), ph(-1, 1, 2, n1p, -1)]),
            Cited,
        ),
        entry(
            "8:V0",
            8,
            0,
            TermRule::new(2, false, q2(1, 0, 0, 1), vec![ph(-1, 1, 2, n1, 1), ph(1, 1, 2, n1, -1)]),
            Cited,
        ),
        entry(
            "8:V1",
            8,
            0,
            TermRule::new(1, false, q2(1, 2, 1, 1), vec![ph(-1, 1, 2, n1, 1), ph(1, 1, 2, n1p, -1)]),
            Cited,
        ),
    ];
    for e in v.iter_mut() {
        match e.name.as_str() {
            "6:mu" => e.regularization = Regularization::AlternatingLimit,
            "8:V0" => e.offset = Rational::from(-1),
            "5:chi0" => {
                e.numeric_form = Some(Combination::new(
                    vec![CombTerm::new(2, "5:F0"), CombTerm::new(-1, "5:phi0").at(-1, 1)],
                    0,
                ))
            }
            "5:chi1" => {
                e.numeric_form = Some(Combination::new(
                    vec![CombTerm::new(2, "5:F1"), CombTerm::new(1, "5:phi1").at(-1, 1).shifted(-1)],
                    0,
                ))
            }
            _ => {}
        }
    }
    v
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::builtin()
    }
}

impl Catalog {
    pub fn builtin() -> Catalog {
        Catalog::from_entries(builtin_entries())
    }

    pub fn from_entries(entries: Vec<MockThetaSpec>) -> Catalog {
        Catalog { entries, cache: Mutex::new(HashMap::new()) }
    }

    pub fn from_json(s: &str) -> Result<Catalog> {
        let entries: Vec<MockThetaSpec> = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Catalog::from_entries(entries))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("catalog serializes")
    }

    pub fn entries(&self) -> &[MockThetaSpec] {
        &self.entries
    }

    pub fn list(&self) -> Vec<CatalogSummary> {
        self.entries.iter().map(|e| e.summary()).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&MockThetaSpec> {
        self.entries.iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownFunction(name.to_string()))
    }

    /// Exact expansion to `q^trunc`, cached.
    pub fn expand(&self, name: &str, trunc: i64) -> Result<Series> {
        let entry = self.get(name)?;
        if let Some(s) = self.cached(name, trunc) {
            return Ok(s);
        }
        let s = entry.expand(trunc)?;
        self.cache.lock().expect("cache lock").insert(name.to_string(), Arc::new(s.clone()));
        Ok(s)
    }

    fn cached(&self, name: &str, trunc: i64) -> Option<Series> {
        let guard = self.cache.lock().expect("cache lock");
        let s = guard.get(name)?;
        if s.trunc() >= trunc {
            Some(s.truncate_int(trunc))
        } else {
            None
        }
    }

    /// Numeric value by direct summation of the term rule.
    pub fn eval_direct(&self, name: &str, q: &Cx, policy: &TailPolicy, accuracy: Accuracy) -> Result<NumericSum> {
        let entry = self.get(name)?;
        let mut s = eval_rule(&entry.term, entry.start, entry.regularization, q, policy, accuracy, name)?;
        s.value.add_assign(&Cx::from_rational(&entry.offset, q.prec()));
        Ok(s)
    }

    /// Numeric value, through the alternative form when the entry has one.
    pub fn eval_point(&self, name: &str, pt: &QPoint, policy: &TailPolicy, accuracy: Accuracy) -> Result<Cx> {
        let entry = self.get(name)?;
        match &entry.numeric_form {
            Some(form) => form.eval(pt, &|f, p| self.eval_point(f, p, policy, accuracy)),
            None => Ok(self.eval_direct(name, &pt.q, policy, accuracy)?.value),
        }
    }

    /// `eval_mock`: value at `q` with absolute tolerance `tol` at `precision` bits.
    pub fn eval_mock(&self, name: &str, q: &Cx, tol: f64, precision: u32) -> Result<Cx> {
        let pt = QPoint::from_q(q.with_prec(precision));
        self.eval_point(name, &pt, &TailPolicy::default(), Accuracy::Absolute(tol))
    }
}
