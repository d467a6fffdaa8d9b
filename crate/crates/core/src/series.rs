//! Truncated Laurent series in a fractional power of `q` with exact rational
//! coefficients, plus the q-Pochhammer constructors built on them.
//!
//! A series over denominator `D` stores the coefficients of `q^(n/D)` for a
//! contiguous run of numerators and knows every coefficient below its
//! truncation order; everything at or above the order is unknown.

use std::cmp::{max, min};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::{Integer, Rational};

use crate::error::{Error, Result};

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub(crate) fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Converts a rational exponent to a numerator over `d`, if it has one.
fn to_units(e: &Rational, d: i64) -> Option<i64> {
    let scaled = Rational::from(e * Integer::from(d));
    if *scaled.denom() == 1 {
        scaled.numer().to_i64()
    } else {
        None
    }
}

pub fn floor_i64(r: &Rational) -> i64 {
    r.clone().floor().numer().to_i64().expect("fits in i64")
}

pub fn ceil_i64(r: &Rational) -> i64 {
    r.clone().ceil().numer().to_i64().expect("fits in i64")
}

fn exp_den(e: &Rational) -> i64 {
    e.denom().to_i64().expect("exponent denominator fits in i64")
}

/// `c * q^e` with rational `c` and rational `e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: Rational,
    pub exp: Rational,
}

impl Monomial {
    pub fn new(coeff: impl Into<Rational>, exp: impl Into<Rational>) -> Self {
        Monomial { coeff: coeff.into(), exp: exp.into() }
    }

    /// `q^(num/den)`.
    pub fn q_pow(num: i64, den: i64) -> Self {
        Monomial::new(1, Rational::from((num, den)))
    }

    /// `sign * q^e` for an integer exponent.
    pub fn signed(sign: i64, e: i64) -> Self {
        Monomial::new(sign, e)
    }

    pub fn one() -> Self {
        Monomial::new(1, 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            coeff: Rational::from(&self.coeff * &other.coeff),
            exp: Rational::from(&self.exp + &other.exp),
        }
    }

    pub fn inv(&self) -> Result<Monomial> {
        if self.coeff == 0 {
            return Err(Error::ZeroLeadingCoefficient);
        }
        Ok(Monomial { coeff: self.coeff.clone().recip(), exp: -self.exp.clone() })
    }

    pub fn pow(&self, k: i64) -> Result<Monomial> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let k = k.unsigned_abs() as u32;
        let coeff = Rational::from(rug::ops::Pow::pow(&base.coeff, k));
        Ok(Monomial { coeff, exp: Rational::from(&base.exp * Integer::from(k)) })
    }

    pub fn neg(&self) -> Monomial {
        Monomial { coeff: -self.coeff.clone(), exp: self.exp.clone() }
    }
}

/// Length of a q-Pochhammer symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PochLength {
    Finite(i64),
    Infinite,
}

/// A truncated Laurent series `sum c_n q^(n/D) + O(q^(trunc/D))`.
#[derive(Clone, Debug)]
pub struct Series {
    denom: i64,
    lo: i64,
    coeffs: Vec<Rational>,
    trunc: i64,
}

impl Series {
    /// The zero series known up to `q^trunc`.
    pub fn zero(trunc: i64) -> Self {
        Series { denom: 1, lo: trunc, coeffs: Vec::new(), trunc }
    }

    /// The zero series known up to `q^trunc`, with a rational order.
    pub fn zero_to(trunc: &Rational) -> Self {
        let d = exp_den(trunc);
        let t = to_units(trunc, d).expect("order fits in i64");
        Series { denom: d, lo: t, coeffs: Vec::new(), trunc: t }
    }

    pub fn one(trunc: i64) -> Self {
        Self::monomial(&Monomial::one(), &Rational::from(trunc))
    }

    pub fn constant(c: impl Into<Rational>, trunc: i64) -> Self {
        Self::monomial(&Monomial::new(c, 0), &Rational::from(trunc))
    }

    /// A monomial truncated at `trunc`.
    pub fn monomial(m: &Monomial, trunc: &Rational) -> Self {
        let d = lcm(exp_den(&m.exp), exp_den(trunc));
        let e = to_units(&m.exp, d).expect("exponent fits in i64");
        let t = to_units(trunc, d).expect("order fits in i64");
        let mut s = Series { denom: d, lo: t, coeffs: Vec::new(), trunc: t };
        if e < t && m.coeff != 0 {
            s.lo = e;
            s.coeffs.push(m.coeff.clone());
        }
        s
    }

    /// Builds a series over denominator `denom` from `(numerator, coefficient)`
    /// pairs; pairs at or above `trunc` are dropped.
    pub fn from_terms<I>(denom: i64, terms: I, trunc: i64) -> Self
    where
        I: IntoIterator<Item = (i64, Rational)>,
    {
        assert!(denom >= 1, "denominator must be positive");
        let mut pairs: Vec<(i64, Rational)> =
            terms.into_iter().filter(|(n, c)| *n < trunc && *c != 0).collect();
        let mut s = Series { denom, lo: trunc, coeffs: Vec::new(), trunc };
        if pairs.is_empty() {
            return s;
        }
        pairs.sort_by_key(|p| p.0);
        let lo = pairs[0].0;
        let hi = pairs[pairs.len() - 1].0;
        let mut coeffs = vec![Rational::new(); (hi - lo + 1) as usize];
        for (n, c) in pairs {
            coeffs[(n - lo) as usize] += c;
        }
        s.lo = lo;
        s.coeffs = coeffs;
        s.normalize();
        s
    }

    /// Integer-exponent series from a dense coefficient list starting at `q^lo`.
    pub fn from_coeffs(lo: i64, coeffs: Vec<Rational>, trunc: i64) -> Self {
        let mut s = Series { denom: 1, lo, coeffs, trunc };
        let keep = max(0, min(s.coeffs.len() as i64, trunc - lo)) as usize;
        s.coeffs.truncate(keep);
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| **c == 0).count();
        if lead == self.coeffs.len() {
            self.coeffs.clear();
            self.lo = self.trunc;
        } else if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i64;
        }
    }

    /// Exponent denominator `D`.
    pub fn denom(&self) -> i64 {
        self.denom
    }

    /// Truncation order as a rational exponent.
    pub fn trunc(&self) -> Rational {
        Rational::from((self.trunc, self.denom))
    }

    pub fn trunc_units(&self) -> i64 {
        self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exponent of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<Rational> {
        if self.is_zero() {
            None
        } else {
            Some(Rational::from((self.lo, self.denom)))
        }
    }

    fn val_units(&self) -> i64 {
        if self.is_zero() {
            self.trunc
        } else {
            self.lo
        }
    }

    /// Coefficient of `q^e`.
    pub fn coefficient(&self, e: &Rational) -> Result<Rational> {
        if *e >= self.trunc() {
            return Err(Error::BeyondTruncation { exponent: e.to_string(), trunc: self.trunc().to_string() });
        }
        match to_units(e, self.denom) {
            Some(n) if n >= self.lo && n < self.lo + self.coeffs.len() as i64 => {
                Ok(self.coeffs[(n - self.lo) as usize].clone())
            }
            _ => Ok(Rational::new()),
        }
    }

    /// Coefficient of an integer power of `q`.
    pub fn coeff_int(&self, e: i64) -> Result<Rational> {
        self.coefficient(&Rational::from(e))
    }

    /// Nonzero terms as `(exponent, coefficient)` in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (Rational, &Rational)> + '_ {
        let d = self.denom;
        let lo = self.lo;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(move |(i, c)| (Rational::from((lo + i as i64, d)), c))
    }

    /// Nonzero terms as `(numerator over D, coefficient)`.
    pub fn raw_terms(&self) -> impl Iterator<Item = (i64, &Rational)> + '_ {
        let lo = self.lo;
        self.coeffs.iter().enumerate().filter(|(_, c)| **c != 0).map(move |(i, c)| (lo + i as i64, c))
    }

    /// Rewrites the series over denominator `d`, a multiple of the current one.
    fn rescaled(&self, d: i64) -> Series {
        if d == self.denom {
            return self.clone();
        }
        assert!(d % self.denom == 0, "target denominator must be a multiple");
        let f = d / self.denom;
        let terms = self.raw_terms().map(|(n, c)| (n * f, c.clone())).collect::<Vec<_>>();
        Series::from_terms(d, terms, self.trunc * f)
    }

    /// Drops the denominator to the smallest one compatible with the
    /// nonzero exponents and the truncation order.
    pub fn reduced(&self) -> Series {
        let mut g = gcd(self.denom, self.trunc);
        for (n, _) in self.raw_terms() {
            g = gcd(g, n);
            if g == 1 {
                return self.clone();
            }
        }
        if g <= 1 {
            return self.clone();
        }
        let terms = self.raw_terms().map(|(n, c)| (n / g, c.clone())).collect::<Vec<_>>();
        Series::from_terms(self.denom / g, terms, self.trunc / g)
    }

    fn aligned(a: &Series, b: &Series) -> (Series, Series) {
        let d = lcm(a.denom, b.denom);
        (a.rescaled(d), b.rescaled(d))
    }

    /// Lowers the truncation order to `min(trunc, current)`.
    pub fn truncate(&self, trunc: &Rational) -> Series {
        let d = lcm(self.denom, exp_den(trunc));
        let mut s = self.rescaled(d);
        let t = to_units(trunc, d).expect("order fits in i64");
        if t < s.trunc {
            s.trunc = t;
            let keep = max(0, min(s.coeffs.len() as i64, t - s.lo)) as usize;
            s.coeffs.truncate(keep);
            s.normalize();
        }
        s
    }

    pub fn truncate_int(&self, trunc: i64) -> Series {
        self.truncate(&Rational::from(trunc))
    }

    fn add_impl(&self, other: &Series, negate: bool) -> Series {
        let (a, b) = Series::aligned(self, other);
        let trunc = min(a.trunc, b.trunc);
        let lo = min(a.val_units(), b.val_units());
        if lo >= trunc {
            return Series { denom: a.denom, lo: trunc, coeffs: Vec::new(), trunc };
        }
        let hi = min(trunc, max(a.lo + a.coeffs.len() as i64, b.lo + b.coeffs.len() as i64));
        let mut coeffs = vec![Rational::new(); max(0, hi - lo) as usize];
        for (n, c) in a.raw_terms() {
            if n < hi {
                coeffs[(n - lo) as usize] += c;
            }
        }
        for (n, c) in b.raw_terms() {
            if n < hi {
                if negate {
                    coeffs[(n - lo) as usize] -= c;
                } else {
                    coeffs[(n - lo) as usize] += c;
                }
            }
        }
        let mut s = Series { denom: a.denom, lo, coeffs, trunc };
        s.normalize();
        s
    }

    pub fn add(&self, other: &Series) -> Series {
        self.add_impl(other, false)
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add_impl(other, true)
    }

    pub fn neg(&self) -> Series {
        let mut s = self.clone();
        for c in s.coeffs.iter_mut() {
            *c = -c.clone();
        }
        s
    }

    pub fn scale(&self, c: &Rational) -> Series {
        if *c == 0 {
            return Series { denom: self.denom, lo: self.trunc, coeffs: Vec::new(), trunc: self.trunc };
        }
        let mut s = self.clone();
        for x in s.coeffs.iter_mut() {
            *x *= c;
        }
        s
    }

    /// Multiplication by a monomial shifts exponents and the order exactly.
    pub fn mul_monomial(&self, m: &Monomial) -> Series {
        if m.coeff == 0 {
            let t = Rational::from(&self.trunc() + &m.exp);
            return Series::zero_to(&t);
        }
        let d = lcm(self.denom, exp_den(&m.exp));
        let mut s = self.scale(&m.coeff).rescaled(d);
        let e = to_units(&m.exp, d).expect("exponent fits in i64");
        s.lo += e;
        s.trunc += e;
        if s.coeffs.is_empty() {
            s.lo = s.trunc;
        }
        s
    }

    /// Cauchy product. The result is known up to
    /// `min(val(a) + ord(b), val(b) + ord(a))`.
    pub fn mul(&self, other: &Series) -> Series {
        let (a, b) = Series::aligned(self, other);
        let trunc = min(a.val_units() + b.trunc, b.val_units() + a.trunc);
        if a.is_zero() || b.is_zero() {
            return Series { denom: a.denom, lo: trunc, coeffs: Vec::new(), trunc };
        }
        let lo = a.lo + b.lo;
        if lo >= trunc {
            return Series { denom: a.denom, lo: trunc, coeffs: Vec::new(), trunc };
        }
        let len = min(trunc - lo, (a.coeffs.len() + b.coeffs.len() - 1) as i64) as usize;
        let mut coeffs = vec![Rational::new(); len];
        let bnz: Vec<(usize, &Rational)> = b.coeffs.iter().enumerate().filter(|(_, c)| **c != 0).collect();
        let mut prod = Rational::new();
        for (i, x) in a.coeffs.iter().enumerate() {
            if i >= len {
                break;
            }
            if *x == 0 {
                continue;
            }
            for &(j, y) in &bnz {
                let k = i + j;
                if k >= len {
                    break;
                }
                rug::Assign::assign(&mut prod, x * y);
                coeffs[k] += &prod;
            }
        }
        let mut s = Series { denom: a.denom, lo, coeffs, trunc };
        s.normalize();
        s
    }

    /// Multiplicative inverse; the order becomes `ord - 2 val`.
    pub fn invert(&self) -> Result<Series> {
        if self.is_zero() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let d = self.denom;
        let v = self.lo;
        let len = (self.trunc - v) as usize;
        let c0inv = self.coeffs[0].clone().recip();
        let nz: Vec<(usize, &Rational)> =
            self.coeffs.iter().enumerate().skip(1).filter(|(_, c)| **c != 0).collect();
        let mut out: Vec<Rational> = Vec::with_capacity(len);
        out.push(c0inv.clone());
        let mut acc = Rational::new();
        let mut prod = Rational::new();
        for k in 1..len {
            rug::Assign::assign(&mut acc, 0);
            for &(j, c) in &nz {
                if j > k {
                    break;
                }
                rug::Assign::assign(&mut prod, c * &out[k - j]);
                acc += &prod;
            }
            acc *= &c0inv;
            out.push(-acc.clone());
        }
        let mut s = Series { denom: d, lo: -v, coeffs: out, trunc: self.trunc - 2 * v };
        s.normalize();
        Ok(s)
    }

    pub fn pow(&self, k: i64) -> Result<Series> {
        let base = if k < 0 { self.invert()? } else { self.clone() };
        let mut k = k.unsigned_abs();
        let mut result: Option<Series> = None;
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => sq.clone(),
                    Some(r) => r.mul(&sq),
                });
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(result.unwrap_or_else(|| {
            let v = self.valuation().unwrap_or_default();
            Series::monomial(&Monomial::one(), &Rational::from(&self.trunc() - &v))
        }))
    }

    /// Substitutes `q -> sign * q^m` with `m >= 1`.
    pub fn substitute(&self, sign: i64, m: i64) -> Result<Series> {
        assert!(m >= 1, "substitution power must be positive");
        assert!(sign == 1 || sign == -1, "sign must be +1 or -1");
        let mut terms = Vec::with_capacity(self.coeffs.len());
        for (n, c) in self.raw_terms() {
            let mut c = c.clone();
            if sign < 0 {
                if n % self.denom != 0 {
                    return Err(Error::FractionalExponentNegation(Rational::from((n, self.denom)).to_string()));
                }
                if (n / self.denom).rem_euclid(2) == 1 {
                    c = -c;
                }
            }
            terms.push((n * m, c));
        }
        Ok(Series::from_terms(self.denom, terms, self.trunc * m))
    }

    /// In-place multiplication by `1 - c q^(e/D)` for `e > 0` in units of `D`.
    fn mul_binomial_units(&mut self, c: &Rational, e: i64) {
        debug_assert!(e > 0);
        if self.is_zero() || *c == 0 {
            return;
        }
        let hi = min(self.trunc, self.lo + self.coeffs.len() as i64 + e);
        let len = (hi - self.lo) as usize;
        self.coeffs.resize(len, Rational::new());
        let e = e as usize;
        let mut prod = Rational::new();
        for k in (e..len).rev() {
            if self.coeffs[k - e] != 0 {
                rug::Assign::assign(&mut prod, c * &self.coeffs[k - e]);
                self.coeffs[k] -= &prod;
            }
        }
        self.normalize();
    }

    /// In-place division by `1 - c q^(e/D)` for `e > 0` in units of `D`.
    fn div_binomial_units(&mut self, c: &Rational, e: i64) {
        debug_assert!(e > 0);
        if self.is_zero() || *c == 0 {
            return;
        }
        let len = (self.trunc - self.lo) as usize;
        self.coeffs.resize(len, Rational::new());
        let e = e as usize;
        let mut prod = Rational::new();
        for k in e..len {
            if self.coeffs[k - e] != 0 {
                rug::Assign::assign(&mut prod, c * &self.coeffs[k - e]);
                self.coeffs[k] += &prod;
            }
        }
        self.normalize();
    }

    /// Multiplies by `1 - c q^e`.
    pub fn mul_binomial(&self, c: &Rational, e: &Rational) -> Series {
        let d = lcm(self.denom, exp_den(e));
        let mut s = self.rescaled(d);
        let eu = to_units(e, d).expect("exponent fits in i64");
        match eu.cmp(&0) {
            std::cmp::Ordering::Greater => {
                s.mul_binomial_units(c, eu);
                s
            }
            std::cmp::Ordering::Equal => s.scale(&Rational::from(1 - c.clone())),
            std::cmp::Ordering::Less => {
                // 1 - c q^e = -c q^e (1 - c^{-1} q^{-e})
                let cinv = c.clone().recip();
                s.mul_binomial_units(&cinv, -eu);
                s.mul_monomial(&Monomial::new(-c.clone(), e.clone()))
            }
        }
    }

    /// Divides by `1 - c q^e`.
    pub fn div_binomial(&self, c: &Rational, e: &Rational) -> Result<Series> {
        let d = lcm(self.denom, exp_den(e));
        let mut s = self.rescaled(d);
        let eu = to_units(e, d).expect("exponent fits in i64");
        match eu.cmp(&0) {
            std::cmp::Ordering::Greater => {
                s.div_binomial_units(c, eu);
                Ok(s)
            }
            std::cmp::Ordering::Equal => {
                if *c == 1 {
                    return Err(Error::ZeroLeadingCoefficient);
                }
                Ok(s.scale(&Rational::from(1 - c.clone()).recip()))
            }
            std::cmp::Ordering::Less => {
                if *c == 0 {
                    return Ok(s);
                }
                // 1/(1 - c q^e) = -c^{-1} q^{-e} / (1 - c^{-1} q^{-e})
                let cinv = c.clone().recip();
                let mut t = s.mul_monomial(&Monomial::new(-cinv.clone(), -e.clone()));
                let d2 = t.denom;
                let eu2 = to_units(&-e.clone(), d2).expect("exponent fits in i64");
                t.div_binomial_units(&cinv, eu2);
                Ok(t)
            }
        }
    }

    /// Smallest integer exponent at or above the truncation order.
    pub fn trunc_ceil(&self) -> i64 {
        self.trunc.div_euclid(self.denom) + i64::from(self.trunc.rem_euclid(self.denom) != 0)
    }

    /// True when every nonzero term has an integer exponent.
    pub fn has_integer_exponents(&self) -> bool {
        self.raw_terms().all(|(n, _)| n % self.denom == 0)
    }

    /// First nonzero term at a fractional exponent.
    pub fn first_fractional(&self) -> Option<Rational> {
        self.raw_terms().find(|(n, _)| n % self.denom != 0).map(|(n, _)| Rational::from((n, self.denom)))
    }
}

impl PartialEq for Series {
    fn eq(&self, other: &Series) -> bool {
        let (a, b) = Series::aligned(self, other);
        a.trunc == b.trunc && a.lo == b.lo && a.coeffs == b.coeffs
    }
}

impl Eq for Series {}

impl<'a> Add<&'a Series> for &'a Series {
    type Output = Series;
    fn add(self, rhs: &'a Series) -> Series {
        Series::add(self, rhs)
    }
}

impl<'a> Sub<&'a Series> for &'a Series {
    type Output = Series;
    fn sub(self, rhs: &'a Series) -> Series {
        Series::sub(self, rhs)
    }
}

impl<'a> Mul<&'a Series> for &'a Series {
    type Output = Series;
    fn mul(self, rhs: &'a Series) -> Series {
        Series::mul(self, rhs)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series::neg(self)
    }
}

fn fmt_exp(e: &Rational) -> String {
    if *e.denom() == 1 {
        e.numer().to_string()
    } else {
        format!("({})", e)
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.terms() {
            let neg = *c < 0;
            let mag = Rational::from(c.abs_ref());
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            if e == 0 {
                write!(f, "{}", mag)?;
                continue;
            }
            if mag != 1 {
                write!(f, "{}*", mag)?;
            }
            if e == 1 {
                write!(f, "q")?;
            } else {
                write!(f, "q^{}", fmt_exp(&e))?;
            }
        }
        if !first {
            write!(f, " + ")?;
        }
        write!(f, "O(q^{})", fmt_exp(&self.trunc()))
    }
}

/// Factor `j` of a Pochhammer product: `a s^j` as coefficient and exponent.
fn factor(a: &Monomial, s: &Monomial, j: i64) -> Monomial {
    let cs = if j >= 0 {
        Rational::from(rug::ops::Pow::pow(&s.coeff, j as u32))
    } else {
        Rational::from(rug::ops::Pow::pow(&s.coeff, (-j) as u32)).recip()
    };
    Monomial {
        coeff: Rational::from(&a.coeff * &cs),
        exp: Rational::from(&a.exp + Rational::from(&s.exp * Integer::from(j))),
    }
}

/// `(a; s)_n` truncated at `q^trunc`.
///
/// Finite lengths use `prod_{j=0}^{n-1} (1 - a s^j)` for `n >= 0` and
/// `prod_{j=1}^{|n|} (1 - a s^{-j})^{-1}` for `n < 0`.
pub fn pochhammer(a: &Monomial, s: &Monomial, n: PochLength, trunc: &Rational) -> Result<Series> {
    if a.coeff == 0 {
        return Ok(Series::monomial(&Monomial::one(), trunc));
    }
    match n {
        PochLength::Finite(len) if len >= 0 => {
            let factors: Vec<Monomial> = (0..len).map(|j| factor(a, s, j)).collect();
            product_of_binomials(&factors, trunc)
        }
        PochLength::Finite(len) => {
            if s.coeff == 0 {
                return Err(Error::PoleInNegativeIndex);
            }
            let factors: Vec<Monomial> = (1..=-len).map(|j| factor(a, s, -j)).collect();
            if factors.iter().any(|f| f.exp == 0 && f.coeff == 1) {
                return Err(Error::PoleInNegativeIndex);
            }
            quotient_of_binomials(&factors, trunc)
        }
        PochLength::Infinite => {
            if s.exp <= 0 {
                return Err(Error::DivergentProduct);
            }
            // Every factor at or beyond the order is 1 + O(q^trunc); the
            // negative-exponent factors are finite in number.
            let mut factors = Vec::new();
            let mut j = 0i64;
            loop {
                let f = factor(a, s, j);
                if f.exp >= *trunc && f.exp > 0 {
                    break;
                }
                factors.push(f);
                j += 1;
            }
            let neg: Rational = factors.iter().filter(|f| f.exp < 0).map(|f| f.exp.clone()).sum();
            let bound = Rational::from(trunc - &neg);
            loop {
                let f = factor(a, s, j);
                if f.exp >= bound {
                    break;
                }
                factors.push(f);
                j += 1;
            }
            product_of_binomials(&factors, trunc)
        }
    }
}

/// `prod (1 - f)` over monomials `f`, truncated at `q^trunc`.
pub fn product_of_binomials(factors: &[Monomial], trunc: &Rational) -> Result<Series> {
    let neg: Rational = factors.iter().filter(|f| f.exp < 0 && f.coeff != 0).map(|f| f.exp.clone()).sum();
    let start = Rational::from(trunc - &neg);
    let mut acc = Series::monomial(&Monomial::one(), &start);
    for f in factors {
        if f.coeff == 0 {
            continue;
        }
        if f.exp > 0 && f.exp >= acc.trunc() {
            continue;
        }
        acc = acc.mul_binomial(&f.coeff, &f.exp);
    }
    Ok(acc.truncate(trunc))
}

/// `prod (1 - f)^{-1}` over monomials `f`, truncated at `q^trunc`.
pub fn quotient_of_binomials(factors: &[Monomial], trunc: &Rational) -> Result<Series> {
    let neg: Rational = factors.iter().filter(|f| f.exp < 0 && f.coeff != 0).map(|f| f.exp.clone()).sum();
    let start = Rational::from(trunc + &neg);
    let mut acc = Series::monomial(&Monomial::one(), &start);
    for f in factors {
        if f.coeff == 0 {
            continue;
        }
        if f.exp > 0 && f.exp >= acc.trunc() {
            continue;
        }
        acc = acc.div_binomial(&f.coeff, &f.exp).map_err(|_| Error::PoleInNegativeIndex)?;
    }
    Ok(acc.truncate(trunc))
}

/// Exact valuation of `(a; s)_n` for finite `n`, or `None` when the symbol
/// vanishes identically.
pub fn pochhammer_valuation(a: &Monomial, s: &Monomial, n: i64) -> Result<Option<Rational>> {
    if a.coeff == 0 {
        return Ok(Some(Rational::new()));
    }
    let mut v = Rational::new();
    let range: Box<dyn Iterator<Item = i64>> = if n >= 0 { Box::new(0..n) } else { Box::new(n..0) };
    for j in range {
        let f = factor(a, s, j);
        if f.exp == 0 && f.coeff == 1 {
            if n >= 0 {
                return Ok(None);
            }
            return Err(Error::PoleInNegativeIndex);
        }
        if f.exp < 0 {
            v += &f.exp;
        }
    }
    Ok(Some(if n >= 0 { v } else { -v }))
}

/// `(q; q)_inf` to `q^trunc` from Euler's pentagonal number series.
pub fn euler_pentagonal(trunc: i64) -> Series {
    let mut terms = Vec::new();
    let mut k = 0i64;
    loop {
        let e1 = k * (3 * k - 1) / 2;
        let e2 = k * (3 * k + 1) / 2;
        if e1 >= trunc && e2 >= trunc {
            break;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        terms.push((e1, Rational::from(sign)));
        if k > 0 {
            terms.push((e2, Rational::from(sign)));
        }
        k += 1;
    }
    Series::from_terms(1, terms, trunc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(e: i64) -> Monomial {
        Monomial::q_pow(e, 1)
    }

    fn r(n: i64) -> Rational {
        Rational::from(n)
    }

    #[test]
    fn finite_product_expands() {
        let p = pochhammer(&q(1), &q(1), PochLength::Finite(3), &r(20)).unwrap();
        let expected = Series::from_terms(
            1,
            vec![(0, r(1)), (1, r(-1)), (2, r(-1)), (4, r(1)), (5, r(1)), (6, r(-1))],
            20,
        );
        assert_eq!(p, expected);
    }

    #[test]
    fn negative_index_half() {
        let p = pochhammer(&Monomial::signed(-1, 1), &q(1), PochLength::Finite(-1), &r(10)).unwrap();
        assert_eq!(p.coeff_int(0).unwrap(), Rational::from((1, 2)));
        for e in 1..10 {
            assert_eq!(p.coeff_int(e).unwrap(), 0);
        }
    }

    #[test]
    fn euler_product_matches_pentagonal() {
        let p = pochhammer(&q(1), &q(1), PochLength::Infinite, &r(200)).unwrap();
        assert_eq!(p, euler_pentagonal(200));
    }

    #[test]
    fn invert_shifted_binomial() {
        let s = Series::from_terms(1, vec![(1, r(1)), (2, r(-1))], 12);
        let inv = s.invert().unwrap();
        assert_eq!(inv.valuation(), Some(r(-1)));
        assert_eq!(inv.trunc(), r(10));
        for e in -1..10 {
            assert_eq!(inv.coeff_int(e).unwrap(), 1);
        }
    }

    #[test]
    fn divergent_infinite_product() {
        let e = pochhammer(&q(1), &Monomial::q_pow(0, 1), PochLength::Infinite, &r(5));
        assert_eq!(e, Err(Error::DivergentProduct));
        let e = pochhammer(&q(1), &Monomial::q_pow(-1, 1), PochLength::Infinite, &r(5));
        assert_eq!(e, Err(Error::DivergentProduct));
    }

    #[test]
    fn pole_in_negative_index() {
        let e = pochhammer(&q(1), &q(1), PochLength::Finite(-2), &r(5));
        assert_eq!(e, Err(Error::PoleInNegativeIndex));
    }

    #[test]
    fn invert_zero_fails() {
        assert_eq!(Series::zero(5).invert(), Err(Error::ZeroLeadingCoefficient));
    }

    #[test]
    fn negation_of_fractional_exponent_fails() {
        let s = Series::monomial(&Monomial::q_pow(1, 3), &r(4));
        assert!(matches!(s.substitute(-1, 1), Err(Error::FractionalExponentNegation(_))));
        assert!(s.substitute(1, 3).unwrap().has_integer_exponents());
    }

    #[test]
    fn beyond_truncation() {
        let s = Series::one(5);
        assert!(s.coeff_int(4).is_ok());
        assert!(matches!(s.coeff_int(5), Err(Error::BeyondTruncation { .. })));
    }

    #[test]
    fn display_is_readable() {
        let s = Series::from_terms(3, vec![(0, r(1)), (1, r(-2)), (3, r(1))], 6);
        assert_eq!(s.to_string(), "1 - 2*q^(1/3) + q + O(q^2)");
    }

    #[test]
    fn monomial_shift_is_exact() {
        let s = Series::one(10).mul_monomial(&Monomial::new(3, Rational::from((-1, 24))));
        assert_eq!(s.trunc(), Rational::from((239, 24)));
        assert_eq!(s.coefficient(&Rational::from((-1, 24))).unwrap(), 3);
    }

    #[test]
    fn divided_binomial_is_geometric() {
        let s = Series::one(30).div_binomial(&r(2), &r(3)).unwrap();
        for k in 0..10 {
            assert_eq!(s.coeff_int(3 * k).unwrap(), Rational::from(Integer::from(1) << k as u32));
            assert_eq!(s.coeff_int(3 * k + 1).unwrap(), 0);
        }
    }
}
