//! Product expressions: sums of rational multiples of `q`-power prefactors
//! times products of classical forms and infinite q-Pochhammer symbols.

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{self, FormId, FormTag};
use crate::numeric::{Cx, QPoint};
use crate::rat;
use crate::series::{ceil_i64, floor_i64, pochhammer, Monomial, PochLength, Series};

/// A multiplicative building block of a product expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "atom", rename_all = "snake_case")]
pub enum Atom {
    /// A classical form from the forms module.
    Form { form: FormTag },
    /// `(q^m; q^m)_inf`.
    Euler { m: i64 },
    /// `(sign q^offset; q^step)_inf`.
    Poch { sign: i64, offset: i64, step: i64 },
    /// `(sign q^offset; q^step)(sign q^(step-offset); q^step)(q^step; q^step)`.
    Jtp { sign: i64, offset: i64, step: i64 },
}

fn one() -> i64 {
    1
}

/// An atom at `sign * q^power`, raised to `exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub atom: Atom,
    #[serde(default = "one")]
    pub sign: i64,
    #[serde(default = "one")]
    pub power: i64,
    #[serde(default = "one")]
    pub exponent: i64,
}

impl Factor {
    pub fn new(atom: Atom) -> Self {
        Factor { atom, sign: 1, power: 1, exponent: 1 }
    }

    pub fn at(atom: Atom, sign: i64, power: i64) -> Self {
        Factor { atom, sign, power, exponent: 1 }
    }

    pub fn pow(mut self, e: i64) -> Self {
        self.exponent = e;
        self
    }

    fn check(&self) -> Result<()> {
        if self.power < 1 || (self.sign != 1 && self.sign != -1) {
            return Err(Error::InvalidExpression(format!("bad scaling ({}, {})", self.sign, self.power)));
        }
        match self.atom {
            Atom::Euler { m } if m < 1 => Err(Error::InvalidExpression("euler modulus".into())),
            Atom::Poch { offset, step, .. } if offset < 1 || step < 1 => {
                Err(Error::InvalidExpression("infinite product needs positive offset and step".into()))
            }
            Atom::Jtp { offset, step, .. } if offset < 1 || offset >= step => {
                Err(Error::InvalidExpression("triple product needs 0 < offset < step".into()))
            }
            Atom::Form { form: FormTag::Eta(_) } if self.sign < 0 => {
                Err(Error::InvalidExpression("eta at a negated argument".into()))
            }
            _ => Ok(()),
        }
    }

    fn base_series(&self, trunc: i64) -> Result<Series> {
        let inner = (trunc + self.power - 1).div_euclid(self.power).max(1);
        let s = match self.atom {
            Atom::Form { form } => return FormId::at(form, self.sign, self.power).series(trunc),
            Atom::Euler { m } => forms::euler_series(m, inner),
            Atom::Poch { sign, offset, step } => pochhammer(
                &Monomial::signed(sign, offset),
                &Monomial::q_pow(step, 1),
                PochLength::Infinite,
                &Rational::from(inner),
            )?,
            Atom::Jtp { sign, offset, step } => forms::jtp_series(sign, offset, step, inner)?,
        };
        Ok(s.substitute(self.sign, self.power)?.truncate_int(trunc))
    }
}

/// `coeff * q^qexp * prod factors`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductTerm {
    #[serde(with = "rat")]
    pub coeff: Rational,
    #[serde(with = "rat", default)]
    pub qexp: Rational,
    pub factors: Vec<Factor>,
}

impl ProductTerm {
    pub fn new(coeff: impl Into<Rational>, qexp: impl Into<Rational>, factors: Vec<Factor>) -> Self {
        ProductTerm { coeff: coeff.into(), qexp: qexp.into(), factors }
    }
}

/// A finite sum of product terms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductExpr {
    pub terms: Vec<ProductTerm>,
}

impl ProductExpr {
    pub fn new(terms: Vec<ProductTerm>) -> Self {
        ProductExpr { terms }
    }

    pub fn single(term: ProductTerm) -> Self {
        ProductExpr { terms: vec![term] }
    }

    pub fn scaled(&self, c: &Rational) -> ProductExpr {
        let terms = self
            .terms
            .iter()
            .map(|t| ProductTerm { coeff: Rational::from(&t.coeff * c), ..t.clone() })
            .collect();
        ProductExpr { terms }
    }

    pub fn times_monomial(&self, c: &Rational, e: &Rational) -> ProductExpr {
        let terms = self
            .terms
            .iter()
            .map(|t| ProductTerm {
                coeff: Rational::from(&t.coeff * c),
                qexp: Rational::from(&t.qexp + e),
                factors: t.factors.clone(),
            })
            .collect();
        ProductExpr { terms }
    }

    /// The same expression with `q` replaced by `-q`.
    pub fn negated_argument(&self) -> Result<ProductExpr> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if *t.qexp.denom() != 1 {
                return Err(Error::FractionalExponentNegation(t.qexp.to_string()));
            }
            let odd = t.qexp.numer().is_odd();
            let coeff = if odd { -t.coeff.clone() } else { t.coeff.clone() };
            let factors = t
                .factors
                .iter()
                .map(|f| {
                    let s = if f.power % 2 == 1 { -f.sign } else { f.sign };
                    Factor { sign: s, ..*f }
                })
                .collect();
            terms.push(ProductTerm { coeff, qexp: t.qexp.clone(), factors });
        }
        Ok(ProductExpr { terms })
    }

    pub fn add(&self, other: &ProductExpr) -> ProductExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        ProductExpr { terms }
    }

    /// Exact expansion, known at least up to `q^trunc`.
    pub fn expand(&self, trunc: i64) -> Result<Series> {
        let mut acc = Series::zero(trunc);
        for t in &self.terms {
            acc = acc.add(&expand_term(t, trunc)?);
        }
        Ok(acc.truncate_int(trunc).reduced())
    }

    /// Numeric value at `pt`.
    pub fn eval(&self, pt: &QPoint) -> Result<Cx> {
        let mut acc = Cx::zero(pt.prec());
        let mut peak = f64::NEG_INFINITY;
        for t in &self.terms {
            let v = eval_term(t, pt)?;
            peak = peak.max(v.log2_abs());
            acc.add_assign(&v);
        }
        // Several terms can cancel near a root of unity.
        if self.terms.len() > 1 {
            crate::catalog::merge_loss(peak, &acc);
        }
        Ok(acc)
    }
}

fn expand_term(t: &ProductTerm, trunc: i64) -> Result<Series> {
    for f in &t.factors {
        f.check()?;
    }
    let target = Rational::from(Rational::from(trunc) - &t.qexp);
    let mut headroom = 2i64;
    loop {
        let inner = floor_i64(&Rational::from(&target + headroom)).max(1);
        let mut acc: Option<Series> = None;
        for f in &t.factors {
            let s = f.base_series(inner)?.pow(f.exponent)?;
            acc = Some(match acc {
                None => s,
                Some(a) => a.mul(&s),
            });
        }
        let body = acc.unwrap_or_else(|| Series::one(inner));
        if body.trunc() >= target {
            let m = Monomial::new(t.coeff.clone(), t.qexp.clone());
            return Ok(body.mul_monomial(&m).truncate_int(trunc));
        }
        let missing = Rational::from(&target - &body.trunc());
        headroom += ceil_i64(&missing).max(1) + 1;
    }
}

fn factor_value(f: &Factor, pt: &QPoint) -> Result<Cx> {
    let sp = pt.scaled(f.sign, f.power);
    match f.atom {
        Atom::Form { form } => FormId::new(form).value(&sp),
        Atom::Euler { m } => forms::euler_value(&sp.q.powi(m)),
        Atom::Poch { sign, offset, step } => forms::poch_value(&sp.q, sign, offset, step),
        Atom::Jtp { sign, offset, step } => forms::jtp_value(&sp.q, sign, offset, step),
    }
}

fn eval_term(t: &ProductTerm, pt: &QPoint) -> Result<Cx> {
    for f in &t.factors {
        f.check()?;
    }
    let mut acc = pt.pow(&t.qexp)?.scale(&t.coeff);
    // Pair (s q^a; q^N) with (s q^(N-a); q^N) into a triple product quotient.
    let mut used = vec![false; t.factors.len()];
    for i in 0..t.factors.len() {
        if used[i] {
            continue;
        }
        let fi = t.factors[i];
        if let Atom::Poch { sign, offset, step } = fi.atom {
            if 2 * offset != step && offset != step {
                let partner = (i + 1..t.factors.len()).find(|&j| {
                    !used[j]
                        && matches!(t.factors[j].atom, Atom::Poch { sign: s2, offset: o2, step: n2 }
                            if s2 == sign && n2 == step && o2 == step - offset)
                        && t.factors[j].sign == fi.sign
                        && t.factors[j].power == fi.power
                        && t.factors[j].exponent == fi.exponent
                });
                if let Some(j) = partner {
                    used[i] = true;
                    used[j] = true;
                    let sp = pt.scaled(fi.sign, fi.power);
                    let v = forms::jtp_value(&sp.q, sign, offset, step)?
                        .div(&forms::euler_value(&sp.q.powi(step))?);
                    acc = acc.mul(&v.powi(fi.exponent));
                    continue;
                }
            }
        }
        used[i] = true;
        acc = acc.mul(&factor_value(&fi, pt)?.powi(fi.exponent));
    }
    Ok(acc)
}

/// Shorthands for building expressions in code.
pub mod build {
    use super::*;

    pub fn form(tag: FormTag) -> Factor {
        Factor::new(Atom::Form { form: tag })
    }

    pub fn form_at(tag: FormTag, sign: i64, power: i64) -> Factor {
        Factor::at(Atom::Form { form: tag }, sign, power)
    }

    pub fn euler(m: i64) -> Factor {
        Factor::new(Atom::Euler { m })
    }

    pub fn poch(sign: i64, offset: i64, step: i64) -> Factor {
        Factor::new(Atom::Poch { sign, offset, step })
    }

    pub fn term(coeff: i64, qexp: Rational, factors: Vec<Factor>) -> ProductTerm {
        ProductTerm::new(coeff, qexp, factors)
    }
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    #[test]
    fn theta4_as_eta_quotient() {
        let e = ProductExpr::single(ProductTerm::new(
            1,
            0,
            vec![form(FormTag::Eta(1)).pow(2), form(FormTag::Eta(2)).pow(-1)],
        ));
        let s = e.expand(60).unwrap();
        assert!(s.has_integer_exponents());
        assert_eq!(s, forms::theta4_series(60));
    }

    #[test]
    fn negated_argument_matches_substitution() {
        let e = ProductExpr::single(ProductTerm::new(
            2,
            1,
            vec![form_at(FormTag::K, 1, 2), form_at(FormTag::HProd, 1, 4), poch(-1, 1, 2)],
        ));
        let a = e.negated_argument().unwrap().expand(80).unwrap();
        let b = e.expand(80).unwrap().substitute(-1, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn numeric_matches_expansion() {
        let e = ProductExpr::new(vec![
            ProductTerm::new(1, 0, vec![poch(1, 1, 6), poch(1, 5, 6), poch(1, 1, 2).pow(2), euler(6)]),
            ProductTerm::new(3, Rational::from((1, 3)), vec![form(FormTag::Eta(4)).pow(3), form(FormTag::Eta(2)).pow(-2)]),
        ]);
        let s = e.expand(200).unwrap();
        let tau = Cx::from_f64(0.1, 0.3, 160);
        let pt = QPoint::from_tau(tau).unwrap();
        let a = e.eval(&pt).unwrap();
        let b = crate::numeric::eval_series(&s, &pt).unwrap();
        assert!(a.sub(&b).log2_abs() < -100.0, "{a} vs {b}");
    }
}
