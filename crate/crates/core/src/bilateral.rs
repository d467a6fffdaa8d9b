//! Bilateral series `B(M; q)`, built as a linear combination of catalog
//! functions, as a direct two-sided sum, and as a modular product.

use std::collections::HashMap;
use std::sync::Mutex;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::catalog::{sum_rule, Accuracy, Catalog, CombTerm, Combination, PochAtom, QuadExp, Source, TermRule};
use crate::error::{Error, Result};
use crate::expr::build::{euler, form, form_at, poch};
use crate::expr::{Factor, ProductExpr, ProductTerm};
use crate::forms::FormTag;
use crate::numeric::{Cx, QPoint, TailPolicy};
use crate::rat;
use crate::series::Series;

/// Standard `B(M)` or the modified `𝓑(M)` used for `χ0`, `χ1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Modified,
}

/// Whether the term rule of the function may be summed over all of `Z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectSupport {
    /// Summable; `offset` is added to the two-sided sum of the term rule.
    Supported {
        #[serde(with = "rat")]
        offset: Rational,
    },
    /// The negative-index terms diverge.
    Nonconvergent,
}

/// Recipe for one bilateral series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilateralRecipe {
    /// Key, `B:` followed by the catalog name.
    pub name: String,
    pub function: String,
    pub variant: Variant,
    pub combination: Combination,
    pub combination_source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_source: Option<Source>,
    pub direct: DirectSupport,
}

fn t(c: impl Into<Rational>, f: &str) -> CombTerm {
    CombTerm::new(c, f)
}

fn half() -> Rational {
    Rational::from((1, 2))
}

fn comb(terms: Vec<CombTerm>, constant: i64) -> Combination {
    Combination::new(terms, constant)
}

fn supported(offset: i64) -> DirectSupport {
    DirectSupport::Supported { offset: Rational::from(offset) }
}

fn term(c: impl Into<Rational>, qexp: impl Into<Rational>, factors: Vec<Factor>) -> ProductTerm {
    ProductTerm::new(c, qexp, factors)
}

/// Product for `B(f0)`: `ϑ4 G + 4 q K(q^2) H(q^4)`.
pub fn product_f0() -> ProductExpr {
    ProductExpr::new(vec![
        term(1, 0, vec![form(FormTag::Theta4), form(FormTag::GProd)]),
        term(4, 1, vec![form_at(FormTag::K, 1, 2), form_at(FormTag::HProd, 1, 4)]),
    ])
}

/// Product for `B(f1)`: `-ϑ4 H + 4 K(q^2) G(q^4)`.
pub fn product_f1() -> ProductExpr {
    ProductExpr::new(vec![
        term(-1, 0, vec![form(FormTag::Theta4), form(FormTag::HProd)]),
        term(4, 0, vec![form_at(FormTag::K, 1, 2), form_at(FormTag::GProd, 1, 4)]),
    ])
}

/// Product for `B(F0)`: `(q^5;q^5) G(q^2) H(q) / H(q^2) - q K(q^5) H(q^2)`.
pub fn product_cap_f0() -> ProductExpr {
    ProductExpr::new(vec![
        term(
            1,
            0,
            vec![
                euler(5),
                form_at(FormTag::GProd, 1, 2),
                form(FormTag::HProd),
                form_at(FormTag::HProd, 1, 2).pow(-1),
            ],
        ),
        term(-1, 1, vec![form_at(FormTag::K, 1, 5), form_at(FormTag::HProd, 1, 2)]),
    ])
}

/// Product for `B(F1)`: `3 K(q^5) G(q^2) - H(q)^2 (q^5;q^5) / G(q)`.
pub fn product_cap_f1() -> ProductExpr {
    ProductExpr::new(vec![
        term(3, 0, vec![form_at(FormTag::K, 1, 5), form_at(FormTag::GProd, 1, 2)]),
        term(-1, 0, vec![form(FormTag::HProd).pow(2), euler(5), form(FormTag::GProd).pow(-1)]),
    ])
}

/// `q^(1/24) η(2τ)^7 / (η(τ)^3 η(4τ)^3)`.
pub fn product_phi3() -> ProductExpr {
    ProductExpr::single(term(
        1,
        Rational::from((1, 24)),
        vec![form(FormTag::Eta(2)).pow(7), form(FormTag::Eta(1)).pow(-3), form(FormTag::Eta(4)).pow(-3)],
    ))
}

/// `2 η(4τ)^3 / (q^(1/3) η(2τ)^2)`.
pub fn product_nu3() -> ProductExpr {
    ProductExpr::single(term(
        2,
        Rational::from((-1, 3)),
        vec![form(FormTag::Eta(4)).pow(3), form(FormTag::Eta(2)).pow(-2)],
    ))
}

/// `(q;q^2)^2 (q;q^6)(q^5;q^6)(q^6;q^6) + 2 (-q;q^2)^2 (-q;q^6)(-q^5;q^6)(q^6;q^6)`.
pub fn product_lambda6() -> ProductExpr {
    ProductExpr::new(vec![
        term(1, 0, vec![poch(1, 1, 2).pow(2), poch(1, 1, 6), poch(1, 5, 6), euler(6)]),
        term(2, 0, vec![poch(-1, 1, 2).pow(2), poch(-1, 1, 6), poch(-1, 5, 6), euler(6)]),
    ])
}

/// `3 (q^3;q^3)^3 / ((q;q)(q^2;q^2))`, a single-quotient form of the order-6
/// `B(λ)` product.
pub fn product_lambda6_quotient() -> ProductExpr {
    ProductExpr::single(term(3, 0, vec![euler(3).pow(3), euler(1).pow(-1), euler(2).pow(-1)]))
}

/// `3 q (q^6;q^6)^3 / ((q;q)(q^2;q^2))`, fitted to `B(ψ)` of order 6.
pub fn product_psi6() -> ProductExpr {
    ProductExpr::single(term(3, 1, vec![euler(6).pow(3), euler(1).pow(-1), euler(2).pow(-1)]))
}

/// `2 q (q^8;q^8)^3 / ((q^2;q^2)(q^4;q^4))`, fitted to `B(V1)`.
pub fn product_v1() -> ProductExpr {
    ProductExpr::single(term(2, 1, vec![euler(8).pow(3), euler(2).pow(-1), euler(4).pow(-1)]))
}

/// Built-in recipes.
pub fn builtin_recipes() -> Vec<BilateralRecipe> {
    use Source::{Derived, Paper};
    let std = |f: &str, c: Combination, cs: Source, p: Option<(ProductExpr, Source)>, d: DirectSupport| {
        let (product, product_source) = match p {
            Some((e, s)) => (Some(e), Some(s)),
            None => (None, None),
        };
        BilateralRecipe {
            name: format!("B:{f}"),
            function: f.to_string(),
            variant: Variant::Standard,
            combination: c,
            combination_source: cs,
            product,
            product_source,
            direct: d,
        }
    };
    let h = half;
    let neg_f0 = product_cap_f0().negated_argument().expect("integral exponents");
    let neg_f1 = product_cap_f1()
        .negated_argument()
        .expect("integral exponents")
        .times_monomial(&Rational::from(1), &Rational::from(1));
    let mut v = vec![
        std("5:f0", comb(vec![t(1, "5:f0"), t(2, "5:psi0")], 0), Paper, Some((product_f0(), Paper)), supported(0)),
        std("5:f1", comb(vec![t(1, "5:f1"), t(2, "5:psi1")], 0), Paper, Some((product_f1(), Paper)), supported(0)),
        std(
            "5:psi0",
            comb(vec![t(1, "5:psi0"), t(h(), "5:f0")], 0),
            Paper,
            Some((product_f0().scaled(&h()), Paper)),
            supported(0),
        ),
        std(
            "5:psi1",
            comb(vec![t(1, "5:psi1"), t(h(), "5:f1")], 0),
            Paper,
            Some((product_f1().scaled(&h()), Paper)),
            supported(0),
        ),
        std(
            "5:F0",
            comb(vec![t(1, "5:F0"), t(1, "5:phi0").at(-1, 1)], -1),
            Paper,
            Some((product_cap_f0(), Paper)),
            supported(0),
        ),
        std(
            "5:F1",
            comb(vec![t(1, "5:F1"), t(-1, "5:phi1").at(-1, 1).shifted(-1)], 0),
            Paper,
            Some((product_cap_f1(), Paper)),
            supported(0),
        ),
        std(
            "5:phi0",
            comb(vec![t(1, "5:phi0"), t(1, "5:F0").at(-1, 1)], -1),
            Paper,
            Some((neg_f0, Paper)),
            supported(0),
        ),
        std(
            "5:phi1",
            comb(vec![t(1, "5:phi1"), t(1, "5:F1").at(-1, 1).shifted(1)], 0),
            Paper,
            Some((neg_f1, Paper)),
            supported(0),
        ),
        std("3:phi", comb(vec![t(1, "3:phi"), t(2, "3:psi")], 0), Paper, Some((product_phi3(), Paper)), supported(0)),
        std(
            "3:psi",
            comb(vec![t(1, "3:psi"), t(h(), "3:phi")], 0),
            Paper,
            Some((product_phi3().scaled(&h()), Paper)),
            supported(0),
        ),
        std(
            "3:nu",
            comb(vec![t(1, "3:nu"), t(1, "3:nu").at(-1, 1)], 0),
            Paper,
            Some((product_nu3(), Paper)),
            supported(0),
        ),
    ];
    for (a, b) in [("lambda", "rho"), ("mu", "sigma"), ("phi", "nu"), ("psi", "xi")] {
        let (fa, fb) = (format!("6:{a}"), format!("6:{b}"));
        let prod = match a {
            "lambda" => Some((product_lambda6(), Paper)),
            "psi" => Some((product_psi6(), Derived)),
            _ => None,
        };
        let prod_b = prod.clone().map(|(e, s)| (e.scaled(&h()), s));
        v.push(std(&fa, comb(vec![t(1, &fa), t(2, &fb)], 0), Paper, prod, supported(0)));
        v.push(std(&fb, comb(vec![t(1, &fb), t(h(), &fa)], 0), Paper, prod_b, supported(0)));
    }
    for (a, b) in [("S0", "T0"), ("S1", "T1")] {
        let (fa, fb) = (format!("8:{a}"), format!("8:{b}"));
        v.push(std(&fa, comb(vec![t(1, &fa), t(2, &fb)], 0), Paper, None, supported(0)));
        v.push(std(&fb, comb(vec![t(1, &fb), t(h(), &fa)], 0), Paper, None, supported(0)));
    }
    v.push(std("8:V0", comb(vec![t(1, "8:V0"), t(1, "8:V0").at(-1, 1)], 1), Paper, None, supported(2)));
    v.push(std(
        "8:V1",
        comb(vec![t(1, "8:V1"), t(-1, "8:V1").at(-1, 1)], 0),
        Paper,
        Some((product_v1(), Derived)),
        supported(0),
    ));
    for (chi, cap, phi, sign, shift) in [("5:chi0", "5:F0", "5:phi0", -1, 0), ("5:chi1", "5:F1", "5:phi1", 1, -1)] {
        let product = if cap == "5:F0" { product_cap_f0() } else { product_cap_f1() };
        v.push(BilateralRecipe {
            name: format!("B:{chi}"),
            function: chi.to_string(),
            variant: Variant::Modified,
            combination: comb(
                vec![t(2, &format!("B:{cap}")), t(sign, &format!("B:{phi}")).at(-1, 1).shifted(shift)],
                0,
            ),
            combination_source: Paper,
            product: Some(product),
            product_source: Some(Paper),
            direct: DirectSupport::Nonconvergent,
        });
    }
    v
}

/// How two exact series compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Verified,
    Mismatch,
}

/// First disagreeing coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchDetail {
    #[serde(with = "rat")]
    pub exponent: Rational,
    #[serde(with = "rat")]
    pub lhs: Rational,
    #[serde(with = "rat")]
    pub rhs: Rational,
}

/// Outcome of an exact comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: String,
    pub rhs: String,
    #[serde(with = "rat")]
    pub verified_order: Rational,
    pub first_mismatch: Option<MismatchDetail>,
    pub status: Status,
}

/// Compares two series coefficient-exactly up to their common truncation.
pub fn verify_identity(lhs: &Series, rhs: &Series, min_order: i64) -> Result<IdentityReport> {
    verify_named("lhs", lhs, "rhs", rhs, min_order)
}

/// `verify_identity` with names recorded in the report.
pub fn verify_named(ln: &str, lhs: &Series, rn: &str, rhs: &Series, min_order: i64) -> Result<IdentityReport> {
    let common = std::cmp::min(lhs.trunc(), rhs.trunc());
    if common < min_order {
        return Err(Error::InsufficientTruncation { available: common.to_string(), requested: min_order.to_string() });
    }
    let diff = lhs.truncate(&common).sub(&rhs.truncate(&common));
    let first = diff.terms().next().map(|(e, _)| e);
    let report = match first {
        None => IdentityReport {
            lhs: ln.to_string(),
            rhs: rn.to_string(),
            verified_order: common,
            first_mismatch: None,
            status: Status::Verified,
        },
        Some(e) => {
            let detail = MismatchDetail { lhs: lhs.coefficient(&e)?, rhs: rhs.coefficient(&e)?, exponent: e.clone() };
            IdentityReport {
                lhs: ln.to_string(),
                rhs: rn.to_string(),
                verified_order: e,
                first_mismatch: Some(detail),
                status: Status::Mismatch,
            }
        }
    };
    Ok(report)
}

/// Catalog plus bilateral recipes, with name resolution for combinations.
#[derive(Debug)]
pub struct Registry {
    pub catalog: Catalog,
    recipes: Vec<BilateralRecipe>,
    cache: Mutex<HashMap<String, Series>>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::builtin()
    }
}

impl Registry {
    pub fn builtin() -> Registry {
        Registry::new(Catalog::builtin(), builtin_recipes())
    }

    pub fn new(catalog: Catalog, recipes: Vec<BilateralRecipe>) -> Registry {
        Registry { catalog, recipes, cache: Mutex::new(HashMap::new()) }
    }

    pub fn recipes(&self) -> &[BilateralRecipe] {
        &self.recipes
    }

    pub fn recipes_json(&self) -> String {
        serde_json::to_string_pretty(&self.recipes).expect("recipes serialize")
    }

    /// Recipe by bilateral key (`B:5:f0`) or by function name (`5:f0`).
    pub fn recipe(&self, name: &str) -> Result<&BilateralRecipe> {
        let key = if name.starts_with("B:") { name.to_string() } else { format!("B:{name}") };
        self.recipes.iter().find(|r| r.name == key).ok_or_else(|| Error::UnknownFunction(name.to_string()))
    }

    /// Exact series of a catalog function or a bilateral key.
    pub fn series(&self, name: &str, trunc: i64) -> Result<Series> {
        if name.starts_with("B:") {
            self.bilateral_combination(name, trunc)
        } else {
            self.catalog.expand(name, trunc)
        }
    }

    /// `B(M)` as the recipe's linear combination.
    pub fn bilateral_combination(&self, name: &str, trunc: i64) -> Result<Series> {
        let r = self.recipe(name)?;
        let key = format!("{}@comb", r.name);
        if let Some(s) = self.cached(&key, trunc) {
            return Ok(s);
        }
        let s = r.combination.expand(trunc, &|f, tr| self.series(f, tr))?;
        self.store(&key, &s);
        Ok(s)
    }

    /// `B(M)` as the two-sided sum of the term rule over all integers.
    pub fn bilateral_direct(&self, name: &str, trunc: i64) -> Result<Series> {
        let r = self.recipe(name)?;
        let offset = match &r.direct {
            DirectSupport::Nonconvergent => return Err(Error::NonconvergentBilateral(r.function.clone())),
            DirectSupport::Supported { offset } => offset.clone(),
        };
        let entry = self.catalog.get(&r.function)?;
        let pos = entry.expand(trunc)?;
        let neg = entry.expand_negative(trunc)?;
        Ok(pos.add(&neg).add(&Series::constant(offset, trunc)))
    }

    /// `B(M)` as the recipe's modular product.
    pub fn modular_product(&self, name: &str, trunc: i64) -> Result<Series> {
        let r = self.recipe(name)?;
        let p = r.product.as_ref().ok_or_else(|| Error::NoModularProduct(r.name.clone()))?;
        let key = format!("{}@prod", r.name);
        if let Some(s) = self.cached(&key, trunc) {
            return Ok(s);
        }
        let s = p.expand(trunc)?;
        if let Some(e) = s.first_fractional() {
            return Err(Error::ResidualFractionalExponent { name: r.name.clone(), exponent: e.to_string() });
        }
        self.store(&key, &s);
        Ok(s)
    }

    /// Numeric value of the B-side: the modular product when one is known,
    /// otherwise the linear combination.
    pub fn bilateral_value(&self, name: &str, pt: &QPoint, policy: &TailPolicy, acc: Accuracy) -> Result<Cx> {
        let r = self.recipe(name)?;
        match &r.product {
            Some(p) => p.eval(pt),
            None => self.value(&r.name, pt, policy, acc, true),
        }
    }

    /// Numeric value of a catalog function or bilateral key. With
    /// `use_products`, nested bilateral keys evaluate through their products.
    pub fn value(&self, name: &str, pt: &QPoint, policy: &TailPolicy, acc: Accuracy, use_products: bool) -> Result<Cx> {
        if name.starts_with("B:") {
            let r = self.recipe(name)?;
            if use_products {
                if let Some(p) = &r.product {
                    return p.eval(pt);
                }
            }
            r.combination.eval(pt, &|f, p| self.value(f, p, policy, acc, use_products))
        } else {
            self.catalog.eval_point(name, pt, policy, acc)
        }
    }

    /// The B-side written as a combination of catalog functions only, with
    /// nested bilateral keys expanded.
    pub fn flattened(&self, name: &str) -> Result<Combination> {
        let r = self.recipe(name)?;
        let mut out = Combination::new(vec![], r.combination.constant.clone());
        for term in &r.combination.terms {
            if !term.function.starts_with("B:") {
                out = out.plus(&Combination::new(vec![term.clone()], 0));
                continue;
            }
            // c q^s B(sign q^p) with B = k + sum c_i q^(s_i) F_i(sign_i q^(p_i)).
            let inner = self.flattened(&term.function)?;
            let mut moved = Combination::new(vec![], Rational::from(&inner.constant * &term.coeff));
            for it in &inner.terms {
                let mut x = it.clone();
                x.coeff = Rational::from(&it.coeff * &term.coeff);
                if term.sign < 0 {
                    if *it.qshift.denom() != 1 {
                        return Err(Error::FractionalExponentNegation(it.qshift.to_string()));
                    }
                    if it.qshift.numer().is_odd() {
                        x.coeff = -x.coeff;
                    }
                    if it.power % 2 != 0 {
                        x.sign = -x.sign;
                    }
                }
                x.power = it.power * term.power;
                x.qshift = Rational::from(&it.qshift * term.power) + &term.qshift;
                moved.terms.push(x);
            }
            out = out.plus(&moved);
        }
        Ok(out)
    }

    fn cached(&self, key: &str, trunc: i64) -> Option<Series> {
        let g = self.cache.lock().expect("cache lock");
        g.get(key).filter(|s| s.trunc() >= trunc).map(|s| s.truncate_int(trunc))
    }

    fn store(&self, key: &str, s: &Series) {
        let mut g = self.cache.lock().expect("cache lock");
        let keep = g.get(key).map_or(true, |old| old.trunc() < s.trunc());
        if keep {
            g.insert(key.to_string(), s.clone());
        }
    }
}

/// Auxiliary two-sided and one-sided sums used as independent checks.
pub mod aux {
    use super::*;

    fn pa(sign: i64, off: i64, step: i64, len: (i64, i64), power: i64) -> PochAtom {
        PochAtom::new(sign, (0, off), step, len, power)
    }

    fn cap(trunc: i64) -> usize {
        (8 * trunc + 64) as usize
    }

    /// `2 q sum_{n>=0} q^n (-q^2;q^2)_n`, equal to `2 ψ(q)` (order 3).
    pub fn fine_two_psi(trunc: i64) -> Result<Series> {
        let r = TermRule::new(2, false, QuadExp::new(0, 1, 1, 1), vec![pa(-1, 2, 2, (1, 0), 1)]);
        sum_rule(&r, 0.., trunc, "fine:2psi", cap(trunc))
    }

    /// `sum_{n>=0} (-1)^n (q;q^2)_n`, Abel-summed, equal to `φ(q)/2` (order 3).
    pub fn fine_half_phi(trunc: i64) -> Result<Series> {
        let r = TermRule::new(1, true, QuadExp::new(0, 0, 0, 1), vec![pa(1, 1, 2, (1, 0), 1)]);
        sum_rule(&r, 0.., trunc, "fine:phi/2", cap(trunc))
    }

    /// `sum_{n>=0} q^n (-q;q^2)_n`, equal to `ν(-q)` (order 3).
    pub fn fine_nu_neg(trunc: i64) -> Result<Series> {
        let r = TermRule::new(1, false, QuadExp::new(0, 1, 0, 1), vec![pa(-1, 1, 2, (1, 0), 1)]);
        sum_rule(&r, 0.., trunc, "fine:nu(-q)", cap(trunc))
    }

    fn two_sided(r: &TermRule, trunc: i64, name: &str) -> Result<Series> {
        let pos = sum_rule(r, 0.., trunc, name, cap(trunc))?;
        let neg = sum_rule(r, (i64::MIN + 1..0).rev(), trunc, name, cap(trunc))?;
        Ok(pos.add(&neg))
    }

    /// `sum_{n in Z} q^n (-1;q^2)_n`, equal to `B(φ)` (order 3).
    pub fn psi11_phi(trunc: i64) -> Result<Series> {
        let r = TermRule::new(1, false, QuadExp::new(0, 1, 0, 1), vec![pa(-1, 0, 2, (1, 0), 1)]);
        two_sided(&r, trunc, "1psi1:phi")
    }

    /// `sum_{n in Z} q^n (-q;q^2)_n`, equal to `B(ν)` (order 3).
    pub fn psi11_nu(trunc: i64) -> Result<Series> {
        let r = TermRule::new(1, false, QuadExp::new(0, 1, 0, 1), vec![pa(-1, 1, 2, (1, 0), 1)]);
        two_sided(&r, trunc, "1psi1:nu")
    }

    /// A Watson relation as `(name, combination part, product part)`; the
    /// relation states `combination - product = 0`.
    pub struct Relation {
        pub name: &'static str,
        pub combination: Combination,
        pub product: ProductExpr,
    }

    /// The four relations `C1 .. C4` between `f0, F0, φ0, ψ0`.
    pub fn watson() -> Vec<Relation> {
        let th_g_neg = ProductExpr::single(term(
            1,
            0,
            vec![form_at(FormTag::Theta4, -1, 1), form_at(FormTag::GProd, -1, 1)],
        ));
        let th_g = ProductExpr::single(term(1, 0, vec![form(FormTag::Theta4), form(FormTag::GProd)]));
        let kh = ProductExpr::single(term(1, 1, vec![form_at(FormTag::K, 1, 2), form_at(FormTag::HProd, 1, 4)]));
        vec![
            Relation {
                name: "C1",
                combination: comb(vec![t(1, "5:f0"), t(2, "5:F0").at(1, 2)], -2),
                product: th_g_neg.clone(),
            },
            Relation {
                name: "C2",
                combination: comb(vec![t(1, "5:phi0").at(-1, 2), t(1, "5:psi0")], 0),
                product: th_g_neg,
            },
            Relation {
                name: "C3",
                combination: comb(vec![t(2, "5:phi0").at(-1, 2), t(-1, "5:f0")], 0),
                product: th_g,
            },
            Relation {
                name: "C4",
                combination: comb(vec![t(1, "5:psi0"), t(-1, "5:F0").at(1, 2)], 1),
                product: kh,
            },
        ]
    }

    impl Relation {
        /// Exact value of the relation, identically zero when it holds.
        pub fn series(&self, reg: &Registry, trunc: i64) -> Result<Series> {
            let c = self.combination.expand(trunc, &|f, tr| reg.series(f, tr))?;
            Ok(c.sub(&self.product.expand(trunc)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f0_three_ways() {
        let reg = Registry::builtin();
        let c = reg.bilateral_combination("5:f0", 40).unwrap();
        let d = reg.bilateral_direct("5:f0", 40).unwrap();
        let p = reg.modular_product("5:f0", 40).unwrap();
        assert_eq!(c.coeff_int(0).unwrap(), 1);
        assert_eq!(verify_identity(&c, &d, 40).unwrap().status, Status::Verified);
        assert_eq!(verify_identity(&c, &p, 40).unwrap().status, Status::Verified);
    }

    #[test]
    fn chi_direct_is_rejected() {
        let reg = Registry::builtin();
        assert_eq!(reg.bilateral_direct("5:chi0", 20), Err(Error::NonconvergentBilateral("5:chi0".into())));
    }

    #[test]
    fn perturbed_mismatch() {
        let reg = Registry::builtin();
        let c = reg.bilateral_combination("5:f0", 30).unwrap();
        let bumped = c.add(&Series::from_terms(1, [(7, Rational::from(1))], 30));
        let r = verify_identity(&c, &bumped, 30).unwrap();
        assert_eq!(r.status, Status::Mismatch);
        let d = r.first_mismatch.unwrap();
        assert_eq!(d.exponent, 7);
        assert_eq!(Rational::from(&d.rhs - &d.lhs), 1);
    }

    #[test]
    fn insufficient() {
        let a = Series::one(50);
        assert!(matches!(verify_identity(&a, &a, 100), Err(Error::InsufficientTruncation { .. })));
    }
}
