//! Classical modular objects: Dedekind eta, the theta function `theta_4`,
//! `K(q)`, the Rogers-Ramanujan functions, `b(q)`, Jacobi triple products and
//! numeric Klein forms.
//!
//! Exact expansions use the rational kernel. Numeric values come from
//! theta-type series, which need far fewer terms than the products. Near the
//! unit circle those series cancel badly, so the theta function is first
//! carried to a reduced point by the modular group.

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_cancellation, log2_float, note_loss, two_pi, Cx, Estimate, QPoint};
use crate::series::{euler_pentagonal, pochhammer, quotient_of_binomials, Monomial, PochLength, Series};

/// Which Rogers-Ramanujan function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RrWhich {
    G,
    H,
}

/// Sum side or product side of a Rogers-Ramanujan identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RrForm {
    Sum,
    Product,
}

/// Tag of a classical form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    Eta(i64),
    Theta4,
    K,
    GSum,
    GProd,
    HSum,
    HProd,
    BTheta,
}

/// A classical form evaluated at `sign * q^power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormId {
    pub tag: FormTag,
    pub sign: i64,
    pub power: i64,
}

impl FormId {
    pub fn new(tag: FormTag) -> Self {
        FormId { tag, sign: 1, power: 1 }
    }

    pub fn at(tag: FormTag, sign: i64, power: i64) -> Self {
        FormId { tag, sign, power }
    }

    fn check(&self) -> Result<()> {
        if self.power < 1 || (self.sign != 1 && self.sign != -1) {
            return Err(Error::InvalidExpression(format!("bad argument scaling ({}, {})", self.sign, self.power)));
        }
        if let FormTag::Eta(m) = self.tag {
            if m < 1 {
                return Err(Error::InvalidExpression(format!("eta({m}) needs m >= 1")));
            }
        }
        Ok(())
    }

    /// Exact expansion to `q^trunc`.
    pub fn series(&self, trunc: i64) -> Result<Series> {
        self.check()?;
        let inner = (trunc + self.power - 1).div_euclid(self.power).max(1);
        let base = match self.tag {
            FormTag::Eta(m) => eta_series(m, inner),
            FormTag::Theta4 => theta4_series(inner),
            FormTag::K => k_series(inner),
            FormTag::GSum => rr_series(RrWhich::G, RrForm::Sum, inner),
            FormTag::GProd => rr_series(RrWhich::G, RrForm::Product, inner),
            FormTag::HSum => rr_series(RrWhich::H, RrForm::Sum, inner),
            FormTag::HProd => rr_series(RrWhich::H, RrForm::Product, inner),
            FormTag::BTheta => b_series(inner),
        };
        Ok(base.substitute(self.sign, self.power)?.truncate_int(trunc))
    }

    /// Numeric value at `pt`.
    pub fn value(&self, pt: &QPoint) -> Result<Cx> {
        self.check()?;
        let sp = pt.scaled(self.sign, self.power);
        match self.tag {
            FormTag::Eta(m) => eta_value(&sp, m),
            FormTag::Theta4 => theta4_value(&sp.q),
            FormTag::K => k_value(&sp.q),
            FormTag::GSum => rr_sum_value(RrWhich::G, &sp.q),
            FormTag::HSum => rr_sum_value(RrWhich::H, &sp.q),
            FormTag::GProd => rr_value(RrWhich::G, &sp.q),
            FormTag::HProd => rr_value(RrWhich::H, &sp.q),
            FormTag::BTheta => b_value(&sp.q),
        }
    }
}

/// `(q^m; q^m)_inf` to `q^trunc`.
pub fn euler_series(m: i64, trunc: i64) -> Series {
    let inner = (trunc + m - 1).div_euclid(m).max(1);
    euler_pentagonal(inner).substitute(1, m).expect("integer exponents").truncate_int(trunc)
}

/// `q^(m/24) (q^m; q^m)_inf`, known up to `q^(m/24 + trunc)`.
pub fn eta_series(m: i64, trunc: i64) -> Series {
    euler_series(m, trunc).mul_monomial(&Monomial::q_pow(m, 24))
}

/// `sum_{n in Z} (-1)^n q^(n^2)`.
pub fn theta4_series(trunc: i64) -> Series {
    let mut terms = vec![(0, Rational::from(1))];
    let mut n = 1i64;
    while n * n < trunc {
        terms.push((n * n, Rational::from(if n % 2 == 0 { 2 } else { -2 })));
        n += 1;
    }
    Series::from_terms(1, terms, trunc)
}

/// `eta(tau)^2 / eta(2 tau)`.
pub fn theta4_eta_side(trunc: i64) -> Result<Series> {
    let num = eta_series(1, trunc).pow(2)?;
    let den = eta_series(2, trunc).invert()?;
    Ok(num.mul(&den).reduced().truncate_int(trunc))
}

/// `sum_{n >= 0} q^(n(n+1)/2)`.
pub fn k_series(trunc: i64) -> Series {
    let mut terms = Vec::new();
    let mut n = 0i64;
    while n * (n + 1) / 2 < trunc {
        terms.push((n * (n + 1) / 2, Rational::from(1)));
        n += 1;
    }
    Series::from_terms(1, terms, trunc)
}

/// `eta(2 tau)^2 / (q^(1/8) eta(tau))`.
pub fn k_eta_side(trunc: i64) -> Result<Series> {
    let num = eta_series(2, trunc).pow(2)?;
    let den = eta_series(1, trunc).mul_monomial(&Monomial::q_pow(1, 8)).invert()?;
    Ok(num.mul(&den).reduced().truncate_int(trunc))
}

/// Compares two expansions coefficient-wise below `trunc`.
fn self_check(what: &str, a: &Series, b: &Series, trunc: i64) -> Result<()> {
    for e in 0..trunc {
        let x = a.coeff_int(e)?;
        let y = b.coeff_int(e)?;
        if x != y {
            return Err(Error::EtaQuotientMismatch(format!("{what} differs at q^{e}: {x} vs {y}")));
        }
    }
    Ok(())
}

/// `theta_4` with its eta-quotient self-check.
pub fn theta4_checked(trunc: i64) -> Result<Series> {
    let s = theta4_series(trunc);
    self_check("theta4", &s, &theta4_eta_side(trunc)?, trunc)?;
    Ok(s)
}

/// `K` with its eta-quotient self-check.
pub fn k_checked(trunc: i64) -> Result<Series> {
    let s = k_series(trunc);
    self_check("K", &s, &k_eta_side(trunc)?, trunc)?;
    Ok(s)
}

/// Rogers-Ramanujan `G` or `H` as a sum or as a product.
pub fn rr_series(which: RrWhich, form: RrForm, trunc: i64) -> Series {
    let shift = match which {
        RrWhich::G => 0,
        RrWhich::H => 1,
    };
    match form {
        RrForm::Sum => {
            let mut acc = Series::zero(trunc);
            let mut n = 0i64;
            while n * n + shift * n < trunc {
                let e = n * n + shift * n;
                let factors: Vec<Monomial> = (1..=n).map(|j| Monomial::q_pow(j, 1)).collect();
                let inv = quotient_of_binomials(&factors, &Rational::from(trunc - e)).expect("no poles");
                acc = acc.add(&inv.mul_monomial(&Monomial::q_pow(e, 1)));
                n += 1;
            }
            acc
        }
        RrForm::Product => {
            let (a, b) = if shift == 0 { (1, 4) } else { (2, 3) };
            let mut factors = Vec::new();
            let mut j = 0i64;
            while 5 * j + a < trunc {
                factors.push(Monomial::q_pow(5 * j + a, 1));
                if 5 * j + b < trunc {
                    factors.push(Monomial::q_pow(5 * j + b, 1));
                }
                j += 1;
            }
            quotient_of_binomials(&factors, &Rational::from(trunc)).expect("no poles")
        }
    }
}

/// `b(q) = (q; q^2)_inf theta_4`.
pub fn b_series(trunc: i64) -> Series {
    let p = pochhammer(&Monomial::q_pow(1, 1), &Monomial::q_pow(2, 1), PochLength::Infinite, &Rational::from(trunc))
        .expect("convergent product");
    p.mul(&theta4_series(trunc))
}

/// Jacobi triple product `(s q^a; q^N)_inf (s q^(N-a); q^N)_inf (q^N; q^N)_inf`
/// for `sign = s`, expanded as `sum_n (-s)^n q^(N n(n-1)/2 + a n)`.
pub fn jtp_series(sign: i64, a: i64, modulus: i64, trunc: i64) -> Result<Series> {
    if a <= 0 || a >= modulus {
        return Err(Error::InvalidExpression(format!("triple product needs 0 < {a} < {modulus}")));
    }
    let mut terms = Vec::new();
    for dir in [1i64, -1] {
        let mut n = if dir == 1 { 0 } else { -1 };
        loop {
            let e = modulus * n * (n - 1) / 2 + a * n;
            if e >= trunc {
                break;
            }
            let c = if (n.rem_euclid(2) == 1) && sign == 1 { -1 } else { 1 };
            terms.push((e, Rational::from(c)));
            n += dir;
        }
    }
    Ok(Series::from_terms(1, terms, trunc))
}

/// Sum over `n >= 0` of `sign^n q^((a n^2 + b n)/den)`; over all `n` when
/// `two_sided`. Needs `a > 0`, `den | a + b` and `den | 2a`.
pub fn theta_sum(q: &Cx, a: i64, b: i64, den: i64, sign: i64, two_sided: bool) -> Result<Cx> {
    if q.log2_abs() > MODULAR_FROM && !q.is_zero() {
        // The one-sided sum is half the bilateral one when n -> -1-n fixes it.
        if two_sided || (a == b && sign == 1) {
            let full = theta_modular(q, a, b, den, sign)?;
            return Ok(if two_sided { full } else { full.scale(&Rational::from((1, 2))) });
        }
    }
    let (mut total, mut peak) = theta_side(q, a, b, den, sign)?;
    if two_sided {
        let (other, peak2) = theta_side(q, a, -b, den, sign)?;
        total.add_assign(&other);
        total.sub_assign(&Cx::one(q.prec()));
        peak = peak.max(peak2);
    }
    check_cancellation("theta series", &total, peak)?;
    Ok(total)
}

/// `log2 |q|` above which bilateral theta series are evaluated through the
/// modular group (`|q| > e^(-pi/2)`).
const MODULAR_FROM: f64 = -2.266;

/// `sum_n sign^n q^((a n^2 + b n)/den)` over all `n`, written as
/// `theta(z | t) = sum_n e^(pi i n^2 t + 2 pi i n z)` with `t = 2a tau/den`
/// and `z = b tau/den + c`, `sign = e^(2 pi i c)`.
fn theta_modular(q: &Cx, a: i64, b: i64, den: i64, sign: i64) -> Result<Cx> {
    let p = q.prec();
    // The phase of the reduction multipliers grows like 1/Im(tau).
    let im_tau = -q.log2_abs() * std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI);
    let w = p + 64 + (1.0 / im_tau).log2().max(0.0).ceil() as u32;
    let qw = q.with_prec(w);
    let two_pi_i = Cx { re: Float::new(w), im: two_pi(w) };
    let tau = qw.ln().div(&two_pi_i);
    let t = tau.scale(&Rational::from((2 * a, den)));
    let mut z = tau.scale(&Rational::from((b, den)));
    if sign < 0 {
        z = z.add(&Cx::from_rational(&Rational::from((1, 2)), w));
    }
    let v = theta_reduced(z, t)?;
    Ok(v.with_prec(p))
}

/// `theta(z | t)` for `Im t > 0`, reduced by `t -> t + 1`, `t -> -1/t` and
/// the quasi-period before summing.
fn theta_reduced(mut z: Cx, mut t: Cx) -> Result<Cx> {
    let w = t.prec();
    let pi = Float::with_val(w, rug::float::Constant::Pi);
    let pi_i = Cx { re: Float::new(w), im: pi.clone() };
    let half = Rational::from((1, 2));
    let mut factor = Cx::one(w);
    let mut expo = Cx::zero(w);
    for _ in 0..200 {
        if !(t.im.is_sign_positive() && !t.im.is_zero()) {
            return Err(Error::NonconvergentTail("theta outside the upper half plane".into()));
        }
        // theta(z | t + k) = theta(z + k/2 | t)
        let k = t.re.to_f64().round();
        if k != 0.0 {
            let kr = Rational::from(k as i64);
            t.re -= Float::with_val(w, &kr);
            z = z.add(&Cx::from_rational(&Rational::from(&kr * &half), w));
        }
        if t.norm().to_f64() >= 0.999 {
            break;
        }
        // theta(z | t) = (-i t)^(-1/2) e^(-pi i z^2/t) theta(z/t | -1/t)
        let mit = Cx { re: t.im.clone(), im: Float::with_val(w, -&t.re) };
        factor = factor.div(&mit.ln().scale(&half).exp());
        expo.sub_assign(&pi_i.mul(&z.mul(&z)).div(&t));
        z = z.div(&t);
        t = t.inv().neg();
    }
    // theta(z0 + k t | t) = e^(-pi i k^2 t - 2 pi i k z0) theta(z0 | t)
    let k = (z.im.to_f64() / t.im.to_f64()).round() as i64;
    if k != 0 {
        let kt = t.scale(&Rational::from(k));
        z = z.sub(&kt);
        expo.sub_assign(&pi_i.mul(&kt.scale(&Rational::from(k)).add(&z.scale_i(2 * k))));
    }
    let kr = z.re.to_f64().round();
    if kr != 0.0 {
        z.re -= Float::with_val(w, kr);
    }
    // The multiplier is exact up to the conditioning of its exponent.
    note_loss(expo.log2_abs().max(0.0));
    let sum = theta_terms(&z, &t, &pi_i)?;
    Ok(sum.mul(&factor).mul(&expo.exp()))
}

/// Direct sum of `e^(pi i n^2 t + 2 pi i n z)` for a reduced `(z, t)`.
fn theta_terms(z: &Cx, t: &Cx, pi_i: &Cx) -> Result<Cx> {
    let w = t.prec();
    let mut acc = Cx::one(w);
    let mut peak = 0f64;
    let stop = -f64::from(w) - 16.0;
    for sgn in [1i64, -1] {
        let mut n = 1i64;
        loop {
            let e = pi_i.mul(&t.scale(&Rational::from(n * n)).add(&z.scale_i(2 * n * sgn)));
            let term = e.exp();
            let mag = term.log2_abs();
            acc.add_assign(&term);
            peak = peak.max(mag);
            // Beyond the peak the magnitudes fall off like e^(-pi n^2 Im t).
            if mag < stop + peak && n as f64 * t.im.to_f64() > 1.0 {
                break;
            }
            n += 1;
            if n > 1_000_000 {
                return Err(Error::NonconvergentTail("reduced theta series".into()));
            }
        }
    }
    check_cancellation("reduced theta series", &acc, peak)?;
    Ok(acc)
}

/// One side of a theta series and the largest term magnitude in bits.
fn theta_side(q: &Cx, a: i64, b: i64, den: i64, sign: i64) -> Result<(Cx, f64)> {
    assert!(a > 0 && (a + b) % den == 0 && (2 * a) % den == 0, "unsupported theta exponent");
    let p = q.prec();
    let lq = q.log2_abs();
    if lq >= 0.0 || lq.is_nan() {
        return Err(Error::NonconvergentTail("|q| >= 1".into()));
    }
    if q.is_zero() {
        return Ok((Cx::one(p), 0.0));
    }
    let abs_q = 2f64.powf(lq);
    let guard = f64::from(p) + 16.0 - (1.0 - abs_q).log2();
    let mut peak = 0f64;
    let step = 2 * a / den;
    let mut de = (a + b) / den;
    let mut e: i64 = 0;
    let mut t = Cx::one(p);
    let mut d = q.powi(de);
    let inc = q.powi(step);
    let mut acc = Cx::zero(p);
    let mut n = 0u64;
    loop {
        if sign < 0 && n % 2 == 1 {
            acc.sub_assign(&t);
        } else {
            acc.add_assign(&t);
        }
        e += de;
        t = t.mul(&d);
        d = d.mul(&inc);
        de += step;
        n += 1;
        peak = peak.max((e as f64) * lq);
        if de > 0 && (e as f64) * lq < -guard {
            break;
        }
    }
    Ok((acc, peak))
}

/// `(q; q)_inf` at `q`.
pub fn euler_value(q: &Cx) -> Result<Cx> {
    theta_sum(q, 3, -1, 2, -1, true)
}

/// `eta` at `q^m`, using `tau` for the fractional prefactor.
pub fn eta_value(pt: &QPoint, m: i64) -> Result<Cx> {
    let qm = pt.q.powi(m);
    let pre = pt.pow(&Rational::from((m, 24)))?;
    Ok(pre.mul(&euler_value(&qm)?))
}

pub fn theta4_value(q: &Cx) -> Result<Cx> {
    theta_sum(q, 1, 0, 1, -1, true)
}

pub fn k_value(q: &Cx) -> Result<Cx> {
    theta_sum(q, 1, 1, 2, 1, false)
}

/// Triple product with `sign`, offset `a` and modulus `N` at `q`.
pub fn jtp_value(q: &Cx, sign: i64, a: i64, modulus: i64) -> Result<Cx> {
    theta_sum(q, modulus, 2 * a - modulus, 2, -sign, true)
}

/// `G` or `H` as the quotient of an Euler product by a triple product.
pub fn rr_value(which: RrWhich, q: &Cx) -> Result<Cx> {
    let a = match which {
        RrWhich::G => 1,
        RrWhich::H => 2,
    };
    let e5 = euler_value(&q.powi(5))?;
    Ok(e5.div(&jtp_value(q, 1, a, 5)?))
}

/// `G` or `H` by direct summation of the hypergeometric side.
pub fn rr_sum_value(which: RrWhich, q: &Cx) -> Result<Cx> {
    let shift = match which {
        RrWhich::G => 0,
        RrWhich::H => 1,
    };
    let p = q.prec();
    let lq = q.log2_abs();
    if lq >= 0.0 {
        return Err(Error::NonconvergentTail("|q| >= 1".into()));
    }
    let mut acc = Cx::zero(p);
    let mut den = Cx::one(p);
    let mut qn = Cx::one(p);
    let mut n = 0i64;
    loop {
        let e = n * n + shift * n;
        let term = q.powi(e).div(&den);
        acc.add_assign(&term);
        if (e as f64) * lq < -(f64::from(p) + 16.0) && n > 2 {
            break;
        }
        n += 1;
        qn = qn.mul(q);
        den = den.mul(&Cx::one(p).sub(&qn));
    }
    Ok(acc)
}

/// `b(q)`: `(q; q^2)_inf = E(q) / E(q^2)` times `theta_4`.
pub fn b_value(q: &Cx) -> Result<Cx> {
    let e1 = euler_value(q)?;
    let e2 = euler_value(&q.mul(q))?;
    Ok(e1.div(&e2).mul(&theta4_value(q)?))
}

/// Infinite product `(sign q^a; q^N)_inf` at `q`, rewritten through Euler
/// products when the arithmetic allows it and multiplied out otherwise.
pub fn poch_value(q: &Cx, sign: i64, a: i64, modulus: i64) -> Result<Cx> {
    if a == modulus {
        let e = euler_value(&q.powi(modulus))?;
        if sign == 1 {
            return Ok(e);
        }
        return Ok(euler_value(&q.powi(2 * modulus))?.div(&e));
    }
    if 2 * a == modulus {
        let e1 = euler_value(&q.powi(a))?;
        let e2 = euler_value(&q.powi(2 * a))?;
        if sign == 1 {
            return Ok(e1.div(&e2));
        }
        let e4 = euler_value(&q.powi(4 * a))?;
        return Ok(e2.mul(&e2).div(&e1.mul(&e4)));
    }
    direct_product(q, sign, a, modulus)
}

fn direct_product(q: &Cx, sign: i64, a: i64, modulus: i64) -> Result<Cx> {
    let p = q.prec();
    let lq = q.log2_abs();
    if lq >= 0.0 {
        return Err(Error::NonconvergentTail("|q| >= 1".into()));
    }
    let abs_q = 2f64.powf(lq);
    let guard = f64::from(p) + 16.0 - (1.0 - abs_q.powi(modulus as i32)).log2();
    let mut acc = Cx::one(p);
    let mut x = q.powi(a);
    if sign < 0 {
        x = x.neg();
    }
    let step = q.powi(modulus);
    let mut e = a;
    loop {
        acc = acc.mul(&Cx::one(p).sub(&x));
        x = x.mul(&step);
        e += modulus;
        if e > 0 && (e as f64) * lq < -guard {
            break;
        }
    }
    Ok(acc)
}

/// Numeric Klein form value with the truncation error of its product.
#[derive(Clone, Debug)]
pub struct KleinValue {
    pub value: Cx,
    pub error: Float,
    pub factors: usize,
}

/// Klein form `t_(r,s)` of level `N` at `tau`, truncating the product once the
/// remaining factors move it by less than `2^(-precision/2)`.
pub fn klein_point(r: i64, s: i64, n: i64, tau: &Cx, precision: u32) -> Result<KleinValue> {
    if n < 1 || (r.rem_euclid(n) == 0 && s.rem_euclid(n) == 0) {
        return Err(Error::InvalidExpression(format!("({r},{s}) is 0 mod {n}")));
    }
    if tau.im <= 0 {
        return Err(Error::NotInUpperHalfPlane);
    }
    let p = precision.max(64) + 32;
    let tau = tau.with_prec(p);
    let pt = QPoint::from_tau(tau.clone())?;
    let q = pt.q.clone();
    let lq = q.log2_abs();
    let abs_q = 2f64.powf(lq);
    let zs = Cx::root_of_unity(s, n, p);
    let zs_inv = zs.conj();
    let q_rn = pt.pow(&Rational::from((r, n)))?;
    let q_rn_inv = q_rn.inv();
    let rn = (r as f64 / n as f64).abs();
    let target = -(f64::from(precision) / 2.0);
    let one = Cx::one(p);

    let pre_root = Cx::root_of_unity(s * (r - n), 2 * n * n, p);
    let two_pi_i = Cx { re: Float::new(p), im: two_pi(p) };
    let mut acc = pre_root.div(&two_pi_i).neg();
    acc = acc.mul(&pt.pow(&Rational::from((r * (r - n), 2 * n * n)))?);
    acc = acc.mul(&one.sub(&zs.mul(&q_rn)));

    let mut qn = Cx::one(p);
    let mut k = 0usize;
    let tail_log = |m: f64| -> f64 { 2.0 + (m - rn) * lq - (1.0 - abs_q).log2() };
    loop {
        k += 1;
        qn = qn.mul(&q);
        let a = one.sub(&zs.mul(&qn.mul(&q_rn)));
        let b = one.sub(&zs_inv.mul(&qn.mul(&q_rn_inv)));
        let c = one.sub(&qn);
        acc = acc.mul(&a).mul(&b).div(&c.mul(&c));
        if tail_log(k as f64 + 1.0) < target {
            break;
        }
        if k > 10_000_000 {
            return Err(Error::NonconvergentTail("Klein product".into()));
        }
    }
    let mut err = acc.abs();
    let tl = tail_log(k as f64 + 1.0) + 1.0;
    err *= Float::with_val(p, 2f64.powf(tl.max(-1.0e6)));
    if err.is_zero() {
        err = rug::ops::Pow::pow(Float::with_val(p, 2), tl as i32);
    }
    Ok(KleinValue { value: acc.with_prec(precision.max(64)), error: err, factors: k })
}

/// `|G - RHS|` or `|H - RHS|` for the Klein-form quotient expressions of the
/// Rogers-Ramanujan functions at `q = e^(2 pi i tau)`.
pub fn klein_lemma_residual(which: RrWhich, tau: &Cx, precision: u32) -> Result<Float> {
    let p = precision.max(64) + 32;
    let tau = tau.with_prec(p);
    let pt = QPoint::from_tau(tau.clone())?;
    let lhs = rr_sum_value(which, &pt.q)?;
    let tau5 = tau.scale_i(5);
    let pt5 = QPoint::from_tau(tau5.clone())?;
    let eta5 = pt5.pow(&Rational::from((1, 24)))?.mul(&euler_value(&pt5.q)?);
    let two_pi_i = Cx { re: Float::new(p), im: two_pi(p) };
    let (root, qexp, r) = match which {
        RrWhich::G => (Cx::root_of_unity(3, 5, p), Rational::from((1, 60)), 1),
        RrWhich::H => (Cx::root_of_unity(7, 10, p), Rational::from((-11, 60)), 2),
    };
    let t = klein_point(r, 5, 5, &tau5, p)?;
    let rhs = root
        .div(&two_pi_i)
        .neg()
        .mul(&pt.pow(&qexp)?)
        .div(&eta5.mul(&eta5).mul(&t.value.with_prec(p)));
    Ok(lhs.sub(&rhs).abs())
}

/// Left side of the Klein-form product identity for `(q; q^5)(q^4; q^5)`:
/// `-zeta_5^(-3) (2 pi i) q^(-1/60) t_(1,5)(5 tau) eta(5 tau)^2`.
pub fn eq_klein_product_lhs(tau: &Cx, precision: u32) -> Result<Cx> {
    let p = precision.max(64) + 32;
    let tau = tau.with_prec(p);
    let pt = QPoint::from_tau(tau.clone())?;
    let tau5 = tau.scale_i(5);
    let pt5 = QPoint::from_tau(tau5.clone())?;
    let eta5 = pt5.pow(&Rational::from((1, 24)))?.mul(&euler_value(&pt5.q)?);
    let two_pi_i = Cx { re: Float::new(p), im: two_pi(p) };
    let t = klein_point(1, 5, 5, &tau5, p)?;
    Ok(Cx::root_of_unity(-3, 5, p)
        .neg()
        .mul(&two_pi_i)
        .mul(&pt.pow(&Rational::from((-1, 60)))?)
        .mul(&t.value.with_prec(p))
        .mul(&eta5)
        .mul(&eta5))
}

/// `|LHS - (q; q^5)_inf (q^4; q^5)_inf|` for the identity above.
pub fn klein_product_residual(tau: &Cx, precision: u32) -> Result<Float> {
    let lhs = eq_klein_product_lhs(tau, precision)?;
    let p = lhs.prec();
    let q = QPoint::from_tau(tau.with_prec(p))?.q;
    let rhs = direct_product(&q, 1, 1, 5)?.mul(&direct_product(&q, 1, 4, 5)?);
    Ok(lhs.sub(&rhs).abs())
}

/// Estimate wrapper for a Klein value, flagged as non-rigorous.
pub fn klein_estimate(v: &KleinValue) -> Estimate {
    Estimate { value: v.value.clone(), error: v.error.clone(), rigorous: false, working_prec: v.value.prec() }
}

/// `log2` of a residual, for reporting.
pub fn residual_bits(x: &Float) -> f64 {
    log2_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from(n)
    }

    #[test]
    fn modular_reduction_matches_direct_series() {
        let prec = 256;
        for (r, phase) in [(0.5, 0.3), (0.9, 1.1), (0.97, -2.5), (0.8, 3.14159), (0.99, 2.0944), (0.995, -2.0944), (0.995, 1.5708), (0.995, 1.0472), (0.993, 0.7854)] {
            let q = Cx::expi(&Float::with_val(prec, phase)).mul_real(&Float::with_val(prec, r));
            // The direct series cancels near the circle; run it with room to spare.
            let wide = q.with_prec(4 * prec);
            for (a, b, den, sign) in [(3, -1, 2, -1), (1, 0, 1, -1), (5, -3, 2, -1), (5, 1, 2, 1), (1, 1, 2, 1), (6, -2, 2, -1), (6, 0, 2, 1), (3, 1, 2, 1), (2, 0, 1, 1)] {
                let direct = {
                    let (mut x, _) = theta_side(&wide, a, b, den, sign).unwrap();
                    let (y, _) = theta_side(&wide, a, -b, den, sign).unwrap();
                    x.add_assign(&y);
                    x.sub(&Cx::one(4 * prec))
                };
                let m = theta_modular(&q, a, b, den, sign).unwrap();
                let rel = m.with_prec(4 * prec).sub(&direct).log2_abs() - direct.log2_abs();
                assert!(rel < -200.0, "{r} {phase} {a} {b}: {rel}");
            }
        }
    }

    #[test]
    fn euler_near_one_is_tiny_and_accurate() {
        // (q;q)_inf at q = e^(-2 pi t): log|.| ~ -pi/(12 t) + pi t/12 + ln(1/t)/2
        let prec = 192;
        let t = 1.0 / 1024.0;
        let q = Cx::real(Float::with_val(prec, -2.0 * std::f64::consts::PI * t).exp());
        let v = euler_value(&q).unwrap();
        let pi = std::f64::consts::PI;
        let want = (-pi / (12.0 * t) + pi * t / 12.0 + 0.5 * (1.0 / t).ln()) / std::f64::consts::LN_2;
        assert!((v.log2_abs() - want).abs() < 1e-6, "{} vs {want}", v.log2_abs());
        assert!(v.re.is_sign_positive());
    }

    #[test]
    fn eta_leading_terms() {
        let e = eta_series(1, 10);
        assert_eq!(e.coefficient(&Rational::from((1, 24))).unwrap(), 1);
        assert_eq!(e.coefficient(&Rational::from((25, 24))).unwrap(), -1);
        assert_eq!(eta_series(2, 10), eta_series(1, 5).substitute(1, 2).unwrap());
    }

    #[test]
    fn theta4_and_k_prefix() {
        let t = theta4_series(10);
        let want = [1, -2, 0, 0, 2, 0, 0, 0, 0, -2];
        for (e, w) in want.iter().enumerate() {
            assert_eq!(t.coeff_int(e as i64).unwrap(), r(*w));
        }
        let k = k_series(11);
        let want = [1, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1];
        for (e, w) in want.iter().enumerate() {
            assert_eq!(k.coeff_int(e as i64).unwrap(), r(*w));
        }
    }

    #[test]
    fn theta4_negated_argument() {
        let t = theta4_series(12).substitute(-1, 1).unwrap();
        for (e, w) in [(0, 1), (1, 2), (4, 2), (9, 2), (2, 0)] {
            assert_eq!(t.coeff_int(e).unwrap(), r(w));
        }
    }

    #[test]
    fn rr_prefixes() {
        let g = rr_series(RrWhich::G, RrForm::Sum, 6);
        for (e, w) in [(0, 1), (1, 1), (2, 1), (3, 1), (4, 2), (5, 2)] {
            assert_eq!(g.coeff_int(e).unwrap(), r(w));
        }
        let h = rr_series(RrWhich::H, RrForm::Sum, 6);
        for (e, w) in [(0, 1), (1, 0), (2, 1)] {
            assert_eq!(h.coeff_int(e).unwrap(), r(w));
        }
    }

    #[test]
    fn b_prefix_and_inverse() {
        let b = b_series(40);
        assert_eq!(b.coeff_int(0).unwrap(), 1);
        assert_eq!(b.coeff_int(1).unwrap(), -3);
        let one = b.mul(&b.invert().unwrap());
        assert_eq!(one, Series::one(40));
    }

    #[test]
    fn triple_product_matches_product() {
        let t = jtp_series(1, 1, 5, 80).unwrap();
        let tr = Rational::from(80);
        let a = pochhammer(&Monomial::q_pow(1, 1), &Monomial::q_pow(5, 1), PochLength::Infinite, &tr).unwrap();
        let b = pochhammer(&Monomial::q_pow(4, 1), &Monomial::q_pow(5, 1), PochLength::Infinite, &tr).unwrap();
        let c = euler_series(5, 80);
        assert_eq!(t, a.mul(&b).mul(&c));
        let t = jtp_series(-1, 2, 6, 80).unwrap();
        let a = pochhammer(&Monomial::signed(-1, 2), &Monomial::q_pow(6, 1), PochLength::Infinite, &tr).unwrap();
        let b = pochhammer(&Monomial::signed(-1, 4), &Monomial::q_pow(6, 1), PochLength::Infinite, &tr).unwrap();
        assert_eq!(t, a.mul(&b).mul(&euler_series(6, 80)));
    }

    #[test]
    fn numeric_forms_match_series() {
        let q = Cx::from_f64(0.3, 0.2, 160);
        let pt = QPoint::from_q(q.clone());
        let checks: Vec<(Cx, Series)> = vec![
            (euler_value(&q).unwrap(), euler_series(1, 150)),
            (theta4_value(&q).unwrap(), theta4_series(150)),
            (k_value(&q).unwrap(), k_series(150)),
            (rr_value(RrWhich::G, &q).unwrap(), rr_series(RrWhich::G, RrForm::Product, 150)),
            (rr_value(RrWhich::H, &q).unwrap(), rr_series(RrWhich::H, RrForm::Sum, 150)),
            (b_value(&q).unwrap(), b_series(150)),
            (poch_value(&q, -1, 1, 2).unwrap(), pochhammer(&Monomial::signed(-1, 1), &Monomial::q_pow(2, 1), PochLength::Infinite, &r(150)).unwrap()),
            (poch_value(&q, -1, 3, 3).unwrap(), pochhammer(&Monomial::signed(-1, 3), &Monomial::q_pow(3, 1), PochLength::Infinite, &r(150)).unwrap()),
        ];
        for (v, s) in checks {
            let w = crate::numeric::eval_series(&s, &pt).unwrap();
            assert!(v.sub(&w).log2_abs() < -100.0, "{v} vs {w}");
        }
    }

    #[test]
    fn klein_lemma_small_residuals() {
        let t = Cx::from_f64(0.0, 2.0, 128);
        let res = klein_lemma_residual(RrWhich::G, &t, 128).unwrap();
        assert!(log2_float(&res) < -32.0);
        let t = Cx::from_f64(1.0 / 3.0, 2.0, 128);
        let res = klein_lemma_residual(RrWhich::H, &t, 128).unwrap();
        assert!(log2_float(&res) < -32.0);
    }
}
