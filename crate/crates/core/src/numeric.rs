//! Multiprecision complex arithmetic on MPFR floats, evaluation points and the
//! precision-doubling driver used by every numeric evaluator.

use std::fmt;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// Complex number with MPFR real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Cx {
    pub re: Float,
    pub im: Float,
}

impl Cx {
    pub fn zero(prec: u32) -> Cx {
        Cx { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: u32) -> Cx {
        Cx::real(Float::with_val(prec, 1))
    }

    pub fn real(re: Float) -> Cx {
        let prec = re.prec();
        Cx { re, im: Float::new(prec) }
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Cx {
        Cx { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_rational(r: &Rational, prec: u32) -> Cx {
        Cx::real(Float::with_val(prec, r))
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Cx {
        Cx { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Cx) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re + &o.re), im: Float::with_val(p, &self.im + &o.im) }
    }

    pub fn sub(&self, o: &Cx) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re - &o.re), im: Float::with_val(p, &self.im - &o.im) }
    }

    pub fn add_assign(&mut self, o: &Cx) {
        self.re += &o.re;
        self.im += &o.im;
    }

    pub fn sub_assign(&mut self, o: &Cx) {
        self.re -= &o.re;
        self.im -= &o.im;
    }

    pub fn neg(&self) -> Cx {
        Cx { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn conj(&self) -> Cx {
        Cx { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn mul(&self, o: &Cx) -> Cx {
        let p = self.prec();
        let a = Float::with_val(p, &self.re * &o.re);
        let b = Float::with_val(p, &self.im * &o.im);
        let c = Float::with_val(p, &self.re * &o.im);
        let d = Float::with_val(p, &self.im * &o.re);
        Cx { re: a - b, im: c + d }
    }

    pub fn mul_assign(&mut self, o: &Cx) {
        *self = self.mul(o);
    }

    pub fn mul_real(&self, x: &Float) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * x), im: Float::with_val(p, &self.im * x) }
    }

    pub fn scale(&self, r: &Rational) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * r), im: Float::with_val(p, &self.im * r) }
    }

    pub fn scale_i(&self, k: i64) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * k), im: Float::with_val(p, &self.im * k) }
    }

    /// `self * i`.
    pub fn mul_i(&self) -> Cx {
        Cx { re: -self.im.clone(), im: self.re.clone() }
    }

    pub fn norm(&self) -> Float {
        let p = self.prec();
        let a = Float::with_val(p, self.re.square_ref());
        let b = Float::with_val(p, self.im.square_ref());
        a + b
    }

    pub fn abs(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.hypot_ref(&self.im))
    }

    pub fn inv(&self) -> Cx {
        let n = self.norm();
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re / &n), im: Float::with_val(p, -self.im.clone() / &n) }
    }

    pub fn div(&self, o: &Cx) -> Cx {
        self.mul(&o.inv())
    }

    /// `log2 |z|`, finite for nonzero `z` even outside the `f64` range.
    pub fn log2_abs(&self) -> f64 {
        log2_float(&self.abs())
    }

    pub fn powi(&self, n: i64) -> Cx {
        let mut base = if n < 0 { self.inv() } else { self.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = Cx::one(self.prec());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `e^(i theta)`.
    pub fn expi(theta: &Float) -> Cx {
        let p = theta.prec();
        let (s, c) = theta.clone().sin_cos(Float::new(p));
        Cx { re: c, im: s }
    }

    pub fn exp(&self) -> Cx {
        let p = self.prec();
        let m = Float::with_val(p, self.re.exp_ref());
        Cx::expi(&self.im).mul_real(&m)
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Cx {
        let p = self.prec();
        let r = Float::with_val(p, self.abs().ln_ref());
        let a = Float::with_val(p, self.im.atan2_ref(&self.re));
        Cx { re: r, im: a }
    }

    /// `e^(2 pi i h / m)`.
    pub fn root_of_unity(h: i64, m: i64, prec: u32) -> Cx {
        let h = h.rem_euclid(m);
        if 4 * h == m {
            return Cx { re: Float::new(prec), im: Float::with_val(prec, 1) };
        }
        if 2 * h == m {
            return Cx::real(Float::with_val(prec, -1));
        }
        if 4 * h == 3 * m {
            return Cx { re: Float::new(prec), im: Float::with_val(prec, -1) };
        }
        if h == 0 {
            return Cx::one(prec);
        }
        let theta = two_pi(prec + 16) * Float::with_val(prec + 16, h) / Float::with_val(prec + 16, m);
        Cx::expi(&theta).with_prec(prec)
    }

    pub fn fmt_digits(&self, digits: usize) -> String {
        format!("{}{}{}i", fmt_float(&self.re, digits), if self.im.is_sign_negative() { "-" } else { "+" }, fmt_float(&Float::with_val(self.im.prec(), self.im.abs_ref()), digits))
    }
}

impl fmt::Display for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fmt_digits(20))
    }
}

pub fn two_pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi) * 2u32
}

pub fn log2_float(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    if !x.is_finite() {
        return f64::INFINITY;
    }
    let e = x.get_exp().unwrap_or(0);
    let m = Float::with_val(64, x.abs_ref()) >> e;
    m.to_f64().log2() + f64::from(e)
}

/// Scientific notation with a fixed count of significant digits.
pub fn fmt_float(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return format!("{:.*}e0", digits.saturating_sub(1), 0.0);
    }
    x.to_string_radix(10, Some(digits))
}

/// A point in the unit disc, optionally with its preimage `tau` in the upper
/// half-plane so that fractional powers `q^x = e^(2 pi i tau x)` are defined.
#[derive(Clone, Debug)]
pub struct QPoint {
    pub q: Cx,
    pub tau: Option<Cx>,
}

impl QPoint {
    pub fn from_q(q: Cx) -> QPoint {
        QPoint { q, tau: None }
    }

    pub fn from_tau(tau: Cx) -> Result<QPoint> {
        if tau.im <= 0 {
            return Err(Error::NotInUpperHalfPlane);
        }
        let p = tau.prec();
        let q = tau.mul_i().mul_real(&two_pi(p)).exp();
        Ok(QPoint { q, tau: Some(tau) })
    }

    /// `r * e^(2 pi i h/m)` for `0 < r < 1`, carrying `tau`.
    pub fn radial(h: i64, m: i64, r: &Float) -> QPoint {
        let p = r.prec();
        let zeta = Cx::root_of_unity(h, m, p);
        let q = zeta.mul_real(r);
        let y = Float::with_val(p, -Float::with_val(p, r.ln_ref())) / two_pi(p);
        let x = Float::with_val(p, h) / Float::with_val(p, m);
        QPoint { q, tau: Some(Cx { re: x, im: y }) }
    }

    pub fn prec(&self) -> u32 {
        self.q.prec()
    }

    pub fn with_prec(&self, prec: u32) -> QPoint {
        QPoint { q: self.q.with_prec(prec), tau: self.tau.as_ref().map(|t| t.with_prec(prec)) }
    }

    fn tau_or_log(&self) -> Result<Cx> {
        match &self.tau {
            Some(t) => Ok(t.clone()),
            None => {
                if self.q.is_zero() {
                    return Err(Error::NotInUpperHalfPlane);
                }
                // tau = log(q) / (2 pi i)
                let p = self.prec();
                let t = self.q.ln().mul_real(&(Float::with_val(p, 1) / two_pi(p)));
                Ok(Cx { re: t.im, im: -t.re })
            }
        }
    }

    /// `q^e` for a rational exponent.
    pub fn pow(&self, e: &Rational) -> Result<Cx> {
        if *e.denom() == 1 {
            let n = e.numer().to_i64().expect("exponent fits in i64");
            return Ok(self.q.powi(n));
        }
        let tau = self.tau_or_log()?;
        let p = self.prec();
        let arg = tau.mul_i().mul_real(&two_pi(p)).scale(e);
        Ok(arg.exp())
    }

    /// `sign * q^power`, keeping `tau` consistent.
    pub fn scaled(&self, sign: i64, power: i64) -> QPoint {
        let q = self.q.powi(power);
        let q = if sign < 0 { q.neg() } else { q };
        let tau = self.tau.as_ref().map(|t| {
            let mut t = t.scale_i(power);
            if sign < 0 {
                t.re += Float::with_val(self.prec(), 0.5);
            }
            t
        });
        QPoint { q, tau }
    }
}

/// A numeric value with an estimated absolute error.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub value: Cx,
    pub error: Float,
    pub rigorous: bool,
    pub working_prec: u32,
}

/// Numeric evaluation options shared by the series and product evaluators.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TailPolicy {
    /// Consecutive term ratios that must stay below the threshold.
    pub window: usize,
    /// Ratio threshold; widened to `(1 + |q|)/2` when `|q|` exceeds it.
    pub ratio: f64,
    /// Hard cap on the number of summed terms.
    pub max_terms: usize,
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy { window: 5, ratio: 0.9, max_terms: 250_000 }
    }
}

impl TailPolicy {
    pub fn threshold(&self, abs_q: f64) -> f64 {
        if abs_q >= self.ratio {
            ((1.0 + abs_q) / 2.0).max(self.ratio)
        } else {
            self.ratio
        }
    }
}

/// Errors that a higher working precision can cure.
pub fn precision_limited(e: &Error) -> bool {
    matches!(e, Error::DenominatorUnderflow { .. } | Error::CancellationLoss { .. })
}

thread_local! {
    static LOSS: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
}

/// Records that a computation on this thread lost `bits` of relative
/// accuracy to cancellation; `refine` raises the precision accordingly.
pub fn note_loss(bits: f64) {
    LOSS.with(|l| {
        if bits > l.get() {
            l.set(bits)
        }
    });
}

/// Largest loss recorded since the last call, resetting the record.
pub fn take_loss() -> f64 {
    LOSS.with(|l| l.replace(0.0))
}

/// Records the loss of a sum whose largest term had magnitude `2^max_term`,
/// and fails with `CancellationLoss` when no accurate bits are left.
pub fn check_cancellation(name: &str, value: &Cx, max_term: f64) -> Result<()> {
    let p = value.prec();
    // A sum that cancelled completely only shows that all `p` bits went.
    let lost = (max_term - value.log2_abs()).clamp(0.0, f64::from(p));
    note_loss(lost);
    if lost > f64::from(p) - 32.0 {
        return Err(Error::CancellationLoss { name: name.to_string(), bits: p.saturating_sub(32) });
    }
    Ok(())
}

/// Runs `eval` at increasing precisions until two consecutive results agree to
/// `2^-target` relative to `max(1, |value|)`.
pub fn refine<F>(target: u32, max_prec: u32, eval: F) -> Result<Estimate>
where
    F: FnMut(u32) -> Result<Cx>,
{
    refine_from(target + 32, target, max_prec, eval)
}

fn round_bits(x: f64) -> u32 {
    let x = x.clamp(64.0, f64::from(u32::MAX / 2));
    ((x / 64.0).ceil() as u32) * 64
}

/// `refine` with an explicit starting precision.
///
/// Cancellation recorded through `note_loss` during an evaluation moves the
/// next attempt straight to `loss + target + 32` bits; once an evaluation ran
/// above that level, it is confirmed at a precision a quarter higher.
pub fn refine_from<F>(start: u32, target: u32, max_prec: u32, mut eval: F) -> Result<Estimate>
where
    F: FnMut(u32) -> Result<Cx>,
{
    let mut p = round_bits(f64::from(start.max(target + 32)));
    let mut prev: Option<Cx> = None;
    loop {
        if p > max_prec {
            return Err(Error::PrecisionExhausted(max_prec));
        }
        take_loss();
        let res = eval(p);
        let need = take_loss() + f64::from(target) + 32.0;
        match res {
            Ok(cur) if cur.re.is_finite() && cur.im.is_finite() && f64::from(p) >= need => {
                if let Some(pv) = prev.take() {
                    let diff = cur.sub(&pv.with_prec(cur.prec())).abs();
                    let scale = log2_float(&cur.abs()).max(0.0);
                    if log2_float(&diff) <= scale - f64::from(target) {
                        return Ok(Estimate { value: cur, error: diff, rigorous: false, working_prec: p });
                    }
                }
                prev = Some(cur);
                p = round_bits(f64::from(p) * 1.25);
            }
            Ok(_) => {
                prev = None;
                p = round_bits((f64::from(p) * 1.25).max(need * 1.1));
            }
            Err(e) if precision_limited(&e) => {
                prev = None;
                let next = if need > f64::from(p) { need * 1.1 } else { f64::from(p) * 2.0 };
                p = round_bits(next);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Evaluates a truncated series at a point by summing its known terms.
pub fn eval_series(s: &Series, pt: &QPoint) -> Result<Cx> {
    let p = pt.prec();
    let mut acc = Cx::zero(p);
    if s.denom() == 1 {
        let mut iter = s.raw_terms().peekable();
        let Some(&(first, _)) = iter.peek() else { return Ok(acc) };
        let mut qp = pt.q.powi(first);
        let mut at = first;
        for (n, c) in iter {
            if n != at {
                qp = qp.mul(&pt.q.powi(n - at));
                at = n;
            }
            acc.add_assign(&qp.scale(c));
        }
        return Ok(acc);
    }
    for (e, c) in s.terms() {
        acc.add_assign(&pt.pow(&e)?.scale(c));
    }
    Ok(acc)
}

/// `|z|` as a multiple of `2^k`, useful for comparing magnitudes as `f64`.
pub fn mag(z: &Cx) -> f64 {
    z.log2_abs()
}

pub fn pow2(prec: u32, k: i32) -> Float {
    Float::with_val(prec, 2).pow(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_unity_cycle() {
        let z = Cx::root_of_unity(1, 7, 200);
        let w = z.powi(7);
        assert!(w.sub(&Cx::one(200)).log2_abs() < -190.0);
    }

    #[test]
    fn fractional_power_from_tau() {
        let tau = Cx::from_f64(0.25, 1.5, 160);
        let pt = QPoint::from_tau(tau).unwrap();
        let r = pt.pow(&Rational::from((1, 24))).unwrap();
        let back = r.powi(24);
        assert!(back.sub(&pt.q).log2_abs() < -140.0);
    }

    #[test]
    fn lower_half_plane_rejected() {
        assert!(matches!(QPoint::from_tau(Cx::from_f64(0.0, -1.0, 64)), Err(Error::NotInUpperHalfPlane)));
    }

    #[test]
    fn refine_converges_on_constant() {
        let est = refine(100, 4096, |p| Ok(Cx::from_rational(&Rational::from((1, 3)), p))).unwrap();
        assert!(log2_float(&est.error) < -100.0 || est.error.is_zero());
    }

    #[test]
    fn log2_of_huge_values() {
        let x = Float::with_val(64, 2).pow(5000u32);
        assert!((log2_float(&x) - 5000.0).abs() < 1e-9);
    }
}
