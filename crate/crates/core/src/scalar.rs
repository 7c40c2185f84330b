//! Scalar arithmetic.
//!
//! Two complex scalar types share the [`Scalar`] trait: [`Exact`] holds a pair of
//! GMP rationals, [`Approx`] a pair of MPFR floats at a run-wide precision.
//! Real parts implement [`Real`], which is what root isolation works over.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt::Debug;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering as AtomicOrdering};

use crate::error::{Error, Result};

static PRECISION: AtomicU32 = AtomicU32::new(256);
static PRECISION_MIXES: AtomicU64 = AtomicU64::new(0);

/// Mantissa bits used by every [`Approx`] constructed from now on.
pub fn precision() -> u32 {
    PRECISION.load(AtomicOrdering::Relaxed)
}

pub fn set_precision(bits: u32) {
    PRECISION.store(bits.max(32), AtomicOrdering::Relaxed);
}

/// Number of binary operations whose operands carried different precisions.
pub fn precision_mixes() -> u64 {
    PRECISION_MIXES.load(AtomicOrdering::Relaxed)
}

/// Magnitude below which a numeric value counts as zero: `10^-(bits/8)`.
pub fn zero_tol() -> f64 {
    10f64.powf(-(precision() as f64) / 8.0)
}

/// Threshold for "identically zero" trig polynomials and periodicity checks.
/// Equals `1e-25` at 256 bits and scales linearly with the precision.
pub fn ident_tol() -> f64 {
    10f64.powf(-25.0 * precision() as f64 / 256.0)
}

/// Ordered real field used for root isolation and interval bookkeeping.
pub trait Real: Clone + Debug + Send + Sync + PartialOrd + 'static {
    const EXACT: bool;
    fn zero() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Exact zero test, or magnitude below [`zero_tol`] for floats.
    fn is_zero(&self) -> bool;
    fn sign(&self) -> i32 {
        if self.is_zero() {
            0
        } else if *self > Self::zero() {
            1
        } else {
            -1
        }
    }
    fn abs(&self) -> Self {
        if *self < Self::zero() {
            self.neg()
        } else {
            self.clone()
        }
    }
    fn to_f64(&self) -> f64;
    fn to_float(&self) -> Float;
    /// Square root when it is representable in this field.
    fn sqrt(&self) -> Option<Self>;
    fn midpoint(a: &Self, b: &Self) -> Self {
        a.add(b).div(&Self::from_i64(2))
    }
    fn to_number(&self) -> Number;
    /// The value as a rational, for exact fields only.
    fn as_rational(&self) -> Option<Rational>;
}

impl Real for Rational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Rational::new()
    }
    fn from_i64(n: i64) -> Self {
        Rational::from(n)
    }
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
    fn add(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Rational::from(self / o)
    }
    fn neg(&self) -> Self {
        Rational::from(-self)
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == Ordering::Equal
    }
    fn to_f64(&self) -> f64 {
        Rational::to_f64(self)
    }
    fn to_float(&self) -> Float {
        Float::with_val(precision(), self)
    }
    fn sqrt(&self) -> Option<Self> {
        if self.cmp0() == Ordering::Less {
            return None;
        }
        let (n, d) = (self.numer(), self.denom());
        if n.is_perfect_square() && d.is_perfect_square() {
            Some(Rational::from((n.clone().sqrt(), d.clone().sqrt())))
        } else {
            None
        }
    }
    fn to_number(&self) -> Number {
        Number::Exact(Exact::new(self.clone(), Rational::new()))
    }
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl Real for Float {
    const EXACT: bool = false;
    fn zero() -> Self {
        Float::new(precision())
    }
    fn from_i64(n: i64) -> Self {
        Float::with_val(precision(), n)
    }
    fn from_rational(q: &Rational) -> Self {
        Float::with_val(precision(), q)
    }
    fn add(&self, o: &Self) -> Self {
        Float::with_val(mix(self.prec(), o.prec()), self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Float::with_val(mix(self.prec(), o.prec()), self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Float::with_val(mix(self.prec(), o.prec()), self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Float::with_val(mix(self.prec(), o.prec()), self / o)
    }
    fn neg(&self) -> Self {
        Float::with_val(self.prec(), -self)
    }
    fn is_zero(&self) -> bool {
        Float::with_val(53, self.abs_ref()) < zero_tol()
    }
    fn to_f64(&self) -> f64 {
        Float::to_f64(self)
    }
    fn to_float(&self) -> Float {
        self.clone()
    }
    fn sqrt(&self) -> Option<Self> {
        if *self < 0 {
            None
        } else {
            Some(Float::with_val(self.prec(), self.sqrt_ref()))
        }
    }
    fn to_number(&self) -> Number {
        Number::Approx(Approx::new(self.clone(), Float::new(self.prec())))
    }
    fn as_rational(&self) -> Option<Rational> {
        None
    }
}

fn mix(a: u32, b: u32) -> u32 {
    if a != b {
        PRECISION_MIXES.fetch_add(1, AtomicOrdering::Relaxed);
    }
    a.min(b)
}

/// Complex scalar field shared by the exact and numeric pipelines.
pub trait Scalar: Clone + Debug + Send + Sync + PartialEq + 'static + crate::trig::Coef<Self> {
    type Real: Real;
    const EXACT: bool;

    fn new(re: Self::Real, im: Self::Real) -> Self;
    fn re(&self) -> &Self::Real;
    fn im(&self) -> &Self::Real;

    fn zero() -> Self {
        Self::new(Self::Real::zero(), Self::Real::zero())
    }
    fn one() -> Self {
        Self::from_i64(1)
    }
    fn i() -> Self {
        Self::new(Self::Real::zero(), Self::Real::from_i64(1))
    }
    fn from_i64(n: i64) -> Self {
        Self::new(Self::Real::from_i64(n), Self::Real::zero())
    }
    fn from_rational(q: &Rational) -> Self {
        Self::new(Self::Real::from_rational(q), Self::Real::zero())
    }
    fn from_real(r: Self::Real) -> Self {
        Self::new(r, Self::Real::zero())
    }
    fn from_exact(x: &Exact) -> Self {
        Self::new(Self::Real::from_rational(&x.re), Self::Real::from_rational(&x.im))
    }

    fn add(&self, o: &Self) -> Self {
        Self::new(self.re().add(o.re()), self.im().add(o.im()))
    }
    fn sub(&self, o: &Self) -> Self {
        Self::new(self.re().sub(o.re()), self.im().sub(o.im()))
    }
    fn mul(&self, o: &Self) -> Self {
        let (a, b, c, d) = (self.re(), self.im(), o.re(), o.im());
        Self::new(a.mul(c).sub(&b.mul(d)), a.mul(d).add(&b.mul(c)))
    }
    fn neg(&self) -> Self {
        Self::new(self.re().neg(), self.im().neg())
    }
    fn conj(&self) -> Self {
        Self::new(self.re().clone(), self.im().neg())
    }
    fn scale_i64(&self, n: i64) -> Self {
        let f = Self::Real::from_i64(n);
        Self::new(self.re().mul(&f), self.im().mul(&f))
    }
    fn mul_i(&self) -> Self {
        Self::new(self.im().neg(), self.re().clone())
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.re().mul(self.re()).add(&self.im().mul(self.im()));
        Some(Self::new(self.re().div(&n), self.im().neg().div(&n)))
    }
    fn div(&self, o: &Self) -> Option<Self> {
        o.inv().map(|v| self.mul(&v))
    }
    fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
    /// Integer power, negative exponents through the inverse.
    fn powi(&self, e: i64) -> Option<Self> {
        if e >= 0 {
            Some(self.pow(e as u32))
        } else {
            self.inv().map(|v| v.pow((-e) as u32))
        }
    }

    fn is_zero(&self) -> bool {
        self.re().is_zero() && self.im().is_zero()
    }
    fn is_real(&self) -> bool {
        self.im().is_zero()
    }
    /// `|self|` rounded to f64.
    fn abs_f64(&self) -> f64 {
        self.re().to_f64().hypot(self.im().to_f64())
    }
    /// Natural log of `|self|`, finite even below the f64 range.
    fn ln_abs(&self) -> f64 {
        let re = self.re().to_float();
        let im = self.im().to_float();
        let m = Float::with_val(precision(), re.square_ref()) + Float::with_val(precision(), im.square_ref());
        if m.is_zero() {
            return f64::NEG_INFINITY;
        }
        m.ln().to_f64() / 2.0
    }
    fn to_number(&self) -> Number;
    fn to_approx(&self) -> Approx {
        Approx::new(self.re().to_float(), self.im().to_float())
    }
    /// Converts a stored number into this scalar type. Numeric values cannot
    /// become exact ones.
    fn from_number(n: &Number) -> Result<Self>;
}

/// Gaussian rational `re + i·im`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Exact {
    pub re: Rational,
    pub im: Rational,
}

impl Scalar for Exact {
    type Real = Rational;
    const EXACT: bool = true;
    fn new(re: Rational, im: Rational) -> Self {
        Exact { re, im }
    }
    fn re(&self) -> &Rational {
        &self.re
    }
    fn im(&self) -> &Rational {
        &self.im
    }
    fn to_number(&self) -> Number {
        Number::Exact(self.clone())
    }
    fn from_number(n: &Number) -> Result<Self> {
        match n {
            Number::Exact(x) => Ok(x.clone()),
            Number::Approx(_) => Err(Error::Precondition(
                "numeric value cannot enter an exact computation".into(),
            )),
        }
    }
}

impl Exact {
    pub fn rational(q: Rational) -> Self {
        Exact { re: q, im: Rational::new() }
    }
    pub fn ratio(n: i64, d: i64) -> Self {
        Exact::rational(Rational::from((n, d)))
    }
}

/// Complex multiprecision float.
#[derive(Clone, Debug)]
pub struct Approx {
    pub re: Float,
    pub im: Float,
}

impl PartialEq for Approx {
    fn eq(&self, o: &Self) -> bool {
        self.re == o.re && self.im == o.im
    }
}

impl Scalar for Approx {
    type Real = Float;
    const EXACT: bool = false;
    fn new(re: Float, im: Float) -> Self {
        Approx { re, im }
    }
    fn re(&self) -> &Float {
        &self.re
    }
    fn im(&self) -> &Float {
        &self.im
    }
    fn to_number(&self) -> Number {
        Number::Approx(self.clone())
    }
    fn from_number(n: &Number) -> Result<Self> {
        Ok(match n {
            Number::Exact(x) => Approx::from_exact(x),
            Number::Approx(x) => x.clone(),
        })
    }
}

impl Approx {
    pub fn from_f64(re: f64, im: f64) -> Self {
        Approx::new(Float::with_val(precision(), re), Float::with_val(precision(), im))
    }
    /// `e^{iθ}` for a real angle.
    pub fn cis(theta: &Float) -> Self {
        let (s, c) = Float::with_val(theta.prec(), theta).sin_cos(Float::new(theta.prec()));
        Approx::new(c, s)
    }
}

/// A scalar of either kind, as stored in results and branch records.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(Exact),
    Approx(Approx),
}

impl Number {
    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }
    pub fn to_approx(&self) -> Approx {
        match self {
            Number::Exact(x) => x.to_approx(),
            Number::Approx(x) => x.clone(),
        }
    }
    pub fn re_f64(&self) -> f64 {
        match self {
            Number::Exact(x) => x.re.to_f64(),
            Number::Approx(x) => x.re.to_f64(),
        }
    }
    pub fn im_f64(&self) -> f64 {
        match self {
            Number::Exact(x) => x.im.to_f64(),
            Number::Approx(x) => x.im.to_f64(),
        }
    }
    pub fn real_float(&self) -> Float {
        match self {
            Number::Exact(x) => Float::with_val(precision(), &x.re),
            Number::Approx(x) => x.re.clone(),
        }
    }
}

/// Text form used in JSON: exact parts as `p/q`, numeric parts in exponent
/// notation with every stored digit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberRepr {
    pub re: String,
    pub im: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prec: Option<u32>,
}

pub fn float_to_string(f: &Float) -> String {
    if f.is_zero() {
        return "0".into();
    }
    format!("{:e}", f)
}

impl From<&Number> for NumberRepr {
    fn from(n: &Number) -> Self {
        match n {
            Number::Exact(x) => NumberRepr { re: x.re.to_string(), im: x.im.to_string(), prec: None },
            Number::Approx(x) => NumberRepr {
                re: float_to_string(&x.re),
                im: float_to_string(&x.im),
                prec: Some(x.re.prec()),
            },
        }
    }
}

impl TryFrom<&NumberRepr> for Number {
    type Error = Error;
    fn try_from(r: &NumberRepr) -> Result<Number> {
        match r.prec {
            None => Ok(Number::Exact(Exact::new(parse_rational(&r.re)?, parse_rational(&r.im)?))),
            Some(p) => {
                let re = parse_float(&r.re, p)?;
                let im = parse_float(&r.im, p)?;
                Ok(Number::Approx(Approx::new(re, im)))
            }
        }
    }
}

impl Serialize for Number {
    fn serialize<Sr: serde::Serializer>(&self, s: Sr) -> std::result::Result<Sr::Ok, Sr::Error> {
        NumberRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = NumberRepr::deserialize(d)?;
        Number::try_from(&r).map_err(serde::de::Error::custom)
    }
}

/// Parses `p`, `p/q` or a terminating decimal such as `-0.25` into a rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("malformed rational {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: Integer = n.trim().parse().map_err(|_| bad())?;
        let d: Integer = d.trim().parse().map_err(|_| bad())?;
        if d.cmp0() == Ordering::Equal {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::from((n, d)));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let n: Integer = digits.parse().map_err(|_| bad())?;
        let d = Integer::from(10).pow(fp.len() as u32);
        let q = Rational::from((n, d));
        return Ok(if neg { -q } else { q });
    }
    let n: Integer = t.parse().map_err(|_| bad())?;
    Ok(Rational::from(n))
}

pub fn parse_float(s: &str, prec: u32) -> Result<Float> {
    if s == "0" {
        return Ok(Float::new(prec));
    }
    let p = Float::parse(s).map_err(|_| Error::Parse(format!("malformed float {s:?}")))?;
    Ok(Float::with_val(prec, p))
}

/// Simplest rational in the closed interval `[lo, hi]` (Stern–Brocot descent).
pub fn simplest_rational_between(lo: &Rational, hi: &Rational) -> Rational {
    debug_assert!(lo <= hi);
    if lo.cmp0() != Ordering::Greater && hi.cmp0() != Ordering::Less {
        return Rational::new();
    }
    if hi.cmp0() == Ordering::Less {
        let (a, b) = (Rational::from(-hi), Rational::from(-lo));
        return -simplest_rational_between(&a, &b);
    }
    let fl = Integer::from(lo.floor_ref());
    if Rational::from(&fl) == *lo {
        return lo.clone();
    }
    let next = Integer::from(&fl + 1);
    if Rational::from(&next) <= *hi {
        return Rational::from(next);
    }
    // lo and hi share the integer part; recurse on reciprocals of fractional parts
    let flr = Rational::from(&fl);
    let a = Rational::from(hi - &flr).recip();
    let b = Rational::from(lo - &flr).recip();
    let inner = simplest_rational_between(&a, &b);
    flr + inner.recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_inverse_roundtrip() {
        let x = Exact::new(Rational::from((3, 4)), Rational::from((-2, 5)));
        let y = x.mul(&x.inv().unwrap());
        assert_eq!(y, Exact::one());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/6").unwrap(), Rational::from((1, 2)));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::from((-1, 4)));
        assert_eq!(parse_rational(" 7 ").unwrap(), Rational::from(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn simplest_rational() {
        let lo = Rational::from((333, 1000));
        let hi = Rational::from((334, 1000));
        assert_eq!(simplest_rational_between(&lo, &hi), Rational::from((1, 3)));
        let lo = Rational::from((-7, 10));
        let hi = Rational::from((-6, 10));
        assert_eq!(simplest_rational_between(&lo, &hi), Rational::from((-2, 3)));
    }

    #[test]
    fn number_json_roundtrip() {
        let n = Number::Exact(Exact::new(Rational::from((-1, 3)), Rational::from(2)));
        let s = serde_json::to_string(&n).unwrap();
        let back: Number = serde_json::from_str(&s).unwrap();
        assert_eq!(n, back);
        let a = Number::Approx(Approx::cis(&Float::with_val(256, 1)));
        let s = serde_json::to_string(&a).unwrap();
        let back: Number = serde_json::from_str(&s).unwrap();
        assert_eq!(a, back);
    }
}
