//! Trigonometric polynomials in the initial phase `t0`, stored as Laurent
//! polynomials in `z = e^{i t0}`, and the coefficient-ring abstraction that
//! lets the same recursion run with a fixed or a symbolic phase.

use std::fmt::Debug;

use crate::scalar::{Approx, Exact, Real, Scalar};

/// Coefficient ring of the series recursions: a commutative ring that is a
/// module over the scalar field `S`.
pub trait Coef<S: Scalar>: Clone + Debug + Send + Sync + 'static {
    fn czero() -> Self;
    fn from_scalar(s: S) -> Self;
    fn is_null(&self) -> bool;
    fn add_assign(&mut self, o: &Self);
    fn sub_assign(&mut self, o: &Self);
    fn times(&self, o: &Self) -> Self;
    fn scale(&self, s: &S) -> Self;
    fn negate(&self) -> Self;
}

macro_rules! scalar_coef {
    ($t:ty) => {
        impl Coef<$t> for $t {
            fn czero() -> Self {
                <$t as Scalar>::zero()
            }
            fn from_scalar(s: $t) -> Self {
                s
            }
            fn is_null(&self) -> bool {
                Scalar::is_zero(self)
            }
            fn add_assign(&mut self, o: &Self) {
                *self = Scalar::add(self, o);
            }
            fn sub_assign(&mut self, o: &Self) {
                *self = Scalar::sub(self, o);
            }
            fn times(&self, o: &Self) -> Self {
                Scalar::mul(self, o)
            }
            fn scale(&self, s: &$t) -> Self {
                Scalar::mul(self, s)
            }
            fn negate(&self) -> Self {
                Scalar::neg(self)
            }
        }
    };
}

scalar_coef!(Exact);
scalar_coef!(Approx);

/// `Σ c_m z^m` with `z = e^{i t0}`; `coeffs[i]` multiplies `z^{lo+i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly<S> {
    pub lo: i64,
    pub coeffs: Vec<S>,
}

impl<S: Scalar> TrigPoly<S> {
    pub fn zero() -> Self {
        TrigPoly { lo: 0, coeffs: Vec::new() }
    }

    pub fn monomial(m: i64, c: S) -> Self {
        TrigPoly { lo: m, coeffs: vec![c] }.trimmed()
    }

    pub fn constant(c: S) -> Self {
        Self::monomial(0, c)
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub fn coeff(&self, m: i64) -> S {
        let i = m - self.lo;
        if i < 0 || i as usize >= self.coeffs.len() {
            S::zero()
        } else {
            self.coeffs[i as usize].clone()
        }
    }

    /// Largest `|m|` with a stored coefficient.
    pub fn degree(&self) -> i64 {
        if self.coeffs.is_empty() {
            0
        } else {
            self.lo.abs().max(self.hi().abs())
        }
    }

    fn trimmed(mut self) -> Self {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i64;
        }
        if self.coeffs.is_empty() {
            self.lo = 0;
        }
        self
    }

    pub fn is_identically_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// True if every harmonic has magnitude below `tol`.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.abs_f64() < tol)
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.coeffs.is_empty() {
            return o.clone();
        }
        if o.coeffs.is_empty() {
            return self.clone();
        }
        let lo = self.lo.min(o.lo);
        let hi = self.hi().max(o.hi());
        let coeffs = (lo..=hi).map(|m| self.coeff(m).add(&o.coeff(m))).collect();
        TrigPoly { lo, coeffs }.trimmed()
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.negated())
    }

    pub fn negated(&self) -> Self {
        TrigPoly { lo: self.lo, coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    pub fn times(&self, o: &Self) -> Self {
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return Self::zero();
        }
        let mut coeffs = vec![S::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        TrigPoly { lo: self.lo + o.lo, coeffs }.trimmed()
    }

    pub fn scaled(&self, s: &S) -> Self {
        TrigPoly { lo: self.lo, coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect() }.trimmed()
    }

    /// `d/dt0`: the coefficient of `z^m` picks up `i m`.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.mul_i().scale_i64(self.lo + i as i64))
            .collect();
        TrigPoly { lo: self.lo, coeffs }.trimmed()
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    /// Value at `z = e^{i t0}`.
    pub fn eval(&self, z: &S) -> S {
        let zinv = match z.inv() {
            Some(v) => v,
            None => return S::zero(),
        };
        let mut acc = S::zero();
        for (i, c) in self.coeffs.iter().enumerate() {
            let m = self.lo + i as i64;
            let zm = if m >= 0 { z.pow(m as u32) } else { zinv.pow((-m) as u32) };
            acc = acc.add(&c.mul(&zm));
        }
        acc
    }

    /// Real trigonometric form `a0 + Σ_{m≥1} (a_m cos m t0 + b_m sin m t0)`,
    /// returned as `(a, b)` with `b[0] = 0`.
    pub fn real_form(&self) -> (Vec<S::Real>, Vec<S::Real>) {
        let n = self.degree().max(0) as usize;
        let mut a = Vec::with_capacity(n + 1);
        let mut b = Vec::with_capacity(n + 1);
        a.push(self.coeff(0).re().clone());
        b.push(S::Real::zero());
        for m in 1..=n as i64 {
            let cp = self.coeff(m);
            let cm = self.coeff(-m);
            // c_m z^m + c_{-m} z^{-m} with c_{-m} = conj(c_m)
            let s = cp.add(&cm);
            let d = cp.sub(&cm);
            a.push(s.re().clone());
            b.push(d.im().neg());
        }
        (a, b)
    }

    /// True if `c_{-m} = conj(c_m)` for all `m`, i.e. the function is real.
    pub fn is_real(&self) -> bool {
        let n = self.degree();
        (-n..=n).all(|m| self.coeff(m).sub(&self.coeff(-m).conj()).is_zero())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TrigPoly<T> {
        TrigPoly { lo: self.lo, coeffs: self.coeffs.iter().map(f).collect() }.trimmed()
    }
}

impl<S: Scalar> Coef<S> for TrigPoly<S> {
    fn czero() -> Self {
        TrigPoly::zero()
    }
    fn from_scalar(s: S) -> Self {
        TrigPoly::constant(s)
    }
    fn is_null(&self) -> bool {
        self.is_identically_zero()
    }
    fn add_assign(&mut self, o: &Self) {
        *self = TrigPoly::add(self, o);
    }
    fn sub_assign(&mut self, o: &Self) {
        *self = TrigPoly::sub(self, o);
    }
    fn times(&self, o: &Self) -> Self {
        TrigPoly::times(self, o)
    }
    fn scale(&self, s: &S) -> Self {
        self.scaled(s)
    }
    fn negate(&self) -> Self {
        self.negated()
    }
}
