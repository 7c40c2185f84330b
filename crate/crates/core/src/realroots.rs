//! Real-root isolation with multiplicities, Sylvester matrices, resultants
//! and discriminants.
//!
//! Everything is generic over [`Real`]: over the rationals every decision is
//! exact, over MPFR floats a relative threshold of [`zero_tol`] separates
//! "zero" from "nonzero" and anything in the gray band between `zero_tol`
//! and its square root is reported as [`Error::PrecisionExhausted`].
//!
//! Sign convention for [`sylvester`]: column `c ≤ m` holds the coefficients
//! of `P1` (leading first) starting at row `c`, column `m + c` those of `P2`.
//! With this layout
//! `det = a0^m b0^n Π (c1_i - c2_j)` holds with no extra sign, e.g.
//! `det [[1, 1], [-1, -3]] = -2` for `P1 = c - 1`, `P2 = c - 3`.

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::{precision, simplest_rational_between, zero_tol, Real};

/// `Σ coeffs[i] c^i` with a nonzero leading coefficient (or no coefficients).
#[derive(Clone, Debug, PartialEq)]
pub struct RealPoly<R> {
    coeffs: Vec<R>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Size {
    Zero,
    Gray,
    Nonzero,
}

/// Classifies `|x|` relative to `scale`.
fn size_of<R: Real>(x: &R, scale: &R) -> Size {
    if R::EXACT {
        return if x.is_zero() { Size::Zero } else { Size::Nonzero };
    }
    let s = scale.abs().to_float();
    if s.is_zero() {
        return Size::Zero;
    }
    let rel = (x.abs().to_float() / s).to_f64();
    let tol = zero_tol();
    if rel < tol {
        Size::Zero
    } else if rel < tol.sqrt() {
        Size::Gray
    } else {
        Size::Nonzero
    }
}

fn max_abs<R: Real>(v: &[R]) -> R {
    let mut m = R::zero();
    for x in v {
        let a = x.abs();
        if a > m {
            m = a;
        }
    }
    m
}

impl<R: Real> RealPoly<R> {
    /// Drops exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<R>) -> Self {
        while coeffs.last().is_some_and(|c| if R::EXACT { c.is_zero() } else { c.to_float().is_zero() }) {
            coeffs.pop();
        }
        RealPoly { coeffs }
    }

    pub fn from_i64(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&x| R::from_i64(x)).collect())
    }

    /// `Π (c - r)`.
    pub fn from_roots(roots: &[R]) -> Self {
        let mut p = Self::new(vec![R::from_i64(1)]);
        for r in roots {
            p = p.mul(&Self::new(vec![r.neg(), R::from_i64(1)]));
        }
        p
    }

    pub fn zero() -> Self {
        RealPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::new(vec![R::from_i64(1)])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> R {
        self.coeffs.get(i).cloned().unwrap_or_else(R::zero)
    }

    pub fn lead(&self) -> R {
        self.coeffs.last().cloned().unwrap_or_else(R::zero)
    }

    pub fn eval(&self, x: &R) -> R {
        let mut acc = R::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c.mul(&R::from_i64(i as i64))).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i).add(&o.coeff(i))).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i).sub(&o.coeff(i))).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![R::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: &R) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.mul(s)).collect())
    }

    pub fn monic(&self) -> Self {
        let l = self.lead();
        self.scale(&R::from_i64(1).div(&l))
    }

    /// Euclidean division; `d` must be nonzero.
    pub fn divrem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let mut r = self.coeffs.clone();
        let dn = d.degree();
        let dl = d.lead();
        if r.len() < d.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let mut q = vec![R::zero(); r.len() - dn];
        for i in (0..q.len()).rev() {
            let c = r[i + dn].div(&dl);
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[i + j] = r[i + j].sub(&c.mul(dc));
            }
            r[i + dn] = R::zero();
            q[i] = c;
        }
        r.truncate(dn);
        (Self::new(q), Self::new(r))
    }

    /// Remainder with coefficients below the relative threshold cleared.
    fn clean_rem(&self, d: &Self) -> Result<Self> {
        let (_, r) = self.divrem(d);
        r.cleaned(&max_abs(&self.coeffs))
    }

    /// Zeroes coefficients that are rounding noise relative to `scale`.
    fn cleaned(self, scale: &R) -> Result<Self> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for c in self.coeffs {
            match size_of(&c, scale) {
                Size::Zero => out.push(R::zero()),
                Size::Gray => {
                    return Err(Error::PrecisionExhausted(
                        "polynomial remainder in the undecidable band; raise the precision".into(),
                    ))
                }
                Size::Nonzero => out.push(c),
            }
        }
        let mut p = RealPoly { coeffs: out };
        while p.coeffs.last().is_some_and(|c| c.is_zero() || size_of(c, scale) == Size::Zero) {
            p.coeffs.pop();
        }
        Ok(p)
    }

    /// Exact quotient; a nonzero remainder (beyond tolerance) is an error.
    fn exact_div(&self, d: &Self) -> Result<Self> {
        let (q, _) = self.divrem(d);
        let r = self.clean_rem(d)?;
        if !r.is_zero() {
            return Err(Error::PrecisionExhausted("inexact polynomial division".into()));
        }
        Ok(q)
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, o: &Self) -> Result<Self> {
        let (mut a, mut b) = (self.clone(), o.clone());
        if a.is_zero() {
            return Ok(if b.is_zero() { b } else { b.monic() });
        }
        while !b.is_zero() {
            let r = a.clean_rem(&b)?;
            a = b.monic();
            b = if r.is_zero() { r } else { r.monic() };
        }
        Ok(a.monic())
    }

    /// Square-free decomposition (Yun): `self = lc · Π f_i^i` with pairwise
    /// coprime square-free monic `f_i`; returns the nonconstant `(f_i, i)`.
    pub fn square_free(&self) -> Result<Vec<(Self, usize)>> {
        let mut out = Vec::new();
        if self.degree() == 0 {
            return Ok(out);
        }
        let d = self.derivative();
        let a0 = self.gcd(&d)?;
        let mut b = self.exact_div(&a0)?;
        let mut c = d.exact_div(&a0)?;
        let mut dd = c.sub(&b.derivative()).cleaned(&max_abs(&c.coeffs))?;
        let mut i = 1;
        while b.degree() > 0 {
            let a = b.gcd(&dd)?;
            if a.degree() > 0 {
                out.push((a.clone(), i));
            }
            b = b.exact_div(&a)?;
            c = dd.exact_div(&a)?;
            dd = c.sub(&b.derivative()).cleaned(&max_abs(&c.coeffs))?;
            i += 1;
            if i > self.degree() + 1 {
                return Err(Error::PrecisionExhausted("square-free decomposition did not terminate".into()));
            }
        }
        Ok(out)
    }

    /// Sturm chain `g, g', -rem(...)...`.
    fn sturm_chain(&self) -> Result<Vec<Self>> {
        let mut chain = vec![self.clone(), self.derivative()];
        while !chain.last().unwrap().is_zero() {
            let n = chain.len();
            let r = chain[n - 2].clean_rem(&chain[n - 1])?;
            if r.is_zero() {
                break;
            }
            let s = max_abs(&r.coeffs);
            chain.push(r.scale(&R::from_i64(-1).div(&s)));
        }
        if chain.last().is_some_and(|p| p.is_zero()) {
            chain.pop();
        }
        Ok(chain)
    }

    /// Cauchy bound on the moduli of all roots, plus one.
    pub fn root_bound(&self) -> R {
        let l = self.lead().abs();
        let mut m = R::zero();
        for c in &self.coeffs[..self.coeffs.len() - 1] {
            let v = c.abs().div(&l);
            if v > m {
                m = v;
            }
        }
        m.add(&R::from_i64(2))
    }

    /// Sign changes in the coefficient sequence (Descartes bound on positive roots).
    pub fn sign_variations(&self) -> usize {
        variations(self.coeffs.iter().map(|c| c.sign()))
    }

    /// Number of distinct real roots in `(a, b]` for square-free `self`.
    pub fn sturm_count(&self, a: &R, b: &R) -> Result<usize> {
        let chain = self.sturm_chain()?;
        Ok(count_between(&chain, a, b))
    }
}

fn variations(signs: impl Iterator<Item = i32>) -> usize {
    let mut last = 0;
    let mut n = 0;
    for s in signs {
        if s == 0 {
            continue;
        }
        if last != 0 && s != last {
            n += 1;
        }
        last = s;
    }
    n
}

fn count_at<R: Real>(chain: &[RealPoly<R>], x: &R) -> usize {
    variations(chain.iter().map(|p| p.eval(x).sign()))
}

fn count_between<R: Real>(chain: &[RealPoly<R>], a: &R, b: &R) -> usize {
    count_at(chain, a).saturating_sub(count_at(chain, b))
}

/// One real root of the polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct RootRecord<R> {
    /// The root when `exact`, otherwise the midpoint of `[lo, hi]`.
    pub value: R,
    pub lo: R,
    pub hi: R,
    /// True when `value` is the root itself rather than an approximation.
    pub exact: bool,
    pub multiplicity: usize,
    pub is_zero_root: bool,
}

/// Denominator bound for rational roots of a rational polynomial: the
/// leading coefficient of its primitive integer multiple.
fn denominator_bound<R: Real>(p: &RealPoly<R>) -> Option<Integer> {
    let qs: Vec<Rational> = p.coeffs.iter().map(|c| c.as_rational()).collect::<Option<_>>()?;
    let mut l = Integer::from(1);
    for q in &qs {
        l = l.lcm(q.denom());
    }
    let ints: Vec<Integer> = qs.iter().map(|q| Integer::from(q.numer() * Integer::from(&l / q.denom()))).collect();
    let mut g = Integer::new();
    for x in &ints {
        g = g.gcd(x);
    }
    Some(Integer::from(ints.last().unwrap() / &g).abs())
}

fn strict_sign<R: Real>(x: &R) -> i32 {
    let z = R::zero();
    if *x > z {
        1
    } else if *x < z {
        -1
    } else {
        0
    }
}

fn refine_bits() -> u32 {
    precision() + 16
}

/// Bisection on an isolating interval `(lo, hi]` of a square-free `g`.
fn refine<R: Real>(g: &RealPoly<R>, mut lo: R, mut hi: R) -> RootRecord<R> {
    let two = R::from_i64(2);
    let mk = |lo: R, hi: R, v: R, exact: bool| RootRecord { value: v, lo, hi, exact, multiplicity: 1, is_zero_root: false };
    if R::EXACT && g.eval(&hi).sign() == 0 {
        return mk(hi.clone(), hi.clone(), hi, true);
    }
    let slo = g.eval(&lo).sign();
    let dbound = denominator_bound(g);
    let tiny = |lo: &R, hi: &R| -> bool {
        let w = hi.sub(lo).to_float();
        let mag = lo.abs().to_float().max(&hi.abs().to_float()).to_f64().max(1.0);
        w.to_f64() <= mag * 2f64.powi(-(refine_bits() as i32)) || w.is_zero()
    };
    // for rational inputs: narrow until at most one fraction with a small
    // enough denominator fits, then test the simplest one
    if let Some(d) = &dbound {
        let d2 = Rational::from((Integer::from(1), Integer::from(d * d)));
        loop {
            let w = hi.sub(&lo).as_rational().unwrap();
            if w < d2 {
                break;
            }
            let m = lo.add(&hi).div(&two);
            let s = g.eval(&m).sign();
            if s == 0 {
                return mk(m.clone(), m.clone(), m, true);
            }
            if s == slo {
                lo = m;
            } else {
                hi = m;
            }
        }
        let cand = simplest_rational_between(&lo.as_rational().unwrap(), &hi.as_rational().unwrap());
        let c = R::from_rational(&cand);
        if g.eval(&c).is_zero() {
            return mk(c.clone(), c.clone(), c, true);
        }
    }
    // bisection on the strict sign: the tolerance band around a root would
    // otherwise read as "no sign change" and drag the bracket off the root
    let slo = strict_sign(&g.eval(&lo));
    let mut iters = 0;
    while !tiny(&lo, &hi) && iters < 4 * refine_bits() + 200 {
        let m = lo.add(&hi).div(&two);
        let s = strict_sign(&g.eval(&m));
        if s == 0 && R::EXACT {
            return mk(m.clone(), m.clone(), m, true);
        }
        if s == slo {
            lo = m;
        } else {
            hi = m;
        }
        iters += 1;
    }
    let mid = lo.add(&hi).div(&two);
    mk(lo, hi, mid, false)
}

/// Isolating intervals `(lo, hi]` of the distinct real roots of square-free `g`.
fn isolate_square_free<R: Real>(g: &RealPoly<R>) -> Result<Vec<(R, R)>> {
    let chain = g.sturm_chain()?;
    let b = g.root_bound();
    let mut todo = vec![(b.neg(), b)];
    let mut out = Vec::new();
    let mut guard = 0usize;
    while let Some((lo, hi)) = todo.pop() {
        let n = count_between(&chain, &lo, &hi);
        if n == 0 {
            continue;
        }
        if n == 1 {
            out.push((lo, hi));
            continue;
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::PrecisionExhausted("root isolation did not separate clustered roots".into()));
        }
        // split away from roots so that every endpoint has a nonzero value
        let w = hi.sub(&lo);
        let mut split = None;
        for t in [2i64, 3, 5, 7, 11, 13] {
            let m = lo.add(&w.div(&R::from_i64(t)).mul(&R::from_i64(t / 2)));
            if g.eval(&m).sign() != 0 {
                split = Some(m);
                break;
            }
        }
        let m = split.ok_or_else(|| Error::PrecisionExhausted("no root-free split point".into()))?;
        if !R::EXACT && m.sub(&lo).to_float().to_f64().abs() < 2f64.powi(-(refine_bits() as i32)) {
            return Err(Error::PrecisionExhausted("real roots closer than the working precision".into()));
        }
        todo.push((m.clone(), hi));
        todo.push((lo, m));
    }
    Ok(out)
}

/// Real roots with multiplicities, sorted by value.
pub fn isolate_real_roots<R: Real>(p: &RealPoly<R>) -> Result<Vec<RootRecord<R>>> {
    if p.is_zero() {
        return Err(Error::Precondition("root isolation of the zero polynomial".into()));
    }
    // strip the root at zero first
    let scale = max_abs(&p.coeffs);
    let mut z = 0;
    while z < p.coeffs.len() - 1 {
        match size_of(&p.coeffs[z], &scale) {
            Size::Zero => z += 1,
            Size::Gray => return Err(Error::PrecisionExhausted("cannot decide whether 0 is a root".into())),
            Size::Nonzero => break,
        }
    }
    let mut out = Vec::new();
    if z > 0 {
        out.push(RootRecord {
            value: R::zero(),
            lo: R::zero(),
            hi: R::zero(),
            exact: true,
            multiplicity: z,
            is_zero_root: true,
        });
    }
    let rest = RealPoly::new(p.coeffs[z..].to_vec());
    for (f, m) in rest.square_free()? {
        for (lo, hi) in isolate_square_free(&f)? {
            let mut r = refine(&f, lo, hi);
            r.multiplicity = m;
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Square matrix stored row-major.
pub type Matrix<R> = Vec<Vec<R>>;

/// Sylvester matrix in the column convention documented at module level.
pub fn sylvester<R: Real>(p1: &RealPoly<R>, p2: &RealPoly<R>) -> Result<Matrix<R>> {
    let (n, m) = (p1.degree(), p2.degree());
    if p1.is_zero() || p2.is_zero() || n == 0 || m == 0 {
        return Err(Error::Precondition("Sylvester matrix needs two polynomials of degree at least 1".into()));
    }
    let size = n + m;
    let mut s = vec![vec![R::zero(); size]; size];
    // a_i is the coefficient of c^{n-i}
    for col in 0..m {
        for i in 0..=n {
            s[col + i][col] = p1.coeff(n - i);
        }
    }
    for col in 0..n {
        for i in 0..=m {
            s[col + i][m + col] = p2.coeff(m - i);
        }
    }
    Ok(s)
}

/// Determinant by Gaussian elimination with largest-modulus pivoting.
pub fn determinant<R: Real>(m: &Matrix<R>) -> R {
    let n = m.len();
    let mut a = m.clone();
    let mut det = R::from_i64(1);
    for c in 0..n {
        let mut piv = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[piv][c].abs() {
                piv = r;
            }
        }
        if if R::EXACT { a[piv][c].is_zero() } else { a[piv][c].to_float().is_zero() } {
            return R::zero();
        }
        if piv != c {
            a.swap(piv, c);
            det = det.neg();
        }
        det = det.mul(&a[c][c]);
        for r in c + 1..n {
            let f = a[r][c].div(&a[c][c]);
            if f.is_zero() && R::EXACT {
                continue;
            }
            for k in c..n {
                let v = a[c][k].mul(&f);
                a[r][k] = a[r][k].sub(&v);
            }
        }
    }
    det
}

pub fn resultant<R: Real>(p1: &RealPoly<R>, p2: &RealPoly<R>) -> Result<R> {
    Ok(determinant(&sylvester(p1, p2)?))
}

/// `R(P, P')`; zero exactly when `P` has a repeated complex root.
pub fn discriminant<R: Real>(p: &RealPoly<R>) -> Result<R> {
    if p.degree() < 2 {
        return Err(Error::Precondition("discriminant needs degree at least 2".into()));
    }
    resultant(p, &p.derivative())
}
