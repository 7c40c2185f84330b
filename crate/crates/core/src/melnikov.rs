//! The subharmonic Melnikov function, its zeros with their orders, and the
//! higher-order Melnikov functions used when the first one vanishes
//! identically.

use rug::float::Constant;
use rug::{Float, Rational};

use crate::coefficients::{table_symbolic, CoeffTable};
use crate::error::{Error, Result};
use crate::realroots::{isolate_real_roots, RealPoly};
use crate::scalar::{ident_tol, precision, zero_tol, Approx, Number, Real, Scalar};
use crate::series::{tt_eval_resonant, PlanarSystem};
use crate::trig::TrigPoly;

/// `M_κ(t0)` as a trig polynomial in `z = e^{i t0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelnikovFn<S> {
    /// 0 for the first-order average, `κ` for `Γ̄_0^{(κ+1)}(0, t0)`.
    pub order_kappa: usize,
    pub series: TrigPoly<S>,
}

impl<S: Scalar> MelnikovFn<S> {
    /// Exact zero test, or every harmonic below [`ident_tol`] for floats.
    pub fn is_identically_zero(&self) -> bool {
        if S::EXACT {
            self.series.is_identically_zero()
        } else {
            self.series.is_negligible(ident_tol())
        }
    }

    /// `(a, b)` with `M = a_0 + Σ a_m cos m t0 + b_m sin m t0`.
    pub fn harmonics(&self) -> (Vec<S::Real>, Vec<S::Real>) {
        self.series.real_form()
    }

    pub fn eval_f64(&self, t0: f64) -> f64 {
        let z = Approx::cis(&Float::with_val(precision(), t0));
        self.series.map(|c| c.to_approx()).eval(&z).re.to_f64()
    }
}

/// `M(t0)`: the `ν = 0` slot of `G` along the unperturbed resonant motion.
pub fn melnikov_function<S: Scalar>(sys: &PlanarSystem<S>) -> MelnikovFn<S> {
    let slots = tt_eval_resonant(&sys.g, &sys.res);
    MelnikovFn { order_kappa: 0, series: slots.get(&0).cloned().unwrap_or_else(TrigPoly::zero) }
}

/// A zero `t0` of order `n` with `D = M^{(n)}(t0) ≠ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroRecord {
    /// In `[0, 2π)`.
    pub t0: Float,
    /// `e^{i t0}`, exact when it is a Gaussian rational.
    pub z: Number,
    pub n: usize,
    pub d: Number,
}

impl ZeroRecord {
    pub fn t0_f64(&self) -> f64 {
        self.t0.to_f64()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Zeros {
    IdenticallyZero,
    Found(Vec<ZeroRecord>),
}

fn chebyshev<R: Real>(n: usize) -> (Vec<RealPoly<R>>, Vec<RealPoly<R>>) {
    let x = RealPoly::new(vec![R::zero(), R::from_i64(1)]);
    let two_x = x.scale(&R::from_i64(2));
    let mut t = vec![RealPoly::one(), x];
    let mut u = vec![RealPoly::one(), two_x.clone()];
    while t.len() <= n {
        let k = t.len();
        t.push(two_x.mul(&t[k - 1]).sub(&t[k - 2]));
        u.push(two_x.mul(&u[k - 1]).sub(&u[k - 2]));
    }
    (t, u)
}

/// `M(t) = A(cos t) + sin t · B(cos t)`; returns `(A, B)`.
pub fn cos_sin_split<S: Scalar>(m: &MelnikovFn<S>) -> (RealPoly<S::Real>, RealPoly<S::Real>) {
    let (a, b) = m.harmonics();
    let n = a.len().saturating_sub(1);
    let (t, u) = chebyshev::<S::Real>(n.max(1));
    let mut pa = RealPoly::zero();
    let mut pb = RealPoly::zero();
    for k in 0..=n {
        pa = pa.add(&t[k].scale(&a[k]));
        if k >= 1 {
            pb = pb.add(&u[k - 1].scale(&b[k]));
        }
    }
    (pa, pb)
}

/// `A^2 - (1 - x^2) B^2 = M(t) M(-t)` as a polynomial in `x = cos t`.
pub fn cosine_resolvent<S: Scalar>(m: &MelnikovFn<S>) -> RealPoly<S::Real> {
    let (a, b) = cos_sin_split(m);
    let one_minus_x2 = RealPoly::new(vec![S::Real::from_i64(1), S::Real::zero(), S::Real::from_i64(-1)]);
    a.mul(&a).sub(&one_minus_x2.mul(&b.mul(&b)))
}

/// Zeros of `M` on the unit circle counted with multiplicity, read off the
/// real roots of [`cosine_resolvent`] in `[-1, 1]`.
pub fn unit_circle_root_count<S: Scalar>(m: &MelnikovFn<S>) -> Result<usize> {
    let r = cosine_resolvent(m);
    let one = S::Real::from_i64(1);
    let roots = isolate_real_roots(&r)?;
    Ok(roots
        .iter()
        .filter(|x| x.value.abs() <= one || x.value.abs().sub(&one).to_f64() < zero_tol())
        .map(|x| x.multiplicity)
        .sum())
}

enum Decision {
    Zero,
    Nonzero(Number),
}

fn decide_numeric(v: &Approx, scale: f64) -> Result<Decision> {
    let rel = v.abs_f64() / scale.max(f64::MIN_POSITIVE);
    let tol = zero_tol();
    if rel < tol {
        Ok(Decision::Zero)
    } else if rel < tol.sqrt() {
        Err(Error::PrecisionExhausted(format!("Melnikov derivative of relative size {rel:e} is undecidable")))
    } else {
        let re = v.re.clone();
        let im = Float::new(re.prec());
        Ok(Decision::Nonzero(Number::Approx(Approx::new(re, im))))
    }
}

/// Order and `D` at a candidate point; `None` if `M(t0) ≠ 0`.
fn order_at<S: Scalar>(m: &TrigPoly<S>, z: Option<&S>, t0: &Float) -> Result<Option<(usize, Number)>> {
    let maxn = 2 * m.degree().max(1) as usize + 1;
    let approx = m.map(|c| c.to_approx());
    let zn = Approx::cis(t0);
    for j in 0..=maxn {
        let dec = match z {
            Some(z) => {
                let v = m.nth_derivative(j).eval(z);
                if v.is_zero() {
                    Decision::Zero
                } else {
                    Decision::Nonzero(v.to_number())
                }
            }
            None => {
                let scale: f64 = approx
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.abs_f64() * ((approx.lo + i as i64).unsigned_abs() as f64).powi(j as i32))
                    .sum();
                decide_numeric(&approx.nth_derivative(j).eval(&zn), scale)?
            }
        };
        match dec {
            Decision::Zero => continue,
            Decision::Nonzero(d) => return Ok(if j == 0 { None } else { Some((j, d)) }),
        }
    }
    Err(Error::PrecisionExhausted("all derivatives vanish at a point of a nonzero trig polynomial".into()))
}

/// Zeros in `[0, 2π)` with their orders, sorted by `t0`.
pub fn find_zeros_with_order<S: Scalar>(m: &MelnikovFn<S>) -> Result<Zeros> {
    if m.is_identically_zero() {
        return Ok(Zeros::IdenticallyZero);
    }
    let bits = precision();
    let pi = Float::with_val(bits, Constant::Pi);
    let two_pi = Float::with_val(bits, &pi * 2u32);
    let one = S::Real::from_i64(1);
    let r = cosine_resolvent(m);
    let mut out = Vec::new();
    for root in isolate_real_roots(&r)? {
        let x = &root.value;
        let excess = x.abs().sub(&one);
        if excess > S::Real::zero() && !(excess.to_f64() < zero_tol() && !S::EXACT) {
            continue;
        }
        let xf = x.to_float();
        let theta = if xf >= 1 {
            Float::new(bits)
        } else if xf <= -1 {
            pi.clone()
        } else {
            Float::with_val(bits, xf.acos_ref())
        };
        let at_end = xf.clone().abs() >= 1 || (root.exact && (x.sub(&one).is_zero() || x.add(&one).is_zero()));
        let exact_y = if root.exact && S::EXACT { one.sub(&x.mul(x)).sqrt() } else { None };
        let mut cands: Vec<(Float, Option<S>)> = Vec::new();
        let zplus = exact_y.as_ref().map(|y| S::new(x.clone(), y.clone()));
        cands.push((theta.clone(), zplus));
        if !at_end {
            let zminus = exact_y.as_ref().map(|y| S::new(x.clone(), y.neg()));
            cands.push((Float::with_val(bits, &two_pi - &theta), zminus));
        }
        for (t0, z) in cands {
            if let Some((n, d)) = order_at(&m.series, z.as_ref(), &t0)? {
                let zn = match &z {
                    Some(z) => z.to_number(),
                    None => Number::Approx(Approx::cis(&t0)),
                };
                out.push(ZeroRecord { t0, z: zn, n, d });
            }
        }
    }
    out.sort_by(|a, b| a.t0.partial_cmp(&b.t0).unwrap());
    Ok(Zeros::Found(out))
}

/// Outcome of the higher-order search.
#[derive(Clone, Debug, PartialEq)]
pub enum HigherMelnikov<S> {
    Found { kappa: usize, m: MelnikovFn<S> },
    AllZeroUpTo(usize),
}

/// Symbolic-phase table with `β0` counted to `jmax`, solved through order
/// `kappa_max + 1`, and the first non-vanishing `M_κ` (`κ ≥ 1`).
pub fn higher_melnikov_table<S: Scalar>(
    sys: &PlanarSystem<S>,
    kappa_max: usize,
    jmax: usize,
) -> Result<(HigherMelnikov<S>, CoeffTable<S, TrigPoly<S>>)> {
    if !melnikov_function(sys).is_identically_zero() {
        return Err(Error::Precondition("the first-order Melnikov function does not vanish identically".into()));
    }
    let mut table = table_symbolic(sys, jmax);
    table.solve_to(1);
    for k in 2..=kappa_max + 1 {
        table.solve_to(k);
        let m = MelnikovFn { order_kappa: k - 1, series: table.gamma_at(k, 0, 0) };
        if !m.is_identically_zero() {
            return Ok((HigherMelnikov::Found { kappa: k - 1, m }, table));
        }
    }
    Ok((HigherMelnikov::AllZeroUpTo(kappa_max), table))
}

pub fn higher_melnikov<S: Scalar>(sys: &PlanarSystem<S>, kappa_max: usize) -> Result<HigherMelnikov<S>> {
    higher_melnikov_table(sys, kappa_max, 0).map(|r| r.0)
}

/// `j! Γ̄_0^{(κ+1, j)} - (-ω(A0))^{-j} d^j M_κ / dt0^j` as a trig polynomial;
/// it vanishes identically when the recursion and the Melnikov function agree.
pub fn derivative_identity_defect<S: Scalar>(
    table: &CoeffTable<S, TrigPoly<S>>,
    m: &MelnikovFn<S>,
    j: usize,
) -> Result<TrigPoly<S>> {
    let res = table.res;
    if res.p == 0 {
        return Err(Error::Precondition("derivative identity needs a nonzero frequency".into()));
    }
    let mut fact = S::one();
    for i in 2..=j as i64 {
        fact = fact.scale_i64(i);
    }
    let lhs = table.gamma_at(m.order_kappa + 1, j, 0).scaled(&fact);
    // (-p/q)^{-j} = (-q/p)^j
    let w = S::from_rational(&Rational::from((-res.q, res.p))).pow(j as u32);
    let rhs = m.series.nth_derivative(j).scaled(&w);
    Ok(lhs.sub(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use rug::Rational;

    fn half_i() -> Exact {
        Exact::new(Rational::new(), Rational::from((1, 2)))
    }

    /// `-sin t0`
    fn minus_sin() -> MelnikovFn<Exact> {
        MelnikovFn { order_kappa: 0, series: TrigPoly::monomial(1, half_i()).add(&TrigPoly::monomial(-1, half_i().neg())) }
    }

    #[test]
    fn simple_zeros_of_minus_sin() {
        let Zeros::Found(z) = find_zeros_with_order(&minus_sin()).unwrap() else { panic!() };
        assert_eq!(z.len(), 2);
        assert_eq!(z[0].n, 1);
        assert_eq!(z[0].d, Number::Exact(Exact::from_i64(-1)));
        assert!((z[1].t0_f64() - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(z[1].d, Number::Exact(Exact::from_i64(1)));
    }

    #[test]
    fn triple_zeros_of_minus_sin_cubed() {
        let s = minus_sin().series;
        let m = MelnikovFn { order_kappa: 0, series: s.times(&s).times(&s) };
        // (-sin)^3 = -sin^3
        let Zeros::Found(z) = find_zeros_with_order(&m).unwrap() else { panic!() };
        assert_eq!(z.iter().map(|r| r.n).collect::<Vec<_>>(), vec![3, 3]);
        assert_eq!(z[0].d, Number::Exact(Exact::from_i64(-6)));
        assert_eq!(z[1].d, Number::Exact(Exact::from_i64(6)));
        assert_eq!(unit_circle_root_count(&m).unwrap(), 6);
    }

    #[test]
    fn zero_function_is_flagged() {
        let m = MelnikovFn::<Exact> { order_kappa: 0, series: TrigPoly::zero() };
        assert_eq!(find_zeros_with_order(&m).unwrap(), Zeros::IdenticallyZero);
    }

    #[test]
    fn irrational_zero_positions() {
        // cos t0 - 1/3 has zeros at ±acos(1/3)
        let m = MelnikovFn {
            order_kappa: 0,
            series: TrigPoly::monomial(1, Exact::ratio(1, 2))
                .add(&TrigPoly::monomial(-1, Exact::ratio(1, 2)))
                .add(&TrigPoly::constant(Exact::ratio(-1, 3))),
        };
        let Zeros::Found(z) = find_zeros_with_order(&m).unwrap() else { panic!() };
        assert_eq!(z.len(), 2);
        assert!((z[0].t0_f64() - (1.0f64 / 3.0).acos()).abs() < 1e-14);
        assert!(!z[0].z.is_exact());
        assert_eq!(z[0].n, 1);
    }

    #[test]
    fn pythagorean_zero_stays_exact() {
        // 5 sin t0 - 4 vanishes where (cos, sin) = (±3/5, 4/5)
        let m = MelnikovFn {
            order_kappa: 0,
            series: TrigPoly::monomial(1, Exact::new(Rational::new(), Rational::from((-5, 2))))
                .add(&TrigPoly::monomial(-1, Exact::new(Rational::new(), Rational::from((5, 2)))))
                .add(&TrigPoly::constant(Exact::from_i64(-4))),
        };
        let Zeros::Found(z) = find_zeros_with_order(&m).unwrap() else { panic!() };
        assert_eq!(z.len(), 2);
        assert!(z.iter().all(|r| r.z.is_exact() && r.n == 1));
    }
}
