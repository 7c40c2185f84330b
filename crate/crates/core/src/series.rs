//! Trigonometric–Taylor representation of the vector field and resonance data.
//!
//! A [`TrigTaylor`] stores `Σ e^{i(σα + σ't)} f_{σσ'}(A)` where every
//! `f_{σσ'}` is a truncated polynomial in `A - A0`. Coefficient `s` of that
//! polynomial equals `∂_A^s f_{σσ'}(A0) / s!`.

use std::collections::BTreeMap;

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::{Exact, Scalar};
use crate::trig::TrigPoly;

/// `ω(A0) = p/q` in lowest terms with `q > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Resonance {
    pub p: i64,
    pub q: i64,
}

impl Resonance {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::Parse(format!("resonance denominator must be positive, got {q}")));
        }
        let g = Integer::from(p).gcd(&Integer::from(q));
        if g != 1 {
            return Err(Error::Parse(format!("resonance {p}/{q} is not in lowest terms")));
        }
        Ok(Resonance { p, q })
    }

    /// Global mode `ν = pσ + qσ'` of a Fourier pair.
    pub fn nu(&self, sigma: i64, sigma_p: i64) -> i64 {
        self.p * sigma + self.q * sigma_p
    }

    pub fn ratio(&self) -> Rational {
        Rational::from((self.p, self.q))
    }

    /// Period `T = 2πq` in units of `2π`.
    pub fn period_turns(&self) -> i64 {
        self.q
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrigTaylor<S> {
    /// Truncation degree in `A - A0`.
    pub deg: usize,
    pub modes: BTreeMap<(i64, i64), Vec<S>>,
}

impl<S: Scalar> TrigTaylor<S> {
    pub fn zero(deg: usize) -> Self {
        TrigTaylor { deg, modes: BTreeMap::new() }
    }

    /// Adds `poly` (coefficients in powers of `A - A0`) to mode `(σ, σ')`.
    pub fn add_mode(&mut self, sigma: i64, sigma_p: i64, poly: &[S]) {
        let deg = self.deg;
        let e = self.modes.entry((sigma, sigma_p)).or_insert_with(|| vec![S::zero(); deg + 1]);
        for (i, c) in poly.iter().enumerate().take(deg + 1) {
            e[i] = e[i].add(c);
        }
        if e.iter().all(|c| c.is_zero()) {
            self.modes.remove(&(sigma, sigma_p));
        }
    }

    /// `∂_A^s f_{σσ'}(A0) / s!`.
    pub fn coeff(&self, sigma: i64, sigma_p: i64, s: usize) -> S {
        self.modes
            .get(&(sigma, sigma_p))
            .and_then(|p| p.get(s).cloned())
            .unwrap_or_else(S::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// Largest `|pσ + qσ'|` over the support.
    pub fn radius(&self, res: &Resonance) -> i64 {
        self.modes.keys().map(|&(s, sp)| res.nu(s, sp).abs()).max().unwrap_or(0)
    }

    /// Checks `f_{-σ,-σ'} = conj(f_{σσ'})` coefficientwise.
    pub fn check_real(&self, name: &str) -> Result<()> {
        for (&(s, sp), poly) in &self.modes {
            for (i, c) in poly.iter().enumerate() {
                let partner = self.coeff(-s, -sp, i);
                if !c.sub(&partner.conj()).is_zero() {
                    return Err(Error::NotReal(format!(
                        "{name}: mode ({s},{sp}) coefficient {i} is not conjugate to mode ({},{})",
                        -s, -sp
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TrigTaylor<T> {
        TrigTaylor {
            deg: self.deg,
            modes: self.modes.iter().map(|(k, v)| (*k, v.iter().map(&f).collect())).collect(),
        }
    }
}

/// Product of two trig–Taylor series, truncated at the smaller degree.
pub fn tt_mul<S: Scalar>(a: &TrigTaylor<S>, b: &TrigTaylor<S>) -> TrigTaylor<S> {
    let deg = a.deg.min(b.deg);
    let mut out = TrigTaylor::zero(deg);
    for (&(s1, p1), f) in &a.modes {
        for (&(s2, p2), g) in &b.modes {
            let mut prod = vec![S::zero(); deg + 1];
            for (i, x) in f.iter().enumerate().take(deg + 1) {
                for (j, y) in g.iter().enumerate().take(deg + 1 - i) {
                    prod[i + j] = prod[i + j].add(&x.mul(y));
                }
            }
            out.add_mode(s1 + s2, p1 + p2, &prod);
        }
    }
    out
}

/// Evaluates `f(α0(t), A0, t + t0)` along the resonant unperturbed motion:
/// global mode `ν` maps to the trig polynomial `Σ f_{σσ'}(A0) e^{iσ't0}` over
/// pairs with `pσ + qσ' = ν`.
pub fn tt_eval_resonant<S: Scalar>(f: &TrigTaylor<S>, res: &Resonance) -> BTreeMap<i64, TrigPoly<S>> {
    let mut out: BTreeMap<i64, TrigPoly<S>> = BTreeMap::new();
    for (&(s, sp), poly) in &f.modes {
        let term = TrigPoly::monomial(sp, poly[0].clone());
        let e = out.entry(res.nu(s, sp)).or_insert_with(TrigPoly::zero);
        *e = e.add(&term);
    }
    out.retain(|_, v| !v.is_identically_zero());
    out
}

/// `α' = ω(A) + εF(α, A, t)`, `A' = εG(α, A, t)` expanded about `A0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarSystem<S> {
    /// Taylor coefficients `ω_s = ∂^s ω(A0) / s!`.
    pub omega: Vec<S>,
    pub f: TrigTaylor<S>,
    pub g: TrigTaylor<S>,
    pub a0: Rational,
    pub res: Resonance,
}

impl<S: Scalar> PlanarSystem<S> {
    pub fn omega_prime(&self) -> S {
        self.omega.get(1).cloned().unwrap_or_else(S::zero)
    }

    /// `∂^s ω(A0) / s!`, zero past the stored degree.
    pub fn omega_coeff(&self, s: usize) -> S {
        self.omega.get(s).cloned().unwrap_or_else(S::zero)
    }

    /// Largest `|ν|` produced by a single F or G mode.
    pub fn radius(&self) -> i64 {
        self.f.radius(&self.res).max(self.g.radius(&self.res)).max(1)
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> PlanarSystem<T> {
        PlanarSystem {
            omega: self.omega.iter().map(f).collect(),
            f: self.f.map(f),
            g: self.g.map(f),
            a0: self.a0.clone(),
            res: self.res,
        }
    }
}

impl PlanarSystem<Exact> {
    pub fn to_scalar<T: Scalar>(&self) -> PlanarSystem<T> {
        self.map(|x| T::from_exact(x))
    }
}

/// Checks resonance, twist and reality of the system.
pub fn validate_system<S: Scalar>(sys: &PlanarSystem<S>) -> Result<()> {
    let w0 = sys.omega_coeff(0);
    if !w0.is_real() || !sys.omega.iter().all(|c| c.is_real()) {
        return Err(Error::NotReal("frequency map has complex coefficients".into()));
    }
    let target = S::from_rational(&sys.res.ratio());
    if !w0.sub(&target).is_zero() {
        return Err(Error::NonResonant {
            p: sys.res.p,
            q: sys.res.q,
            found: format!("{:?}", w0.re()),
        });
    }
    if sys.omega_prime().is_zero() {
        return Err(Error::DegenerateFrequency);
    }
    sys.f.check_real("F")?;
    sys.g.check_real("G")?;
    Ok(())
}

/// Re-expands `Σ a_n A^n` about `A0`: returns `c_s = Σ_n C(n,s) a_n A0^{n-s}`.
pub fn taylor_shift(coeffs: &[Rational], a0: &Rational) -> Vec<Rational> {
    let n = coeffs.len();
    let mut out = vec![Rational::new(); n];
    for (k, a) in coeffs.iter().enumerate() {
        let mut binom = Integer::from(1);
        for s in 0..=k {
            if s > 0 {
                binom = binom * (k - s + 1) as u64 / s as u64;
            }
            let pw = Rational::from(a0.pow((k - s) as i32));
            out[s] += Rational::from(a * &pw) * &binom;
        }
    }
    out
}
