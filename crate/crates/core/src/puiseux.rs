//! Newton–Puiseux process for the bifurcation equation `F(ε, β0) = 0`.
//!
//! Lattice points are `(k, j)` with `k` the power of `ε` and `j` the power of
//! `β0` (or of `y` after a substitution). A segment of slope `-1/μ` carries
//! the weights `k𝔭 + j𝔥 = 𝔰` with `μ = 𝔥/𝔭` in lowest terms.

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::coefficients::{general_order, BivariateSeries};
use crate::error::{Error, Result};
use crate::realroots::{isolate_real_roots, RealPoly, RootRecord};
use crate::scalar::{zero_tol, Approx, Exact, Number, Real, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(with = "rational_str")]
    pub mu: Rational,
    pub h: i64,
    pub p: i64,
    /// Intercept of the supporting line `k + μ j = r` on the `k` axis.
    #[serde(with = "rational_str")]
    pub r: Rational,
    pub s: i64,
    /// Length of the projection on the `j` axis.
    pub jproj_len: usize,
    /// Endpoint with the larger `j`.
    pub start: (usize, usize),
    pub end: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonPolygon {
    pub segments: Vec<Segment>,
    pub vertices: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolygonResult {
    Polygon(NewtonPolygon),
    /// No carrier point on the `k` axis: `β0 ≡ 0` solves the equation within
    /// the truncation. Segments reaching down to the lowest `j` are kept.
    JAxisOnly(NewtonPolygon),
    Empty,
}

mod rational_str {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let t = String::deserialize(d)?;
        crate::scalar::parse_rational(&t).map_err(serde::de::Error::custom)
    }
}

/// Lower-left hull of the carrier, wrapped from its lowest-`k` point with
/// the smallest `j` towards `j = min j`; ties keep the farthest point.
pub fn newton_polygon<S: Scalar>(f: &BivariateSeries<S>) -> PolygonResult {
    let carrier = f.carrier();
    if carrier.is_empty() {
        return PolygonResult::Empty;
    }
    let kmin = carrier.iter().map(|c| c.0).min().unwrap();
    let jstart = carrier.iter().filter(|c| c.0 == kmin).map(|c| c.1).min().unwrap();
    let mut cur = (kmin, jstart);
    let mut vertices = vec![cur];
    let mut segments = Vec::new();
    loop {
        let mut best: Option<((usize, usize), Rational)> = None;
        for &(k, j) in &carrier {
            if j >= cur.1 || k < cur.0 {
                continue;
            }
            let mu = Rational::from((k as i64 - cur.0 as i64, cur.1 as i64 - j as i64));
            let better = match &best {
                None => true,
                Some((pt, m)) => mu < *m || (mu == *m && j < pt.1),
            };
            if better {
                best = Some(((k, j), mu));
            }
        }
        let Some((next, mu)) = best else { break };
        let h = mu.numer().to_i64().unwrap();
        let p = mu.denom().to_i64().unwrap();
        let r = Rational::from(&mu * Integer::from(cur.1)) + Integer::from(cur.0);
        let s = p * cur.0 as i64 + h * cur.1 as i64;
        segments.push(Segment { mu, h, p, r, s, jproj_len: cur.1 - next.1, start: cur, end: next });
        vertices.push(next);
        cur = next;
    }
    let poly = NewtonPolygon { segments, vertices };
    if carrier.iter().any(|c| c.1 == 0) {
        PolygonResult::Polygon(poly)
    } else {
        PolygonResult::JAxisOnly(poly)
    }
}

/// `P(c) = Σ_{k𝔭 + j𝔥 = 𝔰} Q_{kj} c^j` with `Q = F σ0^k` at step 0 and
/// `Q = F` afterwards.
pub fn face_polynomial<S: Scalar>(f: &BivariateSeries<S>, seg: &Segment, sigma0: i32, step: usize) -> RealPoly<S::Real> {
    let mut c = vec![S::Real::zero(); seg.start.1 + 1];
    for j in seg.end.1..=seg.start.1 {
        let num = seg.s - seg.h * j as i64;
        if num < 0 || num % seg.p != 0 {
            continue;
        }
        let k = (num / seg.p) as usize;
        let mut v = f.get(k, j).re().clone();
        if step == 0 && sigma0 < 0 && k % 2 == 1 {
            v = v.neg();
        }
        c[j] = v;
    }
    RealPoly::new(c)
}

fn binomial(n: usize, k: usize) -> Integer {
    Integer::from(Integer::binomial_u(n as u32, k as u32))
}

/// `F(σ ε'^𝔭, (c + y) ε'^𝔥) = ε'^𝔰 F'(ε', y)`; returns `F'`.
///
/// For a truncated input the output keeps only orders `k'` that no omitted
/// input term can reach.
pub fn substitute_step<S: Scalar>(
    f: &BivariateSeries<S>,
    c: &S,
    h: i64,
    p: i64,
    s: i64,
    sigma: i32,
) -> Result<BivariateSeries<S>> {
    let (kin, jin) = (f.kmax as i64, f.jmax as i64);
    let kout = if f.polynomial {
        kin * p + jin * h - s
    } else {
        ((kin + 1) * p - s - 1).min((jin + 1) * h - s - 1)
    };
    if kout < 0 {
        let need = (s + 1 + p - 1) / p;
        return Err(Error::InsufficientTruncation(format!(
            "substitution (h={h}, p={p}, s={s}) needs Kmax >= {need} and Jmax >= {}",
            (s + h) / h
        )));
    }
    let kout = kout as usize;
    let mut out = BivariateSeries::zeros(kout, f.jmax);
    out.polynomial = f.polynomial;
    let cpow: Vec<S> = (0..=f.jmax).map(|e| c.pow(e as u32)).collect();
    for (k, j) in f.carrier() {
        let kp = k as i64 * p + j as i64 * h - s;
        if kp < 0 {
            return Err(Error::Precondition(format!("carrier point ({k},{j}) lies below the chosen segment")));
        }
        if kp as usize > kout {
            continue;
        }
        let mut v = f.get(k, j);
        if sigma < 0 && k % 2 == 1 {
            v = v.neg();
        }
        for jp in 0..=j {
            let b = S::from_rational(&Rational::from(binomial(j, jp)));
            let term = v.mul(&b).mul(&cpow[j - jp]);
            let cur: S = out.get(kp as usize, jp);
            out.set(kp as usize, jp, cur.add(&term));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchStatus {
    SimpleRootFound,
    IdenticallyZeroTail,
    NoRealRoot,
    DepthExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchStep {
    pub c: Number,
    /// Multiplicity of `c` as a root of the face polynomial.
    pub mult: usize,
    /// Generality order of the series this step was taken on.
    pub n_in: usize,
    pub segment: Segment,
    /// Face polynomial coefficients in ascending powers.
    pub face: Vec<Number>,
}

/// The series reached at the end of a branch, in whichever scalar mode the
/// branch ended up in.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySeries {
    Exact(BivariateSeries<Exact>),
    Approx(BivariateSeries<Approx>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuiseuxBranch {
    pub sigma0: i32,
    pub steps: Vec<BranchStep>,
    pub status: BranchStatus,
    #[serde(skip)]
    pub tail_series: Option<AnySeries>,
}

impl PuiseuxBranch {
    pub fn is_exact(&self) -> bool {
        self.steps.iter().all(|s| s.c.is_exact())
    }

    /// `dP/dc` at the last root, which is simple for `SimpleRootFound`. A
    /// branch without steps is the implicit-function branch and uses `∂_β F`.
    pub fn derivative_constant(&self) -> Option<Number> {
        let Some(last) = self.steps.last() else {
            return match self.tail_series.as_ref()? {
                AnySeries::Exact(f) => Some(f.get(0, 1).to_number()),
                AnySeries::Approx(f) => Some(f.get(0, 1).to_number()),
            };
        };
        Some(match &last.c {
            Number::Exact(c) => {
                let poly: Vec<Exact> = last.face.iter().map(|x| Exact::from_number(x).unwrap()).collect();
                Number::Exact(eval_derivative(&poly, c))
            }
            Number::Approx(c) => {
                let poly: Vec<Approx> = last.face.iter().map(|x| x.to_approx()).collect();
                Number::Approx(eval_derivative(&poly, c))
            }
        })
    }
}

fn eval_derivative<S: Scalar>(poly: &[S], c: &S) -> S {
    let mut acc = S::zero();
    for (i, a) in poly.iter().enumerate().skip(1).rev() {
        acc = acc.mul(c).add(&a.scale_i64(i as i64));
    }
    acc
}

fn root_number<S: Scalar>(r: &RootRecord<S::Real>) -> Number {
    if S::EXACT && !r.exact {
        Number::Approx(Approx::new(r.value.to_float(), rug::Float::new(crate::scalar::precision())))
    } else {
        S::from_real(r.value.clone()).to_number()
    }
}

struct Ctx {
    sigma0: i32,
    max_depth: usize,
    out: Vec<PuiseuxBranch>,
}

fn explore<S: Scalar>(ctx: &mut Ctx, f: BivariateSeries<S>, steps: Vec<BranchStep>) -> Result<()> {
    let depth = steps.len();
    let n_in = general_order(&f).unwrap_or(f.jmax + 1);
    let before = ctx.out.len();
    let poly = match newton_polygon(&f) {
        PolygonResult::Empty => {
            ctx.out.push(PuiseuxBranch {
                sigma0: ctx.sigma0,
                steps,
                status: BranchStatus::IdenticallyZeroTail,
                tail_series: Some(wrap(f)),
            });
            return Ok(());
        }
        PolygonResult::JAxisOnly(_) if n_in == 1 => {
            // F(ε, 0) vanishes within the truncation and ∂_β F(0, 0) ≠ 0: the
            // implicit-function branch through β0 = 0.
            ctx.out.push(PuiseuxBranch {
                sigma0: ctx.sigma0,
                steps,
                status: BranchStatus::SimpleRootFound,
                tail_series: Some(wrap(f)),
            });
            return Ok(());
        }
        PolygonResult::JAxisOnly(poly) => {
            ctx.out.push(PuiseuxBranch {
                sigma0: ctx.sigma0,
                steps: steps.clone(),
                status: BranchStatus::IdenticallyZeroTail,
                tail_series: Some(wrap(f.clone())),
            });
            poly
        }
        PolygonResult::Polygon(poly) => poly,
    };
    let mut children = 0;
    for seg in &poly.segments {
        let face = face_polynomial(&f, seg, ctx.sigma0, depth);
        let face_numbers: Vec<Number> = face.coeffs().iter().map(|c| c.to_number()).collect();
        let roots = isolate_real_roots(&face)?;
        for root in roots.into_iter().filter(|r| !r.is_zero_root) {
            children += 1;
            if root.multiplicity == face.degree() - seg.end.1 && seg.p != 1 {
                return Err(Error::Precondition(format!(
                    "face polynomial is a pure power but the slope {} is not an integer",
                    seg.mu
                )));
            }
            let step = BranchStep {
                c: root_number::<S>(&root),
                mult: root.multiplicity,
                n_in,
                segment: seg.clone(),
                face: face_numbers.clone(),
            };
            let mut path = steps.clone();
            path.push(step);
            let sigma = if depth == 0 { ctx.sigma0 } else { 1 };
            let exact_root = !S::EXACT || root.exact;
            if root.multiplicity == 1 {
                let tail = if exact_root {
                    substitute_step(&f, &S::from_real(root.value.clone()), seg.h, seg.p, seg.s, sigma).ok().map(wrap)
                } else {
                    None
                };
                ctx.out.push(PuiseuxBranch { sigma0: ctx.sigma0, steps: path, status: BranchStatus::SimpleRootFound, tail_series: tail });
                continue;
            }
            if depth + 1 >= ctx.max_depth {
                ctx.out.push(PuiseuxBranch { sigma0: ctx.sigma0, steps: path, status: BranchStatus::DepthExhausted, tail_series: None });
                continue;
            }
            if exact_root {
                let c = S::from_real(root.value.clone());
                let next = clean_generality(substitute_step(&f, &c, seg.h, seg.p, seg.s, sigma)?, root.multiplicity)?;
                explore(ctx, next, path)?;
            } else {
                let fa = f.map(|x| x.to_approx());
                let c = Approx::new(root.value.to_float(), rug::Float::new(crate::scalar::precision()));
                let next = clean_generality(substitute_step(&fa, &c, seg.h, seg.p, seg.s, sigma)?, root.multiplicity)?;
                explore(ctx, next, path)?;
            }
        }
    }
    if children == 0 && ctx.out.len() == before {
        ctx.out.push(PuiseuxBranch { sigma0: ctx.sigma0, steps, status: BranchStatus::NoRealRoot, tail_series: None });
    }
    Ok(())
}

/// The `k = 0` row below the root multiplicity vanishes in exact arithmetic;
/// in numeric mode those entries are rounding residue and are cleared.
fn clean_generality<S: Scalar>(mut f: BivariateSeries<S>, mult: usize) -> Result<BivariateSeries<S>> {
    for j in 0..mult.min(f.jmax + 1) {
        let v = f.get(0, j);
        if v.is_zero() {
            f.set(0, j, S::zero());
        } else if !S::EXACT && v.abs_f64() < zero_tol().sqrt() {
            return Err(Error::PrecisionExhausted("substituted series is not general of the expected order".into()));
        } else if S::EXACT {
            return Err(Error::Precondition(format!("substituted series has a nonzero y^{j} term at order 0")));
        }
    }
    if mult <= f.jmax && f.get(0, mult).is_zero() {
        return Err(Error::Precondition(format!("substituted series is not general of order {mult}")));
    }
    Ok(f)
}

fn wrap<S: Scalar>(f: BivariateSeries<S>) -> AnySeries {
    if S::EXACT {
        AnySeries::Exact(f.map(|x| Exact::from_number(&x.to_number()).unwrap()))
    } else {
        AnySeries::Approx(f.map(|x| x.to_approx()))
    }
}

/// Depth-first exploration of every (segment, nonzero real root) choice for
/// one sign of `ε`. Branches come out ordered by slope, then root value.
pub fn expand_branches<S: Scalar>(f0: &BivariateSeries<S>, sigma0: i32, max_depth: usize) -> Result<Vec<PuiseuxBranch>> {
    let mut ctx = Ctx { sigma0, max_depth: max_depth.max(1), out: Vec::new() };
    explore(&mut ctx, f0.clone(), Vec::new())?;
    Ok(ctx.out)
}

/// Cumulative exponents of a branch: `β0 = Σ c_i η^{𝔥_i} + …`, `η = |ε|^{1/𝔭}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub pp: i64,
    pub h_list: Vec<i64>,
    pub s_list: Vec<i64>,
    pub leading_terms: Vec<(i64, Number)>,
}

pub fn assemble_exponents(branch: &PuiseuxBranch) -> Result<Exponents> {
    if !matches!(branch.status, BranchStatus::SimpleRootFound | BranchStatus::IdenticallyZeroTail) {
        return Err(Error::Precondition(format!("branch status {:?} has no exponents", branch.status)));
    }
    let steps = &branch.steps;
    let n = steps.len();
    // tail[i] = p^{(i+1)} ... p^{(n-1)}
    let mut tail = vec![1i64; n + 1];
    for i in (0..n).rev() {
        tail[i] = tail[i + 1] * steps[i].segment.p;
    }
    let pp = tail[0];
    let mut h_list = Vec::with_capacity(n);
    let mut s_list = Vec::with_capacity(n);
    let (mut h, mut s) = (0i64, 0i64);
    for (i, st) in steps.iter().enumerate() {
        h += st.segment.h * tail[i + 1];
        s += st.segment.s * tail[i + 1];
        h_list.push(h);
        s_list.push(s);
    }
    let bound: i64 = steps.iter().map(|s| s.n_in as i64).product();
    if pp > bound.max(1) {
        return Err(Error::Precondition(format!("ramification {pp} exceeds the product of generality orders {bound}")));
    }
    for st in steps {
        if st.segment.p > st.n_in as i64 {
            return Err(Error::Precondition("step denominator exceeds the generality order".into()));
        }
    }
    let leading_terms = h_list.iter().zip(steps).map(|(&h, st)| (h, st.c.clone())).collect();
    Ok(Exponents { pp, h_list, s_list, leading_terms })
}
