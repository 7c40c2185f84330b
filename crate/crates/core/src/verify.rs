//! Numerical checks of a truncated `η`-series against the equations of
//! motion: the residual of the synthesized orbit, and a shooting method that
//! converges to the true periodic orbit from the series prediction.
//!
//! Both work in the frame `t ↦ t + t0`: the orbit starts at `t = 0` on the
//! section and the forcing is evaluated at `t + t0`.

use rayon::prelude::*;
use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eta::EtaSolution;
use crate::scalar::{Approx, Real, Scalar};
use crate::series::PlanarSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Mantissa bits of every float in the checks.
    pub bits: u32,
    /// Integrator steps per period `2πq`.
    pub steps: usize,
    /// Grid points per period for the residual.
    pub grid: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { bits: 128, steps: 4096, grid: 64 }
    }
}

/// One Fourier mode of `F` or `G` with its polynomial in `A - A0`.
#[derive(Clone, Debug)]
struct Mode {
    sigma: i64,
    sigma_p: i64,
    re: Vec<Float>,
    im: Vec<Float>,
}

/// The vector field in real floating point.
#[derive(Clone, Debug)]
pub struct Field {
    bits: u32,
    a0: Float,
    omega: Vec<Float>,
    f: Vec<Mode>,
    g: Vec<Mode>,
    pub p: i64,
    pub q: i64,
}

/// Values and first partials of one trig–Taylor function.
#[derive(Clone, Debug)]
struct Eval {
    v: Float,
    da: Float,
    dx: Float,
}

impl Field {
    pub fn new<S: Scalar>(sys: &PlanarSystem<S>, bits: u32) -> Self {
        let modes = |t: &crate::series::TrigTaylor<S>| {
            t.modes
                .iter()
                .map(|(&(s, sp), poly)| Mode {
                    sigma: s,
                    sigma_p: sp,
                    re: poly.iter().map(|c| Float::with_val(bits, c.re().to_float())).collect(),
                    im: poly.iter().map(|c| Float::with_val(bits, c.im().to_float())).collect(),
                })
                .collect()
        };
        Field {
            bits,
            a0: Float::with_val(bits, &sys.a0),
            omega: sys.omega.iter().map(|c| Float::with_val(bits, c.re().to_float())).collect(),
            f: modes(&sys.f),
            g: modes(&sys.g),
            p: sys.res.p,
            q: sys.res.q,
        }
    }

    fn zero(&self) -> Float {
        Float::new(self.bits)
    }

    /// `(Σ c_s x^s, Σ s c_s x^{s-1})`.
    fn horner(&self, c: &[Float], x: &Float) -> (Float, Float) {
        let mut v = self.zero();
        let mut d = self.zero();
        for coef in c.iter().rev() {
            d = Float::with_val(self.bits, &d * x) + &v;
            v = Float::with_val(self.bits, &v * x) + coef;
        }
        (v, d)
    }

    /// `ω(A)` and `ω'(A)`.
    pub fn omega(&self, a: &Float) -> (Float, Float) {
        let x = Float::with_val(self.bits, a - &self.a0);
        self.horner(&self.omega, &x)
    }

    fn eval_modes(&self, modes: &[Mode], alpha: &Float, a: &Float, tau: &Float) -> Eval {
        let x = Float::with_val(self.bits, a - &self.a0);
        let mut out = Eval { v: self.zero(), da: self.zero(), dx: self.zero() };
        for m in modes {
            let theta = Float::with_val(self.bits, alpha * m.sigma) + Float::with_val(self.bits, tau * m.sigma_p);
            let (s, c) = theta.sin_cos(self.zero());
            let (pr, dpr) = self.horner(&m.re, &x);
            let (pi, dpi) = self.horner(&m.im, &x);
            // Re[(pr + i pi) e^{iθ}]
            let v = Float::with_val(self.bits, &pr * &c) - Float::with_val(self.bits, &pi * &s);
            let dx = Float::with_val(self.bits, &dpr * &c) - Float::with_val(self.bits, &dpi * &s);
            let da = -(Float::with_val(self.bits, &pr * &s) + Float::with_val(self.bits, &pi * &c)) * m.sigma;
            out.v += v;
            out.dx += dx;
            out.da += da;
        }
        out
    }

    /// Right-hand side `(α', A')` at time `tau` of the forcing.
    pub fn rhs(&self, eps: &Float, alpha: &Float, a: &Float, tau: &Float) -> (Float, Float) {
        let (w, _) = self.omega(a);
        let f = self.eval_modes(&self.f, alpha, a, tau);
        let g = self.eval_modes(&self.g, alpha, a, tau);
        (w + Float::with_val(self.bits, eps * &f.v), Float::with_val(self.bits, eps * &g.v))
    }

    /// Right-hand side together with the Jacobian `∂(α', A')/∂(α, A)`.
    fn rhs_jac(&self, eps: &Float, alpha: &Float, a: &Float, tau: &Float) -> ([Float; 2], [[Float; 2]; 2]) {
        let (w, wp) = self.omega(a);
        let f = self.eval_modes(&self.f, alpha, a, tau);
        let g = self.eval_modes(&self.g, alpha, a, tau);
        let e = |x: &Float| Float::with_val(self.bits, eps * x);
        (
            [w + e(&f.v), e(&g.v)],
            [[e(&f.da), wp + e(&f.dx)], [e(&g.da), e(&g.dx)]],
        )
    }
}

/// The series as real functions of `t` at a given `η`.
#[derive(Clone, Debug)]
pub struct Orbit {
    bits: u32,
    p: i64,
    q: i64,
    a0: Float,
    beta0: Float,
    /// `(ν, Re, Im)` of `Σ_k η^k β̃^{[k]}_ν`.
    bt: Vec<(i64, Float, Float)>,
    bc: Vec<(i64, Float, Float)>,
}

fn collect_modes(
    m: &std::collections::BTreeMap<(usize, i64), Approx>,
    pows: &[Float],
    bits: u32,
) -> Vec<(i64, Float, Float)> {
    let mut acc: std::collections::BTreeMap<i64, (Float, Float)> = std::collections::BTreeMap::new();
    for (&(k, nu), v) in m {
        let e = acc.entry(nu).or_insert_with(|| (Float::new(bits), Float::new(bits)));
        e.0 += Float::with_val(bits, &v.re * &pows[k]);
        e.1 += Float::with_val(bits, &v.im * &pows[k]);
    }
    acc.into_iter().map(|(nu, (r, i))| (nu, r, i)).collect()
}

impl Orbit {
    pub fn new(field: &Field, sol: &EtaSolution<Approx>, eta: &Float) -> Self {
        let bits = field.bits;
        let pows: Vec<Float> = (0..=sol.kmax).map(|k| Float::with_val(bits, eta.pow(k as u32))).collect();
        let mut beta0 = Float::new(bits);
        for (k, b) in sol.beta0.iter().enumerate() {
            beta0 += Float::with_val(bits, &b.re * &pows[k]);
        }
        Orbit {
            bits,
            p: field.p,
            q: field.q,
            a0: field.a0.clone(),
            beta0,
            bt: collect_modes(&sol.beta_tilde, &pows, bits),
            bc: collect_modes(&sol.bcap, &pows, bits),
        }
    }

    /// `(x(t), x'(t))` for a real Fourier sum in `e^{iνt/q}`.
    fn fourier(&self, modes: &[(i64, Float, Float)], t: &Float) -> (Float, Float) {
        let mut v = Float::new(self.bits);
        let mut d = Float::new(self.bits);
        for (nu, re, im) in modes {
            let th = Float::with_val(self.bits, t * *nu) / self.q;
            let (s, c) = th.sin_cos(Float::new(self.bits));
            v += Float::with_val(self.bits, re * &c) - Float::with_val(self.bits, im * &s);
            let w = Float::with_val(self.bits, -(Float::with_val(self.bits, re * &s) + Float::with_val(self.bits, im * &c)));
            d += w * *nu / self.q;
        }
        (v, d)
    }

    /// `(α, A, α', A')` at time `t`.
    pub fn state(&self, t: &Float) -> [Float; 4] {
        let (bt, dbt) = self.fourier(&self.bt, t);
        let (bc, dbc) = self.fourier(&self.bc, t);
        let lin = Float::with_val(self.bits, t * self.p) / self.q;
        let rate = Float::with_val(self.bits, self.p) / self.q;
        [lin + &self.beta0 + bt, Float::with_val(self.bits, &self.a0 + &bc), rate + dbt, dbc]
    }
}

fn two_pi(bits: u32) -> Float {
    Float::with_val(bits, Constant::Pi) * 2u32
}

fn t0_of(z: &Approx, bits: u32) -> Float {
    let y = Float::with_val(bits, &z.im);
    let x = Float::with_val(bits, &z.re);
    let mut t = y.atan2(&x);
    if t < 0 {
        t += two_pi(bits);
    }
    t
}

fn eps_of(sol: &EtaSolution<Approx>, eta: &Float, bits: u32) -> Float {
    Float::with_val(bits, eta.pow(sol.pp as u32)) * sol.sigma0
}

/// Max-norm residual of the synthesized orbit on a uniform grid over one
/// period. Zero at `η = 0`.
pub fn residual_at<S: Scalar>(sys: &PlanarSystem<S>, sol: &EtaSolution<Approx>, eta: f64, opts: &VerifyOptions) -> Float {
    let bits = opts.bits;
    let field = Field::new(sys, bits);
    let eta = Float::with_val(bits, eta);
    let eps = eps_of(sol, &eta, bits);
    let orbit = Orbit::new(&field, sol, &eta);
    let t0 = t0_of(&sol.z, bits);
    let period = two_pi(bits) * field.q;
    let mut worst = Float::new(bits);
    for i in 0..opts.grid {
        let t = Float::with_val(bits, &period * i as u32) / opts.grid as u32;
        let [alpha, a, da, dx] = orbit.state(&t);
        let tau = Float::with_val(bits, &t + &t0);
        let (ra, rx) = field.rhs(&eps, &alpha, &a, &tau);
        let r1 = Float::with_val(bits, &da - &ra).abs();
        let r2 = Float::with_val(bits, &dx - &rx).abs();
        worst = worst.max(&r1).max(&r2);
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `(η, max residual)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `ln residual` against `ln η`.
    pub slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Residuals over a ladder of `η` values and their fitted slope, which
/// should approach `Kmax + 1`.
pub fn residual_check<S: Scalar>(sys: &PlanarSystem<S>, sol: &EtaSolution<Approx>, etas: &[f64], opts: &VerifyOptions) -> ResidualReport {
    let points: Vec<(f64, f64)> = etas.par_iter().map(|&e| (e, residual_at(sys, sol, e, opts).to_f64())).collect();
    let slope = loglog_slope(&points);
    ResidualReport { points, slope }
}

/// Gauss–Legendre collocation with four stages: an implicit Runge–Kutta
/// method of order eight.
#[derive(Clone, Debug)]
pub struct GaussLegendre4 {
    bits: u32,
    c: [Float; 4],
    a: [[Float; 4]; 4],
    b: [Float; 4],
}

impl GaussLegendre4 {
    pub fn new(bits: u32) -> Self {
        let f = |x: f64| Float::with_val(bits, x);
        // roots of P4 on [-1, 1]: x^2 = (3 ∓ 2 sqrt(6/5)) / 7
        let r = (Float::with_val(bits, 6) / 5u32).sqrt() * 2u32;
        let x1 = ((Float::with_val(bits, 3) - &r) / 7u32).sqrt();
        let x2 = ((Float::with_val(bits, 3) + &r) / 7u32).sqrt();
        let half = f(0.5);
        let node = |x: Float| Float::with_val(bits, &half + x * &half);
        let c = [node(-x2.clone()), node(-x1.clone()), node(x1), node(x2)];
        // Lagrange basis polynomials in ascending coefficients
        let mut a: [[Float; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| Float::new(bits)));
        let mut b: [Float; 4] = std::array::from_fn(|_| Float::new(bits));
        for j in 0..4 {
            let mut poly = vec![Float::with_val(bits, 1)];
            for m in 0..4 {
                if m == j {
                    continue;
                }
                let d = Float::with_val(bits, &c[j] - &c[m]);
                let mut next = vec![Float::new(bits); poly.len() + 1];
                for (i, pc) in poly.iter().enumerate() {
                    next[i + 1] += Float::with_val(bits, pc / &d);
                    next[i] -= Float::with_val(bits, pc * &c[m]) / &d;
                }
                poly = next;
            }
            let integral = |x: &Float| {
                let mut acc = Float::new(bits);
                for (i, pc) in poly.iter().enumerate() {
                    acc += Float::with_val(bits, pc * x.clone().pow(i as u32 + 1)) / (i as u32 + 1);
                }
                acc
            };
            for i in 0..4 {
                a[i][j] = integral(&c[i]);
            }
            b[j] = integral(&Float::with_val(bits, 1));
        }
        GaussLegendre4 { bits, c, a, b }
    }

    /// One step of `y' = f(t, y)`; stages solved by fixed-point iteration.
    pub fn step<const N: usize>(
        &self,
        f: &impl Fn(&Float, &[Float; N]) -> [Float; N],
        t: &Float,
        y: &[Float; N],
        h: &Float,
        guess: &mut [[Float; N]; 4],
    ) -> [Float; N] {
        let bits = self.bits;
        let tol = 2f64.powi(-(bits as i32) + 8);
        for _ in 0..200 {
            let mut change = 0f64;
            for i in 0..4 {
                let mut yi = y.clone();
                for j in 0..4 {
                    let w = Float::with_val(bits, h * &self.a[i][j]);
                    for d in 0..N {
                        yi[d] += Float::with_val(bits, &w * &guess[j][d]);
                    }
                }
                let ti = Float::with_val(bits, t + Float::with_val(bits, h * &self.c[i]));
                let next = f(&ti, &yi);
                for d in 0..N {
                    let delta = Float::with_val(bits, &next[d] - &guess[i][d]).to_f64().abs();
                    change = change.max(delta / (1.0 + next[d].to_f64().abs()));
                }
                // Gauss–Seidel update: later stages see the new value
                guess[i] = next;
            }
            if change <= tol {
                break;
            }
        }
        let mut out = y.clone();
        for j in 0..4 {
            let w = Float::with_val(bits, h * &self.b[j]);
            for d in 0..N {
                out[d] += Float::with_val(bits, &w * &guess[j][d]);
            }
        }
        out
    }

    /// Integrates `y' = f(t, y)` from `t_start` with `n` equal steps of size `h`.
    pub fn integrate<const N: usize>(
        &self,
        f: &impl Fn(&Float, &[Float; N]) -> [Float; N],
        t_start: &Float,
        y0: [Float; N],
        h: &Float,
        n: usize,
    ) -> [Float; N] {
        let mut y = y0;
        let mut t = t_start.clone();
        let k0 = f(&t, &y);
        let mut guess: [[Float; N]; 4] = std::array::from_fn(|_| k0.clone());
        for _ in 0..n {
            y = self.step(f, &t, &y, h, &mut guess);
            t += h;
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingRow {
    pub eps: f64,
    pub eta: f64,
    /// Max-norm distance between predicted and converged initial data.
    pub gap: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    pub rows: Vec<ShootingRow>,
    /// Fitted exponent of the gap in `η`.
    pub exponent: f64,
}

/// Period map `(α(0), A(0)) ↦ (α(T) - 2πp, A(T))`.
fn period_map(field: &Field, gl: &GaussLegendre4, eps: &Float, t0: &Float, y0: &[Float; 2], steps: usize) -> [Float; 2] {
    let bits = field.bits;
    let h = Float::with_val(bits, two_pi(bits) * field.q) / steps as u32;
    let rhs = |t: &Float, y: &[Float; 2]| -> [Float; 2] {
        let tau = Float::with_val(bits, t + t0);
        let (a, x) = field.rhs(eps, &y[0], &y[1], &tau);
        [a, x]
    };
    let y = gl.integrate(&rhs, &Float::new(bits), y0.clone(), &h, steps);
    [Float::with_val(bits, &y[0] - two_pi(bits) * field.p), y[1].clone()]
}

/// Period map with its Jacobian from the variational equations.
fn period_map_jac(field: &Field, gl: &GaussLegendre4, eps: &Float, t0: &Float, y0: &[Float; 2], steps: usize) -> ([Float; 2], [[Float; 2]; 2]) {
    let bits = field.bits;
    let h = Float::with_val(bits, two_pi(bits) * field.q) / steps as u32;
    let rhs = |t: &Float, y: &[Float; 6]| -> [Float; 6] {
        let tau = Float::with_val(bits, t + t0);
        let (v, j) = field.rhs_jac(eps, &y[0], &y[1], &tau);
        // Φ' = J Φ with Φ = [[y2, y3], [y4, y5]]
        let m = |r: usize, c: usize| {
            Float::with_val(bits, &j[r][0] * &y[2 + c]) + Float::with_val(bits, &j[r][1] * &y[4 + c])
        };
        let [v0, v1] = v;
        [v0, v1, m(0, 0), m(0, 1), m(1, 0), m(1, 1)]
    };
    let one = Float::with_val(bits, 1);
    let zero = Float::new(bits);
    let start = [y0[0].clone(), y0[1].clone(), one.clone(), zero.clone(), zero, one];
    let y = gl.integrate(&rhs, &Float::new(bits), start, &h, steps);
    (
        [Float::with_val(bits, &y[0] - two_pi(bits) * field.p), y[1].clone()],
        [[y[2].clone(), y[3].clone()], [y[4].clone(), y[5].clone()]],
    )
}

/// Chord-Newton iteration on the period map from the series prediction,
/// with the Jacobian taken once at the seed. Returns the converged initial
/// data and the number of iterations.
pub fn shoot(field: &Field, eps: &Float, t0: &Float, seed: [Float; 2], steps: usize) -> Result<([Float; 2], usize)> {
    let bits = field.bits;
    let gl = GaussLegendre4::new(bits);
    let tol = Float::with_val(bits, 2).pow(-(bits as i32) + 24);
    let mut y = seed;
    let (mut py, m) = period_map_jac(field, &gl, eps, t0, &y, steps);
    // (M - I) Δ = -r
    let a = Float::with_val(bits, &m[0][0] - 1u32);
    let b = m[0][1].clone();
    let c = m[1][0].clone();
    let d = Float::with_val(bits, &m[1][1] - 1u32);
    let det = Float::with_val(bits, &a * &d) - Float::with_val(bits, &b * &c);
    if det.is_zero() {
        return Err(Error::ShootingDiverged("singular period-map Jacobian".into()));
    }
    let mut last = f64::INFINITY;
    for it in 1..=24 {
        let r0 = Float::with_val(bits, &py[0] - &y[0]);
        let r1 = Float::with_val(bits, &py[1] - &y[1]);
        let d0 = -(Float::with_val(bits, &d * &r0) - Float::with_val(bits, &b * &r1)) / &det;
        let d1 = -(Float::with_val(bits, &a * &r1) - Float::with_val(bits, &c * &r0)) / &det;
        y[0] += &d0;
        y[1] += &d1;
        let step = Float::with_val(bits, d0.abs()).max(&Float::with_val(bits, d1.abs()));
        let sf = step.to_f64();
        if sf > 0.5 || !sf.is_finite() {
            return Err(Error::ShootingDiverged(format!("Newton step {sf:e} left the basin")));
        }
        if step <= tol {
            return Ok((y, it));
        }
        if it > 3 && sf > 0.5 * last {
            return Err(Error::ShootingDiverged(format!("Newton stalled at step size {sf:e}")));
        }
        last = sf;
        py = period_map(field, &gl, eps, t0, &y, steps);
    }
    Err(Error::ShootingDiverged("no convergence in 24 chord-Newton steps".into()))
}

/// For each `ε` (with the sign of the branch), the distance between the
/// series' initial data and the shooting-converged periodic orbit.
pub fn shooting_compare<S: Scalar>(sys: &PlanarSystem<S>, sol: &EtaSolution<Approx>, eps_values: &[f64], opts: &VerifyOptions) -> ShootingReport {
    let bits = opts.bits;
    let field = Field::new(sys, bits);
    let t0 = t0_of(&sol.z, bits);
    let rows: Vec<ShootingRow> = eps_values
        .par_iter()
        .map(|&e| {
            let eta_f = e.abs().powf(1.0 / sol.pp as f64);
            let mut row = ShootingRow { eps: e, eta: eta_f, gap: None, iterations: 0, error: None };
            if e == 0.0 {
                row.gap = Some(0.0);
                return row;
            }
            if (e > 0.0) != (sol.sigma0 > 0) {
                row.error = Some("sign of ε does not match the branch".into());
                return row;
            }
            let eta = Float::with_val(bits, e.abs()).root(sol.pp as u32);
            let eps = Float::with_val(bits, e);
            let orbit = Orbit::new(&field, sol, &eta);
            let [a, x, _, _] = orbit.state(&Float::new(bits));
            match shoot(&field, &eps, &t0, [a.clone(), x.clone()], opts.steps) {
                Ok((y, it)) => {
                    let g0 = Float::with_val(bits, &y[0] - &a).abs();
                    let g1 = Float::with_val(bits, &y[1] - &x).abs();
                    row.gap = Some(g0.max(&g1).to_f64());
                    row.iterations = it;
                }
                Err(err) => row.error = Some(err.to_string()),
            }
            row
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.gap.map(|g| (r.eta, g))).collect();
    ShootingReport { exponent: loglog_slope(&pts), rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights() {
        let gl = GaussLegendre4::new(128);
        let s: Float = gl.b.iter().fold(Float::new(128), |acc, x| acc + x);
        assert!((s - 1u32).abs() < 1e-35);
        for i in 0..4 {
            let row: Float = gl.a[i].iter().fold(Float::new(128), |acc, x| acc + x);
            assert!((row - &gl.c[i]).abs() < 1e-35);
        }
    }

    #[test]
    fn order_eight_on_exponential() {
        // y' = y over [0, 1]: error should drop by about 2^8 per halving
        let gl = GaussLegendre4::new(128);
        let f = |_t: &Float, y: &[Float; 1]| [y[0].clone()];
        let e = Float::with_val(128, 1).exp();
        let err = |n: usize| {
            let h = Float::with_val(128, 1) / n as u32;
            let y = gl.integrate(&f, &Float::new(128), [Float::with_val(128, 1)], &h, n);
            (y[0].clone() - &e).abs().to_f64()
        };
        let ratio = err(4) / err(8);
        assert!(ratio > 200.0 && ratio < 320.0, "ratio {ratio}");
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = (3..8).map(|i| {
            let x = 0.5f64.powi(i);
            (x, 3.0 * x.powi(5))
        }).collect();
        assert!((loglog_slope(&pts) - 5.0).abs() < 1e-12);
    }
}
