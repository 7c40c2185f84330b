//! Solution of the equations of motion as a series in `η = |ε|^{1/𝔭}` along
//! one Puiseux branch with a simple root.
//!
//! The leading terms `c_i η^{𝔥_i}` of `β0` come from the branch; the rest of
//! `β0` is fixed linearly by the bifurcation equation
//! `F(σ η^𝔭, β0(η)) = 0`, whose first unknown coefficient enters with the
//! constant `C = dP/dc` of the last face polynomial. The orbit itself is
//! produced by the graded recursion, which also checks that the mean of the
//! `A`-equation vanishes at every order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coefficients::{f0_table, table_at, BivariateSeries, Expansion, Grading};
use crate::error::{Error, Result};
use crate::puiseux::{assemble_exponents, BranchStatus, PuiseuxBranch};
use crate::scalar::{ident_tol, Number, Scalar};
use crate::series::PlanarSystem;

/// Truncated `η`-series of a subharmonic solution
/// `α(t) = p t/q + β0 + β̃(t)`, `A(t) = A0 + B(t)`, time measured from `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaSolution<S> {
    pub pp: usize,
    pub sigma0: i32,
    pub kappa: usize,
    pub kmax: usize,
    pub z: S,
    /// `β0^{[k]}` for `0 ≤ k ≤ kmax`.
    pub beta0: Vec<S>,
    /// `β̃^{[k]}_ν`, `ν ≠ 0`.
    pub beta_tilde: BTreeMap<(usize, i64), S>,
    /// `B^{[k]}_ν`.
    pub bcap: BTreeMap<(usize, i64), S>,
    pub c: S,
    pub h_list: Vec<usize>,
    pub s_list: Vec<usize>,
    /// `|Γ^{[k]}_0|` for `𝔭 ≤ k ≤ kmax`.
    pub periodicity: Vec<(usize, f64)>,
}

impl<S: Scalar> EtaSolution<S> {
    pub fn h_last(&self) -> usize {
        self.h_list.last().copied().unwrap_or(0)
    }

    pub fn s_last(&self) -> usize {
        self.s_list.last().copied().unwrap_or(0)
    }

    pub fn sigma(&self) -> S {
        S::from_i64(self.sigma0 as i64)
    }

    /// Largest `|ν|` stored at any order.
    pub fn radius(&self) -> i64 {
        self.beta_tilde.keys().chain(self.bcap.keys()).map(|k| k.1.abs()).max().unwrap_or(0)
    }

    /// Checks `x_{-ν} = conj(x_ν)` on both Fourier tables.
    pub fn is_real(&self) -> bool {
        let tol = if S::EXACT { 0.0 } else { ident_tol() };
        let check = |m: &BTreeMap<(usize, i64), S>| {
            m.iter().all(|(&(k, nu), v)| {
                let partner = m.get(&(k, -nu)).cloned().unwrap_or_else(S::zero);
                let d = v.sub(&partner.conj());
                if S::EXACT {
                    d.is_zero()
                } else {
                    d.abs_f64() <= tol
                }
            })
        };
        check(&self.beta_tilde) && check(&self.bcap) && self.beta0.iter().all(|b| b.is_real())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> EtaSolution<T> {
        let mm = |m: &BTreeMap<(usize, i64), S>| m.iter().map(|(k, v)| (*k, f(v))).collect();
        EtaSolution {
            pp: self.pp,
            sigma0: self.sigma0,
            kappa: self.kappa,
            kmax: self.kmax,
            z: f(&self.z),
            beta0: self.beta0.iter().map(&f).collect(),
            beta_tilde: mm(&self.beta_tilde),
            bcap: mm(&self.bcap),
            c: f(&self.c),
            h_list: self.h_list.clone(),
            s_list: self.s_list.clone(),
            periodicity: self.periodicity.clone(),
        }
    }
}

/// Serializable form of an [`EtaSolution`] with scalars as [`Number`]s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSeries {
    pub pp: usize,
    pub sigma0: i32,
    pub kappa: usize,
    pub kmax: usize,
    pub c: Number,
    pub beta0: Vec<Number>,
    pub beta_tilde: Vec<(usize, i64, Number)>,
    #[serde(rename = "B")]
    pub bcap: Vec<(usize, i64, Number)>,
}

impl<S: Scalar> From<&EtaSolution<S>> for EtaSeries {
    fn from(s: &EtaSolution<S>) -> Self {
        let flat = |m: &BTreeMap<(usize, i64), S>| m.iter().map(|(&(k, nu), v)| (k, nu, v.to_number())).collect();
        EtaSeries {
            pp: s.pp,
            sigma0: s.sigma0,
            kappa: s.kappa,
            kmax: s.kmax,
            c: s.c.to_number(),
            beta0: s.beta0.iter().map(|b| b.to_number()).collect(),
            beta_tilde: flat(&s.beta_tilde),
            bcap: flat(&s.bcap),
        }
    }
}

/// `[b^j]_{n}` for `0 ≤ j ≤ jmax`, `0 ≤ n ≤ nmax`.
pub fn series_powers<S: Scalar>(b: &[S], jmax: usize, nmax: usize) -> Vec<Vec<S>> {
    let mut out = Vec::with_capacity(jmax + 1);
    let mut cur = vec![S::zero(); nmax + 1];
    cur[0] = S::one();
    out.push(cur.clone());
    for _ in 1..=jmax {
        let mut next = vec![S::zero(); nmax + 1];
        for (i, x) in cur.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (l, y) in b.iter().enumerate().take(nmax + 1 - i) {
                if !y.is_zero() {
                    next[i + l] = next[i + l].add(&x.mul(y));
                }
            }
        }
        out.push(next.clone());
        cur = next;
    }
    out
}

/// `[η^n] F(σ η^𝔭, β0(η))` for `0 ≤ n ≤ nmax`.
pub fn compose_bifurcation<S: Scalar>(f: &BivariateSeries<S>, sigma0: i32, pp: usize, b: &[S], nmax: usize) -> Vec<S> {
    let pw = series_powers(b, f.jmax, nmax);
    let mut out = vec![S::zero(); nmax + 1];
    for (k, j) in f.carrier() {
        let shift = k * pp;
        if shift > nmax {
            continue;
        }
        let mut q = f.get(k, j);
        if sigma0 < 0 && k % 2 == 1 {
            q = q.neg();
        }
        for n in shift..=nmax {
            let p = &pw[j][n - shift];
            if !p.is_zero() {
                out[n] = out[n].add(&q.mul(p));
            }
        }
    }
    out
}

/// Order-by-order driver behind [`full_solution`].
pub struct EtaSolver<S: Scalar> {
    pp: usize,
    sigma0: i32,
    kappa: usize,
    kmax: usize,
    z: S,
    h: usize,
    s: usize,
    min_order: usize,
    c: S,
    h_list: Vec<usize>,
    s_list: Vec<usize>,
    /// Bifurcation table large enough for every tail coefficient up to `kmax`.
    table: BivariateSeries<S>,
    beta0: Vec<S>,
    /// Highest `β0` index fixed so far.
    known: usize,
    expansion: Expansion<S, S>,
    periodicity: Vec<(usize, f64)>,
}

impl<S: Scalar> EtaSolver<S> {
    pub fn new(sys: &PlanarSystem<S>, z: &S, kappa: usize, branch: &PuiseuxBranch, kmax: usize) -> Result<Self> {
        if branch.status != BranchStatus::SimpleRootFound {
            return Err(Error::Precondition(format!("branch status {:?} is not SimpleRootFound", branch.status)));
        }
        let ex = assemble_exponents(branch)?;
        let pp = ex.pp as usize;
        let h_list: Vec<usize> = ex.h_list.iter().map(|&x| x as usize).collect();
        let s_list: Vec<usize> = ex.s_list.iter().map(|&x| x as usize).collect();
        let h = h_list.last().copied().unwrap_or(0);
        let s = s_list.last().copied().unwrap_or(0);
        let min_order = h_list.first().copied().unwrap_or(1).max(1);
        let nmax = s + kmax.saturating_sub(h);
        let ktab = nmax / pp + 1;
        let jtab = nmax / min_order + 1;
        let table = f0_table(sys, z, kappa, ktab, jtab);

        let mut beta0 = vec![S::zero(); kmax.max(h) + 1];
        for (st, &hi) in branch.steps.iter().zip(&h_list) {
            beta0[hi] = S::from_number(&st.c)?;
        }
        let c = if branch.steps.is_empty() {
            table.get(0, 1)
        } else {
            S::from_number(&branch.derivative_constant().expect("branch has steps"))?
        };
        if c.is_zero() {
            return Err(Error::NearSingularC(0.0));
        }
        if !S::EXACT && c.abs_f64() < 1e-20 {
            return Err(Error::NearSingularC(c.abs_f64()));
        }
        let zz = z.clone();
        let zinv = z.inv().ok_or_else(|| Error::Precondition("phase must be nonzero".into()))?;
        let expansion = Expansion::new(
            sys,
            Grading::Eta { pp, sigma: S::from_i64(branch.sigma0 as i64) },
            move |m| if m >= 0 { zz.pow(m as u32) } else { zinv.pow((-m) as u32) },
        );
        Ok(EtaSolver {
            pp,
            sigma0: branch.sigma0,
            kappa,
            kmax,
            z: z.clone(),
            h,
            s,
            min_order,
            c,
            h_list,
            s_list,
            table,
            beta0,
            known: h,
            expansion,
            periodicity: Vec::new(),
        })
    }

    pub fn c(&self) -> &S {
        &self.c
    }

    /// `[η^{𝔰+k}] F(σ η^𝔭, β0)` with `β0^{[𝔥+k]}` taken as zero.
    pub fn g_tilde(&self, k_rel: usize) -> S {
        let idx = self.h + k_rel;
        let n = self.s + k_rel;
        let mut b: Vec<S> = self.beta0.iter().take(idx).cloned().collect();
        b.resize(idx + 1, S::zero());
        compose_bifurcation(&self.table, self.sigma0, self.pp, &b, n)[n].clone()
    }

    /// Fixes `β0^{[𝔥+k_rel]} = -G̃/C`; lower tail coefficients must be known.
    pub fn tail_beta0(&mut self, k_rel: usize) -> Result<S> {
        if k_rel == 0 {
            return Ok(self.beta0[self.h].clone());
        }
        let idx = self.h + k_rel;
        if idx > self.known + 1 {
            return Err(Error::Precondition(format!("tail coefficient {idx} requested before {}", self.known + 1)));
        }
        let g = self.g_tilde(k_rel);
        let b = g.div(&self.c).expect("C checked nonzero").neg();
        if self.beta0.len() <= idx {
            self.beta0.resize(idx + 1, S::zero());
        }
        self.beta0[idx] = b.clone();
        self.known = self.known.max(idx);
        Ok(b)
    }

    /// Solves order `k` of the recursion, fixing the `β0` coefficients it
    /// consumes first, and checks that the mean of `Γ^{[k]}` vanishes.
    pub fn solve_order(&mut self, k: usize) -> Result<()> {
        let have = self.expansion.order();
        if k != have + 1 {
            return Err(Error::MissingLowerOrder { k: have + 1, j: 0 });
        }
        if k > self.kmax {
            return Err(Error::Precondition(format!("order {k} exceeds Kmax = {}", self.kmax)));
        }
        if k >= self.pp {
            let m = k - self.pp;
            while self.known < m {
                let next = self.known + 1 - self.h;
                self.tail_beta0(next)?;
            }
            self.expansion.set_beta0(m, self.beta0[m].clone());
        }
        self.expansion.step();
        if k >= self.pp {
            let g0 = self.expansion.gamma_at(k, 0, 0);
            let mag = g0.abs_f64();
            self.periodicity.push((k, mag));
            let violated = if S::EXACT {
                !g0.is_zero()
            } else {
                let scale = self.expansion.gamma[k].nonzero().map(|(_, _, v)| v.abs_f64()).fold(1.0f64, f64::max);
                mag > ident_tol() * scale
            };
            if violated {
                return Err(Error::PeriodicityViolated { k, magnitude: mag });
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<EtaSolution<S>> {
        while self.known < self.kmax {
            let next = self.known + 1 - self.h;
            self.tail_beta0(next)?;
        }
        self.beta0.truncate(self.kmax + 1);
        let mut beta_tilde = BTreeMap::new();
        let mut bcap = BTreeMap::new();
        for k in 1..=self.expansion.order() {
            for (_, nu, v) in self.expansion.beta[k].nonzero() {
                beta_tilde.insert((k, nu), v.clone());
            }
            for (_, nu, v) in self.expansion.bcap[k].nonzero() {
                bcap.insert((k, nu), v.clone());
            }
        }
        let _ = self.min_order;
        Ok(EtaSolution {
            pp: self.pp,
            sigma0: self.sigma0,
            kappa: self.kappa,
            kmax: self.kmax,
            z: self.z,
            beta0: self.beta0,
            beta_tilde,
            bcap,
            c: self.c,
            h_list: self.h_list,
            s_list: self.s_list,
            periodicity: self.periodicity,
        })
    }
}

/// Complete truncated `η`-series through order `kmax` for a
/// `SimpleRootFound` branch at phase `z = e^{i t0}`.
pub fn full_solution<S: Scalar>(
    sys: &PlanarSystem<S>,
    z: &S,
    kappa: usize,
    branch: &PuiseuxBranch,
    kmax: usize,
) -> Result<EtaSolution<S>> {
    let mut solver = EtaSolver::new(sys, z, kappa, branch, kmax)?;
    for k in 1..=kmax {
        solver.solve_order(k)?;
    }
    solver.finish()
}

/// Largest gap between the recursion's `β̃^{[k]}_ν`, `B^{[k]}_ν` and the
/// `(ε, β0)` double series composed with `β0(η)`, `ε = σ η^𝔭`.
pub fn composition_defect<S: Scalar>(sys: &PlanarSystem<S>, sol: &EtaSolution<S>) -> f64 {
    let kmax = sol.kmax;
    let pp = sol.pp;
    let min_order = sol.beta0.iter().position(|b| !b.is_zero()).unwrap_or(kmax + 1).max(1);
    let jmax = kmax / min_order + 1;
    let k1max = kmax / pp;
    let mut table = table_at(sys, jmax, &sol.z);
    table.solve_to(k1max);
    let pw = series_powers(&sol.beta0, jmax, kmax);
    let sigma = sol.sigma();
    let rad = sol.radius().max(table.node_radius * k1max as i64);
    let mut worst = 0.0f64;
    for k in 1..=kmax {
        for nu in -rad..=rad {
            let mut bt = S::zero();
            let mut bc = S::zero();
            for k1 in 1..=k / pp {
                let sk = sigma.pow(k1 as u32);
                let rest = k - k1 * pp;
                for (j, pj) in pw.iter().enumerate() {
                    let w = &pj[rest];
                    if w.is_zero() {
                        continue;
                    }
                    let f = sk.mul(w);
                    bt = bt.add(&table.beta_at(k1, j, nu).times(&f));
                    bc = bc.add(&table.bcap_at(k1, j, nu).times(&f));
                }
            }
            let got_b = sol.beta_tilde.get(&(k, nu)).cloned().unwrap_or_else(S::zero);
            let got_c = sol.bcap.get(&(k, nu)).cloned().unwrap_or_else(S::zero);
            let d1 = bt.sub(&got_b);
            let d2 = bc.sub(&got_c);
            for d in [d1, d2] {
                let m = if S::EXACT && d.is_zero() { 0.0 } else { d.abs_f64() };
                let m = if S::EXACT && m == 0.0 && !d.is_zero() { f64::MIN_POSITIVE } else { m };
                worst = worst.max(m);
            }
        }
    }
    worst
}

/// Tail of `β0` from the last substituted series: solves
/// `F'(η, y(η)) = 0` by undetermined coefficients, `y = Σ_{k≥1} y_k η^k`.
/// Returns `y_1, …, y_n` for the orders the truncation supports: terms
/// past `jmax` in `y` only reach orders above `jmax`.
pub fn tail_from_last_series<S: Scalar>(f: &BivariateSeries<S>, n: usize) -> Result<Vec<S>> {
    let c = f.get(0, 1);
    let cinv = c.inv().ok_or(Error::NearSingularC(0.0))?;
    let n = if f.polynomial { n } else { n.min(f.kmax).min(f.jmax) };
    let mut y = vec![S::zero(); n + 1];
    for k in 1..=n {
        let pw = series_powers(&y, f.jmax, k);
        let mut acc = S::zero();
        for (kk, j) in f.carrier() {
            if kk > k {
                continue;
            }
            acc = acc.add(&f.get(kk, j).mul(&pw[j][k - kk]));
        }
        y[k] = acc.mul(&cinv).neg();
    }
    Ok(y[1..].to_vec())
}

/// `C` from the original table: `[η^{𝔰-𝔥}] ∂_β F(σ η^𝔭, Σ c_i η^{𝔥_i})`.
pub fn c_from_table<S: Scalar>(f: &BivariateSeries<S>, sigma0: i32, pp: usize, lead: &[(usize, S)], h: usize, s: usize) -> S {
    let n = s - h;
    let mut b = vec![S::zero(); n + 1];
    for (hi, ci) in lead {
        if *hi <= n {
            b[*hi] = ci.clone();
        }
    }
    let mut df = BivariateSeries::zeros(f.kmax, f.jmax.saturating_sub(1));
    for (k, j) in f.carrier() {
        if j >= 1 {
            df.set(k, j - 1, f.get(k, j).scale_i64(j as i64));
        }
    }
    compose_bifurcation(&df, sigma0, pp, &b, n)[n].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn powers_of_a_binomial() {
        let b = vec![Exact::zero(), Exact::one(), Exact::one()];
        let pw = series_powers(&b, 2, 4);
        // (η + η^2)^2 = η^2 + 2η^3 + η^4
        assert_eq!(pw[2], vec![Exact::zero(), Exact::zero(), Exact::one(), Exact::from_i64(2), Exact::one()]);
    }

    #[test]
    fn composition_of_a_closed_form_branch() {
        // (β0 - ε)^2 - ε^3 vanishes on β0 = η^2 + η^3, ε = η^2
        let f = BivariateSeries::polynomial(&[
            (0, 2, Exact::one()),
            (1, 1, Exact::from_i64(-2)),
            (2, 0, Exact::one()),
            (3, 0, Exact::from_i64(-1)),
        ]);
        let b = vec![Exact::zero(), Exact::zero(), Exact::one(), Exact::one()];
        assert!(compose_bifurcation(&f, 1, 2, &b, 9).iter().all(|x| x.is_zero()));
        let c = c_from_table(&f, 1, 2, &[(2, Exact::one()), (3, Exact::one())], 3, 6);
        assert_eq!(c, Exact::from_i64(2));
    }

    #[test]
    fn last_series_tail_of_a_quadratic() {
        // y + y^2 - η = 0: y = η - η^2 + 2η^3 - ...
        let f = BivariateSeries::polynomial(&[(0, 1, Exact::one()), (0, 2, Exact::one()), (1, 0, Exact::from_i64(-1))]);
        let f = BivariateSeries::from_terms(4, 4, &f.carrier().iter().map(|&(k, j)| (k, j, f.get(k, j))).collect::<Vec<_>>());
        let y = tail_from_last_series(&f, 4).unwrap();
        assert_eq!(y, vec![Exact::one(), Exact::from_i64(-1), Exact::from_i64(2), Exact::from_i64(-5)]);
    }
}
