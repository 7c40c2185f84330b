//! Order-by-order solution of the auxiliary system.
//!
//! [`Expansion`] solves the Fourier-space equations for `β`, `B` and the
//! sources `Γ`, `Φ` in a graded variable `x`. Every graded piece is a
//! [`Grid`] indexed by a power `j` of `β0` and a global mode `ν`.
//!
//! * With [`Grading::Epsilon`] the variable is `ε` and `β0` is a formal
//!   variable: this produces the double series `β̄^{(k,j)}_ν` and the
//!   bifurcation table `F_{k,j} = Γ̄_0^{(k+1,j)}`.
//! * With [`Grading::Eta`] the variable is `η`, `ε = σ η^𝔭`, and `β0(η)` is a
//!   known scalar series supplied order by order (see `eta`).
//!
//! The composition `Σ_r (iσ)^r β^r / r!` is evaluated as `exp(iσβ)` through
//! the graded identity `m E_m = Σ_l l u_l E_{m-l}`, which reproduces the
//! multi-convolution sum term by term.

use std::collections::BTreeMap;
use std::marker::PhantomData;

use rug::Rational;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{PlanarSystem, Resonance, TrigTaylor};
use crate::trig::{Coef, TrigPoly};

/// Dense array over `0 ≤ j ≤ jmax`, `-rad ≤ ν ≤ rad`.
#[derive(Clone, Debug)]
pub struct Grid<R> {
    pub jmax: usize,
    pub rad: i64,
    data: Vec<R>,
}

impl<R> Grid<R> {
    fn width(&self) -> usize {
        (2 * self.rad + 1) as usize
    }

    fn idx(&self, j: usize, nu: i64) -> Option<usize> {
        if j > self.jmax || nu.abs() > self.rad {
            None
        } else {
            Some(j * self.width() + (nu + self.rad) as usize)
        }
    }

    pub fn get_ref(&self, j: usize, nu: i64) -> Option<&R> {
        self.idx(j, nu).map(|i| &self.data[i])
    }
}

impl<R: Clone> Grid<R> {
    fn filled(jmax: usize, rad: i64, z: R) -> Self {
        let n = (jmax + 1) * (2 * rad + 1) as usize;
        Grid { jmax, rad, data: vec![z; n] }
    }
}

impl<R> Grid<R> {
    pub fn zeros<S: Scalar>(jmax: usize, rad: i64) -> Self
    where
        R: Coef<S>,
    {
        Grid::filled(jmax, rad, R::czero())
    }

    pub fn get<S: Scalar>(&self, j: usize, nu: i64) -> R
    where
        R: Coef<S>,
    {
        self.get_ref(j, nu).cloned().unwrap_or_else(R::czero)
    }

    fn set(&mut self, j: usize, nu: i64, v: R) {
        let i = self.idx(j, nu).expect("grid index out of range");
        self.data[i] = v;
    }

    fn add_at<S: Scalar>(&mut self, j: usize, nu: i64, v: &R)
    where
        R: Coef<S>,
    {
        let i = self.idx(j, nu).expect("grid index out of range");
        self.data[i].add_assign(v);
    }

    pub fn is_zero<S: Scalar>(&self) -> bool
    where
        R: Coef<S>,
    {
        self.data.iter().all(|x| x.is_null())
    }

    /// Iterates over `(j, ν, value)` for stored nonzero entries.
    pub fn nonzero<S: Scalar>(&self) -> impl Iterator<Item = (usize, i64, &R)>
    where
        R: Coef<S>,
    {
        let w = self.width();
        let rad = self.rad;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_null())
            .map(move |(i, v)| (i / w, (i % w) as i64 - rad, v))
    }

    /// Smallest radius holding every nonzero entry.
    fn tight<S: Scalar>(self) -> Self
    where
        R: Coef<S>,
    {
        let mut r = 0;
        for (_, nu, _) in self.nonzero() {
            r = r.max(nu.abs());
        }
        if r == self.rad {
            return self;
        }
        let mut out = Grid::zeros(self.jmax, r);
        for (j, nu, v) in self.nonzero() {
            out.set(j, nu, v.clone());
        }
        out
    }

    fn resized<S: Scalar>(&self, rad: i64) -> Self
    where
        R: Coef<S>,
    {
        let mut out = Grid::zeros(self.jmax, rad.max(self.rad));
        for (j, nu, v) in self.nonzero() {
            out.set(j, nu, v.clone());
        }
        out
    }

    /// `self[j1+j2][ν1+ν2+shift] += a[j1][ν1] · b[j2][ν2]` (entries with
    /// `j1 + j2 > jmax` are dropped).
    fn conv_acc<S: Scalar>(&mut self, a: &Grid<R>, b: &Grid<R>, shift: i64)
    where
        R: Coef<S>,
    {
        let need = a.rad + b.rad + shift.abs();
        if need > self.rad {
            *self = self.resized(need);
        }
        let bnz: Vec<(usize, i64, &R)> = b.nonzero().collect();
        if bnz.is_empty() {
            return;
        }
        for (j1, n1, x) in a.nonzero() {
            for &(j2, n2, y) in &bnz {
                let j = j1 + j2;
                if j > self.jmax {
                    continue;
                }
                let v = x.times(y);
                self.add_at(j, n1 + n2 + shift, &v);
            }
        }
    }

    fn scaled<S: Scalar>(&self, s: &S) -> Self
    where
        R: Coef<S>,
    {
        Grid { jmax: self.jmax, rad: self.rad, data: self.data.iter().map(|x| x.scale(s)).collect() }
    }

    fn add_grid<S: Scalar>(&mut self, o: &Grid<R>)
    where
        R: Coef<S>,
    {
        if o.rad > self.rad {
            *self = self.resized(o.rad);
        }
        for (j, nu, v) in o.nonzero() {
            self.add_at(j, nu, v);
        }
    }

    fn unit<S: Scalar>(jmax: usize) -> Self
    where
        R: Coef<S>,
    {
        let mut g = Grid::zeros(jmax, 0);
        g.set(0, 0, R::from_scalar(S::one()));
        g
    }
}

/// How the graded variable relates to `ε` and `β0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Grading<S> {
    /// `x = ε`; `β0` is formal and counted by the `j` index up to `jmax`.
    Epsilon { jmax: usize },
    /// `x = η`, `ε = σ η^{pp}`; `β0(η)` is supplied by the caller.
    Eta { pp: usize, sigma: S },
}

/// Modes of one source function grouped by `σ`: `(σ', ν, [∂_A^s f/s!])`.
type NodeTable<S> = BTreeMap<i64, Vec<(i64, i64, Vec<S>)>>;

fn node_table<S: Scalar>(f: &TrigTaylor<S>, res: &Resonance) -> NodeTable<S> {
    let mut out: NodeTable<S> = BTreeMap::new();
    for (&(s, sp), poly) in &f.modes {
        out.entry(s).or_default().push((sp, res.nu(s, sp), poly.clone()));
    }
    out
}

/// Graded solution of the auxiliary system.
#[derive(Clone, Debug)]
pub struct Expansion<S: Scalar, R: Coef<S>> {
    pub res: Resonance,
    pub grading: Grading<S>,
    pub jmax: usize,
    /// Largest `|ν|` contributed by a single node.
    pub node_radius: i64,
    omega: Vec<S>,
    f_nodes: NodeTable<S>,
    g_nodes: NodeTable<S>,
    phases: BTreeMap<i64, R>,
    shift: usize,
    prefactor: S,
    /// `β` without its mean (the mean is `β0`), order by order.
    pub beta: Vec<Grid<R>>,
    pub bcap: Vec<Grid<R>>,
    pub gamma: Vec<Grid<R>>,
    pub phi: Vec<Grid<R>>,
    beta0: Vec<Grid<R>>,
    exps: BTreeMap<i64, Vec<Grid<R>>>,
    bpow: Vec<Vec<Grid<R>>>,
    hf: BTreeMap<i64, Vec<Grid<R>>>,
    hg: BTreeMap<i64, Vec<Grid<R>>>,
    _s: PhantomData<S>,
}

impl<S: Scalar, R: Coef<S>> Expansion<S, R> {
    /// `phase(m)` must return `e^{i m t0}` in the coefficient ring.
    pub fn new(sys: &PlanarSystem<S>, grading: Grading<S>, phase: impl Fn(i64) -> R) -> Self {
        let (jmax, shift, prefactor) = match &grading {
            Grading::Epsilon { jmax } => (*jmax, 1, S::one()),
            Grading::Eta { pp, sigma } => (0, *pp, sigma.clone()),
        };
        let f_nodes = node_table(&sys.f, &sys.res);
        let g_nodes = node_table(&sys.g, &sys.res);
        let mut phases = BTreeMap::new();
        for (sp, _, _) in f_nodes.values().chain(g_nodes.values()).flatten() {
            phases.entry(*sp).or_insert_with(|| phase(*sp));
        }
        let mut beta0 = Vec::new();
        if let Grading::Epsilon { .. } = grading {
            let mut g = Grid::zeros(jmax, 0);
            if jmax >= 1 {
                g.set(1, 0, R::from_scalar(S::one()));
            }
            beta0.push(g);
        } else {
            beta0.push(Grid::zeros(0, 0));
        }
        let smax = sys.omega.len().max(sys.f.deg + 1).max(sys.g.deg + 1);
        Expansion {
            res: sys.res,
            grading,
            jmax,
            node_radius: sys.radius(),
            omega: sys.omega.clone(),
            f_nodes,
            g_nodes,
            phases,
            shift,
            prefactor,
            beta: vec![Grid::zeros(jmax, 0)],
            bcap: vec![Grid::zeros(jmax, 0)],
            gamma: vec![Grid::zeros(jmax, 0)],
            phi: vec![Grid::zeros(jmax, 0)],
            beta0,
            exps: BTreeMap::new(),
            bpow: vec![Vec::new(); smax + 1],
            hf: BTreeMap::new(),
            hg: BTreeMap::new(),
            _s: PhantomData,
        }
    }

    /// Highest order solved so far.
    pub fn order(&self) -> usize {
        self.beta.len() - 1
    }

    /// Supplies the `β0` coefficient of order `m` (η grading only).
    pub fn set_beta0(&mut self, m: usize, value: R) {
        while self.beta0.len() <= m {
            self.beta0.push(Grid::zeros(0, 0));
        }
        let mut g = Grid::zeros(0, 0);
        g.set(0, 0, value);
        self.beta0[m] = g;
    }

    fn beta0_at(&self, m: usize) -> Grid<R> {
        self.beta0.get(m).cloned().unwrap_or_else(|| Grid::zeros(self.jmax, 0))
    }

    /// `∂^s ω / s!` at `A0`.
    fn omega_s(&self, s: usize) -> S {
        self.omega.get(s).cloned().unwrap_or_else(S::zero)
    }

    fn omega_frequency(&self) -> S {
        S::from_rational(&Rational::from((1, self.res.q)))
    }

    /// `(B^s)_m`; index 0 of `bpow` is unused.
    fn bpow_at(&self, s: usize, m: usize) -> Grid<R> {
        if s == 0 {
            return if m == 0 { Grid::unit(self.jmax) } else { Grid::zeros(self.jmax, 0) };
        }
        if s == 1 {
            return self.bcap.get(m).cloned().unwrap_or_else(|| Grid::zeros(self.jmax, 0));
        }
        self.bpow[s].get(m).cloned().unwrap_or_else(|| Grid::zeros(self.jmax, 0))
    }

    /// Extends `(B^s)_m` for `s ≥ 2` through order `m`, using `B` below `m`.
    fn extend_bpow(&mut self, m: usize) {
        for s in 2..self.bpow.len() {
            while self.bpow[s].len() <= m {
                let mm = self.bpow[s].len();
                let mut acc = Grid::zeros(self.jmax, 0);
                for l in 1..mm {
                    let bl = self.bpow_at(1, l);
                    if bl.is_zero() {
                        continue;
                    }
                    let prev = self.bpow_at(s - 1, mm - l);
                    acc.conv_acc(&bl, &prev, 0);
                }
                self.bpow[s].push(acc.tight());
            }
        }
    }

    /// `u_l = iσ (β0_l + β_l)`.
    fn u(&self, sigma: i64, l: usize) -> Grid<R> {
        let mut g = self.beta0_at(l);
        if let Some(b) = self.beta.get(l) {
            g.add_grid(b);
        }
        g.scaled(&S::i().scale_i64(sigma))
    }

    fn extend_exp(&mut self, sigma: i64, m: usize) {
        let mut es = self.exps.remove(&sigma).unwrap_or_default();
        while es.len() <= m {
            let mm = es.len();
            let e = if mm == 0 {
                // exp(u0) for u0 nilpotent in j (or zero)
                let u0 = self.u(sigma, 0);
                let mut acc = Grid::unit(self.jmax);
                let mut term = Grid::unit(self.jmax);
                for n in 1..=self.jmax {
                    let mut next = Grid::zeros(self.jmax, 0);
                    next.conv_acc(&term, &u0, 0);
                    term = next.scaled(&S::from_rational(&Rational::from((1, n as i64))));
                    if term.is_zero() {
                        break;
                    }
                    acc.add_grid(&term);
                }
                acc
            } else {
                let mut acc = Grid::zeros(self.jmax, 0);
                for l in 1..=mm {
                    let ul = self.u(sigma, l);
                    if ul.is_zero() {
                        continue;
                    }
                    acc.conv_acc(&ul.scaled(&S::from_i64(l as i64)), &es[mm - l], 0);
                }
                acc.scaled(&S::from_rational(&Rational::from((1, mm as i64))))
            };
            es.push(e.tight());
        }
        self.exps.insert(sigma, es);
    }

    /// `H_m = Σ_{σ'} e^{iσ't0} Σ_s f^{[s]}_{σσ'} shift_ν (B^s)_m` for one `σ`.
    fn h_term(&self, nodes: &[(i64, i64, Vec<S>)], m: usize) -> Grid<R> {
        let mut acc = Grid::zeros(self.jmax, 0);
        for (sp, nu, poly) in nodes {
            let ph = &self.phases[sp];
            for (s, c) in poly.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let bp = self.bpow_at(s, m);
                if bp.is_zero() {
                    continue;
                }
                let coef = ph.scale(c);
                let mut cg = Grid::zeros(0, 0);
                cg.set(0, 0, coef);
                acc.conv_acc(&cg, &bp, *nu);
            }
        }
        acc.tight()
    }

    fn extend_h(&mut self, m: usize) {
        let sig: Vec<i64> = self.f_nodes.keys().chain(self.g_nodes.keys()).copied().collect();
        for sigma in sig {
            for is_g in [false, true] {
                let nodes = if is_g { self.g_nodes.get(&sigma) } else { self.f_nodes.get(&sigma) };
                let Some(nodes) = nodes else { continue };
                let nodes = nodes.clone();
                let mut hs = if is_g { self.hg.remove(&sigma) } else { self.hf.remove(&sigma) }.unwrap_or_default();
                while hs.len() <= m {
                    hs.push(self.h_term(&nodes, hs.len()));
                }
                if is_g {
                    self.hg.insert(sigma, hs);
                } else {
                    self.hf.insert(sigma, hs);
                }
            }
        }
    }

    /// Source terms `(Γ_k, Φ_k)` from orders below `k`.
    fn sources(&mut self, k: usize) -> (Grid<R>, Grid<R>) {
        let mut gamma = Grid::zeros(self.jmax, 0);
        let mut phi = Grid::zeros(self.jmax, 0);
        self.extend_bpow(k);
        if k >= self.shift {
            let top = k - self.shift;
            self.extend_h(top);
            let sigmas: Vec<i64> = self.f_nodes.keys().chain(self.g_nodes.keys()).copied().collect();
            for &sigma in &sigmas {
                self.extend_exp(sigma, top);
            }
            let mut seen = Vec::new();
            for sigma in sigmas {
                if seen.contains(&sigma) {
                    continue;
                }
                seen.push(sigma);
                let es = &self.exps[&sigma];
                for a in 0..=top {
                    if let Some(hg) = self.hg.get(&sigma) {
                        gamma.conv_acc(&es[a], &hg[top - a], 0);
                    }
                    if let Some(hf) = self.hf.get(&sigma) {
                        phi.conv_acc(&es[a], &hf[top - a], 0);
                    }
                }
            }
            gamma = gamma.scaled(&self.prefactor);
            phi = phi.scaled(&self.prefactor);
        }
        for s in 2..self.omega.len() {
            let w = self.omega_s(s);
            if w.is_zero() {
                continue;
            }
            let bp = self.bpow_at(s, k);
            if !bp.is_zero() {
                phi.add_grid(&bp.scaled(&w));
            }
        }
        (gamma.tight(), phi.tight())
    }

    /// Solves the next order; returns it.
    pub fn step(&mut self) -> usize {
        let k = self.order() + 1;
        let (gamma, phi) = self.sources(k);
        let rad = gamma.rad.max(phi.rad);
        let mut beta = Grid::zeros(self.jmax, rad);
        let mut bcap = Grid::zeros(self.jmax, rad);
        let w = self.omega_frequency();
        let wp = self.omega_s(1);
        let wp_inv = wp.inv().expect("validated twist");
        for j in 0..=self.jmax {
            for nu in -rad..=rad {
                let g = gamma.get(j, nu);
                let p = phi.get(j, nu);
                if nu == 0 {
                    // B_0 = -Φ_0 / ω'
                    if !p.is_null() {
                        bcap.set(j, 0, p.scale(&wp_inv.neg()));
                    }
                    continue;
                }
                let d = w.mul(&S::i()).scale_i64(nu).inv().unwrap();
                let d2 = d.mul(&d);
                let b = g.scale(&d);
                let mut a = p.scale(&d);
                a.add_assign(&g.scale(&wp.mul(&d2)));
                beta.set(j, nu, a);
                bcap.set(j, nu, b);
            }
        }
        self.beta.push(beta.tight());
        self.bcap.push(bcap.tight());
        self.gamma.push(gamma);
        self.phi.push(phi);
        k
    }

    pub fn solve_to(&mut self, kmax: usize) {
        while self.order() < kmax {
            self.step();
        }
    }

    fn lookup(v: &[Grid<R>], k: usize, j: usize, nu: i64) -> R {
        v.get(k).map(|g| g.get(j, nu)).unwrap_or_else(R::czero)
    }

    pub fn beta_at(&self, k: usize, j: usize, nu: i64) -> R {
        Self::lookup(&self.beta, k, j, nu)
    }
    pub fn bcap_at(&self, k: usize, j: usize, nu: i64) -> R {
        Self::lookup(&self.bcap, k, j, nu)
    }
    pub fn gamma_at(&self, k: usize, j: usize, nu: i64) -> R {
        Self::lookup(&self.gamma, k, j, nu)
    }
    pub fn phi_at(&self, k: usize, j: usize, nu: i64) -> R {
        Self::lookup(&self.phi, k, j, nu)
    }
}

/// The `(ε, β0)` coefficient table.
pub type CoeffTable<S, R> = Expansion<S, R>;

impl<S: Scalar, R: Coef<S>> Expansion<S, R> {
    pub fn table(sys: &PlanarSystem<S>, jmax: usize, phase: impl Fn(i64) -> R) -> Self {
        Expansion::new(sys, Grading::Epsilon { jmax }, phase)
    }

    /// Ensures order `k` is available for every `j ≤ jmax`. Orders are solved
    /// in increasing `k`; asking for `k` more than one past the last solved
    /// order is an error.
    pub fn solve_order_kj(&mut self, k: usize, j: usize) -> Result<()> {
        if j > self.jmax {
            return Err(Error::InsufficientTruncation(format!("j = {j} exceeds jmax = {}", self.jmax)));
        }
        if k == 0 {
            return Ok(());
        }
        let have = self.order();
        if k > have + 1 {
            return Err(Error::MissingLowerOrder { k: have + 1, j: 0 });
        }
        if k == have + 1 {
            self.step();
        }
        Ok(())
    }
}

/// Table for a fixed phase `z = e^{i t0}`.
pub fn table_at<S: Scalar>(sys: &PlanarSystem<S>, jmax: usize, z: &S) -> CoeffTable<S, S> {
    let zinv = z.inv().expect("unit-modulus phase");
    Expansion::table(sys, jmax, |m| if m >= 0 { z.pow(m as u32) } else { zinv.pow((-m) as u32) })
}

/// Table with the phase kept symbolic.
pub fn table_symbolic<S: Scalar>(sys: &PlanarSystem<S>, jmax: usize) -> CoeffTable<S, TrigPoly<S>> {
    Expansion::table(sys, jmax, |m| TrigPoly::monomial(m, S::one()))
}

/// Truncated double series `Σ c_{kj} ε^k β0^j` on `0..=kmax × 0..=jmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariateSeries<S> {
    pub kmax: usize,
    pub jmax: usize,
    /// True when every coefficient outside the rectangle is known to vanish.
    pub polynomial: bool,
    coeffs: Vec<S>,
}

impl<S: Scalar> BivariateSeries<S> {
    pub fn zeros(kmax: usize, jmax: usize) -> Self {
        BivariateSeries { kmax, jmax, polynomial: false, coeffs: vec![S::zero(); (kmax + 1) * (jmax + 1)] }
    }

    /// A polynomial given by its terms; the rectangle is its bounding box.
    pub fn polynomial(terms: &[(usize, usize, S)]) -> Self {
        let kmax = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let jmax = terms.iter().map(|t| t.1).max().unwrap_or(0);
        let mut s = Self::from_terms(kmax, jmax, terms);
        s.polynomial = true;
        s
    }

    /// Builds from `(k, j, value)` triples; unspecified entries are zero.
    pub fn from_terms(kmax: usize, jmax: usize, terms: &[(usize, usize, S)]) -> Self {
        let mut s = Self::zeros(kmax, jmax);
        for (k, j, v) in terms {
            let cur = s.get(*k, *j);
            s.set(*k, *j, cur.add(v));
        }
        s
    }

    pub fn get(&self, k: usize, j: usize) -> S {
        if k > self.kmax || j > self.jmax {
            S::zero()
        } else {
            self.coeffs[k * (self.jmax + 1) + j].clone()
        }
    }

    pub fn set(&mut self, k: usize, j: usize, v: S) {
        assert!(k <= self.kmax && j <= self.jmax, "index outside truncation");
        self.coeffs[k * (self.jmax + 1) + j] = v;
    }

    pub fn carrier(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..=self.kmax {
            for j in 0..=self.jmax {
                if !self.get(k, j).is_zero() {
                    out.push((k, j));
                }
            }
        }
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> BivariateSeries<T> {
        BivariateSeries {
            kmax: self.kmax,
            jmax: self.jmax,
            polynomial: self.polynomial,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn to_approx(&self) -> BivariateSeries<crate::scalar::Approx> {
        self.map(|x| x.to_approx())
    }
}

/// `F^{(κ)}_{k,j} = Γ̄_0^{(k+κ+1, j)}` for `k ≤ kmax`, `j ≤ jmax`.
pub fn f0_table_from<S: Scalar>(table: &CoeffTable<S, S>, kappa: usize, kmax: usize) -> BivariateSeries<S> {
    let mut out = BivariateSeries::zeros(kmax, table.jmax);
    for k in 0..=kmax {
        for j in 0..=table.jmax {
            out.set(k, j, table.gamma_at(k + kappa + 1, j, 0));
        }
    }
    out
}

/// Bifurcation table at a fixed phase: solves the recursion to the order needed.
pub fn f0_table<S: Scalar>(sys: &PlanarSystem<S>, z: &S, kappa: usize, kmax: usize, jmax: usize) -> BivariateSeries<S> {
    let mut t = table_at(sys, jmax, z);
    t.solve_to(kmax + kappa + 1);
    f0_table_from(&t, kappa, kmax)
}

/// Smallest `j` with `F_{0,j} ≠ 0`.
pub fn general_order<S: Scalar>(f0: &BivariateSeries<S>) -> Result<usize> {
    (0..=f0.jmax).find(|&j| !f0.get(0, j).is_zero()).ok_or(Error::NotGeneral(f0.jmax))
}

/// Least-squares fit `ln|x| ≈ a + b k + c j` over the supplied samples.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrowthFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Fits `C1 C2^k C3^j` to `(k, j, ln|x|)` samples; `C1` is raised so the fit
/// bounds every sample. With a single `j` value `C3` is reported as 1.
pub fn fit_growth(samples: &[(f64, f64, f64)]) -> Option<GrowthFit> {
    let n = samples.len();
    if n < 3 {
        return None;
    }
    let use_j = samples.iter().any(|s| s.1 != samples[0].1);
    let cols = if use_j { 3 } else { 2 };
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for &(k, j, y) in samples {
        let row = [1.0, k, j];
        for a in 0..cols {
            aty[a] += row[a] * y;
            for b in 0..cols {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    let coef = solve_small(&ata, &aty, cols)?;
    let mean = samples.iter().map(|s| s.2).sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for &(k, j, y) in samples {
        let fit = coef[0] + coef[1] * k + if use_j { coef[2] * j } else { 0.0 };
        ss_res += (y - fit).powi(2);
        ss_tot += (y - mean).powi(2);
        worst = worst.max(y - fit);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(GrowthFit {
        c1: (coef[0] + worst.max(0.0)).exp(),
        c2: coef[1].exp(),
        c3: if use_j { coef[2].exp() } else { 1.0 },
        r_squared: r2,
        samples: n,
    })
}

fn solve_small(a: &[[f64; 3]; 3], b: &[f64; 3], n: usize) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[i][j];
        }
        m[i][3] = b[i];
    }
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..4 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    let mut x = [0.0; 3];
    for i in 0..n {
        x[i] = m[i][3] / m[i][i];
    }
    Some(x)
}
