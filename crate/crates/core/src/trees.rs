//! Labeled trees as an independent evaluation of low-order coefficients.
//!
//! A tree is a node with an ordered list of angle children and an ordered
//! list of action children. Its value is the product of line propagators and
//! node factors; the `1/(r! s!)` in the node factor matches the ordered
//! children, so summing values over all admissible labelings reproduces the
//! Taylor–Fourier coefficients of the recursion term by term.
//!
//! * [`enumerate_trees`] builds the trees of the `(ε, β0)` expansion. Leaves
//!   stand for `β0` and the order is the number of badge-1 nodes.
//! * [`enumerate_allowed_trees`] builds the trees of the `η` expansion along
//!   a branch. Leaves carry the branch constants `c_a`, and `β0`-lines carry
//!   subtrees rooted in the bifurcation equation with propagator `-1/C`.
//!
//! Mode labels range over the support of `F` and `G`; labelings whose node
//! factor vanishes identically (`σ = 0` with angle children, or a zero Taylor
//! coefficient) are not generated.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use rug::Rational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eta::EtaSolution;
use crate::scalar::Scalar;
use crate::series::PlanarSystem;

/// Largest order and leaf count accepted by [`enumerate_trees`].
pub const MAX_TREE_ORDER: usize = 3;
pub const MAX_TREE_LEAVES: usize = 2;

/// Component label of a line. In allowed trees `Alpha` and `Action` play the
/// roles of `β̃` and `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Component {
    Alpha,
    Action,
    /// Root of a tree contributing to the mean of the `A`-equation.
    Gamma,
    Beta0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Line {
    pub h: Component,
    pub delta: u8,
    pub nu: i64,
}

#[derive(Clone, Debug)]
pub enum Child {
    /// Leaf with its label: `β0` itself in the `ε` expansion, the constant
    /// `c_a` in allowed trees.
    Leaf(usize),
    /// `β0`-line exiting a subtree rooted in the bifurcation equation.
    Tail(Arc<Tree>),
    Sub(Arc<Tree>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    F,
    G,
    /// Badge-0 node carrying `∂^s ω / s!`.
    Omega,
}

#[derive(Clone, Debug)]
pub struct Tree {
    pub line: Line,
    pub badge: u8,
    pub sigma: i64,
    pub sigma_prime: i64,
    pub source: Source,
    pub alpha: Vec<Child>,
    pub action: Vec<Arc<Tree>>,
}

impl Tree {
    pub fn nodes(&self) -> usize {
        1 + self.alpha.iter().map(|c| match c {
            Child::Leaf(_) => 0,
            Child::Tail(t) | Child::Sub(t) => t.nodes(),
        }).sum::<usize>()
            + self.action.iter().map(|t| t.nodes()).sum::<usize>()
    }

    pub fn leaves(&self) -> usize {
        self.alpha.iter().map(|c| match c {
            Child::Leaf(_) => 1,
            Child::Tail(t) | Child::Sub(t) => t.leaves(),
        }).sum::<usize>()
            + self.action.iter().map(|t| t.leaves()).sum::<usize>()
    }

    /// Every vertex has exactly one exiting line.
    pub fn lines(&self) -> usize {
        self.nodes() + self.leaves()
    }

    pub fn badge_nodes(&self) -> usize {
        self.badge as usize
            + self.alpha.iter().map(|c| match c {
                Child::Leaf(_) => 0,
                Child::Tail(t) | Child::Sub(t) => t.badge_nodes(),
            }).sum::<usize>()
            + self.action.iter().map(|t| t.badge_nodes()).sum::<usize>()
    }

    /// `(badge-1 nodes, Σ leaf weights, β0-lines)` without entering
    /// `β0`-subtrees; the root's own line is not counted.
    fn level(&self, weights: &[usize]) -> (usize, usize, usize) {
        let mut out = (self.badge as usize, 0, 0);
        for c in &self.alpha {
            match c {
                Child::Leaf(a) => out.1 += weights[*a],
                Child::Tail(_) => out.2 += 1,
                Child::Sub(t) => {
                    let l = t.level(weights);
                    out = (out.0 + l.0, out.1 + l.1, out.2 + l.2);
                }
            }
        }
        for t in &self.action {
            let l = t.level(weights);
            out = (out.0 + l.0, out.1 + l.1, out.2 + l.2);
        }
        out
    }

    /// Number of lines with component `β0`, the root line included.
    pub fn beta0_lines(&self) -> usize {
        (self.line.h == Component::Beta0) as usize
            + self.alpha.iter().map(|c| match c {
                Child::Leaf(_) => 0,
                Child::Tail(t) | Child::Sub(t) => t.beta0_lines(),
            }).sum::<usize>()
            + self.action.iter().map(|t| t.beta0_lines()).sum::<usize>()
    }

    /// Leaf counts per label.
    pub fn leaf_labels(&self, out: &mut BTreeMap<usize, usize>) {
        for c in &self.alpha {
            match c {
                Child::Leaf(a) => *out.entry(*a).or_default() += 1,
                Child::Tail(t) | Child::Sub(t) => t.leaf_labels(out),
            }
        }
        for t in &self.action {
            t.leaf_labels(out);
        }
    }
}

/// Scalars shared by all value computations for one system and phase.
pub struct TreeContext<'a, S: Scalar> {
    pub sys: &'a PlanarSystem<S>,
    z: S,
    w: S,
    wp: S,
    wp_inv: S,
}

impl<'a, S: Scalar> TreeContext<'a, S> {
    /// `z = e^{i t0}`.
    pub fn new(sys: &'a PlanarSystem<S>, z: &S) -> Result<Self> {
        let wp = sys.omega_prime();
        let wp_inv = wp.inv().ok_or(Error::DegenerateFrequency)?;
        Ok(TreeContext {
            sys,
            z: z.clone(),
            w: S::from_rational(&Rational::from((1, sys.res.q))),
            wp,
            wp_inv,
        })
    }

    /// `ω'^{δ-1} / (iων)^δ` for `ν ≠ 0`, `-1/ω'` on action lines with
    /// `ν = 0`, and 1 on the root of a mean-equation tree.
    pub fn propagator(&self, line: &Line) -> S {
        match line.h {
            Component::Gamma => S::one(),
            Component::Beta0 => unreachable!("β0 propagator depends on the branch"),
            _ if line.nu != 0 => {
                let d = self.w.mul(&S::i()).scale_i64(line.nu).inv().unwrap();
                if line.delta == 2 {
                    self.wp.mul(&d).mul(&d)
                } else {
                    d
                }
            }
            Component::Action => self.wp_inv.neg(),
            Component::Alpha => unreachable!("angle lines carry ν ≠ 0"),
        }
    }

    pub fn node_factor(&self, t: &Tree) -> S {
        let s = t.action.len();
        if t.source == Source::Omega {
            return self.sys.omega_coeff(s);
        }
        let f = if t.source == Source::F { &self.sys.f } else { &self.sys.g };
        let r = t.alpha.len();
        let mut v = f.coeff(t.sigma, t.sigma_prime, s);
        if r > 0 {
            v = v.mul(&S::i().scale_i64(t.sigma).pow(r as u32));
            let fact: i64 = (1..=r as i64).product();
            v = v.mul(&S::from_rational(&Rational::from((1, fact))));
        }
        v.mul(&self.z.powi(t.sigma_prime).expect("unit phase"))
    }
}

/// Value of a tree of the `(ε, β0)` expansion.
pub fn tree_value<S: Scalar>(t: &Tree, ctx: &TreeContext<S>) -> S {
    let mut v = ctx.propagator(&t.line).mul(&ctx.node_factor(t));
    for c in &t.alpha {
        match c {
            Child::Leaf(_) => {}
            Child::Sub(s) => v = v.mul(&tree_value(s, ctx)),
            Child::Tail(_) => unreachable!("β0-lines only occur in allowed trees"),
        }
    }
    for s in &t.action {
        v = v.mul(&tree_value(s, ctx));
    }
    v
}

/// Sequences of children with their total budget and momentum.
type Seqs<C> = Arc<Vec<(Vec<C>, i64)>>;

/// One admissible child: the child, its `(order, leaves)` cost and momentum.
type Item<C> = (C, (usize, usize), i64);

/// Ordered sequences of `n` items from `items` whose costs add up to
/// exactly `budget`.
fn sequences<C: Clone>(n: usize, budget: (usize, usize), items: &[Item<C>]) -> Vec<(Vec<C>, i64)> {
    if n == 0 {
        return if budget == (0, 0) { vec![(Vec::new(), 0)] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for (c, cost, nu) in items {
        if cost.0 > budget.0 || cost.1 > budget.1 {
            continue;
        }
        for (mut rest, rnu) in sequences(n - 1, (budget.0 - cost.0, budget.1 - cost.1), items) {
            rest.insert(0, c.clone());
            out.push((rest, nu + rnu));
        }
    }
    out
}

struct Modes {
    /// `(source, σ, σ', ν_v, nonzero Taylor degrees)`.
    list: Vec<(Source, i64, i64, i64, Vec<usize>)>,
    omega: Vec<usize>,
}

impl Modes {
    fn new<S: Scalar>(sys: &PlanarSystem<S>) -> Self {
        let mut list = Vec::new();
        for (src, f) in [(Source::F, &sys.f), (Source::G, &sys.g)] {
            for (&(s, sp), poly) in &f.modes {
                let degs: Vec<usize> = poly.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, _)| i).collect();
                if !degs.is_empty() {
                    list.push((src, s, sp, sys.res.nu(s, sp), degs));
                }
            }
        }
        let omega = (2..sys.omega.len()).filter(|&s| !sys.omega[s].is_zero()).collect();
        Modes { list, omega }
    }

    /// Badge-1 choices `(source, δ)` for a root line of component `h`.
    fn sources(h: Component) -> &'static [(Source, u8)] {
        match h {
            Component::Alpha => &[(Source::F, 1), (Source::G, 2)],
            Component::Action => &[(Source::G, 1), (Source::F, 1)],
            Component::Gamma | Component::Beta0 => &[(Source::G, 1)],
        }
    }

    /// Momentum constraint on the root line.
    fn admissible(h: Component, src: Source, nu: i64) -> bool {
        match (h, src) {
            (Component::Alpha, _) => nu != 0,
            (Component::Action, Source::G) => nu != 0,
            (Component::Action, _) => nu == 0,
            (Component::Gamma | Component::Beta0, _) => nu == 0,
        }
    }
}

/// Builds every node with root component `h` whose children exhaust
/// `budget` exactly. `alpha_items` / `action_items` list the admissible
/// children for a remaining budget.
fn build_nodes(
    modes: &Modes,
    h: Component,
    badge1_budget: Option<(usize, usize)>,
    badge0_budget: Option<(usize, usize)>,
    alpha_seqs: &mut dyn FnMut(usize, (usize, usize)) -> Seqs<Child>,
    action_seqs: &mut dyn FnMut(usize, (usize, usize)) -> Seqs<Arc<Tree>>,
) -> Vec<Arc<Tree>> {
    let mut out = Vec::new();
    if let Some(b) = badge1_budget {
        for &(src, delta) in Modes::sources(h) {
            for (msrc, sigma, sp, nu_v, degs) in &modes.list {
                if *msrc != src {
                    continue;
                }
                for &s in degs {
                    for r in 0..=(b.0 + b.1) {
                        if r > 0 && *sigma == 0 {
                            break;
                        }
                        if r + s > b.0 + b.1 {
                            break;
                        }
                        for ka in 0..=b.0 {
                            for ja in 0..=b.1 {
                                let a_list = alpha_seqs(r, (ka, ja));
                                if a_list.is_empty() {
                                    continue;
                                }
                                let s_list = action_seqs(s, (b.0 - ka, b.1 - ja));
                                for (ac, anu) in a_list.iter() {
                                    for (sc, snu) in s_list.iter() {
                                        let nu = nu_v + anu + snu;
                                        if !Modes::admissible(h, src, nu) {
                                            continue;
                                        }
                                        out.push(Arc::new(Tree {
                                            line: Line { h, delta, nu },
                                            badge: 1,
                                            sigma: *sigma,
                                            sigma_prime: *sp,
                                            source: src,
                                            alpha: ac.clone(),
                                            action: sc.clone(),
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if let (Some(b), Component::Alpha | Component::Action) = (badge0_budget, h) {
        for &s in &modes.omega {
            for (sc, nu) in action_seqs(s, b).iter() {
                let ok = if h == Component::Alpha { *nu != 0 } else { *nu == 0 };
                if ok {
                    out.push(Arc::new(Tree {
                        line: Line { h, delta: 1, nu: *nu },
                        badge: 0,
                        sigma: 0,
                        sigma_prime: 0,
                        source: Source::Omega,
                        alpha: Vec::new(),
                        action: sc.clone(),
                    }));
                }
            }
        }
    }
    out
}

/// Memoized enumerator for the `(ε, β0)` expansion.
pub struct TreeEnumerator {
    modes: Arc<Modes>,
    memo: HashMap<(Component, usize, usize), Arc<Vec<Arc<Tree>>>>,
    alpha_memo: HashMap<(usize, usize, usize), Seqs<Child>>,
    action_memo: HashMap<(usize, usize, usize), Seqs<Arc<Tree>>>,
}

impl TreeEnumerator {
    pub fn new<S: Scalar>(sys: &PlanarSystem<S>) -> Self {
        TreeEnumerator { modes: Arc::new(Modes::new(sys)), memo: HashMap::new(), alpha_memo: HashMap::new(), action_memo: HashMap::new() }
    }

    /// All trees of order `k` with `j` leaves and root component `h`
    /// (`Alpha`, `Action` or `Gamma`), any momentum.
    pub fn all(&mut self, h: Component, k: usize, j: usize) -> Arc<Vec<Arc<Tree>>> {
        if let Some(v) = self.memo.get(&(h, k, j)) {
            return v.clone();
        }
        let out = if k == 0 {
            Vec::new()
        } else {
            let modes = self.modes.clone();
            let b1 = Some((k - 1, j));
            let b0 = Some((k, j));
            let v = {
                let cell = std::cell::RefCell::new(&mut *self);
                let mut aseq = |n: usize, b: (usize, usize)| cell.borrow_mut().alpha_seqs(n, b);
                let mut sseq = |n: usize, b: (usize, usize)| cell.borrow_mut().action_seqs(n, b);
                build_nodes(&modes, h, b1, b0, &mut aseq, &mut sseq)
            };
            v
        };
        let out = Arc::new(out);
        self.memo.insert((h, k, j), out.clone());
        out
    }

    fn alpha_seqs(&mut self, n: usize, b: (usize, usize)) -> Seqs<Child> {
        if let Some(v) = self.alpha_memo.get(&(n, b.0, b.1)) {
            return v.clone();
        }
        let mut pool: Vec<Item<Child>> = Vec::new();
        if b.1 >= 1 {
            pool.push((Child::Leaf(0), (0, 1), 0));
        }
        for k in 1..=b.0 {
            for j in 0..=b.1 {
                for t in self.all(Component::Alpha, k, j).iter() {
                    pool.push((Child::Sub(t.clone()), (k, j), t.line.nu));
                }
            }
        }
        let out = Arc::new(sequences(n, b, &pool));
        self.alpha_memo.insert((n, b.0, b.1), out.clone());
        out
    }

    fn action_seqs(&mut self, n: usize, b: (usize, usize)) -> Seqs<Arc<Tree>> {
        if let Some(v) = self.action_memo.get(&(n, b.0, b.1)) {
            return v.clone();
        }
        let mut pool: Vec<Item<Arc<Tree>>> = Vec::new();
        // every child has order at least 1, which also keeps an ω-node
        // from asking for its own order
        for k in 1..=(b.0 + 1).saturating_sub(n.max(1)) {
            for j in 0..=b.1 {
                for t in self.all(Component::Action, k, j).iter() {
                    pool.push((t.clone(), (k, j), t.line.nu));
                }
            }
        }
        let out = Arc::new(sequences(n, b, &pool));
        self.action_memo.insert((n, b.0, b.1), out.clone());
        out
    }
}

/// Trees of order `k`, momentum `nu`, root component `h` and `j` leaves.
pub fn enumerate_trees<S: Scalar>(sys: &PlanarSystem<S>, k: usize, nu: i64, h: Component, j: usize) -> Result<Vec<Arc<Tree>>> {
    if k > MAX_TREE_ORDER || j > MAX_TREE_LEAVES {
        return Err(Error::CapExceeded(format!("k = {k}, j = {j} (caps {MAX_TREE_ORDER}, {MAX_TREE_LEAVES})")));
    }
    if h == Component::Beta0 {
        return Err(Error::Precondition("β0-rooted trees need branch data".into()));
    }
    let mut e = TreeEnumerator::new(sys);
    Ok(e.all(h, k, j).iter().filter(|t| t.line.nu == nu).cloned().collect())
}

/// Branch data entering allowed trees.
#[derive(Clone, Debug)]
pub struct AllowedBranch<S> {
    pub pp: usize,
    /// Leaf weights `𝔥_a`.
    pub h: Vec<usize>,
    /// Leaf factors `c_a`.
    pub c: Vec<S>,
    pub s: usize,
    pub kappa: usize,
    /// Derivative constant of the last face polynomial.
    pub cc: S,
    pub sigma: i64,
}

impl<S: Scalar> AllowedBranch<S> {
    pub fn from_solution(sol: &EtaSolution<S>) -> Self {
        AllowedBranch {
            pp: sol.pp,
            h: sol.h_list.clone(),
            c: sol.h_list.iter().map(|&h| sol.beta0[h].clone()).collect(),
            s: sol.s_last(),
            kappa: sol.kappa,
            cc: sol.c.clone(),
            sigma: sol.sigma0 as i64,
        }
    }

    pub fn h_last(&self) -> usize {
        self.h.last().copied().unwrap_or(0)
    }

    /// Weight of a `β0`-line: `𝔥 - 𝔰 - 𝔭(κ + 1)`.
    pub fn tail_weight(&self) -> i64 {
        self.h_last() as i64 - self.s as i64 - (self.pp * (self.kappa + 1)) as i64
    }

    /// `𝔮 = min(𝔥_0, 𝔭)`, or `𝔭` when the branch has no steps.
    pub fn q_frak(&self) -> usize {
        self.h.first().map(|&h0| h0.min(self.pp)).unwrap_or(self.pp)
    }

    /// Order cap `𝔭 + 𝔰 + 2`.
    pub fn cap(&self) -> usize {
        self.pp + self.s + 2
    }
}

/// Memoized enumerator for allowed trees of one branch.
pub struct AllowedEnumerator {
    modes: Arc<Modes>,
    pp: usize,
    weights: Vec<usize>,
    h_last: usize,
    s: usize,
    kappa: usize,
    memo: HashMap<(Component, usize, usize), Arc<Vec<Arc<Tree>>>>,
    alpha_memo: HashMap<(usize, usize, usize), Seqs<Child>>,
    action_memo: HashMap<(usize, usize, usize), Seqs<Arc<Tree>>>,
}

impl AllowedEnumerator {
    pub fn new<S: Scalar>(sys: &PlanarSystem<S>, br: &AllowedBranch<S>) -> Self {
        AllowedEnumerator {
            modes: Arc::new(Modes::new(sys)),
            pp: br.pp,
            weights: br.h.clone(),
            h_last: br.h_last(),
            s: br.s,
            kappa: br.kappa,
            memo: HashMap::new(),
            alpha_memo: HashMap::new(),
            action_memo: HashMap::new(),
        }
    }

    /// Allowed trees of order `k` with root component `h`, any momentum,
    /// whose `β0`-lines (outside nested `β0`-subtrees) have order at most
    /// `cap`.
    pub fn all(&mut self, h: Component, k: usize, cap: usize) -> Arc<Vec<Arc<Tree>>> {
        let cap = match h {
            Component::Beta0 => k.saturating_sub(1),
            _ => cap.min(k.saturating_sub(self.pp)),
        };
        if let Some(v) = self.memo.get(&(h, k, cap)) {
            return v.clone();
        }
        let out = match h {
            Component::Gamma => Vec::new(),
            Component::Alpha | Component::Action => {
                if k < self.pp {
                    Vec::new()
                } else {
                    self.nodes(h, Some(k - self.pp), Some(k), cap)
                }
            }
            Component::Beta0 => {
                if k <= self.h_last {
                    Vec::new()
                } else {
                    let budget = k + self.s + self.pp * self.kappa - self.h_last;
                    let trees = self.nodes(Component::Beta0, Some(budget), None, cap);
                    trees.into_iter().filter(|t| self.beta0_admissible(t)).collect()
                }
            }
        };
        let out = Arc::new(out);
        self.memo.insert((h, k, cap), out.clone());
        out
    }

    /// The level of a `β0`-tree must sit at or above the face: `n ≥ 0`, and
    /// carry at least `κ + 1` badge-1 nodes.
    fn beta0_admissible(&self, t: &Tree) -> bool {
        let (n1, lw, tails) = t.level(&self.weights);
        if n1 < self.kappa + 1 {
            return false;
        }
        let n = (self.pp * (n1 - self.kappa - 1) + lw + tails * self.h_last) as i64 - self.s as i64;
        n >= 0
    }

    fn nodes(&mut self, h: Component, b1: Option<usize>, b0: Option<usize>, cap: usize) -> Vec<Arc<Tree>> {
        let modes = self.modes.clone();
        let v = {
            let cell = std::cell::RefCell::new(&mut *self);
            let mut aseq = |n: usize, b: (usize, usize)| cell.borrow_mut().alpha_seqs(n, b.0, cap);
            let mut sseq = |n: usize, b: (usize, usize)| cell.borrow_mut().action_seqs(n, b.0, cap);
            build_nodes(&modes, h, b1.map(|b| (b, 0)), b0.map(|b| (b, 0)), &mut aseq, &mut sseq)
        };
        v
    }

    fn alpha_seqs(&mut self, n: usize, b: usize, cap: usize) -> Seqs<Child> {
        if let Some(v) = self.alpha_memo.get(&(n, b, cap)) {
            return v.clone();
        }
        let mut pool: Vec<Item<Child>> = Vec::new();
        for (a, &w) in self.weights.clone().iter().enumerate() {
            if w <= b {
                pool.push((Child::Leaf(a), (w, 0), 0));
            }
        }
        for k in (self.h_last + 1)..=b.min(cap) {
            for t in self.all(Component::Beta0, k, cap).iter() {
                pool.push((Child::Tail(t.clone()), (k, 0), 0));
            }
        }
        for k in self.pp..=b {
            for t in self.all(Component::Alpha, k, cap).iter() {
                pool.push((Child::Sub(t.clone()), (k, 0), t.line.nu));
            }
        }
        let out = Arc::new(sequences(n, (b, 0), &pool));
        self.alpha_memo.insert((n, b, cap), out.clone());
        out
    }

    fn action_seqs(&mut self, n: usize, b: usize, cap: usize) -> Seqs<Arc<Tree>> {
        if let Some(v) = self.action_memo.get(&(n, b, cap)) {
            return v.clone();
        }
        let mut pool: Vec<Item<Arc<Tree>>> = Vec::new();
        for k in self.pp..=b.saturating_sub(n.saturating_sub(1) * self.pp) {
            for t in self.all(Component::Action, k, cap).iter() {
                pool.push((t.clone(), (k, 0), t.line.nu));
            }
        }
        let out = Arc::new(sequences(n, (b, 0), &pool));
        self.action_memo.insert((n, b, cap), out.clone());
        out
    }
}

/// Value of an allowed tree: badge-1 nodes carry `σ`, leaves `c_a`, and
/// each `β0`-subtree the propagator `-1/C` and a factor `σ^{κ+1}` that
/// removes the powers of `ε` factored out of the bifurcation equation.
pub fn allowed_value<S: Scalar>(t: &Tree, ctx: &TreeContext<S>, br: &AllowedBranch<S>) -> S {
    let sigma = S::from_i64(br.sigma);
    let mut v = ctx.node_factor(t);
    if t.line.h == Component::Beta0 {
        let g = br.cc.inv().expect("nonzero derivative constant").neg();
        v = v.mul(&g).mul(&sigma.pow((br.kappa + 2) as u32));
    } else {
        v = v.mul(&ctx.propagator(&t.line));
        if t.badge == 1 {
            v = v.mul(&sigma);
        }
    }
    for c in &t.alpha {
        let x = match c {
            Child::Leaf(a) => br.c[*a].clone(),
            Child::Tail(s) | Child::Sub(s) => allowed_value(s, ctx, br),
        };
        v = v.mul(&x);
    }
    for s in &t.action {
        v = v.mul(&allowed_value(s, ctx, br));
    }
    v
}

/// Order of an allowed tree from its weights.
pub fn allowed_order<S: Scalar>(t: &Tree, br: &AllowedBranch<S>) -> i64 {
    let mut labels = BTreeMap::new();
    t.leaf_labels(&mut labels);
    (br.pp * t.badge_nodes()) as i64
        + br.tail_weight() * t.beta0_lines() as i64
        + labels.iter().map(|(&a, &m)| (br.h[a] * m) as i64).sum::<i64>()
}

/// Allowed trees of order `k`, momentum `nu` and root component `h`
/// (`Alpha`, `Action` or `Beta0`).
pub fn enumerate_allowed_trees<S: Scalar>(
    sys: &PlanarSystem<S>,
    br: &AllowedBranch<S>,
    k: usize,
    nu: i64,
    h: Component,
) -> Result<Vec<Arc<Tree>>> {
    if k > br.cap() {
        return Err(Error::CapExceeded(format!("k = {k} exceeds 𝔭 + 𝔰 + 2 = {}", br.cap())));
    }
    let mut e = AllowedEnumerator::new(sys, br);
    Ok(e.all(h, k, usize::MAX).iter().filter(|t| t.line.nu == nu).cloned().collect())
}

/// Counting-bound summary over a set of trees.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundsReport {
    pub trees: usize,
    pub max_lines: usize,
    /// Smallest slack `bound - |L|` seen.
    pub min_slack: Option<f64>,
    /// Trees over their bound, and the first of them.
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl BoundsReport {
    fn record(&mut self, lines: usize, bound: f64) {
        self.trees += 1;
        self.max_lines = self.max_lines.max(lines);
        let slack = bound - lines as f64;
        self.min_slack = Some(self.min_slack.map_or(slack, |m| m.min(slack)));
        if slack < -1e-9 {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, o: &BoundsReport) {
        self.trees += o.trees;
        self.max_lines = self.max_lines.max(o.max_lines);
        self.min_slack = match (self.min_slack, o.min_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.violations += o.violations;
        if self.first_violation.is_none() {
            self.first_violation = o.first_violation.clone();
        }
    }
}

/// `|L| = |V| ≤ 2k + j - 1` on trees of the `ε` expansion.
pub fn bounds_check(trees: &[Arc<Tree>]) -> Result<BoundsReport> {
    let mut rep = BoundsReport::default();
    for t in trees {
        let (l, k, j) = (t.lines(), t.badge_nodes(), t.leaves());
        let bound = 2 * k + j - 1;
        if l != t.nodes() + j || l > bound {
            return Err(Error::BoundViolated { lines: l, bound: bound as f64, which: format!("|V| ≤ 2k + j - 1 at k = {k}, j = {j}") });
        }
        rep.record(l, bound as f64);
    }
    Ok(rep)
}

/// `|L| ≤ M k` with `M = 2𝔰/𝔮 + 3` on allowed trees, and additionally
/// `|L| ≤ M (k - 𝔥) - (1 + 𝔰/𝔮)` on `β0`-rooted ones.
pub fn allowed_bounds_check<S: Scalar>(trees: &[Arc<Tree>], br: &AllowedBranch<S>) -> Result<BoundsReport> {
    let rep = allowed_bounds_survey(trees, br);
    match rep.first_violation {
        Some(ref which) => {
            let t = trees.iter().find(|t| allowed_bound(t, br).0 < t.lines() as f64 - 1e-9).expect("violating tree");
            Err(Error::BoundViolated { lines: t.lines(), bound: allowed_bound(t, br).0, which: which.clone() })
        }
        None => Ok(rep),
    }
}

fn allowed_bound<S: Scalar>(t: &Tree, br: &AllowedBranch<S>) -> (f64, &'static str, i64) {
    let q = br.q_frak() as f64;
    let m = 2.0 * br.s as f64 / q + 3.0;
    let k = allowed_order(t, br);
    let mut bound = m * k as f64;
    let mut which = "|L| ≤ M k";
    if t.line.h == Component::Beta0 {
        bound = bound.min(m * (k - br.h_last() as i64) as f64 - (1.0 + br.s as f64 / q));
        which = "|L| ≤ M (k - 𝔥) - (1 + 𝔰/𝔮)";
    }
    (bound, which, k)
}

/// Same bounds, recording violations instead of stopping at the first.
/// Badge-0 nodes from `ω'' ≠ 0` add lines without adding order, so these
/// bounds can fail when `ω` is not linear in `A`.
pub fn allowed_bounds_survey<S: Scalar>(trees: &[Arc<Tree>], br: &AllowedBranch<S>) -> BoundsReport {
    let mut rep = BoundsReport::default();
    for t in trees {
        let l = t.lines();
        let (bound, which, k) = allowed_bound(t, br);
        if l as f64 > bound + 1e-9 && rep.first_violation.is_none() {
            rep.first_violation = Some(format!("tree with {l} lines exceeds {bound} ({which} at k = {k})"));
        }
        rep.record(l, bound);
    }
    rep
}

/// Tree sums against a reference value at one `(k, j, ν, h)`.
#[derive(Clone, Debug, Serialize)]
pub struct TreeComparison {
    pub h: Component,
    pub k: usize,
    pub j: usize,
    pub nu: i64,
    pub trees: usize,
    pub tree_sum: crate::scalar::Number,
    pub reference: crate::scalar::Number,
    pub matches: bool,
}

fn agree<S: Scalar>(a: &S, b: &S) -> bool {
    if S::EXACT {
        a == b
    } else {
        let scale = 1.0 + a.abs_f64().max(b.abs_f64());
        a.sub(b).abs_f64() <= crate::scalar::ident_tol() * scale
    }
}

fn sum_by_nu<S: Scalar>(trees: &[Arc<Tree>], value: impl Fn(&Tree) -> S + Sync) -> BTreeMap<i64, (usize, S)> {
    let vals: Vec<(i64, S)> = trees.par_iter().map(|t| (t.line.nu, value(t))).collect();
    let mut out: BTreeMap<i64, (usize, S)> = BTreeMap::new();
    for (nu, v) in vals {
        let e = out.entry(nu).or_insert_with(|| (0, S::zero()));
        e.0 += 1;
        e.1 = e.1.add(&v);
    }
    out
}

/// Compares tree sums with the `(ε, β0)` recursion at phase `z` for
/// `k ≤ kmax`, `j ≤ jmax`: angle entries (`ν ≠ 0`), action entries and the
/// mean of the `A`-equation. Also returns the bound summary.
pub fn compare_with_table<S: Scalar>(
    sys: &PlanarSystem<S>,
    z: &S,
    kmax: usize,
    jmax: usize,
) -> Result<(Vec<TreeComparison>, BoundsReport)> {
    if kmax > MAX_TREE_ORDER || jmax > MAX_TREE_LEAVES {
        return Err(Error::CapExceeded(format!("k ≤ {kmax}, j ≤ {jmax} (caps {MAX_TREE_ORDER}, {MAX_TREE_LEAVES})")));
    }
    let ctx = TreeContext::new(sys, z)?;
    let mut table = crate::coefficients::table_at(sys, jmax, z);
    table.solve_to(kmax);
    let mut en = TreeEnumerator::new(sys);
    let mut out = Vec::new();
    let mut bounds = BoundsReport::default();
    for k in 1..=kmax {
        for j in 0..=jmax {
            for h in [Component::Alpha, Component::Action, Component::Gamma] {
                let trees = en.all(h, k, j);
                bounds.merge(&bounds_check(&trees)?);
                let sums = sum_by_nu(&trees, |t| tree_value(t, &ctx));
                let rad = table.beta.get(k).map(|g| g.rad).unwrap_or(0).max(sums.keys().map(|n| n.abs()).max().unwrap_or(0));
                for nu in -rad..=rad {
                    let reference = match h {
                        Component::Alpha if nu == 0 => continue,
                        Component::Alpha => table.beta_at(k, j, nu),
                        Component::Action => table.bcap_at(k, j, nu),
                        _ if nu != 0 => continue,
                        _ => table.gamma_at(k, j, 0),
                    };
                    let (n, s) = sums.get(&nu).cloned().unwrap_or_else(|| (0, S::zero()));
                    if n == 0 && reference.is_zero() {
                        continue;
                    }
                    out.push(TreeComparison {
                        h,
                        k,
                        j,
                        nu,
                        trees: n,
                        matches: agree(&s, &reference),
                        tree_sum: s.to_number(),
                        reference: reference.to_number(),
                    });
                }
            }
        }
    }
    Ok((out, bounds))
}

/// Compares allowed-tree sums with an `η` solution for `k` up to
/// `min(kmax, 𝔭 + 𝔰 + 2)`: `β̃`, `B` and the tail of `β0`.
pub fn compare_with_solution<S: Scalar>(
    sys: &PlanarSystem<S>,
    sol: &EtaSolution<S>,
    kmax: usize,
) -> Result<(Vec<TreeComparison>, BoundsReport)> {
    let br = AllowedBranch::from_solution(sol);
    if kmax > br.cap() {
        return Err(Error::CapExceeded(format!("k = {kmax} exceeds 𝔭 + 𝔰 + 2 = {}", br.cap())));
    }
    if kmax > sol.kmax {
        return Err(Error::InsufficientTruncation(format!("solution known to order {}, trees requested to {kmax}", sol.kmax)));
    }
    let ctx = TreeContext::new(sys, &sol.z)?;
    let mut en = AllowedEnumerator::new(sys, &br);
    let mut out = Vec::new();
    let mut bounds = BoundsReport::default();
    for k in 1..=kmax {
        for h in [Component::Alpha, Component::Action, Component::Beta0] {
            let trees = en.all(h, k, usize::MAX);
            for t in trees.iter() {
                let o = allowed_order(t, &br);
                if o != k as i64 {
                    return Err(Error::Precondition(format!("allowed tree of order {o} generated at order {k}")));
                }
            }
            bounds.merge(&allowed_bounds_survey(&trees, &br));
            let sums = sum_by_nu(&trees, |t| allowed_value(t, &ctx, &br));
            let mut nus: Vec<i64> = sums.keys().copied().collect();
            let table = match h {
                Component::Alpha => Some(&sol.beta_tilde),
                Component::Action => Some(&sol.bcap),
                _ => None,
            };
            if let Some(m) = table {
                nus.extend(m.keys().filter(|(kk, _)| *kk == k).map(|(_, nu)| *nu));
            } else if k > br.h_last() {
                nus.push(0);
            }
            nus.sort_unstable();
            nus.dedup();
            for nu in nus {
                let reference = match table {
                    Some(m) => m.get(&(k, nu)).cloned().unwrap_or_else(S::zero),
                    None => sol.beta0.get(k).cloned().unwrap_or_else(S::zero),
                };
                let (n, s) = sums.get(&nu).cloned().unwrap_or_else(|| (0, S::zero()));
                if n == 0 && reference.is_zero() {
                    continue;
                }
                out.push(TreeComparison {
                    h,
                    k,
                    j: 0,
                    nu,
                    trees: n,
                    matches: agree(&s, &reference),
                    tree_sum: s.to_number(),
                    reference: reference.to_number(),
                });
            }
        }
    }
    Ok((out, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::fixtures;
    use crate::scalar::Exact;

    fn phase() -> Exact {
        Exact::new(Rational::from((3, 5)), Rational::from((4, 5)))
    }

    #[test]
    fn order_zero_is_empty_and_caps_apply() {
        let sys = fixtures::pendulum().to_system().unwrap();
        assert!(enumerate_trees(&sys, 0, 0, Component::Action, 0).unwrap().is_empty());
        assert!(matches!(enumerate_trees(&sys, 4, 0, Component::Action, 0), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn first_order_mean_trees_count_resonant_modes() {
        // G = sin(α - t) + sin α: two G-modes on the resonance line
        let sys = fixtures::forced_pendulum().to_system().unwrap();
        let trees = enumerate_trees(&sys, 1, 0, Component::Gamma, 0).unwrap();
        let resonant = sys.g.modes.keys().filter(|&&(s, sp)| sys.res.nu(s, sp) == 0).count();
        assert_eq!(trees.len(), resonant);
        assert!(trees.iter().all(|t| t.nodes() == 1 && t.leaves() == 0));
    }

    #[test]
    fn single_node_values() {
        let sys = fixtures::mixed().to_system().unwrap();
        let z = phase();
        let ctx = TreeContext::new(&sys, &z).unwrap();
        let q = Exact::from_i64(sys.res.q);
        for t in enumerate_trees(&sys, 1, 1, Component::Action, 0).unwrap() {
            // G-coefficient × 1/(iων)
            let g = sys.g.coeff(t.sigma, t.sigma_prime, 0).mul(&z.powi(t.sigma_prime).unwrap());
            let expect = g.mul(&q.div(&Exact::i()).unwrap());
            assert_eq!(tree_value(&t, &ctx), expect);
        }
        for t in enumerate_trees(&sys, 1, 0, Component::Action, 0).unwrap() {
            // F-coefficient × (-1/ω')
            assert_eq!(t.source, Source::F);
            let f = sys.f.coeff(t.sigma, t.sigma_prime, 0).mul(&z.powi(t.sigma_prime).unwrap());
            assert_eq!(tree_value(&t, &ctx), f.neg());
        }
    }

    #[test]
    fn two_leaves_on_one_node() {
        let sys = fixtures::pendulum().to_system().unwrap();
        let trees = enumerate_trees(&sys, 1, 0, Component::Gamma, 2).unwrap();
        assert!(!trees.is_empty());
        assert!(trees.iter().all(|t| t.nodes() == 1 && t.leaves() == 2));
    }

    #[test]
    fn omega_node_factor() {
        // needs first-order action lines with ν ≠ 0 to feed the ω-node
        let mut f = fixtures::forced_pendulum();
        // ω = A² + A - 1: ω(1) = 1, ω'' ≠ 0
        f.omega = vec!["-1".into(), "1".into(), "1".into()];
        let sys = f.to_system().unwrap();
        let ctx = TreeContext::new(&sys, &Exact::one()).unwrap();
        let mut en = TreeEnumerator::new(&sys);
        let trees = en.all(Component::Action, 2, 0);
        let t = trees.iter().find(|t| t.badge == 0).expect("badge-0 tree");
        assert_eq!(t.action.len(), 2);
        assert_eq!(ctx.node_factor(t), sys.omega_coeff(2));
    }

    #[test]
    fn table_identity_on_mixed() {
        let sys = fixtures::mixed().to_system().unwrap();
        let (rows, bounds) = compare_with_table(&sys, &phase(), 2, 1).unwrap();
        assert!(!rows.is_empty());
        for r in &rows {
            assert!(r.matches, "{r:?}");
        }
        assert!(bounds.min_slack.unwrap() >= 0.0);
    }

    #[test]
    fn allowed_identity_on_mixed() {
        let sys = fixtures::mixed().to_system().unwrap();
        let z = Exact::one();
        let f = fixtures::mixed();
        let mut opts = f.options.clone();
        opts.kmax = Some(4);
        let cfg = crate::pipeline::RunConfig::new(opts);
        let (_, _, sol) = crate::pipeline::branch_solution(&sys, &cfg, "0:+:0").unwrap();
        let crate::pipeline::AnySolution::Exact(sol) = sol else { panic!("exact branch expected") };
        assert_eq!(sol.z, z);
        let (rows, _) = compare_with_solution(&sys, &sol, 3).unwrap();
        assert!(rows.iter().any(|r| r.h == Component::Beta0));
        for r in &rows {
            assert!(r.matches, "{r:?}");
        }
    }
}
