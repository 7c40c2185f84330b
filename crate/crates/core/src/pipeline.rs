//! End-to-end analysis of one system: Melnikov function (or the first
//! non-vanishing higher one), its zeros, the bifurcation table at each zero,
//! the Puiseux branches for both signs of `ε`, and the `η`-series of every
//! branch that reaches a simple root.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{f0_table, fit_growth, general_order, BivariateSeries, GrowthFit};
use crate::error::{Error, Result};
use crate::eta::{composition_defect, full_solution, tail_from_last_series, EtaSeries, EtaSolution};
use crate::io::{Options, ScalarMode};
use crate::melnikov::{find_zeros_with_order, higher_melnikov, melnikov_function, HigherMelnikov, MelnikovFn, ZeroRecord, Zeros};
use crate::puiseux::{assemble_exponents, expand_branches, AnySeries, BranchStatus, BranchStep, PuiseuxBranch};
use crate::scalar::{float_to_string, ident_tol, set_precision, Approx, Exact, Number, Real, Scalar};
use crate::series::PlanarSystem;
use crate::verify::{residual_check, VerifyOptions};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelnikovReport {
    pub kappa: usize,
    /// `[a_0, a_1, …]` with `M = a_0 + Σ a_m cos m t0 + b_m sin m t0`.
    pub cos: Vec<String>,
    pub sin: Vec<String>,
    pub identically_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `1/C2` from the growth fit of `max_ν |β̃^{[k]}_ν|`.
    pub empirical_radius: Option<f64>,
    pub growth: Option<GrowthFit>,
    pub residual_slope: Option<f64>,
    /// Largest residual over the `η` ladder; below [`EXACT_RESIDUAL`] the
    /// series solves the equations to round-off and no slope is fitted.
    pub residual_max: Option<f64>,
    /// Largest gap between the recursion and the composed double series.
    pub composition_defect: f64,
    pub periodicity_max: f64,
    pub real: bool,
    #[serde(default)]
    pub oracle_checks: Vec<OracleCheck>,
}

/// Residuals below this are round-off of an exact solution.
pub const EXACT_RESIDUAL: f64 = 1e-45;

/// An independent recomputation of part of a branch solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    /// Largest discrepancy, 0 in exact agreement.
    pub defect: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub id: String,
    pub sigma0: i32,
    pub status: BranchStatus,
    pub steps: Vec<BranchStep>,
    pub pp: Option<i64>,
    pub h_list: Vec<i64>,
    pub s_list: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaSeries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub index: usize,
    pub t0: String,
    pub z: Number,
    pub n: usize,
    #[serde(rename = "D")]
    pub d: Number,
    pub branches: Vec<BranchReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub melnikov: MelnikovReport,
    pub zeros: Vec<ZeroReport>,
    pub errors: Vec<String>,
}

impl ResultDocument {
    pub fn branches(&self) -> impl Iterator<Item = &BranchReport> {
        self.zeros.iter().flat_map(|z| z.branches.iter())
    }

    /// 0 with a simple-root branch, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.branches().any(|b| b.status == BranchStatus::SimpleRootFound) {
            0
        } else {
            3
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Which parts of the pipeline to run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub options: Options,
    /// Restrict to one sign of `ε`.
    pub sign: Option<i32>,
    /// Stop after the zeros.
    pub zeros_only: bool,
    /// Compute the residual slope of each series.
    pub residual: bool,
    /// Compare each exact series with the allowed-tree sums.
    pub tree_oracle: bool,
}

impl RunConfig {
    pub fn new(options: Options) -> Self {
        RunConfig { options, sign: None, zeros_only: false, residual: true, tree_oracle: false }
    }
}

fn report_melnikov<S: Scalar>(m: &MelnikovFn<S>) -> MelnikovReport {
    let (a, b) = m.harmonics();
    let show = |x: &S::Real| match x.as_rational() {
        Some(q) => q.to_string(),
        None => float_to_string(&x.to_float()),
    };
    MelnikovReport {
        kappa: m.order_kappa,
        cos: a.iter().map(show).collect(),
        sin: b.iter().map(show).collect(),
        identically_zero: m.is_identically_zero(),
    }
}

/// The Melnikov function to use: `M` itself or the first `M_κ ≢ 0`.
pub fn active_melnikov<S: Scalar>(sys: &PlanarSystem<S>, kappa_max: usize) -> Result<MelnikovFn<S>> {
    let m = melnikov_function(sys);
    if !m.is_identically_zero() {
        return Ok(m);
    }
    match higher_melnikov(sys, kappa_max)? {
        HigherMelnikov::Found { m, .. } => Ok(m),
        HigherMelnikov::AllZeroUpTo(k) => Ok(MelnikovFn { order_kappa: k, series: crate::trig::TrigPoly::zero() }),
    }
}

/// A solution in whichever scalar type the branch allowed.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySolution {
    Exact(EtaSolution<Exact>),
    Approx(EtaSolution<Approx>),
}

impl AnySolution {
    pub fn to_approx(&self) -> EtaSolution<Approx> {
        match self {
            AnySolution::Exact(s) => s.map(|x| x.to_approx()),
            AnySolution::Approx(s) => s.clone(),
        }
    }

    pub fn series(&self) -> EtaSeries {
        match self {
            AnySolution::Exact(s) => s.into(),
            AnySolution::Approx(s) => s.into(),
        }
    }
}

/// `η`-series for one branch at phase `z`, exact when both allow it.
pub fn solve_branch(
    sys: &PlanarSystem<Exact>,
    z: &Number,
    kappa: usize,
    branch: &PuiseuxBranch,
    kmax: usize,
    mode: ScalarMode,
) -> Result<AnySolution> {
    let exact = mode != ScalarMode::Numeric && branch.is_exact() && z.is_exact();
    if exact {
        let z = Exact::from_number(z)?;
        full_solution(sys, &z, kappa, branch, kmax).map(AnySolution::Exact)
    } else {
        let sa: PlanarSystem<Approx> = sys.to_scalar();
        full_solution(&sa, &z.to_approx(), kappa, branch, kmax).map(AnySolution::Approx)
    }
}

/// `β0` tail recomputed from the last substituted series against the
/// solution. Without steps the series is the table itself in `ε = σ η`.
fn tail_check<S: Scalar>(br: &PuiseuxBranch, sol: &EtaSolution<S>) -> Option<OracleCheck> {
    let ys: Vec<Number> = match br.tail_series.as_ref()? {
        AnySeries::Exact(f) => tail_from_last_series(f, sol.kmax).ok()?.iter().map(|x| x.to_number()).collect(),
        AnySeries::Approx(f) => tail_from_last_series(f, sol.kmax).ok()?.iter().map(|x| x.to_number()).collect(),
    };
    let h = sol.h_last();
    let flip = br.steps.is_empty() && sol.sigma0 < 0;
    let mut defect = 0f64;
    let mut scale = 1f64;
    let mut compared = 0;
    for (i, y) in ys.iter().enumerate() {
        let k = h + i + 1;
        if k > sol.kmax {
            break;
        }
        let mut y = y.to_approx();
        if flip && (i + 1) % 2 == 1 {
            y = y.neg();
        }
        let b = sol.beta0[k].to_number().to_approx();
        defect = defect.max(b.sub(&y).abs_f64());
        scale = scale.max(b.abs_f64());
        compared += 1;
    }
    Some(OracleCheck {
        name: "tail_from_last_series".into(),
        passed: defect <= ident_tol() * scale,
        defect,
        detail: format!("{compared} tail coefficients"),
    })
}

/// Allowed-tree sums against the solution up to `min(Kmax, 𝔭 + 𝔰 + 2)`.
#[cfg(feature = "oracle")]
fn tree_check<S: Scalar>(sys: &PlanarSystem<S>, sol: &EtaSolution<S>) -> OracleCheck {
    use crate::trees::{compare_with_solution, AllowedBranch};
    let k = AllowedBranch::from_solution(sol).cap().min(sol.kmax);
    match compare_with_solution(sys, sol, k) {
        Ok((rows, bounds)) => {
            let defect = rows
                .iter()
                .map(|r| r.tree_sum.to_approx().sub(&r.reference.to_approx()).abs_f64())
                .fold(0.0, f64::max);
            OracleCheck {
                name: "allowed_trees".into(),
                passed: rows.iter().all(|r| r.matches),
                defect,
                detail: format!(
                    "{} coefficients from {} trees to order {k}, {} over the line bound",
                    rows.len(),
                    bounds.trees,
                    bounds.violations
                ),
            }
        }
        Err(e) => OracleCheck { name: "allowed_trees".into(), passed: false, defect: f64::NAN, detail: e.to_string() },
    }
}

/// Log-linear fit of `max_ν |β̃^{[k]}_ν|` over `k = 1..Kmax`.
pub fn growth_fit<S: Scalar>(sol: &EtaSolution<S>) -> Option<GrowthFit> {
    let mut samples = Vec::new();
    for k in 1..=sol.kmax {
        let m = sol
            .beta_tilde
            .iter()
            .filter(|((kk, _), _)| *kk == k)
            .map(|(_, v)| v.ln_abs())
            .fold(f64::NEG_INFINITY, f64::max);
        if m.is_finite() {
            samples.push((k as f64, 0.0, m));
        }
    }
    fit_growth(&samples)
}

fn diagnostics<S: Scalar>(
    sys: &PlanarSystem<S>,
    sol: &EtaSolution<S>,
    br: &PuiseuxBranch,
    residual: bool,
    trees: bool,
) -> Diagnostics {
    let growth = growth_fit(sol);
    let (residual_slope, residual_max) = if residual && sol.kmax >= sol.pp {
        let approx = sol.map(|x| x.to_approx());
        let etas: Vec<f64> = (3..=9).map(|i| 0.5f64.powi(i)).collect();
        let opts = VerifyOptions { bits: 192, ..VerifyOptions::default() };
        let r = residual_check(sys, &approx, &etas, &opts);
        let max = r.points.iter().map(|p| p.1).fold(0.0, f64::max);
        let slope = (max > EXACT_RESIDUAL && r.slope.is_finite()).then_some(r.slope);
        (slope, Some(max))
    } else {
        (None, None)
    };
    Diagnostics {
        empirical_radius: growth.as_ref().map(|g| 1.0 / g.c2),
        growth,
        residual_slope,
        residual_max,
        composition_defect: composition_defect(sys, sol),
        periodicity_max: sol.periodicity.iter().map(|p| p.1).fold(0.0, f64::max),
        real: sol.is_real(),
        oracle_checks: {
            let defect = composition_defect(sys, sol);
            let mut v = vec![OracleCheck {
                name: "composition".into(),
                passed: if S::EXACT { defect == 0.0 } else { defect <= ident_tol() },
                defect,
                detail: String::new(),
            }];
            v.extend(tail_check(br, sol));
            #[cfg(feature = "oracle")]
            if trees {
                v.push(tree_check(sys, sol));
            }
            #[cfg(not(feature = "oracle"))]
            let _ = trees;
            v
        },
    }
}

fn any_diagnostics(sys: &PlanarSystem<Exact>, sol: &AnySolution, br: &PuiseuxBranch, cfg: &RunConfig) -> Diagnostics {
    match sol {
        AnySolution::Exact(s) => diagnostics(sys, s, br, cfg.residual, cfg.tree_oracle),
        AnySolution::Approx(s) => diagnostics(&sys.to_scalar::<Approx>(), s, br, cfg.residual, cfg.tree_oracle),
    }
}

fn sign_char(s: i32) -> char {
    if s > 0 {
        '+'
    } else {
        '-'
    }
}

/// Bifurcation table at a zero in the scalar type of the phase.
pub fn zero_table(sys: &PlanarSystem<Exact>, z: &Number, kappa: usize, kmax: usize, jmax: usize, mode: ScalarMode) -> Result<ZeroTable> {
    Ok(if mode != ScalarMode::Numeric && z.is_exact() {
        ZeroTable::Exact(f0_table(sys, &Exact::from_number(z)?, kappa, kmax, jmax))
    } else {
        ZeroTable::Approx(f0_table(&sys.to_scalar::<Approx>(), &z.to_approx(), kappa, kmax, jmax))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZeroTable {
    Exact(BivariateSeries<Exact>),
    Approx(BivariateSeries<Approx>),
}

impl ZeroTable {
    pub fn general_order(&self) -> Result<usize> {
        match self {
            ZeroTable::Exact(f) => general_order(f),
            ZeroTable::Approx(f) => general_order(f),
        }
    }

    pub fn branches(&self, sigma0: i32, max_depth: usize) -> Result<Vec<PuiseuxBranch>> {
        match self {
            ZeroTable::Exact(f) => expand_branches(f, sigma0, max_depth),
            ZeroTable::Approx(f) => expand_branches(f, sigma0, max_depth),
        }
    }
}

fn analyze_zero(sys: &PlanarSystem<Exact>, cfg: &RunConfig, kappa: usize, index: usize, zr: &ZeroRecord) -> ZeroReport {
    let opts = &cfg.options;
    let mut report = ZeroReport {
        index,
        t0: float_to_string(&zr.t0),
        z: zr.z.clone(),
        n: zr.n,
        d: zr.d.clone(),
        branches: Vec::new(),
        error: None,
    };
    if cfg.zeros_only {
        return report;
    }
    let kmax = opts.kmax();
    let table = match zero_table(sys, &zr.z, kappa, kmax, opts.jmax(zr.n), opts.scalar_mode) {
        Ok(t) => t,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    match table.general_order() {
        Ok(n) if n == zr.n => {}
        Ok(n) => {
            report.error = Some(format!("bifurcation table is general of order {n}, the zero has order {}", zr.n));
            return report;
        }
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    }
    let signs: Vec<i32> = match cfg.sign {
        Some(s) => vec![s],
        None => vec![1, -1],
    };
    for sigma0 in signs {
        let branches = match table.branches(sigma0, opts.max_depth(zr.n)) {
            Ok(b) => b,
            Err(e) => {
                report.error = Some(format!("ε sign {}: {e}", sign_char(sigma0)));
                continue;
            }
        };
        let solved: Vec<BranchReport> = branches
            .par_iter()
            .enumerate()
            .map(|(bi, br)| {
                let mut rep = BranchReport {
                    id: format!("{index}:{}:{bi}", sign_char(sigma0)),
                    sigma0,
                    status: br.status,
                    steps: br.steps.clone(),
                    pp: None,
                    h_list: Vec::new(),
                    s_list: Vec::new(),
                    eta: None,
                    diagnostics: None,
                    error: None,
                };
                if let Ok(ex) = assemble_exponents(br) {
                    rep.pp = Some(ex.pp);
                    rep.h_list = ex.h_list;
                    rep.s_list = ex.s_list;
                }
                if br.status == BranchStatus::SimpleRootFound {
                    match solve_branch(sys, &zr.z, kappa, br, kmax, opts.scalar_mode) {
                        Ok(sol) => {
                            rep.diagnostics = Some(any_diagnostics(sys, &sol, br, cfg));
                            rep.eta = Some(sol.series());
                        }
                        Err(e) => rep.error = Some(e.to_string()),
                    }
                }
                rep
            })
            .collect();
        report.branches.extend(solved);
    }
    report
}

/// Runs the analysis on an exact system. Stage errors are collected in the
/// document; only an unusable Melnikov stage aborts.
pub fn run_pipeline(sys: &PlanarSystem<Exact>, cfg: &RunConfig) -> Result<ResultDocument> {
    set_precision(cfg.options.precision_bits());
    let mut errors = Vec::new();
    let m = if cfg.options.scalar_mode == ScalarMode::Numeric {
        let ma = active_melnikov(&sys.to_scalar::<Approx>(), cfg.options.kappa_max())?;
        // zeros are located on the exact function when it is available
        let me = active_melnikov(sys, cfg.options.kappa_max())?;
        if me.order_kappa != ma.order_kappa {
            errors.push("exact and numeric Melnikov orders differ".into());
        }
        me
    } else {
        active_melnikov(sys, cfg.options.kappa_max())?
    };
    let melnikov = report_melnikov(&m);
    let zeros = match find_zeros_with_order(&m)? {
        Zeros::IdenticallyZero => {
            errors.push(format!("Melnikov functions vanish identically up to order {}", m.order_kappa));
            Vec::new()
        }
        Zeros::Found(z) => z,
    };
    let kappa = m.order_kappa;
    let zeros: Vec<ZeroReport> = zeros.par_iter().enumerate().map(|(i, z)| analyze_zero(sys, cfg, kappa, i, z)).collect();
    for z in &zeros {
        if let Some(e) = &z.error {
            errors.push(format!("zero {}: {e}", z.index));
        }
        for b in &z.branches {
            if let Some(e) = &b.error {
                errors.push(format!("branch {}: {e}", b.id));
            }
        }
    }
    Ok(ResultDocument { format: FORMAT_VERSION, name: None, melnikov, zeros, errors })
}

/// Looks up a branch id `zero:sign:index` and recomputes its series.
pub fn branch_solution(sys: &PlanarSystem<Exact>, cfg: &RunConfig, id: &str) -> Result<(ZeroRecord, PuiseuxBranch, AnySolution)> {
    set_precision(cfg.options.precision_bits());
    let parts: Vec<&str> = id.split(':').collect();
    let bad = || Error::Parse(format!("branch id {id:?} is not zero:sign:index"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let zi: usize = parts[0].parse().map_err(|_| bad())?;
    let sigma0 = match parts[1] {
        "+" => 1,
        "-" => -1,
        _ => return Err(bad()),
    };
    let bi: usize = parts[2].parse().map_err(|_| bad())?;
    let m = active_melnikov(sys, cfg.options.kappa_max())?;
    let Zeros::Found(zeros) = find_zeros_with_order(&m)? else {
        return Err(Error::Precondition("the Melnikov function has no isolated zeros".into()));
    };
    let zr = zeros.get(zi).cloned().ok_or_else(|| Error::Precondition(format!("no zero with index {zi}")))?;
    let opts = &cfg.options;
    let table = zero_table(sys, &zr.z, m.order_kappa, opts.kmax(), opts.jmax(zr.n), opts.scalar_mode)?;
    let branches = table.branches(sigma0, opts.max_depth(zr.n))?;
    let br = branches.get(bi).cloned().ok_or_else(|| Error::Precondition(format!("no branch {id}")))?;
    let sol = solve_branch(sys, &zr.z, m.order_kappa, &br, opts.kmax(), opts.scalar_mode)?;
    Ok((zr, br, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::fixtures;

    fn run(f: crate::io::SystemFile, kmax: usize) -> ResultDocument {
        let sys = f.to_system().unwrap();
        let mut opts = f.options.clone();
        opts.kmax = Some(kmax);
        let mut cfg = RunConfig::new(opts);
        cfg.residual = false;
        run_pipeline(&sys, &cfg).unwrap()
    }

    #[test]
    fn pendulum_has_two_simple_zeros() {
        let doc = run(fixtures::pendulum(), 4);
        assert_eq!(doc.zeros.len(), 2);
        for z in &doc.zeros {
            assert_eq!(z.n, 1);
            assert!(z.branches.iter().all(|b| b.status == BranchStatus::SimpleRootFound && b.pp == Some(1)));
        }
        assert_eq!(doc.exit_code(), 0);
        assert!(doc.errors.is_empty(), "{:?}", doc.errors);
        let back = ResultDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
    }
}
