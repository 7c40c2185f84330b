//! Command-line front end.
//!
//! Exit codes: 0 on success (for `expand`, at least one branch reached a
//! simple root), 3 when every branch ended without one, 2 when the input
//! system is invalid, 1 for any other failure, including a failed oracle.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use melnikov_core::io::{parse_system, Options, ScalarMode};
use melnikov_core::melnikov::{find_zeros_with_order, Zeros};
use melnikov_core::pipeline::{active_melnikov, branch_solution, run_pipeline, zero_table, AnySolution, RunConfig};
use melnikov_core::scalar::{set_precision, Approx, Exact, Scalar};
use melnikov_core::series::PlanarSystem;
use melnikov_core::trees::{compare_with_solution, compare_with_table, AllowedBranch, BoundsReport, TreeComparison};
use melnikov_core::verify::{residual_check, shooting_compare, VerifyOptions};
use melnikov_core::{Error, Result};

#[derive(Parser)]
#[command(name = "melnikov", version, about = "Subharmonic bifurcation series at Melnikov zeros")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Working precision in bits (overrides the file).
    #[arg(long, global = true, env = "MELNIKOV_PRECISION_BITS")]
    precision_bits: Option<u32>,
    #[arg(long, global = true, value_enum)]
    scalar_mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Exact,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sign {
    #[value(name = "+")]
    Plus,
    #[value(name = "-")]
    Minus,
}

#[derive(Subcommand)]
enum Cmd {
    /// Melnikov function and its zeros.
    Analyze { file: PathBuf },
    /// Full pipeline: branches and η-series at every zero.
    Expand {
        file: PathBuf,
        /// Truncation order `Kmax` of the η-series.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, value_enum, allow_hyphen_values = true)]
        sign: Option<Sign>,
        /// Also check every exact series against allowed-tree sums.
        #[arg(long)]
        trees: bool,
        /// Skip the residual fit.
        #[arg(long)]
        no_residual: bool,
    },
    /// Residual scaling and shooting comparison for one branch.
    Verify {
        file: PathBuf,
        /// Branch id `zero:sign:index`, e.g. `0:+:0`.
        #[arg(long)]
        branch: String,
        #[arg(long)]
        order: Option<usize>,
        /// Values of ε for the shooting comparison.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1e-2, 1e-3, 1e-4])]
        eps: Vec<f64>,
        /// Exponents `m` of the residual ladder `η = 2^-m`.
        #[arg(long, value_delimiter = ',', default_values_t = [3u32, 4, 5, 6, 7, 8, 9])]
        ladder: Vec<u32>,
        /// Mantissa bits of the integrator.
        #[arg(long, default_value_t = VerifyOptions::default().bits)]
        bits: u32,
        /// Integrator steps per period.
        #[arg(long, default_value_t = VerifyOptions::default().steps)]
        steps: usize,
    },
    /// Tree-expansion oracle: tree sums against the recursions.
    Trees {
        file: PathBuf,
        /// Largest order of the `ε`-expansion trees.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Largest number of leaves.
        #[arg(long, default_value_t = 2)]
        j: usize,
        #[arg(long)]
        order: Option<usize>,
    },
}

fn options(cli: &Cli, file: &Options, order: Option<usize>) -> Options {
    let mut o = file.clone();
    if let Some(b) = cli.precision_bits {
        o.precision_bits = Some(b);
    }
    if let Some(m) = cli.scalar_mode {
        o.scalar_mode = match m {
            Mode::Auto => ScalarMode::Auto,
            Mode::Exact => ScalarMode::Exact,
            Mode::Numeric => ScalarMode::Numeric,
        };
    }
    if order.is_some() {
        o.kmax = order;
    }
    o
}

fn emit(cli: &Cli, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    match &cli.out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct TreeSummary {
    rows: Vec<TreeComparison>,
    bounds: BoundsReport,
    mismatches: usize,
}

impl TreeSummary {
    fn new((rows, bounds): (Vec<TreeComparison>, BoundsReport)) -> Self {
        let mismatches = rows.iter().filter(|r| !r.matches).count();
        TreeSummary { rows, bounds, mismatches }
    }
    fn ok(&self) -> bool {
        self.mismatches == 0 && self.bounds.violations == 0
    }
}

fn table_trees(sys: &PlanarSystem<Exact>, z: &melnikov_core::scalar::Number, k: usize, j: usize) -> Result<TreeSummary> {
    Ok(TreeSummary::new(match z {
        melnikov_core::scalar::Number::Exact(z) => compare_with_table(sys, z, k, j)?,
        melnikov_core::scalar::Number::Approx(z) => compare_with_table(&sys.to_scalar::<Approx>(), z, k, j)?,
    }))
}

fn allowed_trees(sys: &PlanarSystem<Exact>, sol: &AnySolution) -> Result<(usize, TreeSummary)> {
    match sol {
        AnySolution::Exact(s) => {
            let k = AllowedBranch::from_solution(s).cap().min(s.kmax);
            Ok((k, TreeSummary::new(compare_with_solution(sys, s, k)?)))
        }
        AnySolution::Approx(s) => {
            let k = AllowedBranch::from_solution(s).cap().min(s.kmax);
            Ok((k, TreeSummary::new(compare_with_solution(&sys.to_scalar::<Approx>(), s, k)?)))
        }
    }
}

fn trees(cli: &Cli, file: &PathBuf, k: usize, j: usize, order: Option<usize>) -> Result<u8> {
    let (sys, fopts) = parse_system(file)?;
    let opts = options(cli, &fopts, order);
    set_precision(opts.precision_bits());
    let m = active_melnikov(&sys, opts.kappa_max())?;
    let zeros = match find_zeros_with_order(&m)? {
        Zeros::Found(z) => z,
        Zeros::IdenticallyZero => Vec::new(),
    };
    let mut ok = true;
    let mut out = Vec::new();
    // the table identity holds at any phase; without zeros use t0 = 0
    if zeros.is_empty() {
        let s = table_trees(&sys, &Exact::one().to_number(), k, j)?;
        ok &= s.ok();
        out.push(json!({"t0": 0.0, "table": s}));
    }
    for (zi, zr) in zeros.iter().enumerate() {
        let s = table_trees(&sys, &zr.z, k, j)?;
        ok &= s.ok();
        let table = zero_table(&sys, &zr.z, m.order_kappa, opts.kmax(), opts.jmax(zr.n), opts.scalar_mode)?;
        let mut branches = Vec::new();
        for (sign, sigma0) in [("+", 1), ("-", -1)] {
            for bi in 0..table.branches(sigma0, opts.max_depth(zr.n))?.len() {
                let id = format!("{zi}:{sign}:{bi}");
                let cfg = RunConfig::new(opts.clone());
                match branch_solution(&sys, &cfg, &id) {
                    Ok((_, _, sol)) => {
                        let (kk, a) = allowed_trees(&sys, &sol)?;
                        ok &= a.ok();
                        branches.push(json!({"id": id, "order": kk, "allowed": a}));
                    }
                    Err(e) => branches.push(json!({"id": id, "skipped": e.to_string()})),
                }
            }
        }
        out.push(json!({"zero": zi, "t0": zr.t0_f64(), "table": s, "branches": branches}));
    }
    emit(cli, &json!({"k": k, "j": j, "zeros": out, "passed": ok}))?;
    Ok(if ok { 0 } else { 1 })
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Analyze { file } => {
            let (sys, fopts) = parse_system(file)?;
            let mut cfg = RunConfig::new(options(cli, &fopts, None));
            cfg.zeros_only = true;
            let doc = run_pipeline(&sys, &cfg)?;
            emit(cli, &doc)?;
            Ok(0)
        }
        Cmd::Expand { file, order, sign, trees, no_residual } => {
            let (sys, fopts) = parse_system(file)?;
            let mut cfg = RunConfig::new(options(cli, &fopts, *order));
            cfg.sign = sign.map(|s| match s {
                Sign::Plus => 1,
                Sign::Minus => -1,
            });
            cfg.tree_oracle = *trees;
            cfg.residual = !no_residual;
            let mut doc = run_pipeline(&sys, &cfg)?;
            doc.name = file.file_stem().map(|s| s.to_string_lossy().into_owned());
            emit(cli, &doc)?;
            Ok(doc.exit_code() as u8)
        }
        Cmd::Verify { file, branch, order, eps, ladder, bits, steps } => {
            let (sys, fopts) = parse_system(file)?;
            let cfg = RunConfig::new(options(cli, &fopts, *order));
            let (zr, br, sol) = branch_solution(&sys, &cfg, branch)?;
            let approx = sol.to_approx();
            let vo = VerifyOptions { bits: *bits, steps: *steps, ..VerifyOptions::default() };
            let etas: Vec<f64> = ladder.iter().map(|&m| 0.5f64.powi(m as i32)).collect();
            let sa = sys.to_scalar::<Approx>();
            let residual = residual_check(&sa, &approx, &etas, &vo);
            let eps: Vec<f64> = eps.iter().map(|e| e.abs() * approx.sigma0 as f64).collect();
            let shooting = shooting_compare(&sa, &approx, &eps, &vo);
            emit(
                cli,
                &json!({
                    "branch": branch,
                    "t0": zr.t0_f64(),
                    "pp": approx.pp,
                    "steps": br.steps,
                    "Kmax": approx.kmax,
                    "residual": residual,
                    "shooting": shooting,
                }),
            )?;
            Ok(0)
        }
        Cmd::Trees { file, k, j, order } => trees(cli, file, *k, *j, *order),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("melnikov: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
