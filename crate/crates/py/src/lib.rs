//! Python bindings. Results cross the boundary as JSON and come back as
//! plain dicts and lists; exact numbers are rational strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

use melnikov_core::io::{fixtures, Options, SystemFile};
use melnikov_core::pipeline::{branch_solution, run_pipeline, AnySolution, RunConfig};
use melnikov_core::scalar::{Approx, Exact, Scalar};
use melnikov_core::series::PlanarSystem;
use melnikov_core::trees::{compare_with_solution, compare_with_table, AllowedBranch};
use melnikov_core::verify::{residual_check, shooting_compare, VerifyOptions};

fn err(e: melnikov_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, v: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A validated system with its file options.
#[pyclass(module = "melnikov")]
struct System {
    file: SystemFile,
    sys: PlanarSystem<Exact>,
}

impl System {
    fn build(file: SystemFile) -> PyResult<Self> {
        let sys = file.to_system().map_err(err)?;
        Ok(System { file, sys })
    }

    fn options(&self, kmax: Option<usize>) -> Options {
        let mut o = self.file.options.clone();
        if kmax.is_some() {
            o.kmax = kmax;
        }
        o
    }
}

#[pymethods]
impl System {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::build(SystemFile::from_json(text).map_err(err)?)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::build(SystemFile::load(path).map_err(err)?)
    }

    /// One of `pendulum`, `forced_pendulum`, `mixed`, `cascade`, `cubic`.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let f = match name {
            "pendulum" => fixtures::pendulum(),
            "forced_pendulum" => fixtures::forced_pendulum(),
            "mixed" => fixtures::mixed(),
            "cascade" => fixtures::cascade(),
            "cubic" => fixtures::cubic(),
            _ => return Err(PyValueError::new_err(format!("unknown fixture {name:?}"))),
        };
        Self::build(f)
    }

    fn to_json(&self) -> String {
        self.file.to_json()
    }

    #[getter]
    fn resonance(&self) -> (i64, i64) {
        (self.file.resonance.p, self.file.resonance.q)
    }

    /// Runs the pipeline and returns the result document.
    #[pyo3(signature = (kmax=None, sign=None, zeros_only=false, residual=false, trees=false))]
    fn run(
        &self,
        py: Python<'_>,
        kmax: Option<usize>,
        sign: Option<i32>,
        zeros_only: bool,
        residual: bool,
        trees: bool,
    ) -> PyResult<Py<PyAny>> {
        let mut cfg = RunConfig::new(self.options(kmax));
        cfg.sign = sign;
        cfg.zeros_only = zeros_only;
        cfg.residual = residual;
        cfg.tree_oracle = trees;
        let doc = run_pipeline(&self.sys, &cfg).map_err(err)?;
        to_py(py, &doc)
    }

    /// The η-series of branch `zero:sign:index`.
    #[pyo3(signature = (id, kmax=None))]
    fn branch(&self, id: &str, kmax: Option<usize>) -> PyResult<Branch> {
        let cfg = RunConfig::new(self.options(kmax));
        let (zr, _, sol) = branch_solution(&self.sys, &cfg, id).map_err(err)?;
        Ok(Branch { id: id.to_string(), t0: zr.t0_f64(), sys: self.sys.clone(), sol })
    }

    /// Tree sums of the `ε`-expansion against the recursion at phase
    /// `e^{i t0} = z_re + i z_im` (rational strings).
    #[pyo3(signature = (k, j, z_re="1", z_im="0"))]
    fn compare_trees(&self, py: Python<'_>, k: usize, j: usize, z_re: &str, z_im: &str) -> PyResult<Py<PyAny>> {
        let p = |s: &str| melnikov_core::scalar::parse_rational(s).map_err(|e| PyValueError::new_err(e.to_string()));
        let z = Exact::new(p(z_re)?, p(z_im)?);
        let (rows, bounds) = compare_with_table(&self.sys, &z, k, j).map_err(err)?;
        to_py(py, &json!({"rows": rows, "bounds": bounds}))
    }
}

/// A solved branch.
#[pyclass(module = "melnikov")]
struct Branch {
    #[pyo3(get)]
    id: String,
    #[pyo3(get)]
    t0: f64,
    sys: PlanarSystem<Exact>,
    sol: AnySolution,
}

#[pymethods]
impl Branch {
    #[getter]
    fn pp(&self) -> usize {
        self.sol.series().pp
    }

    #[getter]
    fn sigma0(&self) -> i32 {
        self.sol.series().sigma0
    }

    #[getter]
    fn exact(&self) -> bool {
        matches!(self.sol, AnySolution::Exact(_))
    }

    /// `β0` coefficients as `{"re", "im"}` dicts of strings.
    #[getter]
    fn beta0(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.sol.series().beta0)
    }

    /// The full series as a dict.
    fn series(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.sol.series())
    }

    /// Allowed-tree sums against this series.
    fn compare_trees(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let (k, (rows, bounds)) = match &self.sol {
            AnySolution::Exact(s) => {
                let k = AllowedBranch::from_solution(s).cap().min(s.kmax);
                (k, compare_with_solution(&self.sys, s, k).map_err(err)?)
            }
            AnySolution::Approx(s) => {
                let k = AllowedBranch::from_solution(s).cap().min(s.kmax);
                (k, compare_with_solution(&self.sys.to_scalar::<Approx>(), s, k).map_err(err)?)
            }
        };
        to_py(py, &json!({"order": k, "rows": rows, "bounds": bounds}))
    }

    /// Residual ladder and shooting comparison.
    #[pyo3(signature = (eps=vec![1e-2, 1e-3, 1e-4], etas=vec![0.125, 0.0625, 0.03125, 0.015625], bits=128, steps=4096))]
    fn verify(&self, py: Python<'_>, eps: Vec<f64>, etas: Vec<f64>, bits: u32, steps: usize) -> PyResult<Py<PyAny>> {
        let sol = self.sol.to_approx();
        let sys = self.sys.to_scalar::<Approx>();
        let opts = VerifyOptions { bits, steps, ..VerifyOptions::default() };
        let eps: Vec<f64> = eps.iter().map(|e| e.abs() * sol.sigma0 as f64).collect();
        let residual = residual_check(&sys, &sol, &etas, &opts);
        let shooting = shooting_compare(&sys, &sol, &eps, &opts);
        to_py(py, &json!({"residual": residual, "shooting": shooting}))
    }

    fn __repr__(&self) -> String {
        format!("Branch(id={:?}, pp={}, exact={})", self.id, self.pp(), self.exact())
    }
}

#[pymodule]
pub fn melnikov(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<System>()?;
    m.add_class::<Branch>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
