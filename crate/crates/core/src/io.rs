//! JSON system files.
//!
//! ```json
//! {
//!   "omega": ["0", "1"],
//!   "A0": "1",
//!   "F": [],
//!   "G": [{"basis": "sin", "sigma": 1, "sigma_prime": -1, "apoly": ["1"]}],
//!   "resonance": {"p": 1, "q": 1},
//!   "options": {"Kmax": 6}
//! }
//! ```
//!
//! A term `{basis, sigma, sigma_prime, apoly}` stands for
//! `apoly(A) · basis(σα + σ't)` with `apoly` listed in ascending powers of `A`.

use std::path::Path;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Exact, Scalar};
use crate::series::{taylor_shift, validate_system, PlanarSystem, Resonance, TrigTaylor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub basis: Basis,
    pub sigma: i64,
    pub sigma_prime: i64,
    pub apoly: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonanceSpec {
    pub p: i64,
    pub q: i64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarMode {
    /// Exact where the data allow it, numeric otherwise.
    #[default]
    Auto,
    Exact,
    Numeric,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default)]
    pub scalar_mode: ScalarMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
    #[serde(rename = "Kmax", default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(rename = "Jmax", default, skip_serializing_if = "Option::is_none")]
    pub jmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
}

impl Options {
    pub const DEFAULT_KMAX: usize = 8;
    pub const DEFAULT_KAPPA_MAX: usize = 4;
    pub const DEFAULT_PRECISION: u32 = 256;

    pub fn kmax(&self) -> usize {
        self.kmax.unwrap_or(Self::DEFAULT_KMAX)
    }
    pub fn kappa_max(&self) -> usize {
        self.kappa_max.unwrap_or(Self::DEFAULT_KAPPA_MAX)
    }
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits.unwrap_or(Self::DEFAULT_PRECISION)
    }
    /// Defaults to `𝔫 + 4`.
    pub fn jmax(&self, n: usize) -> usize {
        self.jmax.unwrap_or(n + 4)
    }
    /// Defaults to `𝔫 + 2`.
    pub fn max_depth(&self, n: usize) -> usize {
        self.max_depth.unwrap_or(n + 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub omega: Vec<String>,
    #[serde(rename = "A0")]
    pub a0: String,
    #[serde(rename = "F", default)]
    pub f: Vec<Term>,
    #[serde(rename = "G", default)]
    pub g: Vec<Term>,
    pub resonance: ResonanceSpec,
    #[serde(default)]
    pub options: Options,
}

fn parse_all(xs: &[String], what: &str) -> Result<Vec<Rational>> {
    xs.iter()
        .enumerate()
        .map(|(i, s)| parse_rational(s).map_err(|e| Error::Parse(format!("{what}[{i}]: {e}"))))
        .collect()
}

fn build_trig(terms: &[Term], a0: &Rational, what: &str) -> Result<TrigTaylor<Exact>> {
    let deg = terms.iter().map(|t| t.apoly.len().saturating_sub(1)).max().unwrap_or(0);
    let mut out = TrigTaylor::zero(deg);
    let half = Rational::from((1, 2));
    for (i, t) in terms.iter().enumerate() {
        let coeffs = parse_all(&t.apoly, &format!("{what}[{i}].apoly"))?;
        let shifted = taylor_shift(&coeffs, a0);
        // sin x = -(i/2) e^{ix} + (i/2) e^{-ix},  cos x = (e^{ix} + e^{-ix})/2
        let (plus, minus) = match t.basis {
            Basis::Sin => (Exact::new(Rational::new(), -half.clone()), Exact::new(Rational::new(), half.clone())),
            Basis::Cos => (Exact::rational(half.clone()), Exact::rational(half.clone())),
        };
        let poly = |c: &Exact| shifted.iter().map(|a| Exact::rational(a.clone()).mul(c)).collect::<Vec<_>>();
        out.add_mode(t.sigma, t.sigma_prime, &poly(&plus));
        out.add_mode(-t.sigma, -t.sigma_prime, &poly(&minus));
    }
    Ok(out)
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        if let Some(v) = f.format {
            if v != 1 {
                return Err(Error::Parse(format!("unsupported format version {v}")));
            }
        }
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    /// Exact system expanded about `A0`, validated.
    pub fn to_system(&self) -> Result<PlanarSystem<Exact>> {
        let a0 = parse_rational(&self.a0).map_err(|e| Error::Parse(format!("A0: {e}")))?;
        let omega = taylor_shift(&parse_all(&self.omega, "omega")?, &a0);
        let res = Resonance::new(self.resonance.p, self.resonance.q)?;
        let sys = PlanarSystem {
            omega: omega.into_iter().map(Exact::rational).collect(),
            f: build_trig(&self.f, &a0, "F")?,
            g: build_trig(&self.g, &a0, "G")?,
            a0,
            res,
        };
        validate_system(&sys)?;
        Ok(sys)
    }
}

/// Parses and validates a system file.
pub fn parse_system(path: impl AsRef<Path>) -> Result<(PlanarSystem<Exact>, Options)> {
    let f = SystemFile::load(path)?;
    let sys = f.to_system()?;
    Ok((sys, f.options))
}

/// Builders for the standard test systems, all with `ω = A`, `A0 = 1`,
/// `p = q = 1` unless noted.
pub mod fixtures {
    use super::*;

    fn term(basis: Basis, sigma: i64, sigma_prime: i64, apoly: &[&str]) -> Term {
        Term { basis, sigma, sigma_prime, apoly: apoly.iter().map(|s| s.to_string()).collect() }
    }

    fn unit(f: Vec<Term>, g: Vec<Term>, name: &str) -> SystemFile {
        SystemFile {
            format: Some(1),
            name: Some(name.into()),
            omega: vec!["0".into(), "1".into()],
            a0: "1".into(),
            f,
            g,
            resonance: ResonanceSpec { p: 1, q: 1 },
            options: Options::default(),
        }
    }

    /// `G = sin(α - t)`: simple zeros at `t0 = 0, π`.
    pub fn pendulum() -> SystemFile {
        unit(vec![], vec![term(Basis::Sin, 1, -1, &["1"])], "pendulum")
    }

    /// `G = sin^3(α - t) = (3 sin(α - t) - sin(3α - 3t))/4`: triple zeros.
    pub fn cubic() -> SystemFile {
        unit(vec![], vec![term(Basis::Sin, 1, -1, &["3/4"]), term(Basis::Sin, 3, -3, &["-1/4"])], "sine-cubed")
    }

    /// `G = sin(α - t) + (A - 1) cos(α - t) + cos(2α - t)/2`, `F = cos α`:
    /// simple zeros at `t0 = 0, π` with `A`-dependence in `G`.
    pub fn mixed() -> SystemFile {
        unit(
            vec![term(Basis::Cos, 1, 0, &["1"])],
            vec![term(Basis::Sin, 1, -1, &["1"]), term(Basis::Cos, 1, -1, &["-1", "1"]), term(Basis::Cos, 2, -1, &["1/2"])],
            "mixed",
        )
    }

    /// `G = sin(α - t) + sin α`: the resonant part of the pendulum plus a
    /// non-resonant harmonic, so the subharmonic orbits are not trivial.
    pub fn forced_pendulum() -> SystemFile {
        unit(vec![], vec![term(Basis::Sin, 1, -1, &["1"]), term(Basis::Sin, 1, 0, &["1"])], "forced-pendulum")
    }

    /// `G = sin α + sin(2α - t)`: no mode is resonant, so `M ≡ 0`, while the
    /// two modes beat at second order and `M_1` depends on `t0`.
    pub fn cascade() -> SystemFile {
        unit(vec![], vec![term(Basis::Sin, 1, 0, &["1"]), term(Basis::Sin, 2, -1, &["1"])], "cascade")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_round_trip() {
        let f = fixtures::pendulum();
        let back = SystemFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let sys = back.to_system().unwrap();
        let half_i = Exact::new(Rational::new(), Rational::from((1, 2)));
        assert_eq!(sys.g.coeff(1, -1, 0), half_i.neg());
        assert_eq!(sys.g.coeff(-1, 1, 0), half_i);
        assert_eq!(sys.omega_prime(), Exact::one());
    }

    #[test]
    fn degenerate_frequency_is_rejected() {
        let mut f = fixtures::pendulum();
        f.omega = vec!["1".into(), "-2".into(), "1".into()];
        f.resonance = ResonanceSpec { p: 0, q: 1 };
        assert_eq!(f.to_system(), Err(Error::DegenerateFrequency));
    }

    #[test]
    fn bad_rational_and_schema() {
        let mut f = fixtures::pendulum();
        f.a0 = "1/0".into();
        assert!(matches!(f.to_system(), Err(Error::Parse(_))));
        let e = SystemFile::from_json("{\"omega\": [\"1\"], \"A0\": 1}").unwrap_err();
        assert!(matches!(e, Error::Parse(m) if m.contains("line 1")));
    }

    #[test]
    fn cosine_of_zero_mode_is_constant() {
        let mut f = fixtures::pendulum();
        f.g.push(Term { basis: Basis::Cos, sigma: 0, sigma_prime: 0, apoly: vec!["2".into()] });
        let sys = f.to_system().unwrap();
        assert_eq!(sys.g.coeff(0, 0, 0), Exact::from_i64(2));
    }
}
