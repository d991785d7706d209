//! JSON problem files. Complex numbers are `[re, im]` pairs and matrices are
//! arrays of rows.

use std::fmt;

use lindode::numkernel::ComplexMatrix;
use lindode::odecore::{OdeProblem, TimeDependentMatrix};
use lindode::C64;
use serde::{Deserialize, Serialize};

pub type Pair = [f64; 2];
pub type RawMatrix = Vec<Vec<Pair>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum RawTimeMatrix {
    Constant(RawMatrix),
    Knots(Vec<(f64, RawMatrix)>),
}

/// On-disk form, kept separate from [`Problem`] so that syntax errors and
/// semantic errors can both be anchored to a line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(rename = "V")]
    pub v: RawTimeMatrix,
    pub mu0: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<RawTimeMatrix>,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Vec<Pair>>,
    #[serde(rename = "O", default, skip_serializing_if = "Option::is_none")]
    pub o: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_override: Option<f64>,
}

/// A validated problem together with the optional per-command inputs.
#[derive(Clone, Debug)]
pub struct Problem {
    pub ode: OdeProblem,
    pub phi0: Option<Vec<C64>>,
    pub observable: Option<ComplexMatrix>,
    pub beta: Option<f64>,
    pub delta_override: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemError {
    pub line: usize,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(c) => write!(f, "line {}, column {c}: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl std::error::Error for ProblemError {}

/// 1-based line of the first occurrence of `"key"`, or 1 if absent.
pub fn line_of(src: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    src.find(&needle)
        .map_or(1, |pos| src[..pos].bytes().filter(|&b| b == b'\n').count() + 1)
}

fn c(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn pair(z: &C64) -> Pair {
    [z.re, z.im]
}

fn to_vector(raw: &[Pair]) -> Vec<C64> {
    raw.iter().map(c).collect()
}

fn to_matrix(raw: &RawMatrix, what: &str) -> Result<ComplexMatrix, String> {
    let cols = raw.first().map_or(0, Vec::len);
    if raw.is_empty() || cols == 0 {
        return Err(format!("{what} is empty"));
    }
    if let Some((i, row)) = raw.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("{what} row {i} has {} entries, expected {cols}", row.len()));
    }
    Ok(ComplexMatrix::from_rows(
        &raw.iter().map(|r| to_vector(r)).collect::<Vec<_>>(),
    ))
}

fn from_matrix(m: &ComplexMatrix) -> RawMatrix {
    m.as_slice().chunks(m.cols()).map(|r| r.iter().map(pair).collect()).collect()
}

fn check_shape(m: &ComplexMatrix, rows: usize, cols: usize, what: &str) -> Result<(), String> {
    if m.rows() != rows || m.cols() != cols {
        return Err(format!("{what} is {}x{}, expected {rows}x{cols}", m.rows(), m.cols()));
    }
    Ok(())
}

fn to_time_matrix(raw: &RawTimeMatrix, rows: usize, cols: usize, what: &str) -> Result<TimeDependentMatrix, String> {
    match raw {
        RawTimeMatrix::Constant(m) => {
            let m = to_matrix(m, what)?;
            check_shape(&m, rows, cols, what)?;
            Ok(TimeDependentMatrix::Constant(m))
        }
        RawTimeMatrix::Knots(knots) => {
            let mut out = Vec::with_capacity(knots.len());
            for (t, m) in knots {
                let label = format!("{what} knot at t = {t}");
                let m = to_matrix(m, &label)?;
                check_shape(&m, rows, cols, &label)?;
                out.push((*t, m));
            }
            TimeDependentMatrix::knots(out).map_err(|e| format!("{what}: {e}"))
        }
    }
}

fn from_time_matrix(m: &TimeDependentMatrix, what: &str) -> Result<RawTimeMatrix, String> {
    match m {
        TimeDependentMatrix::Constant(m) => Ok(RawTimeMatrix::Constant(from_matrix(m))),
        TimeDependentMatrix::Knots(k) => Ok(RawTimeMatrix::Knots(
            k.iter().map(|(t, m)| (*t, from_matrix(m))).collect(),
        )),
        TimeDependentMatrix::Generator(g) => Err(format!("{what} is a closure ({}) and has no file form", g.name)),
    }
}

fn anchored<'a>(src: &'a str, key: &'static str) -> impl Fn(String) -> ProblemError + 'a {
    move |message| ProblemError {
        line: line_of(src, key),
        column: None,
        message,
    }
}

impl ProblemFile {
    pub fn parse(src: &str) -> Result<Self, ProblemError> {
        serde_json::from_str(src).map_err(|e| ProblemError {
            line: e.line(),
            column: Some(e.column()),
            message: e.to_string(),
        })
    }

    /// Validates against `src`, which is used only to anchor error lines.
    pub fn validate(&self, src: &str) -> Result<Problem, ProblemError> {
        let at = |key: &'static str| anchored(src, key);
        if self.n > 12 {
            return Err(at("n")(format!("n = {} is too large for dense simulation", self.n)));
        }
        let d = 1usize << self.n;
        let v = to_time_matrix(&self.v, d, d, "V").map_err(at("V"))?;
        let mu0 = to_vector(&self.mu0);
        if mu0.len() != d {
            return Err(at("mu0")(format!("mu0 has length {}, expected {d}", mu0.len())));
        }
        let b = match &self.b {
            Some(raw) => Some(to_time_matrix(raw, d, 1, "b").map_err(at("b"))?),
            None => None,
        };
        let phi0 = match &self.phi0 {
            Some(raw) => {
                let phi = to_vector(raw);
                if phi.len() != d {
                    return Err(at("phi0")(format!("phi0 has length {}, expected {d}", phi.len())));
                }
                Some(phi)
            }
            None => None,
        };
        let observable = match &self.o {
            Some(raw) => {
                let o = to_matrix(raw, "O").map_err(at("O"))?;
                check_shape(&o, d, d, "O").map_err(at("O"))?;
                Some(o)
            }
            None => None,
        };
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(at("beta")(format!("beta = {beta} must be positive")));
            }
        }
        if let Some(g) = self.delta_override {
            if !(g > 0.0 && g.is_finite()) {
                return Err(at("delta_override")(format!("delta_override = {g} must be positive")));
            }
        }
        let ode = OdeProblem::new(self.n, v, mu0, b, self.t).map_err(|e| {
            let key = if matches!(e, lindode::Error::NotNormalized { .. }) { "mu0" } else { "T" };
            at(key)(e.to_string())
        })?;
        Ok(Problem {
            ode,
            phi0,
            observable,
            beta: self.beta,
            delta_override: self.delta_override,
        })
    }
}

impl Problem {
    pub fn load(src: &str) -> Result<Self, ProblemError> {
        ProblemFile::parse(src)?.validate(src)
    }

    pub fn from_ode(ode: OdeProblem) -> Self {
        Self {
            ode,
            phi0: None,
            observable: None,
            beta: None,
            delta_override: None,
        }
    }

    pub fn to_file(&self) -> Result<ProblemFile, String> {
        Ok(ProblemFile {
            n: self.ode.n,
            v: from_time_matrix(&self.ode.v, "V")?,
            mu0: self.ode.mu0.iter().map(pair).collect(),
            b: self.ode.b.as_ref().map(|b| from_time_matrix(b, "b")).transpose()?,
            t: self.ode.t_end,
            phi0: self.phi0.as_ref().map(|v| v.iter().map(pair).collect()),
            o: self.observable.as_ref().map(from_matrix),
            beta: self.beta,
            delta_override: self.delta_override,
        })
    }

    pub fn to_json(&self) -> Result<String, String> {
        serde_json::to_string_pretty(&self.to_file()?).map_err(|e| e.to_string())
    }
}
