//! Text formats: dense matrix files and solution reports.
//!
//! A matrix file holds the dimension on its first line followed by `n` rows
//! of `n` whitespace-separated numbers. Values are written with 17
//! significant digits, so reading a written file gives back the same bits.
//!
//! A solution report is a TOML document; see [`SolutionReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::model::{certify, Certificate, Certified, Solution, SolverKind};

fn io_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

pub fn format_matrix(m: &SymMatrix) -> String {
    let n = m.n();
    let mut out = String::with_capacity(n * n * 25 + 8);
    writeln!(out, "{n}").unwrap();
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e}", m.get(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<SymMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty matrix file".into()))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad dimension line '{}'", header.trim())))?;
    if n == 0 {
        return Err(Error::InvalidInput("matrix dimension must be positive".into()));
    }
    let mut values = Vec::with_capacity(n * n);
    for (row, line) in lines.by_ref().take(n).enumerate() {
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: bad number '{tok}'", row + 1)))?;
            values.push(v);
        }
        if values.len() - before != n {
            return Err(Error::InvalidInput(format!(
                "row {} has {} entries, expected {n}",
                row + 1,
                values.len() - before
            )));
        }
    }
    if values.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "expected {n} rows, found {}",
            values.len() / n
        )));
    }
    if lines.next().is_some() {
        return Err(Error::InvalidInput(format!("trailing data after {n} rows")));
    }
    SymMatrix::from_row_major(n, &values)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SymMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &SymMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| io_error(path, e))
}

/// Serialized form of a [`Solution`].
///
/// `certificate` records how the dual value was computed (`"bounded"` over
/// `[alpha, beta]` or `"unbounded"`), so that [`SolutionReport::recompute`]
/// reproduces the stored gap from `x`, `u` and the input covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub solver: String,
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub certificate: String,
    pub epsilon: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub converged: bool,
    pub wall_time_seconds: f64,
    /// Row-major `n * n` entries.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl SolutionReport {
    pub fn from_solution(sol: &Solution, epsilon: f64) -> Self {
        let sweeps = match sol.solver {
            SolverKind::Smooth => None,
            _ => Some(sol.iterations),
        };
        let certificate = match sol.certificate {
            Certificate::Bounded { .. } => "bounded",
            Certificate::Unbounded => "unbounded",
        };
        Self {
            solver: sol.solver.name().to_string(),
            n: sol.x.n(),
            rho: sol.rho,
            alpha: sol.alpha,
            beta: sol.beta,
            certificate: certificate.to_string(),
            epsilon,
            iterations: sol.iterations,
            sweeps,
            primal_objective: sol.primal_objective,
            dual_objective: sol.dual_objective,
            gap: sol.gap,
            converged: sol.converged,
            wall_time_seconds: sol.wall_time_seconds,
            x: sol.x.to_row_major(),
            u: sol.u.to_row_major(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: Self =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad report: {e}")))?;
        for (name, len) in [("x", report.x.len()), ("u", report.u.len())] {
            if len != report.n * report.n {
                return Err(Error::InvalidInput(format!(
                    "report field '{name}' has {len} entries, expected {}",
                    report.n * report.n
                )));
            }
        }
        Ok(report)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_toml(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()?).map_err(|e| io_error(path, e))
    }

    pub fn x_matrix(&self) -> Result<SymMatrix> {
        SymMatrix::from_row_major(self.n, &self.x)
    }

    pub fn u_matrix(&self) -> Result<SymMatrix> {
        SymMatrix::from_row_major(self.n, &self.u)
    }

    pub fn certificate(&self) -> Result<Certificate> {
        match self.certificate.as_str() {
            "bounded" => Ok(Certificate::Bounded {
                alpha: self.alpha,
                beta: self.beta,
            }),
            "unbounded" => Ok(Certificate::Unbounded),
            other => Err(Error::InvalidInput(format!("unknown certificate '{other}'"))),
        }
    }

    /// Recomputes primal, dual and gap from the stored `x` and `u`.
    pub fn recompute(&self, sigma: &SymMatrix) -> Result<Certified> {
        certify(sigma, self.rho, &self.x_matrix()?, &self.u_matrix()?, self.certificate()?)
    }
}
