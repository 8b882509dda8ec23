//! Error series against a reference and deterministic CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use paraexp::SampledSolution;

use crate::CliError;

/// Pointwise error of a scalar diagnostic. Relative errors are normalised by
/// the largest magnitude of the reference series.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub rel_error: Vec<f64>,
    pub max_abs: f64,
    pub max_rel: f64,
    /// Euclidean norm of the absolute error series.
    pub l2: f64,
}

impl ErrorReport {
    /// Errors of `q` against `q_ref` on shared sample times.
    pub fn from_series(times: &[f64], q: &[f64], q_ref: &[f64]) -> Result<Self, CliError> {
        if q.len() != times.len() || q_ref.len() != times.len() {
            return Err(CliError::Numerical(paraexp::Error::GridMismatch(format!(
                "{} times, {} values, {} reference values",
                times.len(),
                q.len(),
                q_ref.len()
            ))));
        }
        let scale = q_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let abs_error: Vec<f64> = q.iter().zip(q_ref).map(|(a, b)| (a - b).abs()).collect();
        let rel_error: Vec<f64> = abs_error
            .iter()
            .map(|e| if scale > 0.0 { e / scale } else { *e })
            .collect();
        let max_abs = abs_error.iter().cloned().fold(0.0, f64::max);
        let max_rel = rel_error.iter().cloned().fold(0.0, f64::max);
        let l2 = abs_error.iter().map(|e| e * e).sum::<f64>().sqrt();
        Ok(Self {
            times: times.to_vec(),
            abs_error,
            rel_error,
            max_abs,
            max_rel,
            l2,
        })
    }
}

/// Compares the scalar `diagnostic` of two trajectories sampled at
/// bitwise-identical times.
pub fn compute_errors(
    sol: &SampledSolution,
    reference: &SampledSolution,
    diagnostic: impl Fn(&[f64]) -> f64,
) -> Result<ErrorReport, CliError> {
    if sol.times != reference.times {
        return Err(CliError::Numerical(paraexp::Error::GridMismatch(
            "solution and reference are sampled at different times".into(),
        )));
    }
    let q: Vec<f64> = sol.states.iter().map(|u| diagnostic(u)).collect();
    let q_ref: Vec<f64> = reference.states.iter().map(|u| diagnostic(u)).collect();
    ErrorReport::from_series(&sol.times, &q, &q_ref)
}

/// 17 significant digits, so values round-trip exactly.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with `# key = value` comment lines, a header row and data rows.
/// `None` cells are left empty.
#[derive(Debug, Default)]
pub struct CsvTable {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<Option<String>>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self {
            header,
            ..Self::default()
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn comments<K: AsRef<str>, V: AsRef<str>>(&mut self, pairs: &[(K, V)]) -> &mut Self {
        for (k, v) in pairs {
            self.comments.push(format!("{} = {}", k.as_ref(), v.as_ref()));
        }
        self
    }

    pub fn row(&mut self, cells: Vec<Option<String>>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn numeric_row(&mut self, values: &[f64]) {
        self.row(values.iter().map(|v| Some(fmt_num(*v))).collect());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let cells: Vec<&str> = r.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.render()).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
