//! Homogeneous propagation `exp(tA) b`.
//!
//! Two routes are provided: a dense scaling-and-squaring exponential used as
//! the exact baseline, and the sparse truncated-Taylor action
//! `b_{i+1} = r_m((t/s) A) b_i`, which only ever touches `A` through
//! matrix-vector products.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linode::{SparseMatrix, StateVector};

/// Largest dimension for which [`expm_dense`] is attempted.
pub const DENSE_LIMIT: usize = 4000;

/// Taylor order used by automatic parameter selection.
pub const AUTO_TAYLOR_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpmConfig {
    /// Dense exponential of the full operator.
    Dense,
    /// Taylor action with fixed order `m` and `s` substeps.
    Taylor { m: usize, s: usize },
    /// Taylor action with `(m, s)` from [`select_taylor_params`] per gap.
    TaylorAuto,
}

impl ExpmConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ExpmConfig::Taylor { m, s } if m == 0 || s == 0 => Err(Error::InvalidArgument(format!(
                "Taylor parameters must be positive, got m = {m}, s = {s}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ExpmConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpmConfig::Dense => f.write_str("dense"),
            ExpmConfig::Taylor { m, s } => write!(f, "taylor(m={m},s={s})"),
            ExpmConfig::TaylorAuto => f.write_str("taylor(auto)"),
        }
    }
}

// Padé [13/13] numerator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm below which the [13/13] approximant is accurate to double precision.
const THETA13: f64 = 5.371920351148152;

fn norm_one_dense(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(t a)` by scaling and squaring with a [13/13] Padé kernel.
pub fn expm_dense(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n > DENSE_LIMIT {
        return Err(Error::DenseTooLarge { n, limit: DENSE_LIMIT });
    }
    let ta = a * t;
    let norm = norm_one_dense(&ta);
    if !norm.is_finite() {
        return Err(Error::InvalidArgument("matrix exponential of a non-finite matrix".into()));
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let x = ta / 2f64.powi(squarings);
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let inner_u = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9]);
    let u = &x * (inner_u + &x6 * b[7] + &x4 * b[5] + &x2 * b[3] + &id * b[1]);
    let inner_v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8]);
    let v = inner_v + &x6 * b[6] + &x4 * b[4] + &x2 * b[2] + &id * b[0];
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::InvalidArgument("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// `(m, s)` for the Taylor action: `m = 20` and the smallest `s` with
/// `‖t a‖₁ / s ≤ 1`, so the truncation remainder is below `1/21!`.
pub fn select_taylor_params(a: &SparseMatrix, t: f64, tol: f64) -> Result<(usize, usize)> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(taylor_params_for_norm(t.abs() * a.norm_one()))
}

pub(crate) fn taylor_params_for_norm(norm: f64) -> (usize, usize) {
    let s = norm.ceil().max(1.0) as usize;
    (AUTO_TAYLOR_ORDER, s)
}

/// Reusable buffers for repeated Taylor actions with one operator.
pub(crate) struct TaylorWork {
    acc: Vec<f64>,
    prod: Vec<f64>,
}

impl TaylorWork {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            acc: vec![0.0; n],
            prod: vec![0.0; n],
        }
    }

    /// In-place `b ← r_m((t/s) a)^s b`, each factor by nested Horner products.
    pub(crate) fn apply(&mut self, a: &SparseMatrix, b: &mut [f64], t: f64, m: usize, s: usize) -> Result<()> {
        let h = t / s as f64;
        for iterate in 0..s {
            // acc = b + h/m a b, then acc = b + h/j a acc for j = m-1 … 1
            self.acc.copy_from_slice(b);
            for j in (1..=m).rev() {
                a.spmv_unchecked(&self.acc, &mut self.prod);
                let c = h / j as f64;
                for ((acc, bi), p) in self.acc.iter_mut().zip(b.iter()).zip(&self.prod) {
                    *acc = bi + c * p;
                }
            }
            if self.acc.iter().any(|v| !v.is_finite()) {
                return Err(Error::TaylorOverflow { m, s, iterate });
            }
            b.copy_from_slice(&self.acc);
        }
        Ok(())
    }
}

/// `exp(t a) b` through `s` applications of the degree-`m` Taylor polynomial
/// of `exp((t/s) a)`. Costs `s · m` sparse products; powers of `a` are never formed.
pub fn expm_action_taylor(a: &SparseMatrix, b: &[f64], t: f64, m: usize, s: usize) -> Result<StateVector> {
    if !a.is_square() || b.len() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "Taylor action",
            expected: a.ncols(),
            actual: b.len(),
        });
    }
    if m == 0 || s == 0 {
        return Err(Error::InvalidArgument(format!(
            "Taylor parameters must be positive, got m = {m}, s = {s}"
        )));
    }
    let mut out = b.to_vec();
    TaylorWork::new(b.len()).apply(a, &mut out, t, m, s)?;
    Ok(out)
}

/// `exp(t a) b` under the given configuration.
pub fn expm_action(a: &SparseMatrix, b: &[f64], t: f64, cfg: ExpmConfig) -> Result<StateVector> {
    cfg.validate()?;
    match cfg {
        ExpmConfig::Dense => {
            let e = expm_dense(&a.to_dense(), t)?;
            Ok((e * DVector::from_column_slice(b)).as_slice().to_vec())
        }
        ExpmConfig::Taylor { m, s } => expm_action_taylor(a, b, t, m, s),
        ExpmConfig::TaylorAuto => {
            let (m, s) = taylor_params_for_norm(t.abs() * a.norm_one());
            expm_action_taylor(a, b, t, m, s)
        }
    }
}
