//! Sparse linear algebra substrate and the linear ODE model `u' = A u + g(t)`.
//!
//! Everything downstream (steppers, exponential propagation, ParaExp) works on
//! [`LinearOdeSystem`] and produces [`SampledSolution`]s on uniform grids.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type StateVector = Vec<f64>;

/// Real sparse matrix in compressed-row form.
///
/// Column indices are strictly increasing within each row; construction goes
/// through [`TripletBuilder`], which sorts and merges duplicates.
#[derive(Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl fmt::Debug for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseMatrix")
            .field("nrows", &self.nrows)
            .field("ncols", &self.ncols)
            .field("nnz", &self.nnz())
            .finish()
    }
}

/// Coordinate-format accumulator. Duplicate entries are summed in insertion
/// order, so the result is deterministic.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    /// Panics if `(row, col)` is out of bounds.
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.nrows && col < self.ncols,
            "triplet ({row}, {col}) outside {}x{}",
            self.nrows,
            self.ncols
        );
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        // stable sort keeps insertion order among duplicates
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; self.nrows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl SparseMatrix {
    /// Builds from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::DimensionMismatch {
                context: "row_offsets length",
                expected: nrows + 1,
                actual: row_offsets.len(),
            });
        }
        if col_indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "col_indices vs values",
                expected: values.len(),
                actual: col_indices.len(),
            });
        }
        if row_offsets[0] != 0 || row_offsets[nrows] != values.len() {
            return Err(Error::InvalidArgument(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        for r in 0..nrows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "row_offsets decreasing at row {r}"
                )));
            }
            let cols = &col_indices[lo..hi];
            if cols.iter().any(|&c| c >= ncols) {
                return Err(Error::InvalidArgument(format!(
                    "column index out of range in row {r}"
                )));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "columns not strictly increasing in row {r}"
                )));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut b = TripletBuilder::new(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        match self.col_indices[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`, summing each row in stored column order.
    pub fn spmv(&self, x: &[f64]) -> Result<StateVector> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "spmv input",
                expected: self.ncols,
                actual: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                context: "spmv output",
                expected: self.nrows,
                actual: y.len(),
            });
        }
        self.spmv_unchecked(x, y);
        Ok(())
    }

    /// Hot-loop variant; callers guarantee the dimensions.
    pub(crate) fn spmv_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                b.push(c, r, v);
            }
        }
        b.build()
    }

    /// Entrywise `self + other`. Explicit zeros produced by cancellation are kept.
    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::InvalidArgument(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..m.nrows {
                for (c, v) in m.row(r) {
                    b.push(r, c, v);
                }
            }
        }
        Ok(b.build())
    }

    pub fn scale(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                context: "row scaling",
                expected: self.nrows,
                actual: d.len(),
            });
        }
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                out.values[k] *= d[r];
            }
        }
        Ok(out)
    }

    /// Keeps only the entries whose column satisfies `keep`.
    pub fn filter_columns(&self, keep: impl Fn(usize) -> bool) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                if keep(c) {
                    b.push(r, c, v);
                }
            }
        }
        b.build()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SparseMatrix) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(
            self.nrows * other.nrows,
            self.ncols * other.ncols,
            self.nnz() * other.nnz(),
        );
        for r1 in 0..self.nrows {
            for (c1, v1) in self.row(r1) {
                for r2 in 0..other.nrows {
                    for (c2, v2) in other.row(r2) {
                        b.push(r1 * other.nrows + r2, c1 * other.ncols + c2, v1 * v2);
                    }
                }
            }
        }
        b.build()
    }

    /// Stacks `blocks[i][j]` into one matrix; `None` is a zero block.
    /// Every block row must agree in height and every block column in width.
    pub fn block(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[&[Option<&SparseMatrix>]],
    ) -> Result<SparseMatrix> {
        let nrows: usize = row_sizes.iter().sum();
        let ncols: usize = col_sizes.iter().sum();
        let mut b = TripletBuilder::new(nrows, ncols);
        let mut r0 = 0;
        for (bi, &h) in row_sizes.iter().enumerate() {
            let mut c0 = 0;
            for (bj, &w) in col_sizes.iter().enumerate() {
                if let Some(m) = blocks[bi][bj] {
                    if m.nrows != h || m.ncols != w {
                        return Err(Error::InvalidArgument(format!(
                            "block ({bi}, {bj}) is {}x{}, expected {h}x{w}",
                            m.nrows, m.ncols
                        )));
                    }
                    for r in 0..h {
                        for (c, v) in m.row(r) {
                            b.push(r0 + r, c0 + c, v);
                        }
                    }
                }
                c0 += w;
            }
            r0 += h;
        }
        Ok(b.build())
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (&c, &v) in self.col_indices.iter().zip(&self.values) {
            sums[c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }
}

/// Free-function form of [`SparseMatrix::spmv`].
pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<StateVector> {
    a.spmv(x)
}

type SourceFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Time-dependent forcing `g(t)`, evaluated on demand into a caller buffer.
#[derive(Clone, Default)]
pub struct Source(Option<Arc<SourceFn>>);

impl Source {
    pub fn zero() -> Self {
        Source(None)
    }

    /// `f(t, out)` must overwrite every entry of `out`.
    pub fn new(f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Source(Some(Arc::new(f)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_none()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match &self.0 {
            Some(f) => f(t, out),
            None => out.fill(0.0),
        }
    }

    pub fn eval(&self, t: f64, n: usize) -> StateVector {
        let mut out = vec![0.0; n];
        self.eval_into(t, &mut out);
        out
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_zero() { "Source(zero)" } else { "Source(fn)" })
    }
}

/// Off-diagonal block structure `A = [[0, a_he], [a_eh, 0]]` with the state
/// ordered `[h; e]`. Systems that carry it can be advanced by leapfrog.
#[derive(Debug, Clone)]
pub struct StaggeredBlocks {
    pub n_h: usize,
    pub n_e: usize,
    /// Coupling e → dh/dt, `n_h × n_e`.
    pub a_he: SparseMatrix,
    /// Coupling h → de/dt, `n_e × n_h`.
    pub a_eh: SparseMatrix,
}

impl StaggeredBlocks {
    pub fn new(a_he: SparseMatrix, a_eh: SparseMatrix) -> Result<Self> {
        let (n_h, n_e) = (a_he.nrows(), a_he.ncols());
        if a_eh.nrows() != n_e || a_eh.ncols() != n_h {
            return Err(Error::InvalidArgument(format!(
                "staggered blocks {}x{} and {}x{} do not interlock",
                n_h,
                n_e,
                a_eh.nrows(),
                a_eh.ncols()
            )));
        }
        Ok(Self { n_h, n_e, a_he, a_eh })
    }

    pub fn assemble(&self) -> SparseMatrix {
        SparseMatrix::block(
            &[self.n_h, self.n_e],
            &[self.n_h, self.n_e],
            &[&[None, Some(&self.a_he)], &[Some(&self.a_eh), None]],
        )
        .expect("block sizes checked at construction")
    }
}

/// `u' = A u + g(t)`, `u(t0) = u0`.
#[derive(Debug, Clone)]
pub struct LinearOdeSystem {
    a: Arc<SparseMatrix>,
    source: Source,
    u0: StateVector,
    t0: f64,
    blocks: Option<Arc<StaggeredBlocks>>,
}

impl LinearOdeSystem {
    pub fn new(a: SparseMatrix, source: Source, u0: StateVector, t0: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!(
                "system matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if u0.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: a.nrows(),
                actual: u0.len(),
            });
        }
        if !t0.is_finite() || u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial data must be finite".into()));
        }
        Ok(Self {
            a: Arc::new(a),
            source,
            u0,
            t0,
            blocks: None,
        })
    }

    /// Builds `A` from staggered blocks and remembers the structure.
    pub fn staggered(blocks: StaggeredBlocks, source: Source, u0: StateVector, t0: f64) -> Result<Self> {
        let mut sys = Self::new(blocks.assemble(), source, u0, t0)?;
        sys.blocks = Some(Arc::new(blocks));
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn blocks(&self) -> Option<&StaggeredBlocks> {
        self.blocks.as_deref()
    }

    pub fn with_u0(&self, u0: StateVector) -> Result<Self> {
        if u0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: self.dim(),
                actual: u0.len(),
            });
        }
        Ok(Self { u0, ..self.clone() })
    }

    pub fn with_t0(&self, t0: f64) -> Self {
        Self { t0, ..self.clone() }
    }

    pub fn with_source(&self, source: Source) -> Self {
        Self {
            source,
            ..self.clone()
        }
    }

    /// `f(t, u) = A u + g(t)` into `out`.
    pub fn rhs_into(&self, t: f64, u: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.a.spmv_unchecked(u, out);
        if !self.source.is_zero() {
            self.source.eval_into(t, scratch);
            out.iter_mut().zip(scratch.iter()).for_each(|(o, g)| *o += g);
        }
    }
}

/// States sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSolution {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl SampledSolution {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch {
                context: "sampled solution",
                expected: times.len(),
                actual: states.len(),
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.len() != first.len()) {
                return Err(Error::InvalidArgument("states differ in dimension".into()));
            }
        }
        Ok(Self { times, states })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> Option<&StateVector> {
        self.states.last()
    }

    /// One state component as a scalar series.
    pub fn component(&self, idx: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[idx]).collect()
    }
}

/// Relative tolerance used to decide that a span is an integer number of steps.
pub const GRID_TOLERANCE: f64 = 1e-12;

/// Uniform grid `t0, t0 + dt, …` up to `t_end`. When the span is an integer
/// number of steps (relative tolerance [`GRID_TOLERANCE`]) the last point is
/// exactly `t_end`.
pub fn sample_grid(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!(
            "grid end {t_end} must exceed start {t0}"
        )));
    }
    let ratio = (t_end - t0) / dt;
    let nearest = ratio.round();
    let integral = (ratio - nearest).abs() <= GRID_TOLERANCE * nearest.max(1.0);
    let n = if integral { nearest as usize } else { ratio.floor() as usize };
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * dt).collect();
    if integral && n > 0 {
        times[n] = t_end;
    }
    Ok(times)
}

/// `(max_i |x_i|, ‖x‖₂)`.
pub fn weighted_norms(x: &[f64]) -> (f64, f64) {
    let max_abs = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let two = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    (max_abs, two)
}
