//! Finite Integration Technique on a uniform hexahedral grid.
//!
//! Primal edges carry electric voltages `e`, primal facets (equivalently dual
//! edges) carry magnetic voltages `h`. With `M = diag(M_mu, M_eps)` and
//! `K = [[0, C], [-C~, 0]]`, `C~ = Cᵀ`, the semi-discrete system is
//! `M u' + K u = ḡ(t)` for `u = [h; e]`.
//!
//! Degrees of freedom are numbered axis-major: x-oriented objects first, then
//! y, then z, each block lexicographic with the x index running fastest.

use crate::error::{Error, Result};
use crate::linode::{LinearOdeSystem, Source, SparseMatrix, StaggeredBlocks, StateVector, TripletBuilder};

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854187817e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0 * std::f64::consts::PI * 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl FitGrid {
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 nodes per axis, got {nx}x{ny}x{nz}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dz > 0.0) {
            return Err(Error::InvalidArgument("grid spacings must be positive".into()));
        }
        Ok(Self { nx, ny, nz, dx, dy, dz })
    }

    /// Unit spacing, `n × n × nz` nodes.
    pub fn unit(n: usize, nz: usize) -> Result<Self> {
        Self::new(n, n, nz, 1.0, 1.0, 1.0)
    }

    pub fn n_edges_x(&self) -> usize {
        (self.nx - 1) * self.ny * self.nz
    }

    pub fn n_edges_y(&self) -> usize {
        self.nx * (self.ny - 1) * self.nz
    }

    pub fn n_edges_z(&self) -> usize {
        self.nx * self.ny * (self.nz - 1)
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges_x() + self.n_edges_y() + self.n_edges_z()
    }

    pub fn n_facets_x(&self) -> usize {
        self.nx * (self.ny - 1) * (self.nz - 1)
    }

    pub fn n_facets_y(&self) -> usize {
        (self.nx - 1) * self.ny * (self.nz - 1)
    }

    pub fn n_facets_z(&self) -> usize {
        (self.nx - 1) * (self.ny - 1) * self.nz
    }

    pub fn n_facets(&self) -> usize {
        self.n_facets_x() + self.n_facets_y() + self.n_facets_z()
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn node(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nx * (iy + self.ny * iz)
    }

    pub fn edge_x(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + (self.nx - 1) * (iy + self.ny * iz)
    }

    pub fn edge_y(&self, ix: usize, iy: usize, iz: usize) -> usize {
        self.n_edges_x() + ix + self.nx * (iy + (self.ny - 1) * iz)
    }

    pub fn edge_z(&self, ix: usize, iy: usize, iz: usize) -> usize {
        self.n_edges_x() + self.n_edges_y() + ix + self.nx * (iy + self.ny * iz)
    }

    pub fn facet_x(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nx * (iy + (self.ny - 1) * iz)
    }

    pub fn facet_y(&self, ix: usize, iy: usize, iz: usize) -> usize {
        self.n_facets_x() + ix + (self.nx - 1) * (iy + self.ny * iz)
    }

    pub fn facet_z(&self, ix: usize, iy: usize, iz: usize) -> usize {
        self.n_facets_x() + self.n_facets_y() + ix + (self.nx - 1) * (iy + (self.ny - 1) * iz)
    }

    /// Node-column center used for the line source.
    pub fn center_column(&self) -> (usize, usize) {
        (self.nx / 2, self.ny / 2)
    }
}

/// `(n-1) × n` forward difference.
fn difference(n: usize) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(n - 1, n, 2 * (n - 1));
    for i in 0..n - 1 {
        b.push(i, i, -1.0);
        b.push(i, i + 1, 1.0);
    }
    b.build()
}

/// `z ⊗ y ⊗ x`, matching the x-fastest numbering.
fn kron3(z: &SparseMatrix, y: &SparseMatrix, x: &SparseMatrix) -> SparseMatrix {
    z.kron(&y.kron(x))
}

/// Primal curl: edge voltages to facet circulations (right-handed about the
/// facet normal). Entries are `±1`.
pub fn build_curl(grid: &FitGrid) -> SparseMatrix {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let (dx, dy, dz) = (difference(nx), difference(ny), difference(nz));
    let ix = SparseMatrix::identity;

    let xf_from_y = kron3(&dz, &ix(ny - 1), &ix(nx)).scale(-1.0);
    let xf_from_z = kron3(&ix(nz - 1), &dy, &ix(nx));
    let yf_from_z = kron3(&ix(nz - 1), &ix(ny), &dx).scale(-1.0);
    let yf_from_x = kron3(&dz, &ix(ny), &ix(nx - 1));
    let zf_from_x = kron3(&ix(nz), &dy, &ix(nx - 1)).scale(-1.0);
    let zf_from_y = kron3(&ix(nz), &ix(ny - 1), &dx);

    SparseMatrix::block(
        &[grid.n_facets_x(), grid.n_facets_y(), grid.n_facets_z()],
        &[grid.n_edges_x(), grid.n_edges_y(), grid.n_edges_z()],
        &[
            &[None, Some(&xf_from_y), Some(&xf_from_z)],
            &[Some(&yf_from_x), None, Some(&yf_from_z)],
            &[Some(&zf_from_x), Some(&zf_from_y), None],
        ],
    )
    .expect("curl blocks are sized from the grid")
}

/// Length of the dual edge through node index `i` along an axis with `n`
/// nodes and spacing `d`; halved at the boundary.
fn dual_length(i: usize, n: usize, d: f64) -> f64 {
    if i == 0 || i == n - 1 {
        0.5 * d
    } else {
        d
    }
}

/// Homogeneous-medium diagonals `(m_eps, m_mu)`:
/// `m_eps = ε · (dual facet area) / (edge length)` per primal edge,
/// `m_mu = μ · (facet area) / (dual edge length)` per primal facet.
pub fn build_materials(grid: &FitGrid, eps: f64, mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eps > 0.0 && mu > 0.0) {
        return Err(Error::InvalidArgument("material constants must be positive".into()));
    }
    let g = grid;
    let lx = |i| dual_length(i, g.nx, g.dx);
    let ly = |i| dual_length(i, g.ny, g.dy);
    let lz = |i| dual_length(i, g.nz, g.dz);

    let mut m_eps = Vec::with_capacity(g.n_edges());
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            for _ in 0..g.nx - 1 {
                m_eps.push(eps * ly(iy) * lz(iz) / g.dx);
            }
        }
    }
    for iz in 0..g.nz {
        for _ in 0..g.ny - 1 {
            for ix in 0..g.nx {
                m_eps.push(eps * lx(ix) * lz(iz) / g.dy);
            }
        }
    }
    for _ in 0..g.nz - 1 {
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                m_eps.push(eps * lx(ix) * ly(iy) / g.dz);
            }
        }
    }

    let mut m_mu = Vec::with_capacity(g.n_facets());
    for _ in 0..g.nz - 1 {
        for _ in 0..g.ny - 1 {
            for ix in 0..g.nx {
                m_mu.push(mu * g.dy * g.dz / lx(ix));
            }
        }
    }
    for _ in 0..g.nz - 1 {
        for iy in 0..g.ny {
            for _ in 0..g.nx - 1 {
                m_mu.push(mu * g.dx * g.dz / ly(iy));
            }
        }
    }
    for iz in 0..g.nz {
        for _ in 0..g.ny - 1 {
            for _ in 0..g.nx - 1 {
                m_mu.push(mu * g.dx * g.dy / lz(iz));
            }
        }
    }
    Ok((m_eps, m_mu))
}

/// Curl, materials and boundary mask for one grid.
#[derive(Debug, Clone)]
pub struct FitOperators {
    grid: FitGrid,
    c: SparseMatrix,
    c_dual: SparseMatrix,
    m_eps: Vec<f64>,
    m_mu: Vec<f64>,
    pec_mask: Vec<bool>,
}

impl FitOperators {
    /// Unmasked operators for a homogeneous medium.
    pub fn new(grid: &FitGrid, eps: f64, mu: f64) -> Result<Self> {
        let c = build_curl(grid);
        let c_dual = c.transpose();
        let (m_eps, m_mu) = build_materials(grid, eps, mu)?;
        Ok(Self {
            grid: *grid,
            c,
            c_dual,
            m_eps,
            m_mu,
            pec_mask: vec![false; grid.n_edges()],
        })
    }

    pub fn grid(&self) -> &FitGrid {
        &self.grid
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    pub fn c_dual(&self) -> &SparseMatrix {
        &self.c_dual
    }

    pub fn m_eps(&self) -> &[f64] {
        &self.m_eps
    }

    pub fn m_mu(&self) -> &[f64] {
        &self.m_mu
    }

    pub fn pec_mask(&self) -> &[bool] {
        &self.pec_mask
    }

    pub fn n_e(&self) -> usize {
        self.c.ncols()
    }

    pub fn n_h(&self) -> usize {
        self.c.nrows()
    }

    /// Curl with the masked edge columns eliminated.
    pub fn masked_curl(&self) -> SparseMatrix {
        let mask = &self.pec_mask;
        self.c.filter_columns(|col| !mask[col])
    }

    /// `K = [[0, C], [-C~, 0]]` with PEC columns/rows eliminated.
    pub fn stiffness(&self) -> SparseMatrix {
        let c = self.masked_curl();
        let neg_ct = c.transpose().scale(-1.0);
        SparseMatrix::block(
            &[self.n_h(), self.n_e()],
            &[self.n_h(), self.n_e()],
            &[&[None, Some(&c)], &[Some(&neg_ct), None]],
        )
        .expect("sizes come from the curl")
    }

    /// `A = -M⁻¹K` split into its two coupling blocks.
    pub fn staggered_blocks(&self) -> StaggeredBlocks {
        let c = self.masked_curl();
        let inv_mu: Vec<f64> = self.m_mu.iter().map(|m| -1.0 / m).collect();
        let inv_eps: Vec<f64> = self.m_eps.iter().map(|m| 1.0 / m).collect();
        let a_he = c.scale_rows(&inv_mu).expect("one mu entry per facet");
        let a_eh = c.transpose().scale_rows(&inv_eps).expect("one eps entry per edge");
        StaggeredBlocks::new(a_he, a_eh).expect("curl and transpose interlock")
    }

    /// `W = ½ (eᵀ M_eps e + hᵀ M_mu h)`.
    pub fn energy(&self, e: &[f64], h: &[f64]) -> Result<f64> {
        energy(e, h, self)
    }

    /// Energy of a stacked state `[h; e]`.
    pub fn state_energy(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.n_h() + self.n_e() {
            return Err(Error::DimensionMismatch {
                context: "FIT state",
                expected: self.n_h() + self.n_e(),
                actual: u.len(),
            });
        }
        let (h, e) = u.split_at(self.n_h());
        energy(e, h, self)
    }
}

/// Flags every primal edge lying tangentially on the domain boundary.
pub fn apply_pec(mut ops: FitOperators, grid: &FitGrid) -> FitOperators {
    let g = grid;
    let on = |i: usize, n: usize| i == 0 || i == n - 1;
    let mut mask = vec![false; g.n_edges()];
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            for ix in 0..g.nx - 1 {
                mask[g.edge_x(ix, iy, iz)] = on(iy, g.ny) || on(iz, g.nz);
            }
        }
    }
    for iz in 0..g.nz {
        for iy in 0..g.ny - 1 {
            for ix in 0..g.nx {
                mask[g.edge_y(ix, iy, iz)] = on(ix, g.nx) || on(iz, g.nz);
            }
        }
    }
    for iz in 0..g.nz - 1 {
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                mask[g.edge_z(ix, iy, iz)] = on(ix, g.nx) || on(iy, g.ny);
            }
        }
    }
    ops.pec_mask = mask;
    ops
}

/// Gaussian line current `i_max · exp(-4 ((t - σ_t)/σ_t)²)` on a set of
/// z-directed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSourceConfig {
    pub i_max: f64,
    pub sigma_t: f64,
    pub edges: Vec<usize>,
}

impl WaveSourceConfig {
    /// Amplitude 1 A, width 2e-8 s, on the central z-edge column.
    pub fn centered(grid: &FitGrid) -> Self {
        Self::centered_with(grid, 1.0, 2e-8)
    }

    pub fn centered_with(grid: &FitGrid, i_max: f64, sigma_t: f64) -> Self {
        let (cx, cy) = grid.center_column();
        let edges = (0..grid.nz - 1).map(|iz| grid.edge_z(cx, cy, iz)).collect();
        Self { i_max, sigma_t, edges }
    }
}

pub fn line_current(t: f64, cfg: &WaveSourceConfig) -> f64 {
    let x = (t - cfg.sigma_t) / cfg.sigma_t;
    cfg.i_max * (-4.0 * x * x).exp()
}

/// Assembled cavity problem: grid, operators and the ODE system `u = [h; e]`.
#[derive(Debug, Clone)]
pub struct WaveProblem {
    pub grid: FitGrid,
    pub ops: FitOperators,
    pub source: WaveSourceConfig,
    pub system: LinearOdeSystem,
}

impl WaveProblem {
    /// Splits a state into `(h, e)`.
    pub fn split<'a>(&self, u: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        u.split_at(self.ops.n_h())
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        self.ops.state_energy(u)
    }

    /// `(ix, iy, iz, e_z)` per z-edge, `e_z` in V/m.
    pub fn ez_snapshot(&self, u: &[f64]) -> Result<Vec<(usize, usize, usize, f64)>> {
        let g = &self.grid;
        if u.len() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                context: "snapshot state",
                expected: self.system.dim(),
                actual: u.len(),
            });
        }
        let n_h = self.ops.n_h();
        let mut out = Vec::with_capacity(g.n_edges_z());
        for iz in 0..g.nz - 1 {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    out.push((ix, iy, iz, u[n_h + g.edge_z(ix, iy, iz)] / g.dz));
                }
            }
        }
        Ok(out)
    }
}

/// PEC cavity driven by the line current; `u0 = 0`, `t0 = 0`.
///
/// The source enters the electric block as `-M_eps⁻¹ j(t)`, one lumped
/// current per source edge.
pub fn build_wave_system(grid: &FitGrid, cfg: &WaveSourceConfig, eps: f64, mu: f64) -> Result<WaveProblem> {
    if !(cfg.sigma_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pulse width must be positive, got {}",
            cfg.sigma_t
        )));
    }
    let ops = apply_pec(FitOperators::new(grid, eps, mu)?, grid);
    if let Some(&bad) = cfg.edges.iter().find(|&&k| k >= ops.n_e() || ops.pec_mask()[k]) {
        return Err(Error::InvalidArgument(format!(
            "source edge {bad} is out of range or on the PEC boundary"
        )));
    }
    let blocks = ops.staggered_blocks();
    let n_h = ops.n_h();
    let n = n_h + ops.n_e();
    let weights: Vec<(usize, f64)> = cfg
        .edges
        .iter()
        .map(|&k| (n_h + k, -1.0 / ops.m_eps()[k]))
        .collect();
    let pulse = cfg.clone();
    let source = Source::new(move |t, g| {
        g.fill(0.0);
        let i = line_current(t, &pulse);
        for &(k, w) in &weights {
            g[k] = w * i;
        }
    });
    let system = LinearOdeSystem::staggered(blocks, source, vec![0.0; n], 0.0)?;
    Ok(WaveProblem {
        grid: *grid,
        ops,
        source: cfg.clone(),
        system,
    })
}

/// Vacuum cavity from the reference setup: 21×21×2 nodes at 1 m spacing,
/// centered 1 A / 2e-8 s pulse.
pub fn reference_cavity() -> Result<WaveProblem> {
    let grid = FitGrid::unit(21, 2)?;
    build_wave_system(&grid, &WaveSourceConfig::centered(&grid), EPS0, MU0)
}

/// `W = ½ (eᵀ M_eps e + hᵀ M_mu h)`.
pub fn energy(e: &[f64], h: &[f64], ops: &FitOperators) -> Result<f64> {
    if e.len() != ops.n_e() || h.len() != ops.n_h() {
        return Err(Error::DimensionMismatch {
            context: "energy",
            expected: ops.n_e() + ops.n_h(),
            actual: e.len() + h.len(),
        });
    }
    let we: f64 = e.iter().zip(ops.m_eps()).map(|(x, m)| m * x * x).sum();
    let wh: f64 = h.iter().zip(ops.m_mu()).map(|(x, m)| m * x * x).sum();
    Ok(0.5 * (we + wh))
}

/// Zeroes the masked electric entries of a stacked state.
pub fn clear_masked(u: &mut StateVector, ops: &FitOperators) {
    let n_h = ops.n_h();
    for (k, &m) in ops.pec_mask().iter().enumerate() {
        if m {
            u[n_h + k] = 0.0;
        }
    }
}
