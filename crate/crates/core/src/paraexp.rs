//! Direct parallel-in-time solution of `u' = A u + g(t)`.
//!
//! The horizon is cut into `p` intervals `I_j = (T_{j-1}, T_j]`. Worker `j`
//! integrates the particular problem `v_j' = A v_j + g`, `v_j(T_{j-1}) = 0`
//! with a time stepper and then propagates `v_j(T_j)` with the matrix
//! exponential over `(T_j, T_p]`, giving `w_{j+1}`. Worker `p` additionally
//! propagates `u₀`, giving `w_1`. Superposition assembles
//! `u(t) = v_j(t) + Σ_{i ≤ j} w_i(t)` for `t ∈ I_j`.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::{expm_dense, taylor_params_for_norm, ExpmConfig, TaylorWork};
use crate::linode::{sample_grid, LinearOdeSystem, SampledSolution, SparseMatrix, StateVector};
use crate::steppers::{cfl_check, integrate, integrate_on_grid, CflReport, StepperKind};

/// Relative (to `dt`) distance within which a partition boundary is moved
/// onto the nearest sample time.
const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    boundaries: Vec<f64>,
}

impl TimePartition {
    /// Strictly increasing `T₀ < T₁ < … < T_p`, `p ≥ 1`.
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidArgument("a partition needs at least one interval".into()));
        }
        if boundaries.iter().any(|t| !t.is_finite()) || boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "partition boundaries must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn p(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn end(&self) -> f64 {
        self.boundaries[self.p()]
    }

    /// `(T_{j-1}, T_j)` for `j = 1..=p`.
    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.boundaries[j - 1], self.boundaries[j])
    }
}

/// `T_j = t0 + j (t_end - t0) / p`.
pub fn partition_uniform(t0: f64, t_end: f64, p: usize) -> Result<TimePartition> {
    if p == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!("t_end {t_end} must exceed t0 {t0}")));
    }
    let span = t_end - t0;
    let mut b: Vec<f64> = (0..=p).map(|j| t0 + j as f64 * span / p as f64).collect();
    b[p] = t_end;
    TimePartition::new(b)
}

/// Uniform output grid over `[t0, t_end]`, closed with `t_end` when `dt`
/// does not divide the span.
pub fn global_grid(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    let mut g = sample_grid(t0, t_end, dt)?;
    if *g.last().unwrap() < t_end {
        g.push(t_end);
    }
    Ok(g)
}

/// Particular solution on one interval: zero start, forcing `g`.
pub fn solve_particular(
    sys: &LinearOdeSystem,
    interval: (f64, f64),
    dt: f64,
    kind: StepperKind,
) -> Result<SampledSolution> {
    let zero = sys.with_u0(vec![0.0; sys.dim()])?;
    integrate(&zero, interval, dt, kind)
}

/// Applies `exp(gap · A)` sample to sample, reusing the dense factor or the
/// Taylor parameters while the gap stays the same.
struct Propagator<'a> {
    a: &'a SparseMatrix,
    cfg: ExpmConfig,
    norm_one: f64,
    dense: Option<(f64, Arc<DMatrix<f64>>)>,
    taylor: TaylorWork,
}

impl<'a> Propagator<'a> {
    fn new(a: &'a SparseMatrix, cfg: ExpmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            a,
            cfg,
            norm_one: a.norm_one(),
            dense: None,
            taylor: TaylorWork::new(a.nrows()),
        })
    }

    fn seeded(mut self, seed: Option<(f64, Arc<DMatrix<f64>>)>) -> Self {
        self.dense = seed;
        self
    }

    fn same_gap(cached: f64, gap: f64) -> bool {
        (gap - cached).abs() <= SNAP_TOLERANCE * cached
    }

    fn advance(&mut self, x: &mut [f64], gap: f64) -> Result<()> {
        match self.cfg {
            ExpmConfig::Dense => {
                let stale = !matches!(&self.dense, Some((g, _)) if Self::same_gap(*g, gap));
                if stale {
                    self.dense = Some((gap, Arc::new(expm_dense(&self.a.to_dense(), gap)?)));
                }
                let e = &self.dense.as_ref().unwrap().1;
                let y = &**e * DVector::from_column_slice(x);
                x.copy_from_slice(y.as_slice());
                Ok(())
            }
            ExpmConfig::Taylor { m, s } => self.taylor.apply(self.a, x, gap, m, s),
            ExpmConfig::TaylorAuto => {
                let (m, s) = taylor_params_for_norm(gap.abs() * self.norm_one);
                self.taylor.apply(self.a, x, gap, m, s)
            }
        }
    }
}

/// Homogeneous solution `w(t) = exp((t - t_start) A) w0` at `out_times`,
/// advanced stepwise `w(t_{k+1}) = exp((t_{k+1} - t_k) A) w(t_k)`.
///
/// The returned solution starts with the sample `(t_start, w0)`.
pub fn propagate_homogeneous(
    a: &SparseMatrix,
    w0: &[f64],
    t_start: f64,
    out_times: &[f64],
    cfg: ExpmConfig,
) -> Result<SampledSolution> {
    propagate_with(Propagator::new(a, cfg)?, w0, t_start, out_times)
}

fn propagate_with(mut prop: Propagator<'_>, w0: &[f64], t_start: f64, out_times: &[f64]) -> Result<SampledSolution> {
    if w0.len() != prop.a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "homogeneous initial state",
            expected: prop.a.ncols(),
            actual: w0.len(),
        });
    }
    let mut times = Vec::with_capacity(out_times.len() + 1);
    times.push(t_start);
    times.extend_from_slice(out_times);
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "output times must be sorted and after the start time".into(),
        ));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut w = w0.to_vec();
    states.push(w.clone());
    for pair in times.windows(2) {
        prop.advance(&mut w, pair[1] - pair[0])?;
        states.push(w.clone());
    }
    SampledSolution::new(times, states)
}

/// Which pieces one worker produced, and how long it took.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerReport {
    /// 1-based worker index `j`.
    pub worker: usize,
    /// Index of the particular solution `v_j` it integrated.
    pub particular: usize,
    /// Index of the homogeneous solution it propagated (`j + 1`, or 1 for `j = p`).
    pub homogeneous: usize,
    pub wall_clock: Duration,
}

#[derive(Debug, Clone)]
pub struct RunMetadata {
    pub stepper: StepperKind,
    pub dt: f64,
    pub expm: ExpmConfig,
    pub workers: Vec<WorkerReport>,
    pub cfl: CflReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ParaexpRun {
    pub partition: TimePartition,
    /// `particular[j-1] = v_j` on `[T_{j-1}, T_j]`.
    pub particular: Vec<SampledSolution>,
    /// `homogeneous[i-1] = w_i` on `[T_{i-1}, T_p]`.
    pub homogeneous: Vec<SampledSolution>,
    pub total: SampledSolution,
    pub metadata: RunMetadata,
}

/// Offset of `sub` inside `global`, requiring bitwise-equal sample times.
fn locate(global: &[f64], sub: &SampledSolution, what: &str) -> Result<usize> {
    let first = *sub
        .times
        .first()
        .ok_or_else(|| Error::GridMismatch(format!("{what} is empty")))?;
    let offset = global
        .binary_search_by(|t| t.total_cmp(&first))
        .map_err(|_| Error::GridMismatch(format!("{what} starts at {first:e}, not a global sample")))?;
    let end = offset + sub.len();
    if end > global.len() || global[offset..end] != sub.times[..] {
        return Err(Error::GridMismatch(format!("{what} does not follow the global grid")));
    }
    Ok(offset)
}

/// `u(t) = v_j(t) + Σ_{i ≤ j} w_i(t)` for `t ∈ I_j`; `t₀` belongs to `I_1`
/// and each `T_j` to `I_j`.
pub fn superpose(
    partition: &TimePartition,
    particular: &[SampledSolution],
    homogeneous: &[SampledSolution],
) -> Result<SampledSolution> {
    let p = partition.p();
    if particular.len() != p || homogeneous.len() != p {
        return Err(Error::GridMismatch(format!(
            "expected {p} particular and homogeneous solutions, got {} and {}",
            particular.len(),
            homogeneous.len()
        )));
    }
    let mut global: Vec<f64> = Vec::new();
    for (j, v) in particular.iter().enumerate() {
        let (lo, hi) = partition.interval(j + 1);
        if v.times.first() != Some(&lo) || v.times.last() != Some(&hi) {
            return Err(Error::GridMismatch(format!("v_{} does not span its interval", j + 1)));
        }
        let skip = usize::from(j > 0);
        global.extend_from_slice(&v.times[skip..]);
    }
    let v_off: Vec<usize> = particular
        .iter()
        .enumerate()
        .map(|(j, v)| locate(&global, v, &format!("v_{}", j + 1)))
        .collect::<Result<_>>()?;
    let w_off: Vec<usize> = homogeneous
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let off = locate(&global, w, &format!("w_{}", i + 1))?;
            if w.times[0] != partition.boundaries()[i] || w.times.last() != Some(&partition.end()) {
                return Err(Error::GridMismatch(format!("w_{} does not span (T_{}, T_p]", i + 1, i)));
            }
            Ok(off)
        })
        .collect::<Result<_>>()?;

    let mut states = Vec::with_capacity(global.len());
    let mut j = 1;
    for (k, &t) in global.iter().enumerate() {
        while t > partition.boundaries()[j] {
            j += 1;
        }
        let mut u = particular[j - 1].states[k - v_off[j - 1]].clone();
        for i in 1..=j {
            let w = &homogeneous[i - 1].states[k - w_off[i - 1]];
            u.iter_mut().zip(w).for_each(|(a, b)| *a += b);
        }
        states.push(u);
    }
    SampledSolution::new(global, states)
}

/// Uniform partition into `p` intervals, then [`paraexp_solve_partition`].
pub fn paraexp_solve(
    sys: &LinearOdeSystem,
    t_end: f64,
    p: usize,
    dt: f64,
    kind: StepperKind,
    cfg: ExpmConfig,
) -> Result<ParaexpRun> {
    let partition = partition_uniform(sys.t0(), t_end, p)?;
    paraexp_solve_partition(sys, &partition, dt, kind, cfg)
}

struct WorkerOutput {
    particular: SampledSolution,
    homogeneous: SampledSolution,
    report: WorkerReport,
}

/// ParaExp on an arbitrary partition with one thread per interval.
///
/// Boundaries within `1e-9 dt` of a grid sample are moved onto it; others
/// are inserted into the output grid as extra samples.
pub fn paraexp_solve_partition(
    sys: &LinearOdeSystem,
    partition: &TimePartition,
    dt: f64,
    kind: StepperKind,
    cfg: ExpmConfig,
) -> Result<ParaexpRun> {
    cfg.validate()?;
    if partition.start() != sys.t0() {
        return Err(Error::InvalidArgument(format!(
            "partition starts at {:e} but the system starts at {:e}",
            partition.start(),
            sys.t0()
        )));
    }
    if kind == StepperKind::Leapfrog && sys.blocks().is_none() {
        return Err(Error::InvalidArgument("leapfrog needs a system with staggered h/e blocks".into()));
    }
    let (grid, partition) = align_partition(partition, dt)?;
    let p = partition.p();
    let bounds: Vec<usize> = partition
        .boundaries()
        .iter()
        .map(|t| grid.binary_search_by(|g| g.total_cmp(t)).expect("boundaries are on the grid"))
        .collect();

    let cfl = cfl_check(sys, dt, kind);
    let mut warnings = Vec::new();
    if cfl.violated() {
        warnings.push(format!(
            "CFL: dt * omega_max = {:.4} exceeds the {} stability limit {:.4}",
            cfl.dt_omega, kind, cfl.limit
        ));
    }

    // the constant-gap dense factor is shared by every worker
    let seed = match cfg {
        ExpmConfig::Dense => Some((dt, Arc::new(expm_dense(&sys.a().to_dense(), dt)?))),
        _ => None,
    };

    let zero = vec![0.0; sys.dim()];
    let outputs: Vec<Result<WorkerOutput>> = thread::scope(|scope| {
        let handles: Vec<_> = (1..=p)
            .map(|j| {
                let (grid, bounds, zero, seed) = (&grid, &bounds, &zero, seed.clone());
                scope.spawn(move || -> Result<WorkerOutput> {
                    let started = Instant::now();
                    let slice = &grid[bounds[j - 1]..=bounds[j]];
                    let v = integrate_on_grid(sys, zero, slice, kind)?;
                    let (w_index, w_start, w0): (usize, usize, StateVector) = if j != p {
                        (j + 1, bounds[j], v.last_state().unwrap().clone())
                    } else {
                        (1, bounds[0], sys.u0().to_vec())
                    };
                    let prop = Propagator::new(sys.a(), cfg)?.seeded(seed);
                    let w = propagate_with(prop, &w0, grid[w_start], &grid[w_start + 1..])?;
                    Ok(WorkerOutput {
                        particular: v,
                        homogeneous: w,
                        report: WorkerReport {
                            worker: j,
                            particular: j,
                            homogeneous: w_index,
                            wall_clock: started.elapsed(),
                        },
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ParaExp worker panicked"))
            .collect()
    });

    let mut particular = Vec::with_capacity(p);
    let mut homogeneous: Vec<Option<SampledSolution>> = vec![None; p];
    let mut workers = Vec::with_capacity(p);
    for (idx, out) in outputs.into_iter().enumerate() {
        let out = out.map_err(|e| Error::Worker {
            worker: idx + 1,
            source: Box::new(e),
        })?;
        particular.push(out.particular);
        homogeneous[out.report.homogeneous - 1] = Some(out.homogeneous);
        workers.push(out.report);
    }
    let homogeneous: Vec<SampledSolution> = homogeneous.into_iter().map(Option::unwrap).collect();
    let total = superpose(&partition, &particular, &homogeneous)?;
    Ok(ParaexpRun {
        partition,
        particular,
        homogeneous,
        total,
        metadata: RunMetadata {
            stepper: kind,
            dt,
            expm: cfg,
            workers,
            cfl,
            warnings,
        },
    })
}

/// Global sample grid plus the partition moved onto it.
fn align_partition(partition: &TimePartition, dt: f64) -> Result<(Vec<f64>, TimePartition)> {
    let mut grid = global_grid(partition.start(), partition.end(), dt)?;
    let mut bounds = partition.boundaries().to_vec();
    let p = partition.p();
    for b in bounds.iter_mut().take(p).skip(1) {
        let k = ((*b - grid[0]) / dt).round() as usize;
        let k = k.min(grid.len() - 1);
        if (grid[k] - *b).abs() <= SNAP_TOLERANCE * dt {
            *b = grid[k];
        } else {
            let pos = grid.partition_point(|t| t < b);
            grid.insert(pos, *b);
        }
    }
    Ok((grid, TimePartition::new(bounds)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linode::{Source, TripletBuilder};

    fn rotation() -> SparseMatrix {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, 1.0);
        b.push(1, 0, -1.0);
        b.build()
    }

    #[test]
    fn uniform_partitions() {
        assert_eq!(partition_uniform(0.0, 3.0, 3).unwrap().boundaries(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(partition_uniform(0.0, 1.0, 1).unwrap().boundaries(), &[0.0, 1.0]);
        let p = partition_uniform(0.0, 6e-8, 3).unwrap();
        let want = [0.0, 2e-8, 4e-8, 6e-8];
        for (a, b) in p.boundaries().iter().zip(want) {
            assert!((a - b).abs() <= 1e-22);
        }
        assert!(partition_uniform(0.0, 1.0, 0).is_err());
        assert!(partition_uniform(1.0, 1.0, 2).is_err());
        assert!(TimePartition::new(vec![0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn particular_solution_examples() {
        let sys = LinearOdeSystem::new(SparseMatrix::zeros(2, 2), Source::zero(), vec![1.0, 2.0], 0.0).unwrap();
        let v = solve_particular(&sys, (1.0, 2.0), 0.25, StepperKind::Rk4).unwrap();
        assert!(v.states.iter().all(|s| s.iter().all(|&x| x == 0.0)));

        let sys = sys.with_source(Source::new(|_, g| {
            g[0] = 3.0;
            g[1] = -1.0;
        }));
        let v = solve_particular(&sys, (1.0, 2.0), 0.25, StepperKind::Rk4).unwrap();
        for (t, s) in v.times.iter().zip(&v.states) {
            assert!((s[0] - 3.0 * (t - 1.0)).abs() < 1e-15);
            assert!((s[1] + (t - 1.0)).abs() < 1e-15);
        }
        assert_eq!(*v.times.last().unwrap(), 2.0);
    }

    #[test]
    fn homogeneous_examples() {
        let a = rotation();
        let times: Vec<f64> = (1..=40).map(|k| k as f64 * 0.1).collect();
        let zero = propagate_homogeneous(&a, &[0.0, 0.0], 0.0, &times, ExpmConfig::Dense).unwrap();
        assert!(zero.states.iter().all(|s| s == &vec![0.0, 0.0]));
        for cfg in [ExpmConfig::Dense, ExpmConfig::TaylorAuto] {
            let w = propagate_homogeneous(&a, &[1.0, 0.0], 0.0, &times, cfg).unwrap();
            assert_eq!(w.len(), 41);
            for (t, s) in w.times.iter().zip(&w.states) {
                assert!((s[0] - t.cos()).abs() < 1e-12, "{cfg}");
                assert!((s[1] + t.sin()).abs() < 1e-12, "{cfg}");
            }
        }
        assert!(propagate_homogeneous(&a, &[1.0, 0.0], 1.0, &[0.5], ExpmConfig::Dense).is_err());
    }

    #[test]
    fn superpose_rejects_foreign_grids() {
        let part = partition_uniform(0.0, 1.0, 1).unwrap();
        let v = SampledSolution::new(vec![0.0, 0.5, 1.0], vec![vec![0.0]; 3]).unwrap();
        let w = SampledSolution::new(vec![0.0, 0.4, 1.0], vec![vec![0.0]; 3]).unwrap();
        assert!(matches!(superpose(&part, std::slice::from_ref(&v), &[w]), Err(Error::GridMismatch(_))));
        assert!(superpose(&part, std::slice::from_ref(&v), std::slice::from_ref(&v)).is_ok());
    }

    #[test]
    fn single_interval_special_cases() {
        let sys = LinearOdeSystem::new(
            rotation(),
            Source::new(|t, g| {
                g[0] = t.sin();
                g[1] = 1.0;
            }),
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let run = paraexp_solve(&sys, 2.0, 1, 0.1, StepperKind::Rk4, ExpmConfig::Dense).unwrap();
        assert_eq!(run.total, run.particular[0]);

        let free = sys.with_source(Source::zero()).with_u0(vec![1.0, 0.5]).unwrap();
        let run = paraexp_solve(&free, 2.0, 1, 0.1, StepperKind::Rk4, ExpmConfig::Dense).unwrap();
        for (t, s) in run.total.times.iter().zip(&run.total.states) {
            let (sn, cs) = t.sin_cos();
            assert!((s[0] - (cs + 0.5 * sn)).abs() < 1e-12);
            assert!((s[1] - (-sn + 0.5 * cs)).abs() < 1e-12);
        }
    }

    #[test]
    fn source_free_total_is_exponential() {
        let mut b = TripletBuilder::new(3, 3);
        for (r, c, v) in [(0, 1, 2.0), (1, 0, -2.0), (1, 2, 0.5), (2, 1, -0.5), (2, 2, -0.1)] {
            b.push(r, c, v);
        }
        let a = b.build();
        let sys = LinearOdeSystem::new(a.clone(), Source::zero(), vec![1.0, -1.0, 0.5], 0.0).unwrap();
        let dense = a.to_dense();
        for p in [1, 2, 3, 5] {
            let run = paraexp_solve(&sys, 3.0, p, 0.05, StepperKind::Rk4, ExpmConfig::Dense).unwrap();
            for (t, s) in run.total.times.iter().zip(&run.total.states) {
                let want = expm_dense(&dense, *t).unwrap() * DVector::from_column_slice(sys.u0());
                let scale = want.amax();
                for k in 0..3 {
                    assert!((s[k] - want[k]).abs() <= 1e-12 * scale, "p={p} t={t}");
                }
            }
            assert!(run.particular.iter().all(|v| v.states.iter().all(|s| s.iter().all(|&x| x == 0.0))));
        }
    }

    #[test]
    fn vanishing_source_on_interval_gives_zero_pieces() {
        // g is supported on [0, 1) only
        let sys = LinearOdeSystem::new(
            rotation(),
            Source::new(|t, g| {
                g[0] = if t < 1.0 { 1.0 } else { 0.0 };
                g[1] = 0.0;
            }),
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        let run = paraexp_solve(&sys, 3.0, 3, 0.1, StepperKind::Rk4, ExpmConfig::TaylorAuto).unwrap();
        for j in [2, 3] {
            assert!(run.particular[j - 1].states.iter().all(|s| s.iter().all(|&x| x == 0.0)));
        }
        assert!(run.homogeneous[2].states.iter().all(|s| s.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn workers_colocate_particular_and_next_homogeneous() {
        let sys = LinearOdeSystem::new(rotation(), Source::new(|t, g| {
            g[0] = t.cos();
            g[1] = 0.0;
        }), vec![1.0, 0.0], 0.0)
        .unwrap();
        let run = paraexp_solve(&sys, 4.0, 4, 0.1, StepperKind::Rk4, ExpmConfig::TaylorAuto).unwrap();
        let w = &run.metadata.workers;
        assert_eq!(w.len(), 4);
        for (j, r) in w.iter().enumerate() {
            assert_eq!(r.worker, j + 1);
            assert_eq!(r.particular, j + 1);
            assert_eq!(r.homogeneous, if j + 1 == 4 { 1 } else { j + 2 });
        }
        assert_eq!(run.homogeneous[0].states[0], vec![1.0, 0.0]);
        assert!(run.particular.iter().all(|v| v.states[0] == vec![0.0, 0.0]));
    }

    #[test]
    fn misaligned_boundaries_are_inserted() {
        let sys = LinearOdeSystem::new(rotation(), Source::new(|_, g| {
            g[0] = 1.0;
            g[1] = 0.0;
        }), vec![0.0, 1.0], 0.0)
        .unwrap();
        let part = TimePartition::new(vec![0.0, 0.33, 1.0]).unwrap();
        let run = paraexp_solve_partition(&sys, &part, 0.1, StepperKind::Rk4, ExpmConfig::Dense).unwrap();
        assert!(run.total.times.contains(&0.33));
        assert_eq!(run.total.len(), 12);
        let reference = paraexp_solve(&sys, 1.0, 1, 0.01, StepperKind::Rk4, ExpmConfig::Dense).unwrap();
        let end = run.total.last_state().unwrap();
        let want = reference.total.last_state().unwrap();
        assert!((end[0] - want[0]).abs() < 1e-6 && (end[1] - want[1]).abs() < 1e-6);
    }

    #[test]
    fn worker_errors_name_the_worker() {
        let sys = LinearOdeSystem::new(
            SparseMatrix::identity(1),
            Source::new(|t, g| g[0] = if t > 1.5 { f64::NAN } else { 0.0 }),
            vec![0.0],
            0.0,
        )
        .unwrap();
        let err = paraexp_solve(&sys, 2.0, 2, 0.1, StepperKind::Rk4, ExpmConfig::Dense).unwrap_err();
        assert!(matches!(err, Error::Worker { worker: 2, .. }), "{err}");
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let sys = LinearOdeSystem::new(rotation(), Source::new(|t, g| {
            g[0] = (3.0 * t).sin();
            g[1] = t;
        }), vec![0.2, 0.1], 0.0)
        .unwrap();
        let a = paraexp_solve(&sys, 5.0, 4, 0.01, StepperKind::Rk4, ExpmConfig::TaylorAuto).unwrap();
        for _ in 0..3 {
            let b = paraexp_solve(&sys, 5.0, 4, 0.01, StepperKind::Rk4, ExpmConfig::TaylorAuto).unwrap();
            assert_eq!(a.total, b.total);
        }
    }
}
