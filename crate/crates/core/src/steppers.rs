//! Fixed-step explicit integrators: classical RK4 and staggered leapfrog.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fitwave::FitOperators;
use crate::linode::{sample_grid, LinearOdeSystem, SampledSolution, StaggeredBlocks, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepperKind {
    Rk4,
    /// Needs a system with [`StaggeredBlocks`].
    Leapfrog,
}

impl fmt::Display for StepperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepperKind::Rk4 => "rk4",
            StepperKind::Leapfrog => "leapfrog",
        })
    }
}

impl FromStr for StepperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(StepperKind::Rk4),
            "leapfrog" => Ok(StepperKind::Leapfrog),
            other => Err(Error::InvalidArgument(format!("unknown stepper '{other}'"))),
        }
    }
}

/// Scratch buffers for repeated RK4 steps on one system.
struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
    scratch: Vec<f64>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            stage: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn step(&mut self, sys: &LinearOdeSystem, u: &mut [f64], t: f64, dt: f64) {
        let half = 0.5 * dt;
        sys.rhs_into(t, u, &mut self.k1, &mut self.scratch);
        axpy_into(&mut self.stage, u, half, &self.k1);
        sys.rhs_into(t + half, &self.stage, &mut self.k2, &mut self.scratch);
        axpy_into(&mut self.stage, u, half, &self.k2);
        sys.rhs_into(t + half, &self.stage, &mut self.k3, &mut self.scratch);
        axpy_into(&mut self.stage, u, dt, &self.k3);
        sys.rhs_into(t + dt, &self.stage, &mut self.k4, &mut self.scratch);
        let w = dt / 6.0;
        for i in 0..u.len() {
            u[i] += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// `out = x + alpha * y`
fn axpy_into(out: &mut [f64], x: &[f64], alpha: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + alpha * yi;
    }
}

/// One classical RK4 step of `u' = A u + g(t)` from `t` to `t + dt`.
pub fn rk4_step(sys: &LinearOdeSystem, u: &[f64], t: f64, dt: f64) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    check_dim(sys, u)?;
    let mut out = u.to_vec();
    Rk4Work::new(u.len()).step(sys, &mut out, t, dt);
    Ok(out)
}

/// One staggered FIT leapfrog cycle.
///
/// Takes `h = h^{n-1/2}` and `e = e^n` and returns `(h^{n+1/2}, e^{n+1})`:
///
/// ```text
/// h^{n+1/2} = h^{n-1/2} - dt M_mu^{-1} C e^n
/// e^{n+1}   = e^n + dt M_eps^{-1} (C~ h^{n+1/2} - j(t + dt/2))
/// ```
///
/// `j` returns the lumped edge currents (length `n_e`). PEC-masked edges are
/// excluded from the curls, so they never move.
pub fn leapfrog_step(
    fit: &FitOperators,
    h: &[f64],
    e: &[f64],
    t: f64,
    dt: f64,
    j: impl Fn(f64) -> Vec<f64>,
) -> Result<(StateVector, StateVector)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let blocks = fit.staggered_blocks();
    if h.len() != blocks.n_h || e.len() != blocks.n_e {
        return Err(Error::DimensionMismatch {
            context: "leapfrog state",
            expected: blocks.n_h + blocks.n_e,
            actual: h.len() + e.len(),
        });
    }
    let curl_e = blocks.a_he.spmv(e)?;
    let h_next: Vec<f64> = h.iter().zip(&curl_e).map(|(hi, ci)| hi + dt * ci).collect();
    let curl_h = blocks.a_eh.spmv(&h_next)?;
    let current = j(t + 0.5 * dt);
    if current.len() != blocks.n_e {
        return Err(Error::DimensionMismatch {
            context: "leapfrog source",
            expected: blocks.n_e,
            actual: current.len(),
        });
    }
    let m_eps = fit.m_eps();
    let e_next = e
        .iter()
        .enumerate()
        .map(|(k, ek)| {
            let drive = if fit.pec_mask()[k] { 0.0 } else { current[k] / m_eps[k] };
            ek + dt * (curl_h[k] - drive)
        })
        .collect();
    Ok((h_next, e_next))
}

/// Whole-step leapfrog state with the half-step magnetic value carried along.
///
/// Chaining `kick(τ/2) · drift(τ) · kick(τ/2)` is the staggered scheme with
/// `h^{1/2}` bootstrapped by a forward-Euler half step and the reported `h`
/// equal to the mean of the two neighbouring half-step values.
struct LeapfrogWork<'a> {
    blocks: &'a StaggeredBlocks,
    kick: Vec<f64>,
    drift: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> LeapfrogWork<'a> {
    fn new(blocks: &'a StaggeredBlocks) -> Self {
        Self {
            blocks,
            kick: vec![0.0; blocks.n_h],
            drift: vec![0.0; blocks.n_e],
            g: vec![0.0; blocks.n_h + blocks.n_e],
        }
    }

    /// `kick = a_he e + g_h(t)`
    fn eval_kick(&mut self, sys: &LinearOdeSystem, e: &[f64], t: f64) {
        self.blocks.a_he.spmv_unchecked(e, &mut self.kick);
        if !sys.source().is_zero() {
            sys.source().eval_into(t, &mut self.g);
            let n_h = self.blocks.n_h;
            self.kick.iter_mut().zip(&self.g[..n_h]).for_each(|(k, g)| *k += g);
        }
    }

    /// Advances `u = [h; e]` by `tau`. `self.kick` must hold the kick at `t`.
    fn step(&mut self, sys: &LinearOdeSystem, u: &mut [f64], t: f64, tau: f64) {
        let n_h = self.blocks.n_h;
        let (h, e) = u.split_at_mut(n_h);
        let half = 0.5 * tau;
        h.iter_mut().zip(&self.kick).for_each(|(hi, k)| *hi += half * k);

        self.blocks.a_eh.spmv_unchecked(h, &mut self.drift);
        if !sys.source().is_zero() {
            sys.source().eval_into(t + half, &mut self.g);
            self.drift.iter_mut().zip(&self.g[n_h..]).for_each(|(d, g)| *d += g);
        }
        e.iter_mut().zip(&self.drift).for_each(|(ei, d)| *ei += tau * d);

        self.eval_kick(sys, e, t + tau);
        h.iter_mut().zip(&self.kick).for_each(|(hi, k)| *hi += half * k);
    }
}

fn check_dim(sys: &LinearOdeSystem, u: &[f64]) -> Result<()> {
    if u.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "stepper state",
            expected: sys.dim(),
            actual: u.len(),
        });
    }
    Ok(())
}

/// Integrates from `sys.u0` over `(t_a, t_b]` with step `dt`, sampling on
/// [`sample_grid`]. A trailing partial step lands exactly on `t_b`.
pub fn integrate(
    sys: &LinearOdeSystem,
    interval: (f64, f64),
    dt: f64,
    kind: StepperKind,
) -> Result<SampledSolution> {
    let (t_a, t_b) = interval;
    let mut times = sample_grid(t_a, t_b, dt)?;
    if *times.last().unwrap() < t_b {
        times.push(t_b);
    }
    integrate_on_grid(sys, sys.u0(), &times, kind)
}

/// Integrates from `u_start` at `times[0]`, taking one step between each pair
/// of consecutive sample times.
pub fn integrate_on_grid(
    sys: &LinearOdeSystem,
    u_start: &[f64],
    times: &[f64],
    kind: StepperKind,
) -> Result<SampledSolution> {
    check_dim(sys, u_start)?;
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty sample grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut u = u_start.to_vec();
    states.push(u.clone());
    match kind {
        StepperKind::Rk4 => {
            let mut work = Rk4Work::new(u.len());
            for (k, w) in times.windows(2).enumerate() {
                work.step(sys, &mut u, w[0], w[1] - w[0]);
                ensure_finite(&u, k + 1, w[1])?;
                states.push(u.clone());
            }
        }
        StepperKind::Leapfrog => {
            let blocks = sys.blocks().ok_or_else(|| {
                Error::InvalidArgument("leapfrog needs a system with staggered h/e blocks".into())
            })?;
            let mut work = LeapfrogWork::new(blocks);
            work.eval_kick(sys, &u[blocks.n_h..], times[0]);
            for (k, w) in times.windows(2).enumerate() {
                work.step(sys, &mut u, w[0], w[1] - w[0]);
                ensure_finite(&u, k + 1, w[1])?;
                states.push(u.clone());
            }
        }
    }
    SampledSolution::new(times.to_vec(), states)
}

fn ensure_finite(u: &[f64], step: usize, time: f64) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { step, time })
    }
}

/// Largest |eigenvalue| of `A`, estimated by power iteration on `A²`.
///
/// For the FIT operator the spectrum is `±iω`, so `A²` has the real
/// eigenvalues `-ω²` and the iteration converges to `ω_max²`.
pub fn estimate_omega_max(a: &crate::linode::SparseMatrix, iterations: usize) -> f64 {
    let n = a.nrows();
    if n == 0 || a.nnz() == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start vector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 113) as f64 / 113.0).collect();
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        a.spmv_unchecked(&x, &mut y);
        a.spmv_unchecked(&y, &mut z);
        estimate = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        std::mem::swap(&mut x, &mut z);
    }
    estimate.sqrt()
}

/// Stability bound on `dt · ω_max` along the imaginary axis.
pub fn stability_limit(kind: StepperKind) -> f64 {
    match kind {
        StepperKind::Leapfrog => 2.0,
        StepperKind::Rk4 => 2.0 * std::f64::consts::SQRT_2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CflReport {
    pub omega_max: f64,
    pub dt_omega: f64,
    pub limit: f64,
}

impl CflReport {
    pub fn violated(&self) -> bool {
        self.dt_omega > self.limit
    }
}

/// CFL estimate with 50 power-iteration steps; violations are advisory.
pub fn cfl_check(sys: &LinearOdeSystem, dt: f64, kind: StepperKind) -> CflReport {
    let omega_max = estimate_omega_max(sys.a(), 50);
    CflReport {
        omega_max,
        dt_omega: dt * omega_max,
        limit: stability_limit(kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linode::{Source, SparseMatrix, TripletBuilder};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation() -> SparseMatrix {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, 1.0);
        b.push(1, 0, -1.0);
        b.build()
    }

    #[test]
    fn rk4_constant_source_is_exact() {
        let sys = LinearOdeSystem::new(
            SparseMatrix::zeros(2, 2),
            Source::new(|_, g| {
                g[0] = 2.0;
                g[1] = -0.5;
            }),
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        let u = rk4_step(&sys, &[1.0, 1.0], 0.3, 0.25).unwrap();
        assert_eq!(u, vec![1.5, 0.875]);
    }

    #[test]
    fn rk4_scalar_growth_is_degree_four_taylor() {
        let sys = LinearOdeSystem::new(SparseMatrix::identity(1), Source::zero(), vec![1.0], 0.0).unwrap();
        let u = rk4_step(&sys, &[1.0], 0.0, 0.1).unwrap();
        let taylor: f64 = [1.0, 0.1, 0.005, 0.1f64.powi(3) / 6.0, 0.1f64.powi(4) / 24.0].iter().sum();
        assert!((u[0] - 1.105_170_833_333_333_3).abs() < 1e-15);
        assert!((u[0] - taylor).abs() < 1e-15);
    }

    #[test]
    fn rk4_rotation_is_truncated_series() {
        let sys = LinearOdeSystem::new(rotation(), Source::zero(), vec![1.0, 0.0], 0.0).unwrap();
        let u = rk4_step(&sys, &[1.0, 0.0], 0.0, 0.1).unwrap();
        // [[0,1],[-1,0]]^k [1,0]: [1,0], [0,-1], [-1,0], [0,1], [1,0]
        let h = 0.1f64;
        let want = [1.0 - h * h / 2.0 + h.powi(4) / 24.0, -h + h.powi(3) / 6.0];
        assert!((u[0] - want[0]).abs() < 1e-16);
        assert!((u[1] - want[1]).abs() < 1e-16);
    }

    #[test]
    fn rk4_rejects_nonpositive_step() {
        let sys = LinearOdeSystem::new(SparseMatrix::identity(1), Source::zero(), vec![1.0], 0.0).unwrap();
        assert!(rk4_step(&sys, &[1.0], 0.0, 0.0).is_err());
    }

    /// Dense expansion of one RK4 step for `u' = A u + g(t)`:
    /// `T4(hA) u + h/6 [(I + B + B²/2 + B³/4) g0 + (4I + 2B + B²/2) g_mid + g1]`, `B = hA`.
    fn dense_rk4_oracle(a: &DMatrix<f64>, u: &DVector<f64>, g: [&DVector<f64>; 3], h: f64) -> DVector<f64> {
        let n = a.nrows();
        let i = DMatrix::<f64>::identity(n, n);
        let b = a * h;
        let b2 = &b * &b;
        let b3 = &b2 * &b;
        let b4 = &b3 * &b;
        let t4 = &i + &b + &b2 / 2.0 + &b3 / 6.0 + &b4 / 24.0;
        let p0 = &i + &b + &b2 / 2.0 + &b3 / 4.0;
        let pm = &i * 4.0 + &b * 2.0 + &b2 / 2.0;
        t4 * u + (p0 * g[0] + pm * g[1] + g[2]) * (h / 6.0)
    }

    #[test]
    fn rk4_matches_dense_expansion_with_polynomial_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 5;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let coeffs: Vec<[f64; 4]> = (0..n)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect();
            let poly = move |t: f64, out: &mut [f64]| {
                for (o, c) in out.iter_mut().zip(&coeffs) {
                    *o = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
                }
            };
            let src = Source::new(poly.clone());
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (t, h) = (0.4, 0.3);
            let sys = LinearOdeSystem::new(SparseMatrix::from_dense(&a), src.clone(), u.clone(), 0.0).unwrap();
            let got = rk4_step(&sys, &u, t, h).unwrap();
            let g = |s: f64| DVector::from_vec(src.eval(s, n));
            let want = dense_rk4_oracle(&a, &DVector::from_vec(u), [&g(t), &g(t + h / 2.0), &g(t + h)], h);
            let scale = want.amax();
            for k in 0..n {
                assert!((got[k] - want[k]).abs() <= 1e-12 * scale, "{} vs {}", got[k], want[k]);
            }
        }
    }

    #[test]
    fn integrate_equilibrium() {
        let sys = LinearOdeSystem::new(SparseMatrix::zeros(1, 1), Source::zero(), vec![1.0], 0.0).unwrap();
        let sol = integrate(&sys, (0.0, 1.0), 0.25, StepperKind::Rk4).unwrap();
        assert_eq!(sol.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(sol.states.iter().all(|s| s == &vec![1.0]));
    }

    #[test]
    fn integrate_shortens_last_step() {
        let sys = LinearOdeSystem::new(
            SparseMatrix::zeros(1, 1),
            Source::new(|_, g| g[0] = 1.0),
            vec![0.0],
            0.0,
        )
        .unwrap();
        let sol = integrate(&sys, (0.0, 1.0), 0.3, StepperKind::Rk4).unwrap();
        assert_eq!(sol.times.len(), 5);
        assert_eq!(*sol.times.last().unwrap(), 1.0);
        assert!((sol.last_state().unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_reports_blowup_step() {
        let sys = LinearOdeSystem::new(SparseMatrix::identity(1).scale(1e300), Source::zero(), vec![1.0], 0.0).unwrap();
        let err = integrate(&sys, (0.0, 1.0), 0.1, StepperKind::Rk4).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { step: 1, .. }), "{err}");
    }

    #[test]
    fn leapfrog_requires_blocks() {
        let sys = LinearOdeSystem::new(rotation(), Source::zero(), vec![1.0, 0.0], 0.0).unwrap();
        assert!(integrate(&sys, (0.0, 1.0), 0.1, StepperKind::Leapfrog).is_err());
    }

    #[test]
    fn leapfrog_oscillator_matches_hand_recurrence() {
        // h' = -e, e' = h: the 2x2 harmonic oscillator in staggered form
        let blocks = StaggeredBlocks::new(
            SparseMatrix::identity(1).scale(-1.0),
            SparseMatrix::identity(1),
        )
        .unwrap();
        let sys = LinearOdeSystem::staggered(blocks, Source::zero(), vec![0.0, 1.0], 0.0).unwrap();
        let dt = 0.1;
        let sol = integrate(&sys, (0.0, 0.3), dt, StepperKind::Leapfrog).unwrap();
        // by hand: h_half = h - dt/2 e; e += dt h_half; h = h_half - dt/2 e
        let (mut h, mut e) = (0.0f64, 1.0f64);
        let mut h_half = h - 0.5 * dt * e;
        for n in 1..=3 {
            e += dt * h_half;
            h = h_half - 0.5 * dt * e;
            let next_half = h_half - dt * e;
            assert!((h - 0.5 * (h_half + next_half)).abs() < 1e-16);
            h_half = next_half;
            assert!((sol.states[n][0] - h).abs() < 1e-15);
            assert!((sol.states[n][1] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn cfl_estimate_on_rotation() {
        let sys = LinearOdeSystem::new(rotation().scale(3.0), Source::zero(), vec![0.0, 0.0], 0.0).unwrap();
        let rep = cfl_check(&sys, 0.7, StepperKind::Leapfrog);
        assert!((rep.omega_max - 3.0).abs() < 1e-12);
        assert!(rep.violated());
        assert!(!cfl_check(&sys, 0.7, StepperKind::Rk4).violated());
    }
}
