//! Adaptive Dormand–Prince 5(4) integration for reference trajectories.
//!
//! Steps are clipped so that every requested output time is hit exactly;
//! the controller's proposed step is kept across the clip.

use crate::error::{Error, Result};
use crate::linode::{LinearOdeSystem, SampledSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Dopri<'a> {
    sys: &'a LinearOdeSystem,
    opts: AdaptiveOptions,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Dopri<'a> {
    fn new(sys: &'a LinearOdeSystem, opts: AdaptiveOptions) -> Self {
        let n = sys.dim();
        Self {
            sys,
            opts,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            y_new: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn rms_scaled(&self, v: &[f64], y: &[f64], y2: &[f64]) -> f64 {
        let n = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(y)
            .zip(y2)
            .map(|((vi, a), b)| {
                let sc = self.opts.atol + self.opts.rtol * a.abs().max(b.abs());
                (vi / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    /// Initial step after Hairer, Nørsett & Wanner. Expects `k[0] = f(t, y)`.
    fn initial_step(&mut self, t: f64, y: &[f64], span: f64) -> f64 {
        let d0 = self.rms_scaled(y, y, y);
        let d1 = self.rms_scaled(&self.k[0], y, y);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        for i in 0..y.len() {
            self.stage[i] = y[i] + h0 * self.k[0][i];
        }
        let (stage, k1) = (&self.stage, &mut self.k[1]);
        self.sys.rhs_into(t + h0, stage, k1, &mut self.scratch);
        let diff: Vec<f64> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.rms_scaled(&diff, y, y) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Attempts one step; returns the scaled error norm. `k[0]` holds `f(t, y)`.
    fn attempt(&mut self, t: f64, y: &[f64], h: f64) -> f64 {
        let n = y.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in self.k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                self.stage[i] = y[i] + h * acc;
            }
            let (stage, ks) = (&self.stage, &mut self.k[s]);
            self.sys.rhs_into(t + C[s] * h, stage, ks, &mut self.scratch);
        }
        // stage 7 was evaluated at the fifth-order solution
        self.y_new.copy_from_slice(&self.stage);
        let mut err = vec![0.0; n];
        for (i, e) in err.iter_mut().enumerate() {
            *e = h * self.k.iter().zip(E).map(|(kj, ej)| ej * kj[i]).sum::<f64>();
        }
        self.rms_scaled(&err, y, &self.y_new)
    }
}

/// Integrates `sys` from `sys.u0()` at `times[0]` and returns the states at
/// every entry of `times`.
pub fn dormand_prince(sys: &LinearOdeSystem, times: &[f64], opts: &AdaptiveOptions) -> Result<SampledSolution> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty output grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("output times must be strictly increasing".into()));
    }
    if !(opts.rtol > 0.0) || !(opts.atol >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let mut dp = Dopri::new(sys, *opts);
    let mut y = sys.u0().to_vec();
    let mut t = times[0];
    let mut states = Vec::with_capacity(times.len());
    states.push(y.clone());
    if times.len() == 1 {
        return SampledSolution::new(times.to_vec(), states);
    }
    let span = times[times.len() - 1] - t;
    {
        let (k0, scratch) = (&mut dp.k[0], &mut dp.scratch);
        sys.rhs_into(t, &y, k0, scratch);
    }
    let mut h = dp.initial_step(t, &y, span);
    let mut steps = 0usize;
    for &target in &times[1..] {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::InvalidArgument(format!(
                    "adaptive integration exceeded {} steps",
                    opts.max_steps
                )));
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let h_try = if clipped { remaining } else { h };
            if h_try <= 16.0 * f64::EPSILON * t.abs().max(span) {
                return Err(Error::StepSizeUnderflow { time: t, step: h_try });
            }
            let err = dp.attempt(t, &y, h_try);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if clipped { target } else { t + h_try };
                std::mem::swap(&mut y, &mut dp.y_new);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { step: steps, time: t });
                }
                // first-same-as-last
                let last = std::mem::take(&mut dp.k[6]);
                dp.k[6] = std::mem::replace(&mut dp.k[0], last);
                // a clipped step does not shrink the controller's proposal
                h = if clipped { h.max(h_try * factor) } else { h_try * factor };
            } else {
                h = h_try * factor.min(1.0);
            }
        }
        states.push(y.clone());
    }
    SampledSolution::new(times.to_vec(), states)
}
