//! Series RLC circuit driven by `U₀ sin(ω₀ t)`:
//! `L i'' + R i' + i/C = U₀ ω₀ cos(ω₀ t)`, `i(0) = 0`, `i'(0) = -U_L0 / L`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linode::{LinearOdeSystem, Source, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlcParams {
    /// Ω
    pub r: f64,
    /// H
    pub l: f64,
    /// F
    pub c: f64,
    /// Source amplitude U₀ (V).
    pub u0_amp: f64,
    /// Source angular frequency ω₀ (1/s).
    pub omega0: f64,
    /// Initial inductor voltage U_L0 (V).
    pub u_l0: f64,
}

impl Default for RlcParams {
    /// U₀ = 10 V, ω₀ = 2000π² 1/s and U_L0 = 12 V with R = 10 Ω, L = 1 mH,
    /// C = 10 µF (underdamped, natural frequency 1e4 1/s).
    fn default() -> Self {
        Self {
            r: 10.0,
            l: 1e-3,
            c: 10e-6,
            u0_amp: 10.0,
            omega0: 2000.0 * PI * PI,
            u_l0: 12.0,
        }
    }
}

impl RlcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !(self.l > 0.0) || !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need R >= 0, L > 0, C > 0 (got R = {}, L = {}, C = {})",
                self.r, self.l, self.c
            )));
        }
        if !self.u0_amp.is_finite() || !self.omega0.is_finite() || !self.u_l0.is_finite() {
            return Err(Error::InvalidArgument("source parameters must be finite".into()));
        }
        Ok(())
    }
}

/// State `[i, i']` with `A = [[0, 1], [-1/(LC), -R/L]]`.
pub fn rlc_system(p: &RlcParams) -> Result<LinearOdeSystem> {
    p.validate()?;
    let mut b = TripletBuilder::new(2, 2);
    b.push(0, 1, 1.0);
    b.push(1, 0, -1.0 / (p.l * p.c));
    b.push(1, 1, -p.r / p.l);
    let (amp, w) = (p.u0_amp * p.omega0 / p.l, p.omega0);
    let source = if amp == 0.0 {
        Source::zero()
    } else {
        Source::new(move |t, g| {
            g[0] = 0.0;
            g[1] = amp * (w * t).cos();
        })
    };
    LinearOdeSystem::new(b.build(), source, vec![0.0, -p.u_l0 / p.l], 0.0)
}

/// Coefficients of `i(t) = a cos ω₀t + b sin ω₀t + e^{-αt}(c₁ cos ω_d t + c₂ sin ω_d t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub omega_d: f64,
    pub c1: f64,
    pub c2: f64,
    pub omega0: f64,
}

impl ClosedForm {
    pub fn new(p: &RlcParams) -> Result<Self> {
        p.validate()?;
        let r_sq = p.r * p.r;
        let bound = 4.0 * p.l / p.c;
        if !(r_sq < bound) {
            return Err(Error::NotUnderdamped { r_sq, bound });
        }
        let w = p.omega0;
        // steady state: X a + Rω b = U₀ω, -Rω a + X b = 0 with X = 1/C - Lω²
        let x = 1.0 / p.c - p.l * w * w;
        let rw = p.r * w;
        let det = x * x + rw * rw;
        let a = p.u0_amp * w * x / det;
        let b = p.u0_amp * w * rw / det;
        let alpha = p.r / (2.0 * p.l);
        let omega_d = (1.0 / (p.l * p.c) - alpha * alpha).sqrt();
        // i(0) = 0 and i'(0) = -U_L0/L
        let c1 = -a;
        let c2 = (-p.u_l0 / p.l - b * w + alpha * c1) / omega_d;
        Ok(Self {
            a,
            b,
            alpha,
            omega_d,
            c1,
            c2,
            omega0: w,
        })
    }

    pub fn current(&self, t: f64) -> f64 {
        let (s0, c0) = (self.omega0 * t).sin_cos();
        let (sd, cd) = (self.omega_d * t).sin_cos();
        self.a * c0 + self.b * s0 + (-self.alpha * t).exp() * (self.c1 * cd + self.c2 * sd)
    }
}

/// Analytic current (A) in the underdamped regime `R² < 4L/C`.
pub fn rlc_closed_form(p: &RlcParams, t: f64) -> Result<f64> {
    Ok(ClosedForm::new(p)?.current(t))
}
