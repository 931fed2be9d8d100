//! Single-mode Gaussian states and the battery figures of merit.
//!
//! Covariance convention: `sigma_lm = <{dr_l, dr_m}>` without the factor
//! one half, so the vacuum has `sigma = I`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::dynamics::{Mode, MomentState};
use crate::params::SystemParams;

/// Slack allowed on `det sigma >= 1` before a state counts as unphysical.
pub const DET_TOL: f64 = 1e-6;
/// Negative ergotropy inside `-ERGOTROPY_CLAMP * omega0` is rounding and clamps to 0.
pub const ERGOTROPY_CLAMP: f64 = 1e-8;
/// Entropy values below this are flushed to 0.
pub const ENTROPY_FLUSH: f64 = 1e-15;
/// Negative coherence inside this window (bits) clamps to 0.
pub const COHERENCE_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermoError {
    #[error("unphysical state: {0}")]
    UnphysicalState(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// Symmetric 2x2 covariance and displacement of one bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianState {
    pub sigma: [[f64; 2]; 2],
    pub disp: [f64; 2],
}

impl GaussianState {
    pub fn vacuum() -> Self {
        GaussianState { sigma: [[1.0, 0.0], [0.0, 1.0]], disp: [0.0, 0.0] }
    }

    /// Displaced thermal state with occupation `nth` about amplitude `alpha`.
    pub fn displaced_thermal(nth: f64, alpha: Complex64) -> Self {
        let v = 2.0 * nth + 1.0;
        let r2 = std::f64::consts::SQRT_2;
        GaussianState { sigma: [[v, 0.0], [0.0, v]], disp: [r2 * alpha.re, r2 * alpha.im] }
    }

    pub fn det(&self) -> f64 {
        self.sigma[0][0] * self.sigma[1][1] - self.sigma[0][1] * self.sigma[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.sigma[0][0] + self.sigma[1][1]
    }

    pub fn disp_sq(&self) -> f64 {
        self.disp[0].powi(2) + self.disp[1].powi(2)
    }

    /// Checks the physicality invariants and returns `det sigma`.
    pub fn check(&self) -> Result<f64, ThermoError> {
        let det = self.det();
        if !(det.is_finite() && self.disp_sq().is_finite()) {
            return Err(ThermoError::UnphysicalState("non-finite covariance".into()));
        }
        if self.sigma[0][0] <= 0.0 || self.sigma[1][1] <= 0.0 {
            return Err(ThermoError::UnphysicalState(format!("non-positive diagonal {:?}", self.sigma)));
        }
        if det < 1.0 - DET_TOL {
            return Err(ThermoError::UnphysicalState(format!("det sigma = {det} < 1")));
        }
        Ok(det)
    }
}

/// Gaussian state of `mode` built from the first and second moments.
pub fn gaussian_from_moments(s: &MomentState, mode: Mode) -> Result<GaussianState, ThermoError> {
    let m = s.mean(mode);
    let sq = s.square(mode) - m * m;
    let n = s.number(mode) - m.norm_sqr();
    let r2 = std::f64::consts::SQRT_2;
    let g = GaussianState {
        sigma: [[2.0 * sq.re + 2.0 * n + 1.0, 2.0 * sq.im], [2.0 * sq.im, -2.0 * sq.re + 2.0 * n + 1.0]],
        disp: [r2 * m.re, r2 * m.im],
    };
    g.check()?;
    Ok(g)
}

/// Mean energy `omega0 (Tr sigma / 4 + |d|^2 / 2)`.
pub fn energy(g: &GaussianState, omega0: f64) -> f64 {
    omega0 * (g.trace() / 4.0 + g.disp_sq() / 2.0)
}

/// Ergotropy `E - omega0 sqrt(det sigma) / 2`.
pub fn ergotropy(g: &GaussianState, omega0: f64) -> Result<f64, ThermoError> {
    let det = g.check()?;
    let w = energy(g, omega0) - omega0 * det.sqrt() / 2.0;
    if w < 0.0 {
        if w < -ERGOTROPY_CLAMP * omega0 {
            return Err(ThermoError::UnphysicalState(format!("negative ergotropy {w}")));
        }
        return Ok(0.0);
    }
    Ok(w)
}

/// `S(x) = (x+1) log2(x+1) - x log2(x)` with `S(0) = 0`.
pub fn bosonic_entropy(x: f64) -> Result<f64, ThermoError> {
    if x.is_nan() || x < 0.0 {
        return Err(ThermoError::DomainError(format!("entropy argument {x} < 0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let s = (x + 1.0) * (x + 1.0).log2() - x * x.log2();
    Ok(if s < ENTROPY_FLUSH { 0.0 } else { s })
}

/// Relative-entropy coherence of a Gaussian state, in bits.
pub fn coherence(g: &GaussianState) -> Result<f64, ThermoError> {
    let det = g.check()?;
    let nbar = (g.trace() + 2.0 * g.disp_sq() - 2.0) / 4.0;
    // det may dip below 1 by rounding inside DET_TOL.
    let nu = ((det.sqrt() - 1.0) / 2.0).max(0.0);
    let c = bosonic_entropy(nbar.max(0.0))? - bosonic_entropy(nu)?;
    if c < 0.0 {
        if c < -COHERENCE_CLAMP {
            return Err(ThermoError::UnphysicalState(format!("negative coherence {c}")));
        }
        return Ok(0.0);
    }
    Ok(c)
}

/// Remote-charging efficiency `E_B / E_C`.
pub fn efficiency_eta(e_b: f64, e_c: f64) -> Result<f64, ThermoError> {
    if e_c == 0.0 {
        return Err(ThermoError::DivisionByZero("charger energy"));
    }
    if e_c < 0.0 {
        return Err(ThermoError::DomainError(format!("charger energy {e_c} < 0")));
    }
    Ok(e_b / e_c)
}

/// Work-extraction ratio `W / E_B`.
pub fn extraction_ratio(w: f64, e_b: f64) -> Result<f64, ThermoError> {
    if !(e_b > 0.0) {
        return Err(ThermoError::DomainError(format!("battery energy {e_b} must be positive")));
    }
    if !(0.0..=e_b).contains(&w) {
        return Err(ThermoError::DomainError(format!("ergotropy {w} outside [0, {e_b}]")));
    }
    Ok(w / e_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub e_b: f64,
    pub e_c: f64,
    pub w: f64,
    pub r: f64,
    pub eta: f64,
    pub c: f64,
}

impl Metrics {
    fn assemble(e_b: f64, e_c: f64, w: f64, c: f64) -> Result<Self, ThermoError> {
        // Rounding can put W a few ulps above E_B only if E_B itself is tiny.
        let w = w.min(e_b);
        Ok(Metrics { e_b, e_c, w, r: extraction_ratio(w, e_b)?, eta: efficiency_eta(e_b, e_c)?, c })
    }
}

/// General path: Gaussian states of both modes, then energy,
/// ergotropy and coherence on the battery.
pub fn metrics_at(s: &MomentState, p: &SystemParams) -> Result<Metrics, ThermoError> {
    let w0 = p.omega0();
    let gc = gaussian_from_moments(s, Mode::Charger)?;
    let gb = gaussian_from_moments(s, Mode::Battery)?;
    Metrics::assemble(energy(&gb, w0), energy(&gc, w0), ergotropy(&gb, w0)?, coherence(&gb)?)
}

/// Shortcut valid for vacuum-initial dynamics, where both modes are
/// displaced thermal states with occupations `kappa nbar R_l`.
pub fn metrics_closed_form(
    m1: Complex64,
    m2: Complex64,
    r1: f64,
    r2: f64,
    p: &SystemParams,
) -> Result<Metrics, ThermoError> {
    let w0 = p.omega0();
    let src = p.kappa() * p.nbar();
    let e_c = w0 * (m1.norm_sqr() + src * r1 + 0.5);
    let e_b = w0 * (m2.norm_sqr() + src * r2 + 0.5);
    let w = w0 * m2.norm_sqr();
    let c = coherence(&GaussianState::displaced_thermal(src * r2, m2))?;
    Metrics::assemble(e_b, e_c, w, c)
}

/// Closed-form metrics at time `t` from vacuum.
pub fn closed_form_metrics_at(p: &SystemParams, t: f64) -> Result<Metrics, ThermoError> {
    let (m1, m2) = analytic::transient_means(p, t)?;
    let (r1, r2) = if p.kappa() * p.nbar() > 0.0 {
        let th = analytic::thermal_responses(p, &[t])?[0];
        (th.r1, th.r2)
    } else {
        (0.0, 0.0)
    };
    metrics_closed_form(m1, m2, r1, r2, p)
}

/// Steady-state metrics from the closed-form steady energies.
pub fn steady_state_metrics(p: &SystemParams) -> Result<Metrics, ThermoError> {
    let rep = analytic::steady_metrics(p)?;
    let nth = p.kappa() * p.nbar() * rep.r2_ss;
    let c = coherence(&GaussianState::displaced_thermal(nth, rep.m2_ss))?;
    Metrics::assemble(rep.battery_energy, rep.charger_energy, rep.ergotropy, c)
}
