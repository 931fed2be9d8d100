//! Closed moment dynamics of the charger (mode 1) and battery (mode 2).
//!
//! The eight moments obey a linear inhomogeneous system in the frame
//! rotating at the (resonant) drive frequency. Trajectories start from the
//! two-mode vacuum, where every moment vanishes.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::integrate::{DormandPrince, IntegrateError, Integrator, IntegratorOptions, OdeSystem};
use crate::params::SystemParams;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("invalid sampling request: {0}")]
    InvalidGrid(&'static str),
    #[error("no steady state within horizon t = {t}: residual {residual:e} above {threshold:e}")]
    NoConvergence { t: f64, residual: f64, threshold: f64 },
}

/// The closed set of operator moments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MomentState {
    /// `<m1>`
    pub m1: Complex64,
    /// `<m2>`
    pub m2: Complex64,
    /// `<m1^2>`
    pub m1_sq: Complex64,
    /// `<m2^2>`
    pub m2_sq: Complex64,
    /// `<m1^dag m1>`
    pub n1: f64,
    /// `<m2^dag m2>`
    pub n2: f64,
    /// `<m1 m2>`
    pub m1m2: Complex64,
    /// `<m1^dag m2>`
    pub m1d_m2: Complex64,
}

pub const PACKED_LEN: usize = 14;

impl MomentState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn mean(&self, mode: Mode) -> Complex64 {
        match mode {
            Mode::Charger => self.m1,
            Mode::Battery => self.m2,
        }
    }

    pub fn square(&self, mode: Mode) -> Complex64 {
        match mode {
            Mode::Charger => self.m1_sq,
            Mode::Battery => self.m2_sq,
        }
    }

    pub fn number(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Charger => self.n1,
            Mode::Battery => self.n2,
        }
    }

    pub fn pack(&self, out: &mut [f64]) {
        let c = [self.m1, self.m2, self.m1_sq, self.m2_sq, self.m1m2, self.m1d_m2];
        for (i, z) in c.iter().enumerate() {
            out[2 * i] = z.re;
            out[2 * i + 1] = z.im;
        }
        out[12] = self.n1;
        out[13] = self.n2;
    }

    pub fn unpack(v: &[f64]) -> Self {
        let z = |i: usize| Complex64::new(v[2 * i], v[2 * i + 1]);
        Self { m1: z(0), m2: z(1), m1_sq: z(2), m2_sq: z(3), m1m2: z(4), m1d_m2: z(5), n1: v[12], n2: v[13] }
    }

    pub fn max_abs(&self) -> f64 {
        [self.m1, self.m2, self.m1_sq, self.m2_sq, self.m1m2, self.m1d_m2]
            .iter()
            .map(|z| z.norm())
            .chain([self.n1.abs(), self.n2.abs()])
            .fold(0.0, f64::max)
    }

    /// Largest violation of `n_j >= |<m_j>|^2` (zero when satisfied).
    pub fn cauchy_schwarz_violation(&self) -> f64 {
        let v1 = self.m1.norm_sqr() - self.n1;
        let v2 = self.m2.norm_sqr() - self.n2;
        v1.max(v2).max(0.0)
    }

    /// `(|<m_j^2> - <m_j>^2|, n_j - |<m_j>|^2)` for one mode.
    pub fn gaussian_residuals(&self, mode: Mode) -> (f64, f64) {
        let m = self.mean(mode);
        ((self.square(mode) - m * m).norm(), self.number(mode) - m.norm_sqr())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            m1: self.m1 - o.m1,
            m2: self.m2 - o.m2,
            m1_sq: self.m1_sq - o.m1_sq,
            m2_sq: self.m2_sq - o.m2_sq,
            n1: self.n1 - o.n1,
            n2: self.n2 - o.n2,
            m1m2: self.m1m2 - o.m1m2,
            m1d_m2: self.m1d_m2 - o.m1d_m2,
        }
    }

    /// Component magnitudes in a fixed order, for per-moment comparisons.
    pub fn magnitudes(&self) -> [f64; 8] {
        [
            self.m1.norm(),
            self.m2.norm(),
            self.m1_sq.norm(),
            self.m2_sq.norm(),
            self.n1.abs(),
            self.n2.abs(),
            self.m1m2.norm(),
            self.m1d_m2.norm(),
        ]
    }
}

pub const MOMENT_NAMES: [&str; 8] = ["m1", "m2", "m1_sq", "m2_sq", "n1", "n2", "m1m2", "m1d_m2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Charger,
    Battery,
}

impl Mode {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Mode::Charger),
            2 => Some(Mode::Battery),
            _ => None,
        }
    }
}

/// Time derivative of every moment under a real drive amplitude.
pub fn moment_rhs(s: &MomentState, p: &SystemParams) -> MomentState {
    moment_rhs_driven(s, p, Complex64::new(p.drive_amp(), 0.0), p.kappa() * p.nbar())
}

/// Same equations with a complex drive `Omega e^{i phi}` and an explicit
/// thermal source `kappa nbar`.
pub fn moment_rhs_driven(s: &MomentState, p: &SystemParams, drive: Complex64, source: f64) -> MomentState {
    let a = p.alpha();
    let e = Complex64::from_polar(1.0, p.phase());
    let gl = p.gamma_l() * e;
    let gr = p.gamma_r() * e;
    let gl_conj = p.gamma_l() * e.conj();
    let m1_conj = s.m1.conj();

    let n1_cross = gl * s.m1d_m2 + I * drive * m1_conj;
    let n2_cross = gr * s.m1d_m2.conj();
    MomentState {
        m1: -0.5 * a * s.m1 - gl * s.m2 - I * drive,
        m2: -0.5 * a * s.m2 - gr * s.m1,
        m1_sq: -a * s.m1_sq - 2.0 * gl * s.m1m2 - 2.0 * I * drive * s.m1,
        m2_sq: -a * s.m2_sq - 2.0 * gr * s.m1m2,
        n1: -a * s.n1 - 2.0 * n1_cross.re + source,
        n2: -a * s.n2 - 2.0 * n2_cross.re + source,
        m1m2: -a * s.m1m2 - gr * s.m1_sq - gl * s.m2_sq - I * drive * s.m2,
        m1d_m2: -a * s.m1d_m2 - gr * s.n1 - gl_conj * s.n2 + I * drive.conj() * s.m2,
    }
}

/// The moment system as an [`OdeSystem`] over the packed real vector.
#[derive(Debug, Clone, Copy)]
pub struct MomentSystem {
    pub params: SystemParams,
    pub drive: Complex64,
    pub source: f64,
}

impl MomentSystem {
    pub fn new(params: SystemParams) -> Self {
        Self { params, drive: Complex64::new(params.drive_amp(), 0.0), source: params.kappa() * params.nbar() }
    }

    /// Undriven system with unit thermal source: `n_l(t)` equals `R_l(t)`.
    pub fn thermal_response(params: SystemParams) -> Self {
        Self { params, drive: Complex64::new(0.0, 0.0), source: 1.0 }
    }
}

impl OdeSystem for MomentSystem {
    fn dim(&self) -> usize {
        PACKED_LEN
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let s = MomentState::unpack(y);
        moment_rhs_driven(&s, &self.params, self.drive, self.source).pack(dy);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MomentState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &MomentState)> {
        self.times.last().copied().zip(self.states.last())
    }
}

/// `n` uniformly spaced points on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Result<Vec<f64>, DynamicsError> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(DynamicsError::InvalidGrid("t_end must be positive"));
    }
    if n < 2 {
        return Err(DynamicsError::InvalidGrid("need at least two samples"));
    }
    let dt = t_end / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { t_end } else { i as f64 * dt }).collect())
}

/// Integrates the moment system from vacuum with adaptive Dormand-Prince.
pub fn evolve(
    p: &SystemParams,
    t_end: f64,
    n_samples: usize,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, DynamicsError> {
    let times = uniform_grid(t_end, n_samples)?;
    let integ = DormandPrince::new(IntegratorOptions { rtol, atol, ..Default::default() });
    evolve_on(&MomentSystem::new(*p), &times, &integ)
}

/// Integrates any moment system from vacuum onto the given sample times.
pub fn evolve_on(
    system: &MomentSystem,
    times: &[f64],
    integrator: &dyn Integrator,
) -> Result<Trajectory, DynamicsError> {
    let y0 = [0.0; PACKED_LEN];
    let samples = integrator.integrate(system, 0.0, &y0, times)?;
    Ok(Trajectory { times: times.to_vec(), states: samples.iter().map(|v| MomentState::unpack(v)).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Convergence threshold on `|f(y)|_inf / (alpha |y|_inf)`.
    pub tol: f64,
    /// Longest integration time, in units of `1/alpha`.
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tol: 1e-10, horizon: 1e5, rtol: 1e-12, atol: 1e-16 }
    }
}

/// Integrates from vacuum until the moment residual is negligible.
pub fn steady_from_ode(p: &SystemParams, opts: &SteadyOptions) -> Result<MomentState, DynamicsError> {
    let system = MomentSystem::new(*p);
    let integ = DormandPrince::new(IntegratorOptions { rtol: opts.rtol, atol: opts.atol, ..Default::default() });
    let alpha = p.alpha();
    let chunk = 10.0 / alpha;
    let horizon = opts.horizon / alpha;
    let mut y = [0.0; PACKED_LEN];
    let mut t = 0.0;
    loop {
        let state = MomentState::unpack(&y);
        let residual = moment_rhs(&state, p).max_abs();
        let threshold = opts.tol * alpha * state.max_abs();
        if residual <= threshold || residual == 0.0 {
            return Ok(state);
        }
        if t >= horizon {
            return Err(DynamicsError::NoConvergence { t, residual, threshold });
        }
        let out = integ.integrate(&system, t, &y, &[t + chunk])?;
        y.copy_from_slice(&out[0]);
        t += chunk;
    }
}
