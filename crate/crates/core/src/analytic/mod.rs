//! Closed-form transient and steady-state solutions of the moment system.
//!
//! First moments follow from a two-pole Laplace transform. The thermal
//! part of the occupations, `R_l(t)`, is the inverse transform of a
//! fifth-order rational function evaluated by residues. Everything here is
//! `pi`-periodic in the propagation phase, since only `e^{2 i k0 d}` enters
//! the observables.

pub mod residue;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, Mode, MomentState, MomentSystem, Trajectory};
use crate::integrate::{DormandPrince, IntegratorOptions};
use crate::params::SystemParams;
use residue::{group_roots, inverse_laplace, min_separation, Pole, Poly};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Pole separations below this fraction of `alpha` are treated as exact
/// coincidences (confluent formulas, merged residues).
pub const DEGENERACY_EPS: f64 = 1e-8;
/// Relative size of `zeta` (or of the thermal denominator) below which no
/// unique steady state exists.
pub const UNDEFINED_EPS: f64 = 1e-10;
/// Distinct thermal poles closer than this fraction of `alpha` make the
/// residue sum ill-conditioned; the ODE route is used instead.
pub const AMBIGUOUS_SEPARATION: f64 = 1e-2;
/// Largest tolerated imaginary residue of a real quantity, relative to its scale.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Degeneracy {
    /// `zeta = alpha^2 - 4 Gamma_L Gamma_R e^{2 i k0 d}` vanishes.
    DarkMode,
    /// `xi^2 - 4 Gamma_L^2 Gamma_R^2` vanishes.
    ThermalDarkMode,
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Degeneracy::DarkMode => write!(
                f,
                "dark mode: zeta = alpha^2 - 4 Gamma_L Gamma_R e^(2i k0 d) vanishes \
                 (kappa = 0, Gamma_L = Gamma_R, k0 d = 0 mod pi)"
            ),
            Degeneracy::ThermalDarkMode => write!(
                f,
                "thermal dark mode: xi^2 - 4 Gamma_L^2 Gamma_R^2 vanishes \
                 (kappa = 0, Gamma_L = Gamma_R, k0 d = 0 mod pi)"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("steady state undefined: {0}")]
    SteadyStateUndefined(Degeneracy),
    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("{quantity} has imaginary part {imag:e} against scale {scale:e}")]
    Inconsistent { quantity: &'static str, imag: f64, scale: f64 },
    #[error(transparent)]
    Ode(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstMomentPoles {
    pub s_plus: Complex64,
    pub s_minus: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalPoleSet {
    pub poles: Vec<Pole>,
}

impl Serialize for Pole {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Pole", 2)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("multiplicity", &self.multiplicity)?;
        st.end()
    }
}

/// Steady-state quantities in closed form; energies in units of `omega0`
/// multiplied by `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyReport {
    pub m1_ss: Complex64,
    pub m2_ss: Complex64,
    pub charger_energy: f64,
    pub battery_energy: f64,
    pub ergotropy: f64,
    pub r1_ss: f64,
    pub r2_ss: f64,
    pub zeta: Complex64,
    pub xi: f64,
}

fn phase_factor(p: &SystemParams) -> Complex64 {
    Complex64::from_polar(1.0, p.phase())
}

/// `zeta = alpha^2 - 4 Gamma_L Gamma_R e^{2 i k0 d}`.
pub fn zeta(p: &SystemParams) -> Complex64 {
    let a = p.alpha();
    a * a - 4.0 * p.gamma_l() * p.gamma_r() * Complex64::from_polar(1.0, 2.0 * p.phase())
}

/// `xi = alpha^2 - 2 Gamma_L Gamma_R cos(2 k0 d)`.
pub fn xi(p: &SystemParams) -> f64 {
    let a = p.alpha();
    a * a - 2.0 * p.gamma_l() * p.gamma_r() * (2.0 * p.phase()).cos()
}

fn thermal_denominator(p: &SystemParams) -> f64 {
    let x = xi(p);
    let g = p.gamma_l() * p.gamma_r();
    x * x - 4.0 * g * g
}

fn check_mean_defined(p: &SystemParams) -> Result<Complex64, AnalyticError> {
    let z = zeta(p);
    if z.norm() < UNDEFINED_EPS * p.alpha().powi(2) {
        return Err(AnalyticError::SteadyStateUndefined(Degeneracy::DarkMode));
    }
    Ok(z)
}

fn check_thermal_defined(p: &SystemParams) -> Result<f64, AnalyticError> {
    let d = thermal_denominator(p);
    if d.abs() < UNDEFINED_EPS * p.alpha().powi(4) {
        return Err(AnalyticError::SteadyStateUndefined(Degeneracy::ThermalDarkMode));
    }
    Ok(d)
}

/// `s_pm = -(alpha/2 pm sqrt(Gamma_L Gamma_R e^{2 i k0 d}))`, principal root.
pub fn first_moment_poles(p: &SystemParams) -> FirstMomentPoles {
    let root = (p.gamma_l() * p.gamma_r() * Complex64::from_polar(1.0, 2.0 * p.phase())).sqrt();
    let half = 0.5 * p.alpha();
    FirstMomentPoles { s_plus: -(half + root), s_minus: -(half - root) }
}

/// Mean amplitudes `(<m1>(t), <m2>(t))` from vacuum.
pub fn transient_means(p: &SystemParams, t: f64) -> Result<(Complex64, Complex64), AnalyticError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(AnalyticError::InvalidTime(t));
    }
    check_mean_defined(p)?;
    if t == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
    }
    let FirstMomentPoles { s_plus: sp, s_minus: sm } = first_moment_poles(p);
    let half = 0.5 * p.alpha();
    let drive = p.drive_amp();
    let k2 = I * drive * p.gamma_r() * phase_factor(p);

    if (sp - sm).norm() < DEGENERACY_EPS * p.alpha() {
        // Double pole at s0: residues of F(s) e^{st} / (s (s - s0)^2).
        let s0 = 0.5 * (sp + sm);
        let e = (s0 * t).exp();
        let g = s0 + half;
        let m1 = -I * drive * (half / (s0 * s0) + e * ((1.0 + g * t) / s0 - g / (s0 * s0)));
        let m2 = k2 * (1.0 / (s0 * s0) + e * (t / s0 - 1.0 / (s0 * s0)));
        return Ok((m1, m2));
    }

    let ep = (sp * t).exp();
    let em = (sm * t).exp();
    let prod = sp * sm;
    let m1 = -I * drive * (half / prod + (sp + half) * ep / (sp * (sp - sm)) + (sm + half) * em / (sm * (sm - sp)));
    let m2 = k2 * (1.0 / prod + ep / (sp * (sp - sm)) + em / (sm * (sm - sp)));
    Ok((m1, m2))
}

/// Long-time mean amplitudes.
pub fn steady_means(p: &SystemParams) -> Result<(Complex64, Complex64), AnalyticError> {
    let z = check_mean_defined(p)?;
    let drive = p.drive_amp();
    let m1 = -2.0 * I * drive * p.alpha() / z;
    let m2 = 4.0 * I * drive * p.gamma_r() * phase_factor(p) / z;
    Ok((m1, m2))
}

/// Poles of the thermal transfer functions, coincident roots merged
/// within `group_tol * alpha`.
pub fn thermal_pole_set(p: &SystemParams, group_tol: f64) -> ThermalPoleSet {
    let a = p.alpha();
    let g = 2.0 * p.gamma_l() * p.gamma_r();
    let c = (2.0 * p.phase()).cos();
    let r_plus = Complex64::new(g * (c + 1.0), 0.0).sqrt();
    let r_minus = Complex64::new(g * (c - 1.0), 0.0).sqrt();
    let roots = [Complex64::new(0.0, 0.0), -a + r_plus, -a + r_minus, -a - r_plus, -a - r_minus];
    ThermalPoleSet { poles: group_roots(&roots, group_tol * a) }
}

fn shifted_quadratic(p: &SystemParams, gamma_sq: f64) -> Poly {
    // (s + alpha)^2 - 2 Gamma_L Gamma_R cos(2 k0 d) + 2 gamma^2
    let a = p.alpha();
    let c = 2.0 * p.gamma_l() * p.gamma_r() * (2.0 * p.phase()).cos();
    Poly::real(&[a * a - c + 2.0 * gamma_sq, 2.0 * a, 1.0])
}

fn weight_numerator(p: &SystemParams, mode: Mode) -> Poly {
    let g = match mode {
        Mode::Charger => p.gamma_l(),
        Mode::Battery => p.gamma_r(),
    };
    Poly::real(&[p.alpha(), 1.0]).mul(&shifted_quadratic(p, g * g))
}

// Thermal part of <m1^dag m2> per unit source: the (s + alpha) factor of
// the weights cancels against its own equation of motion.
fn cross_numerator(p: &SystemParams) -> Poly {
    let e = phase_factor(p);
    let q1 = shifted_quadratic(p, p.gamma_l().powi(2));
    let q2 = shifted_quadratic(p, p.gamma_r().powi(2));
    q1.scale(-p.gamma_r() * e).add(&q2.scale(-p.gamma_l() * e.conj()))
}

fn realify(v: Complex64, scale: f64, quantity: &'static str) -> Result<f64, AnalyticError> {
    if v.im.abs() > IMAG_TOL * scale.max(v.re.abs()) {
        return Err(AnalyticError::Inconsistent { quantity, imag: v.im, scale });
    }
    Ok(v.re)
}

/// Thermal response at one time: `(R_1, R_2, X)` with `X` the thermal part
/// of `<m1^dag m2>`, all per unit `kappa nbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalResponse {
    pub r1: f64,
    pub r2: f64,
    pub cross: Complex64,
}

impl ThermalResponse {
    pub fn weight(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Charger => self.r1,
            Mode::Battery => self.r2,
        }
    }
}

fn poles_are_ambiguous(poles: &[Pole], alpha: f64) -> bool {
    min_separation(poles) < AMBIGUOUS_SEPARATION * alpha
}

/// Thermal responses on a time grid, by residues unless the pole geometry
/// is ill-conditioned, in which case the undriven moment ODE is integrated.
pub fn thermal_responses(p: &SystemParams, times: &[f64]) -> Result<Vec<ThermalResponse>, AnalyticError> {
    if let Some(&bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(AnalyticError::InvalidTime(bad));
    }
    check_thermal_defined(p)?;
    let poles = thermal_pole_set(p, DEGENERACY_EPS).poles;
    if poles_are_ambiguous(&poles, p.alpha()) {
        return thermal_responses_ode(p, times);
    }
    let n1 = weight_numerator(p, Mode::Charger);
    let n2 = weight_numerator(p, Mode::Battery);
    let nx = cross_numerator(p);
    let scale = 1.0 / p.alpha();
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(ThermalResponse { r1: 0.0, r2: 0.0, cross: Complex64::new(0.0, 0.0) });
            }
            Ok(ThermalResponse {
                r1: realify(inverse_laplace(&n1, &poles, t), scale, "R_1(t)")?,
                r2: realify(inverse_laplace(&n2, &poles, t), scale, "R_2(t)")?,
                cross: inverse_laplace(&nx, &poles, t),
            })
        })
        .collect()
}

/// ODE route for the thermal responses: undriven moments with unit source.
pub fn thermal_responses_ode(p: &SystemParams, times: &[f64]) -> Result<Vec<ThermalResponse>, AnalyticError> {
    let mut sorted: Vec<(usize, f64)> = times.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let grid: Vec<f64> = sorted.iter().map(|x| x.1).collect();
    let integ = DormandPrince::new(IntegratorOptions { rtol: 1e-12, atol: 1e-16, ..Default::default() });
    let tr = dynamics::evolve_on(&MomentSystem::thermal_response(*p), &grid, &integ)?;
    let mut out = vec![ThermalResponse { r1: 0.0, r2: 0.0, cross: Complex64::new(0.0, 0.0) }; times.len()];
    for ((idx, _), s) in sorted.iter().zip(&tr.states) {
        out[*idx] = ThermalResponse { r1: s.n1, r2: s.n2, cross: s.m1d_m2 };
    }
    Ok(out)
}

/// `R_l(t)`: thermal occupation of mode `l` per unit `kappa nbar`.
pub fn thermal_weight(p: &SystemParams, mode: Mode, t: f64) -> Result<f64, AnalyticError> {
    Ok(thermal_responses(p, &[t])?[0].weight(mode))
}

/// Long-time limit `R_{l,ss}`.
pub fn thermal_weight_ss(p: &SystemParams, mode: Mode) -> Result<f64, AnalyticError> {
    let den = check_thermal_defined(p)?;
    let g = match mode {
        Mode::Charger => p.gamma_l(),
        Mode::Battery => p.gamma_r(),
    };
    Ok(p.alpha() * (xi(p) + 2.0 * g * g) / den)
}

/// Long-time thermal part of `<m1^dag m2>` per unit `kappa nbar`.
pub fn thermal_cross_ss(p: &SystemParams) -> Result<Complex64, AnalyticError> {
    let r1 = thermal_weight_ss(p, Mode::Charger)?;
    let r2 = thermal_weight_ss(p, Mode::Battery)?;
    let e = phase_factor(p);
    Ok(-(p.gamma_r() * e * r1 + p.gamma_l() * e.conj() * r2) / p.alpha())
}

/// Closed-form steady energies, ergotropy and the auxiliary quantities.
pub fn steady_metrics(p: &SystemParams) -> Result<SteadyReport, AnalyticError> {
    let z = check_mean_defined(p)?;
    let den = check_thermal_defined(p)?;
    let (m1_ss, m2_ss) = steady_means(p)?;
    let (a, gl, gr, w0) = (p.alpha(), p.gamma_l(), p.gamma_r(), p.omega0());
    let x = xi(p);
    let drive_sq = p.drive_amp().powi(2);
    let thermal = p.kappa() * p.nbar() * a;
    let z2 = z.norm_sqr();
    let ergotropy = 16.0 * w0 * drive_sq * gr * gr / z2;
    Ok(SteadyReport {
        m1_ss,
        m2_ss,
        charger_energy: w0 * (4.0 * drive_sq * a * a / z2 + thermal * (x + 2.0 * gl * gl) / den + 0.5),
        battery_energy: w0 * (16.0 * drive_sq * gr * gr / z2 + thermal * (x + 2.0 * gr * gr) / den + 0.5),
        ergotropy,
        r1_ss: thermal_weight_ss(p, Mode::Charger)?,
        r2_ss: thermal_weight_ss(p, Mode::Battery)?,
        zeta: z,
        xi: x,
    })
}

/// All eight long-time moments in closed form.
pub fn steady_moments(p: &SystemParams) -> Result<MomentState, AnalyticError> {
    let (m1, m2) = steady_means(p)?;
    let src = p.kappa() * p.nbar();
    let r1 = thermal_weight_ss(p, Mode::Charger)?;
    let r2 = thermal_weight_ss(p, Mode::Battery)?;
    Ok(gaussian_moments(m1, m2, src, ThermalResponse { r1, r2, cross: thermal_cross_ss(p)? }))
}

fn gaussian_moments(m1: Complex64, m2: Complex64, source: f64, th: ThermalResponse) -> MomentState {
    MomentState {
        m1,
        m2,
        m1_sq: m1 * m1,
        m2_sq: m2 * m2,
        n1: m1.norm_sqr() + source * th.r1,
        n2: m2.norm_sqr() + source * th.r2,
        m1m2: m1 * m2,
        m1d_m2: m1.conj() * m2 + source * th.cross,
    }
}

/// Full moment state at time `t` from the closed forms.
pub fn moments_at(p: &SystemParams, t: f64) -> Result<MomentState, AnalyticError> {
    Ok(analytic_trajectory(p, &[t])?.states[0])
}

/// Closed-form trajectory on an arbitrary time grid.
pub fn analytic_trajectory(p: &SystemParams, times: &[f64]) -> Result<Trajectory, AnalyticError> {
    let source = p.kappa() * p.nbar();
    let thermal = if source > 0.0 {
        thermal_responses(p, times)?
    } else {
        vec![ThermalResponse { r1: 0.0, r2: 0.0, cross: Complex64::new(0.0, 0.0) }; times.len()]
    };
    let states = times
        .iter()
        .zip(thermal)
        .map(|(&t, th)| {
            let (m1, m2) = transient_means(p, t)?;
            Ok(gaussian_moments(m1, m2, source, th))
        })
        .collect::<Result<Vec<_>, AnalyticError>>()?;
    Ok(Trajectory { times: times.to_vec(), states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(gl: f64, gr: f64, kappa: f64, nbar: f64, drive: f64, phase: f64) -> SystemParams {
        SystemParams::from_rates(1.0, gl, gr, kappa, nbar, drive, phase).unwrap()
    }

    fn unordered_eq(a: FirstMomentPoles, x: Complex64, y: Complex64, tol: f64) -> bool {
        let d1 = (a.s_plus - x).norm().max((a.s_minus - y).norm());
        let d2 = (a.s_plus - y).norm().max((a.s_minus - x).norm());
        d1.min(d2) < tol
    }

    #[test]
    fn pole_examples() {
        let p = params(0.8, 0.8, 0.0, 0.0, 0.1, 0.0);
        assert!(unordered_eq(first_moment_poles(&p), Complex64::new(-1.6, 0.0), Complex64::new(0.0, 0.0), 1e-15));

        let p = params(0.0, 0.8, 0.1, 0.0, 0.1, 0.3);
        let fp = first_moment_poles(&p);
        assert_eq!(fp.s_plus, fp.s_minus);
        assert_relative_eq!(fp.s_plus.re, -0.45, epsilon = 1e-15);

        let p = params(1.0, 1.0, 0.1, 0.0, 0.1, PI / 4.0);
        let r = Complex64::new(1.0, 1.0) / 2f64.sqrt();
        assert!(unordered_eq(first_moment_poles(&p), -1.05 - r, -1.05 + r, 1e-14));
        let fp = first_moment_poles(&p);
        assert_relative_eq!((fp.s_plus + fp.s_minus).re, -p.alpha(), epsilon = 1e-14);
    }

    #[test]
    fn transient_boundaries() {
        let p = params(0.3, 0.9, 0.07, 0.0, 0.2, 0.6);
        let (m1, m2) = transient_means(&p, 0.0).unwrap();
        assert!(m1.norm() < 1e-15 && m2.norm() < 1e-15);
        let (s1, s2) = steady_means(&p).unwrap();
        let (m1, m2) = transient_means(&p, 400.0 / p.alpha()).unwrap();
        assert!((m1 - s1).norm() < 1e-12 * s1.norm());
        assert!((m2 - s2).norm() < 1e-12 * s2.norm());
        assert_eq!(transient_means(&p, -1.0), Err(AnalyticError::InvalidTime(-1.0)));
    }

    #[test]
    fn confluent_limit_is_continuous() {
        // Gamma_L -> 0 approaches the double pole from both sides of the switch.
        let t = 3.0;
        let exact = transient_means(&params(0.0, 1.0, 0.1, 0.0, 0.3, 0.4), t).unwrap();
        let near = transient_means(&params(1e-12, 1.0, 0.1, 0.0, 0.3, 0.4), t).unwrap();
        let above = transient_means(&params(1e-6, 1.0, 0.1, 0.0, 0.3, 0.4), t).unwrap();
        assert!((exact.0 - near.0).norm() < 1e-10);
        assert!((exact.1 - near.1).norm() < 1e-10);
        assert!((exact.1 - above.1).norm() < 1e-5);
    }

    #[test]
    fn steady_mean_examples() {
        let p = params(0.3, 0.9, 0.07, 0.0, 0.0, 0.6);
        assert_eq!(steady_means(&p).unwrap(), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));

        let p = SystemParams::canonical_set(1.0).unwrap();
        let (m1, m2) = steady_means(&p).unwrap();
        let a = p.alpha();
        assert_relative_eq!(m2.re, -4.0 * p.drive_amp() * p.gamma_r() / (a * a), max_relative = 1e-14);
        assert!(m2.im.abs() < 1e-12);
        assert_relative_eq!(m2.norm(), 6.530612244897959, max_relative = 1e-12);
        assert_relative_eq!(m1.norm(), 3.428571428571429, max_relative = 1e-12);
    }

    #[test]
    fn dark_mode_is_rejected() {
        let p = params(1.0, 1.0, 0.0, 0.1, 0.1, 0.0);
        let e = Err(AnalyticError::SteadyStateUndefined(Degeneracy::DarkMode));
        assert_eq!(steady_means(&p), e);
        assert_eq!(transient_means(&p, 1.0), e);
        assert!(matches!(steady_metrics(&p), Err(AnalyticError::SteadyStateUndefined(_))));
        assert_eq!(
            thermal_weight_ss(&p, Mode::Battery),
            Err(AnalyticError::SteadyStateUndefined(Degeneracy::ThermalDarkMode))
        );
        // pi shift is the same physical point.
        assert!(steady_means(&p.with_phase(PI).unwrap()).is_err());
    }

    fn multiplicities(set: &ThermalPoleSet) -> Vec<(f64, f64, usize)> {
        let mut v: Vec<_> = set.poles.iter().map(|p| (p.value.re, p.value.im, p.multiplicity)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn thermal_pole_examples() {
        let p = params(0.0, 1.0, 0.1, 0.0, 0.0, 0.7);
        assert_eq!(multiplicities(&thermal_pole_set(&p, 1e-8)), vec![(-1.1, 0.0, 4), (0.0, 0.0, 1)]);

        let g = 0.5;
        let p = params(g, g, 0.1, 0.0, 0.0, PI / 2.0);
        let m = multiplicities(&thermal_pole_set(&p, 1e-8));
        let a = p.alpha();
        assert_eq!(m.len(), 4);
        assert_eq!(m.iter().map(|x| x.2).sum::<usize>(), 5);
        assert!(m.iter().any(|x| (x.0 + a).abs() < 1e-12 && x.1.abs() < 1e-12 && x.2 == 2));
        assert!(m.iter().any(|x| (x.0 + a).abs() < 1e-12 && (x.1 - 2.0 * g).abs() < 1e-12));
        assert!(m.iter().any(|x| (x.0 + a).abs() < 1e-12 && (x.1 + 2.0 * g).abs() < 1e-12));

        let p = params(g, g, 0.1, 0.0, 0.0, 0.0);
        let m = multiplicities(&thermal_pole_set(&p, 1e-8));
        assert_eq!(m.len(), 4);
        assert!(m.iter().any(|x| (x.0 - (-a - 2.0 * g)).abs() < 1e-12 && x.2 == 1));
        assert!(m.iter().any(|x| (x.0 - (-a + 2.0 * g)).abs() < 1e-12 && x.2 == 1));
        assert!(m.iter().any(|x| (x.0 + a).abs() < 1e-12 && x.2 == 2));
    }

    #[test]
    fn thermal_weight_uncoupled() {
        let kappa = 0.3;
        let p = params(0.0, 0.0, kappa, 0.2, 0.0, 0.0);
        for t in [0.0, 0.5, 4.0, 20.0] {
            let exact = (1.0 - (-kappa * t).exp()) / kappa;
            for mode in [Mode::Charger, Mode::Battery] {
                let r = thermal_weight(&p, mode, t).unwrap();
                assert!((r - exact).abs() < 1e-13 * (1.0 / kappa), "t={t} {r} vs {exact}");
            }
        }
        assert_relative_eq!(thermal_weight_ss(&p, Mode::Charger).unwrap(), 1.0 / kappa, max_relative = 1e-14);
    }

    #[test]
    fn thermal_weight_canonical_fully_chiral() {
        let p = SystemParams::canonical_set(1.0).unwrap();
        let a = p.alpha();
        assert_relative_eq!(thermal_weight_ss(&p, Mode::Charger).unwrap(), 1.0 / a, max_relative = 1e-13);
        assert_relative_eq!(1.0 / a, 771.4285714285714, max_relative = 1e-13);
        let gr = p.gamma_r();
        assert_relative_eq!(
            thermal_weight_ss(&p, Mode::Battery).unwrap(),
            (a * a + 2.0 * gr * gr) / a.powi(3),
            max_relative = 1e-13
        );
        let late = thermal_weight(&p, Mode::Charger, 2000.0 / a).unwrap();
        assert_relative_eq!(late, 1.0 / a, max_relative = 1e-10);
    }

    #[test]
    fn residues_match_thermal_ode() {
        for &(gl, gr, kappa, phase) in &[(0.4, 1.0, 0.1, 0.3), (1.0, 1.0, 0.2, PI / 2.0), (0.7, 0.2, 0.05, 2.0)] {
            let p = params(gl, gr, kappa, 0.5, 0.0, phase);
            let times = [0.0, 0.7, 3.0, 12.0, 40.0];
            let exact = thermal_responses_ode(&p, &times).unwrap();
            let fast = thermal_responses(&p, &times).unwrap();
            for (e, f) in exact.iter().zip(&fast) {
                let scale = 1.0 / p.alpha();
                assert!((e.r1 - f.r1).abs() < 1e-9 * scale.max(e.r1.abs()));
                assert!((e.r2 - f.r2).abs() < 1e-9 * scale.max(e.r2.abs()));
                assert!((e.cross - f.cross).norm() < 1e-9 * scale.max(e.cross.norm()));
            }
        }
    }

    #[test]
    fn steady_metric_examples() {
        let p = params(0.3, 0.9, 0.07, 0.0, 0.0, 0.6);
        let r = steady_metrics(&p).unwrap();
        assert_eq!((r.charger_energy, r.battery_energy, r.ergotropy), (0.5, 0.5, 0.0));

        let r = steady_metrics(&SystemParams::canonical_set(1.0).unwrap()).unwrap();
        assert_relative_eq!(r.battery_energy, 43.148896293211, max_relative = 1e-10);
        assert_relative_eq!(r.ergotropy, 42.648896293211, max_relative = 1e-10);
        assert_relative_eq!(r.charger_energy, 12.255102040816, max_relative = 1e-10);

        let r = steady_metrics(&SystemParams::canonical_set(0.0).unwrap()).unwrap();
        assert_relative_eq!(r.battery_energy, 1.270499772363, max_relative = 1e-10);
        assert_relative_eq!(r.ergotropy, 0.770499772363, max_relative = 1e-10);
    }
}
