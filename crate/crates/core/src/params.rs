//! Physical parameter set of the two-magnon waveguide model.
//!
//! All rates are expressed in units of the magnon frequency, so `omega0`
//! defaults to `1.0`. The drive is always resonant with the magnons; the
//! moment equations are posed in the frame rotating at the drive frequency.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("total dissipation gamma_L + gamma_R + kappa = {0} must be positive")]
    NonPositiveAlpha(f64),
    #[error("rate `{name}` must be non-negative, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("thermal occupation must be non-negative, got {0}")]
    NegativeTemperature(f64),
    #[error("omega0 must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("parameter `{0}` is not finite")]
    NotFinite(&'static str),
    #[error("chirality {0} outside (-1, 1] for the fixed-gamma_R convention")]
    ChiralityOutOfRange(f64),
    #[error("both waveguide couplings vanish; chirality is undefined")]
    DegenerateCoupling,
    #[error("geometry input invalid: {0}")]
    InvalidGeometry(&'static str),
    #[error("detuned drive (drive_freq = {drive_freq}, omega0 = {omega0}) is not supported")]
    DetunedDrive { drive_freq: f64, omega0: f64 },
    #[error("conflicting keys `{0}` and `{1}`; give exactly one")]
    Conflicting(&'static str, &'static str),
}

/// Unit in which a [`RawParams`] record lists its frequencies.
///
/// Physical units follow the `f = omega / 2pi` convention; they are
/// normalized by dividing every rate by `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FrequencyUnit {
    #[default]
    #[serde(rename = "normalized")]
    Normalized,
    #[serde(rename = "GHz")]
    GHz,
    #[serde(rename = "MHz")]
    MHz,
}

/// Unvalidated parameter record, as read from a JSON configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    #[serde(default)]
    pub units: FrequencyUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(rename = "gamma_R")]
    pub gamma_r: f64,
    #[serde(rename = "gamma_L", default, skip_serializing_if = "Option::is_none")]
    pub gamma_l: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub chirality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    /// `k_B T / omega0`, converted with the Bose-Einstein occupation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_ratio: Option<f64>,
    pub drive_amp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    /// Drive frequency; accepted only when equal to `omega0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_freq: Option<f64>,
}

/// Validated model parameters in units of `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    omega0: f64,
    gamma_r: f64,
    gamma_l: f64,
    kappa: f64,
    nbar: f64,
    drive_amp: f64,
    phase: f64,
    alpha: f64,
    chirality: Option<f64>,
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if !value.is_finite() {
        return Err(ParamError::NotFinite(name));
    }
    if value < 0.0 {
        return Err(ParamError::NegativeRate { name, value });
    }
    Ok(value)
}

/// `D = (gamma_R - gamma_L) / (gamma_R + gamma_L)`, or `None` when both vanish.
pub fn chirality_of(gamma_l: f64, gamma_r: f64) -> Option<f64> {
    let sum = gamma_l + gamma_r;
    (sum > 0.0).then(|| (gamma_r - gamma_l) / sum)
}

/// Left coupling that realizes chirality `d` while `gamma_r` is held fixed.
///
/// Returns `(gamma_L, gamma_R)`.
pub fn rates_from_chirality(gamma_r: f64, d: f64) -> Result<(f64, f64), ParamError> {
    non_negative("gamma_R", gamma_r)?;
    if !d.is_finite() {
        return Err(ParamError::NotFinite("D"));
    }
    if d.abs() > 1.0 || d == -1.0 {
        return Err(ParamError::ChiralityOutOfRange(d));
    }
    Ok((gamma_r * (1.0 - d) / (1.0 + d), gamma_r))
}

/// Bose-Einstein occupation at `k_B T / omega0 = ratio`.
pub fn nbar_from_temperature_ratio(ratio: f64) -> Result<f64, ParamError> {
    if !ratio.is_finite() {
        return Err(ParamError::NotFinite("temperature_ratio"));
    }
    if ratio < 0.0 {
        return Err(ParamError::NegativeTemperature(ratio));
    }
    if ratio == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 / ratio).exp_m1())
}

impl SystemParams {
    /// Validates a raw record, normalizing physical units and resolving
    /// the `gamma_L`/`D` and `nbar`/`temperature_ratio` alternatives.
    pub fn validate(raw: &RawParams) -> Result<Self, ParamError> {
        let scale = match raw.units {
            FrequencyUnit::Normalized => 1.0,
            FrequencyUnit::GHz | FrequencyUnit::MHz => {
                let w = raw.omega0.ok_or(ParamError::NonPositiveFrequency(0.0))?;
                if !w.is_finite() {
                    return Err(ParamError::NotFinite("omega0"));
                }
                if w <= 0.0 {
                    return Err(ParamError::NonPositiveFrequency(w));
                }
                w
            }
        };
        let omega0 = match raw.units {
            FrequencyUnit::Normalized => raw.omega0.unwrap_or(1.0),
            _ => 1.0,
        };
        if !omega0.is_finite() {
            return Err(ParamError::NotFinite("omega0"));
        }
        if omega0 <= 0.0 {
            return Err(ParamError::NonPositiveFrequency(omega0));
        }
        if let Some(wd) = raw.drive_freq {
            let wd = wd / scale;
            if (wd - omega0).abs() > 1e-12 * omega0 {
                return Err(ParamError::DetunedDrive { drive_freq: wd, omega0 });
            }
        }

        let gamma_r = non_negative("gamma_R", raw.gamma_r / scale)?;
        let gamma_l = match (raw.gamma_l, raw.chirality) {
            (Some(_), Some(_)) => return Err(ParamError::Conflicting("gamma_L", "D")),
            (Some(gl), None) => non_negative("gamma_L", gl / scale)?,
            (None, Some(d)) => rates_from_chirality(gamma_r, d)?.0,
            (None, None) => 0.0,
        };
        let kappa = non_negative("kappa", raw.kappa.unwrap_or(0.0) / scale)?;
        let drive_amp = non_negative("drive_amp", raw.drive_amp / scale)?;
        let nbar = match (raw.nbar, raw.temperature_ratio) {
            (Some(_), Some(_)) => return Err(ParamError::Conflicting("nbar", "temperature_ratio")),
            (Some(n), None) => n,
            (None, Some(r)) => nbar_from_temperature_ratio(r)?,
            (None, None) => 0.0,
        };
        if !nbar.is_finite() {
            return Err(ParamError::NotFinite("nbar"));
        }
        if nbar < 0.0 {
            return Err(ParamError::NegativeTemperature(nbar));
        }
        let phase = raw.phase.unwrap_or(0.0);
        if !phase.is_finite() {
            return Err(ParamError::NotFinite("phase"));
        }
        Self::from_rates(omega0, gamma_l, gamma_r, kappa, nbar, drive_amp, phase)
    }

    /// Builds a parameter set directly from normalized rates.
    pub fn from_rates(
        omega0: f64,
        gamma_l: f64,
        gamma_r: f64,
        kappa: f64,
        nbar: f64,
        drive_amp: f64,
        phase: f64,
    ) -> Result<Self, ParamError> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(ParamError::NonPositiveFrequency(omega0));
        }
        let gamma_l = non_negative("gamma_L", gamma_l)?;
        let gamma_r = non_negative("gamma_R", gamma_r)?;
        let kappa = non_negative("kappa", kappa)?;
        let drive_amp = non_negative("drive_amp", drive_amp)?;
        if !nbar.is_finite() {
            return Err(ParamError::NotFinite("nbar"));
        }
        if nbar < 0.0 {
            return Err(ParamError::NegativeTemperature(nbar));
        }
        if !phase.is_finite() {
            return Err(ParamError::NotFinite("phase"));
        }
        let alpha = gamma_l + gamma_r + kappa;
        if alpha <= 0.0 {
            return Err(ParamError::NonPositiveAlpha(alpha));
        }
        Ok(Self {
            omega0,
            gamma_r,
            gamma_l,
            kappa,
            nbar,
            drive_amp,
            phase,
            alpha,
            chirality: chirality_of(gamma_l, gamma_r),
        })
    }

    /// The experimental parameter set in `omega0` units: `omega0/2pi = 16.2 GHz`,
    /// `gamma_R/2pi = 20 MHz`, `kappa/2pi = 1 MHz`, `Omega/2pi = 36 MHz`,
    /// zero temperature, `k0 d = pi/2`, at the requested chirality.
    ///
    /// The exact ratios are used rather than the rounded `0.001` / `0.0022`
    /// figures, which shift the steady energy ratio from about 34 to 38.9.
    pub fn canonical_set(chirality: f64) -> Result<Self, ParamError> {
        let gamma_r = CANONICAL_GAMMA_R;
        let (gamma_l, _) = rates_from_chirality(gamma_r, chirality)?;
        Self::from_rates(1.0, gamma_l, gamma_r, CANONICAL_KAPPA, 0.0, CANONICAL_DRIVE, PI / 2.0)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn gamma_r(&self) -> f64 {
        self.gamma_r
    }
    pub fn gamma_l(&self) -> f64 {
        self.gamma_l
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn nbar(&self) -> f64 {
        self.nbar
    }
    pub fn drive_amp(&self) -> f64 {
        self.drive_amp
    }
    /// Propagation phase `k0 d`, unreduced.
    pub fn phase(&self) -> f64 {
        self.phase
    }
    /// Total decay rate `gamma_L + gamma_R + kappa`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn chirality(&self) -> Option<f64> {
        self.chirality
    }

    /// Back to a normalized raw record; `validate` of the result is `self`.
    pub fn to_raw(&self) -> RawParams {
        RawParams {
            units: FrequencyUnit::Normalized,
            omega0: Some(self.omega0),
            gamma_r: self.gamma_r,
            gamma_l: Some(self.gamma_l),
            chirality: None,
            kappa: Some(self.kappa),
            nbar: Some(self.nbar),
            temperature_ratio: None,
            drive_amp: self.drive_amp,
            phase: Some(self.phase),
            drive_freq: None,
        }
    }

    pub fn with_phase(&self, phase: f64) -> Result<Self, ParamError> {
        Self::from_rates(self.omega0, self.gamma_l, self.gamma_r, self.kappa, self.nbar, self.drive_amp, phase)
    }

    pub fn with_nbar(&self, nbar: f64) -> Result<Self, ParamError> {
        Self::from_rates(self.omega0, self.gamma_l, self.gamma_r, self.kappa, nbar, self.drive_amp, self.phase)
    }

    pub fn with_drive(&self, drive_amp: f64) -> Result<Self, ParamError> {
        Self::from_rates(self.omega0, self.gamma_l, self.gamma_r, self.kappa, self.nbar, drive_amp, self.phase)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self, ParamError> {
        Self::from_rates(self.omega0, self.gamma_l, self.gamma_r, kappa, self.nbar, self.drive_amp, self.phase)
    }

    pub fn with_rates(&self, gamma_l: f64, gamma_r: f64) -> Result<Self, ParamError> {
        Self::from_rates(self.omega0, gamma_l, gamma_r, self.kappa, self.nbar, self.drive_amp, self.phase)
    }

    /// Re-targets the chirality with `gamma_R` held fixed.
    pub fn with_chirality(&self, d: f64) -> Result<Self, ParamError> {
        let (gamma_l, gamma_r) = rates_from_chirality(self.gamma_r, d)?;
        self.with_rates(gamma_l, gamma_r)
    }

    /// `gamma_L <-> gamma_R` mirror image.
    pub fn swapped(&self) -> Result<Self, ParamError> {
        self.with_rates(self.gamma_r, self.gamma_l)
    }
}

pub const CANONICAL_GAMMA_R: f64 = 20.0 / 16200.0;
pub const CANONICAL_KAPPA: f64 = 1.0 / 16200.0;
pub const CANONICAL_DRIVE: f64 = 36.0 / 16200.0;

/// Converts a physical frequency (`f = omega/2pi`) to `omega0` units.
pub fn normalize_frequency(value: f64, unit: FrequencyUnit, omega0: f64, omega0_unit: FrequencyUnit) -> f64 {
    fn to_hz(v: f64, u: FrequencyUnit) -> f64 {
        match u {
            FrequencyUnit::Normalized => v,
            FrequencyUnit::GHz => v * 1e9,
            FrequencyUnit::MHz => v * 1e6,
        }
    }
    to_hz(value, unit) / to_hz(omega0, omega0_unit)
}

/// Placement of the spheres in the TE10 cross section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryInput {
    /// `pi x0 / a`.
    pub theta: f64,
    /// `(pi/a) / k0`.
    pub u: f64,
    /// Common coupling prefactor bundling the sphere and guide constants.
    pub gamma_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryRates {
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub chirality: f64,
}

/// TE10 couplings: `g_lambda ~ (pi/a) cos(theta) - k_lambda sin(theta)` with
/// `k_R = -k_L = k0`, squared into rates.
pub fn chirality_from_geometry(g: &GeometryInput) -> Result<GeometryRates, ParamError> {
    if !(g.theta.is_finite() && g.u.is_finite() && g.gamma_scale.is_finite()) {
        return Err(ParamError::InvalidGeometry("non-finite input"));
    }
    if g.gamma_scale < 0.0 {
        return Err(ParamError::InvalidGeometry("gamma_scale must be non-negative"));
    }
    if !(0.0..=PI).contains(&g.theta) {
        return Err(ParamError::InvalidGeometry("theta must lie in [0, pi]"));
    }
    let (s, c) = g.theta.sin_cos();
    let gamma_r = g.gamma_scale * (g.u * c - s).powi(2);
    let gamma_l = g.gamma_scale * (g.u * c + s).powi(2);
    // Rounding can leave ~1e-33 where the coupling vanishes analytically.
    let flush = |x: f64| if x < 1e-15 * g.gamma_scale * (1.0 + g.u * g.u) { 0.0 } else { x };
    let (gamma_l, gamma_r) = (flush(gamma_l), flush(gamma_r));
    let chirality = chirality_of(gamma_l, gamma_r).ok_or(ParamError::DegenerateCoupling)?;
    Ok(GeometryRates { gamma_l, gamma_r, chirality })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(gr: f64, gl: f64, kappa: f64, drive: f64) -> RawParams {
        RawParams { gamma_r: gr, gamma_l: Some(gl), kappa: Some(kappa), drive_amp: drive, ..Default::default() }
    }

    #[test]
    fn validate_symmetric_rates() {
        let p = SystemParams::validate(&raw(1.0, 1.0, 0.1, 0.0)).unwrap();
        assert_relative_eq!(p.alpha(), 2.1, epsilon = 1e-15);
        assert_eq!(p.chirality(), Some(0.0));
        assert_eq!(p.omega0(), 1.0);
        assert_eq!(p.nbar(), 0.0);
    }

    #[test]
    fn validate_canonical_rates() {
        let mut r = raw(20.0 / 16200.0, 0.0, 1.0 / 16200.0, 36.0 / 16200.0);
        r.phase = Some(PI / 2.0);
        let p = SystemParams::validate(&r).unwrap();
        assert_eq!(p.chirality(), Some(1.0));
        assert_relative_eq!(p.alpha(), 21.0 / 16200.0, max_relative = 1e-15);
        assert_eq!(p, SystemParams::canonical_set(1.0).unwrap());
    }

    #[test]
    fn physical_units_resolve_to_exact_ratios() {
        let r = RawParams {
            units: FrequencyUnit::MHz,
            omega0: Some(16200.0),
            gamma_r: 20.0,
            chirality: Some(1.0),
            kappa: Some(1.0),
            drive_amp: 36.0,
            phase: Some(PI / 2.0),
            ..Default::default()
        };
        let p = SystemParams::validate(&r).unwrap();
        assert_eq!(p, SystemParams::canonical_set(1.0).unwrap());
        assert_relative_eq!(
            normalize_frequency(20.0, FrequencyUnit::MHz, 16.2, FrequencyUnit::GHz),
            CANONICAL_GAMMA_R,
            max_relative = 1e-15
        );
    }

    #[test]
    fn errors() {
        assert_eq!(SystemParams::validate(&raw(0.0, 0.0, 0.0, 1.0)), Err(ParamError::NonPositiveAlpha(0.0)));
        assert!(matches!(
            SystemParams::validate(&raw(1.0, -0.5, 0.0, 1.0)),
            Err(ParamError::NegativeRate { name: "gamma_L", .. })
        ));
        let mut r = raw(1.0, 0.0, 0.0, 1.0);
        r.nbar = Some(-1.0);
        assert_eq!(SystemParams::validate(&r), Err(ParamError::NegativeTemperature(-1.0)));
        r.nbar = None;
        r.drive_freq = Some(1.01);
        assert!(matches!(SystemParams::validate(&r), Err(ParamError::DetunedDrive { .. })));
        r.drive_freq = Some(1.0);
        assert!(SystemParams::validate(&r).is_ok());
        r.chirality = Some(0.5);
        assert_eq!(SystemParams::validate(&r), Err(ParamError::Conflicting("gamma_L", "D")));
    }

    #[test]
    fn validate_is_idempotent() {
        let mut r = raw(0.7, 0.3, 0.05, 0.2);
        r.nbar = Some(0.4);
        r.phase = Some(7.0);
        let p = SystemParams::validate(&r).unwrap();
        assert_eq!(SystemParams::validate(&p.to_raw()).unwrap(), p);
    }

    #[test]
    fn chirality_inversion() {
        assert_eq!(rates_from_chirality(1.0, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(rates_from_chirality(1.0, 1.0).unwrap(), (0.0, 1.0));
        let (gl, _) = rates_from_chirality(1.0, 1.0 / 3.0).unwrap();
        assert_relative_eq!(gl, 0.5, epsilon = 1e-15);
        assert_eq!(rates_from_chirality(1.0, -1.0), Err(ParamError::ChiralityOutOfRange(-1.0)));
        assert_eq!(rates_from_chirality(1.0, 1.5), Err(ParamError::ChiralityOutOfRange(1.5)));
    }

    #[test]
    fn temperature_conversion() {
        assert_eq!(nbar_from_temperature_ratio(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            nbar_from_temperature_ratio(1.0).unwrap(),
            1.0 / (std::f64::consts::E - 1.0),
            max_relative = 1e-14
        );
        let r = RawParams { gamma_r: 1.0, drive_amp: 0.0, temperature_ratio: Some(2.0), ..Default::default() };
        let p = SystemParams::validate(&r).unwrap();
        assert_relative_eq!(p.nbar(), 1.0 / (0.5f64.exp() - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn geometry_examples() {
        let g = chirality_from_geometry(&GeometryInput { theta: 0.0, u: 1.0, gamma_scale: 1.0 }).unwrap();
        assert_eq!((g.gamma_l, g.gamma_r, g.chirality), (1.0, 1.0, 0.0));

        let g = chirality_from_geometry(&GeometryInput { theta: PI / 4.0, u: 1.0, gamma_scale: 1.0 }).unwrap();
        assert_eq!(g.gamma_r, 0.0);
        assert_relative_eq!(g.gamma_l, 2.0, epsilon = 1e-14);
        assert_eq!(g.chirality, -1.0);

        let g = chirality_from_geometry(&GeometryInput { theta: 3.0 * PI / 4.0, u: 1.0, gamma_scale: 1.0 }).unwrap();
        assert_eq!(g.gamma_l, 0.0);
        assert_relative_eq!(g.gamma_r, 2.0, epsilon = 1e-14);
        assert_eq!(g.chirality, 1.0);

        assert_eq!(
            chirality_from_geometry(&GeometryInput { theta: 0.3, u: 1.0, gamma_scale: 0.0 }),
            Err(ParamError::DegenerateCoupling)
        );
        assert!(chirality_from_geometry(&GeometryInput { theta: 4.0, u: 1.0, gamma_scale: 1.0 }).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn chirality_roundtrip(gr in 1e-6f64..10.0, d in -0.999f64..=1.0) {
                let (gl, gr2) = rates_from_chirality(gr, d).unwrap();
                let back = chirality_of(gl, gr2).unwrap();
                prop_assert!((back - d).abs() < 1e-12);
            }

            #[test]
            fn geometry_rates_nonnegative_and_mirror(theta in 0.0f64..=PI, u in 0.0f64..5.0, g0 in 0.0f64..3.0) {
                let a = GeometryInput { theta, u, gamma_scale: g0 };
                let b = GeometryInput { theta: PI - theta, u, gamma_scale: g0 };
                match (chirality_from_geometry(&a), chirality_from_geometry(&b)) {
                    (Ok(ra), Ok(rb)) => {
                        prop_assert!(ra.gamma_l >= 0.0 && ra.gamma_r >= 0.0);
                        let tol = 1e-12 * g0 * (1.0 + u * u);
                        prop_assert!((ra.gamma_l - rb.gamma_r).abs() <= tol);
                        prop_assert!((ra.gamma_r - rb.gamma_l).abs() <= tol);
                        if ra.gamma_l + ra.gamma_r > 1e-6 * g0 {
                            prop_assert!((ra.chirality + rb.chirality).abs() < 1e-8);
                        }
                    }
                    (Err(ParamError::DegenerateCoupling), Err(ParamError::DegenerateCoupling)) => {}
                    (x, y) => prop_assert!(false, "asymmetric outcome {:?} {:?}", x, y),
                }
            }
        }
    }
}
