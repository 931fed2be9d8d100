//! JSON run configuration: model parameters plus per-command blocks.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{FrequencyUnit, ParamError, RawParams, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at '{path}': {message}")]
    Parse { path: String, message: String },
    #[error("invalid parameters: {0}")]
    Validation(#[from] ParamError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveBlock {
    /// End time in units of `1/omega0`; defaults to 30/alpha.
    pub t_end: Option<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Registered moment solver: `ode`, `analytic` or `fock`.
    #[serde(default = "default_solver")]
    pub solver: String,
}

fn default_solver() -> String {
    "ode".into()
}

fn default_samples() -> usize {
    201
}
fn default_rtol() -> f64 {
    1e-10
}
fn default_atol() -> f64 {
    1e-14
}

impl Default for EvolveBlock {
    fn default() -> Self {
        Self {
            t_end: None,
            n_samples: default_samples(),
            rtol: default_rtol(),
            atol: default_atol(),
            solver: default_solver(),
        }
    }
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    D,
    #[serde(rename = "phase")]
    Phase,
    #[serde(rename = "nbar")]
    Nbar,
    #[serde(rename = "drive_amp")]
    DriveAmp,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::D => "D",
            SweepVar::Phase => "phase",
            SweepVar::Nbar => "nbar",
            SweepVar::DriveAmp => "drive_amp",
        }
    }

    pub fn apply(&self, p: &SystemParams, v: f64) -> Result<SystemParams, ParamError> {
        match self {
            SweepVar::D => p.with_chirality(v),
            SweepVar::Phase => p.with_phase(v),
            SweepVar::Nbar => p.with_nbar(v),
            SweepVar::DriveAmp => p.with_drive(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    /// Logarithmic spacing; both ends must be positive.
    #[serde(default)]
    pub log: bool,
}

impl Range {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        if self.count < 2 {
            return Err(ConfigError::Invalid(format!("range count must be at least 2, got {}", self.count)));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(ConfigError::Invalid("range ends must be finite".into()));
        }
        let n = self.count - 1;
        if self.log {
            if !(self.start > 0.0 && self.stop > 0.0) {
                return Err(ConfigError::Invalid("log range needs positive ends".into()));
            }
            let (a, b) = (self.start.ln(), self.stop.ln());
            return Ok((0..=n)
                .map(|i| match i {
                    0 => self.start,
                    i if i == n => self.stop,
                    i => (a + (b - a) * i as f64 / n as f64).exp(),
                })
                .collect());
        }
        Ok((0..=n)
            .map(|i| if i == n { self.stop } else { self.start + (self.stop - self.start) * i as f64 / n as f64 })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub var: SweepVar,
    pub value: f64,
}

impl Default for Baseline {
    fn default() -> Self {
        Self { var: SweepVar::D, value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub var: SweepVar,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub log: bool,
    pub var2: Option<SweepVar>,
    pub start2: Option<f64>,
    pub stop2: Option<f64>,
    pub count2: Option<usize>,
    #[serde(default)]
    pub log2: bool,
    #[serde(default)]
    pub baseline: Baseline,
}

impl SweepBlock {
    pub fn axes(&self) -> Result<Vec<(SweepVar, Vec<f64>)>, ConfigError> {
        let first = Range { start: self.start, stop: self.stop, count: self.count, log: self.log };
        let mut axes = vec![(self.var, first.values()?)];
        if let Some(var2) = self.var2 {
            let (Some(start), Some(stop), Some(count)) = (self.start2, self.stop2, self.count2) else {
                return Err(ConfigError::Invalid("var2 needs start2, stop2 and count2".into()));
            };
            if var2 == self.var {
                return Err(ConfigError::Invalid("var2 must differ from var".into()));
            }
            axes.push((var2, Range { start, stop, count, log: self.log2 }.values()?));
        }
        Ok(axes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Oracle drive as a multiple of `gamma_R`.
    #[serde(default = "default_omega_scale")]
    pub omega_scale: f64,
}

fn default_cutoff() -> usize {
    6
}
fn default_omega_scale() -> f64 {
    0.05
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self { cutoff: default_cutoff(), omega_scale: default_omega_scale() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureBlock {
    /// Thermal occupations for the temperature figure.
    #[serde(default = "default_fig4_nbar")]
    pub nbar_values: Vec<f64>,
    /// Drive amplitudes (units of `omega0`) for the phase panel of the
    /// drive-saturation figure.
    #[serde(default = "default_s1_drives")]
    pub drive_values: Vec<f64>,
    /// Drive range for the saturation panel.
    #[serde(default = "default_s1_range")]
    pub drive_range: Range,
    /// Points per axis of phase and chirality grids.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Samples per time series.
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn default_fig4_nbar() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}
fn default_s1_drives() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1]
}
fn default_s1_range() -> Range {
    Range { start: 1e-4, stop: 1e-1, count: 50, log: true }
}
fn default_grid() -> usize {
    101
}

impl Default for FigureBlock {
    fn default() -> Self {
        Self {
            nbar_values: default_fig4_nbar(),
            drive_values: default_s1_drives(),
            drive_range: default_s1_range(),
            grid: default_grid(),
            n_samples: default_samples(),
        }
    }
}

/// The document as written on disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    units: FrequencyUnit,
    omega0: Option<f64>,
    #[serde(rename = "gamma_R")]
    gamma_r: f64,
    #[serde(rename = "gamma_L")]
    gamma_l: Option<f64>,
    #[serde(rename = "D")]
    chirality: Option<f64>,
    kappa: Option<f64>,
    nbar: Option<f64>,
    temperature_ratio: Option<f64>,
    drive_amp: f64,
    phase: Option<f64>,
    drive_freq: Option<f64>,
    evolve: Option<EvolveBlock>,
    sweep: Option<SweepBlock>,
    oracle: Option<OracleBlock>,
    figure: Option<FigureBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawParams,
    pub params: SystemParams,
    pub evolve: EvolveBlock,
    pub sweep: Option<SweepBlock>,
    pub oracle: OracleBlock,
    pub figure: FigureBlock,
}

impl RunConfig {
    /// Fully chiral canonical parameter set with default blocks.
    pub fn canonical_default() -> Self {
        let params = SystemParams::canonical_set(1.0).expect("canonical parameters are valid");
        RunConfig {
            raw: params.to_raw(),
            params,
            evolve: EvolveBlock::default(),
            sweep: None,
            oracle: OracleBlock::default(),
            figure: FigureBlock::default(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| ConfigError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    let raw = RawParams {
        units: doc.units,
        omega0: doc.omega0,
        gamma_r: doc.gamma_r,
        gamma_l: doc.gamma_l,
        chirality: doc.chirality,
        kappa: doc.kappa,
        nbar: doc.nbar,
        temperature_ratio: doc.temperature_ratio,
        drive_amp: doc.drive_amp,
        phase: doc.phase,
        drive_freq: doc.drive_freq,
    };
    let params = SystemParams::validate(&raw)?;
    let oracle = doc.oracle.unwrap_or_default();
    if oracle.cutoff < 1 {
        return Err(ConfigError::Invalid("oracle cutoff must be at least 1".into()));
    }
    if let Some(s) = &doc.sweep {
        s.axes()?;
    }
    Ok(RunConfig {
        raw,
        params,
        evolve: doc.evolve.unwrap_or_default(),
        sweep: doc.sweep,
        oracle,
        figure: doc.figure.unwrap_or_default(),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(r#"{"gamma_R": 0.5, "drive_amp": 0.1}"#).unwrap();
        assert_eq!(c.params.omega0(), 1.0);
        assert_eq!(c.params.nbar(), 0.0);
        assert_eq!(c.params.phase(), 0.0);
        assert_eq!(c.evolve, EvolveBlock::default());
        assert_eq!(c.oracle, OracleBlock::default());
    }

    #[test]
    fn physical_units_resolve_to_exact_ratios() {
        let doc = r#"{"units": "GHz", "omega0": 16.2, "gamma_R": 0.020, "D": 1,
                      "kappa": 0.001, "drive_amp": 0.036, "phase": 1.5707963267948966}"#;
        let c = parse_config(doc).unwrap();
        let p = SystemParams::canonical_set(1.0).unwrap();
        assert_relative_eq!(c.params.gamma_r(), p.gamma_r(), max_relative = 1e-14);
        assert_relative_eq!(c.params.kappa(), p.kappa(), max_relative = 1e-14);
        assert_relative_eq!(c.params.drive_amp(), p.drive_amp(), max_relative = 1e-14);
        assert_eq!(c.params.gamma_l(), 0.0);
    }

    #[test]
    fn errors_carry_context() {
        let e = parse_config(r#"{"gamma_R": 0.5, "drive_amp": 0.1, "nbar": -1}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Validation(_)));

        let e = parse_config(r#"{"gamma_R": 0.5, "drive_amp": 0.1, "evolve": {"n_samples": "x"}}"#).unwrap_err();
        match e {
            ConfigError::Parse { path, message } => {
                assert_eq!(path, "evolve.n_samples");
                assert!(message.contains("line 1"));
            }
            other => panic!("{other:?}"),
        }

        let e = parse_config(r#"{"gamma_R": 0.5, "drive_amp": 0.1, "gama_L": 1}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { .. }));

        let e = parse_config(
            r#"{"gamma_R": 0.5, "drive_amp": 0.1,
                                  "sweep": {"var": "phase", "start": 0, "stop": 1, "count": 1}}"#,
        )
        .unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)));
    }

    #[test]
    fn ranges() {
        let r = Range { start: 1e-4, stop: 1e-1, count: 4, log: true };
        let v = r.values().unwrap();
        assert_eq!(v[0], 1e-4);
        assert_eq!(v[3], 1e-1);
        assert_relative_eq!(v[1], 1e-3, max_relative = 1e-12);
        let r = Range { start: 0.0, stop: 1.0, count: 3, log: false };
        assert_eq!(r.values().unwrap(), vec![0.0, 0.5, 1.0]);
    }
}
