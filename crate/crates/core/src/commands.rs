//! Subcommand implementations. Each returns a [`ResultTable`].

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::config::{ConfigError, RunConfig, SweepVar};
use crate::dynamics::{self, DynamicsError};
use crate::params::{ParamError, SystemParams};
use crate::solver::{self, SolverError, SolverOptions};
use crate::table::{ResultTable, TableError};
use crate::thermo::{self, Metrics, ThermoError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("unknown figure '{0}' (expected fig2, fig3, fig4 or figS1)")]
    UnknownFigure(String),
}

pub const FIGURES: [&str; 4] = ["fig2", "fig3", "fig4", "figS1"];
/// Ratios whose numerator or denominator falls below this are reported as NaN.
pub const RATIO_FLOOR: f64 = 1e-12;
/// Default evolution horizon in units of `1/alpha`.
pub const DEFAULT_HORIZON: f64 = 30.0;

/// `# ` preamble: tool version, command, resolved parameters, timestamp.
///
/// The timestamp honours `SOURCE_DATE_EPOCH` so that outputs can be made
/// byte-identical across runs.
pub fn provenance(command: &str, p: &SystemParams) -> Vec<String> {
    let stamp = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse::<u64>().ok()).unwrap_or_else(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    });
    vec![
        format!("tool {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        format!("command {command}"),
        format!("params {}", serde_json::to_string(&p.to_raw()).unwrap_or_default()),
        format!("generated_unix {stamp}"),
    ]
}

fn metrics_row(m: &Metrics) -> [f64; 6] {
    [m.e_b, m.e_c, m.w, m.r, m.eta, m.c]
}

const METRIC_COLUMNS: [&str; 6] = ["E_B", "E_C", "W", "R", "eta", "C"];

/// Time series of the battery metrics from vacuum.
pub fn cmd_evolve(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let p = &cfg.params;
    let ev = &cfg.evolve;
    let t_end = ev.t_end.unwrap_or(DEFAULT_HORIZON / p.alpha());
    let times = dynamics::uniform_grid(t_end, ev.n_samples)?;
    let opts = SolverOptions { rtol: ev.rtol, atol: ev.atol, cutoff: cfg.oracle.cutoff, ..Default::default() };
    let tr = solver::solver_by_name(&ev.solver, opts)?.trajectory(p, &times)?;

    let mut cols = vec!["t"];
    cols.extend(METRIC_COLUMNS);
    cols.extend(["n1", "n2", "|m1|", "|m2|"]);
    let mut table = ResultTable::new(cols);
    table.preamble = provenance(&format!("evolve solver={}", ev.solver), p);
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let m = thermo::metrics_at(s, p)?;
        let mut row = vec![*t];
        row.extend(metrics_row(&m));
        row.extend([s.n1, s.n2, s.m1.norm(), s.m2.norm()]);
        table.push(row)?;
    }
    Ok(table)
}

/// Closed-form steady state as a single row.
pub fn cmd_steady(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let p = &cfg.params;
    let rep = analytic::steady_metrics(p)?;
    let m = thermo::steady_state_metrics(p)?;
    let mut table = ResultTable::new([
        "m1_re", "m1_im", "m2_re", "m2_im", "E_C", "E_B", "W", "R1_ss", "R2_ss", "zeta_re", "zeta_im", "xi", "eta_ss",
        "R_ss", "C_ss",
    ]);
    table.preamble = provenance("steady", p);
    table.push(vec![
        rep.m1_ss.re,
        rep.m1_ss.im,
        rep.m2_ss.re,
        rep.m2_ss.im,
        rep.charger_energy,
        rep.battery_energy,
        rep.ergotropy,
        rep.r1_ss,
        rep.r2_ss,
        rep.zeta.re,
        rep.zeta.im,
        rep.xi,
        m.eta,
        m.r,
        m.c,
    ])?;
    Ok(table)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num.abs() < RATIO_FLOOR || den.abs() < RATIO_FLOOR {
        f64::NAN
    } else {
        num / den
    }
}

/// Steady metrics at `p` with ratios against the same point moved to the
/// baseline value; `None` when either point is degenerate.
fn steady_with_ratios(p: &SystemParams, base_var: SweepVar, base_value: f64) -> Option<([f64; 6], [f64; 3])> {
    let m = thermo::steady_state_metrics(p).ok()?;
    let b = thermo::steady_state_metrics(&base_var.apply(p, base_value).ok()?).ok()?;
    Some((metrics_row(&m), [ratio(m.e_b, b.e_b), ratio(m.w, b.w), ratio(m.c, b.c)]))
}

fn grid_points(axes: &[(SweepVar, Vec<f64>)]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, (_, vals)| {
        acc.iter().flat_map(|prefix| vals.iter().map(move |v| [prefix.as_slice(), &[*v]].concat())).collect()
    })
}

/// Steady-state sweep over one or two variables, evaluated in parallel.
/// Degenerate points become NaN rows with `flag = 1`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let block =
        cfg.sweep.ok_or_else(|| ConfigError::Invalid("sweep needs a 'sweep' block in the configuration".into()))?;
    let axes = block.axes()?;
    let points = grid_points(&axes);
    let base = &cfg.params;
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|vals| {
            let moved = axes.iter().zip(vals).try_fold(*base, |p, ((var, _), v)| var.apply(&p, *v));
            let result = moved.ok().and_then(|p| steady_with_ratios(&p, block.baseline.var, block.baseline.value));
            let mut row = vals.clone();
            match result {
                Some((m, r)) => {
                    row.extend(m);
                    row.extend(r);
                    row.push(0.0);
                }
                None => {
                    row.extend([f64::NAN; 9]);
                    row.push(1.0);
                }
            }
            row
        })
        .collect();

    let mut cols: Vec<String> = axes.iter().map(|(v, _)| v.name().to_string()).collect();
    cols.extend(METRIC_COLUMNS.map(String::from));
    cols.extend(["E_ratio", "W_ratio", "C_ratio", "flag"].map(String::from));
    let mut table = ResultTable::new(cols);
    table.nan_columns = vec!["E_ratio".into(), "W_ratio".into(), "C_ratio".into()];
    table.preamble =
        provenance(&format!("sweep baseline {}={}", block.baseline.var.name(), block.baseline.value), base);
    for row in rows {
        table.push(row)?;
    }
    Ok(table)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

fn fig2(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let reference = SystemParams::canonical_set(1.0)?;
    let t_end = DEFAULT_HORIZON / reference.alpha();
    let times = dynamics::uniform_grid(t_end, cfg.figure.n_samples)?;
    let mut cols = vec!["D", "t"];
    cols.extend(METRIC_COLUMNS);
    let mut table = ResultTable::new(cols);
    table.preamble = provenance("figure fig2", &reference);
    let ds = [0.0, 0.25, 0.5, 0.75, 1.0];
    let blocks: Vec<Result<Vec<Vec<f64>>, CommandError>> = ds
        .par_iter()
        .map(|&d| {
            let p = SystemParams::canonical_set(d)?;
            let tr = analytic::analytic_trajectory(&p, &times)?;
            tr.states
                .iter()
                .zip(&times)
                .map(|(s, t)| {
                    let m = thermo::metrics_at(s, &p)?;
                    let mut row = vec![d, *t];
                    row.extend(metrics_row(&m));
                    Ok(row)
                })
                .collect()
        })
        .collect();
    for b in blocks {
        for row in b? {
            table.push(row)?;
        }
    }
    Ok(table)
}

fn fig3(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let reference = SystemParams::canonical_set(1.0)?;
    let n = cfg.figure.grid.max(2);
    let points: Vec<(f64, f64)> = linspace(0.0, 1.0, n)
        .into_iter()
        .flat_map(|d| linspace(0.0, PI, n).into_iter().map(move |ph| (d, ph)))
        .collect();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(d, ph)| {
            let p = reference.with_chirality(d).and_then(|p| p.with_phase(ph));
            match p.ok().and_then(|p| steady_with_ratios(&p, SweepVar::D, 0.0)) {
                Some((m, r)) => vec![d, ph, m[4], m[2], r[1], r[2], 0.0],
                None => vec![d, ph, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 1.0],
            }
        })
        .collect();
    let mut table = ResultTable::new(["D", "phase", "eta_ss", "W_ss", "W_ratio", "C_ratio", "flag"]);
    table.nan_columns = vec!["W_ratio".into(), "C_ratio".into()];
    table.preamble = provenance("figure fig3", &reference);
    for row in rows {
        table.push(row)?;
    }
    Ok(table)
}

fn fig4(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let reference = SystemParams::canonical_set(1.0)?;
    let phases = linspace(0.0, PI, cfg.figure.grid.max(2));
    let mut table = ResultTable::new(["nbar", "phase", "E_ratio", "R_ss"]);
    table.preamble = provenance(&format!("figure fig4 nbar={:?}", cfg.figure.nbar_values), &reference);
    for &nbar in &cfg.figure.nbar_values {
        let rows: Vec<Result<Vec<f64>, CommandError>> = phases
            .par_iter()
            .map(|&ph| {
                let p = reference.with_nbar(nbar)?.with_phase(ph)?;
                let m = thermo::steady_state_metrics(&p)?;
                let b = thermo::steady_state_metrics(&p.with_chirality(0.0)?)?;
                Ok(vec![nbar, ph, m.e_b / b.e_b, m.r])
            })
            .collect();
        for row in rows {
            table.push(row?)?;
        }
    }
    Ok(table)
}

fn fig_s1(cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    let reference = SystemParams::canonical_set(1.0)?;
    let mut table = ResultTable::new(["panel", "drive_amp", "phase", "E_ratio", "W_ratio"]);
    table.preamble = provenance("figure figS1", &reference);
    let point = |drive: f64, ph: f64, panel: f64| -> Result<Vec<f64>, CommandError> {
        let p = reference.with_drive(drive)?.with_phase(ph)?;
        let m = thermo::steady_state_metrics(&p)?;
        let b = thermo::steady_state_metrics(&p.with_chirality(0.0)?)?;
        Ok(vec![panel, drive, ph, m.e_b / b.e_b, m.w / b.w])
    };
    let phases = linspace(0.0, PI, cfg.figure.grid.max(2));
    let panel_a: Vec<(f64, f64)> =
        cfg.figure.drive_values.iter().flat_map(|&w| phases.iter().map(move |&ph| (w, ph))).collect();
    let panel_b = cfg.figure.drive_range.values()?;
    let mut rows: Vec<Result<Vec<f64>, CommandError>> = panel_a.par_iter().map(|&(w, ph)| point(w, ph, 0.0)).collect();
    rows.extend(panel_b.par_iter().map(|&w| point(w, PI / 2.0, 1.0)).collect::<Vec<_>>());
    for row in rows {
        table.push(row?)?;
    }
    Ok(table)
}

/// Data behind the named figure at the canonical parameter set.
pub fn cmd_figure(name: &str, cfg: &RunConfig) -> Result<ResultTable, CommandError> {
    match name {
        "fig2" => fig2(cfg),
        "fig3" => fig3(cfg),
        "fig4" => fig4(cfg),
        "figS1" => fig_s1(cfg),
        other => Err(CommandError::UnknownFigure(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, SweepBlock};
    use approx::assert_relative_eq;

    fn col(t: &ResultTable, name: &str) -> Vec<f64> {
        t.column(name).unwrap()
    }

    #[test]
    fn evolve_examples() {
        let mut cfg = RunConfig::canonical_default();
        cfg.params = cfg.params.with_drive(0.0).unwrap();
        cfg.evolve.n_samples = 17;
        let t = cmd_evolve(&cfg).unwrap();
        assert_eq!(t.rows.len(), 17);
        assert!(col(&t, "E_B").iter().all(|&e| e == 0.5));

        let mut cfg = RunConfig::canonical_default();
        cfg.evolve.n_samples = 50;
        let t = cmd_evolve(&cfg).unwrap();
        let last = *col(&t, "E_B").last().unwrap();
        assert_relative_eq!(last, 43.148896293211, max_relative = 1e-3);
    }

    #[test]
    fn steady_examples() {
        let t = cmd_steady(&RunConfig::canonical_default()).unwrap();
        assert_relative_eq!(col(&t, "W")[0], 42.648896293211, max_relative = 1e-10);
        let mut cfg = RunConfig::canonical_default();
        cfg.params = cfg.params.with_chirality(0.0).unwrap();
        assert_relative_eq!(col(&cmd_steady(&cfg).unwrap(), "W")[0], 0.770499772363, max_relative = 1e-10);

        let cfg = parse_config(r#"{"gamma_R": 1, "D": 0, "kappa": 0, "drive_amp": 0.1, "phase": 0}"#).unwrap();
        let err = cmd_steady(&cfg).unwrap_err();
        assert!(err.to_string().contains("dark mode"), "{err}");
    }

    #[test]
    fn sweep_flags_degenerate_points_and_keeps_order() {
        let mut cfg = RunConfig::canonical_default();
        cfg.params = cfg.params.with_kappa(0.0).unwrap().with_chirality(0.0).unwrap();
        cfg.sweep = Some(SweepBlock {
            var: SweepVar::Phase,
            start: 0.0,
            stop: PI,
            count: 5,
            log: false,
            var2: None,
            start2: None,
            stop2: None,
            count2: None,
            log2: false,
            baseline: Default::default(),
        });
        let t = cmd_sweep(&cfg).unwrap();
        assert_eq!(col(&t, "phase"), vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI]);
        assert_eq!(col(&t, "flag"), vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(t.rows[0][1].is_nan());
        // Same baseline for D = 0: every ratio is one.
        assert!(col(&t, "E_ratio")[1..4].iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_dimensional_sweep_is_cartesian() {
        let mut cfg = RunConfig::canonical_default();
        cfg.sweep = Some(SweepBlock {
            var: SweepVar::D,
            start: 0.0,
            stop: 1.0,
            count: 3,
            log: false,
            var2: Some(SweepVar::Phase),
            start2: Some(0.0),
            stop2: Some(PI),
            count2: Some(5),
            log2: false,
            baseline: Default::default(),
        });
        let t = cmd_sweep(&cfg).unwrap();
        assert_eq!(t.rows.len(), 15);
        assert_eq!(col(&t, "D")[..5], [0.0; 5]);
        let w = col(&t, "W_ratio");
        assert_relative_eq!(w[10 + 2], 55.35, epsilon = 0.05);
    }

    #[test]
    fn figure_names() {
        assert!(matches!(cmd_figure("fig9", &RunConfig::canonical_default()), Err(CommandError::UnknownFigure(_))));
    }

    #[test]
    fn fig3_peak() {
        let mut cfg = RunConfig::canonical_default();
        cfg.figure.grid = 11;
        let t = cmd_figure("fig3", &cfg).unwrap();
        let w = col(&t, "W_ratio");
        let (idx, max) = w.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_relative_eq!(max, 55.35, epsilon = 0.05);
        assert_eq!(t.rows[idx][0], 1.0);
        assert_relative_eq!(t.rows[idx][1], PI / 2.0, epsilon = 1e-12);
    }
}
