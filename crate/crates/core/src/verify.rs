//! Self-check battery behind the `verify` subcommand.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic;
use crate::dynamics::{self, Mode, MomentState};
use crate::oracle::{self, GeneratorOptions, OracleOptions};
use crate::params::SystemParams;
use crate::thermo;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Measured deviation compared against `tolerance`.
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Replaces every tolerance when set.
    pub strict_tol: Option<f64>,
    /// Flips the phase in `H_L` inside the oracle.
    pub mutate_hl_phase: bool,
    /// Random parameter draws for the analytic/ODE comparison.
    pub draws: usize,
    pub oracle_cutoff: usize,
    pub oracle_omega_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            strict_tol: None,
            mutate_hl_phase: false,
            draws: 20,
            oracle_cutoff: 6,
            oracle_omega_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<28} observed={:<24e} tol={:<10e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.observed,
                c.tolerance,
                c.detail
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

/// Relative deviation `|a - b| / |b|`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Largest deviation over a trajectory, for each moment, relative to that
/// moment's largest magnitude along the reference trajectory.
pub fn sup_relative_error(test: &[MomentState], reference: &[MomentState]) -> f64 {
    let mut scale = [0.0f64; 8];
    for s in reference {
        for (k, v) in s.magnitudes().iter().enumerate() {
            scale[k] = scale[k].max(*v);
        }
    }
    let mut worst = 0.0f64;
    for (a, b) in test.iter().zip(reference) {
        for (k, d) in a.sub(b).magnitudes().iter().enumerate() {
            if scale[k] > 0.0 {
                worst = worst.max(d / scale[k]);
            } else {
                worst = worst.max(*d);
            }
        }
    }
    worst
}

/// Random non-degenerate parameter draw.
pub fn random_params(rng: &mut impl Rng) -> SystemParams {
    loop {
        let gr = rng.gen_range(0.1..1.0);
        let gl = rng.gen_range(0.0..1.0);
        let kappa = rng.gen_range(0.01..0.5);
        let drive = rng.gen_range(0.01..1.0);
        let nbar = rng.gen_range(0.0..1.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let p = SystemParams::from_rates(1.0, gl, gr, kappa, nbar, drive, phase).expect("draw within bounds");
        if analytic::zeta(&p).norm() > 1e-3 * p.alpha().powi(2) {
            return p;
        }
    }
}

struct Battery {
    opts: VerifyOptions,
    checks: Vec<Check>,
}

impl Battery {
    fn tol(&self, nominal: f64) -> f64 {
        self.opts.strict_tol.unwrap_or(nominal)
    }

    fn record(&mut self, name: &'static str, observed: f64, nominal: f64, detail: String) {
        let tolerance = self.tol(nominal);
        let passed = observed.is_finite() && observed <= tolerance;
        self.checks.push(Check { name, observed, tolerance, passed, detail });
    }

    fn failure(&mut self, name: &'static str, nominal: f64, err: impl std::fmt::Display) {
        let tolerance = self.tol(nominal);
        self.checks.push(Check { name, observed: f64::NAN, tolerance, passed: false, detail: format!("error: {err}") });
    }
}

fn steady(d: f64) -> thermo::Metrics {
    thermo::steady_state_metrics(&SystemParams::canonical_set(d).expect("valid")).expect("non-degenerate")
}

/// Runs every check; failures are recorded, never propagated.
pub fn run_verify(opts: VerifyOptions) -> VerifyReport {
    let mut b = Battery { opts, checks: Vec::new() };
    let (one, zero) = (steady(1.0), steady(0.0));

    let e_ratio = one.e_b / zero.e_b;
    b.record("energy_ratio", (e_ratio - 33.96).abs(), 0.05, format!("E_B(D=1)/E_B(D=0) = {e_ratio:.6}"));
    let w_ratio = one.w / zero.w;
    b.record("ergotropy_ratio", (w_ratio - 55.35).abs(), 0.05, format!("W(D=1)/W(D=0) = {w_ratio:.6}"));

    let bound = {
        let base = SystemParams::canonical_set(1.0).expect("valid");
        let p1 = base.with_kappa(1e-6 * base.gamma_r()).expect("valid");
        let p0 = p1.with_chirality(0.0).expect("valid");
        analytic::steady_metrics(&p1).expect("ok").ergotropy / analytic::steady_metrics(&p0).expect("ok").ergotropy
    };
    b.record("ergotropy_bound", rel(bound, 64.0), 1e-3, format!("ratio at kappa/gamma_R = 1e-6: {bound:.6}"));
    b.record("extraction_ratio", (one.r - 0.9884).abs(), 5e-4, format!("R_ss(D=1) = {:.6}", one.r));
    b.record("charging_efficiency", (one.eta - 3.52).abs(), 0.01, format!("eta_ss(D=1) = {:.6}", one.eta));

    // ODE steady state against the closed forms.
    let p = SystemParams::canonical_set(1.0).expect("valid").with_nbar(0.3).expect("valid");
    match dynamics::steady_from_ode(&p, &dynamics::SteadyOptions::default())
        .map_err(|e| e.to_string())
        .and_then(|s| thermo::metrics_at(&s, &p).map_err(|e| e.to_string()))
    {
        Ok(m) => {
            let exact = thermo::steady_state_metrics(&p).expect("non-degenerate");
            let err = [rel(m.e_b, exact.e_b), rel(m.e_c, exact.e_c), rel(m.w, exact.w)].into_iter().fold(0.0, f64::max);
            b.record("ode_steady_vs_closed_form", err, 1e-6, "E_B, E_C, W at nbar = 0.3".into());
        }
        Err(e) => b.failure("ode_steady_vs_closed_form", 1e-6, e),
    }

    // Analytic trajectories against the ODE on random draws.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draws: Vec<SystemParams> = (0..opts.draws).map(|_| random_params(&mut rng)).collect();
    let errs: Vec<Result<f64, String>> = draws
        .par_iter()
        .map(|p| {
            let times = dynamics::uniform_grid(20.0 / p.alpha(), 41).map_err(|e| e.to_string())?;
            let ode = dynamics::evolve_on(
                &dynamics::MomentSystem::new(*p),
                &times,
                &crate::integrate::DormandPrince::new(crate::integrate::IntegratorOptions {
                    rtol: 1e-12,
                    atol: 1e-16,
                    ..Default::default()
                }),
            )
            .map_err(|e| e.to_string())?;
            let exact = analytic::analytic_trajectory(p, &times).map_err(|e| e.to_string())?;
            Ok(sup_relative_error(&exact.states, &ode.states))
        })
        .collect();
    match errs.into_iter().collect::<Result<Vec<f64>, String>>() {
        Ok(v) => b.record(
            "analytic_vs_ode",
            v.iter().copied().fold(0.0, f64::max),
            1e-6,
            format!("{} draws, seed {}", opts.draws, opts.seed),
        ),
        Err(e) => b.failure("analytic_vs_ode", 1e-6, e),
    }

    // Fock-space oracle against the ODE at reduced drive.
    let base = SystemParams::canonical_set(0.5).expect("valid");
    let p =
        base.with_drive(opts.oracle_omega_scale * base.gamma_r()).and_then(|p| p.with_phase(PI / 4.0)).expect("valid");
    let oracle_opts = OracleOptions {
        generator: GeneratorOptions {
            hl_phase_sign: if opts.mutate_hl_phase { -1.0 } else { 1.0 },
            ..Default::default()
        },
        ..Default::default()
    };
    let t_end = 10.0 / p.alpha();
    let oracle_run = oracle::oracle_evolve(&p, opts.oracle_cutoff, t_end, 11, &oracle_opts)
        .map_err(|e| e.to_string())
        .and_then(|tr| {
            let ode = dynamics::evolve(&p, t_end, 11, 1e-12, 1e-16).map_err(|e| e.to_string())?;
            Ok((tr, ode))
        });
    match oracle_run {
        Ok((tr, ode)) => {
            let fock: Vec<MomentState> = tr.states.iter().map(oracle::oracle_moments).collect();
            b.record(
                "oracle_vs_ode",
                sup_relative_error(&fock, &ode.states),
                1e-4,
                format!("D = 0.5, phase = pi/4, cutoff {}", opts.oracle_cutoff),
            );
            let last = tr.states.last().expect("samples");
            let rho_b = oracle::reduced_state(last, Mode::Battery);
            let gauss = thermo::gaussian_from_moments(&oracle::oracle_moments(last), Mode::Battery)
                .and_then(|g| thermo::ergotropy(&g, p.omega0()));
            match (oracle::oracle_ergotropy_spectral(&rho_b, p.omega0()), gauss) {
                (Ok(s), Ok(g)) => b.record("spectral_ergotropy", (s - g).abs(), 1e-5, format!("W = {g:e}")),
                (Err(e), _) => b.failure("spectral_ergotropy", 1e-5, e),
                (_, Err(e)) => b.failure("spectral_ergotropy", 1e-5, e),
            }
        }
        Err(e) => b.failure("oracle_vs_ode", 1e-4, e),
    }

    // Gaussian identities along a thermal ODE trajectory.
    let p = SystemParams::canonical_set(0.5).expect("valid").with_nbar(0.5).expect("valid");
    match dynamics::evolve(&p, 20.0 / p.alpha(), 41, 1e-12, 1e-16) {
        Ok(tr) => {
            let th = analytic::thermal_responses(&p, &tr.times).expect("non-degenerate");
            let src = p.kappa() * p.nbar();
            let mut worst = 0.0f64;
            for (s, r) in tr.states.iter().zip(&th) {
                for mode in [Mode::Charger, Mode::Battery] {
                    let m = s.mean(mode);
                    let sq = (s.square(mode) - m * m).norm();
                    let var = (s.number(mode) - m.norm_sqr() - src * r.weight(mode)).abs();
                    worst = worst.max(sq).max(var);
                }
            }
            b.record("gaussian_identities", worst, 1e-6, "D = 0.5, nbar = 0.5".into());
        }
        Err(e) => b.failure("gaussian_identities", 1e-6, e),
    }

    let p = SystemParams::canonical_set(0.5).expect("valid");
    let late = analytic::thermal_weight(&p, Mode::Battery, 2000.0 / p.alpha());
    let ss = analytic::thermal_weight_ss(&p, Mode::Battery);
    match (late, ss) {
        (Ok(l), Ok(s)) => b.record("thermal_weight_limit", rel(l, s), 1e-10, format!("R_2,ss = {s:e}")),
        (Err(e), _) | (_, Err(e)) => b.failure("thermal_weight_limit", 1e-10, e),
    }

    VerifyReport { checks: b.checks }
}
