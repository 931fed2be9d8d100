//! Time integrators for real-valued first-order systems.
//!
//! Each scheme implements [`Integrator`] and is registered by name in
//! [`INTEGRATORS`], so configurations can pick one at runtime:
//!
//! * `dopri5` - adaptive Dormand-Prince 5(4) with error control.
//! * `rk4` - classical fixed-step fourth-order Runge-Kutta.
//!
//! Integrators land exactly on every requested sample time.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("sample times must be finite and non-decreasing from t0")]
    BadSampleTimes,
    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),
    #[error("unknown integrator `{0}`")]
    Unknown(String),
}

/// Autonomous or time-dependent system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Settings shared by all schemes; each uses the subset that applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Fixed step for non-adaptive schemes; also caps adaptive steps when set.
    pub step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, step: None, max_steps: 50_000_000 }
    }
}

pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Integrates from `(t0, y0)` and returns the state at each of `times`.
    fn integrate(
        &self,
        system: &dyn OdeSystem,
        t0: f64,
        y0: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, IntegrateError>;
}

type IntegratorCtor = fn(IntegratorOptions) -> Box<dyn Integrator>;

/// Name -> constructor table of available integrators.
pub static INTEGRATORS: &[(&str, IntegratorCtor)] =
    &[("dopri5", |o| Box::new(DormandPrince::new(o))), ("rk4", |o| Box::new(ClassicalRk4::new(o)))];

pub fn integrator_by_name(name: &str, opts: IntegratorOptions) -> Result<Box<dyn Integrator>, IntegrateError> {
    INTEGRATORS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(opts))
        .ok_or_else(|| IntegrateError::Unknown(name.to_string()))
}

pub fn integrator_names() -> impl Iterator<Item = &'static str> {
    INTEGRATORS.iter().map(|(n, _)| *n)
}

fn check_times(t0: f64, times: &[f64]) -> Result<(), IntegrateError> {
    let mut prev = t0;
    for &t in times {
        if !t.is_finite() || t < prev {
            return Err(IntegrateError::BadSampleTimes);
        }
        prev = t;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DormandPrince {
    opts: IntegratorOptions,
}

impl DormandPrince {
    pub fn new(opts: IntegratorOptions) -> Self {
        Self { opts }
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl DormandPrince {
    fn error_norm(&self, y: &[f64], y_new: &[f64], ws: &Workspace, h: f64) -> f64 {
        let k = &ws.k;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let err = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
            acc += (err / sc).powi(2);
        }
        (acc / y.len().max(1) as f64).sqrt()
    }

    fn initial_step(&self, system: &dyn OdeSystem, t: f64, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let n = y.len();
        let sc: Vec<f64> = y.iter().map(|v| self.opts.atol + self.opts.rtol * v.abs()).collect();
        let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.max(1e-300) } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<f64> = y.iter().zip(f0).map(|(v, f)| v + h0 * f).collect();
        let mut f1 = vec![0.0; n];
        system.rhs(t + h0, &y1, &mut f1);
        let d2 =
            (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span)
    }
}

impl Integrator for DormandPrince {
    fn name(&self) -> &'static str {
        "dopri5"
    }

    fn integrate(
        &self,
        system: &dyn OdeSystem,
        t0: f64,
        y0: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, IntegrateError> {
        check_times(t0, times)?;
        let n = system.dim();
        assert_eq!(y0.len(), n, "state dimension mismatch");
        let mut ws = Workspace { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], y_new: vec![0.0; n] };
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut out = Vec::with_capacity(times.len());
        let t_last = times.last().copied().unwrap_or(t0);
        system.rhs(t, &y, &mut ws.k[0]);
        let mut h = if t_last > t0 { self.initial_step(system, t, &y, &ws.k[0].clone(), t_last - t0) } else { 0.0 };
        if let Some(cap) = self.opts.step {
            h = h.min(cap);
        }
        let mut steps = 0usize;
        let mut err_prev: f64 = 1e-4;

        for &target in times {
            while t < target {
                if steps >= self.opts.max_steps {
                    return Err(IntegrateError::TooManySteps(self.opts.max_steps));
                }
                let remaining = target - t;
                let last = h >= remaining;
                let h_try = if last { remaining } else { h };
                if h_try <= 1e-14 * t.abs().max(1.0) && !last {
                    return Err(IntegrateError::StepSizeUnderflow { t, h: h_try });
                }
                self.stage(system, t, &y, h_try, &mut ws);
                let err = self.error_norm(&y, &ws.y_new, &ws, h_try);
                if !err.is_finite() {
                    return Err(IntegrateError::NonFinite(t));
                }
                steps += 1;
                // PI step-size controller (Hairer's DOPRI5 defaults).
                let beta = 0.04;
                let expo = 0.2 - 0.75 * beta;
                if err <= 1.0 {
                    let fac = (0.9 * err.max(1e-10).powf(-expo) * err_prev.powf(beta)).clamp(0.2, 10.0);
                    err_prev = err.max(1e-4);
                    t = if last { target } else { t + h_try };
                    std::mem::swap(&mut y, &mut ws.y_new);
                    ws.k.swap(0, 6);
                    // Keep the proposed step unless the final clipped step was small.
                    if !last || h_try * fac > h {
                        h = h_try * fac;
                    }
                } else {
                    let fac = (0.9 * err.powf(-expo)).clamp(0.2, 1.0);
                    h = h_try * fac;
                }
                if let Some(cap) = self.opts.step {
                    h = h.min(cap);
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}

impl DormandPrince {
    // Computes y_new and k[1..7] from k[0] = f(t, y).
    fn stage(&self, system: &dyn OdeSystem, t: f64, y: &[f64], h: f64, ws: &mut Workspace) {
        let n = y.len();
        let Workspace { k, tmp, y_new } = ws;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k[0][i];
        }
        system.rhs(t + C2 * h, tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        system.rhs(t + C3 * h, tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        system.rhs(t + C4 * h, tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        system.rhs(t + C5 * h, tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        system.rhs(t + h, tmp, &mut k[5]);
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        system.rhs(t + h, y_new, &mut k[6]);
    }
}

/// Fixed-step RK4. The step is `opts.step`, shrunk per sample interval so
/// that every sample time is hit exactly.
#[derive(Debug, Clone)]
pub struct ClassicalRk4 {
    opts: IntegratorOptions,
}

impl ClassicalRk4 {
    pub fn new(opts: IntegratorOptions) -> Self {
        Self { opts }
    }

    pub fn with_step(step: f64) -> Self {
        Self::new(IntegratorOptions { step: Some(step), ..Default::default() })
    }
}

impl Integrator for ClassicalRk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn integrate(
        &self,
        system: &dyn OdeSystem,
        t0: f64,
        y0: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, IntegrateError> {
        check_times(t0, times)?;
        let n = system.dim();
        assert_eq!(y0.len(), n, "state dimension mismatch");
        let t_last = times.last().copied().unwrap_or(t0);
        // Without an explicit step, fall back to 1000 steps over the span.
        let h_max = self.opts.step.unwrap_or((t_last - t0) / 1000.0);
        let mut y = y0.to_vec();
        let mut t = t0;
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut out = Vec::with_capacity(times.len());
        let mut steps = 0usize;
        for &target in times {
            let span = target - t;
            if span > 0.0 {
                if !(h_max > 0.0) {
                    return Err(IntegrateError::StepSizeUnderflow { t, h: h_max });
                }
                let m = (span / h_max).ceil().max(1.0) as usize;
                let h = span / m as f64;
                for j in 0..m {
                    if steps >= self.opts.max_steps {
                        return Err(IntegrateError::TooManySteps(self.opts.max_steps));
                    }
                    let ts = t + j as f64 * h;
                    system.rhs(ts, &y, &mut k1);
                    for i in 0..n {
                        tmp[i] = y[i] + 0.5 * h * k1[i];
                    }
                    system.rhs(ts + 0.5 * h, &tmp, &mut k2);
                    for i in 0..n {
                        tmp[i] = y[i] + 0.5 * h * k2[i];
                    }
                    system.rhs(ts + 0.5 * h, &tmp, &mut k3);
                    for i in 0..n {
                        tmp[i] = y[i] + h * k3[i];
                    }
                    system.rhs(ts + h, &tmp, &mut k4);
                    for i in 0..n {
                        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                    steps += 1;
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrateError::NonFinite(target));
                }
                t = target;
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn registry_lists_both_schemes() {
        let names: Vec<_> = integrator_names().collect();
        assert_eq!(names, ["dopri5", "rk4"]);
        for n in names {
            assert_eq!(integrator_by_name(n, IntegratorOptions::default()).unwrap().name(), n);
        }
        assert!(matches!(integrator_by_name("euler", IntegratorOptions::default()), Err(IntegrateError::Unknown(_))));
    }

    #[test]
    fn dopri_decay_matches_exponential() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let out = DormandPrince::new(IntegratorOptions::default()).integrate(&Decay(0.7), 0.0, &[1.0], &times).unwrap();
        for (t, y) in times.iter().zip(&out) {
            let err = (y[0] - (-0.7 * t).exp()).abs() / (-0.7 * t).exp();
            assert!(err < 1e-8, "t={t} rel err {err:e}");
        }
    }

    #[test]
    fn dopri_oscillator_long_time() {
        let times = [100.0];
        let out = DormandPrince::new(IntegratorOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() })
            .integrate(&Oscillator, 0.0, &[1.0, 0.0], &times)
            .unwrap();
        assert!((out[0][0] - 100f64.cos()).abs() < 1e-8);
        assert!((out[0][1] + 100f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let err = |h: f64| {
            let out = ClassicalRk4::with_step(h).integrate(&Oscillator, 0.0, &[1.0, 0.0], &[5.0]).unwrap();
            (out[0][0] - 5f64.cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn repeated_and_initial_sample_times() {
        for name in ["dopri5", "rk4"] {
            let integ = integrator_by_name(name, IntegratorOptions { step: Some(0.01), ..Default::default() }).unwrap();
            let out = integ.integrate(&Decay(1.0), 0.0, &[2.0], &[0.0, 0.0, 1.0]).unwrap();
            assert_eq!(out[0], vec![2.0]);
            assert_eq!(out[1], vec![2.0]);
            assert!((out[2][0] - 2.0 * (-1f64).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_decreasing_times() {
        let integ = DormandPrince::new(IntegratorOptions::default());
        assert_eq!(integ.integrate(&Decay(1.0), 0.0, &[1.0], &[1.0, 0.5]), Err(IntegrateError::BadSampleTimes));
    }

    #[test]
    fn step_budget_is_enforced() {
        let integ = DormandPrince::new(IntegratorOptions { max_steps: 3, ..Default::default() });
        assert_eq!(integ.integrate(&Oscillator, 0.0, &[1.0, 0.0], &[1000.0]), Err(IntegrateError::TooManySteps(3)));
    }
}
