//! Brute-force Lindblad integration in a truncated two-mode Fock space.
//!
//! Basis ordering is mode-1 major: `|n1, n2>` sits at `n1 (N+1) + n2`.
//! The density matrix is dense; operators are stored in coordinate form
//! and applied directly, so no superoperator matrix is ever formed.

pub mod sparse;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::dynamics::{self, DynamicsError, Mode, MomentState};
use crate::integrate::{ClassicalRk4, IntegrateError, Integrator, OdeSystem};
use crate::params::SystemParams;
use sparse::SparseOp;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const MIN_EIGEN_TOL: f64 = 1e-8;
pub const TAIL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),
    #[error("cutoff {cutoff} needs about {bytes} bytes, above the budget of {budget}")]
    CutoffTooLarge { cutoff: usize, bytes: usize, budget: usize },
    #[error("expected steady occupation {occupation} exceeds cutoff/4 = {limit}")]
    ValidityGate { occupation: f64, limit: f64 },
    #[error("top Fock level holds population {mass:e} at t = {t} (limit {TAIL_THRESHOLD:e})")]
    TailMassExceeded { t: f64, mass: f64 },
    #[error("density matrix invariant violated: {0}")]
    Invariant(String),
    #[error("eigensolver did not converge")]
    Eigen,
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Two-mode density matrix truncated at Fock level `cutoff` per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub cutoff: usize,
    pub data: DMatrix<Complex64>,
}

fn levels(cutoff: usize) -> usize {
    cutoff + 1
}

fn coherent_vector(cutoff: usize, a: Complex64) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(levels(cutoff));
    let mut c = Complex64::new(1.0, 0.0);
    for n in 0..levels(cutoff) {
        v.push(c);
        c = c * a / ((n + 1) as f64).sqrt();
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        levels(self.cutoff).pow(2)
    }

    pub fn vacuum(cutoff: usize) -> Self {
        Self::fock(cutoff, 0, 0)
    }

    pub fn fock(cutoff: usize, n1: usize, n2: usize) -> Self {
        let l = levels(cutoff);
        let mut data = DMatrix::zeros(l * l, l * l);
        let i = n1 * l + n2;
        data[(i, i)] = Complex64::new(1.0, 0.0);
        DensityMatrix { cutoff, data }
    }

    /// Product of (renormalized, truncated) coherent states.
    pub fn coherent_product(cutoff: usize, a: Complex64, b: Complex64) -> Self {
        let (va, vb) = (coherent_vector(cutoff, a), coherent_vector(cutoff, b));
        let psi: Vec<Complex64> = va.iter().flat_map(|x| vb.iter().map(move |y| x * y)).collect();
        let v = DMatrix::from_column_slice(psi.len(), 1, &psi);
        DensityMatrix { cutoff, data: &v * v.adjoint() }
    }

    /// Hermiticity, unit trace and positivity within the module tolerances.
    pub fn check(&self) -> Result<(), OracleError> {
        let herm = (&self.data - self.data.adjoint()).camax();
        if herm > HERMITIAN_TOL {
            return Err(OracleError::Invariant(format!("hermiticity defect {herm:e}")));
        }
        let tr = self.data.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(OracleError::Invariant(format!("trace {tr}")));
        }
        let min = min_eigenvalue(&self.data)?;
        if min < -MIN_EIGEN_TOL {
            return Err(OracleError::Invariant(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>, OracleError> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::try_new(h, 1e-15, 10_000).ok_or(OracleError::Eigen)?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> Result<f64, OracleError> {
    Ok(hermitian_eigenvalues(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Single-mode annihilation operator on `cutoff + 1` levels.
fn annihilation(cutoff: usize) -> DMatrix<Complex64> {
    let l = levels(cutoff);
    DMatrix::from_fn(
        l,
        l,
        |r, c| if c == r + 1 { Complex64::new((c as f64).sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) },
    )
}

/// Dense two-mode ladder operators `(m1, m2)`.
pub fn mode_operators(cutoff: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = annihilation(cutoff);
    let id = DMatrix::<Complex64>::identity(levels(cutoff), levels(cutoff));
    (a.kronecker(&id), id.kronecker(&a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// Upper bound on the bytes held by operators and integrator workspace.
    pub memory_budget: usize,
    /// Multiplies the phase in `H_L`; `-1` is a deliberate mutation used to
    /// check that the oracle comparison can fail.
    pub hl_phase_sign: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { memory_budget: 256 << 20, hl_phase_sign: 1.0 }
    }
}

/// Lindblad generator `drho/dt = K rho + rho K^dag + sum_j J_j rho J_j^dag`
/// with `K = -iH - (1/2) sum_j J_j^dag J_j`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub cutoff: usize,
    dim: usize,
    k: SparseOp,
    jumps: Vec<SparseOp>,
}

fn estimated_bytes(dim: usize, nnz: usize) -> usize {
    // Operator entries plus roughly six dense state copies held by RK4.
    let entry = std::mem::size_of::<(usize, usize, Complex64)>();
    nnz.saturating_mul(entry).saturating_add(dim.saturating_mul(dim).saturating_mul(6 * 16))
}

/// Builds the master-equation generator in the frame rotating at `omega0`.
pub fn build_generator(p: &SystemParams, cutoff: usize, opts: &GeneratorOptions) -> Result<Generator, OracleError> {
    if cutoff < 1 {
        return Err(OracleError::InvalidCutoff(cutoff));
    }
    let l = levels(cutoff);
    let dim = l * l;
    // Every operator here is banded with at most ~5 entries per row.
    let bytes = estimated_bytes(dim, 12 * dim);
    if bytes > opts.memory_budget {
        return Err(OracleError::CutoffTooLarge { cutoff, bytes, budget: opts.memory_budget });
    }

    let (m1, m2) = mode_operators(cutoff);
    let (m1d, m2d) = (m1.adjoint(), m2.adjoint());
    let e = Complex64::from_polar(1.0, p.phase());
    let e_l = Complex64::from_polar(1.0, opts.hl_phase_sign * p.phase());
    let c = |x: f64| Complex64::new(x, 0.0);

    let x = &m1d * &m2 * e_l;
    let h_l = (&x - x.adjoint()) * (-I * 0.5 * p.gamma_l());
    let y = &m2d * &m1 * e;
    let h_r = (&y - y.adjoint()) * (-I * 0.5 * p.gamma_r());
    let h = h_l + h_r + (&m1d + &m1) * c(p.drive_amp());

    let mut jumps_dense = vec![(&m1 + &m2 * e) * c(p.gamma_l().sqrt()), (&m1 + &m2 * e.conj()) * c(p.gamma_r().sqrt())];
    let (down, up) = (p.kappa() * (p.nbar() + 1.0), p.kappa() * p.nbar());
    for op in [&m1, &m2] {
        jumps_dense.push(op * c(down.sqrt()));
        jumps_dense.push(op.adjoint() * c(up.sqrt()));
    }
    jumps_dense.retain(|j| j.camax() > 0.0);

    let mut k = h * (-I);
    for j in &jumps_dense {
        k -= j.adjoint() * j * c(0.5);
    }
    Ok(Generator {
        cutoff,
        dim,
        k: SparseOp::from_dense(&k),
        jumps: jumps_dense.iter().map(SparseOp::from_dense).collect(),
    })
}

impl Generator {
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        self.k.left_mul_acc(rho, &mut out);
        self.k.right_mul_adjoint_acc(rho, &mut out);
        let mut tmp = DMatrix::zeros(self.dim, self.dim);
        for j in &self.jumps {
            tmp.fill(Complex64::new(0.0, 0.0));
            j.left_mul_acc(rho, &mut tmp);
            j.right_mul_adjoint_acc(&tmp, &mut out);
        }
        out
    }
}

fn unpack_matrix(dim: usize, y: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_iterator(dim, dim, y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])))
}

fn pack_matrix(m: &DMatrix<Complex64>, out: &mut [f64]) {
    for (dst, v) in out.chunks_exact_mut(2).zip(m.iter()) {
        dst[0] = v.re;
        dst[1] = v.im;
    }
}

impl OdeSystem for Generator {
    fn dim(&self) -> usize {
        2 * self.dim * self.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        pack_matrix(&self.apply(&unpack_matrix(self.dim, y)), dy);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub generator: GeneratorOptions,
    /// RK4 step in units of `1/alpha`.
    pub dt_alpha: f64,
    /// Enforce `|<m_j>_ss|^2 + nbar <= cutoff / 4` before running.
    pub gate: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { generator: GeneratorOptions::default(), dt_alpha: 0.01, gate: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

fn validity_gate(p: &SystemParams, cutoff: usize) -> Result<(), OracleError> {
    let limit = cutoff as f64 / 4.0;
    if p.drive_amp() == 0.0 {
        return if p.nbar() <= limit { Ok(()) } else { Err(OracleError::ValidityGate { occupation: p.nbar(), limit }) };
    }
    let (m1, m2) = analytic::steady_means(p)?;
    let occupation = m1.norm_sqr().max(m2.norm_sqr()) + p.nbar();
    if occupation > limit {
        return Err(OracleError::ValidityGate { occupation, limit });
    }
    Ok(())
}

/// Evolves the two-mode vacuum on `n_samples` uniform times over `[0, t_end]`.
pub fn oracle_evolve(
    p: &SystemParams,
    cutoff: usize,
    t_end: f64,
    n_samples: usize,
    opts: &OracleOptions,
) -> Result<OracleTrajectory, OracleError> {
    let times = dynamics::uniform_grid(t_end, n_samples)?;
    oracle_evolve_on(p, cutoff, &times, opts)
}

/// Evolves the two-mode vacuum onto arbitrary non-decreasing sample times.
pub fn oracle_evolve_on(
    p: &SystemParams,
    cutoff: usize,
    times: &[f64],
    opts: &OracleOptions,
) -> Result<OracleTrajectory, OracleError> {
    if opts.gate {
        validity_gate(p, cutoff)?;
    }
    let gen = build_generator(p, cutoff, &opts.generator)?;
    let mut y0 = vec![0.0; gen.dim()];
    pack_matrix(&DensityMatrix::vacuum(cutoff).data, &mut y0);
    let samples = ClassicalRk4::with_step(opts.dt_alpha / p.alpha()).integrate(&gen, 0.0, &y0, times)?;
    let mut states = Vec::with_capacity(samples.len());
    for (&t, y) in times.iter().zip(&samples) {
        let rho = DensityMatrix { cutoff, data: unpack_matrix(gen.dim, y) };
        rho.check()?;
        let mass = tail_mass(&rho);
        if mass > TAIL_THRESHOLD {
            return Err(OracleError::TailMassExceeded { t, mass });
        }
        states.push(rho);
    }
    Ok(OracleTrajectory { times: times.to_vec(), states })
}

/// The eight tracked moments, by trace against the truncated operators.
pub fn oracle_moments(rho: &DensityMatrix) -> MomentState {
    let (m1, m2) = mode_operators(rho.cutoff);
    let ev = |op: DMatrix<Complex64>| SparseOp::from_dense(&op).expectation(&rho.data);
    MomentState {
        m1: ev(m1.clone()),
        m2: ev(m2.clone()),
        m1_sq: ev(&m1 * &m1),
        m2_sq: ev(&m2 * &m2),
        n1: ev(m1.adjoint() * &m1).re,
        n2: ev(m2.adjoint() * &m2).re,
        m1m2: ev(&m1 * &m2),
        m1d_m2: ev(m1.adjoint() * &m2),
    }
}

/// Reduced state of `mode`, tracing out the other one.
pub fn reduced_state(rho: &DensityMatrix, mode: Mode) -> DMatrix<Complex64> {
    let l = levels(rho.cutoff);
    DMatrix::from_fn(l, l, |i, j| {
        (0..l)
            .map(|k| match mode {
                Mode::Charger => rho.data[(i * l + k, j * l + k)],
                Mode::Battery => rho.data[(k * l + i, k * l + j)],
            })
            .sum()
    })
}

/// Population with either mode in the top Fock level.
pub fn tail_mass(rho: &DensityMatrix) -> f64 {
    let l = levels(rho.cutoff);
    (0..l * l).filter(|i| i / l == rho.cutoff || i % l == rho.cutoff).map(|i| rho.data[(i, i)].re).sum()
}

fn number_mean(rho_b: &DMatrix<Complex64>) -> f64 {
    (0..rho_b.nrows()).map(|k| k as f64 * rho_b[(k, k)].re).sum()
}

/// Ergotropy by passive-state construction: eigenvalues in descending
/// order are paired with ascending Fock energies.
pub fn oracle_ergotropy_spectral(rho_b: &DMatrix<Complex64>, omega0: f64) -> Result<f64, OracleError> {
    let energy = omega0 * (number_mean(rho_b) + 0.5 * rho_b.trace().re);
    let mut lam = hermitian_eigenvalues(rho_b)?;
    lam.sort_by(|a, b| b.total_cmp(a));
    let passive: f64 = lam.iter().enumerate().map(|(k, l)| l * omega0 * (k as f64 + 0.5)).sum();
    Ok(energy - passive)
}

fn von_neumann_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

/// Relative entropy of coherence against the Fock-diagonal part, in bits.
pub fn oracle_coherence(rho_b: &DMatrix<Complex64>) -> Result<f64, OracleError> {
    let s = von_neumann_bits(hermitian_eigenvalues(rho_b)?);
    let s_diag = von_neumann_bits((0..rho_b.nrows()).map(|k| rho_b[(k, k)].re));
    Ok(s_diag - s)
}

/// Relative entropy to the thermal state with the same mean occupation,
/// `S(<n>) - S(rho)`, in bits.
pub fn oracle_thermal_relative_entropy(rho_b: &DMatrix<Complex64>) -> Result<f64, OracleError> {
    let s = von_neumann_bits(hermitian_eigenvalues(rho_b)?);
    let n = number_mean(rho_b);
    let s_th = if n > 0.0 { (n + 1.0) * (n + 1.0).log2() - n * n.log2() } else { 0.0 };
    Ok(s_th - s)
}
