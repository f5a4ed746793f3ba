//! Density-matrix dynamics of a truncated spin–photon system in the lab frame.

mod operators;
mod truncation;

pub use operators::{annihilation, build_operators, spin_matrices, OperatorSet, SparseColumns, SparseMatrix, TruncationSpec};
pub use truncation::{divergence_time, truncation_study, TruncationRow, TruncationTable, DIVERGENCE_THRESHOLD};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::PhysicalConfig;
use crate::error::{Error, Result};
use crate::ode::Dopri5;

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;
/// Integrator tolerances; negativities near 1e-12 need errors well below that.
pub const DM_RTOL: f64 = 1e-10;
pub const DM_ATOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedState {
    pub rho: DMatrix<Complex64>,
    pub time: f64,
}

impl TruncatedState {
    /// Empty cavity with the spin in its m = +S state.
    pub fn initial(spec: &TruncationSpec) -> Self {
        let n = spec.dim();
        let mut rho = DMatrix::zeros(n, n);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        TruncatedState { rho, time: 0.0 }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.rho.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v))
    }

    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (op * &self.rho).trace()
    }

    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > HERMITICITY_TOLERANCE {
            return Err(self.violation(format!("hermiticity defect {herm:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOLERANCE {
            return Err(self.violation(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOLERANCE {
            return Err(self.violation(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    fn violation(&self, what: String) -> Error {
        Error::InvariantViolation { time: self.time, what }
    }
}

/// Partial trace over the spin factor.
pub fn reduced_modes_state(rho: &DMatrix<Complex64>, spec: &TruncationSpec) -> DMatrix<Complex64> {
    let ns = spec.spin_levels();
    let dm = spec.mode_dim();
    DMatrix::from_fn(dm, dm, |a, b| (0..ns).map(|k| rho[(a * ns + k, b * ns + k)]).sum())
}

/// Partial transpose of the modes from `split` on, for `mode_count` modes of `levels` each.
pub fn partial_transpose_dm(rho: &DMatrix<Complex64>, levels: usize, mode_count: usize, split: usize) -> DMatrix<Complex64> {
    let db = levels.pow((mode_count - split) as u32);
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |r, c| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        rho[(a * db + b2, a2 * db + b)]
    })
}

/// ln ‖ρ^{T_B}‖₁ with the trace norm normalized by tr ρ, clamped at zero.
pub fn dm_log_negativity(rho_modes: &DMatrix<Complex64>, levels: usize, mode_count: usize, split: usize) -> Result<f64> {
    if split == 0 || split >= mode_count {
        return Err(Error::IndexOutOfRange { index: split, len: mode_count });
    }
    let pt = partial_transpose_dm(rho_modes, levels, mode_count, split);
    let h = (&pt + pt.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let trace: f64 = eig.eigenvalues.iter().sum();
    let negative: f64 = eig.eigenvalues.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    if !(trace > 0.0) {
        return Ok(0.0);
    }
    Ok((2.0 * negative / trace).ln_1p().max(0.0))
}

/// Time-independent Hamiltonian plus one drive term per mode.
#[derive(Clone, Debug)]
pub struct DmHamiltonian {
    pub static_part: DMatrix<Complex64>,
    pub drive_amplitudes: Vec<f64>,
    pub drive_frequencies: Vec<f64>,
    a: Vec<DMatrix<Complex64>>,
}

impl DmHamiltonian {
    pub fn at(&self, t: f64) -> DMatrix<Complex64> {
        let mut h = self.static_part.clone();
        for ((a, e), lambda) in self.a.iter().zip(&self.drive_amplitudes).zip(&self.drive_frequencies) {
            // i E (a† e^{−iΛt} − a e^{iΛt})
            let c = Complex64::new(0.0, *e) * Complex64::from_polar(1.0, -lambda * t);
            h += a.adjoint() * c + a * c.conj();
        }
        h
    }
}

pub fn build_hamiltonian_parts(cfg: &PhysicalConfig, ops: &OperatorSet) -> Result<DmHamiltonian> {
    let spec = &ops.spec;
    let omegas = cfg.mode_frequencies();
    if omegas.len() < spec.mode_count {
        return Err(Error::InvalidConfig(format!(
            "config has {} cavity modes but the truncation needs {}",
            omegas.len(),
            spec.mode_count
        )));
    }
    let amplitudes = cfg.pump_amplitudes()?;
    let lambdas = cfg.pump_frequencies();
    let (omega_e, _) = cfg.zeeman();
    let smm = &cfg.smm;
    let re = |x: f64| Complex64::new(x, 0.0);
    let mut h = &ops.s_z * re(omega_e) - &ops.s_z * &ops.s_z * re(smm.d_axial)
        + (&ops.s_x * &ops.s_x - &ops.s_y * &ops.s_y) * re(smm.e_transverse);
    for (m, a) in ops.a.iter().enumerate() {
        let adag = a.adjoint();
        h += &adag * a * re(omegas[m]) + (&adag + a) * &ops.s_x * re(cfg.coupling_g);
    }
    // Hermitize to remove rounding asymmetry from the products.
    let h = (&h + h.adjoint()) * re(0.5);
    Ok(DmHamiltonian {
        static_part: h,
        drive_amplitudes: amplitudes[..spec.mode_count].to_vec(),
        drive_frequencies: lambdas[..spec.mode_count].to_vec(),
        a: ops.a.clone(),
    })
}

pub fn build_hamiltonian_dm(cfg: &PhysicalConfig, ops: &OperatorSet, t: f64) -> Result<DMatrix<Complex64>> {
    Ok(build_hamiltonian_parts(cfg, ops)?.at(t))
}

/// Largest transition frequency of the bare spin Hamiltonian.
pub fn spin_spectral_width(cfg: &PhysicalConfig, spin: f64) -> f64 {
    let (sz, sp) = spin_matrices(spin);
    let sm = sp.transpose();
    // S_x² − S_y² = (S_+² + S_−²)/2
    let (omega_e, _) = cfg.zeeman();
    let h = &sz * omega_e - &sz * &sz * cfg.smm.d_axial + (&sp * &sp + &sm * &sm) * (0.5 * cfg.smm.e_transverse);
    let ev = SymmetricEigen::new(h).eigenvalues;
    ev.max() - ev.min()
}

/// Right-hand side of the master equation, with precomputed sparse pieces.
struct MasterEquation {
    n: usize,
    h0: SparseColumns,
    raise: Vec<SparseColumns>,
    lower: Vec<SparseColumns>,
    amplitudes: Vec<f64>,
    frequencies: Vec<f64>,
    /// −κ(n_i + n_j) − κ_s (m_i − m_j)², column-major.
    decay: Vec<f64>,
    /// For each mode: (source index, √(n+1)) of a ρ a† per basis index.
    jumps: Vec<Vec<Option<(usize, f64)>>>,
    kappa: f64,
    scratch: Vec<Complex64>,
}

impl MasterEquation {
    fn new(cfg: &PhysicalConfig, ops: &OperatorSet) -> Result<Self> {
        let parts = build_hamiltonian_parts(cfg, ops)?;
        let spec = ops.spec;
        let n = spec.dim();
        let kappa = cfg.kappa();
        let decoded: Vec<(Vec<usize>, f64)> = (0..n).map(|i| spec.decode(i)).collect();
        let mut decay = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let photons: usize = decoded[i].0.iter().sum::<usize>() + decoded[j].0.iter().sum::<usize>();
                let dm = decoded[i].1 - decoded[j].1;
                decay[j * n + i] = -kappa * photons as f64 - cfg.kappa_s * dm * dm;
            }
        }
        let ns = spec.spin_levels();
        let jumps = (0..spec.mode_count)
            .map(|m| {
                let stride = ns * spec.mode_levels.pow((spec.mode_count - 1 - m) as u32);
                (0..n)
                    .map(|i| {
                        let k = decoded[i].0[m];
                        (k + 1 < spec.mode_levels).then(|| (i + stride, ((k + 1) as f64).sqrt()))
                    })
                    .collect()
            })
            .collect();
        Ok(MasterEquation {
            n,
            h0: SparseColumns::from_dense(&parts.static_part),
            raise: ops.a.iter().map(|a| SparseColumns::from_dense(&a.adjoint())).collect(),
            lower: ops.a.iter().map(SparseColumns::from_dense).collect(),
            amplitudes: parts.drive_amplitudes,
            frequencies: parts.drive_frequencies,
            decay,
            jumps,
            kappa,
            scratch: vec![Complex64::default(); n * n],
        })
    }

    fn rhs(&mut self, t: f64, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        // X = ρ H(t); for Hermitian ρ and H, Hρ = X†.
        let x = &mut self.scratch;
        x.iter_mut().for_each(|z| *z = Complex64::default());
        self.h0.right_mul_add(Complex64::new(1.0, 0.0), rho, x);
        for m in 0..self.amplitudes.len() {
            let e = self.amplitudes[m];
            if e != 0.0 {
                let coeff = Complex64::new(0.0, e) * Complex64::from_polar(1.0, -self.frequencies[m] * t);
                self.raise[m].right_mul_add(coeff, rho, x);
                self.lower[m].right_mul_add(coeff.conj(), rho, x);
            }
        }
        // −i[H, ρ] = −i(X† − X), filled so that the result is exactly Hermitian.
        let minus_i = Complex64::new(0.0, -1.0);
        for j in 0..n {
            for i in 0..=j {
                let idx = j * n + i;
                let mut v = minus_i * (x[i * n + j].conj() - x[idx]) + rho[idx] * self.decay[idx];
                for jump in &self.jumps {
                    if let (Some((si, ai)), Some((sj, aj))) = (jump[i], jump[j]) {
                        v += rho[sj * n + si] * (2.0 * self.kappa * ai * aj);
                    }
                }
                if i == j {
                    v.im = 0.0;
                }
                out[idx] = v;
                out[i * n + j] = v.conj();
            }
        }
    }

    fn step_cap(&self, cfg: &PhysicalConfig, spec: &TruncationSpec) -> f64 {
        let omega_max = cfg.mode_frequencies()[..spec.mode_count].iter().fold(0.0_f64, |a, w| a.max(w.abs()));
        let fastest = omega_max.max(spin_spectral_width(cfg, spec.spin));
        if fastest > 0.0 {
            0.05 / fastest
        } else {
            1.0
        }
    }
}

/// Integrates the master equation, handing each output state to `observe`.
pub fn evolve_master_equation_with<F>(
    rho0: &TruncatedState,
    cfg: &PhysicalConfig,
    ops: &OperatorSet,
    times: &[f64],
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&TruncatedState) -> Result<()>,
{
    let n = ops.spec.dim();
    if rho0.rho.nrows() != n {
        return Err(Error::InvalidConfig(format!("state dimension {} does not match {n}", rho0.rho.nrows())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("times must be strictly increasing".into()));
    }
    let mut eq = MasterEquation::new(cfg, ops)?;
    let solver = Dopri5::new(DM_RTOL, DM_ATOL, eq.step_cap(cfg, &ops.spec));
    let mut state = TruncatedState { rho: DMatrix::zeros(n, n), time: 0.0 };
    solver.integrate(
        |t, y: &[Complex64], dy: &mut [Complex64]| eq.rhs(t, y, dy),
        rho0.rho.as_slice(),
        times,
        |_, t, y| {
            state.rho.copy_from_slice(y);
            state.time = t;
            state.check()?;
            observe(&state)
        },
    )?;
    Ok(())
}

pub fn evolve_master_equation(
    rho0: &TruncatedState,
    cfg: &PhysicalConfig,
    ops: &OperatorSet,
    times: &[f64],
) -> Result<Vec<TruncatedState>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_master_equation_with(rho0, cfg, ops, times, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Per-time readout of a density-matrix run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DmTrace {
    pub times: Vec<f64>,
    pub negativity: Vec<f64>,
    pub purity: Vec<f64>,
    pub trace_defect: Vec<f64>,
    /// ⟨a†a⟩ of each mode at each time.
    pub photons: Vec<Vec<f64>>,
}

/// Evolves from the initial state and records mode–mode negativity between
/// the first half of the modes and the rest.
pub fn run_dm_trace(cfg: &PhysicalConfig, spec: &TruncationSpec, times: &[f64]) -> Result<DmTrace> {
    let ops = build_operators(spec)?;
    let numbers: Vec<DMatrix<Complex64>> = ops.a.iter().map(|a| a.adjoint() * a).collect();
    let split = (spec.mode_count / 2).max(1);
    let mut trace = DmTrace::default();
    evolve_master_equation_with(&TruncatedState::initial(spec), cfg, &ops, times, |s| {
        let negativity = if spec.mode_count >= 2 {
            dm_log_negativity(&reduced_modes_state(&s.rho, spec), spec.mode_levels, spec.mode_count, split)?
        } else {
            0.0
        };
        trace.times.push(s.time);
        trace.negativity.push(negativity);
        trace.purity.push(s.purity());
        trace.trace_defect.push((s.trace() - 1.0).norm());
        trace.photons.push(numbers.iter().map(|nop| s.expectation(nop).re).collect());
        Ok(())
    })?;
    Ok(trace)
}
