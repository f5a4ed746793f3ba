//! Linear quadrature dynamics: drift and diffusion matrices for the three
//! model orders, covariance propagation and the stationary Lyapunov solve.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{ModelOrder, PhysicalConfig};
use crate::entanglement::symplectic_eigenvalues;
use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvalues, max_abs, symmetry_defect};
use crate::mean_field::{mean_residual, solve_mean_amplitudes, MeanAmplitudes, MEAN_FIELD_TOLERANCE};
use crate::ode::Dopri5;

/// Relative symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Allowed shortfall of 2ν below one.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-9;

/// Ordering of quadratures: (x₁, y₁, …, x_M, y_M, x_s, y_s[, x_n, y_n]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureLayout {
    pub modes: usize,
    pub has_bath: bool,
}

impl QuadratureLayout {
    pub fn new(modes: usize, has_bath: bool) -> Self {
        QuadratureLayout { modes, has_bath }
    }

    pub fn oscillators(&self) -> usize {
        self.modes + 1 + usize::from(self.has_bath)
    }

    pub fn dim(&self) -> usize {
        2 * self.oscillators()
    }

    pub fn mode(&self, m: usize) -> usize {
        2 * m
    }

    pub fn spin(&self) -> usize {
        2 * self.modes
    }

    pub fn bath(&self) -> Option<usize> {
        self.has_bath.then(|| 2 * self.modes + 2)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim());
        for m in 1..=self.modes {
            out.push(format!("x{m}"));
            out.push(format!("y{m}"));
        }
        out.extend(["xs".to_string(), "ys".to_string()]);
        if self.has_bath {
            out.extend(["xn".to_string(), "yn".to_string()]);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftModel {
    pub order: ModelOrder,
    pub k: DMatrix<f64>,
    /// Diagonal of the diffusion matrix.
    pub diffusion: DVector<f64>,
    pub layout: QuadratureLayout,
    /// Pump amplitudes E_m; all zero at second order, where the drive lives in the means.
    pub pump_amplitudes: Vec<f64>,
    pub pump_frequencies: Vec<f64>,
    /// Largest cavity frequency, which bounds the integrator step.
    pub max_mode_frequency: f64,
    /// Shared cavity decay rate.
    pub kappa: f64,
}

impl DriftModel {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn diffusion_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diffusion)
    }

    /// Deterministic drive p(t) entering the mean quadratures.
    pub fn pump(&self, t: f64) -> DVector<f64> {
        let mut p = DVector::zeros(self.dim());
        self.pump_into(t, p.as_mut_slice());
        p
    }

    fn pump_into(&self, t: f64, out: &mut [f64]) {
        for (m, (e, lambda)) in self.pump_amplitudes.iter().zip(&self.pump_frequencies).enumerate() {
            if *e != 0.0 {
                let (sin, cos) = (lambda * t).sin_cos();
                out[2 * m] += std::f64::consts::SQRT_2 * e * cos;
                out[2 * m + 1] -= std::f64::consts::SQRT_2 * e * sin;
            }
        }
    }

    /// Largest eigenvalue modulus of K.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(complex_eigenvalues(&self.k)?.iter().fold(0.0_f64, |acc, z| acc.max(z.norm())))
    }

    /// Integrator step cap: 0.05 divided by the fastest rate in the problem.
    pub fn step_cap(&self) -> Result<f64> {
        let fastest = self.max_mode_frequency.max(self.spectral_radius()?);
        if !(fastest > 0.0) {
            return Ok(f64::INFINITY);
        }
        Ok(0.05 / fastest)
    }

    fn integrator(&self) -> Result<Dopri5> {
        let d_norm = self.diffusion.amax();
        let scale = if self.kappa > 0.0 { d_norm / self.kappa } else { 1.0 };
        let atol = (1e-12 * scale).max(1e-15);
        let cap = self.step_cap()?;
        Ok(Dopri5::new(1e-10, atol, if cap.is_finite() { cap } else { 1.0 }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceState {
    pub v: DMatrix<f64>,
    pub time: f64,
}

impl CovarianceState {
    pub fn new(v: DMatrix<f64>, time: f64) -> Result<Self> {
        if v.nrows() != v.ncols() || v.nrows() % 2 != 0 {
            return Err(Error::OddDimension(v.nrows()));
        }
        let defect = symmetry_defect(&v);
        if defect > SYMMETRY_TOLERANCE * max_abs(&v).max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { defect });
        }
        Ok(CovarianceState { v, time })
    }

    /// Every oscillator in its ground state.
    pub fn vacuum(layout: QuadratureLayout) -> Self {
        CovarianceState { v: DMatrix::identity(layout.dim(), layout.dim()) * 0.5, time: 0.0 }
    }

    /// Smallest value of 2ν over the symplectic spectrum.
    pub fn min_two_nu(&self) -> Result<f64> {
        Ok(2.0 * symplectic_eigenvalues(&self.v)?[0])
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.v.nrows();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.v[(i, j)]);
            }
        }
        out
    }
}

struct Blocks<'a> {
    cfg: &'a PhysicalConfig,
    layout: QuadratureLayout,
    k: DMatrix<f64>,
    diffusion: DVector<f64>,
}

impl<'a> Blocks<'a> {
    /// Cavity blocks, spin–cavity coupling and the spin block.
    fn new(cfg: &'a PhysicalConfig, has_bath: bool, spin_plus: f64, spin_minus: f64) -> Self {
        let layout = QuadratureLayout::new(cfg.mode_count(), has_bath);
        let n = layout.dim();
        let mut k = DMatrix::zeros(n, n);
        let mut diffusion = DVector::zeros(n);
        let kappa = cfg.kappa();
        let coupling = (2.0 * cfg.smm.spin).sqrt() * cfg.coupling_g;
        let s = layout.spin();
        for (m, w) in cfg.mode_frequencies().into_iter().enumerate() {
            let i = layout.mode(m);
            k[(i, i)] = -kappa;
            k[(i, i + 1)] = w;
            k[(i + 1, i)] = -w;
            k[(i + 1, i + 1)] = -kappa;
            k[(i + 1, s)] = -coupling;
            k[(s + 1, i)] = -coupling;
            diffusion[i] = kappa;
            diffusion[i + 1] = kappa;
        }
        let es = 2.0 * cfg.smm.e_transverse * cfg.smm.spin;
        k[(s, s)] = -cfg.gamma_s;
        k[(s + 1, s + 1)] = -cfg.gamma_s;
        k[(s, s + 1)] = spin_plus - es;
        k[(s + 1, s)] = spin_minus - es;
        diffusion[s] = cfg.gamma_s;
        diffusion[s + 1] = cfg.gamma_s;
        Blocks { cfg, layout, k, diffusion }
    }

    fn bath(&mut self, sb_top: f64, sb_bottom: f64, omega_n: f64) {
        let s = self.layout.spin();
        let b = self.layout.bath().expect("layout has a bath");
        self.k[(s, b + 1)] = sb_top;
        self.k[(s + 1, b)] = sb_bottom;
        self.k[(b, s + 1)] = sb_top;
        self.k[(b + 1, s)] = sb_bottom;
        self.k[(b, b)] = -self.cfg.gamma_b;
        self.k[(b + 1, b + 1)] = -self.cfg.gamma_b;
        self.k[(b, b + 1)] = omega_n;
        self.k[(b + 1, b)] = -omega_n;
        self.diffusion[b] = self.cfg.gamma_b;
        self.diffusion[b + 1] = self.cfg.gamma_b;
    }

    fn finish(self, order: ModelOrder, pumped: bool) -> Result<DriftModel> {
        let omegas = self.cfg.mode_frequencies();
        let amplitudes = if pumped { self.cfg.pump_amplitudes()? } else { vec![0.0; omegas.len()] };
        Ok(DriftModel {
            order,
            k: self.k,
            diffusion: self.diffusion,
            layout: self.layout,
            pump_amplitudes: amplitudes,
            pump_frequencies: self.cfg.pump_frequencies(),
            max_mode_frequency: omegas.iter().fold(0.0_f64, |a, w| a.max(w.abs())),
            kappa: self.cfg.kappa(),
        })
    }
}

pub fn build_drift_zeroth(cfg: &PhysicalConfig) -> Result<DriftModel> {
    cfg.validate()?;
    let omega_s = cfg.hp_frequencies(ModelOrder::Zeroth)?.omega_s;
    Blocks::new(cfg, false, omega_s, -omega_s).finish(ModelOrder::Zeroth, true)
}

pub fn build_drift_first(cfg: &PhysicalConfig) -> Result<DriftModel> {
    cfg.validate()?;
    let hp = cfg.hp_frequencies(ModelOrder::First)?;
    let sb = cfg.smm.alpha * (cfg.smm.bath_spin() * cfg.smm.spin).sqrt();
    let mut blocks = Blocks::new(cfg, true, hp.omega_s, -hp.omega_s);
    blocks.bath(sb, -sb, hp.omega_n.expect("bath frequency"));
    blocks.finish(ModelOrder::First, true)
}

/// Kerr-linearized drift around converged mean amplitudes.
pub fn build_drift_second(cfg: &PhysicalConfig, means: &MeanAmplitudes) -> Result<DriftModel> {
    cfg.validate()?;
    let residual = mean_residual(means, cfg);
    if !(residual <= MEAN_FIELD_TOLERANCE) {
        return Err(Error::StaleLinearization { residual, tolerance: MEAN_FIELD_TOLERANCE });
    }
    let hp = cfg.hp_frequencies(ModelOrder::Second)?;
    let smm = &cfg.smm;
    let (k1, k2) = (smm.d_axial, smm.gamma);
    let s_abs_sq = means.s_mean.norm_sqr();
    // ⟨s⟩² and ⟨s⟩⟨n⟩ are real for the imaginary means; the real parts carry them.
    let s_sq = (means.s_mean * means.s_mean).re;
    let s_n = (means.s_mean * means.n_mean).re;
    let omega_nl = hp.omega_s - k1 - 4.0 * k1 * s_abs_sq - k2 * means.n_mean.norm_sqr();
    let sb = smm.alpha * (smm.bath_spin() * smm.spin).sqrt();
    let omega_n = hp.omega_n.expect("bath frequency") - k2 * s_abs_sq;

    let mut blocks = Blocks::new(cfg, true, omega_nl + 2.0 * k1 * s_sq, -omega_nl + 2.0 * k1 * s_sq);
    blocks.bath(sb + 2.0 * k2 * s_n, -sb, omega_n);
    blocks.finish(ModelOrder::Second, false)
}

/// Builds the drift model for `order`, solving the mean field when needed.
pub fn build_drift(cfg: &PhysicalConfig, order: ModelOrder) -> Result<DriftModel> {
    match order {
        ModelOrder::Zeroth => build_drift_zeroth(cfg),
        ModelOrder::First => build_drift_first(cfg),
        ModelOrder::Second => build_drift_second(cfg, &solve_mean_amplitudes(cfg)?),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part among the eigenvalues of K.
    pub abscissa: f64,
}

pub fn stability_check(model: &DriftModel) -> Result<Stability> {
    let abscissa = complex_eigenvalues(&model.k)?.iter().fold(f64::NEG_INFINITY, |a, z| a.max(z.re));
    Ok(Stability { stable: abscissa < 0.0, abscissa })
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Uniform grid of `points` samples on [0, t_max].
pub fn uniform_grid(t_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(t_max > 0.0) {
        return Err(Error::InvalidGrid(format!("need ≥ 2 points on a positive window, got {points} on {t_max:e}")));
    }
    Ok((0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect())
}

/// Streams V(t) at each output time to `observe`; V(times[0]) = `v0`.
///
/// Every output is checked for symmetry and physicality.
pub fn propagate_covariance_with<F>(model: &DriftModel, v0: &CovarianceState, times: &[f64], mut observe: F) -> Result<()>
where
    F: FnMut(&CovarianceState) -> Result<()>,
{
    validate_grid(times)?;
    let n = model.dim();
    if v0.v.nrows() != n {
        return Err(Error::InvalidConfig(format!("V0 has dimension {} but the model has {n}", v0.v.nrows())));
    }
    let solver = model.integrator()?;
    let k = &model.k;
    let d = &model.diffusion;
    let mut state = CovarianceState { v: DMatrix::zeros(n, n), time: 0.0 };
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let v = DMatrixView::from_slice(y, n, n);
        let mut out = DMatrixViewMut::from_slice(dy, n, n);
        out.gemm(1.0, k, &v, 0.0);
        // KV + (KV)ᵀ written symmetrically so that V stays exactly symmetric.
        for j in 0..n {
            for i in 0..j {
                let sum = out[(i, j)] + out[(j, i)];
                out[(i, j)] = sum;
                out[(j, i)] = sum;
            }
            out[(j, j)] = 2.0 * out[(j, j)] + d[j];
        }
    };
    solver.integrate(rhs, v0.v.as_slice(), times, |_, t, y| {
        state.v.copy_from_slice(y);
        state.time = t;
        check_state(&state)?;
        observe(&state)
    })?;
    Ok(())
}

pub fn propagate_covariance(model: &DriftModel, v0: &CovarianceState, times: &[f64]) -> Result<Vec<CovarianceState>> {
    let mut out = Vec::with_capacity(times.len());
    propagate_covariance_with(model, v0, times, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

fn check_state(state: &CovarianceState) -> Result<()> {
    let defect = symmetry_defect(&state.v);
    if defect > SYMMETRY_TOLERANCE * max_abs(&state.v) {
        return Err(Error::InvariantViolation { time: state.time, what: format!("asymmetry {defect:e}") });
    }
    let two_nu_min = state.min_two_nu()?;
    if two_nu_min < 1.0 - PHYSICALITY_TOLERANCE {
        return Err(Error::Unphysical { time: state.time, two_nu_min });
    }
    Ok(())
}

/// Mean quadratures u' = K u + p(t), starting from `u0`.
pub fn propagate_means(model: &DriftModel, u0: &DVector<f64>, times: &[f64]) -> Result<Vec<DVector<f64>>> {
    validate_grid(times)?;
    let n = model.dim();
    let solver = model.integrator()?;
    let mut out = Vec::with_capacity(times.len());
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let u = DMatrixView::from_slice(y, n, 1);
        let mut du = DMatrixViewMut::from_slice(dy, n, 1);
        du.gemm(1.0, &model.k, &u, 0.0);
        model.pump_into(t, dy);
    };
    solver.integrate(rhs, u0.as_slice(), times, |_, _, y| {
        out.push(DVector::from_column_slice(y));
        Ok(())
    })?;
    Ok(out)
}

/// Solves K V + V Kᵀ + 𝔇 = 0 by a dense vectorized linear solve.
pub fn steady_state_covariance(model: &DriftModel) -> Result<CovarianceState> {
    let stability = stability_check(model)?;
    if !stability.stable {
        return Err(Error::NoSteadyState { abscissa: stability.abscissa });
    }
    let n = model.dim();
    let k = &model.k;
    // Column-major vec: vec(KV) = (I⊗K) vec V, vec(VKᵀ) = (K⊗I) vec V.
    let mut a = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for p in 0..n {
                a[(row, j * n + p)] += k[(i, p)];
                a[(row, p * n + i)] += k[(j, p)];
            }
        }
    }
    let mut rhs = DVector::zeros(n * n);
    for i in 0..n {
        rhs[i * n + i] = -model.diffusion[i];
    }
    let x = a.lu().solve(&rhs).ok_or(Error::NoSteadyState { abscissa: stability.abscissa })?;
    let v = DMatrix::from_column_slice(n, n, x.as_slice());
    let v = (&v + v.transpose()) * 0.5;
    Ok(CovarianceState { v, time: f64::INFINITY })
}

/// Frobenius norm of K V + V Kᵀ + 𝔇.
pub fn lyapunov_residual(model: &DriftModel, v: &DMatrix<f64>) -> f64 {
    let kv = &model.k * v;
    (&kv + kv.transpose() + model.diffusion_matrix()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PresetName;
    use approx::assert_relative_eq;

    fn fe8() -> PhysicalConfig {
        PhysicalConfig::preset(PresetName::Fe8)
    }

    fn single_mode(kappa: f64, omega: f64) -> DriftModel {
        DriftModel {
            order: ModelOrder::Zeroth,
            k: DMatrix::from_row_slice(2, 2, &[-kappa, omega, -omega, -kappa]),
            diffusion: DVector::from_element(2, kappa),
            layout: QuadratureLayout::new(0, false),
            pump_amplitudes: vec![],
            pump_frequencies: vec![],
            max_mode_frequency: omega,
            kappa,
        }
    }

    /// Exact V(t) from the block exponential of [[−K, 𝔇], [0, Kᵀ]].
    fn exponential_oracle(model: &DriftModel, v0: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let n = model.dim();
        let mut z = DMatrix::zeros(2 * n, 2 * n);
        z.view_mut((0, 0), (n, n)).copy_from(&(-&model.k));
        z.view_mut((0, n), (n, n)).copy_from(&model.diffusion_matrix());
        z.view_mut((n, n), (n, n)).copy_from(&model.k.transpose());
        let f = (z * t).exp();
        let phi = f.view((n, n), (n, n)).transpose();
        let q = &phi * f.view((0, n), (n, n));
        &phi * v0 * phi.transpose() + q
    }

    #[test]
    fn hand_assembled_single_mode_example() {
        let mut cfg = fe8();
        cfg.cavity.mode_count = 1;
        cfg.overrides.mode_frequencies = Some(vec![1.0]);
        cfg.overrides.kappa = Some(0.1);
        cfg.overrides.omega_s = Some(2.0);
        cfg.smm.spin = 2.0;
        cfg.coupling_g = 0.1; // √(2S)·G = 0.2
        cfg.smm.e_transverse = 0.15; // E·S = 0.3
        let model = build_drift_zeroth(&cfg).unwrap();
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[-0.1, 1.0, 0.0, 0.0, -1.0, -0.1, -0.2, 0.0, 0.0, 0.0, 0.0, 1.4, -0.2, 0.0, -2.6, 0.0],
        );
        assert!((model.k - want).amax() < 1e-15);
        assert_eq!(model.diffusion.as_slice(), &[0.1, 0.1, 0.0, 0.0]);
    }

    #[test]
    fn fe8_zeroth_block_placement() {
        let model = build_drift_zeroth(&fe8()).unwrap();
        assert_eq!(model.dim(), 14);
        let g = (20.0_f64).sqrt() * 1e7;
        for m in 0..6 {
            assert_eq!(model.k[(13, 2 * m)], -g);
            assert_eq!(model.k[(2 * m + 1, 12)], -g);
            assert_eq!(model.k[(13, 2 * m + 1)], 0.0);
            assert_eq!(model.k[(2 * m, 12)], 0.0);
        }
    }

    #[test]
    fn zero_coupling_decouples_spin() {
        let mut cfg = fe8();
        cfg.coupling_g = 0.0;
        let model = build_drift_zeroth(&cfg).unwrap();
        for i in 0..12 {
            for j in 12..14 {
                assert_eq!(model.k[(i, j)], 0.0);
                assert_eq!(model.k[(j, i)], 0.0);
            }
        }
    }

    #[test]
    fn first_order_spin_bath_entries() {
        let model = build_drift_first(&fe8()).unwrap();
        assert_eq!(model.dim(), 16);
        let sb = 1.42e9 * 250.0_f64.sqrt();
        assert_relative_eq!(sb, 2.245e10, max_relative = 1e-3);
        assert_eq!(model.k[(12, 15)], sb);
        assert_eq!(model.k[(13, 14)], -sb);
        assert_eq!(model.k[(14, 13)], sb);
        assert_eq!(model.k[(15, 12)], -sb);
        assert_eq!(model.diffusion[14], 1e6);
    }

    #[test]
    fn first_order_without_hyperfine_flip_flop_reduces_to_zeroth() {
        let mut cfg = fe8();
        cfg.smm.alpha = 0.0;
        let first = build_drift_first(&cfg).unwrap();
        cfg.overrides.omega_s = Some(first.k[(12, 13)] + 2.0 * cfg.smm.e_transverse * cfg.smm.spin);
        let zeroth = build_drift_zeroth(&cfg).unwrap();
        assert_eq!(first.k.view((0, 0), (14, 14)), zeroth.k);
    }

    #[test]
    fn second_order_without_kerr_equals_first_order() {
        let mut cfg = fe8();
        cfg.smm.d_axial = 3.6e10;
        let mut c = cfg.clone();
        // K₁ = D and K₂ = γ; hold the linear frequencies fixed while switching them off.
        let hp = cfg.hp_frequencies(ModelOrder::First).unwrap();
        c.overrides.omega_s = Some(hp.omega_s);
        c.overrides.omega_n = hp.omega_n;
        c.smm.gamma = 0.0;
        c.smm.d_axial = 0.0;
        let means = solve_mean_amplitudes(&c).unwrap();
        assert!(means.s_mean.norm() > 0.0);
        let second = build_drift_second(&c, &means).unwrap();
        let first = build_drift_first(&c).unwrap();
        assert!((second.k - first.k).amax() < 1e-3, "Kerr-free second order must match first");
        assert!(second.pump_amplitudes.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn second_order_at_zero_drive_shifts_spin_frequency() {
        let cfg = fe8().with_power(0.0);
        let means = solve_mean_amplitudes(&cfg).unwrap();
        let second = build_drift_second(&cfg, &means).unwrap();
        let first = build_drift_first(&cfg).unwrap();
        let mut expect = first.k.clone();
        expect[(12, 13)] -= cfg.smm.d_axial;
        expect[(13, 12)] += cfg.smm.d_axial;
        assert!((second.k - expect).amax() < 1e-3);
    }

    #[test]
    fn second_order_fe8_is_finite_and_rejects_stale_means() {
        let cfg = fe8();
        let mut means = solve_mean_amplitudes(&cfg).unwrap();
        let model = build_drift_second(&cfg, &means).unwrap();
        assert!(model.k.iter().all(|v| v.is_finite()));
        means.s_mean *= 1.01;
        assert!(matches!(build_drift_second(&cfg, &means), Err(Error::StaleLinearization { .. })));
    }

    #[test]
    fn stability_examples() {
        let mut m = single_mode(1.0, 0.0);
        m.k = -DMatrix::identity(2, 2);
        let s = stability_check(&m).unwrap();
        assert!(s.stable);
        assert_relative_eq!(s.abscissa, -1.0);
        m.k = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let s = stability_check(&m).unwrap();
        assert!(!s.stable);
        assert!(s.abscissa.abs() < 1e-15);
    }

    #[test]
    fn frozen_dynamics_keep_initial_state() {
        let mut m = single_mode(0.0, 0.0);
        m.k = DMatrix::zeros(2, 2);
        m.diffusion = DVector::zeros(2);
        let v0 = CovarianceState::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]), 0.0).unwrap();
        for s in propagate_covariance(&m, &v0, &[0.0, 1.0, 2.0]).unwrap() {
            assert_eq!(s.v, v0.v);
        }
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let m = single_mode(0.3, 5.0);
        let v0 = CovarianceState::vacuum(m.layout);
        for s in propagate_covariance(&m, &v0, &[0.0, 0.5, 3.0]).unwrap() {
            assert!((s.v.clone() - &v0.v).amax() < 1e-15);
        }
    }

    #[test]
    fn excess_noise_relaxes_to_vacuum() {
        let kappa = 0.7;
        let m = single_mode(kappa, 3.0);
        let v0 = CovarianceState::new(DMatrix::identity(2, 2), 0.0).unwrap();
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.2).collect();
        for s in propagate_covariance(&m, &v0, &times).unwrap() {
            let want = 0.5 + 0.5 * (-2.0 * kappa * s.time).exp();
            assert_relative_eq!(s.v[(0, 0)], want, max_relative = 1e-8);
            assert_relative_eq!(s.v[(1, 1)], want, max_relative = 1e-8);
            assert!(s.v[(0, 1)].abs() < 1e-12);
        }
    }

    #[test]
    fn integrator_matches_matrix_exponential_for_fe8() {
        for order in [ModelOrder::Zeroth, ModelOrder::First] {
            let model = build_drift(&fe8(), order).unwrap();
            let v0 = CovarianceState::vacuum(model.layout);
            let times = [0.0, 5e-11, 1e-10];
            let states = propagate_covariance(&model, &v0, &times).unwrap();
            for s in &states[1..] {
                let exact = exponential_oracle(&model, &v0.v, s.time);
                let err = (&s.v - &exact).amax() / exact.amax();
                assert!(err <= 1e-6, "{order}: relative error {err:e}");
            }
        }
    }

    #[test]
    fn pump_does_not_enter_covariance() {
        for order in [ModelOrder::Zeroth, ModelOrder::First] {
            let times = uniform_grid(2e-11, 5).unwrap();
            let run = |p: f64| {
                let model = build_drift(&fe8().with_power(p), order).unwrap();
                propagate_covariance(&model, &CovarianceState::vacuum(model.layout), &times).unwrap()
            };
            assert_eq!(run(1e-14), run(1e-12));
        }
    }

    #[test]
    fn steady_state_of_single_mode_is_vacuum() {
        let m = single_mode(0.4, 2.0);
        let ss = steady_state_covariance(&m).unwrap();
        assert!((ss.v - DMatrix::identity(2, 2) * 0.5).amax() < 1e-14);
    }

    #[test]
    fn undamped_rotation_has_no_steady_state() {
        let mut m = single_mode(0.0, 1.0);
        m.diffusion = DVector::zeros(2);
        assert!(matches!(steady_state_covariance(&m), Err(Error::NoSteadyState { .. })));
    }

    #[test]
    fn damped_fe8_first_order_steady_state_is_physical() {
        let mut cfg = fe8();
        cfg.gamma_s = 1e8;
        let model = build_drift_first(&cfg).unwrap();
        let ss = steady_state_covariance(&model).unwrap();
        assert!(lyapunov_residual(&model, &ss.v) <= 1e-10 * model.diffusion.norm());
        assert!(ss.min_two_nu().unwrap() >= 1.0 - PHYSICALITY_TOLERANCE);
        assert_eq!(symmetry_defect(&ss.v), 0.0);
    }

    #[test]
    fn mean_quadratures_follow_driven_cavity() {
        // Empty driven mode: ⟨a⟩ → E/(κ + i(ω−Λ)) in the pump frame; at resonance |⟨a⟩| → E/κ.
        let (kappa, omega, e) = (0.5, 20.0, 0.3);
        let mut m = single_mode(kappa, omega);
        m.layout = QuadratureLayout::new(0, false);
        m.pump_amplitudes = vec![e];
        m.pump_frequencies = vec![omega];
        let times = [0.0, 30.0];
        let u = propagate_means(&m, &DVector::zeros(2), &times).unwrap();
        let amp = (u[1][0].powi(2) + u[1][1].powi(2)).sqrt() / std::f64::consts::SQRT_2;
        assert_relative_eq!(amp, e / kappa, max_relative = 1e-6);
    }

    #[test]
    fn labels_follow_layout() {
        let l = QuadratureLayout::new(2, true);
        assert_eq!(l.labels(), ["x1", "y1", "x2", "y2", "xs", "ys", "xn", "yn"]);
        assert_eq!(l.dim(), 8);
        assert_eq!(l.bath(), Some(6));
    }
}
