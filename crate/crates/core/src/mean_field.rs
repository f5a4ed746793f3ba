//! Stationary mean amplitudes in the frame co-rotating with the first pump.
//!
//! Eliminating the cavity and bath amplitudes leaves one implicit equation
//! for the giant-spin amplitude that depends on |⟨s⟩|² only, so it reduces
//! to a scalar root problem in y = |⟨s⟩|. The overall phase is then fixed by
//! the convention that ⟨s⟩ and ⟨n⟩ are purely imaginary and the cavity
//! amplitudes real, which is the form the fluctuation equations are written in.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ModelOrder, PhysicalConfig};
use crate::error::{Error, Result};

/// Largest relative fixed-point defect accepted by the linearization.
pub const MEAN_FIELD_TOLERANCE: f64 = 1e-10;

const SCAN_INTERVALS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detunings {
    pub modes: Vec<f64>,
    pub spin: f64,
    pub bath: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanAmplitudes {
    pub a_mean: Vec<Complex64>,
    pub s_mean: Complex64,
    pub n_mean: Complex64,
    pub residual: f64,
    pub detunings: Detunings,
    /// Number of roots of the scalar equation found in the search bracket.
    pub multiplicity: usize,
}

impl MeanAmplitudes {
    pub fn spin_occupation(&self) -> f64 {
        self.s_mean.norm_sqr()
    }

    pub fn bath_occupation(&self) -> f64 {
        self.n_mean.norm_sqr()
    }
}

pub fn rotating_detunings(cfg: &PhysicalConfig) -> Result<Detunings> {
    let omegas = cfg.mode_frequencies();
    let lambdas = cfg.pump_frequencies();
    let hp = cfg.hp_frequencies(ModelOrder::First)?;
    let lambda1 = lambdas[0];
    Ok(Detunings {
        modes: omegas.iter().zip(&lambdas).map(|(w, l)| w - l).collect(),
        spin: hp.omega_s - lambda1,
        bath: hp.omega_n.expect("first order has a bath") - lambda1,
    })
}

/// Constants of the reduced equations, gathered once.
struct Reduced {
    /// κ_m + iΔ_m.
    z: Vec<Complex64>,
    e: Vec<f64>,
    g_half: f64,
    alpha_sq: f64,
    alpha_js: f64,
    k1: f64,
    k2: f64,
    gamma_s: f64,
    gamma_b: f64,
    detunings: Detunings,
}

impl Reduced {
    fn new(cfg: &PhysicalConfig) -> Result<Self> {
        let kappa = cfg.kappa();
        if !(kappa > 0.0) {
            return Err(Error::InvalidConfig("mean field needs κ > 0".into()));
        }
        if !(cfg.gamma_b > 0.0) {
            return Err(Error::InvalidConfig("mean field needs Γ_b > 0".into()));
        }
        let detunings = rotating_detunings(cfg)?;
        let smm = &cfg.smm;
        let js = smm.bath_spin() * smm.spin;
        Ok(Reduced {
            z: detunings.modes.iter().map(|d| Complex64::new(kappa, *d)).collect(),
            e: cfg.pump_amplitudes()?,
            g_half: cfg.coupling_g * (smm.spin / 2.0).sqrt(),
            alpha_sq: smm.alpha * smm.alpha * js,
            alpha_js: smm.alpha * js.sqrt(),
            k1: smm.d_axial,
            k2: smm.gamma,
            gamma_s: cfg.gamma_s,
            gamma_b: cfg.gamma_b,
            detunings,
        })
    }

    /// Complex source term −iG√(S/2)·E₁/z₁ of the spin equation.
    fn source(&self) -> Complex64 {
        Complex64::new(0.0, -self.g_half) * (self.e[0] / self.z[0])
    }

    fn bath_denominator(&self, s_sq: f64) -> Complex64 {
        Complex64::new(self.gamma_b, self.detunings.bath - self.k2 * s_sq)
    }

    /// Denominator of the spin equation as a function of |⟨s⟩|².
    fn spin_denominator(&self, s_sq: f64) -> Complex64 {
        let bath = self.bath_denominator(s_sq);
        let b = self.gamma_s + self.g_half * self.g_half / self.z[0] + self.alpha_sq / bath;
        let shift = self.detunings.spin - self.k1 - 2.0 * self.k1 * s_sq - self.alpha_sq * self.k2 * s_sq / bath.norm_sqr();
        Complex64::new(0.0, shift) + b
    }

    fn bath_amplitude(&self, s: Complex64) -> Complex64 {
        Complex64::new(0.0, -self.alpha_js) * s / self.bath_denominator(s.norm_sqr())
    }

    fn first_mode_amplitude(&self, s: Complex64) -> Complex64 {
        (self.e[0] - Complex64::new(0.0, self.g_half) * s) / self.z[0]
    }
}

pub fn solve_mean_amplitudes(cfg: &PhysicalConfig) -> Result<MeanAmplitudes> {
    let red = Reduced::new(cfg)?;
    let c = red.source().norm();
    let (y, multiplicity) = if c == 0.0 { (0.0, 1) } else { solve_modulus(&red, c)? };

    let s_mean = Complex64::new(0.0, y);
    let n_exact = red.bath_amplitude(s_mean);
    let sign = if n_exact.im < 0.0 { -1.0 } else { 1.0 };
    let n_mean = Complex64::new(0.0, sign * n_exact.norm());
    let mut a_mean: Vec<Complex64> = red.e.iter().zip(&red.z).map(|(e, z)| e / z).collect();
    a_mean[0] = red.first_mode_amplitude(s_mean);

    let mut means = MeanAmplitudes {
        a_mean,
        s_mean,
        n_mean,
        residual: 0.0,
        detunings: red.detunings.clone(),
        multiplicity,
    };
    means.residual = residual_with(&red, &means);
    if !(means.residual <= MEAN_FIELD_TOLERANCE) {
        return Err(Error::MeanFieldNotConverged(format!(
            "residual {:e} after bracketing |s| = {y:e}",
            means.residual
        )));
    }
    Ok(means)
}

/// Smallest root of y·|den(y²)| = c, which is the branch reached by ramping
/// the drive up from zero.
fn solve_modulus(red: &Reduced, c: f64) -> Result<(f64, usize)> {
    let g = |y: f64| y * red.spin_denominator(y * y).norm() - c;
    let d0 = red.spin_denominator(0.0).norm();
    if !(d0 > 0.0) {
        return Err(Error::MeanFieldNotConverged("spin denominator vanishes at zero amplitude".into()));
    }
    let mut y_max = 10.0 * c / d0;
    let mut tries = 0;
    while !(g(y_max) > 0.0) {
        y_max *= 10.0;
        tries += 1;
        if tries > 20 || !y_max.is_finite() {
            return Err(Error::MeanFieldNotConverged(format!("no sign change of the spin equation up to |s| = {y_max:e}")));
        }
    }

    let mut roots = Vec::new();
    let step = y_max / SCAN_INTERVALS as f64;
    let mut lo = 0.0;
    let mut g_lo = g(lo);
    for i in 1..=SCAN_INTERVALS {
        let hi = if i == SCAN_INTERVALS { y_max } else { i as f64 * step };
        let g_hi = g(hi);
        if g_hi == 0.0 || (g_lo < 0.0) != (g_hi < 0.0) {
            roots.push((lo, hi));
        }
        lo = hi;
        g_lo = g_hi;
    }
    let (mut a, mut b) = *roots
        .first()
        .ok_or_else(|| Error::MeanFieldNotConverged("no root in search bracket".into()))?;
    let mut g_a = g(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if (g_mid < 0.0) == (g_a < 0.0) {
            a = mid;
            g_a = g_mid;
        } else {
            b = mid;
        }
    }
    let y = if g(a).abs() <= g(b).abs() { a } else { b };
    Ok((y, roots.len()))
}

fn relative_defect(value: f64, target: f64) -> f64 {
    let scale = value.abs().max(target.abs());
    if scale == 0.0 {
        0.0
    } else {
        (value - target).abs() / scale
    }
}

fn complex_defect(value: Complex64, target: Complex64) -> f64 {
    let scale = value.norm().max(target.norm());
    if scale == 0.0 {
        0.0
    } else {
        (value - target).norm() / scale
    }
}

fn residual_with(red: &Reduced, means: &MeanAmplitudes) -> f64 {
    if means.a_mean.len() != red.e.len() {
        return f64::INFINITY;
    }
    let s = means.s_mean;
    let s_sq = s.norm_sqr();
    // Moduli for ⟨s⟩ and ⟨n⟩: the equations hold up to a common frame phase.
    let s_target = red.source().norm() / red.spin_denominator(s_sq).norm();
    let n_target = red.bath_amplitude(s).norm();
    let mut worst = relative_defect(s.norm(), s_target).max(relative_defect(means.n_mean.norm(), n_target));
    worst = worst.max(complex_defect(means.a_mean[0], red.first_mode_amplitude(s)));
    for m in 1..red.e.len() {
        worst = worst.max(complex_defect(means.a_mean[m], red.e[m] / red.z[m]));
    }
    worst
}

/// Largest relative defect of the four stationary relations.
pub fn mean_residual(means: &MeanAmplitudes, cfg: &PhysicalConfig) -> f64 {
    match Reduced::new(cfg) {
        Ok(red) => residual_with(&red, means),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PhysicalConfig, PresetName};
    use approx::assert_relative_eq;

    fn fe8() -> PhysicalConfig {
        PhysicalConfig::preset(PresetName::Fe8)
    }

    /// Damped iteration of the complex spin equation in its literal form,
    /// without the modulus reduction.
    fn fixed_point_oracle(cfg: &PhysicalConfig) -> Complex64 {
        let smm = &cfg.smm;
        let kappa = cfg.kappa();
        let e1 = cfg.pump_amplitudes().unwrap()[0];
        let det = rotating_detunings(cfg).unwrap();
        let g = cfg.coupling_g * (smm.spin / 2.0).sqrt();
        let a2 = smm.alpha * smm.alpha * smm.bath_spin() * smm.spin;
        let (k1, k2, gb) = (smm.d_axial, smm.gamma, cfg.gamma_b);
        let i = Complex64::i();
        let mut s = Complex64::new(0.0, 0.0);
        for _ in 0..100_000 {
            let s2 = s.norm_sqr();
            let x = det.bath - k2 * s2;
            let b = cfg.gamma_s + g * g / kappa + a2 / (i * x + gb);
            let r = det.spin - k1 - 2.0 * k1 * s2 - a2 * k2 * s2 / (gb * gb + x * x);
            let next = -i * g * e1 / kappa / (i * r + b);
            let s_new = 0.5 * s + 0.5 * next;
            if (s_new - s).norm() <= 1e-16 * s_new.norm() {
                return s_new;
            }
            s = s_new;
        }
        s
    }

    #[test]
    fn resonant_drive_has_zero_mode_detunings() {
        let det = rotating_detunings(&fe8()).unwrap();
        assert!(det.modes.iter().all(|d| *d == 0.0));
        let hp = fe8().hp_frequencies(ModelOrder::First).unwrap();
        assert_eq!(det.spin, hp.omega_s - 6.75e11);
    }

    #[test]
    fn pumping_at_spin_frequency_zeroes_spin_detuning() {
        let mut cfg = fe8();
        let omega_s = cfg.hp_frequencies(ModelOrder::First).unwrap().omega_s;
        let mut lambdas = cfg.mode_frequencies();
        lambdas[0] = omega_s;
        cfg.drive.pump_frequencies = Some(lambdas);
        assert_eq!(rotating_detunings(&cfg).unwrap().spin, 0.0);
    }

    #[test]
    fn fe8_solution_matches_independent_iteration() {
        let cfg = fe8();
        let means = solve_mean_amplitudes(&cfg).unwrap();
        let oracle = fixed_point_oracle(&cfg);
        assert_relative_eq!(means.s_mean.norm(), oracle.norm(), max_relative = 1e-8);
        assert!(means.residual <= MEAN_FIELD_TOLERANCE);
        assert_eq!(means.multiplicity, 1);
        assert!(means.s_mean.norm() > 0.0);
    }

    #[test]
    fn structure_is_imaginary_spin_and_real_cavity() {
        for name in [PresetName::Fe8, PresetName::Mn12] {
            let means = solve_mean_amplitudes(&PhysicalConfig::preset(name)).unwrap();
            assert_eq!(means.s_mean.re, 0.0);
            assert_eq!(means.n_mean.re, 0.0);
            for a in &means.a_mean {
                assert!(a.im.abs() <= 1e-10 * a.norm());
            }
        }
    }

    #[test]
    fn no_coupling_means_no_spin_response() {
        let mut cfg = fe8();
        cfg.coupling_g = 0.0;
        let means = solve_mean_amplitudes(&cfg).unwrap();
        assert_eq!(means.s_mean.norm(), 0.0);
        assert_eq!(means.n_mean.norm(), 0.0);
        let e = cfg.pump_amplitudes().unwrap();
        for (a, e) in means.a_mean.iter().zip(e) {
            assert_relative_eq!(a.re, e / cfg.kappa(), max_relative = 1e-15);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn undriven_cavity_has_zero_means() {
        let cfg = fe8().with_power(0.0);
        let means = solve_mean_amplitudes(&cfg).unwrap();
        assert_eq!(means.s_mean.norm(), 0.0);
        assert!(means.a_mean.iter().all(|a| a.norm() == 0.0));
        assert_eq!(means.residual, 0.0);
    }

    #[test]
    fn residual_detects_perturbation() {
        let cfg = fe8();
        let mut means = solve_mean_amplitudes(&cfg).unwrap();
        assert!(mean_residual(&means, &cfg) <= MEAN_FIELD_TOLERANCE);
        means.s_mean *= 1.01;
        assert!(mean_residual(&means, &cfg) > 1e-4);
    }

    #[test]
    fn zero_means_under_drive_give_order_one_residual() {
        let cfg = fe8();
        let mut means = solve_mean_amplitudes(&cfg).unwrap();
        means.s_mean = Complex64::default();
        means.n_mean = Complex64::default();
        means.a_mean.iter_mut().for_each(|a| *a = Complex64::default());
        assert!(mean_residual(&means, &cfg) >= 0.5);
    }

    #[test]
    fn weak_drive_response_scales_with_root_power() {
        let base = solve_mean_amplitudes(&fe8().with_power(1e-18)).unwrap().s_mean.norm();
        for decade in [1e-1, 1e-2] {
            let y = solve_mean_amplitudes(&fe8().with_power(1e-18 * decade)).unwrap().s_mean.norm();
            assert_relative_eq!(y / base, decade.sqrt(), max_relative = 1e-6);
        }
    }

    #[test]
    fn missing_bath_damping_is_rejected() {
        let mut cfg = fe8();
        cfg.gamma_b = 0.0;
        assert!(matches!(solve_mean_amplitudes(&cfg), Err(Error::InvalidConfig(_))));
    }
}
