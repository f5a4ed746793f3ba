//! Adaptive Dormand–Prince 5(4) integrator over flat real or complex state.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait OdeScalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl OdeScalar for Complex64 {
    fn modulus(self) -> f64 {
        // max-norm of the components; cheaper than hypot and equivalent up to √2
        self.re.abs().max(self.im.abs())
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; keeps the integrator resolving fast rotations.
    pub h_max: f64,
    pub max_steps: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64, h_max: f64) -> Self {
        Dopri5 { rtol, atol, h_max, max_steps: 50_000_000 }
    }

    /// Integrates `y' = f(t, y)` from `outputs[0]` through every output time,
    /// landing on each exactly and handing the state to `observe`.
    pub fn integrate<T, F, O>(&self, mut f: F, y0: &[T], outputs: &[f64], mut observe: O) -> Result<Stats>
    where
        T: OdeScalar,
        F: FnMut(f64, &[T], &mut [T]),
        O: FnMut(usize, f64, &[T]) -> Result<()>,
    {
        if outputs.is_empty() {
            return Ok(Stats::default());
        }
        if outputs.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidGrid("output times must be non-decreasing".into()));
        }
        if !(self.h_max > 0.0) || !(self.rtol > 0.0 || self.atol > 0.0) {
            return Err(Error::InvalidGrid("integrator tolerances and step cap must be positive".into()));
        }
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut k: [Vec<T>; 7] = std::array::from_fn(|_| vec![T::default(); n]);
        let mut tmp = vec![T::default(); n];
        let mut y_new = vec![T::default(); n];
        let mut stats = Stats::default();

        let mut t = outputs[0];
        observe(0, t, &y)?;
        f(t, &y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = self.h_max;

        for (idx, &t_out) in outputs.iter().enumerate().skip(1) {
            while t < t_out {
                if stats.accepted + stats.rejected >= self.max_steps {
                    return Err(Error::Integration { time: t, reason: "step budget exhausted".into() });
                }
                let remaining = t_out - t;
                let mut step = h.min(self.h_max);
                let lands = step >= remaining * (1.0 - 1e-12);
                if lands {
                    step = remaining;
                }
                let err = self.attempt(&mut f, t, step, &y, &mut k, &mut tmp, &mut y_new);
                stats.evaluations += 5;
                if !err.is_finite() {
                    return Err(Error::Integration { time: t, reason: "non-finite state".into() });
                }
                if err <= 1.0 {
                    t = if lands { t_out } else { t + step };
                    std::mem::swap(&mut y, &mut y_new);
                    // first-same-as-last: k7 is f(t + h, y_new)
                    k.swap(0, 6);
                    stats.accepted += 1;
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !lands || factor < 1.0 {
                        h = step * factor;
                    }
                } else {
                    stats.rejected += 1;
                    h = step * (0.9 * err.powf(-0.2)).max(0.1);
                    if h < t.abs().max(1e-300) * 1e-14 {
                        return Err(Error::Integration { time: t, reason: "step size underflow".into() });
                    }
                }
            }
            observe(idx, t, &y)?;
        }
        Ok(stats)
    }

    #[allow(clippy::too_many_arguments)]
    fn attempt<T, F>(
        &self,
        f: &mut F,
        t: f64,
        h: f64,
        y: &[T],
        k: &mut [Vec<T>; 7],
        tmp: &mut [T],
        y_new: &mut [T],
    ) -> f64
    where
        T: OdeScalar,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        macro_rules! stage {
            ($out:expr, $tc:expr, $( ($a:expr, $j:expr) ),+ ) => {{
                for i in 0..n {
                    tmp[i] = y[i] $( + k[$j][i] * (h * $a) )+;
                }
                f(t + $tc * h, tmp, &mut k[$out]);
            }};
        }
        stage!(1, C2, (A21, 0));
        stage!(2, C3, (A31, 0), (A32, 1));
        stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
        stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
        stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
        for i in 0..n {
            y_new[i] = y[i] + k[0][i] * (h * B1) + k[2][i] * (h * B3) + k[3][i] * (h * B4) + k[4][i] * (h * B5)
                + k[5][i] * (h * B6);
        }
        f(t + h, y_new, &mut k[6]);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7;
            let scale = self.atol + self.rtol * y[i].modulus().max(y_new[i].modulus());
            let r = (e * h).modulus() / scale;
            if !(r <= err) {
                err = if r.is_nan() || !y_new[i].is_finite() { f64::NAN } else { r };
                if err.is_nan() {
                    return err;
                }
            }
        }
        err
    }
}
