//! Truncated boson and spin ladder operators on mode₁ ⊗ … ⊗ mode_M ⊗ spin.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// Fock levels kept per cavity mode.
    pub mode_levels: usize,
    pub spin: f64,
    pub mode_count: usize,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec { mode_levels: 4, spin: 3.0, mode_count: 2 }
    }
}

impl TruncationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mode_levels < 2 {
            return Err(Error::InvalidConfig(format!("mode_levels must be ≥ 2, got {}", self.mode_levels)));
        }
        if self.mode_count == 0 {
            return Err(Error::InvalidConfig("need at least one cavity mode".into()));
        }
        if !(self.spin >= 0.5) || (2.0 * self.spin).fract() != 0.0 {
            return Err(Error::InvalidConfig(format!("spin must be a positive half-integer, got {}", self.spin)));
        }
        Ok(())
    }

    pub fn spin_levels(&self) -> usize {
        (2.0 * self.spin).round() as usize + 1
    }

    pub fn mode_dim(&self) -> usize {
        self.mode_levels.pow(self.mode_count as u32)
    }

    /// (∏ mode_levels)·(2S+1).
    pub fn dim(&self) -> usize {
        self.mode_dim() * self.spin_levels()
    }

    /// Fock numbers of every mode and the S_z eigenvalue for a basis index.
    pub fn decode(&self, index: usize) -> (Vec<usize>, f64) {
        let ns = self.spin_levels();
        let k = index % ns;
        let mut rest = index / ns;
        let mut fock = vec![0; self.mode_count];
        for m in (0..self.mode_count).rev() {
            fock[m] = rest % self.mode_levels;
            rest /= self.mode_levels;
        }
        (fock, self.spin - k as f64)
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_start: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let dim = m.nrows();
        let mut row_start = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v != Complex64::default() {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_start.push(cols.len());
        }
        SparseMatrix { dim, row_start, cols, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// out += scale · (self · rho), all matrices column-major.
    pub fn mul_add(&self, scale: Complex64, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for (rho_col, out_col) in rho.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for i in 0..n {
                let mut acc = Complex64::default();
                for idx in self.row_start[i]..self.row_start[i + 1] {
                    acc += self.values[idx] * rho_col[self.cols[idx]];
                }
                out_col[i] += scale * acc;
            }
        }
    }
}

/// Compressed sparse columns, for products ρ·M with contiguous column updates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumns {
    pub dim: usize,
    pub col_start: Vec<usize>,
    pub rows: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseColumns {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let dim = m.ncols();
        let mut col_start = Vec::with_capacity(dim + 1);
        let mut rows = Vec::new();
        let mut values = Vec::new();
        col_start.push(0);
        for j in 0..dim {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != Complex64::default() {
                    rows.push(i);
                    values.push(v);
                }
            }
            col_start.push(rows.len());
        }
        SparseColumns { dim, col_start, rows, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// out += scale · (rho · self), all matrices column-major.
    pub fn right_mul_add(&self, scale: Complex64, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for j in 0..n {
            let out_col = &mut out[j * n..(j + 1) * n];
            for idx in self.col_start[j]..self.col_start[j + 1] {
                let k = self.rows[idx];
                let w = scale * self.values[idx];
                let rho_col = &rho[k * n..(k + 1) * n];
                for (o, r) in out_col.iter_mut().zip(rho_col) {
                    *o += w * r;
                }
            }
        }
    }
}

/// Operators embedded in the full space.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub spec: TruncationSpec,
    /// Annihilation operator of each mode.
    pub a: Vec<DMatrix<Complex64>>,
    pub s_z: DMatrix<Complex64>,
    pub s_plus: DMatrix<Complex64>,
    pub s_minus: DMatrix<Complex64>,
    pub s_x: DMatrix<Complex64>,
    pub s_y: DMatrix<Complex64>,
}

/// Spin-S matrices (S_z, S_+) on the 2S+1 levels ordered m = S, S−1, …, −S.
pub fn spin_matrices(spin: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = (2.0 * spin).round() as usize + 1;
    let m = |k: usize| spin - k as f64;
    let sz = DMatrix::from_fn(n, n, |i, j| if i == j { m(i) } else { 0.0 });
    // ⟨m+1|S_+|m⟩ = √(S(S+1) − m(m+1)); row k−1 is one step above row k.
    let sp = DMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            let mj = m(j);
            (spin * (spin + 1.0) - mj * (mj + 1.0)).sqrt()
        } else {
            0.0
        }
    });
    (sz, sp)
}

pub fn annihilation(levels: usize) -> DMatrix<f64> {
    DMatrix::from_fn(levels, levels, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

fn kron_all(factors: &[DMatrix<f64>]) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for f in factors {
        out = out.kronecker(f);
    }
    out.map(|v| Complex64::new(v, 0.0))
}

pub fn build_operators(spec: &TruncationSpec) -> Result<OperatorSet> {
    spec.validate()?;
    let (sz, sp) = spin_matrices(spec.spin);
    let id_mode = DMatrix::identity(spec.mode_levels, spec.mode_levels);
    let id_spin = DMatrix::identity(sz.nrows(), sz.nrows());
    let a = (0..spec.mode_count)
        .map(|target| {
            let mut factors: Vec<DMatrix<f64>> = (0..spec.mode_count)
                .map(|m| if m == target { annihilation(spec.mode_levels) } else { id_mode.clone() })
                .collect();
            factors.push(id_spin.clone());
            kron_all(&factors)
        })
        .collect();
    let on_spin = |op: &DMatrix<f64>| {
        let mut factors = vec![id_mode.clone(); spec.mode_count];
        factors.push(op.clone());
        kron_all(&factors)
    };
    let s_plus = on_spin(&sp);
    let s_minus = on_spin(&sp.transpose());
    let s_x = (&s_plus + &s_minus) * Complex64::new(0.5, 0.0);
    let s_y = (&s_plus - &s_minus) * Complex64::new(0.0, -0.5);
    Ok(OperatorSet { spec: *spec, a, s_z: on_spin(&sz), s_plus, s_minus, s_x, s_y })
}
