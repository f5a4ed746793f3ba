//! Symplectic spectra, the phase-space partial transpose and logarithmic
//! negativity between groups of cavity modes.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{PHYSICALITY_TOLERANCE, SYMMETRY_TOLERANCE};
use crate::linalg::{complex_eigenvalues, max_abs, symmetry_defect};

/// Two disjoint, non-empty groups of zero-based mode indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModePartition {
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
}

impl ModePartition {
    pub fn new(mut group_a: Vec<usize>, mut group_b: Vec<usize>) -> Result<Self> {
        group_a.sort_unstable();
        group_b.sort_unstable();
        if group_a.is_empty() || group_b.is_empty() {
            return Err(Error::InvalidPartition("both groups must be non-empty".into()));
        }
        if group_a.windows(2).any(|w| w[0] == w[1]) || group_b.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPartition("repeated mode index".into()));
        }
        if group_a.iter().any(|m| group_b.contains(m)) {
            return Err(Error::InvalidPartition("groups overlap".into()));
        }
        Ok(ModePartition { group_a, group_b })
    }

    pub fn check_modes(&self, modes: usize) -> Result<()> {
        match self.group_a.iter().chain(&self.group_b).find(|&&m| m >= modes) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len: modes }),
            None => Ok(()),
        }
    }

    /// Union of both groups in ascending order.
    pub fn modes(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.group_a.iter().chain(&self.group_b).copied().collect();
        all.sort_unstable();
        all
    }
}

impl fmt::Display for ModePartition {
    /// One-based, e.g. `{1,2,3}|{4,5,6}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |g: &[usize]| g.iter().map(|m| (m + 1).to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{{{}}}|{{{}}}", join(&self.group_a), join(&self.group_b))
    }
}

/// ⊕ [[0, 1], [−1, 0]] over `n` oscillators.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn check_covariance(v: &DMatrix<f64>) -> Result<()> {
    if v.nrows() != v.ncols() || v.nrows() % 2 != 0 {
        return Err(Error::OddDimension(v.nrows()));
    }
    let defect = symmetry_defect(v);
    if defect > SYMMETRY_TOLERANCE * max_abs(v) {
        return Err(Error::NotSymmetric { defect });
    }
    Ok(())
}

/// ΩV without forming the product: row 2k is V's row 2k+1, row 2k+1 is −V's row 2k.
fn omega_times(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    DMatrix::from_fn(n, n, |i, j| if i % 2 == 0 { v[(i + 1, j)] } else { -v[(i - 1, j)] })
}

/// Full eigenvalue list of iΩV; it consists of ± pairs.
pub fn raw_symplectic_spectrum(v: &DMatrix<f64>) -> Result<DVector<Complex64>> {
    check_covariance(v)?;
    Ok(complex_eigenvalues(&omega_times(v))?.map(|z| z * Complex64::i()))
}

/// Symplectic eigenvalues in ascending order, one per ± pair.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let spectrum = raw_symplectic_spectrum(v)?;
    let mut moduli: Vec<f64> = spectrum.iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    Ok(moduli.into_iter().step_by(2).collect())
}

/// Rows and columns of the listed modes, in the order given.
pub fn restrict_to_modes(v: &DMatrix<f64>, modes: &[usize]) -> Result<DMatrix<f64>> {
    let n = v.nrows() / 2;
    if let Some(&index) = modes.iter().find(|&&m| m >= n) {
        return Err(Error::IndexOutOfRange { index, len: n });
    }
    let idx: Vec<usize> = modes.iter().flat_map(|m| [2 * m, 2 * m + 1]).collect();
    Ok(DMatrix::from_fn(idx.len(), idx.len(), |i, j| v[(idx[i], idx[j])]))
}

/// P V P with P flipping the y quadrature of every mode in group B.
pub fn partial_transpose(v: &DMatrix<f64>, partition: &ModePartition) -> Result<DMatrix<f64>> {
    check_covariance(v)?;
    partition.check_modes(v.nrows() / 2)?;
    let mut sign = vec![1.0; v.nrows()];
    for m in &partition.group_b {
        sign[2 * m + 1] = -1.0;
    }
    Ok(DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| sign[i] * sign[j] * v[(i, j)]))
}

/// max(0, −ln 2ν̃_min) after restricting to the partition's modes.
pub fn log_negativity(v: &DMatrix<f64>, partition: &ModePartition) -> Result<f64> {
    check_covariance(v)?;
    partition.check_modes(v.nrows() / 2)?;
    let modes = partition.modes();
    let restricted = restrict_to_modes(v, &modes)?;
    let local = |g: &[usize]| g.iter().map(|m| modes.binary_search(m).expect("mode in union")).collect();
    let relabeled = ModePartition { group_a: local(&partition.group_a), group_b: local(&partition.group_b) };
    let transposed = partial_transpose(&restricted, &relabeled)?;
    let nu_min = symplectic_eigenvalues(&transposed)?[0];
    Ok((-(2.0 * nu_min - 1.0).ln_1p()).max(0.0))
}

/// All balanced bipartitions with mode 0 in group A, in lexicographic order.
pub fn balanced_partitions(modes: usize) -> Result<Vec<ModePartition>> {
    if modes < 2 || modes % 2 != 0 {
        return Err(Error::UnsupportedModeCount(modes));
    }
    let half = modes / 2;
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(half);
    fn recurse(start: usize, modes: usize, half: usize, pick: &mut Vec<usize>, out: &mut Vec<ModePartition>) {
        if pick.len() == half {
            let rest = (0..modes).filter(|m| !pick.contains(m)).collect();
            out.push(ModePartition { group_a: pick.clone(), group_b: rest });
            return;
        }
        for m in start..modes {
            pick.push(m);
            recurse(m + 1, modes, half, pick, out);
            pick.pop();
        }
    }
    pick.push(0);
    recurse(1, modes, half, &mut pick, &mut out);
    Ok(out)
}

/// Partition with the largest negativity; earlier partitions win ties.
pub fn best_balanced_partition(v: &DMatrix<f64>, modes: usize) -> Result<(ModePartition, f64)> {
    let mut best: Option<(ModePartition, f64)> = None;
    for p in balanced_partitions(modes)? {
        let e = log_negativity(v, &p)?;
        if best.as_ref().map_or(true, |(_, b)| e > *b) {
            best = Some((p, e));
        }
    }
    Ok(best.expect("at least one partition"))
}

pub fn physicality_check(v: &DMatrix<f64>) -> Result<bool> {
    Ok(symplectic_eigenvalues(v)?[0] >= 0.5 - PHYSICALITY_TOLERANCE)
}

#[cfg(test)]
pub(crate) fn two_mode_squeezed(r: f64) -> DMatrix<f64> {
    let (c, s) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
    DMatrix::from_row_slice(4, 4, &[c, 0.0, s, 0.0, 0.0, c, 0.0, -s, s, 0.0, c, 0.0, 0.0, -s, 0.0, c])
}
