//! Checkerboard copulas on an n x n grid.
//!
//! `mass[i][j]` is the measure of the cell `[i/n, (i+1)/n] × [j/n, (j+1)/n]`
//! (rows index x, columns index y). Inside a cell the density is uniform, so
//! the CDF is bilinear there and the partial derivatives are linear.

use rayon::prelude::*;

use crate::error::{CopulaError, Result};

/// Row and column sums must match `1/n` to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GridCopula {
    n: usize,
    mass: Vec<f64>,
}

impl GridCopula {
    pub fn new(n: usize, mass: Vec<f64>) -> Result<Self> {
        let grid = Self::from_raw(n, mass)?;
        if let Some(problem) = grid.stochastic_violation() {
            return Err(CopulaError::Invalid(problem));
        }
        Ok(grid)
    }

    /// Shape checks only; no doubly stochastic requirement.
    pub fn from_raw(n: usize, mass: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(CopulaError::Invalid("grid resolution must be positive".into()));
        }
        if mass.len() != n * n {
            return Err(CopulaError::Invalid(format!("mass has {} entries, expected {}", mass.len(), n * n)));
        }
        Ok(Self { n, mass })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut mass = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CopulaError::Schema {
                    path: format!("mass[{i}]"),
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            mass.extend_from_slice(row);
        }
        Self::from_raw(n, mass)
    }

    pub fn independence(n: usize) -> Self {
        let w = 1.0 / (n * n) as f64;
        Self { n, mass: vec![w; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.mass.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.mass.chunks(self.n) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// First violated invariant, if any.
    pub fn stochastic_violation(&self) -> Option<String> {
        if let Some(k) = self.mass.iter().position(|&m| m.is_nan() || m < 0.0) {
            return Some(format!("negative mass {} in cell ({}, {})", self.mass[k], k / self.n, k % self.n));
        }
        let target = 1.0 / self.n as f64;
        for (label, sums) in [("row", self.row_sums()), ("column", self.col_sums())] {
            if let Some((k, s)) = sums.iter().enumerate().find(|(_, s)| (**s - target).abs() > STOCHASTIC_TOL) {
                return Some(format!("not doubly stochastic: {label} {k} sums to {s}, expected {target}"));
            }
        }
        None
    }

    fn cell_and_fraction(&self, t: f64) -> (usize, f64) {
        let scaled = t * self.n as f64;
        let k = (scaled.floor() as usize).min(self.n - 1);
        (k, scaled - k as f64)
    }

    /// Exact checkerboard CDF (bilinear within a cell).
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let n = self.n;
        let (i, fx) = self.cell_and_fraction(x);
        let (j, fy) = self.cell_and_fraction(y);
        let mut full = 0.0;
        let mut right_col = 0.0;
        for r in 0..i {
            let row = &self.mass[r * n..(r + 1) * n];
            full += row[..j].iter().sum::<f64>();
            right_col += row[j];
        }
        let row_i = &self.mass[i * n..(i + 1) * n];
        let bottom_row: f64 = row_i[..j].iter().sum();
        full + fy * right_col + fx * bottom_row + fx * fy * row_i[j]
    }

    /// `∂₁C(x, y) = n (Σ_{j'<j} m_ij' + m_ij s)` with `s` the fractional
    /// position of y inside its column.
    pub fn partial1(&self, x: f64, y: f64) -> f64 {
        let (i, _) = self.cell_and_fraction(x);
        let (j, s) = self.cell_and_fraction(y);
        let row = &self.mass[i * self.n..(i + 1) * self.n];
        self.n as f64 * (row[..j].iter().sum::<f64>() + row[j] * s)
    }

    pub fn partial2(&self, x: f64, y: f64) -> f64 {
        let (i, s) = self.cell_and_fraction(x);
        let (j, _) = self.cell_and_fraction(y);
        let below: f64 = (0..i).map(|r| self.get(r, j)).sum();
        self.n as f64 * (below + self.get(i, j) * s)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut mass = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                mass[j * n + i] = self.mass[i * n + j];
            }
        }
        Self { n, mass }
    }

    /// Star product of checkerboards: `n · (A × B)`.
    ///
    /// Rows are computed independently with a fixed summation order, so the
    /// result does not depend on the thread count.
    pub fn star(&self, other: &GridCopula) -> Result<Self> {
        if self.n != other.n {
            return Err(CopulaError::ResolutionMismatch { left: self.n, right: other.n });
        }
        let n = self.n;
        let scale = n as f64;
        let mut mass = vec![0.0; n * n];
        mass.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            let a_row = &self.mass[i * n..(i + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.mass[k * n..(k + 1) * n];
                for (o, &b) in out.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
            for o in out.iter_mut() {
                *o *= scale;
            }
        });
        Ok(Self { n, mass })
    }

    /// Result row `r` is source row `source[r]`.
    pub fn permute_rows(&self, source: &[usize]) -> Self {
        let n = self.n;
        let mut mass = Vec::with_capacity(n * n);
        for &r in source {
            mass.extend_from_slice(&self.mass[r * n..(r + 1) * n]);
        }
        Self { n, mass }
    }

    /// Result column `c` is source column `source[c]`.
    pub fn permute_cols(&self, source: &[usize]) -> Self {
        let n = self.n;
        let mut mass = vec![0.0; n * n];
        for i in 0..n {
            for (c, &s) in source.iter().enumerate() {
                mass[i * n + c] = self.mass[i * n + s];
            }
        }
        Self { n, mass }
    }

    /// Exact Sobolev norm squared of the checkerboard.
    pub fn norm_sq(&self) -> f64 {
        gradient_energy(self.n, &self.mass)
    }

    /// Exact `‖A - B‖²` for checkerboards of equal resolution.
    pub fn dist_sq(&self, other: &GridCopula) -> Result<f64> {
        if self.n != other.n {
            return Err(CopulaError::ResolutionMismatch { left: self.n, right: other.n });
        }
        let diff: Vec<f64> = self.mass.iter().zip(&other.mass).map(|(a, b)| a - b).collect();
        Ok(gradient_energy(self.n, &diff))
    }

    pub fn max_abs_diff(&self, other: &GridCopula) -> f64 {
        self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn combine(&self, alpha: f64, other: &GridCopula) -> Result<Self> {
        if self.n != other.n {
            return Err(CopulaError::ResolutionMismatch { left: self.n, right: other.n });
        }
        let mass = self.mass.iter().zip(&other.mass).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        Ok(Self { n: self.n, mass })
    }
}

/// `∫∫ |∇C|²` for the (possibly signed) checkerboard with cell masses `mass`.
///
/// Per-row and per-column partial sums are reduced sequentially so the value
/// is bit-stable across thread counts.
///
/// Within a cell, `∂₁C = n (P + m s)` with `P` the mass to the left in the
/// same row; its square integrates over the cell to `P² + P m + m²/3`.
/// The column direction is symmetric.
pub(crate) fn gradient_energy(n: usize, mass: &[f64]) -> f64 {
    let rows: f64 = mass
        .par_chunks(n)
        .map(|row| {
            let mut acc = 0.0;
            let mut before = 0.0;
            for &m in row {
                acc += before * before + before * m + m * m / 3.0;
                before += m;
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let cols: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = 0.0;
            let mut before = 0.0;
            for i in 0..n {
                let m = mass[i * n + j];
                acc += before * before + before * m + m * m / 3.0;
                before += m;
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    rows + cols
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comonotone(n: usize) -> GridCopula {
        let mut mass = vec![0.0; n * n];
        for i in 0..n {
            mass[i * n + i] = 1.0 / n as f64;
        }
        GridCopula::new(n, mass).unwrap()
    }

    #[test]
    fn independence_norm_is_two_thirds() {
        for n in [2, 7, 64] {
            assert!((GridCopula::independence(n).norm_sq() - 2.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn comonotone_checkerboard_norm() {
        // Closed form 1 - 1/(3n), summed cell by cell.
        for n in [2, 16, 100] {
            let expected = 1.0 - 1.0 / (3.0 * n as f64);
            assert!((comonotone(n).norm_sq() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_row_deficit() {
        let n = 2;
        let mass = vec![0.45, 0.0, 0.05, 0.5];
        let err = GridCopula::new(n, mass).unwrap_err().to_string();
        assert!(err.contains("not doubly stochastic"), "{err}");
    }

    #[test]
    fn cdf_is_bilinear_within_cells() {
        let g = comonotone(2);
        assert!((g.cdf(0.5, 0.5) - 0.5).abs() < 1e-15);
        assert!((g.cdf(0.25, 0.25) - 0.125).abs() < 1e-15);
        assert!((g.cdf(1.0, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn star_with_identity_grid() {
        let n = 8;
        let mut state = 17u64;
        let mut mass = vec![0.0; n * n];
        for v in mass.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (state >> 33) as f64;
        }
        // Not doubly stochastic, but M acts as identity on any matrix.
        let a = GridCopula::from_raw(n, mass).unwrap();
        let product = comonotone(n).star(&a).unwrap();
        assert!(product.max_abs_diff(&a) <= 1e-9 * a.mass.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn resolution_mismatch() {
        let err = comonotone(2).star(&comonotone(4)).unwrap_err();
        assert!(matches!(err, CopulaError::ResolutionMismatch { left: 2, right: 4 }));
    }

    #[test]
    fn partials_recover_cell_conditional() {
        let g = comonotone(4);
        assert_eq!(g.partial1(0.1, 0.9), 1.0);
        assert_eq!(g.partial1(0.9, 0.1), 0.0);
        assert!((g.partial1(0.1, 0.125) - 0.5).abs() < 1e-15);
    }
}
