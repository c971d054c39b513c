//! Dense complex linear algebra used throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Rows per block when streaming tall matrices through a QR factorization.
const BLOCK_ROWS: usize = 2048;

/// Streaming thin QR: keeps only the `n × n` triangular factor of all rows seen so far.
///
/// After pushing blocks `B_1, B_2, …` the factor `R` satisfies `R*R = Σ B_i* B_i`.
#[derive(Debug, Clone)]
pub struct RAccumulator {
    n: usize,
    r: Option<CMatrix>,
    pending: Vec<C64>,
    pending_rows: usize,
}

impl RAccumulator {
    pub fn new(n: usize) -> Self {
        RAccumulator {
            n,
            r: None,
            pending: Vec::new(),
            pending_rows: 0,
        }
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    /// Appends one row.
    pub fn push_row(&mut self, row: &[C64]) {
        debug_assert_eq!(row.len(), self.n);
        self.pending.extend_from_slice(row);
        self.pending_rows += 1;
        if self.pending_rows >= BLOCK_ROWS.max(self.n) {
            self.flush();
        }
    }

    /// Appends every row of `block`.
    pub fn push_block(&mut self, block: &CMatrix) {
        assert_eq!(block.ncols(), self.n);
        self.flush();
        let stacked = match self.r.take() {
            Some(r) => vstack(&r, block),
            None => block.clone(),
        };
        self.r = Some(triangular_factor(stacked, self.n));
    }

    /// Appends `eps · I`.
    pub fn push_ridge(&mut self, eps: f64) {
        let ridge = CMatrix::from_diagonal_element(self.n, self.n, C64::new(eps, 0.0));
        self.push_block(&ridge);
    }

    fn flush(&mut self) {
        if self.pending_rows == 0 {
            return;
        }
        let rows = std::mem::take(&mut self.pending);
        let block = CMatrix::from_row_slice(self.pending_rows, self.n, &rows);
        self.pending_rows = 0;
        let stacked = match self.r.take() {
            Some(r) => vstack(&r, &block),
            None => block,
        };
        self.r = Some(triangular_factor(stacked, self.n));
    }

    /// Returns the accumulated factor, or the zero matrix when no rows were pushed.
    pub fn finish(mut self) -> CMatrix {
        self.flush();
        self.r.unwrap_or_else(|| CMatrix::zeros(self.n, self.n))
    }
}

fn vstack(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
    let n = top.ncols();
    let mut out = CMatrix::zeros(top.nrows() + bottom.nrows(), n);
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Thin QR of a tall matrix, returning the square triangular factor with a real,
/// nonnegative diagonal. Short inputs are zero-padded to `n` rows.
pub fn triangular_factor(m: CMatrix, n: usize) -> CMatrix {
    let m = if m.nrows() < n {
        let mut padded = CMatrix::zeros(n, n);
        padded.rows_mut(0, m.nrows()).copy_from(&m);
        padded
    } else {
        m
    };
    let mut r = m.qr().r();
    normalize_phases(&mut r);
    r
}

/// Rescales each row so the diagonal is real and nonnegative; `R*R` is unchanged.
pub fn normalize_phases(r: &mut CMatrix) {
    for i in 0..r.nrows().min(r.ncols()) {
        let d = r[(i, i)];
        let modulus = d.norm();
        if modulus > 0.0 {
            let phase = (d / modulus).conj();
            for j in i..r.ncols() {
                r[(i, j)] *= phase;
            }
            r[(i, i)] = C64::new(modulus, 0.0);
        }
    }
}

/// `‖(R*)⁻¹ v‖²` for upper-triangular `R` with nonzero diagonal, by forward substitution.
///
/// `work` must have the same length as `v`.
pub fn rstar_solve_norm_sqr(r: &CMatrix, v: &[C64], work: &mut [C64]) -> f64 {
    let n = r.nrows();
    debug_assert_eq!(v.len(), n);
    let data = r.as_slice();
    let mut total = 0.0;
    for i in 0..n {
        let column = &data[i * n..i * n + i];
        let mut acc = v[i];
        for (rji, yj) in column.iter().zip(&work[..i]) {
            acc -= rji.conj() * yj;
        }
        let y = acc / data[i * n + i].conj();
        work[i] = y;
        total += y.norm_sqr();
    }
    total
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut eigs: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.total_cmp(b));
    eigs
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Checks `‖M − M*‖_max ≤ tol · max(‖M‖_max, 1e-300)`.
pub fn check_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Data(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(1e-300);
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if worst > tol * scale {
        return Err(Error::Data(format!(
            "matrix is not Hermitian: asymmetry {worst:e} relative to scale {scale:e}"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(m: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Numerical("Cholesky factorization failed".into()))
}

pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = crate::seed::rng(seed);
        CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn streaming_factor_matches_gram() {
        let a = random_matrix(5000, 6, 3);
        let mut acc = RAccumulator::new(6);
        for i in 0..a.nrows() {
            let row: Vec<C64> = a.row(i).iter().copied().collect();
            acc.push_row(&row);
        }
        let r = acc.finish();
        let lhs = r.adjoint() * &r;
        let rhs = a.adjoint() * &a;
        assert!(max_abs(&(lhs - &rhs)) < 1e-10 * max_abs(&rhs));
        for i in 0..6 {
            assert!(r[(i, i)].im == 0.0 && r[(i, i)].re > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn triangular_solve_matches_explicit_quadratic_form() {
        let a = random_matrix(40, 5, 9);
        let mut acc = RAccumulator::new(5);
        acc.push_block(&a);
        acc.push_ridge(0.3);
        let r = acc.finish();
        let m = a.adjoint() * &a + CMatrix::from_diagonal_element(5, 5, C64::new(0.09, 0.0));
        let v = random_matrix(5, 1, 10);
        let solved = m.clone().lu().solve(&v).unwrap();
        let expected = (v.adjoint() * solved)[(0, 0)].re;
        let mut work = vec![C64::new(0.0, 0.0); 5];
        let got = rstar_solve_norm_sqr(&r, v.as_slice(), &mut work);
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn hermitian_check_rejects_asymmetry() {
        let mut m = CMatrix::identity(3, 3);
        assert!(check_hermitian(&m, 1e-12).is_ok());
        m[(0, 1)] = C64::new(0.5, 0.0);
        assert!(check_hermitian(&m, 1e-12).is_err());
    }
}
