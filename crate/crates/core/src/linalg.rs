//! Dense symmetric positive-definite kernel.
//!
//! Every log-determinant, quadratic form and linear solve in the crate goes
//! through [`SpdFactor`]. Positive definiteness means "the Cholesky
//! factorization succeeds"; there is no eigenvalue thresholding.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{PowerPriorError, Result};

/// Cholesky factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(PowerPriorError::ShapeMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(PowerPriorError::NotPositiveDefinite);
        }
        let chol = Cholesky::new(m.clone()).ok_or(PowerPriorError::NotPositiveDefinite)?;
        if chol.l_dirty().diagonal().iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(PowerPriorError::NotPositiveDefinite);
        }
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `log |M|` as twice the sum of the log-diagonal of the factor.
    pub fn logdet(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Solves `M X = B` column by column.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `v' M⁻¹ v`, via the triangular factor so the result is never negative.
    pub fn inv_quad(&self, v: &DVector<f64>) -> f64 {
        let mut w = v.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut w);
        w.norm_squared()
    }

    /// `tr(A M⁻¹)`.
    pub fn trace_solve(&self, a: &DMatrix<f64>) -> f64 {
        // tr(A M⁻¹) = tr(M⁻¹ A) for any square A.
        self.solve_mat(a).trace()
    }

    /// Solves `L' x = z` with `L` the lower factor; maps standard normals to
    /// draws with covariance `M⁻¹`.
    pub fn solve_upper(&self, z: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l();
        let mut x = z.clone();
        l.transpose().solve_upper_triangular_mut(&mut x);
        x
    }
}

/// `log |M|` of a symmetric positive-definite matrix without forming the determinant.
pub fn chol_logdet(m: &DMatrix<f64>) -> Result<f64> {
    Ok(SpdFactor::new(m)?.logdet())
}

/// `x' A x` for a symmetric `A`.
pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x))
}

/// Symmetrizes in place to remove round-off asymmetry after products.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
