//! Dense symmetric positive-definite factorizations.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch, LltRegularization};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatMut, MatRef, Par};

use crate::{Error, Result};

fn par() -> Par {
    faer::get_global_parallelism()
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: Mat<f64>,
}

impl SpdFactor {
    /// Factor `a`, reusing its storage. A non-positive pivot is an error;
    /// nothing is regularized.
    pub fn new(mut a: Mat<f64>, what: &'static str) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "square matrix required");
        let n = a.nrows();
        let mut mem = MemBuffer::new(cholesky_in_place_scratch::<f64>(n, par(), Default::default()));
        cholesky_in_place(
            a.as_mut(),
            LltRegularization {
                dynamic_regularization_delta: 0.0,
                dynamic_regularization_epsilon: 0.0,
            },
            par(),
            MemStack::new(&mut mem),
            Default::default(),
        )
        .map_err(|e| match e {
            faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
                Error::NotPositiveDefinite { what, pivot: index }
            }
        })?;
        for j in 0..n {
            for i in 0..j {
                a[(i, j)] = 0.0;
            }
        }
        Ok(Self { l: a })
    }

    pub fn of(a: MatRef<'_, f64>, what: &'static str) -> Result<Self> {
        Self::new(a.to_owned(), what)
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> MatRef<'_, f64> {
        self.l.as_ref()
    }

    /// `rhs ← L⁻¹ rhs`.
    pub fn whiten_in_place(&self, rhs: MatMut<'_, f64>) {
        solve_lower_triangular_in_place(self.l.as_ref(), rhs, par());
    }

    /// `L⁻¹ rhs`.
    pub fn whiten(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = rhs.to_owned();
        self.whiten_in_place(out.as_mut());
        out
    }

    /// `rhs ← A⁻¹ rhs`.
    pub fn solve_in_place(&self, mut rhs: MatMut<'_, f64>) {
        solve_lower_triangular_in_place(self.l.as_ref(), rhs.as_mut(), par());
        solve_upper_triangular_in_place(self.l.transpose(), rhs, par());
    }

    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = rhs.to_owned();
        self.solve_in_place(out.as_mut());
        out
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| 2.0 * self.l[(i, i)].ln()).sum()
    }
}
