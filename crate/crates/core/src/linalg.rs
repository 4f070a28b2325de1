//! Truncated pseudo-inverse of Hermitian matrices.
//!
//! For a Hermitian matrix the singular values are the absolute eigenvalues, so
//! one eigendecomposition yields the same truncated pseudo-inverse as an SVD.

use ndarray::{Array1, Array2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::pauli::C64;

#[derive(Clone, Debug)]
pub struct HermitianPinv {
    /// Retained eigenvectors as columns.
    vectors: Array2<C64>,
    /// Retained eigenvalues.
    values: Array1<f64>,
    sigma_max: f64,
    sigma_min: f64,
}

impl HermitianPinv {
    /// Keeps eigenpairs with `|λ| > rel_tol · max|λ|`.
    pub fn new(a: &Array2<C64>, rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::InvalidTolerance(rel_tol));
        }
        let (rows, cols) = a.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch { expected: rows, found: cols });
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        // column-major input: the row-major path returns conjugated eigenvectors
        let mut sym = Array2::<C64>::zeros((rows, rows).f());
        sym.assign(&((a + &a.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0)));
        let (w, v) = sym
            .eigh(UPLO::Upper)
            .map_err(|e| Error::NonFinite(format!("eigendecomposition failed: {e}")))?;
        let sigma_max = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sigma_max == 0.0 {
            return Err(Error::SingularSystem { sigma_max });
        }
        let cut = rel_tol * sigma_max;
        let keep: Vec<usize> = (0..w.len()).filter(|&k| w[k].abs() > cut).collect();
        if keep.is_empty() {
            return Err(Error::SingularSystem { sigma_max });
        }
        let vectors = v.select(Axis(1), &keep);
        let values: Array1<f64> = keep.iter().map(|&k| w[k]).collect();
        let sigma_min = values.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        Ok(HermitianPinv { vectors, values, sigma_max, sigma_min })
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &Array2<C64> {
        &self.vectors
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Condition number over the retained spectrum.
    pub fn condition(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    pub fn apply(&self, x: &Array1<C64>) -> Array1<C64> {
        let proj = self.vectors.t().mapv(|z| z.conj()).dot(x);
        let scaled = &proj / &self.values.mapv(|l| C64::new(l, 0.0));
        self.vectors.dot(&scaled)
    }

    pub fn matrix(&self) -> Array2<C64> {
        let inv = self.values.mapv(|l| C64::new(1.0 / l, 0.0));
        let scaled = &self.vectors * &inv.insert_axis(Axis(0));
        scaled.dot(&self.vectors.t().mapv(|z| z.conj()))
    }
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}
