use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Tolerance on Hermiticity, positivity and unit trace of a state.
pub const STATE_TOL: f64 = 1e-10;

/// A density operator: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl TryFrom<ComplexMatrix> for DensityOperator {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        DensityOperator::new(m)
    }
}

impl From<DensityOperator> for ComplexMatrix {
    fn from(rho: DensityOperator) -> Self {
        rho.matrix
    }
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let dim = matrix
            .require_square()
            .map_err(|e| Error::InvalidState(e.to_string()))?;
        if dim == 0 {
            return Err(Error::InvalidState("zero-dimensional state".into()));
        }
        matrix.check_finite()?;
        let asymmetry = matrix.hermitian_asymmetry();
        if asymmetry > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (asymmetry {asymmetry:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {:.12}{:+.3e}i, not 1",
                trace.re, trace.im
            )));
        }
        let min = matrix.min_eigenvalue(STATE_TOL)?;
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(DensityOperator { matrix })
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm_sqr: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm_sqr > 0.0 && norm_sqr.is_finite()) {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        Self::new(ComplexMatrix::outer(psi).scale_real(1.0 / norm_sqr))
    }

    /// The computational basis state `|k⟩⟨k|`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidState(format!("basis index {k} out of range for dim {dim}")));
        }
        Self::new(ComplexMatrix::unit(dim, k, k))
    }

    /// `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// Normalizes a nonzero positive operator `a` to `a / Tr[a]`.
    pub fn normalized(a: &ComplexMatrix) -> Result<Self> {
        let trace = a.trace().re;
        if trace.is_nan() || trace <= 0.0 {
            return Err(Error::InvalidState(format!("cannot normalize: trace {trace:.3e}")));
        }
        Self::new(a.scale_real(1.0 / trace))
    }

    /// Like [`DensityOperator::normalized`] but first takes the Hermitian part
    /// and, if rounding left small negative eigenvalues, clips them to zero.
    pub(crate) fn normalized_lenient(a: &ComplexMatrix) -> Result<Self> {
        let h = (a + &a.adjoint()).scale_real(0.5);
        if let Ok(rho) = Self::normalized(&h) {
            return Ok(rho);
        }
        let eig = h.hermitian_eigen(STATE_TOL)?;
        let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let m = &(&eig.vectors * &ComplexMatrix::from_diagonal(&clipped)) * &eig.vectors.adjoint();
        Self::normalized(&(&m + &m.adjoint()).scale_real(0.5))
    }

    /// `α·a + (1-α)·b`.
    pub fn mix(alpha: f64, a: &DensityOperator, b: &DensityOperator) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("mixing weight {alpha} outside [0, 1]")));
        }
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot mix states of dimension {} and {}",
                a.dim(),
                b.dim()
            )));
        }
        Self::new(&a.matrix.scale_real(alpha) + &b.matrix.scale_real(1.0 - alpha))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_trace() {
        let m = ComplexMatrix::identity(2);
        assert!(matches!(DensityOperator::new(m), Err(Error::InvalidState(_))));
    }

    #[test]
    fn rejects_negative_eigenvalue() {
        let m = ComplexMatrix::from_diagonal(&[1.5, -0.5]);
        assert!(DensityOperator::new(m).is_err());
    }

    #[test]
    fn rejects_non_square() {
        assert!(DensityOperator::new(ComplexMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn pure_state_normalizes() {
        let psi = [Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        let rho = DensityOperator::pure(&psi).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.36).abs() < 1e-15);
        assert!((rho.matrix()[(1, 0)] - Complex64::new(0.0, 0.48)).norm() < 1e-15);
    }
}
