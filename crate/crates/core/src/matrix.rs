//! Dense complex matrices: tensor products, partial traces, Hermitian
//! spectra, positivity tests and isometry completion.
//!
//! Composite spaces are always ordered system first: index `s * anc + a`
//! addresses `|s⟩ ⊗ |a⟩`.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute floor under every positivity tolerance.
pub const PSD_FLOOR: f64 = 1e-12;

/// Residual norm below which a Gram–Schmidt candidate is discarded.
const COMPLETION_SKIP: f64 = 1e-8;

const ISOMETRY_TOL: f64 = 1e-10;

/// A dense complex matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct ComplexMatrix(DMatrix<Complex64>);

/// Wire form: `{"rows": n, "cols": m, "data": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        let entries = json
            .data
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::from_row_major(json.rows, json.cols, entries)
    }
}

impl From<ComplexMatrix> for MatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        MatrixJson {
            rows: m.rows(),
            cols: m.cols(),
            data: m.row_major().into_iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            write!(f, "  ")?;
            for c in 0..self.cols() {
                let z = self.0[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let m = ComplexMatrix(DMatrix::from_row_slice(rows, cols, &entries));
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            entries.extend(row.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        Self::from_row_major(r, c, entries)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        ComplexMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(diag[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Column vector with the given entries.
    pub fn column(entries: &[Complex64]) -> Self {
        ComplexMatrix(DMatrix::from_column_slice(entries.len(), 1, entries))
    }

    /// The matrix unit `|i⟩⟨j|` on a `dim`-dimensional space.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        m.0[(i, j)] = Complex64::new(1.0, 0.0);
        m
    }

    /// `|ψ⟩⟨ψ|` for the (not necessarily normalized) vector ψ.
    pub fn outer(psi: &[Complex64]) -> Self {
        let n = psi.len();
        Self::from_fn(n, n, |r, c| psi[r] * psi[c].conj())
    }

    pub(crate) fn from_inner(m: DMatrix<Complex64>) -> Self {
        ComplexMatrix(m)
    }

    pub(crate) fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.0[(r, c)]);
            }
        }
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        for c in 0..self.cols() {
            for r in 0..self.rows() {
                let z = self.0[(r, c)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    pub fn require_dim(&self, dim: usize, what: &str) -> Result<()> {
        if self.rows() == dim && self.cols() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: expected {dim}x{dim}, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius distance; infinite when shapes differ.
    pub fn distance(&self, other: &ComplexMatrix) -> f64 {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return f64::INFINITY;
        }
        (self - other).frobenius_norm()
    }

    /// `A B - B A`.
    pub fn commutator(&self, other: &ComplexMatrix) -> Self {
        &(self * other) - &(other * self)
    }

    /// Largest entrywise modulus of `m - m†`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    /// Column-stacking vectorization.
    pub fn vectorize(&self) -> Vec<Complex64> {
        self.0.iter().copied().collect()
    }

    /// Inverse of [`ComplexMatrix::vectorize`] for a `dim`×`dim` matrix.
    pub fn unvectorize(dim: usize, v: &[Complex64]) -> Self {
        ComplexMatrix(DMatrix::from_column_slice(dim, dim, v))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(self.0.kronecker(&other.0))
    }

    /// Hermitian eigendecomposition with eigenvalues in ascending order.
    ///
    /// The input is symmetrized as `(m + m†)/2` first; an asymmetry larger
    /// than `tol·max(1, max|m_ij|)` is rejected.
    pub fn hermitian_eigen(&self, tol: f64) -> Result<HermitianEigen> {
        self.require_square()?;
        let asymmetry = self.hermitian_asymmetry();
        let allowed = tol.max(PSD_FLOOR) * self.max_abs().max(1.0);
        if asymmetry > allowed {
            return Err(Error::NotHermitian {
                asymmetry,
                tol: allowed,
            });
        }
        let sym = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let n = self.rows();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(HermitianEigen {
            values,
            vectors: ComplexMatrix(vectors),
        })
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self, tol: f64) -> Result<f64> {
        let eig = self.hermitian_eigen(tol)?;
        Ok(eig.values.first().copied().unwrap_or(0.0))
    }
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.inner().column(k).iter().copied().collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// Kronecker product; dimensions multiply.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Traces out the second (ancilla) factor of a `(sys·anc)`-square matrix.
pub fn partial_trace_ancilla(
    m: &ComplexMatrix,
    sys_dim: usize,
    anc_dim: usize,
) -> Result<ComplexMatrix> {
    let n = sys_dim * anc_dim;
    if m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over {sys_dim}x{anc_dim} needs a {n}x{n} matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(ComplexMatrix::from_fn(sys_dim, sys_dim, |s, t| {
        (0..anc_dim)
            .map(|a| m[(s * anc_dim + a, t * anc_dim + a)])
            .sum()
    }))
}

/// Positive-semidefiniteness up to `tol`.
///
/// True iff `m` is Hermitian within `tol` and its smallest eigenvalue is at
/// least `-tol·max(1, spectral radius)`, with `tol` floored at [`PSD_FLOOR`].
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    m.require_square()?;
    match m.hermitian_eigen(tol) {
        Ok(eig) => {
            let bound = tol.max(PSD_FLOOR) * eig.spectral_radius().max(1.0);
            Ok(eig.values.first().is_none_or(|&v| v >= -bound))
        }
        Err(Error::NotHermitian { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Extends an `n×k` isometry to an `n×n` unitary whose first `k` columns
/// are the input.
///
/// Completion runs Gram–Schmidt over the standard basis vectors in order,
/// skipping candidates whose residual norm falls below 1e-8, so the result
/// is a deterministic function of the input.
pub fn unitary_completion(v: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = v.rows();
    let k = v.cols();
    if k > n {
        return Err(Error::DimensionMismatch(format!(
            "isometry has more columns ({k}) than rows ({n})"
        )));
    }
    let gram = &v.adjoint() * v;
    let deviation = gram.max_abs_diff(&ComplexMatrix::identity(k));
    if deviation > ISOMETRY_TOL {
        return Err(Error::NotIsometry { deviation });
    }

    let mut columns: Vec<Vec<Complex64>> = (0..k)
        .map(|c| v.0.column(c).iter().copied().collect())
        .collect();
    for e in 0..n {
        if columns.len() == n {
            break;
        }
        let mut cand = vec![Complex64::new(0.0, 0.0); n];
        cand[e] = Complex64::new(1.0, 0.0);
        // Two passes keep the new column orthogonal to working precision.
        for _ in 0..2 {
            for q in &columns {
                let overlap: Complex64 = q.iter().zip(&cand).map(|(a, b)| a.conj() * b).sum();
                for (x, qi) in cand.iter_mut().zip(q) {
                    *x -= overlap * qi;
                }
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < COMPLETION_SKIP {
            continue;
        }
        for x in &mut cand {
            *x /= norm;
        }
        columns.push(cand);
    }
    if columns.len() != n {
        return Err(Error::NotIsometry { deviation });
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, c| columns[c][r]))
}
