//! Linear maps on `d×d` operators.
//!
//! Maps are stored as their natural matrix acting on column-stacked
//! operators: `vec(A)[i + j·d] = A[i][j]`. Under this convention
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)` and the Choi matrix is
//! `Σ_ij L(|i⟩⟨j|) ⊗ |i⟩⟨j|`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{is_psd, ComplexMatrix};
use crate::random;
use crate::state::DensityOperator;

/// Choi eigenvalues at or below this are dropped when extracting Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-10;

/// Default tolerance for complete positivity decisions.
pub const CP_TOL: f64 = 1e-9;

/// Output eigenvalue below which a sampled state witnesses non-positivity.
pub const POSITIVITY_WITNESS_TOL: f64 = 1e-9;

/// A linear map on operators of a `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    natural: ComplexMatrix,
}

/// Kraus operators `{K_i}` of a completely positive map `ρ ↦ Σ K_i ρ K_i†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
}

/// Outcome of [`Superoperator::is_positive_sampled`].
///
/// `Violated` is definitive; `PlausiblyPositive` only means no sampled
/// state produced a negative output.
#[derive(Clone, Debug)]
pub enum PositivityVerdict {
    Violated(PositivityWitness),
    PlausiblyPositive,
}

#[derive(Clone, Debug)]
pub struct PositivityWitness {
    pub state: DensityOperator,
    /// Smallest eigenvalue of the Hermitian part of the output.
    pub min_eigenvalue: f64,
    /// Largest entry of `out - out†`; nonzero means Hermiticity was broken.
    pub asymmetry: f64,
}

impl PositivityVerdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, PositivityVerdict::Violated(_))
    }
}

fn vec_index(dim: usize, row: usize, col: usize) -> usize {
    row + col * dim
}

impl Superoperator {
    pub fn new(dim: usize, natural: ComplexMatrix) -> Result<Self> {
        natural.require_dim(dim * dim, "natural matrix")?;
        natural.check_finite()?;
        Ok(Superoperator { dim, natural })
    }

    /// Builds the map from its action on matrix units.
    pub fn from_fn(dim: usize, mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> Result<Self> {
        let n = dim * dim;
        let mut columns = Vec::with_capacity(n);
        for j in 0..dim {
            for i in 0..dim {
                let out = f(&ComplexMatrix::unit(dim, i, j));
                out.require_dim(dim, "map output")?;
                columns.push(out.vectorize());
            }
        }
        Self::new(dim, ComplexMatrix::from_fn(n, n, |r, c| columns[c][r]))
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            natural: ComplexMatrix::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Superoperator {
            dim,
            natural: ComplexMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// `ρ ↦ A ρ B`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        let dim = a.require_square()?;
        b.require_dim(dim, "right factor")?;
        Self::new(dim, b.transpose().kron(a))
    }

    /// `ρ ↦ A ρ`.
    pub fn left_multiplication(a: &ComplexMatrix) -> Result<Self> {
        let dim = a.require_square()?;
        Self::sandwich(a, &ComplexMatrix::identity(dim))
    }

    /// `ρ ↦ ρ A`.
    pub fn right_multiplication(a: &ComplexMatrix) -> Result<Self> {
        let dim = a.require_square()?;
        Self::sandwich(&ComplexMatrix::identity(dim), a)
    }

    /// `ρ ↦ U ρ U†`.
    pub fn conjugation(u: &ComplexMatrix) -> Result<Self> {
        Self::sandwich(u, &u.adjoint())
    }

    /// `ρ ↦ Σ K ρ K†`.
    pub fn from_kraus(operators: &[ComplexMatrix]) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty Kraus set".into()))?;
        let dim = first.require_square()?;
        let mut natural = ComplexMatrix::zeros(dim * dim, dim * dim);
        for k in operators {
            k.require_dim(dim, "Kraus operator")?;
            natural = &natural + &k.conj().kron(k);
        }
        Self::new(dim, natural)
    }

    /// `ρ ↦ ρᵀ`; positive but not completely positive for `dim ≥ 2`.
    pub fn transpose_map(dim: usize) -> Self {
        let n = dim * dim;
        let natural = ComplexMatrix::from_fn(n, n, |r, c| {
            let (i, j) = (c % dim, c / dim);
            if r == vec_index(dim, j, i) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Superoperator { dim, natural }
    }

    /// `ρ ↦ Tr[ρ]·σ`.
    pub fn replace_with(sigma: &ComplexMatrix) -> Result<Self> {
        let dim = sigma.require_square()?;
        Self::from_fn(dim, |a| sigma.scale(a.trace()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn natural(&self) -> &ComplexMatrix {
        &self.natural
    }

    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        a.require_dim(self.dim, "superoperator input")?;
        let v = ComplexMatrix::column(&a.vectorize());
        let out = &self.natural * &v;
        Ok(ComplexMatrix::unvectorize(self.dim, &out.vectorize()))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Superoperator) -> Result<Self> {
        self.require_same_dim(inner)?;
        Ok(Superoperator {
            dim: self.dim,
            natural: &self.natural * &inner.natural,
        })
    }

    pub fn add(&self, other: &Superoperator) -> Result<Self> {
        self.require_same_dim(other)?;
        Ok(Superoperator {
            dim: self.dim,
            natural: &self.natural + &other.natural,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Superoperator {
            dim: self.dim,
            natural: self.natural.scale_real(factor),
        }
    }

    /// Sum of a nonempty list of maps of equal dimension.
    pub fn sum<'a>(dim: usize, maps: impl IntoIterator<Item = &'a Superoperator>) -> Result<Self> {
        let mut acc = Superoperator::zero(dim);
        for m in maps {
            acc = acc.add(m)?;
        }
        Ok(acc)
    }

    /// Frobenius distance between natural matrices.
    pub fn distance(&self, other: &Superoperator) -> f64 {
        self.natural.distance(&other.natural)
    }

    fn require_same_dim(&self, other: &Superoperator) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "superoperators on dimensions {} and {}",
                self.dim, other.dim
            )))
        }
    }

    /// The dual map with respect to `⟨A, ρ⟩ = Tr[A ρ]`.
    pub fn dual(&self) -> Self {
        let d = self.dim;
        let n = d * d;
        let flip = |p: usize| vec_index(d, p / d, p % d);
        let natural = ComplexMatrix::from_fn(n, n, |p, q| self.natural[(flip(q), flip(p))]);
        Superoperator { dim: d, natural }
    }

    /// `Σ_ij L(|i⟩⟨j|) ⊗ |i⟩⟨j|`.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim;
        ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            let (a, i) = (r / d, r % d);
            let (b, j) = (c / d, c % d);
            self.natural[(vec_index(d, a, b), vec_index(d, i, j))]
        })
    }

    /// Smallest eigenvalue of the Hermitian part of the Choi matrix.
    ///
    /// Fails when the map does not preserve Hermiticity.
    pub fn min_choi_eigenvalue(&self) -> Result<f64> {
        self.choi().min_eigenvalue(CP_TOL)
    }

    /// Choi-matrix positivity within `tol`.
    pub fn is_completely_positive(&self, tol: f64) -> bool {
        is_psd(&self.choi(), tol).unwrap_or(false)
    }

    /// Largest entry of `L*(I) - I`.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let id = ComplexMatrix::identity(self.dim);
        self.dual()
            .apply(&id)
            .map_or(f64::INFINITY, |out| out.max_abs_diff(&id))
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_deviation() <= tol
    }

    /// Kraus operators from the Choi eigendecomposition.
    pub fn kraus(&self) -> Result<KrausSet> {
        let choi = self.choi();
        let eig = match choi.hermitian_eigen(CP_TOL) {
            Ok(eig) => eig,
            Err(Error::NotHermitian { .. }) => {
                return Err(Error::NotCompletelyPositive {
                    min_eigenvalue: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        let min = eig.values.first().copied().unwrap_or(0.0);
        let bound = CP_TOL * eig.spectral_radius().max(1.0);
        if min < -bound {
            return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
        }
        let d = self.dim;
        let mut operators = Vec::new();
        for (k, &lambda) in eig.values.iter().enumerate().rev() {
            if lambda <= KRAUS_CUTOFF {
                continue;
            }
            let v = eig.vector(k);
            let s = lambda.sqrt();
            operators.push(ComplexMatrix::from_fn(d, d, |a, i| v[a * d + i] * s));
        }
        if operators.is_empty() {
            operators.push(ComplexMatrix::zeros(d, d));
        }
        let set = KrausSet { operators };
        let deviation = set.to_superoperator()?.natural.max_abs_diff(&self.natural);
        if deviation > CP_TOL * eig.spectral_radius().max(1.0) {
            return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
        }
        Ok(set)
    }

    /// Probes positivity on `samples` random pure states.
    ///
    /// Completely positive maps short-circuit to `PlausiblyPositive`.
    pub fn is_positive_sampled(&self, samples: usize, seed: u64) -> Result<PositivityVerdict> {
        if samples == 0 {
            return Err(Error::InvalidArgument("positivity sampling needs at least one sample".into()));
        }
        if self.is_completely_positive(CP_TOL) {
            return Ok(PositivityVerdict::PlausiblyPositive);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let state = random::pure_state(self.dim, &mut rng);
            let out = self.apply(state.matrix())?;
            let scale = out.max_abs().max(1.0);
            let asymmetry = out.hermitian_asymmetry();
            let hermitian = (&out + &out.adjoint()).scale_real(0.5);
            let min_eigenvalue = hermitian.min_eigenvalue(CP_TOL)?;
            if asymmetry > POSITIVITY_WITNESS_TOL * scale || min_eigenvalue < -POSITIVITY_WITNESS_TOL {
                return Ok(PositivityVerdict::Violated(PositivityWitness {
                    state,
                    min_eigenvalue,
                    asymmetry,
                }));
            }
        }
        Ok(PositivityVerdict::PlausiblyPositive)
    }
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty Kraus set".into()))?;
        let dim = first.require_square()?;
        for k in &operators {
            k.require_dim(dim, "Kraus operator")?;
            k.check_finite()?;
        }
        Ok(KrausSet { operators })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].rows()
    }

    pub fn to_superoperator(&self) -> Result<Superoperator> {
        Superoperator::from_kraus(&self.operators)
    }
}

/// Wire form: `{"natural": matrix}` or `{"kraus": [matrix, ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SuperoperatorJson {
    Natural { natural: ComplexMatrix },
    Kraus { kraus: Vec<ComplexMatrix> },
}

impl Serialize for Superoperator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match self.kraus() {
            Ok(set) if self.is_completely_positive(CP_TOL) => SuperoperatorJson::Kraus {
                kraus: set.operators,
            },
            _ => SuperoperatorJson::Natural {
                natural: self.natural.clone(),
            },
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Superoperator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match SuperoperatorJson::deserialize(deserializer)? {
            SuperoperatorJson::Natural { natural } => {
                let n = natural.rows();
                let dim = (n as f64).sqrt().round() as usize;
                if dim * dim != n {
                    return Err(D::Error::custom(format!(
                        "natural matrix side {n} is not a perfect square"
                    )));
                }
                Superoperator::new(dim, natural).map_err(D::Error::custom)
            }
            SuperoperatorJson::Kraus { kraus } => {
                Superoperator::from_kraus(&kraus).map_err(D::Error::custom)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hadamard() -> ComplexMatrix {
        let s = 1.0 / 2f64.sqrt();
        ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap()
    }

    #[test]
    fn identity_applies_as_identity() {
        let a = ComplexMatrix::from_row_major(2, 2, vec![c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(4.0, 4.0)])
            .unwrap();
        assert_eq!(Superoperator::identity(2).apply(&a).unwrap(), a);
    }

    #[test]
    fn apply_rejects_wrong_dim() {
        let l = Superoperator::identity(2);
        assert!(matches!(
            l.apply(&ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = ComplexMatrix::from_row_major(2, 2, vec![c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(4.0, 4.0)])
            .unwrap();
        let b = hadamard();
        let x = ComplexMatrix::from_row_major(2, 2, vec![c(0.5, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(-1.0, 0.0)])
            .unwrap();
        let l = Superoperator::sandwich(&a, &b).unwrap();
        let direct = &(&a * &x) * &b;
        assert!(l.apply(&x).unwrap().max_abs_diff(&direct) < 1e-14);
    }

    #[test]
    fn dual_of_identity() {
        assert_eq!(Superoperator::identity(3).dual(), Superoperator::identity(3));
    }

    #[test]
    fn choi_of_identity_channel() {
        let choi = Superoperator::identity(2).choi();
        let eig = choi.hermitian_eigen(1e-12).unwrap();
        let expected = [0.0, 0.0, 0.0, 2.0];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn choi_of_transpose_is_swap() {
        let choi = Superoperator::transpose_map(2).choi();
        let swap = ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(choi, swap);
    }

    #[test]
    fn choi_of_depolarizing_channel() {
        let l = Superoperator::replace_with(&ComplexMatrix::identity(2).scale_real(0.5)).unwrap();
        let expected = ComplexMatrix::identity(4).scale_real(0.5);
        assert!(l.choi().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn kraus_of_identity_is_single_unitary() {
        let set = Superoperator::identity(2).kraus().unwrap();
        assert_eq!(set.len(), 1);
        let k = &set.operators()[0];
        let phase = k[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        let expected = ComplexMatrix::identity(2).scale(phase);
        assert!(k.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn kraus_rejects_transpose() {
        assert!(matches!(
            Superoperator::transpose_map(2).kraus(),
            Err(Error::NotCompletelyPositive { .. })
        ));
    }

    #[test]
    fn cp_classification() {
        assert!(Superoperator::conjugation(&hadamard()).unwrap().is_completely_positive(CP_TOL));
        assert!(!Superoperator::transpose_map(2).is_completely_positive(CP_TOL));
        let mix = Superoperator::identity(2)
            .scale(0.5)
            .add(&Superoperator::transpose_map(2).scale(0.5))
            .unwrap();
        assert!(!mix.is_completely_positive(CP_TOL));
        assert!((mix.min_choi_eigenvalue().unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn trace_preservation() {
        assert!(Superoperator::identity(2).is_trace_preserving(1e-12));
        assert!(!Superoperator::identity(2).scale(0.5).is_trace_preserving(1e-3));
    }

    #[test]
    fn transpose_is_plausibly_positive() {
        let verdict = Superoperator::transpose_map(2).is_positive_sampled(100, 1).unwrap();
        assert!(!verdict.is_violated());
        let verdict = Superoperator::identity(2).is_positive_sampled(1, 1).unwrap();
        assert!(!verdict.is_violated());
    }

    #[test]
    fn reduction_map_positive_but_not_cp() {
        // ρ ↦ Tr[ρ]·I − ρ on d = 3.
        let d = 3;
        let l = Superoperator::from_fn(d, |a| {
            &ComplexMatrix::identity(d).scale(a.trace()) - a
        })
        .unwrap();
        assert!(!l.is_completely_positive(CP_TOL));
        assert!(!l.is_positive_sampled(200, 5).unwrap().is_violated());
    }

    #[test]
    fn overshooting_reduction_map_is_caught() {
        // ρ ↦ Tr[ρ]·I − 2ρ on d = 3: every pure input gives eigenvalue −1.
        let d = 3;
        let l = Superoperator::from_fn(d, |a| {
            &ComplexMatrix::identity(d).scale(a.trace()) - &a.scale_real(2.0)
        })
        .unwrap();
        match l.is_positive_sampled(100, 9).unwrap() {
            PositivityVerdict::Violated(w) => assert!((w.min_eigenvalue + 1.0).abs() < 1e-9),
            PositivityVerdict::PlausiblyPositive => panic!("expected a witness"),
        }
    }

    #[test]
    fn sampling_needs_samples() {
        assert!(Superoperator::identity(2).is_positive_sampled(0, 0).is_err());
    }

    #[test]
    fn json_forms() {
        let l = Superoperator::conjugation(&hadamard()).unwrap();
        let text = serde_json::to_string(&l).unwrap();
        assert!(text.starts_with(r#"{"kraus":"#));
        let back: Superoperator = serde_json::from_str(&text).unwrap();
        assert!(back.distance(&l) < 1e-12);

        let t = Superoperator::transpose_map(2);
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.starts_with(r#"{"natural":"#));
        let back: Superoperator = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
