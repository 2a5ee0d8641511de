//! Outcome spaces, sharp observables, POVMs and Born-rule statistics.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::state::DensityOperator;
use crate::superop::Superoperator;
use crate::wire::{ObservableRecord, PovmRecord};

/// Tolerance on projection and effect invariants.
pub const OBSERVABLE_TOL: f64 = 1e-10;

/// Lower bound below which a probability is treated as a modeling error.
pub const PROBABILITY_FLOOR: f64 = -1e-12;

/// Allowed deviation of a total probability from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// An ordered, nonempty list of distinct outcome labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl TryFrom<Vec<String>> for OutcomeSpace {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        OutcomeSpace::new(labels)
    }
}

impl From<OutcomeSpace> for Vec<String> {
    fn from(o: OutcomeSpace) -> Self {
        o.labels
    }
}

impl OutcomeSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidOutcomes("no outcomes".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidOutcomes(format!("duplicate label {l:?}")));
            }
        }
        Ok(OutcomeSpace { labels })
    }

    /// Labels `"0"`, `"1"`, …, `"n-1"`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|k| k.to_string()))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn require_equal(&self, other: &OutcomeSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::OutcomeMismatch(format!(
                "{:?} vs {:?}",
                self.labels, other.labels
            )))
        }
    }

    /// Reorders a label-keyed map into outcome order, requiring the same key set.
    fn collect_ordered<T>(&self, mut map: BTreeMap<String, T>, what: &str) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.len());
        for l in &self.labels {
            out.push(map.remove(l).ok_or_else(|| {
                Error::OutcomeMismatch(format!("{what} missing for outcome {l:?}"))
            })?);
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::OutcomeMismatch(format!(
                "{what} given for unknown outcome {extra:?}"
            )));
        }
        Ok(out)
    }

    fn keyed<T: Clone>(&self, items: &[T]) -> BTreeMap<String, T> {
        self.labels.iter().cloned().zip(items.iter().cloned()).collect()
    }
}

/// Anything that assigns an effect operator to each outcome.
pub trait EffectFamily {
    fn dim(&self) -> usize;
    fn outcomes(&self) -> &OutcomeSpace;
    fn effects(&self) -> &[ComplexMatrix];
}

/// A finite projection-valued measure: orthogonal projections summing to `I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservableRecord", into = "ObservableRecord")]
pub struct SharpObservable {
    dim: usize,
    outcomes: OutcomeSpace,
    projections: Vec<ComplexMatrix>,
}

/// Effects `F(x) ≥ 0` with `Σ_x F(x) = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmRecord", into = "PovmRecord")]
pub struct Povm {
    dim: usize,
    outcomes: OutcomeSpace,
    effects: Vec<ComplexMatrix>,
}

/// Probabilities indexed by an outcome space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    outcomes: OutcomeSpace,
    probabilities: Vec<f64>,
}

fn require_count(outcomes: &OutcomeSpace, n: usize, what: &str) -> Result<()> {
    if outcomes.len() == n {
        Ok(())
    } else {
        Err(Error::OutcomeMismatch(format!(
            "{} outcomes but {n} {what}",
            outcomes.len()
        )))
    }
}

impl SharpObservable {
    pub fn new(dim: usize, outcomes: OutcomeSpace, projections: Vec<ComplexMatrix>) -> Result<Self> {
        require_count(&outcomes, projections.len(), "projections")?;
        let invalid = |label: &str, msg: String| Error::InvalidObservable(format!("outcome {label:?}: {msg}"));
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (x, p) in projections.iter().enumerate() {
            let label = outcomes.label(x);
            p.require_dim(dim, "projection")
                .map_err(|e| invalid(label, e.to_string()))?;
            p.check_finite()?;
            let asym = p.hermitian_asymmetry();
            if asym > OBSERVABLE_TOL {
                return Err(invalid(label, format!("not self-adjoint (asymmetry {asym:.3e})")));
            }
            let idem = (p * p).max_abs_diff(p);
            if idem > OBSERVABLE_TOL {
                return Err(invalid(label, format!("not idempotent (deviation {idem:.3e})")));
            }
            for (y, q) in projections.iter().enumerate().skip(x + 1) {
                let overlap = (p * q).max_abs();
                if overlap > OBSERVABLE_TOL {
                    return Err(invalid(
                        label,
                        format!("not orthogonal to {:?} (overlap {overlap:.3e})", outcomes.label(y)),
                    ));
                }
            }
            total = &total + p;
        }
        let completeness = total.max_abs_diff(&ComplexMatrix::identity(dim));
        if completeness > OBSERVABLE_TOL {
            return Err(Error::InvalidObservable(format!(
                "projections sum to I only within {completeness:.3e}"
            )));
        }
        Ok(SharpObservable {
            dim,
            outcomes,
            projections,
        })
    }

    /// The projections onto the computational basis, labelled `"0"`, `"1"`, ….
    pub fn computational(dim: usize) -> Self {
        let projections = (0..dim).map(|k| ComplexMatrix::unit(dim, k, k)).collect();
        SharpObservable {
            dim,
            outcomes: OutcomeSpace::numbered(dim).expect("dim > 0"),
            projections,
        }
    }

    /// Rank-one projections onto the columns of a unitary.
    pub fn from_basis(outcomes: OutcomeSpace, basis: &ComplexMatrix) -> Result<Self> {
        let dim = basis.require_square()?;
        let projections = (0..dim)
            .map(|k| {
                let col: Vec<_> = (0..dim).map(|r| basis[(r, k)]).collect();
                ComplexMatrix::outer(&col)
            })
            .collect();
        Self::new(dim, outcomes, projections)
    }

    /// The trivial observable `{I}` with a single outcome.
    pub fn trivial(dim: usize, label: &str) -> Self {
        SharpObservable {
            dim,
            outcomes: OutcomeSpace::new([label]).expect("single label"),
            projections: vec![ComplexMatrix::identity(dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn projection(&self, index: usize) -> &ComplexMatrix {
        &self.projections[index]
    }

    pub fn projections(&self) -> &[ComplexMatrix] {
        &self.projections
    }

    /// `E(Δ)` for a set of outcome indices.
    pub fn projection_of(&self, subset: &[usize]) -> ComplexMatrix {
        subset
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, &x| {
                &acc + &self.projections[x]
            })
    }

    /// Rank of each projection, counted as eigenvalues above 1/2.
    pub fn ranks(&self) -> Vec<usize> {
        self.projections
            .iter()
            .map(|p| {
                p.hermitian_eigen(OBSERVABLE_TOL)
                    .map(|eig| eig.values.iter().filter(|&&v| v > 0.5).count())
                    .unwrap_or(usize::MAX)
            })
            .collect()
    }

    /// Whether the commutant is abelian, i.e. every projection has rank at most one.
    pub fn is_nondegenerate(&self) -> bool {
        self.ranks().iter().all(|&r| r <= 1)
    }

    pub(crate) fn require_nondegenerate(&self) -> Result<()> {
        for (x, &rank) in self.ranks().iter().enumerate() {
            if rank > 1 {
                return Err(Error::DegenerateObservable {
                    label: self.outcomes.label(x).to_string(),
                    rank,
                });
            }
        }
        Ok(())
    }

    /// The Lüders pinching `ρ ↦ Σ_x E(x) ρ E(x)`.
    pub fn luders_pinching(&self) -> Superoperator {
        Superoperator::from_kraus(&self.projections).expect("projections are square and nonempty")
    }

    pub fn to_povm(&self) -> Povm {
        Povm {
            dim: self.dim,
            outcomes: self.outcomes.clone(),
            effects: self.projections.clone(),
        }
    }
}

impl EffectFamily for SharpObservable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    fn effects(&self) -> &[ComplexMatrix] {
        &self.projections
    }
}

impl Povm {
    pub fn new(dim: usize, outcomes: OutcomeSpace, effects: Vec<ComplexMatrix>) -> Result<Self> {
        require_count(&outcomes, effects.len(), "effects")?;
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (x, f) in effects.iter().enumerate() {
            let label = outcomes.label(x);
            f.require_dim(dim, "effect")
                .map_err(|e| Error::InvalidPovm(format!("outcome {label:?}: {e}")))?;
            let min = f
                .min_eigenvalue(OBSERVABLE_TOL)
                .map_err(|e| Error::InvalidPovm(format!("outcome {label:?}: {e}")))?;
            if min < -OBSERVABLE_TOL {
                return Err(Error::InvalidPovm(format!(
                    "outcome {label:?}: negative eigenvalue {min:.3e}"
                )));
            }
            total = &total + f;
        }
        let completeness = total.max_abs_diff(&ComplexMatrix::identity(dim));
        if completeness > OBSERVABLE_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to I only within {completeness:.3e}"
            )));
        }
        Ok(Povm {
            dim,
            outcomes,
            effects,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn effect(&self, index: usize) -> &ComplexMatrix {
        &self.effects[index]
    }

    /// Largest entrywise difference to another effect family on the same outcomes.
    pub fn max_deviation<E: EffectFamily + ?Sized>(&self, other: &E) -> Result<f64> {
        self.outcomes.require_equal(other.outcomes())?;
        if self.dim != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "POVM on {} vs {}",
                self.dim,
                other.dim()
            )));
        }
        Ok(self
            .effects
            .iter()
            .zip(other.effects())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }
}

impl EffectFamily for Povm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }
}

impl OutcomeDistribution {
    /// Validates raw probabilities, clamping rounding noise.
    ///
    /// Entries below `-1e-12` or a total off by more than `1e-9` are errors;
    /// within those bounds entries are clamped to `[0, 1]` and renormalized.
    pub fn new(outcomes: OutcomeSpace, raw: Vec<f64>) -> Result<Self> {
        require_count(&outcomes, raw.len(), "probabilities")?;
        for (x, &p) in raw.iter().enumerate() {
            if !p.is_finite() || p < PROBABILITY_FLOOR {
                return Err(Error::InvalidDistribution(format!(
                    "outcome {:?} has probability {p:.3e}",
                    outcomes.label(x)
                )));
            }
        }
        let total: f64 = raw.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total:.12}"
            )));
        }
        let clamped: Vec<f64> = raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let sum: f64 = clamped.iter().sum();
        let probabilities = clamped.iter().map(|p| p / sum).collect();
        Ok(OutcomeDistribution {
            outcomes,
            probabilities,
        })
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.outcomes.index_of(label).map(|i| self.probabilities[i])
    }

    /// `P(Δ)` for a set of outcome indices.
    pub fn probability_of(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&x| self.probabilities[x]).sum()
    }

    pub fn max_deviation(&self, other: &OutcomeDistribution) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `p(x) = Tr[F(x) ρ]`.
pub fn born_distribution<E: EffectFamily + ?Sized>(
    e: &E,
    rho: &DensityOperator,
) -> Result<OutcomeDistribution> {
    if e.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable on dimension {} but state on {}",
            e.dim(),
            rho.dim()
        )));
    }
    let raw = e
        .effects()
        .iter()
        .map(|f| (f * rho.matrix()).trace().re)
        .collect();
    OutcomeDistribution::new(e.outcomes().clone(), raw)
}

/// Re-keys a list of per-outcome items by label, in outcome order.
pub(crate) fn keyed_by_label<T: Clone>(outcomes: &OutcomeSpace, items: &[T]) -> BTreeMap<String, T> {
    outcomes.keyed(items)
}

/// Inverse of [`keyed_by_label`]; every outcome must appear exactly once.
pub(crate) fn ordered_by_label<T>(
    outcomes: &OutcomeSpace,
    map: BTreeMap<String, T>,
    what: &str,
) -> Result<Vec<T>> {
    outcomes.collect_ordered(map, what)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn plus_minus() -> SharpObservable {
        let s = 1.0 / 2f64.sqrt();
        let basis = ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap();
        SharpObservable::from_basis(OutcomeSpace::new(["+", "-"]).unwrap(), &basis).unwrap()
    }

    #[test]
    fn born_on_eigenstate() {
        let z = SharpObservable::computational(2);
        let p = born_distribution(&z, &DensityOperator::basis(2, 0).unwrap()).unwrap();
        assert_eq!(p.probabilities(), &[1.0, 0.0]);
    }

    #[test]
    fn born_on_maximally_mixed() {
        let z = SharpObservable::computational(2);
        let p = born_distribution(&z, &DensityOperator::maximally_mixed(2)).unwrap();
        assert_eq!(p.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn born_in_conjugate_basis() {
        let p = born_distribution(&plus_minus(), &DensityOperator::basis(2, 0).unwrap()).unwrap();
        assert!((p.get("+").unwrap() - 0.5).abs() < 1e-15);
        assert!((p.get("-").unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn born_dimension_mismatch() {
        let z = SharpObservable::computational(2);
        assert!(matches!(
            born_distribution(&z, &DensityOperator::maximally_mixed(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nondegeneracy() {
        assert!(SharpObservable::computational(2).is_nondegenerate());
        assert!(!SharpObservable::trivial(2, "*").is_nondegenerate());
        let e = SharpObservable::new(
            3,
            OutcomeSpace::new(["a", "b"]).unwrap(),
            vec![
                ComplexMatrix::from_diagonal(&[1.0, 1.0, 0.0]),
                ComplexMatrix::from_diagonal(&[0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        assert_eq!(e.ranks(), vec![2, 1]);
        assert!(!e.is_nondegenerate());
    }

    #[test]
    fn zero_projection_allowed() {
        let e = SharpObservable::new(
            2,
            OutcomeSpace::new(["a", "b", "never"]).unwrap(),
            vec![
                ComplexMatrix::unit(2, 0, 0),
                ComplexMatrix::unit(2, 1, 1),
                ComplexMatrix::zeros(2, 2),
            ],
        )
        .unwrap();
        assert!(e.is_nondegenerate());
        let p = born_distribution(&e, &DensityOperator::maximally_mixed(2)).unwrap();
        assert_eq!(p.get("never"), Some(0.0));
    }

    #[test]
    fn rejects_incomplete_or_overlapping() {
        let outcomes = OutcomeSpace::new(["a", "b"]).unwrap();
        assert!(SharpObservable::new(
            2,
            outcomes.clone(),
            vec![ComplexMatrix::unit(2, 0, 0), ComplexMatrix::zeros(2, 2)]
        )
        .is_err());
        assert!(SharpObservable::new(
            2,
            outcomes,
            vec![ComplexMatrix::identity(2), ComplexMatrix::unit(2, 0, 0)]
        )
        .is_err());
    }

    #[test]
    fn outcome_space_rules() {
        assert!(OutcomeSpace::new(Vec::<String>::new()).is_err());
        assert!(OutcomeSpace::new(["a", "a"]).is_err());
    }

    #[test]
    fn distribution_clamps_noise_and_rejects_errors() {
        let o = OutcomeSpace::numbered(2).unwrap();
        let d = OutcomeDistribution::new(o.clone(), vec![-1e-13, 1.0]).unwrap();
        assert_eq!(d.probabilities(), &[0.0, 1.0]);
        assert!(OutcomeDistribution::new(o.clone(), vec![-1e-6, 1.0 + 1e-6]).is_err());
        assert!(OutcomeDistribution::new(o, vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn pinching_examples() {
        let z = SharpObservable::computational(2);
        let phi = z.luders_pinching();
        let plus = DensityOperator::pure(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let out = phi.apply(plus.matrix()).unwrap();
        assert!(out.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        let fixed = phi.apply(z.projection(1)).unwrap();
        assert_eq!(&fixed, z.projection(1));
        assert!(phi.is_trace_preserving(1e-12));
    }

    #[test]
    fn json_roundtrip_preserves_order() {
        let e = plus_minus();
        let text = serde_json::to_string(&e).unwrap();
        let back: SharpObservable = serde_json::from_str(&text).unwrap();
        assert_eq!(back.outcomes().labels(), &["+", "-"]);
        assert!(back.projection(0).max_abs_diff(e.projection(0)) < 1e-15);
    }

    #[test]
    fn json_rejects_missing_label() {
        let text = r#"{"dim":1,"outcomes":["a","b"],"projections":{"a":{"rows":1,"cols":1,"data":[[1,0]]}}}"#;
        assert!(serde_json::from_str::<SharpObservable>(text).is_err());
    }
}
