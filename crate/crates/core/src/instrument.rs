//! Instruments: outcome-indexed positive maps whose sum is trace preserving.
//!
//! Only the singleton maps `X({x})` are stored; the map of an outcome set is
//! their sum, so finite additivity holds by construction.
//!
//! An operation `T` is called compatible with a sharp observable `E` when
//! `T = T ∘ Φ_E`, where `Φ_E` is the Lüders pinching. Summing the
//! decomposition identities `X(Δ)ρ = T[E(Δ)ρE(Δ)]` over singletons shows
//! this is exactly the condition for `T` to be the total operation of some
//! `E`-compatible instrument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::observable::{EffectFamily, OutcomeSpace, Povm, SharpObservable};
use crate::state::DensityOperator;
use crate::superop::{PositivityVerdict, Superoperator, CP_TOL};
use crate::wire::{InstrumentRecord, StateFamilyRecord};

/// Allowed deviation of `T*(I)` from `I`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Tolerance used when a constructor checks its own precondition.
pub const PRECONDITION_TOL: f64 = 1e-9;

/// Pure states probed per non-CP member during validation.
pub const POSITIVITY_SAMPLES: usize = 64;

/// Outcome probabilities at or below this are treated as null.
pub const NULL_PROBABILITY: f64 = 1e-12;

const POSITIVITY_SEED: u64 = 0x0001_2572_u64;

/// A finite instrument: one positive map per outcome, trace preserving in total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstrumentRecord", into = "InstrumentRecord")]
pub struct Instrument {
    dim: usize,
    outcomes: OutcomeSpace,
    ops: Vec<Superoperator>,
}

/// One density operator per outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateFamilyRecord", into = "StateFamilyRecord")]
pub struct StateFamily {
    outcomes: OutcomeSpace,
    states: Vec<DensityOperator>,
}

/// A single named comparison with its worst deviation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn new(name: impl Into<String>, max_deviation: f64, tolerance: f64) -> Self {
        IdentityCheck {
            name: name.into(),
            max_deviation,
            tolerance,
            pass: max_deviation <= tolerance,
        }
    }
}

/// Worst deviations in the decomposition identities of an `E`-compatible instrument.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

impl DecompositionReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest deviation over the identities proper, excluding the compatibility row.
    pub fn max_identity_deviation(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name != "povm_equals_observable")
            .map(|c| c.max_deviation)
            .fold(0.0, f64::max)
    }
}

fn require_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what}: expected dimension {expected}, got {found}"
        )))
    }
}

impl Instrument {
    /// Validates shapes, normalization and positivity of every member.
    ///
    /// Members that are completely positive pass immediately; the others are
    /// probed on random pure states and rejected if a witness turns up.
    pub fn new(outcomes: OutcomeSpace, ops: Vec<Superoperator>) -> Result<Self> {
        let x = Self::from_maps_unchecked(outcomes, ops)?;
        x.require_normalized()?;
        for (k, op) in x.ops.iter().enumerate() {
            if let PositivityVerdict::Violated(w) =
                op.is_positive_sampled(POSITIVITY_SAMPLES, POSITIVITY_SEED + k as u64)?
            {
                return Err(Error::InvalidInstrument(format!(
                    "map for outcome {:?} is not positive (output eigenvalue {:.3e})",
                    x.outcomes.label(k),
                    w.min_eigenvalue
                )));
            }
        }
        Ok(x)
    }

    /// For maps that are completely positive by construction.
    pub(crate) fn from_cp_maps(outcomes: OutcomeSpace, ops: Vec<Superoperator>) -> Result<Self> {
        let x = Self::from_maps_unchecked(outcomes, ops)?;
        x.require_normalized()?;
        Ok(x)
    }

    /// Checks shapes only; normalization and positivity are not enforced.
    ///
    /// Meant for perturbation studies and for reporting on invalid input.
    pub fn from_maps_unchecked(outcomes: OutcomeSpace, ops: Vec<Superoperator>) -> Result<Self> {
        if ops.len() != outcomes.len() {
            return Err(Error::OutcomeMismatch(format!(
                "{} outcomes but {} maps",
                outcomes.len(),
                ops.len()
            )));
        }
        let dim = ops[0].dim();
        for op in &ops {
            require_dim("instrument map", dim, op.dim())?;
        }
        Ok(Instrument { dim, outcomes, ops })
    }

    fn require_normalized(&self) -> Result<()> {
        let deviation = self.normalization_deviation();
        if deviation > NORMALIZATION_TOL {
            return Err(Error::InvalidInstrument(format!(
                "total operation is not trace preserving (deviation {deviation:.3e})"
            )));
        }
        Ok(())
    }

    /// `X({x})ρ = Σ_i K_{x,i} ρ K_{x,i}†`.
    pub fn from_kraus(outcomes: OutcomeSpace, kraus: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let ops = kraus
            .iter()
            .map(|group| Superoperator::from_kraus(group))
            .collect::<Result<Vec<_>>>()?;
        Self::from_cp_maps(outcomes, ops)
    }

    /// The Lüders instrument `X({x})ρ = E(x) ρ E(x)`.
    pub fn luders(e: &SharpObservable) -> Self {
        let ops = e
            .projections()
            .iter()
            .map(|p| Superoperator::conjugation(p).expect("square projection"))
            .collect();
        Instrument {
            dim: e.dim(),
            outcomes: e.outcomes().clone(),
            ops,
        }
    }

    /// `X({x})ρ = √F(x) ρ √F(x)`.
    pub fn povm_instrument(povm: &Povm) -> Result<Self> {
        let ops = povm
            .effects()
            .iter()
            .map(|f| {
                let eig = f.hermitian_eigen(CP_TOL)?;
                let roots: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
                let root = &(&eig.vectors * &ComplexMatrix::from_diagonal(&roots)) * &eig.vectors.adjoint();
                Superoperator::conjugation(&root)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cp_maps(povm.outcomes().clone(), ops)
    }

    /// `X({x})ρ = Tr[F(x) ρ]·ϱ_x` for any effect family.
    pub fn measure_and_prepare<E: EffectFamily + ?Sized>(e: &E, family: &StateFamily) -> Result<Self> {
        e.outcomes().require_equal(&family.outcomes)?;
        let out_dim = family.dim();
        require_dim("state family", e.dim(), out_dim)?;
        let ops = e
            .effects()
            .iter()
            .zip(&family.states)
            .map(|(f, state)| {
                Superoperator::from_fn(e.dim(), |a| state.matrix().scale((f * a).trace()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cp_maps(e.outcomes().clone(), ops)
    }

    /// The `E`-compatible instrument with total operation `t`: `X({x})ρ = T[E(x) ρ E(x)]`.
    ///
    /// Under `T = T ∘ Φ_E` this equals `T[E(x) ρ]`.
    pub fn from_total_operation(e: &SharpObservable, t: &Superoperator) -> Result<Self> {
        require_dim("total operation", e.dim(), t.dim())?;
        let deviation = compatible_operation_deviation(t, e)?;
        if deviation > PRECONDITION_TOL {
            return Err(Error::Incompatible { deviation });
        }
        let ops = e
            .projections()
            .iter()
            .map(|p| t.compose(&Superoperator::conjugation(p)?))
            .collect::<Result<Vec<_>>>()?;
        if t.is_completely_positive(CP_TOL) {
            Self::from_cp_maps(e.outcomes().clone(), ops)
        } else {
            Self::new(e.outcomes().clone(), ops)
        }
    }

    /// Measure-and-prepare instrument of a nondegenerate observable.
    pub fn from_state_family(e: &SharpObservable, family: &StateFamily) -> Result<Self> {
        e.require_nondegenerate()?;
        Self::measure_and_prepare(e, family)
    }

    /// Convex combination `α·a + (1-α)·b` over a shared outcome space.
    pub fn mix(alpha: f64, a: &Instrument, b: &Instrument) -> Result<Self> {
        a.outcomes.require_equal(&b.outcomes)?;
        require_dim("instrument mixture", a.dim, b.dim)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("mixing weight {alpha} outside [0, 1]")));
        }
        let ops = a
            .ops
            .iter()
            .zip(&b.ops)
            .map(|(p, q)| p.scale(alpha).add(&q.scale(1.0 - alpha)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(a.outcomes.clone(), ops)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn ops(&self) -> &[Superoperator] {
        &self.ops
    }

    pub fn op(&self, index: usize) -> &Superoperator {
        &self.ops[index]
    }

    /// `X(Δ)` for a set of outcome indices.
    pub fn op_of(&self, subset: &[usize]) -> Superoperator {
        Superoperator::sum(self.dim, subset.iter().map(|&x| &self.ops[x])).expect("equal dimensions")
    }

    /// `T = Σ_x X({x})`.
    pub fn total_operation(&self) -> Superoperator {
        Superoperator::sum(self.dim, &self.ops).expect("equal dimensions")
    }

    pub fn normalization_deviation(&self) -> f64 {
        self.total_operation().trace_preservation_deviation()
    }

    /// `X({x})*(I)` without validating the result.
    pub fn effects(&self) -> Vec<ComplexMatrix> {
        let id = ComplexMatrix::identity(self.dim);
        self.ops
            .iter()
            .map(|op| op.dual().apply(&id).expect("square identity"))
            .collect()
    }

    /// The POVM `F(x) = X({x})*(I)`.
    pub fn povm(&self) -> Result<Povm> {
        Povm::new(self.dim, self.outcomes.clone(), self.effects())
    }

    /// Largest entrywise difference between the instrument's POVM and `E`.
    pub fn compatibility_deviation(&self, e: &SharpObservable) -> Result<f64> {
        self.outcomes.require_equal(e.outcomes())?;
        require_dim("observable", self.dim, e.dim())?;
        Ok(self
            .effects()
            .iter()
            .zip(e.projections())
            .map(|(f, p)| f.max_abs_diff(p))
            .fold(0.0, f64::max))
    }

    pub fn is_e_compatible(&self, e: &SharpObservable, tol: f64) -> Result<bool> {
        Ok(self.compatibility_deviation(e)? <= tol)
    }

    /// Worst entry of `X({x})*(A) - F(x)·T*(A)` over outcomes and matrix units `A`.
    pub fn decomposability_deviation(&self) -> f64 {
        let t_dual = self.total_operation().dual();
        let duals: Vec<Superoperator> = self.ops.iter().map(Superoperator::dual).collect();
        let effects = self.effects();
        let mut worst: f64 = 0.0;
        for a in matrix_units(self.dim) {
            let ta = t_dual.apply(&a).expect("square unit");
            for (dual, f) in duals.iter().zip(&effects) {
                let lhs = dual.apply(&a).expect("square unit");
                worst = worst.max(lhs.max_abs_diff(&(f * &ta)));
            }
        }
        worst
    }

    pub fn is_decomposable(&self, tol: f64) -> bool {
        self.decomposability_deviation() <= tol
    }

    /// Evaluates the decomposition identities on matrix units, for every
    /// singleton and for the full outcome set:
    ///
    /// `X(Δ)ρ = T[E(Δ)ρ] = T[ρE(Δ)] = T[E(Δ)ρE(Δ)]` and
    /// `X(Δ)*B = E(Δ)T*(B) = T*(B)E(Δ) = E(Δ)T*(B)E(Δ)`.
    ///
    /// The report also carries a `povm_equals_observable` row; the identities
    /// are only guaranteed when that row passes.
    pub fn check_decomposition_identities(&self, e: &SharpObservable, tol: f64) -> Result<DecompositionReport> {
        let compat = self.compatibility_deviation(e)?;
        let t = self.total_operation();
        let t_dual = t.dual();

        let mut subsets: Vec<Vec<usize>> = (0..self.outcomes.len()).map(|x| vec![x]).collect();
        subsets.push((0..self.outcomes.len()).collect());

        let mut state = [0.0f64; 3];
        let mut dual = [0.0f64; 3];
        for subset in &subsets {
            let x_map = self.op_of(subset);
            let x_dual = x_map.dual();
            let p = e.projection_of(subset);
            for u in matrix_units(self.dim) {
                let lhs = x_map.apply(&u)?;
                let rhs = [
                    t.apply(&(&p * &u))?,
                    t.apply(&(&u * &p))?,
                    t.apply(&(&(&p * &u) * &p))?,
                ];
                for (slot, r) in state.iter_mut().zip(&rhs) {
                    *slot = slot.max(lhs.max_abs_diff(r));
                }

                let lhs = x_dual.apply(&u)?;
                let tb = t_dual.apply(&u)?;
                let rhs = [&p * &tb, &tb * &p, &(&p * &tb) * &p];
                for (slot, r) in dual.iter_mut().zip(&rhs) {
                    *slot = slot.max(lhs.max_abs_diff(r));
                }
            }
        }

        let checks = vec![
            IdentityCheck::new("povm_equals_observable", compat, tol),
            IdentityCheck::new("X(D)rho = T[E(D)rho]", state[0], tol),
            IdentityCheck::new("X(D)rho = T[rho E(D)]", state[1], tol),
            IdentityCheck::new("X(D)rho = T[E(D)rho E(D)]", state[2], tol),
            IdentityCheck::new("X(D)*B = E(D)T*(B)", dual[0], tol),
            IdentityCheck::new("X(D)*B = T*(B)E(D)", dual[1], tol),
            IdentityCheck::new("X(D)*B = E(D)T*(B)E(D)", dual[2], tol),
        ];
        let pass = checks.iter().all(|c| c.pass);
        Ok(DecompositionReport { checks, pass })
    }

    /// Every singleton map is completely positive (sums then are too).
    pub fn is_cp(&self, tol: f64) -> bool {
        self.ops.iter().all(|op| op.is_completely_positive(tol))
    }

    /// Smallest Choi eigenvalue over all singleton maps.
    pub fn min_choi_eigenvalue(&self) -> Result<f64> {
        self.ops
            .iter()
            .map(Superoperator::min_choi_eigenvalue)
            .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
    }

    /// Sampled positivity verdict for each singleton map.
    pub fn positivity(&self, samples: usize, seed: u64) -> Result<Vec<PositivityVerdict>> {
        self.ops
            .iter()
            .enumerate()
            .map(|(k, op)| op.is_positive_sampled(samples, seed.wrapping_add(k as u64)))
            .collect()
    }

    /// Largest natural-matrix distance to another instrument on the same outcomes.
    pub fn distance(&self, other: &Instrument) -> Result<f64> {
        self.outcomes.require_equal(&other.outcomes)?;
        require_dim("instrument", self.dim, other.dim)?;
        Ok(self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max))
    }

    /// Output state `X({x})ρ / Tr[X({x})ρ]` for each outcome of positive probability.
    pub fn conditional_states(&self, rho: &DensityOperator) -> Result<Vec<Option<DensityOperator>>> {
        require_dim("state", self.dim, rho.dim())?;
        self.ops
            .iter()
            .map(|op| {
                let out = op.apply(rho.matrix())?;
                let p = out.trace().re;
                if p > NULL_PROBABILITY {
                    DensityOperator::normalized_lenient(&out).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect()
    }
}

/// `|i⟩⟨j|` for all `i, j`.
pub fn matrix_units(dim: usize) -> impl Iterator<Item = ComplexMatrix> {
    (0..dim).flat_map(move |i| (0..dim).map(move |j| ComplexMatrix::unit(dim, i, j)))
}

/// Frobenius distance between `T ∘ Φ_E` and `T`; fails unless `T` is trace preserving.
pub fn compatible_operation_deviation(t: &Superoperator, e: &SharpObservable) -> Result<f64> {
    require_dim("operation", e.dim(), t.dim())?;
    let deviation = t.trace_preservation_deviation();
    if deviation > NORMALIZATION_TOL {
        return Err(Error::NotTracePreserving { deviation });
    }
    Ok(t.compose(&e.luders_pinching())?.distance(t))
}

/// Whether `T = T ∘ Φ_E` within `tol`.
pub fn is_e_compatible_operation(t: &Superoperator, e: &SharpObservable, tol: f64) -> Result<bool> {
    Ok(compatible_operation_deviation(t, e)? <= tol)
}

/// `Tρ = Σ_x ϱ_x Tr[ρ E(x)]` for a nondegenerate observable.
pub fn operation_from_state_family(e: &SharpObservable, family: &StateFamily) -> Result<Superoperator> {
    Ok(Instrument::from_state_family(e, family)?.total_operation())
}

/// Recovers the state family of a compatible operation, probing with `I/d`.
///
/// Null outcomes (`E(x) = 0`) carry no state and come back as `None`.
pub fn state_family_of_operation(e: &SharpObservable, t: &Superoperator) -> Result<Vec<Option<DensityOperator>>> {
    e.require_nondegenerate()?;
    let x = Instrument::from_total_operation(e, t)?;
    x.conditional_states(&DensityOperator::maximally_mixed(e.dim()))
}

impl StateFamily {
    pub fn new(outcomes: OutcomeSpace, states: Vec<DensityOperator>) -> Result<Self> {
        if outcomes.len() != states.len() {
            return Err(Error::OutcomeMismatch(format!(
                "{} outcomes but {} states",
                outcomes.len(),
                states.len()
            )));
        }
        let dim = states[0].dim();
        for s in &states {
            require_dim("state family member", dim, s.dim())?;
        }
        Ok(StateFamily { outcomes, states })
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &DensityOperator {
        &self.states[index]
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn plus() -> DensityOperator {
        DensityOperator::pure(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap()
    }

    fn x_observable() -> SharpObservable {
        let s = 1.0 / 2f64.sqrt();
        let basis = ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap();
        SharpObservable::from_basis(OutcomeSpace::numbered(2).unwrap(), &basis).unwrap()
    }

    fn flip_family() -> StateFamily {
        StateFamily::new(
            OutcomeSpace::numbered(2).unwrap(),
            vec![DensityOperator::basis(2, 1).unwrap(), DensityOperator::basis(2, 0).unwrap()],
        )
        .unwrap()
    }

    /// Trine POVM: three rank-one effects (2/3)|ψ_k⟩⟨ψ_k| at 120° on the real circle.
    fn trine() -> Povm {
        let effects = (0..3)
            .map(|k| {
                let theta = std::f64::consts::PI * k as f64 / 3.0;
                let psi = [Complex64::new(theta.cos(), 0.0), Complex64::new(theta.sin(), 0.0)];
                ComplexMatrix::outer(&psi).scale_real(2.0 / 3.0)
            })
            .collect();
        Povm::new(2, OutcomeSpace::numbered(3).unwrap(), effects).unwrap()
    }

    #[test]
    fn luders_povm_and_total() {
        let z = SharpObservable::computational(2);
        let x = Instrument::luders(&z);
        assert!(x.povm().unwrap().max_deviation(&z).unwrap() < 1e-15);
        assert!(x.total_operation().distance(&z.luders_pinching()) < 1e-15);
        assert!(x.is_e_compatible(&z, 1e-12).unwrap());
        assert!(!x.is_e_compatible(&x_observable(), 1e-3).unwrap());
        assert!(x.is_cp(CP_TOL));
    }

    #[test]
    fn luders_on_plus_state() {
        let z = SharpObservable::computational(2);
        let x = Instrument::luders(&z);
        let states = x.conditional_states(&plus()).unwrap();
        assert!(states[0].as_ref().unwrap().matrix().max_abs_diff(z.projection(0)) < 1e-15);
        assert!(states[1].as_ref().unwrap().matrix().max_abs_diff(z.projection(1)) < 1e-15);
        let out = x.op(0).apply(plus().matrix()).unwrap();
        assert!((out.trace().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_outcome_identity_instrument() {
        let x = Instrument::new(OutcomeSpace::new(["only"]).unwrap(), vec![Superoperator::identity(2)]).unwrap();
        let povm = x.povm().unwrap();
        assert_eq!(povm.effect(0), &ComplexMatrix::identity(2));
    }

    #[test]
    fn rejects_unnormalized() {
        let r = Instrument::new(OutcomeSpace::new(["a"]).unwrap(), vec![Superoperator::identity(2).scale(0.5)]);
        assert!(matches!(r, Err(Error::InvalidInstrument(_))));
    }

    #[test]
    fn rejects_non_positive_member() {
        // ρ ↦ Tr[ρ]·I − 2ρ on d = 2 is trace preserving up to the sign but not positive.
        let l = Superoperator::from_fn(2, |a| {
            &ComplexMatrix::identity(2).scale(a.trace()).scale_real(1.5) - &a.scale_real(2.0)
        })
        .unwrap();
        assert!(l.is_trace_preserving(1e-12));
        let r = Instrument::new(OutcomeSpace::new(["a"]).unwrap(), vec![l]);
        assert!(matches!(r, Err(Error::InvalidInstrument(_))));
    }

    #[test]
    fn measure_and_prepare_total_operation() {
        let z = SharpObservable::computational(2);
        let fam = flip_family();
        let x = Instrument::measure_and_prepare(&z, &fam).unwrap();
        let rho = plus();
        let direct = &fam.state(0).matrix().scale_real(0.5) + &fam.state(1).matrix().scale_real(0.5);
        assert!(x.total_operation().apply(rho.matrix()).unwrap().max_abs_diff(&direct) < 1e-15);
        assert!(x.is_e_compatible(&z, 1e-12).unwrap());
    }

    #[test]
    fn decomposable_examples() {
        let z = SharpObservable::computational(2);
        assert!(Instrument::luders(&z).is_decomposable(1e-12));
        let mp = Instrument::measure_and_prepare(&z, &flip_family()).unwrap();
        assert!(mp.is_decomposable(1e-12));
        let trine = Instrument::povm_instrument(&trine()).unwrap();
        assert!(trine.decomposability_deviation() > 1e-2);
        assert!(!trine.is_decomposable(1e-9));
    }

    #[test]
    fn decomposition_identities_for_luders() {
        let z = SharpObservable::computational(2);
        let report = Instrument::luders(&z).check_decomposition_identities(&z, 1e-12).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.checks.len(), 7);
    }

    #[test]
    fn corrupted_instrument_is_flagged() {
        let z = SharpObservable::computational(2);
        let kraus = vec![vec![z.projection(0).scale_real(1.01)], vec![z.projection(1).clone()]];
        let ops = kraus.iter().map(|k| Superoperator::from_kraus(k).unwrap()).collect();
        let bad = Instrument::from_maps_unchecked(z.outcomes().clone(), ops).unwrap();
        let report = bad.check_decomposition_identities(&z, 1e-9).unwrap();
        assert!(!report.pass);
        let row = report.check("povm_equals_observable").unwrap();
        assert!(row.max_deviation > 1e-3);
    }

    #[test]
    fn compatible_operation_examples() {
        let z = SharpObservable::computational(2);
        assert!(is_e_compatible_operation(&z.luders_pinching(), &z, 1e-12).unwrap());
        assert!(!is_e_compatible_operation(&Superoperator::identity(2), &z, 1e-6).unwrap());
        let t = Instrument::measure_and_prepare(&z, &flip_family()).unwrap().total_operation();
        assert!(is_e_compatible_operation(&t, &z, 1e-12).unwrap());
        assert!(matches!(
            is_e_compatible_operation(&Superoperator::identity(2).scale(0.5), &z, 1e-9),
            Err(Error::NotTracePreserving { .. })
        ));
    }

    #[test]
    fn instrument_from_pinching_is_luders() {
        let z = SharpObservable::computational(2);
        let x = Instrument::from_total_operation(&z, &z.luders_pinching()).unwrap();
        assert!(x.distance(&Instrument::luders(&z)).unwrap() < 1e-15);
    }

    #[test]
    fn instrument_from_measure_and_flip() {
        let z = SharpObservable::computational(2);
        let t = operation_from_state_family(&z, &flip_family()).unwrap();
        let x = Instrument::from_total_operation(&z, &t).unwrap();
        // X({0})ρ = ⟨0|ρ|0⟩·|1⟩⟨1|
        let rho = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                Complex64::new(0.3, 0.0),
                Complex64::new(0.1, 0.2),
                Complex64::new(0.1, -0.2),
                Complex64::new(0.7, 0.0),
            ],
        )
        .unwrap();
        let expected = ComplexMatrix::unit(2, 1, 1).scale_real(0.3);
        assert!(x.op(0).apply(&rho).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn incompatible_operation_rejected() {
        let z = SharpObservable::computational(2);
        assert!(matches!(
            Instrument::from_total_operation(&z, &Superoperator::identity(2)),
            Err(Error::Incompatible { .. })
        ));
    }

    #[test]
    fn state_family_examples() {
        let z = SharpObservable::computational(2);
        let identity_family = StateFamily::new(
            OutcomeSpace::numbered(2).unwrap(),
            vec![DensityOperator::basis(2, 0).unwrap(), DensityOperator::basis(2, 1).unwrap()],
        )
        .unwrap();
        let t = operation_from_state_family(&z, &identity_family).unwrap();
        assert!(t.distance(&z.luders_pinching()) < 1e-15);

        let constant = StateFamily::new(
            OutcomeSpace::numbered(2).unwrap(),
            vec![DensityOperator::basis(2, 0).unwrap(), DensityOperator::basis(2, 0).unwrap()],
        )
        .unwrap();
        let t = operation_from_state_family(&z, &constant).unwrap();
        let out = t.apply(plus().matrix()).unwrap();
        assert!(out.max_abs_diff(&ComplexMatrix::unit(2, 0, 0)) < 1e-15);

        let x = Instrument::from_state_family(&z, &flip_family()).unwrap();
        let rho = DensityOperator::basis(2, 0).unwrap();
        let states = x.conditional_states(&rho).unwrap();
        assert_eq!(states[0].as_ref().unwrap(), flip_family().state(0));
        assert!(states[1].is_none());
    }

    #[test]
    fn degenerate_observable_rejected() {
        let trivial = SharpObservable::trivial(2, "*");
        let fam = StateFamily::new(trivial.outcomes().clone(), vec![DensityOperator::maximally_mixed(2)]).unwrap();
        assert!(matches!(
            Instrument::from_state_family(&trivial, &fam),
            Err(Error::DegenerateObservable { .. })
        ));
        assert!(operation_from_state_family(&trivial, &fam).is_err());
    }

    #[test]
    fn transpose_instrument_is_not_cp() {
        let trivial = SharpObservable::trivial(2, "*");
        let x = Instrument::from_total_operation(&trivial, &Superoperator::transpose_map(2)).unwrap();
        assert!(!x.is_cp(CP_TOL));
        assert!((x.min_choi_eigenvalue().unwrap() + 1.0).abs() < 1e-12);
        assert!(x.is_e_compatible(&trivial, 1e-12).unwrap());
    }
}
