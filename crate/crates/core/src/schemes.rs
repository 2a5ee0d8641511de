//! Measuring apparatuses and the statistics of successive measurements.
//!
//! An apparatus pairs an output distribution `P(ρ)` with a state reduction
//! `Q(ρ, x)`. It is either backed by an instrument or a black box wrapping
//! host closures; black boxes are validated on every call, never trusted.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instrument::{Instrument, NULL_PROBABILITY};
use crate::matrix::ComplexMatrix;
use crate::observable::{OutcomeDistribution, OutcomeSpace, Povm, NORMALIZATION_TOL};
use crate::random;
use crate::state::DensityOperator;

/// Allowed error when checking a reconstructed POVM against fresh states.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

const RECONSTRUCTION_CHECKS: usize = 20;
const RECONSTRUCTION_SEED: u64 = 0xE9_0F;

pub type DistributionFn = dyn Fn(&DensityOperator) -> Result<OutcomeDistribution> + Send + Sync;
pub type ReductionFn = dyn Fn(&DensityOperator, usize) -> Result<DensityOperator> + Send + Sync;

#[derive(Clone)]
pub enum Scheme {
    Instrument(Instrument),
    BlackBox {
        dim: usize,
        outcomes: OutcomeSpace,
        distribution: Arc<DistributionFn>,
        reduction: Arc<ReductionFn>,
    },
}

/// A labelled measuring apparatus.
#[derive(Clone)]
pub struct Apparatus {
    label: String,
    scheme: Scheme,
}

impl fmt::Debug for Apparatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.scheme {
            Scheme::Instrument(_) => "instrument",
            Scheme::BlackBox { .. } => "black-box",
        };
        f.debug_struct("Apparatus")
            .field("label", &self.label)
            .field("scheme", &kind)
            .field("dim", &self.dim())
            .field("outcomes", &self.outcomes().labels())
            .finish()
    }
}

impl Apparatus {
    /// `P(ρ)(x) = Tr[X({x})ρ]`, `Q(ρ, x) = X({x})ρ / Tr[X({x})ρ]`.
    pub fn from_instrument(label: impl Into<String>, x: Instrument) -> Self {
        Apparatus {
            label: label.into(),
            scheme: Scheme::Instrument(x),
        }
    }

    pub fn black_box(
        label: impl Into<String>,
        dim: usize,
        outcomes: OutcomeSpace,
        distribution: impl Fn(&DensityOperator) -> Result<OutcomeDistribution> + Send + Sync + 'static,
        reduction: impl Fn(&DensityOperator, usize) -> Result<DensityOperator> + Send + Sync + 'static,
    ) -> Self {
        Apparatus {
            label: label.into(),
            scheme: Scheme::BlackBox {
                dim,
                outcomes,
                distribution: Arc::new(distribution),
                reduction: Arc::new(reduction),
            },
        }
    }

    /// Measures the input in its own eigenbasis: outcome `k` has the `k`-th
    /// largest eigenvalue as probability and leaves the matching eigenvector.
    ///
    /// Its statistics are not affine in the input, so no instrument describes it.
    pub fn eigenbasis(dim: usize) -> Self {
        let outcomes = OutcomeSpace::numbered(dim).expect("dim > 0");
        let space = outcomes.clone();
        Self::black_box(
            "eigenbasis",
            dim,
            outcomes,
            move |rho| {
                let eig = rho.matrix().hermitian_eigen(1e-10)?;
                let probs = eig.values.iter().rev().copied().collect();
                OutcomeDistribution::new(space.clone(), probs)
            },
            move |rho, k| {
                let eig = rho.matrix().hermitian_eigen(1e-10)?;
                DensityOperator::pure(&eig.vector(dim - 1 - k))
            },
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn instrument(&self) -> Option<&Instrument> {
        match &self.scheme {
            Scheme::Instrument(x) => Some(x),
            Scheme::BlackBox { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.scheme {
            Scheme::Instrument(x) => x.dim(),
            Scheme::BlackBox { dim, .. } => *dim,
        }
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        match &self.scheme {
            Scheme::Instrument(x) => x.outcomes(),
            Scheme::BlackBox { outcomes, .. } => outcomes,
        }
    }

    fn require_input(&self, rho: &DensityOperator) -> Result<()> {
        if rho.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "apparatus {:?} acts on dimension {} but the state has {}",
                self.label,
                self.dim(),
                rho.dim()
            )))
        }
    }

    /// The output distribution `P(ρ)`.
    pub fn distribution(&self, rho: &DensityOperator) -> Result<OutcomeDistribution> {
        self.require_input(rho)?;
        match &self.scheme {
            Scheme::Instrument(x) => {
                let raw = x
                    .ops()
                    .iter()
                    .map(|op| op.apply(rho.matrix()).map(|out| out.trace().re))
                    .collect::<Result<Vec<_>>>()?;
                OutcomeDistribution::new(x.outcomes().clone(), raw)
            }
            Scheme::BlackBox {
                outcomes,
                distribution,
                ..
            } => {
                let p = distribution(rho)?;
                p.outcomes().require_equal(outcomes)?;
                Ok(p)
            }
        }
    }

    /// The output state `Q(ρ, x)`; `I/d` when the outcome has probability zero.
    pub fn reduce(&self, rho: &DensityOperator, outcome: usize) -> Result<DensityOperator> {
        self.require_input(rho)?;
        if outcome >= self.outcomes().len() {
            return Err(Error::InvalidArgument(format!("outcome index {outcome} out of range")));
        }
        match &self.scheme {
            Scheme::Instrument(x) => {
                let out = x.op(outcome).apply(rho.matrix())?;
                if out.trace().re > NULL_PROBABILITY {
                    DensityOperator::normalized_lenient(&out)
                } else {
                    Ok(null_outcome_state(self.dim()))
                }
            }
            Scheme::BlackBox { reduction, dim, .. } => {
                let p = self.distribution(rho)?;
                if p.probability(outcome) <= NULL_PROBABILITY {
                    return Ok(null_outcome_state(*dim));
                }
                let out = reduction(rho, outcome)?;
                if out.dim() != *dim {
                    return Err(Error::DimensionMismatch(format!(
                        "black-box reduction returned dimension {} instead of {dim}",
                        out.dim()
                    )));
                }
                Ok(out)
            }
        }
    }

    /// `P(ρ)` together with `Q(ρ, x)` for every outcome of positive probability.
    pub fn step(&self, rho: &DensityOperator) -> Result<(OutcomeDistribution, Vec<Option<DensityOperator>>)> {
        let p = self.distribution(rho)?;
        let states = (0..p.probabilities().len())
            .map(|x| {
                if p.probability(x) > NULL_PROBABILITY {
                    self.reduce(rho, x).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((p, states))
    }
}

/// State reported for outcomes of probability zero, where the reduction is undefined.
pub fn null_outcome_state(dim: usize) -> DensityOperator {
    DensityOperator::maximally_mixed(dim)
}

/// Whether two apparatuses agree on `P` everywhere and on `Q` wherever the
/// outcome has positive probability, over the given probe states.
pub fn statistically_equivalent(
    a: &Apparatus,
    b: &Apparatus,
    probes: &[DensityOperator],
    tol: f64,
) -> Result<bool> {
    a.outcomes().require_equal(b.outcomes())?;
    for rho in probes {
        let (pa, qa) = a.step(rho)?;
        let (pb, qb) = b.step(rho)?;
        if pa.max_deviation(&pb) > tol {
            return Ok(false);
        }
        for (sa, sb) in qa.iter().zip(&qb) {
            if let (Some(sa), Some(sb)) = (sa, sb) {
                if sa.matrix().max_abs_diff(sb.matrix()) > tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Collective reduction `R(Δ, ρ) = Σ_{x∈Δ} P(ρ)(x)·Q(ρ, x) / P(ρ)(Δ)`.
#[derive(Clone, Debug)]
pub struct CollectiveScheme {
    apparatus: Apparatus,
}

impl CollectiveScheme {
    pub fn new(apparatus: Apparatus) -> Self {
        CollectiveScheme { apparatus }
    }

    pub fn apparatus(&self) -> &Apparatus {
        &self.apparatus
    }

    /// `R(Δ, ρ)`; undefined (an error) when `P(ρ)(Δ) = 0`.
    pub fn reduce(&self, subset: &[usize], rho: &DensityOperator) -> Result<DensityOperator> {
        let (p, states) = self.apparatus.step(rho)?;
        let total = p.probability_of(subset);
        if total <= NULL_PROBABILITY {
            return Err(Error::ZeroProbability);
        }
        let dim = self.apparatus.dim();
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for &x in subset {
            if let Some(state) = &states[x] {
                acc = &acc + &state.matrix().scale_real(p.probability(x));
            }
        }
        DensityOperator::normalized_lenient(&acc)
    }

    /// `‖Σ_x P(x)·R({x}, ρ) − R(Λ, ρ)‖`, entrywise, over outcomes of positive probability.
    pub fn consistency_deviation(&self, rho: &DensityOperator) -> Result<f64> {
        let p = self.apparatus.distribution(rho)?;
        let n = p.probabilities().len();
        let whole = self.reduce(&(0..n).collect::<Vec<_>>(), rho)?;
        let dim = self.apparatus.dim();
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for x in 0..n {
            if p.probability(x) > NULL_PROBABILITY {
                acc = &acc + &self.reduce(&[x], rho)?.matrix().scale_real(p.probability(x));
            }
        }
        Ok(acc.max_abs_diff(whole.matrix()))
    }
}

/// The collective scheme determined by an apparatus.
pub fn collective_of(a: &Apparatus) -> CollectiveScheme {
    CollectiveScheme::new(a.clone())
}

/// Probabilities of outcome tuples; the last coordinate varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDistribution {
    outcome_spaces: Vec<OutcomeSpace>,
    probabilities: Vec<f64>,
}

impl JointDistribution {
    pub fn outcome_spaces(&self) -> &[OutcomeSpace] {
        &self.outcome_spaces
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Flat index of an outcome-index tuple.
    pub fn index(&self, tuple: &[usize]) -> usize {
        tuple
            .iter()
            .zip(&self.outcome_spaces)
            .fold(0, |acc, (&x, space)| acc * space.len() + x)
    }

    /// Outcome-index tuple at a flat index.
    pub fn tuple(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.outcome_spaces.len()];
        for (slot, space) in out.iter_mut().zip(&self.outcome_spaces).rev() {
            *slot = index % space.len();
            index /= space.len();
        }
        out
    }

    pub fn labels(&self, index: usize) -> Vec<String> {
        self.tuple(index)
            .iter()
            .zip(&self.outcome_spaces)
            .map(|(&x, space)| space.label(x).to_string())
            .collect()
    }

    pub fn probability(&self, tuple: &[usize]) -> f64 {
        self.probabilities[self.index(tuple)]
    }

    pub fn get(&self, labels: &[&str]) -> Option<f64> {
        if labels.len() != self.outcome_spaces.len() {
            return None;
        }
        let tuple = labels
            .iter()
            .zip(&self.outcome_spaces)
            .map(|(l, space)| space.index_of(l))
            .collect::<Option<Vec<_>>>()?;
        Some(self.probability(&tuple))
    }

    /// Marginal over the first `k` apparatuses.
    pub fn leading_marginal(&self, k: usize) -> JointDistribution {
        assert!(k >= 1 && k <= self.outcome_spaces.len());
        let trailing: usize = self.outcome_spaces[k..].iter().map(OutcomeSpace::len).product();
        let probabilities = self
            .probabilities
            .chunks(trailing)
            .map(|chunk| chunk.iter().sum())
            .collect();
        JointDistribution {
            outcome_spaces: self.outcome_spaces[..k].to_vec(),
            probabilities,
        }
    }

    pub fn max_deviation(&self, other: &JointDistribution) -> f64 {
        if self.outcome_spaces != other.outcome_spaces {
            return f64::INFINITY;
        }
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn require_sequence(sequence: &[Apparatus], dim: usize) -> Result<()> {
    if sequence.is_empty() {
        return Err(Error::InvalidArgument("empty apparatus sequence".into()));
    }
    for a in sequence {
        if a.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "apparatus {:?} acts on dimension {} but the input has {dim}",
                a.label(),
                a.dim()
            )));
        }
    }
    Ok(())
}

/// Joint outcome distribution of a successive measurement, computed by
/// conditioning on the first outcome and recursing on the reduced state.
pub fn joint_distribution(sequence: &[Apparatus], rho: &DensityOperator) -> Result<JointDistribution> {
    require_sequence(sequence, rho.dim())?;
    let outcome_spaces: Vec<OutcomeSpace> = sequence.iter().map(|a| a.outcomes().clone()).collect();
    let size = outcome_spaces.iter().map(OutcomeSpace::len).product();
    let mut probabilities = vec![0.0; size];
    accumulate(sequence, rho, 1.0, 0, &mut probabilities)?;

    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!("joint probabilities sum to {total:.12}")));
    }
    Ok(JointDistribution {
        outcome_spaces,
        probabilities,
    })
}

fn accumulate(
    sequence: &[Apparatus],
    rho: &DensityOperator,
    weight: f64,
    prefix: usize,
    out: &mut [f64],
) -> Result<()> {
    let (first, rest) = sequence.split_first().expect("nonempty");
    let n = first.outcomes().len();
    if rest.is_empty() {
        let p = first.distribution(rho)?;
        for x in 0..n {
            out[prefix * n + x] += weight * p.probability(x);
        }
        return Ok(());
    }
    let (p, states) = first.step(rho)?;
    for (x, state) in states.iter().enumerate() {
        if let Some(state) = state {
            accumulate(rest, state, weight * p.probability(x), prefix * n + x, out)?;
        }
    }
    Ok(())
}

/// A mixture on which the joint distribution fails to be affine.
#[derive(Clone, Debug, Serialize)]
pub struct MlpdWitness {
    pub rho1: DensityOperator,
    pub rho2: DensityOperator,
    pub alpha: f64,
    pub tuple: Vec<String>,
    pub deviation: f64,
    pub trial: usize,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MlpdVerdict {
    Affine { trials: usize, max_deviation: f64 },
    Violated(MlpdWitness),
}

impl MlpdVerdict {
    pub fn is_affine(&self) -> bool {
        matches!(self, MlpdVerdict::Affine { .. })
    }
}

/// Tests the mixing law `Pr{·‖αρ₁+(1−α)ρ₂} = αPr{·‖ρ₁} + (1−α)Pr{·‖ρ₂}` on random mixtures.
///
/// Even trials mix pure states, odd trials mix full-rank states.
pub fn check_mlpd(sequence: &[Apparatus], trials: usize, seed: u64, tol: f64) -> Result<MlpdVerdict> {
    if trials == 0 {
        return Err(Error::InvalidArgument("mixing-law check needs at least one trial".into()));
    }
    let dim = sequence
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty apparatus sequence".into()))?
        .dim();
    require_sequence(sequence, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    for trial in 0..trials {
        let (rho1, rho2) = if trial % 2 == 0 {
            (random::pure_state(dim, &mut rng), random::pure_state(dim, &mut rng))
        } else {
            (random::mixed_state(dim, &mut rng), random::mixed_state(dim, &mut rng))
        };
        let alpha: f64 = rng.random_range(0.01..0.99);
        let mixed = DensityOperator::mix(alpha, &rho1, &rho2)?;
        let lhs = joint_distribution(sequence, &mixed)?;
        let j1 = joint_distribution(sequence, &rho1)?;
        let j2 = joint_distribution(sequence, &rho2)?;
        let mut worst = (0.0f64, 0usize);
        for (k, ((l, a), b)) in lhs
            .probabilities()
            .iter()
            .zip(j1.probabilities())
            .zip(j2.probabilities())
            .enumerate()
        {
            let dev = (l - (alpha * a + (1.0 - alpha) * b)).abs();
            if dev > worst.0 {
                worst = (dev, k);
            }
        }
        if worst.0 > tol {
            return Ok(MlpdVerdict::Violated(MlpdWitness {
                tuple: lhs.labels(worst.1),
                rho1,
                rho2,
                alpha,
                deviation: worst.0,
                trial,
            }));
        }
        max_deviation = max_deviation.max(worst.0);
    }
    Ok(MlpdVerdict::Affine { trials, max_deviation })
}

/// Reconstructs the POVM `F` with `P(ρ)(x) = Tr[F(x)ρ]` from the apparatus's
/// statistics on `|i⟩`, `(|i⟩+|j⟩)/√2` and `(|i⟩+i|j⟩)/√2`, then checks it
/// on fresh random states.
///
/// Fails with [`Error::NotAffine`] when the statistics are not of that form.
pub fn povm_from_affine_scheme(a: &Apparatus) -> Result<Povm> {
    let d = a.dim();
    let n = a.outcomes().len();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let basis = |i: usize| -> Vec<Complex64> { (0..d).map(|k| if k == i { one } else { zero }).collect() };

    let diag: Vec<OutcomeDistribution> = (0..d)
        .map(|i| a.distribution(&DensityOperator::pure(&basis(i))?))
        .collect::<Result<_>>()?;
    let mut effects = vec![ComplexMatrix::zeros(d, d); n];
    let mut entries = vec![vec![zero; d * d]; n];
    for (i, p) in diag.iter().enumerate() {
        for x in 0..n {
            entries[x][i * d + i] = Complex64::new(p.probability(x), 0.0);
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sum = basis(i);
            sum[j] = one;
            let mut twisted = basis(i);
            twisted[j] = Complex64::new(0.0, 1.0);
            let p_sum = a.distribution(&DensityOperator::pure(&sum)?)?;
            let p_twist = a.distribution(&DensityOperator::pure(&twisted)?)?;
            for x in 0..n {
                let mean = 0.5 * (diag[i].probability(x) + diag[j].probability(x));
                let re = p_sum.probability(x) - mean;
                let im = mean - p_twist.probability(x);
                entries[x][i * d + j] = Complex64::new(re, im);
                entries[x][j * d + i] = Complex64::new(re, -im);
            }
        }
    }
    for (f, e) in effects.iter_mut().zip(entries) {
        *f = ComplexMatrix::from_row_major(d, d, e)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(RECONSTRUCTION_SEED);
    let mut worst: f64 = 0.0;
    for k in 0..RECONSTRUCTION_CHECKS {
        let rho = if k % 2 == 0 {
            random::mixed_state(d, &mut rng)
        } else {
            random::pure_state(d, &mut rng)
        };
        let p = a.distribution(&rho)?;
        for (x, f) in effects.iter().enumerate() {
            let predicted = (f * rho.matrix()).trace().re;
            worst = worst.max((predicted - p.probability(x)).abs());
        }
    }
    if worst > RECONSTRUCTION_TOL {
        return Err(Error::NotAffine { deviation: worst });
    }
    Povm::new(d, a.outcomes().clone(), effects)
}

/// Outcome tallies of repeated successive measurements.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectories {
    pub outcome_spaces: Vec<OutcomeSpace>,
    pub shots: usize,
    /// Counts per outcome tuple, last coordinate fastest.
    pub counts: Vec<u64>,
    /// Output state after the last apparatus, for each tuple that occurred.
    pub final_states: Vec<Option<DensityOperator>>,
}

impl Trajectories {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect()
    }

    /// `(count − N·p) / √(N·p·(1−p))` per tuple; zero-variance tuples give
    /// `0` when the count is exactly `N·p` and `±∞` otherwise.
    pub fn z_scores(&self, exact: &JointDistribution) -> Vec<f64> {
        let n = self.shots as f64;
        self.counts
            .iter()
            .zip(exact.probabilities())
            .map(|(&c, &p)| {
                let expected = n * p;
                let var = n * p * (1.0 - p);
                let diff = c as f64 - expected;
                if var > 0.0 {
                    diff / var.sqrt()
                } else if diff.abs() < 0.5 {
                    0.0
                } else {
                    diff.signum() * f64::INFINITY
                }
            })
            .collect()
    }
}

/// Simulates `shots` successive measurements, sampling each outcome from `P`
/// and updating the state with `Q`. One RNG stream, advanced sequentially.
pub fn sample_trajectory(
    sequence: &[Apparatus],
    rho: &DensityOperator,
    shots: usize,
    seed: u64,
) -> Result<Trajectories> {
    if shots == 0 {
        return Err(Error::InvalidArgument("at least one shot is required".into()));
    }
    require_sequence(sequence, rho.dim())?;
    let outcome_spaces: Vec<OutcomeSpace> = sequence.iter().map(|a| a.outcomes().clone()).collect();
    let size: usize = outcome_spaces.iter().map(OutcomeSpace::len).product();
    let mut counts = vec![0u64; size];
    let mut final_states = vec![None; size];

    // The state reached depends only on the outcome prefix, so each
    // (level, prefix) step is evaluated once.
    type Step = (WeightedIndex<f64>, Vec<Option<DensityOperator>>);
    let mut cache: HashMap<(usize, usize), Step> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..shots {
        let mut state = rho.clone();
        let mut prefix = 0usize;
        for (level, a) in sequence.iter().enumerate() {
            let (sampler, states) = match cache.entry((level, prefix)) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let (p, states) = a.step(&state)?;
                    let sampler = WeightedIndex::new(p.probabilities())
                        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
                    e.insert((sampler, states))
                }
            };
            let x = sampler.sample(&mut rng);
            state = states[x].clone().expect("sampled outcomes have positive probability");
            prefix = prefix * a.outcomes().len() + x;
        }
        counts[prefix] += 1;
        if final_states[prefix].is_none() {
            final_states[prefix] = Some(state);
        }
    }
    Ok(Trajectories {
        outcome_spaces,
        shots,
        counts,
        final_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::StateFamily;
    use crate::observable::SharpObservable;

    fn z_luders() -> Apparatus {
        Apparatus::from_instrument("z", Instrument::luders(&SharpObservable::computational(2)))
    }

    fn x_luders() -> Apparatus {
        let s = 1.0 / 2f64.sqrt();
        let basis = ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap();
        let e = SharpObservable::from_basis(OutcomeSpace::new(["+", "-"]).unwrap(), &basis).unwrap();
        Apparatus::from_instrument("x", Instrument::luders(&e))
    }

    fn plus() -> DensityOperator {
        DensityOperator::pure(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap()
    }

    fn ket0() -> DensityOperator {
        DensityOperator::basis(2, 0).unwrap()
    }

    #[test]
    fn luders_scheme_on_plus() {
        let a = z_luders();
        let p = a.distribution(&plus()).unwrap();
        assert!((p.probability(0) - 0.5).abs() < 1e-15);
        let q = a.reduce(&plus(), 0).unwrap();
        assert!(q.matrix().max_abs_diff(&ComplexMatrix::unit(2, 0, 0)) < 1e-15);
    }

    #[test]
    fn identity_scheme() {
        let x = Instrument::new(
            OutcomeSpace::new(["ok"]).unwrap(),
            vec![crate::superop::Superoperator::identity(2)],
        )
        .unwrap();
        let a = Apparatus::from_instrument("id", x);
        assert_eq!(a.distribution(&plus()).unwrap().probabilities(), &[1.0]);
        assert!(a.reduce(&plus(), 0).unwrap().matrix().max_abs_diff(plus().matrix()) < 1e-15);
    }

    #[test]
    fn measure_and_prepare_scheme_outputs_family() {
        let z = SharpObservable::computational(2);
        let fam = StateFamily::new(z.outcomes().clone(), vec![plus(), ket0()]).unwrap();
        let a = Apparatus::from_instrument("mp", Instrument::from_state_family(&z, &fam).unwrap());
        let rho = DensityOperator::maximally_mixed(2);
        assert!(a.reduce(&rho, 0).unwrap().matrix().max_abs_diff(plus().matrix()) < 1e-14);
        assert!(a.reduce(&rho, 1).unwrap().matrix().max_abs_diff(ket0().matrix()) < 1e-14);
    }

    #[test]
    fn null_outcome_gets_designated_state() {
        let a = z_luders();
        let q = a.reduce(&ket0(), 1).unwrap();
        assert_eq!(q, null_outcome_state(2));
    }

    #[test]
    fn collective_examples() {
        let r = collective_of(&z_luders());
        let whole = r.reduce(&[0, 1], &plus()).unwrap();
        assert!(whole.matrix().max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        let single = r.reduce(&[0], &plus()).unwrap();
        assert_eq!(single, z_luders().reduce(&plus(), 0).unwrap());
        assert!(matches!(r.reduce(&[1], &ket0()), Err(Error::ZeroProbability)));
        assert!(r.consistency_deviation(&plus()).unwrap() < 1e-15);
    }

    #[test]
    fn joint_z_then_x() {
        let j = joint_distribution(&[z_luders(), x_luders()], &ket0()).unwrap();
        let expect = [("0", "+", 0.5), ("0", "-", 0.5), ("1", "+", 0.0), ("1", "-", 0.0)];
        for (a, b, p) in expect {
            assert!((j.get(&[a, b]).unwrap() - p).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_z_then_z_is_repeatable() {
        let rho = DensityOperator::new(ComplexMatrix::from_diagonal(&[0.3, 0.7])).unwrap();
        let j = joint_distribution(&[z_luders(), z_luders()], &plus()).unwrap();
        assert_eq!(j.get(&["0", "1"]), Some(0.0));
        assert_eq!(j.get(&["1", "0"]), Some(0.0));
        let j = joint_distribution(&[z_luders(), z_luders()], &rho).unwrap();
        assert!((j.get(&["1", "1"]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn joint_base_case_is_born() {
        let j = joint_distribution(&[x_luders()], &ket0()).unwrap();
        assert_eq!(j.probabilities(), x_luders().distribution(&ket0()).unwrap().probabilities());
    }

    #[test]
    fn joint_errors() {
        assert!(matches!(joint_distribution(&[], &ket0()), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            joint_distribution(&[z_luders()], &DensityOperator::maximally_mixed(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn tuple_indexing() {
        let j = joint_distribution(&[z_luders(), x_luders(), z_luders()], &plus()).unwrap();
        for k in 0..j.len() {
            assert_eq!(j.index(&j.tuple(k)), k);
        }
        assert_eq!(j.labels(5), vec!["1", "+", "1"]);
    }

    #[test]
    fn mlpd_on_instruments_and_eigenbasis() {
        assert!(check_mlpd(&[z_luders()], 20, 1, 1e-9).unwrap().is_affine());
        assert!(check_mlpd(&[z_luders(), x_luders()], 20, 1, 1e-9).unwrap().is_affine());
        match check_mlpd(&[Apparatus::eigenbasis(2)], 100, 1, 1e-9).unwrap() {
            MlpdVerdict::Violated(w) => assert!(w.deviation > 1e-3),
            other => panic!("expected a violation, got {other:?}"),
        }
        assert!(check_mlpd(&[z_luders()], 0, 1, 1e-9).is_err());
    }

    #[test]
    fn povm_reconstruction() {
        let f = povm_from_affine_scheme(&z_luders()).unwrap();
        let z = SharpObservable::computational(2);
        assert!(f.max_deviation(&z).unwrap() < 1e-12);
        assert!(matches!(
            povm_from_affine_scheme(&Apparatus::eigenbasis(2)),
            Err(Error::NotAffine { .. })
        ));
    }

    #[test]
    fn trajectory_deterministic_outcome() {
        let t = sample_trajectory(&[z_luders()], &ket0(), 50, 3).unwrap();
        assert_eq!(t.counts, vec![50, 0]);
        assert!(sample_trajectory(&[z_luders()], &ket0(), 0, 3).is_err());
    }

    #[test]
    fn trajectory_is_seeded() {
        let seq = [z_luders(), x_luders()];
        let a = sample_trajectory(&seq, &plus(), 1000, 11).unwrap();
        let b = sample_trajectory(&seq, &plus(), 1000, 11).unwrap();
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn black_box_output_is_validated() {
        let outcomes = OutcomeSpace::numbered(2).unwrap();
        let space = outcomes.clone();
        let broken = Apparatus::black_box(
            "broken",
            2,
            outcomes,
            move |_| OutcomeDistribution::new(space.clone(), vec![0.7, 0.7]),
            |rho, _| Ok(rho.clone()),
        );
        assert!(matches!(broken.distribution(&ket0()), Err(Error::InvalidDistribution(_))));
    }
}
