//! Indirect measurement models `(K, σ, U, E)` and unitary dilation of
//! completely positive instruments.
//!
//! The composite space is ordered system first, `H ⊗ K`, so the basis
//! vector `|s⟩ ⊗ |a⟩` sits at index `s · anc_dim + a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{IdentityCheck, Instrument};
use crate::matrix::{partial_trace_ancilla, unitary_completion, ComplexMatrix};
use crate::observable::{OutcomeSpace, SharpObservable};
use crate::state::DensityOperator;
use crate::superop::{Superoperator, CP_TOL};
use crate::wire::ModelRecord;

/// Allowed `‖U†U − I‖_F` for a coupling.
pub const UNITARITY_TOL: f64 = 1e-10;

/// An ancilla space with state `σ`, a coupling unitary `U` on system ⊗
/// ancilla, and a probe observable `E` on the ancilla.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct IndirectModel {
    sys_dim: usize,
    anc_dim: usize,
    ancilla_state: DensityOperator,
    coupling: ComplexMatrix,
    probe: SharpObservable,
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationReport {
    /// Natural-matrix distance per outcome.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl RealizationReport {
    pub fn as_check(&self) -> IdentityCheck {
        IdentityCheck::new("realization", self.max_deviation, self.tolerance)
    }
}

/// `‖U†U − I‖_F` and `‖UU† − I‖_F`, whichever is larger.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let id = ComplexMatrix::identity(u.rows());
    (&u.adjoint() * u).distance(&id).max((u * &u.adjoint()).distance(&id))
}

impl IndirectModel {
    pub fn new(
        sys_dim: usize,
        ancilla_state: DensityOperator,
        coupling: ComplexMatrix,
        probe: SharpObservable,
    ) -> Result<Self> {
        let anc_dim = ancilla_state.dim();
        if probe.dim() != anc_dim {
            return Err(Error::InvalidModel(format!(
                "probe acts on dimension {} but the ancilla has {anc_dim}",
                probe.dim()
            )));
        }
        coupling
            .require_dim(sys_dim * anc_dim, "coupling")
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        let deviation = unitarity_deviation(&coupling);
        if deviation > UNITARITY_TOL {
            return Err(Error::InvalidModel(format!(
                "coupling is not unitary (deviation {deviation:.3e})"
            )));
        }
        Ok(IndirectModel {
            sys_dim,
            anc_dim,
            ancilla_state,
            coupling,
            probe,
        })
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn anc_dim(&self) -> usize {
        self.anc_dim
    }

    pub fn ancilla_state(&self) -> &DensityOperator {
        &self.ancilla_state
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn probe(&self) -> &SharpObservable {
        &self.probe
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        self.probe.outcomes()
    }

    /// `X({x})ρ = Tr_K[(I ⊗ E(x)) U (ρ ⊗ σ) U†]`.
    pub fn instrument(&self) -> Result<Instrument> {
        let sys_id = ComplexMatrix::identity(self.sys_dim);
        let u = &self.coupling;
        let u_adj = u.adjoint();
        let sigma = self.ancilla_state.matrix();
        let ops = self
            .probe
            .projections()
            .iter()
            .map(|e| {
                let meter = sys_id.kron(e);
                Superoperator::from_fn(self.sys_dim, |rho| {
                    let evolved = &(&(u * &rho.kron(sigma)) * &u_adj);
                    partial_trace_ancilla(&(&meter * evolved), self.sys_dim, self.anc_dim)
                        .expect("composite dimensions agree")
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // Every member has the Kraus form (I ⊗ ⟨a|E(x)) U (· ⊗ √σ) and is CP.
        Instrument::from_cp_maps(self.outcomes().clone(), ops)
    }
}

/// Builds a pure-ancilla indirect model realizing a completely positive instrument.
///
/// The ancilla holds one basis vector per Kraus operator (at least two);
/// `V(ψ ⊗ |0⟩) = Σ_{x,i} K_{x,i}ψ ⊗ |x,i⟩` is extended to a unitary by
/// Gram–Schmidt completion, and the probe projects onto the Kraus slots of
/// each outcome. Unused ancilla slots go to the first outcome.
pub fn dilate(x: &Instrument) -> Result<IndirectModel> {
    let n = x.dim();
    let mut kraus: Vec<(usize, ComplexMatrix)> = Vec::new();
    for (k, op) in x.ops().iter().enumerate() {
        let set = op.kraus()?;
        kraus.extend(
            set.operators()
                .iter()
                .filter(|m| m.max_abs() > 0.0)
                .map(|m| (k, m.clone())),
        );
    }
    let m = kraus.len().max(2);

    // Columns of V are V(|j⟩ ⊗ |0⟩).
    let v = ComplexMatrix::from_fn(n * m, n, |row, j| {
        let (s, a) = (row / m, row % m);
        kraus.get(a).map_or(num_complex::Complex64::new(0.0, 0.0), |(_, k)| k[(s, j)])
    });
    let w = unitary_completion(&v)?;

    // Put V's columns at positions j·m (inputs |j⟩ ⊗ |0⟩); the completion fills the rest.
    let mut order = vec![usize::MAX; n * m];
    for j in 0..n {
        order[j * m] = j;
    }
    let mut next = n;
    for slot in order.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let coupling = ComplexMatrix::from_fn(n * m, n * m, |r, c| w[(r, order[c])]);

    let mut projections = vec![ComplexMatrix::zeros(m, m); x.outcomes().len()];
    for a in 0..m {
        let owner = kraus.get(a).map_or(0, |(k, _)| *k);
        projections[owner] = &projections[owner] + &ComplexMatrix::unit(m, a, a);
    }
    let probe = SharpObservable::new(m, x.outcomes().clone(), projections)?;
    let sigma = DensityOperator::basis(m, 0)?;
    IndirectModel::new(n, sigma, coupling, probe)
}

/// Compares the model's instrument with `x` outcome by outcome.
pub fn verify_realization(model: &IndirectModel, x: &Instrument, tol: f64) -> Result<RealizationReport> {
    model.outcomes().require_equal(x.outcomes())?;
    if model.sys_dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model on dimension {} but instrument on {}",
            model.sys_dim(),
            x.dim()
        )));
    }
    let realized = model.instrument()?;
    let deviations: Vec<f64> = realized
        .ops()
        .iter()
        .zip(x.ops())
        .map(|(a, b)| a.distance(b))
        .collect();
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(RealizationReport {
        deviations,
        max_deviation,
        tolerance: tol,
        pass: max_deviation <= tol,
    })
}

impl Instrument {
    /// Whether the instrument satisfies the hypothesis of [`dilate`].
    pub fn is_unitarily_realizable(&self) -> bool {
        self.is_cp(CP_TOL)
    }
}
