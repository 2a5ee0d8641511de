//! JSON records for every file-facing type.
//!
//! A record parses whenever the JSON is structurally well formed; turning it
//! into the domain type then checks the physical invariants. Keeping the two
//! steps apart lets callers tell malformed input from invalid input.
//!
//! Per-outcome items are keyed by label; the `outcomes` array fixes the order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dilation::IndirectModel;
use crate::error::{Error, Result};
use crate::instrument::{Instrument, StateFamily};
use crate::matrix::ComplexMatrix;
use crate::observable::{keyed_by_label, ordered_by_label, OutcomeSpace, Povm, SharpObservable};
use crate::state::DensityOperator;
use crate::superop::Superoperator;

/// `{"dim": d, "outcomes": [...], "projections": {label: matrix}}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableRecord {
    pub dim: usize,
    pub outcomes: Vec<String>,
    pub projections: BTreeMap<String, ComplexMatrix>,
}

/// `{"dim": d, "outcomes": [...], "effects": {label: matrix}}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmRecord {
    pub dim: usize,
    pub outcomes: Vec<String>,
    pub effects: BTreeMap<String, ComplexMatrix>,
}

/// `{"dim": d, "outcomes": [...], "maps": {label: superoperator}}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentRecord {
    pub dim: usize,
    pub outcomes: Vec<String>,
    pub maps: BTreeMap<String, Superoperator>,
}

/// `{"outcomes": [...], "states": {label: matrix}}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFamilyRecord {
    pub outcomes: Vec<String>,
    pub states: BTreeMap<String, ComplexMatrix>,
}

/// `{"sys_dim": n, "anc_dim": m, "ancilla_state": matrix, "unitary": matrix, "probe": observable}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub sys_dim: usize,
    pub anc_dim: usize,
    pub ancilla_state: ComplexMatrix,
    pub unitary: ComplexMatrix,
    pub probe: ObservableRecord,
}

/// `{"label": s, "instrument": instrument}`
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApparatusRecord {
    pub label: String,
    pub instrument: InstrumentRecord,
}

impl TryFrom<ObservableRecord> for SharpObservable {
    type Error = Error;

    fn try_from(r: ObservableRecord) -> Result<Self> {
        let outcomes = OutcomeSpace::new(r.outcomes)?;
        let projections = ordered_by_label(&outcomes, r.projections, "projection")?;
        SharpObservable::new(r.dim, outcomes, projections)
    }
}

impl From<SharpObservable> for ObservableRecord {
    fn from(e: SharpObservable) -> Self {
        ObservableRecord {
            dim: e.dim(),
            outcomes: e.outcomes().labels().to_vec(),
            projections: keyed_by_label(e.outcomes(), e.projections()),
        }
    }
}

impl TryFrom<PovmRecord> for Povm {
    type Error = Error;

    fn try_from(r: PovmRecord) -> Result<Self> {
        let outcomes = OutcomeSpace::new(r.outcomes)?;
        let effects = ordered_by_label(&outcomes, r.effects, "effect")?;
        Povm::new(r.dim, outcomes, effects)
    }
}

impl From<Povm> for PovmRecord {
    fn from(f: Povm) -> Self {
        PovmRecord {
            dim: f.dim(),
            outcomes: f.outcomes().labels().to_vec(),
            effects: keyed_by_label(f.outcomes(), f.effects()),
        }
    }
}

impl InstrumentRecord {
    fn ordered(self) -> Result<(usize, OutcomeSpace, Vec<Superoperator>)> {
        let outcomes = OutcomeSpace::new(self.outcomes)?;
        let maps = ordered_by_label(&outcomes, self.maps, "map")?;
        for m in &maps {
            if m.dim() != self.dim {
                return Err(Error::DimensionMismatch(format!(
                    "instrument declares dimension {} but a map acts on {}",
                    self.dim,
                    m.dim()
                )));
            }
        }
        Ok((self.dim, outcomes, maps))
    }

    /// Builds the instrument without enforcing normalization or positivity.
    pub fn into_unchecked(self) -> Result<Instrument> {
        let (_, outcomes, maps) = self.ordered()?;
        Instrument::from_maps_unchecked(outcomes, maps)
    }
}

impl TryFrom<InstrumentRecord> for Instrument {
    type Error = Error;

    fn try_from(r: InstrumentRecord) -> Result<Self> {
        let (_, outcomes, maps) = r.ordered()?;
        Instrument::new(outcomes, maps)
    }
}

impl From<Instrument> for InstrumentRecord {
    fn from(x: Instrument) -> Self {
        InstrumentRecord {
            dim: x.dim(),
            outcomes: x.outcomes().labels().to_vec(),
            maps: keyed_by_label(x.outcomes(), x.ops()),
        }
    }
}

impl TryFrom<StateFamilyRecord> for StateFamily {
    type Error = Error;

    fn try_from(r: StateFamilyRecord) -> Result<Self> {
        let outcomes = OutcomeSpace::new(r.outcomes)?;
        let states = ordered_by_label(&outcomes, r.states, "state")?
            .into_iter()
            .map(DensityOperator::new)
            .collect::<Result<Vec<_>>>()?;
        StateFamily::new(outcomes, states)
    }
}

impl From<StateFamily> for StateFamilyRecord {
    fn from(f: StateFamily) -> Self {
        let matrices: Vec<ComplexMatrix> = f.states().iter().map(|s| s.matrix().clone()).collect();
        StateFamilyRecord {
            outcomes: f.outcomes().labels().to_vec(),
            states: keyed_by_label(f.outcomes(), &matrices),
        }
    }
}

impl TryFrom<ModelRecord> for IndirectModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let sigma = DensityOperator::new(r.ancilla_state)?;
        if sigma.dim() != r.anc_dim {
            return Err(Error::InvalidModel(format!(
                "anc_dim is {} but the ancilla state has dimension {}",
                r.anc_dim,
                sigma.dim()
            )));
        }
        let probe = SharpObservable::try_from(r.probe)?;
        IndirectModel::new(r.sys_dim, sigma, r.unitary, probe)
    }
}

impl From<IndirectModel> for ModelRecord {
    fn from(m: IndirectModel) -> Self {
        ModelRecord {
            sys_dim: m.sys_dim(),
            anc_dim: m.anc_dim(),
            ancilla_state: m.ancilla_state().matrix().clone(),
            unitary: m.coupling().clone(),
            probe: m.probe().clone().into(),
        }
    }
}
