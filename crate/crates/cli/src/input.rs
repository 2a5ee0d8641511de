//! Reading input files and telling their kinds apart.
//!
//! Anything that fails before a record exists (missing file, bad JSON,
//! wrong shape) is an input failure; anything that fails while turning a
//! record into a domain object is a semantic failure.

use std::path::Path;

use qinstrument::wire::{ApparatusRecord, InstrumentRecord, ModelRecord, ObservableRecord, PovmRecord, StateFamilyRecord};
use qinstrument::{Apparatus, ComplexMatrix, DensityOperator, Instrument};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::report::Failure;

pub enum Document {
    Instrument(InstrumentRecord),
    Apparatus(ApparatusRecord),
    Observable(ObservableRecord),
    Povm(PovmRecord),
    StateFamily(StateFamilyRecord),
    Model(ModelRecord),
    State(ComplexMatrix),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Instrument(_) => "instrument",
            Document::Apparatus(_) => "apparatus",
            Document::Observable(_) => "observable",
            Document::Povm(_) => "povm",
            Document::StateFamily(_) => "state_family",
            Document::Model(_) => "model",
            Document::State(_) => "state",
        }
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: malformed JSON: {e}", path.display())))
}

fn decode<T: DeserializeOwned>(path: &Path, value: Value, kind: &str) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::input(format!("{}: not a valid {kind} file: {e}", path.display())))
}

/// Reads a file and classifies it by its top-level keys.
pub fn load(path: &Path) -> Result<Document, Failure> {
    let value = read_json(path)?;
    let Some(obj) = value.as_object() else {
        return Err(Failure::input(format!("{}: expected a JSON object", path.display())));
    };
    let has = |k: &str| obj.contains_key(k);
    let doc = if has("maps") {
        Document::Instrument(decode(path, value, "instrument")?)
    } else if has("instrument") {
        Document::Apparatus(decode(path, value, "apparatus")?)
    } else if has("projections") {
        Document::Observable(decode(path, value, "observable")?)
    } else if has("effects") {
        Document::Povm(decode(path, value, "POVM")?)
    } else if has("states") {
        Document::StateFamily(decode(path, value, "state family")?)
    } else if has("unitary") {
        Document::Model(decode(path, value, "model")?)
    } else if has("data") {
        Document::State(decode(path, value, "matrix")?)
    } else {
        return Err(Failure::input(format!("{}: unrecognized file kind", path.display())));
    };
    Ok(doc)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Instrument or apparatus file, as an unvalidated record plus a label.
pub fn load_instrument_record(path: &Path) -> Result<(String, InstrumentRecord), Failure> {
    match load(path)? {
        Document::Instrument(r) => Ok((stem(path), r)),
        Document::Apparatus(a) => Ok((a.label, a.instrument)),
        other => Err(Failure::input(format!(
            "{}: expected an instrument or apparatus file, found a {}",
            path.display(),
            other.kind()
        ))),
    }
}

pub fn load_instrument(path: &Path) -> Result<(String, Instrument), Failure> {
    let (label, record) = load_instrument_record(path)?;
    let x = Instrument::try_from(record).map_err(|e| Failure::semantic(format!("{}: {e}", path.display())))?;
    Ok((label, x))
}

pub fn load_apparatuses(paths: &[std::path::PathBuf]) -> Result<Vec<Apparatus>, Failure> {
    paths
        .iter()
        .map(|p| load_instrument(p).map(|(label, x)| Apparatus::from_instrument(label, x)))
        .collect()
}

pub fn load_state(path: &Path) -> Result<DensityOperator, Failure> {
    match load(path)? {
        Document::State(m) => {
            DensityOperator::new(m).map_err(|e| Failure::semantic(format!("{}: {e}", path.display())))
        }
        other => Err(Failure::input(format!(
            "{}: expected a state (matrix) file, found a {}",
            path.display(),
            other.kind()
        ))),
    }
}
