use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qinstrument::dilation::unitarity_deviation;
use qinstrument::superop::CP_TOL;
use qinstrument::wire::{InstrumentRecord, ModelRecord, ObservableRecord, PovmRecord, StateFamilyRecord};
use qinstrument::{
    check_mlpd, dilate, joint_distribution, sample_trajectory, verify_realization, ComplexMatrix, Instrument,
    IndirectModel, JointDistribution, MlpdVerdict, PositivityVerdict, SharpObservable,
};
use serde_json::{json, Value};

use crate::input::{self, Document};
use crate::report::{write_file, Failure, Report};

const POSITIVITY_SAMPLES: usize = 256;
const Z_BOUND: f64 = 4.0;

fn hermitian_spectrum_min(m: &ComplexMatrix) -> f64 {
    // The asymmetry is reported separately, so symmetrize unconditionally.
    m.min_eigenvalue(f64::MAX).unwrap_or(f64::NEG_INFINITY)
}

fn require_labels<V>(path: &Path, outcomes: &[String], keyed: &BTreeMap<String, V>) -> Result<(), Failure> {
    let mut sorted: Vec<&String> = outcomes.iter().collect();
    sorted.sort();
    if !sorted.iter().copied().eq(keyed.keys()) {
        return Err(Failure::semantic(format!(
            "{}: outcome labels {:?} do not match the keyed entries {:?}",
            path.display(),
            outcomes,
            keyed.keys().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

fn require_shapes<'a>(path: &Path, dim: usize, ms: impl IntoIterator<Item = &'a ComplexMatrix>) -> Result<(), Failure> {
    for m in ms {
        if m.rows() != dim || m.cols() != dim {
            return Err(Failure::semantic(format!(
                "{}: expected {dim}x{dim} matrices, found {}x{}",
                path.display(),
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(())
}

fn state_checks(report: &mut Report, prefix: &str, m: &ComplexMatrix, tol: f64) {
    let asym = m.hermitian_asymmetry();
    report.check(&format!("{prefix}hermitian"), asym, tol);
    report.check(&format!("{prefix}unit_trace"), (m.trace() - qinstrument::Complex64::new(1.0, 0.0)).norm(), tol);
    report.check(&format!("{prefix}positive"), (-hermitian_spectrum_min(m)).max(0.0), tol);
}

fn effect_checks<'a>(report: &mut Report, noun: &str, dim: usize, effects: impl IntoIterator<Item = &'a ComplexMatrix>, tol: f64) {
    let mut asym: f64 = 0.0;
    let mut negative: f64 = 0.0;
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for f in effects {
        asym = asym.max(f.hermitian_asymmetry());
        negative = negative.max(-hermitian_spectrum_min(f));
        sum = &sum + f;
    }
    report.check(&format!("{noun}_hermitian"), asym, tol);
    report.check(&format!("{noun}_positive"), negative, tol);
    report.check(&format!("{noun}_sum_to_identity"), sum.max_abs_diff(&ComplexMatrix::identity(dim)), tol);
}

/// Worst violation of positivity across the members: zero for CP members,
/// otherwise the most negative output eigenvalue found by sampling pure states.
fn positivity_violation(x: &Instrument, seed: u64) -> Result<f64, Failure> {
    let mut worst: f64 = 0.0;
    for (k, op) in x.ops().iter().enumerate() {
        if op.is_completely_positive(CP_TOL) {
            continue;
        }
        if let PositivityVerdict::Violated(w) = op.is_positive_sampled(POSITIVITY_SAMPLES, seed.wrapping_add(k as u64))? {
            worst = worst.max((-w.min_eigenvalue).max(0.0)).max(w.asymmetry);
        }
    }
    Ok(worst)
}

pub fn check(path: &Path, tol: f64, seed: u64) -> Result<Report, Failure> {
    let mut report = Report::new("check");
    let doc = input::load(path)?;
    let kind = doc.kind();
    let details = match doc {
        Document::Instrument(r) => check_instrument(&mut report, path, r, tol, seed)?,
        Document::Apparatus(a) => {
            let mut details = check_instrument(&mut report, path, a.instrument, tol, seed)?;
            details["label"] = json!(a.label);
            details
        }
        Document::Observable(r) => check_observable(&mut report, path, r, tol)?,
        Document::Povm(r) => check_povm(&mut report, path, r, tol)?,
        Document::StateFamily(r) => check_state_family(&mut report, path, r, tol)?,
        Document::Model(r) => check_model(&mut report, path, r, tol)?,
        Document::State(m) => {
            if !m.is_square() {
                return Err(Failure::semantic(format!("{}: a state must be square", path.display())));
            }
            state_checks(&mut report, "", &m, tol);
            json!({ "dim": m.rows() })
        }
    };
    let mut payload = json!({ "kind": kind });
    if let (Value::Object(p), Value::Object(d)) = (&mut payload, details) {
        p.extend(d);
    }
    report.payload = Some(payload);
    Ok(report)
}

fn check_instrument(report: &mut Report, path: &Path, r: InstrumentRecord, tol: f64, seed: u64) -> Result<Value, Failure> {
    require_labels(path, &r.outcomes, &r.maps)?;
    let x = r.into_unchecked().map_err(|e| Failure::semantic(format!("{}: {e}", path.display())))?;
    let normalized = report.check("normalization", x.normalization_deviation(), tol);
    report.check("positivity", positivity_violation(&x, seed)?, tol);

    let min_choi = x.min_choi_eigenvalue()?;
    let cp = min_choi >= -tol;
    let mut details = json!({
        "dim": x.dim(),
        "outcomes": x.outcomes().labels(),
        "min_choi_eigenvalue": min_choi,
        "completely_positive": cp,
        "unitarily_realizable": cp,
        "decomposability_deviation": x.decomposability_deviation(),
        "decomposable": x.is_decomposable(tol),
    });
    if !normalized {
        return Ok(details);
    }
    match x.povm() {
        Ok(povm) => {
            details["povm"] = serde_json::to_value(PovmRecord::from(povm.clone())).expect("serializable");
            if let Ok(e) = SharpObservable::new(povm.dim(), povm.outcomes().clone(), povm.effects().to_vec()) {
                details["sharp"] = json!({ "nondegenerate": e.is_nondegenerate(), "ranks": e.ranks() });
                let identities = x.check_decomposition_identities(&e, tol)?;
                for c in identities.checks.into_iter().filter(|c| c.name != "povm_equals_observable") {
                    report.push(c);
                }
            }
        }
        Err(e) => details["povm_error"] = json!(e.to_string()),
    }
    Ok(details)
}

fn check_observable(report: &mut Report, path: &Path, r: ObservableRecord, tol: f64) -> Result<Value, Failure> {
    require_labels(path, &r.outcomes, &r.projections)?;
    require_shapes(path, r.dim, r.projections.values())?;
    let ps: Vec<&ComplexMatrix> = r.outcomes.iter().map(|l| &r.projections[l]).collect();
    let mut asym: f64 = 0.0;
    let mut idem: f64 = 0.0;
    let mut orth: f64 = 0.0;
    let mut sum = ComplexMatrix::zeros(r.dim, r.dim);
    for (i, p) in ps.iter().enumerate() {
        asym = asym.max(p.hermitian_asymmetry());
        idem = idem.max((*p * *p).max_abs_diff(p));
        for q in &ps[i + 1..] {
            orth = orth.max((*p * *q).max_abs());
        }
        sum = &sum + *p;
    }
    report.check("projections_hermitian", asym, tol);
    report.check("projections_idempotent", idem, tol);
    report.check("projections_orthogonal", orth, tol);
    report.check("projections_sum_to_identity", sum.max_abs_diff(&ComplexMatrix::identity(r.dim)), tol);
    if !report.pass {
        return Ok(json!({ "dim": r.dim }));
    }
    let e = SharpObservable::try_from(r)?;
    Ok(json!({
        "dim": e.dim(),
        "outcomes": e.outcomes().labels(),
        "ranks": e.ranks(),
        "nondegenerate": e.is_nondegenerate(),
    }))
}

fn check_povm(report: &mut Report, path: &Path, r: PovmRecord, tol: f64) -> Result<Value, Failure> {
    require_labels(path, &r.outcomes, &r.effects)?;
    require_shapes(path, r.dim, r.effects.values())?;
    effect_checks(report, "effects", r.dim, r.effects.values(), tol);
    let sharp = r.effects.values().all(|f| (f * f).max_abs_diff(f) <= tol);
    Ok(json!({ "dim": r.dim, "outcomes": r.outcomes, "projective": sharp }))
}

fn check_state_family(report: &mut Report, path: &Path, r: StateFamilyRecord, tol: f64) -> Result<Value, Failure> {
    require_labels(path, &r.outcomes, &r.states)?;
    let dim = r.states.values().next().map(ComplexMatrix::rows).unwrap_or(0);
    require_shapes(path, dim, r.states.values())?;
    for label in &r.outcomes {
        state_checks(report, &format!("state[{label}]."), &r.states[label], tol);
    }
    Ok(json!({ "dim": dim, "outcomes": r.outcomes }))
}

fn check_model(report: &mut Report, path: &Path, r: ModelRecord, tol: f64) -> Result<Value, Failure> {
    report.check("coupling_unitary", unitarity_deviation(&r.unitary), tol);
    if r.ancilla_state.is_square() {
        state_checks(report, "ancilla_state.", &r.ancilla_state, tol);
    }
    if !report.pass {
        return Ok(json!({ "sys_dim": r.sys_dim, "anc_dim": r.anc_dim }));
    }
    let model = IndirectModel::try_from(r).map_err(|e| Failure::semantic(format!("{}: {e}", path.display())))?;
    let x = model.instrument()?;
    report.check("realized_normalization", x.normalization_deviation(), tol);
    Ok(json!({
        "sys_dim": model.sys_dim(),
        "anc_dim": model.anc_dim(),
        "instrument": serde_json::to_value(InstrumentRecord::from(x)).expect("serializable"),
    }))
}

pub fn povm(path: &Path, out: Option<&Path>, tol: f64) -> Result<Report, Failure> {
    let mut report = Report::new("povm");
    let (label, record) = input::load_instrument_record(path)?;
    require_labels(path, &record.outcomes, &record.maps)?;
    let x = record.into_unchecked().map_err(|e| Failure::semantic(format!("{}: {e}", path.display())))?;
    report.check("normalization", x.normalization_deviation(), tol);
    let effects = x.effects();
    effect_checks(&mut report, "effects", x.dim(), &effects, tol);
    if !report.pass {
        return Ok(report);
    }
    let povm = x.povm()?;
    let record = PovmRecord::from(povm);
    if let Some(out) = out {
        write_file(out, &(serde_json::to_string_pretty(&record).expect("serializable") + "\n"))?;
    }
    report.payload = Some(json!({
        "label": label,
        "povm": serde_json::to_value(&record).expect("serializable"),
    }));
    Ok(report)
}

pub fn dilate_cmd(path: &Path, out: Option<&Path>, tol: f64) -> Result<Report, Failure> {
    let mut report = Report::new("dilate");
    let (label, x) = input::load_instrument(path)?;
    let min_choi = x.min_choi_eigenvalue()?;
    if !report.check("completely_positive", (-min_choi).max(0.0), tol) {
        report.payload = Some(json!({
            "label": label,
            "error": format!("instrument is not completely positive: a Choi matrix has eigenvalue {min_choi:.6e}"),
            "min_choi_eigenvalue": min_choi,
        }));
        return Ok(report);
    }
    let model = dilate(&x)?;
    report.check("coupling_unitary", unitarity_deviation(model.coupling()), tol);
    let roundtrip = verify_realization(&model, &x, tol)?;
    report.push(roundtrip.as_check());

    let record = ModelRecord::from(model);
    let mut payload = json!({
        "label": label,
        "min_choi_eigenvalue": min_choi,
        "sys_dim": record.sys_dim,
        "anc_dim": record.anc_dim,
        "roundtrip_deviation": roundtrip.max_deviation,
    });
    match out {
        Some(out) => {
            write_file(out, &(serde_json::to_string_pretty(&record).expect("serializable") + "\n"))?;
            payload["output"] = json!(out.display().to_string());
        }
        None => payload["model"] = serde_json::to_value(&record).expect("serializable"),
    }
    report.payload = Some(payload);
    Ok(report)
}

fn joint_rows(joint: &JointDistribution) -> Vec<Value> {
    (0..joint.len())
        .map(|k| json!({ "outcome": joint.labels(k), "probability": joint.probabilities()[k] }))
        .collect()
}

fn sequence_labels(joint: &JointDistribution) -> Vec<&[String]> {
    joint.outcome_spaces().iter().map(|s| s.labels()).collect()
}

pub fn joint(paths: &[PathBuf], state: &Path, tol: f64) -> Result<Report, Failure> {
    let mut report = Report::new("joint");
    let seq = input::load_apparatuses(paths)?;
    let rho = input::load_state(state)?;
    let joint = joint_distribution(&seq, &rho)?;
    let total: f64 = joint.probabilities().iter().sum();
    report.check("normalization", (total - 1.0).abs(), tol);
    let mut marginal: f64 = 0.0;
    for k in 1..seq.len() {
        let shorter = joint_distribution(&seq[..k], &rho)?;
        marginal = marginal.max(joint.leading_marginal(k).max_deviation(&shorter));
    }
    report.check("marginal_consistency", marginal, tol);
    report.payload = Some(json!({
        "apparatuses": seq.iter().map(|a| a.label()).collect::<Vec<_>>(),
        "outcome_spaces": sequence_labels(&joint),
        "joint": joint_rows(&joint),
    }));
    Ok(report)
}

pub fn simulate(paths: &[PathBuf], state: &Path, shots: usize, seed: u64) -> Result<Report, Failure> {
    let mut report = Report::new("simulate");
    let seq = input::load_apparatuses(paths)?;
    let rho = input::load_state(state)?;
    let exact = joint_distribution(&seq, &rho)?;
    let runs = sample_trajectory(&seq, &rho, shots, seed)?;
    let z = runs.z_scores(&exact);
    let freq = runs.frequencies();
    let worst = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    report.check("max_abs_z_score", worst, Z_BOUND);
    let rows: Vec<Value> = (0..exact.len())
        .map(|k| {
            json!({
                "outcome": exact.labels(k),
                "exact": exact.probabilities()[k],
                "count": runs.counts[k],
                "frequency": freq[k],
                // Infinite z (a null outcome that occurred) serializes as null.
                "z": z[k],
            })
        })
        .collect();
    report.payload = Some(json!({
        "apparatuses": seq.iter().map(|a| a.label()).collect::<Vec<_>>(),
        "outcome_spaces": sequence_labels(&exact),
        "shots": shots,
        "seed": seed,
        "tuples": rows,
    }));
    Ok(report)
}

pub fn mlpd(paths: &[PathBuf], trials: usize, seed: u64, tol: f64) -> Result<Report, Failure> {
    let mut report = Report::new("mlpd");
    let seq = input::load_apparatuses(paths)?;
    let verdict = check_mlpd(&seq, trials, seed, tol)?;
    let deviation = match &verdict {
        MlpdVerdict::Affine { max_deviation, .. } => *max_deviation,
        MlpdVerdict::Violated(w) => w.deviation,
    };
    report.check("mixing_law", deviation, tol);
    report.payload = Some(json!({
        "apparatuses": seq.iter().map(|a| a.label()).collect::<Vec<_>>(),
        "trials": trials,
        "seed": seed,
        "result": serde_json::to_value(&verdict).expect("serializable"),
        "note": "files describe instrument-backed apparatuses, whose joint statistics are always affine in the input state",
    }));
    Ok(report)
}
