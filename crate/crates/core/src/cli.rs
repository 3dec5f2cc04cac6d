//! The `decoherence` command-line tool: one command per invocation, JSON
//! files in, one JSON report out.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::consistency::{check_operators, check_set, max_consistent_histories, Mode};
use crate::error::{Error, Result};
use crate::functional::DecoherenceFunctional;
use crate::generation::{eigenvector_set, random_dunitary, rotate_rescale};
use crate::histories::ray_complete_decompose;
use crate::operator::{hermitian_eigendecompose, sum_operators, Operator, Tolerance};
use crate::reconstruction::{canonicality_test, fit_functional, CANONICALITY_TOL};
use crate::wire::{
    matrix_to_wire, operator_to_wire, read_json, to_json, FunctionalDoc, HistoryDoc, OperatorDoc,
    ParsedSet, SetDoc,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Build the eigenform of a functional, typically from boundary density matrices.
    Canonical,
    /// d(h, h') for one or two histories, or the pair matrix of a set.
    Evaluate,
    /// Consistency diagnosis and probabilities of a set.
    CheckSet,
    /// The eigenvector set of a functional.
    Eigenset,
    /// A consistent set from a seeded d-unitary rotation and rescaling of
    /// `--set`, or of the eigenbasis of d when no set is given.
    Rotate,
    /// Fit a functional to a set with given probabilities.
    Fit,
    /// Canonicality criteria and boundary recovery.
    Canonicality,
    /// Decompose a small operator into a sum of four-time history operators.
    Raycomplete,
    /// Largest number of non-zero-probability histories in a consistent set.
    Bound,
    /// Axiom residuals, signature and positivity evidence.
    Axioms,
}

#[derive(Clone, Debug, Parser)]
#[command(
    name = "decoherence",
    version,
    about = "Decoherence functionals and consistent histories"
)]
pub struct Invocation {
    #[arg(value_enum)]
    pub command: Command,
    /// Functional file: {"kind":"canonical",...} or {"kind":"eigenform",...}.
    #[arg(long)]
    pub functional: Option<PathBuf>,
    /// Set file: {"histories":[...]} or {"operators":[...]}, optional "probabilities".
    #[arg(long)]
    pub set: Option<PathBuf>,
    /// History file; repeat for two. For raycomplete, an {"dim","operator"} file.
    #[arg(long)]
    pub history: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative tolerance; for canonicality, the bound on both criteria residuals.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "medium", value_parser = ["medium", "weak"])]
    pub mode: String,
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Schema(format!("--{flag} is required for this command")))
}

fn load_functional(job: &Invocation, tol: Tolerance) -> Result<DecoherenceFunctional> {
    let doc: FunctionalDoc = read_json(required(&job.functional, "functional")?)?;
    doc.to_functional(tol)
}

fn load_set(job: &Invocation) -> Result<ParsedSet> {
    let doc: SetDoc = read_json(required(&job.set, "set")?)?;
    doc.parse()
}

fn load_history(path: &Path) -> Result<Operator> {
    let doc: HistoryDoc = read_json(path)?;
    Ok(doc.to_history()?.op().clone())
}

fn check_dim(d: &DecoherenceFunctional, ops: &[Operator]) -> Result<()> {
    ops.iter().try_for_each(|op| op.check_dim(d.dim()))
}

fn psd_rank(op: &Operator, tol: Tolerance) -> Result<usize> {
    let eig = hermitian_eigendecompose(op.as_matrix(), tol)?;
    let cut = tol.bound(eig.values.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    Ok(eig.values.iter().filter(|&&x| x > cut).count())
}

fn value<T: Serialize>(x: T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

/// Runs one job and returns the report document.
pub fn run(job: &Invocation) -> Result<Value> {
    if let Some(t) = job.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Schema(format!("--tol must be positive, got {t}")));
        }
    }
    let tol = job.tol.map_or_else(Tolerance::default, Tolerance::relative);
    let mode: Mode = job.mode.parse()?;
    match job.command {
        Command::Canonical => value(FunctionalDoc::from_functional(&load_functional(job, tol)?)),
        Command::Evaluate => {
            let d = load_functional(job, tol)?;
            if job.set.is_some() {
                let set = load_set(job)?;
                check_dim(&d, &set.ops)?;
                return Ok(json!({ "pair_matrix": matrix_to_wire(&d.pair_matrix(&set.ops)?) }));
            }
            let hs = job
                .history
                .iter()
                .map(|p| load_history(p))
                .collect::<Result<Vec<_>>>()?;
            let (a, b) = match hs.as_slice() {
                [a] => (a, a),
                [a, b] => (a, b),
                _ => {
                    return Err(Error::Schema(
                        "evaluate takes --set or one or two --history files".into(),
                    ))
                }
            };
            let v = d.evaluate(a, b)?;
            Ok(json!({ "value": [v.re, v.im] }))
        }
        Command::CheckSet => {
            let d = load_functional(job, tol)?;
            let set = load_set(job)?;
            check_dim(&d, &set.ops)?;
            let r = match &set.histories {
                Some(hs) => check_set(&d, hs, mode, tol)?,
                None => check_operators(&d, &set.ops, mode, tol)?,
            };
            Ok(json!({
                "pair_matrix": matrix_to_wire(&r.pair_matrix),
                "diagnosis": r.diagnosis,
                "mode": mode,
                "consistent": r.consistent,
                "probabilities": r.probabilities,
                "sum_rule_residual": r.sum_rule_residual,
                "max_offdiag": r.max_offdiag,
                "max_re_offdiag": r.max_re_offdiag,
                "exhaustion_residual": r.exhaustion_residual,
                "zero_prob_indices": r.zero_prob_indices,
            }))
        }
        Command::Eigenset => {
            let set = eigenvector_set(&load_functional(job, tol)?);
            value(SetDoc::from_operators(&set.ops, Some(set.probabilities)))
        }
        Command::Rotate => {
            let d = load_functional(job, tol)?;
            let input = match &job.set {
                Some(_) => load_set(job)?.ops,
                None => d.basis().elements().to_vec(),
            };
            let v = random_dunitary(&d, job.seed.unwrap_or(0), tol)?;
            let ops = rotate_rescale(&d, &v, &input, tol)?;
            let p = ops
                .iter()
                .map(|h| d.probability(h))
                .collect::<Result<Vec<_>>>()?;
            value(SetDoc::from_operators(&ops, Some(p)))
        }
        Command::Fit => {
            let set = load_set(job)?;
            let p = set
                .probabilities
                .as_deref()
                .ok_or_else(|| Error::Schema("fit needs \"probabilities\" in the set".into()))?;
            let fitted = fit_functional(&set.ops, p, tol)?;
            value(FunctionalDoc::from_functional(&fitted.to_functional(tol)?))
        }
        Command::Canonicality => {
            let d = load_functional(job, tol)?;
            let threshold = job.tol.unwrap_or(CANONICALITY_TOL);
            let v = canonicality_test(&d, threshold, Tolerance::default())?;
            Ok(json!({
                "is_canonical": v.is_canonical,
                "residuals": {
                    "idempotency": v.idempotency_residual,
                    "projection": v.projection_residual,
                    "weight_factor": v.weight_factor_residual,
                    "reconstruction": v.reconstruction_residual,
                },
                "threshold": threshold,
                "positivity_ok": v.positivity_ok,
                "traces": {
                    "d": v.diagnostics.trace_d,
                    "underline": v.diagnostics.trace_underline,
                    "boundary_product": v.diagnostics.trace_product,
                },
                "rho_alpha": v.recovered.as_ref().map(|b| operator_to_wire(b.rho_alpha())),
                "rho_omega": v.recovered.as_ref().map(|b| operator_to_wire(b.rho_omega())),
                "failure": v.failure,
            }))
        }
        Command::Raycomplete => {
            let path = match job.history.as_slice() {
                [p] => p,
                _ => {
                    return Err(Error::Schema(
                        "raycomplete takes one --history target".into(),
                    ))
                }
            };
            let doc: OperatorDoc = read_json(path)?;
            let target = doc.to_operator()?;
            let set = ray_complete_decompose(&target)?;
            let sum = sum_operators(&set.ops()).expect("non-empty");
            let witnesses: Vec<Value> = set
                .disjointness()
                .iter()
                .map(|w| json!({ "pair": [w.pair.0, w.pair.1], "slots": w.slots }))
                .collect();
            let mut out = value(SetDoc::from_histories(&set, None))?;
            out["reassembly_residual"] = json!(sum.distance(&target));
            out["witnesses"] = Value::Array(witnesses);
            Ok(out)
        }
        Command::Bound => {
            let d = load_functional(job, tol)?;
            let mut out = json!({
                "bound": max_consistent_histories(&d, tol),
                "signature": d.signature(tol),
            });
            if let Some(b) = d.boundary() {
                out["rank_alpha"] = json!(psd_rank(b.rho_alpha(), tol)?);
                out["rank_omega"] = json!(psd_rank(b.rho_omega(), tol)?);
            }
            Ok(out)
        }
        Command::Axioms => {
            let d = load_functional(job, tol)?;
            let samples = match &job.set {
                Some(_) => {
                    let set = load_set(job)?;
                    Some(vec![set.histories.ok_or_else(|| {
                        Error::Schema("axioms samples must be given as histories".into())
                    })?])
                }
                None => None,
            };
            value(d.axioms_report(samples.as_deref(), tol))
        }
    }
}

fn emit(job: &Invocation, report: &Value) -> Result<()> {
    let text = to_json(report)?;
    match &job.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => {
            use std::io::Write;
            // a closed pipe is the reader's choice, not a failure
            match writeln!(std::io::stdout(), "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

/// Exit status for a failed job: 2 for malformed input, 3 for a violated
/// mathematical precondition.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

pub fn error_report(e: &Error) -> Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

/// Parses arguments, runs the job and returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let job = match Invocation::try_parse_from(args) {
        Ok(job) => job,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&job).and_then(|report| emit(&job, &report)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "{}",
                to_json(&error_report(&e)).unwrap_or_else(|_| e.to_string())
            );
            exit_code(&e)
        }
    }
}
