//! JSON documents exchanged by the command-line tool. Complex numbers are
//! `[re, im]` pairs and matrices are row-major lists of rows. Floats are
//! written with 17 significant digits.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{BoundaryPair, DecoherenceFunctional};
use crate::histories::{History, HistorySet, ProjectorSequence, TemporalSupport};
use crate::operator::{CMatrix, Operator, Tolerance, TraceBasis, C64};

pub type WireMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_wire(m: &CMatrix) -> WireMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn operator_to_wire(op: &Operator) -> WireMatrix {
    matrix_to_wire(op.as_matrix())
}

/// Parses a square matrix, checking its side against `dim` when given.
pub fn operator_from_wire(w: &WireMatrix, dim: Option<usize>) -> Result<Operator> {
    let n = w.len();
    if n == 0 {
        return Err(Error::Schema("empty matrix".into()));
    }
    if let Some(expected) = dim {
        if expected != n {
            return Err(Error::DimensionMismatch { expected, found: n });
        }
    }
    if let Some(row) = w.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: row.len(),
        });
    }
    Operator::new(CMatrix::from_fn(n, n, |i, j| {
        C64::new(w[i][j][0], w[i][j][1])
    }))
}

fn operators_from_wire(ws: &[WireMatrix], dim: Option<usize>) -> Result<Vec<Operator>> {
    ws.iter().map(|w| operator_from_wire(w, dim)).collect()
}

/// `{"dim", "support", "branches"}`; one branch is a homogeneous history,
/// several are summed into an inhomogeneous one. `evolution` optionally
/// gives one unitary per time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryDoc {
    pub dim: usize,
    pub support: Vec<f64>,
    pub branches: Vec<Vec<WireMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<Vec<WireMatrix>>,
}

impl HistoryDoc {
    pub fn from_history(h: &History) -> Self {
        HistoryDoc {
            dim: h.dim(),
            support: h.support().times().to_vec(),
            branches: h
                .branches()
                .iter()
                .map(|b| b.projectors().iter().map(operator_to_wire).collect())
                .collect(),
            evolution: h
                .evolution()
                .map(|us| us.iter().map(operator_to_wire).collect()),
        }
    }

    pub fn to_history(&self) -> Result<History> {
        let support = TemporalSupport::new(self.support.clone())?;
        let branches = self
            .branches
            .iter()
            .map(|b| {
                ProjectorSequence::new(support.clone(), operators_from_wire(b, Some(self.dim))?)
            })
            .collect::<Result<Vec<_>>>()?;
        let evolution = match &self.evolution {
            Some(us) => Some(operators_from_wire(us, Some(self.dim))?),
            None => None,
        };
        History::inhomogeneous(branches, evolution)
    }
}

/// A set given either as histories or directly as class operators, with
/// optional probabilities.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SetDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histories: Option<Vec<HistoryDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operators: Option<Vec<WireMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

/// A parsed `SetDoc`. `histories` is present when the set was given as histories.
#[derive(Clone, Debug)]
pub struct ParsedSet {
    pub histories: Option<HistorySet>,
    pub ops: Vec<Operator>,
    pub probabilities: Option<Vec<f64>>,
}

impl SetDoc {
    pub fn from_operators(ops: &[Operator], probabilities: Option<Vec<f64>>) -> Self {
        SetDoc {
            dim: ops.first().map(Operator::dim),
            histories: None,
            operators: Some(ops.iter().map(operator_to_wire).collect()),
            probabilities,
        }
    }

    pub fn from_histories(set: &HistorySet, probabilities: Option<Vec<f64>>) -> Self {
        SetDoc {
            dim: Some(set.dim()),
            histories: Some(
                set.histories()
                    .iter()
                    .map(HistoryDoc::from_history)
                    .collect(),
            ),
            operators: None,
            probabilities,
        }
    }

    pub fn parse(&self) -> Result<ParsedSet> {
        let (histories, ops) = match (&self.histories, &self.operators) {
            (Some(hs), None) => {
                let hs = hs
                    .iter()
                    .map(HistoryDoc::to_history)
                    .collect::<Result<Vec<_>>>()?;
                let set = HistorySet::new(hs)?;
                if let Some(dim) = self.dim {
                    if dim != set.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: set.dim(),
                        });
                    }
                }
                let ops = set.ops();
                (Some(set), ops)
            }
            (None, Some(ws)) => (None, operators_from_wire(ws, self.dim)?),
            _ => {
                return Err(Error::Schema(
                    "set needs exactly one of \"histories\" or \"operators\"".into(),
                ))
            }
        };
        if ops.is_empty() {
            return Err(Error::Schema("empty set".into()));
        }
        let n = ops[0].dim();
        for op in &ops {
            op.check_dim(n)?;
        }
        if let Some(p) = &self.probabilities {
            if p.len() != ops.len() {
                return Err(Error::DimensionMismatch {
                    expected: ops.len(),
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(ParsedSet {
            histories,
            ops,
            probabilities: self.probabilities.clone(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalDoc {
    /// `rho_omega` is rescaled so that `tr(rho_omega rho_alpha) = 1`.
    Canonical {
        rho_alpha: WireMatrix,
        rho_omega: WireMatrix,
    },
    Eigenform {
        weights: Vec<f64>,
        basis: Vec<WireMatrix>,
    },
}

impl FunctionalDoc {
    pub fn from_functional(d: &DecoherenceFunctional) -> Self {
        FunctionalDoc::Eigenform {
            weights: d.weights().to_vec(),
            basis: d.basis().elements().iter().map(operator_to_wire).collect(),
        }
    }

    pub fn from_boundary(b: &BoundaryPair) -> Self {
        FunctionalDoc::Canonical {
            rho_alpha: operator_to_wire(b.rho_alpha()),
            rho_omega: operator_to_wire(b.rho_omega()),
        }
    }

    pub fn to_functional(&self, tol: Tolerance) -> Result<DecoherenceFunctional> {
        match self {
            FunctionalDoc::Canonical {
                rho_alpha,
                rho_omega,
            } => {
                let a = operator_from_wire(rho_alpha, None)?;
                let z = operator_from_wire(rho_omega, Some(a.dim()))?;
                DecoherenceFunctional::canonical(BoundaryPair::normalized(a, z, tol)?)
            }
            FunctionalDoc::Eigenform { weights, basis } => {
                let elements = operators_from_wire(basis, None)?;
                if let Some(first) = elements.first() {
                    for e in &elements {
                        e.check_dim(first.dim())?;
                    }
                }
                let basis = TraceBasis::new(elements, tol)?;
                if weights.len() != basis.len() {
                    return Err(Error::DimensionMismatch {
                        expected: basis.len(),
                        found: weights.len(),
                    });
                }
                DecoherenceFunctional::from_weights(weights.clone(), basis, tol)
            }
        }
    }
}

/// `{"dim", "operator"}`: a single operator, such as a ray-completeness target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorDoc {
    pub dim: usize,
    pub operator: WireMatrix,
}

impl OperatorDoc {
    pub fn to_operator(&self) -> Result<Operator> {
        operator_from_wire(&self.operator, Some(self.dim))
    }

    pub fn from_operator(op: &Operator) -> Self {
        OperatorDoc {
            dim: op.dim(),
            operator: operator_to_wire(op),
        }
    }
}

/// Writes every float as `d.dddddddddddddddde±x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
