//! Consistency of histories and sets of histories, probabilities, the
//! maximum-set-size bound, the parametrization of consistent operators, and
//! Gram-Schmidt orthogonalization of approximately consistent sets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{DecoherenceFunctional, PositivityClass};
use crate::histories::HistorySet;
use crate::operator::{cr, operator_rank, sum_operators, CMatrix, Operator, Tolerance, C64};

/// Probabilities at or below this count as zero.
pub const ZERO_PROBABILITY: f64 = 1e-10;

/// Floor for deciding that an operator list sums to the identity.
pub const EXHAUSTIVE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Medium,
    Weak,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "medium" => Ok(Mode::Medium),
            "weak" => Ok(Mode::Weak),
            other => Err(Error::Schema(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    /// All off-diagonal `d(h, h')` vanish.
    Medium,
    /// Only their real parts vanish.
    WeakOnly,
    Inconsistent,
}

#[derive(Clone, Debug)]
pub struct ConsistencyCheck {
    pub consistent: bool,
    /// `|d(h, 1 - h)|`
    pub residual: f64,
    /// `Re d(h, h)`
    pub probability: f64,
}

/// `d(h, 1 - h) = 0`, relative to the probability scale `1 + |d(h, h)|`.
pub fn is_consistent(
    d: &DecoherenceFunctional,
    h: &Operator,
    tol: Tolerance,
) -> Result<ConsistencyCheck> {
    h.check_dim(d.dim())?;
    let complement = &Operator::identity(d.dim()) - h;
    let residual = d.evaluate(h, &complement)?.norm();
    let p = d.evaluate(h, h)?;
    Ok(ConsistencyCheck {
        consistent: residual <= tol.bound(1.0 + p.norm()),
        residual,
        probability: p.re,
    })
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub pair_matrix: CMatrix,
    pub diagnosis: Diagnosis,
    /// Whether the set passes in the requested mode.
    pub consistent: bool,
    pub probabilities: Vec<f64>,
    pub max_offdiag: f64,
    pub max_re_offdiag: f64,
    /// `||sum_b C_b - 1||_F`
    pub exhaustion_residual: f64,
    /// `|sum_b p_b - 1|`, present when the set is exhaustive.
    pub sum_rule_residual: Option<f64>,
    pub zero_prob_indices: Vec<usize>,
}

fn report(
    d: &DecoherenceFunctional,
    ops: &[Operator],
    exhaustive: Option<bool>,
    mode: Mode,
    tol: Tolerance,
) -> Result<ConsistencyReport> {
    if ops.is_empty() {
        return Err(Error::Schema("empty operator set".into()));
    }
    let pair_matrix = d.pair_matrix(ops)?;
    let k = ops.len();
    let probabilities: Vec<f64> = (0..k).map(|a| pair_matrix[(a, a)].re).collect();
    let mut max_offdiag = 0.0f64;
    let mut max_re_offdiag = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            if a != b {
                max_offdiag = max_offdiag.max(pair_matrix[(a, b)].norm());
                max_re_offdiag = max_re_offdiag.max(pair_matrix[(a, b)].re.abs());
            }
        }
    }
    let scale = 1.0 + probabilities.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let cut = tol.bound(scale);
    let diagnosis = if max_offdiag <= cut {
        Diagnosis::Medium
    } else if max_re_offdiag <= cut {
        Diagnosis::WeakOnly
    } else {
        Diagnosis::Inconsistent
    };
    let consistent = match mode {
        Mode::Medium => diagnosis == Diagnosis::Medium,
        Mode::Weak => diagnosis != Diagnosis::Inconsistent,
    };
    let n = d.dim();
    let exhaustion_residual = sum_operators(ops)
        .expect("non-empty")
        .distance(&Operator::identity(n));
    let exhaustive = exhaustive
        .unwrap_or(exhaustion_residual <= EXHAUSTIVE_TOL.max(tol.rel) * (n as f64).sqrt());
    let sum_rule_residual = exhaustive.then(|| (probabilities.iter().sum::<f64>() - 1.0).abs());
    let zero_prob_indices = (0..k)
        .filter(|&a| probabilities[a] <= ZERO_PROBABILITY)
        .collect();
    Ok(ConsistencyReport {
        pair_matrix,
        diagnosis,
        consistent,
        probabilities,
        max_offdiag,
        max_re_offdiag,
        exhaustion_residual,
        sum_rule_residual,
        zero_prob_indices,
    })
}

/// Consistency report for a set of histories.
pub fn check_set(
    d: &DecoherenceFunctional,
    set: &HistorySet,
    mode: Mode,
    tol: Tolerance,
) -> Result<ConsistencyReport> {
    report(d, &set.ops(), Some(set.is_exhaustive()), mode, tol)
}

/// Consistency report for bare operators; exhaustiveness is decided from
/// their sum.
pub fn check_operators(
    d: &DecoherenceFunctional,
    ops: &[Operator],
    mode: Mode,
    tol: Tolerance,
) -> Result<ConsistencyReport> {
    report(d, ops, None, mode, tol)
}

/// Largest number of non-zero-probability histories in a consistent set:
/// the number of non-zero weights of `d`.
pub fn max_consistent_histories(d: &DecoherenceFunctional, tol: Tolerance) -> usize {
    d.rank(tol)
}

/// Parametrization of consistent operators by a `d`-orthonormal basis
/// `B_1 = 1, B_2, ...` with signs `delta_I = d(B_I, B_I)`. In coordinates
/// `h = sum_I h_I B_I`, consistency reads `h_1 = sum_I delta_I |h_I|^2`.
#[derive(Clone, Debug)]
pub struct SphereParam {
    d: DecoherenceFunctional,
    basis: Vec<Operator>,
    signs: Vec<f64>,
}

/// Roots `h_1 = (1 +- sqrt(1 - 4 sigma)) / 2`, larger first.
pub fn sphere_roots(sigma: f64, tol: Tolerance) -> Result<(f64, f64)> {
    let disc = 1.0 - 4.0 * sigma;
    if disc < -tol.bound(1.0) {
        return Err(Error::OutsideConsistencySphere { sigma });
    }
    let r = disc.max(0.0).sqrt();
    Ok((0.5 * (1.0 + r), 0.5 * (1.0 - r)))
}

/// Builds the parametrization by Gram-Schmidt under `d`, starting from the
/// identity and pivoting on the largest `|d(v, v)|` among remaining seeds.
/// Seeds already in the span are dropped; a seed whose remainder is null
/// under `d` is an error.
pub fn sphere_param(
    d: &DecoherenceFunctional,
    seeds: &[Operator],
    tol: Tolerance,
) -> Result<SphereParam> {
    let n = d.dim();
    let one = Operator::identity(n);
    let mut basis = vec![one.clone()];
    let mut signs = vec![d.evaluate(&one, &one)?.re.signum()];
    let mut remaining: Vec<(usize, Operator)> = seeds.iter().cloned().enumerate().collect();
    for (_, s) in &remaining {
        s.check_dim(n)?;
    }
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        let mut kept = Vec::with_capacity(remaining.len());
        for (idx, seed) in remaining.drain(..) {
            let mut v = seed.clone();
            for (b, &s) in basis.iter().zip(&signs) {
                let coeff = d.evaluate(b, &v)? * s;
                v = &v - &(b * coeff);
            }
            if v.frobenius_norm()
                <= tol
                    .bound(seed.frobenius_norm())
                    .max(1e-9 * seed.frobenius_norm())
            {
                continue;
            }
            let q = d.evaluate(&v, &v)?.re;
            if best.is_none_or(|(_, b)| q.abs() > b) {
                best = Some((kept.len(), q.abs()));
            }
            kept.push((idx, v));
        }
        let Some((pos, value)) = best else { break };
        let (idx, v) = kept.swap_remove(pos);
        if value <= tol.bound(1.0).max(1e-9) {
            return Err(Error::NullSeed { index: idx, value });
        }
        let q = d.evaluate(&v, &v)?.re;
        basis.push(v.scale(cr(1.0 / q.abs().sqrt())));
        signs.push(q.signum());
        remaining = kept;
    }
    Ok(SphereParam {
        d: d.clone(),
        basis,
        signs,
    })
}

impl SphereParam {
    pub fn basis(&self) -> &[Operator] {
        &self.basis
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// `h_I = delta_I d(B_I, h)`.
    pub fn coords(&self, h: &Operator) -> Result<Vec<C64>> {
        self.basis
            .iter()
            .zip(&self.signs)
            .map(|(b, &s)| Ok(self.d.evaluate(b, h)? * s))
            .collect()
    }

    /// `sum_I h_I B_I`.
    pub fn operator(&self, coords: &[C64]) -> Result<Operator> {
        if coords.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                found: coords.len(),
            });
        }
        let mut out = Operator::zeros(self.d.dim());
        for (b, &x) in self.basis.iter().zip(coords) {
            out += &(b * x);
        }
        Ok(out)
    }

    /// `sigma = sum_{I >= 2} delta_I |h_I|^2` for coordinates `h_2, h_3, ...`.
    pub fn sigma(&self, tail: &[C64]) -> f64 {
        tail.iter()
            .zip(&self.signs[1..])
            .map(|(x, s)| s * x.norm_sqr())
            .sum()
    }

    /// The two consistent operators with the given coordinates beyond the
    /// identity direction, `h` and `1 - h`, larger `h_1` first.
    pub fn consistent_pair(&self, tail: &[C64], tol: Tolerance) -> Result<(Operator, Operator)> {
        if tail.len() + 1 != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len() - 1,
                found: tail.len(),
            });
        }
        let (hi, lo) = sphere_roots(self.sigma(tail), tol)?;
        let build = |h1: f64| {
            let mut coords = vec![cr(h1)];
            coords.extend_from_slice(tail);
            self.operator(&coords)
        };
        Ok((build(hi)?, build(lo)?))
    }

    /// Residual of `h_1 = sum_I delta_I |h_I|^2` (with `h_1` required real).
    pub fn sphere_residual(&self, coords: &[C64]) -> f64 {
        let h1 = coords[0];
        let total: f64 = coords
            .iter()
            .zip(&self.signs)
            .map(|(x, s)| s * x.norm_sqr())
            .sum();
        (h1 - cr(total)).norm()
    }
}

/// Makes an approximately consistent set exactly `d`-orthogonal by
/// sequential Gram-Schmidt: `u_k = h_k - sum_{j<k} d(u_j, h_k) / d(u_j, u_j) u_j`.
pub fn consistentize(
    d: &DecoherenceFunctional,
    ops: &[Operator],
    tol: Tolerance,
) -> Result<Vec<Operator>> {
    match d.positivity() {
        PositivityClass::PositiveDefinite => {}
        PositivityClass::Indefinite => return Err(Error::Indefinite),
        PositivityClass::PositiveSemidefinite => {
            return Err(Error::Degenerate {
                nullity: d.null_indices(tol).len(),
            })
        }
    }
    let max = max_consistent_histories(d, tol);
    if ops.len() > max {
        return Err(Error::TooManyHistories {
            count: ops.len(),
            max,
        });
    }
    for h in ops {
        h.check_dim(d.dim())?;
    }
    if operator_rank(ops, tol) < ops.len() {
        return Err(Error::LinearlyDependent);
    }
    let mut out: Vec<Operator> = Vec::with_capacity(ops.len());
    let mut norms: Vec<f64> = Vec::with_capacity(ops.len());
    for h in ops {
        let mut u = h.clone();
        for (v, &q) in out.iter().zip(&norms) {
            let coeff = d.evaluate(v, h)? / q;
            u = &u - &(v * coeff);
        }
        norms.push(d.evaluate(&u, &u)?.re);
        out.push(u);
    }
    Ok(out)
}
