//! Inverse problems: fitting functionals to a consistent set with given
//! probabilities, deciding whether a functional is canonical, and recovering
//! its boundary density operators.
//!
//! Two products act on `N^2 x N^2` matrices here. The ordinary one is that of
//! operators on `H (x) H`. The other, written `(.)` below, composes the same
//! objects read as operators on history space; `hh_product` and `hh_star`
//! implement it by realigning to history-space coordinates. For example
//! `(A (x) B) (.) (C (x) D) = tr(BC) A (x) D`.

use crate::consistency::ZERO_PROBABILITY;
use crate::error::{Error, Result};
use crate::functional::{BoundaryPair, DecoherenceFunctional, PositivityClass};
use crate::operator::{
    cr, from_product_space, hermitian_eigendecompose, operator_rank, rank1_factor_test,
    swap_operator, to_product_space, CMatrix, CVector, Operator, Tolerance, C64,
};

/// Threshold on the canonicality residuals.
pub const CANONICALITY_TOL: f64 = 1e-8;

/// Relative tolerance of the cross-ratio test, in units of `max w^2`.
pub const WEIGHT_FACTOR_TOL: f64 = 1e-8;

/// Largest residual accepted when `canonical(recovered)` is compared with the input.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

fn side(m: &CMatrix) -> usize {
    (m.nrows() as f64).sqrt().round() as usize
}

/// History-space product of two `H (x) H` matrices.
pub fn hh_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = side(a);
    to_product_space(&(from_product_space(a, n) * from_product_space(b, n)), n)
}

/// History-space adjoint of an `H (x) H` matrix.
pub fn hh_star(a: &CMatrix) -> CMatrix {
    let n = side(a);
    to_product_space(&from_product_space(a, n).adjoint(), n)
}

/// History-space trace of an `H (x) H` matrix.
pub fn hh_trace(a: &CMatrix) -> C64 {
    from_product_space(a, side(a)).trace()
}

// ---------------------------------------------------------------------------
// Fitting

/// The functional on `span(S)` under which every member of `S` is
/// consistent with its given probability.
#[derive(Clone, Debug)]
pub struct FittedFunctional {
    dim: usize,
    /// Columns: trace-orthonormal basis of `span(S)`, flattened.
    span_basis: CMatrix,
    /// `K = sum_M W_MK |M>>`.
    w_matrix: CMatrix,
    /// `V = W^{-1}`.
    v_matrix: CMatrix,
    probabilities: Vec<f64>,
    form: CMatrix,
}

/// Builds `d_S = sum_{MM'} d_MM' |M>><<M'|` with
/// `d_MM' = sum_K p_K conj(V_KM) V_KM'`.
pub fn fit_functional(
    set: &[Operator],
    probabilities: &[f64],
    tol: Tolerance,
) -> Result<FittedFunctional> {
    if set.is_empty() {
        return Err(Error::Schema("empty set".into()));
    }
    if set.len() != probabilities.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            found: probabilities.len(),
        });
    }
    let n = set[0].dim();
    for h in set {
        h.check_dim(n)?;
    }
    for (index, &p) in probabilities.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite);
        }
        if p < -tol.bound(1.0) {
            return Err(Error::NegativeProbability { index, value: p });
        }
    }
    if probabilities
        .iter()
        .filter(|&&p| p <= ZERO_PROBABILITY)
        .count()
        > 1
    {
        return Err(Error::ZeroProbabilityNotMerged);
    }
    if operator_rank(set, tol) < set.len() {
        return Err(Error::LinearlyDependent);
    }
    let k = set.len();
    let mut a = CMatrix::zeros(n * n, k);
    for (j, h) in set.iter().enumerate() {
        a.set_column(j, &h.to_vec());
    }
    let q = a.clone().qr().q();
    let w = q.adjoint() * &a;
    let v = w.clone().try_inverse().ok_or(Error::LinearlyDependent)?;
    let p = CMatrix::from_diagonal(&CVector::from_iterator(
        k,
        probabilities.iter().map(|&x| cr(x.max(0.0))),
    ));
    let inner = v.adjoint() * p * &v;
    let mut form = &q * inner * q.adjoint();
    form = (&form + form.adjoint()) * cr(0.5);
    Ok(FittedFunctional {
        dim: n,
        span_basis: q,
        w_matrix: w,
        v_matrix: v,
        probabilities: probabilities.to_vec(),
        form,
    })
}

impl FittedFunctional {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Trace-orthonormal basis of `span(S)`.
    pub fn span_basis(&self) -> Vec<Operator> {
        (0..self.span_basis.ncols())
            .map(|k| Operator::from_vec(self.dim, &self.span_basis.column(k).into_owned()))
            .collect()
    }

    pub fn w_matrix(&self) -> &CMatrix {
        &self.w_matrix
    }

    pub fn v_matrix(&self) -> &CMatrix {
        &self.v_matrix
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Form matrix on flattened operators, zero off the span.
    pub fn form(&self) -> &CMatrix {
        &self.form
    }

    /// `d(h, h')` under the fitted form.
    pub fn evaluate(&self, h: &Operator, h2: &Operator) -> Result<C64> {
        h.check_dim(self.dim)?;
        h2.check_dim(self.dim)?;
        Ok((h.to_vec().adjoint() * &self.form * h2.to_vec())[(0, 0)])
    }

    /// Trace-orthonormal basis of the orthogonal complement of the span.
    /// Any Hermitian form built only from these directions is a valid
    /// extension.
    pub fn free_directions(&self) -> Vec<Operator> {
        let n2 = self.dim * self.dim;
        let k = self.span_basis.ncols();
        let proj = &self.span_basis * self.span_basis.adjoint();
        let comp = CMatrix::identity(n2, n2) - proj;
        let eig = hermitian_eigendecompose(&comp, Tolerance::relative(1e-8))
            .expect("complement projector is Hermitian");
        (0..n2 - k)
            .map(|j| Operator::from_vec(self.dim, &eig.vector(j)))
            .collect()
    }

    /// The fitted form as a full functional; needs `d(1, 1) = 1`, which holds
    /// when `S` is exhaustive and the probabilities sum to one.
    pub fn to_functional(&self, tol: Tolerance) -> Result<DecoherenceFunctional> {
        DecoherenceFunctional::from_form(&self.form, tol)
    }
}

/// Adds a Hermitian form (on flattened operators) whose matrix elements
/// inside `span(S)` vanish.
pub fn extend_fitted(
    fitted: &FittedFunctional,
    extension: &CMatrix,
    tol: Tolerance,
) -> Result<DecoherenceFunctional> {
    let n2 = fitted.dim * fitted.dim;
    if extension.nrows() != n2 || extension.ncols() != n2 {
        return Err(Error::DimensionMismatch {
            expected: n2,
            found: extension.nrows(),
        });
    }
    let residual = (&fitted.span_basis.adjoint() * extension * &fitted.span_basis).norm();
    if residual > tol.bound(extension.norm()).max(tol.abs) {
        return Err(Error::ExtensionLeaks { residual });
    }
    DecoherenceFunctional::from_form(&(&fitted.form + extension), tol)
}

// ---------------------------------------------------------------------------
// Canonicality

/// `D = |d_|` on `H (x) H`, computed as `|M d_|`: `M d_` is Hermitian and
/// squares to `d_^dagger d_`.
pub fn abs_underline(d: &DecoherenceFunctional) -> Result<CMatrix> {
    let m = swap_operator(d.dim());
    let md = &m * d.underline();
    let md = (&md + md.adjoint()) * cr(0.5);
    let eig = hermitian_eigendecompose(&md, Tolerance::relative(1e-8))?;
    let n2 = md.nrows();
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        n2,
        eig.values.iter().map(|&x| cr(x.abs())),
    ));
    Ok(&eig.vectors * diag * eig.vectors.adjoint())
}

#[derive(Clone, Debug)]
pub struct TraceDiagnostics {
    /// History-space trace of `D`; equals `tr rho_alpha rho_omega` for canonical input.
    pub trace_d: f64,
    /// `tr d_`.
    pub trace_underline: f64,
    /// `tr rho_alpha * tr rho_omega` of the recovered pair.
    pub trace_product: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CanonicalityVerdict {
    pub is_canonical: bool,
    /// `||D (.) D - D||_F`
    pub idempotency_residual: f64,
    /// `||Dbar (.) Dbar - Dbar||_F` for `Dbar = D^* (.) D / tr(D^* (.) D)`.
    pub projection_residual: f64,
    pub weight_factor_residual: Option<f64>,
    pub reconstruction_residual: Option<f64>,
    pub recovered: Option<BoundaryPair>,
    pub positivity_ok: bool,
    pub diagnostics: TraceDiagnostics,
    /// Why recovery failed, when it did.
    pub failure: Option<String>,
}

struct Criteria {
    d_op: CMatrix,
    dbar: CMatrix,
    idempotency: f64,
    projection: f64,
}

fn criteria(d: &DecoherenceFunctional) -> Result<Criteria> {
    let n = d.dim();
    let dh = abs_underline(d)?;
    let d_op = from_product_space(&dh, n);
    let idempotency = (&d_op * &d_op - &d_op).norm();
    let sq = d_op.adjoint() * &d_op;
    let norm = sq.trace();
    let dbar = if norm.norm() > 0.0 { sq / norm } else { sq };
    let projection = (&dbar * &dbar - &dbar).norm();
    Ok(Criteria {
        d_op,
        dbar,
        idempotency,
        projection,
    })
}

#[derive(Debug)]
struct Recovery {
    pair: BoundaryPair,
    weight_factor_residual: f64,
    reconstruction_residual: f64,
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * cr(0.5)
}

/// Groups unit vectors that agree up to phase; fails unless every pair is
/// either parallel or orthogonal.
fn cluster_rays(vectors: &[CVector], tol: f64) -> Result<Vec<usize>> {
    let mut reps: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        let mut label = None;
        for (g, &r) in reps.iter().enumerate() {
            let o = vectors[r].dotc(v).norm();
            if o >= 1.0 - tol {
                label = Some(g);
                break;
            }
            if o > tol {
                return Err(Error::BasisDoesNotFactor {
                    residual: o.min(1.0 - o),
                });
            }
        }
        labels.push(label.unwrap_or_else(|| {
            reps.push(k);
            reps.len() - 1
        }));
    }
    Ok(labels)
}

fn recover(d: &DecoherenceFunctional, crit: &Criteria, tol: Tolerance) -> Result<Recovery> {
    let n = d.dim();
    let n2 = n * n;
    // Guide bases from the top eigenvector of Dbar (along rho_alpha) and its
    // image under D (along rho_omega).
    let eig = hermitian_eigendecompose(&hermitize(&crit.dbar), Tolerance::relative(1e-8))?;
    let mut a_vec = eig.vector(0);
    let tr: C64 = (0..n).map(|i| a_vec[i * n + i]).sum();
    if tr.norm() > 0.0 {
        a_vec *= tr.conj() / tr.norm();
    }
    let a_guide = hermitize(Operator::from_vec(n, &a_vec).as_matrix());
    let z_vec = &crit.d_op * &a_vec;
    let z_guide = hermitize(Operator::from_vec(n, &z_vec).as_matrix());
    let left_basis = hermitian_eigendecompose(&a_guide, Tolerance::relative(1e-8))?.vectors;
    let right_basis = hermitian_eigendecompose(&z_guide, Tolerance::relative(1e-8))?.vectors;

    // Factor each eigen-block of d into |ket><bra| elements.
    let mut kets: Vec<CVector> = Vec::with_capacity(n2);
    let mut bras: Vec<CVector> = Vec::with_capacity(n2);
    for block in d.eigen_blocks(tol) {
        if block.len() == 1 {
            let e = d.basis().get(block.start);
            let f = rank1_factor_test(e, tol).ok_or(Error::BasisDoesNotFactor {
                residual: crate::operator::projection_residual(e).unwrap_or(f64::INFINITY),
            })?;
            let norm = f.ket.norm();
            kets.push(&f.ket / cr(norm));
            bras.push(f.bra);
            continue;
        }
        let cols = CMatrix::from_fn(n2, block.len(), |r, c| {
            d.basis().get(block.start + c).to_vec()[r]
        });
        let proj = &cols * cols.adjoint();
        let mut chosen = 0;
        for i in 0..n {
            for m in 0..n {
                let ket = left_basis.column(i).into_owned();
                let bra = right_basis.column(m).into_owned();
                let r = Operator::outer(&ket, &bra).to_vec();
                let inside = (&proj * &r).norm_squared();
                if inside >= 1.0 - 1e-6 {
                    kets.push(ket);
                    bras.push(bra);
                    chosen += 1;
                } else if inside > 1e-6 {
                    return Err(Error::BasisDoesNotFactor {
                        residual: inside.min(1.0 - inside),
                    });
                }
            }
        }
        if chosen != block.len() {
            return Err(Error::BasisDoesNotFactor {
                residual: (chosen as f64 - block.len() as f64).abs(),
            });
        }
    }
    if kets.len() != n2 {
        return Err(Error::BasisDoesNotFactor {
            residual: (kets.len() as f64 - n2 as f64).abs(),
        });
    }

    let left = cluster_rays(&kets, 1e-6)?;
    let right = cluster_rays(&bras, 1e-6)?;
    let groups_left = left.iter().max().map_or(0, |m| m + 1);
    let groups_right = right.iter().max().map_or(0, |m| m + 1);
    if groups_left != n || groups_right != n {
        return Err(Error::BasisDoesNotFactor {
            residual: (groups_left.abs_diff(n) + groups_right.abs_diff(n)) as f64,
        });
    }
    let mut w = vec![vec![f64::NAN; n]; n];
    let mut left_rep: Vec<Option<CVector>> = vec![None; n];
    let mut right_rep: Vec<Option<CVector>> = vec![None; n];
    for k in 0..n2 {
        let (i, m) = (left[k], right[k]);
        if !w[i][m].is_nan() {
            return Err(Error::BasisDoesNotFactor { residual: 1.0 });
        }
        let r = Operator::outer(&kets[k], &bras[k]);
        w[i][m] = d.evaluate(&r, &r)?.re;
        left_rep[i].get_or_insert_with(|| kets[k].clone());
        right_rep[m].get_or_insert_with(|| bras[k].clone());
    }

    // Cross-ratio test w_im w_jn = w_in w_jm.
    let wmax = w.iter().flatten().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut cross = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for m in 0..n {
                for k in 0..n {
                    cross = cross.max((w[i][m] * w[j][k] - w[i][k] * w[j][m]).abs());
                }
            }
        }
    }
    if cross > WEIGHT_FACTOR_TOL * wmax * wmax {
        return Err(Error::WeightsDoNotFactor { residual: cross });
    }
    let (mut pi, mut pm) = (0, 0);
    for i in 0..n {
        for m in 0..n {
            if w[i][m] > w[pi][pm] {
                pi = i;
                pm = m;
            }
        }
    }
    let pivot = w[pi][pm];
    if pivot <= 0.0 {
        return Err(Error::NotPositive { eigenvalue: pivot });
    }
    let a: Vec<f64> = (0..n).map(|i| w[i][pm]).collect();
    let z: Vec<f64> = (0..n).map(|m| w[pi][m] / pivot).collect();
    let floor = -WEIGHT_FACTOR_TOL * wmax;
    if let Some(&bad) = a.iter().chain(&z).find(|&&x| x < floor) {
        return Err(Error::NotPositive { eigenvalue: bad });
    }
    let build = |coeffs: &[f64], reps: &[Option<CVector>]| {
        let mut out = Operator::zeros(n);
        for (c, v) in coeffs.iter().zip(reps) {
            let v = v.as_ref().expect("every group has a representative");
            out += &Operator::projector_onto(v).scale(cr(c.max(0.0)));
        }
        Operator::new(hermitize(out.as_matrix())).expect("finite")
    };
    let rho_alpha = build(&a, &left_rep);
    let rho_omega = build(&z, &right_rep);
    let ta = rho_alpha.trace().re;
    let rho_alpha = rho_alpha.scale(cr(1.0 / ta));
    let pair = BoundaryPair::normalized(rho_alpha, rho_omega, Tolerance::relative(1e-8))?;
    let rebuilt = DecoherenceFunctional::canonical(pair.clone())?;
    let reconstruction_residual = (rebuilt.underline() - d.underline()).norm();
    if reconstruction_residual > RECONSTRUCTION_TOL {
        return Err(Error::ReconstructionMismatch {
            residual: reconstruction_residual,
        });
    }
    Ok(Recovery {
        pair,
        weight_factor_residual: cross,
        reconstruction_residual,
    })
}

/// Recovers `(rho_alpha, rho_omega)` with `tr rho_alpha = 1` and
/// `tr rho_alpha rho_omega = 1` from a canonical functional.
pub fn recover_boundaries(d: &DecoherenceFunctional, tol: Tolerance) -> Result<BoundaryPair> {
    if d.positivity() == PositivityClass::Indefinite {
        return Err(Error::Indefinite);
    }
    let crit = criteria(d)?;
    Ok(recover(d, &crit, tol)?.pair)
}

/// Evaluates both canonicality criteria and attempts boundary recovery.
/// `threshold` bounds both criteria residuals.
pub fn canonicality_test(
    d: &DecoherenceFunctional,
    threshold: f64,
    tol: Tolerance,
) -> Result<CanonicalityVerdict> {
    if d.positivity() == PositivityClass::Indefinite {
        return Err(Error::Indefinite);
    }
    let crit = criteria(d)?;
    let trace_d = crit.d_op.trace().re;
    let trace_underline = d.underline().trace().re;
    let criteria_pass = crit.idempotency <= threshold && crit.projection <= threshold;
    let (recovery, failure) = if criteria_pass {
        match recover(d, &crit, tol) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("canonicality criteria not met".to_string()))
    };
    let weight_factor_residual = recovery.as_ref().map(|r| r.weight_factor_residual);
    let reconstruction_residual = recovery.as_ref().map(|r| r.reconstruction_residual);
    let positivity_ok = recovery.is_some();
    let trace_product = recovery
        .as_ref()
        .map(|r| r.pair.rho_alpha().trace().re * r.pair.rho_omega().trace().re);
    let recovered = recovery.map(|r| r.pair);
    Ok(CanonicalityVerdict {
        is_canonical: criteria_pass && recovered.is_some(),
        idempotency_residual: crit.idempotency,
        projection_residual: crit.projection,
        weight_factor_residual,
        reconstruction_residual,
        recovered,
        positivity_ok,
        diagnostics: TraceDiagnostics {
            trace_d,
            trace_underline,
            trace_product,
        },
        failure,
    })
}
