//! Dense complex-matrix kernel shared by every other module.
//!
//! Operators on an `N`-dimensional Hilbert space are stored as `N x N`
//! complex matrices. The space of all such operators carries the trace inner
//! product `<<A|B>> = tr A^dagger B`; its elements are flattened row-major, so
//! the matrix unit `|i><m|` sits at coordinate `i * N + m`.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;

/// Relative tolerance with an absolute floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: DEFAULT_REL_TOL,
            abs: DEFAULT_ABS_TOL,
        }
    }
}

impl Tolerance {
    pub const fn new(rel: f64, abs: f64) -> Self {
        Tolerance { rel, abs }
    }

    /// Tolerance of `rel` with the default ratio between relative and absolute parts.
    pub fn relative(rel: f64) -> Self {
        Tolerance {
            rel,
            abs: rel * (DEFAULT_ABS_TOL / DEFAULT_REL_TOL),
        }
    }

    /// Threshold for a quantity whose natural magnitude is `scale`.
    pub fn bound(&self, scale: f64) -> f64 {
        (self.rel * scale.abs()).max(self.abs)
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A linear operator on an `N`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: CMatrix,
}

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Schema("operator dimension must be positive".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Operator { m })
    }

    pub(crate) fn wrap(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Operator { m }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Operator {
            m: CMatrix::from_fn(n, n, f),
        }
    }

    /// Builds an operator from real row-major entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Operator::new(CMatrix::from_fn(n, n, |i, j| cr(rows[i][j])))
    }

    pub fn identity(n: usize) -> Self {
        Operator {
            m: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Operator {
            m: CMatrix::zeros(n, n),
        }
    }

    /// `|i><m|`
    pub fn matrix_unit(n: usize, i: usize, m: usize) -> Self {
        let mut out = CMatrix::zeros(n, n);
        out[(i, m)] = cr(1.0);
        Operator { m: out }
    }

    /// `|ket><bra|`
    pub fn outer(ket: &CVector, bra: &CVector) -> Self {
        assert_eq!(ket.len(), bra.len());
        Operator {
            m: ket * bra.adjoint(),
        }
    }

    /// Orthogonal projector onto the ray through `v`.
    pub fn projector_onto(v: &CVector) -> Self {
        let norm2 = v.norm_squared();
        Operator {
            m: v * v.adjoint() / cr(norm2),
        }
    }

    /// Projector onto the computational basis state `|i>`.
    pub fn basis_projector(n: usize, i: usize) -> Self {
        Operator::matrix_unit(n, i, i)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.m
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator { m: &self.m * s }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Row-major flattening; coordinate `i * N + m` holds `<i|A|m>`.
    pub fn to_vec(&self) -> CVector {
        let n = self.dim();
        CVector::from_fn(n * n, |k, _| self.m[(k / n, k % n)])
    }

    pub fn from_vec(n: usize, v: &CVector) -> Self {
        assert_eq!(v.len(), n * n);
        Operator {
            m: CMatrix::from_fn(n, n, |i, j| v[i * n + j]),
        }
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.m - self.m.adjoint()).norm()
    }

    /// `max(||P^2 - P||_F, ||P - P^dagger||_F)`
    pub fn projector_residual(&self) -> f64 {
        let idem = (&self.m * &self.m - &self.m).norm();
        idem.max(self.hermiticity_residual())
    }

    pub fn is_hermitian(&self, tol: Tolerance) -> bool {
        self.hermiticity_residual() <= tol.bound(self.frobenius_norm())
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                found: self.dim(),
            })
        }
    }

    pub fn distance(&self, other: &Operator) -> f64 {
        (&self.m - &other.m).norm()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m + &rhs.m,
        }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        Operator { m: self.m + rhs.m }
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.m += &rhs.m;
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m - &rhs.m,
        }
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        Operator { m: self.m - rhs.m }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m * &rhs.m,
        }
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator { m: self.m * rhs.m }
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        Operator { m: &self.m * rhs }
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        Operator { m: self.m * rhs }
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -self.m }
    }
}

impl<'a> Sum<&'a Operator> for Option<Operator> {
    fn sum<I: Iterator<Item = &'a Operator>>(iter: I) -> Option<Operator> {
        iter.fold(None, |acc, op| match acc {
            None => Some(op.clone()),
            Some(mut a) => {
                a += op;
                Some(a)
            }
        })
    }
}

/// Sum of a non-empty slice of operators of equal dimension.
pub fn sum_operators(ops: &[Operator]) -> Option<Operator> {
    ops.iter().sum()
}

/// `<<A|B>> = tr A^dagger B`
pub fn trace_inner(a: &Operator, b: &Operator) -> Result<C64> {
    b.check_dim(a.dim())?;
    Ok(a.m.iter().zip(b.m.iter()).map(|(x, y)| x.conj() * y).sum())
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Real eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    pub fn reassemble(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&x| cr(x)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// Index ranges of eigenvalues equal within `tol`.
    pub fn blocks(&self, tol: Tolerance) -> Vec<std::ops::Range<usize>> {
        cluster(&self.values, tol)
    }
}

fn cluster(values: &[f64], tol: Tolerance) -> Vec<std::ops::Range<usize>> {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let gap = tol.bound(scale);
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || (values[k - 1] - values[k]).abs() > gap {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Index of the first component whose modulus is maximal (within a small
/// relative slack so ties resolve to the lowest index).
pub fn pivot_index(v: &CVector) -> usize {
    let max = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    v.iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-8))
        .unwrap_or(0)
}

/// Rotates the global phase so the pivot component is positive real.
pub fn fix_phase(v: &mut CVector) {
    let p = pivot_index(v);
    let z = v[p];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        *v *= phase;
        v[p] = cr(v[p].norm());
    }
}

/// Deterministic orthonormal basis for the column space of `block`
/// (orthonormal columns). Pivoted Gram-Schmidt on the subspace projector,
/// then ordered by pivot index.
fn canonical_subspace_basis(block: &CMatrix) -> Vec<CVector> {
    let k = block.ncols();
    if k == 1 {
        let mut v = block.column(0).into_owned();
        fix_phase(&mut v);
        return vec![v];
    }
    let mut p = block * block.adjoint();
    let mut basis: Vec<CVector> = Vec::with_capacity(k);
    for _ in 0..k {
        let norms: Vec<f64> = (0..p.ncols()).map(|j| p.column(j).norm()).collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        let j = norms
            .iter()
            .position(|&x| x >= max * (1.0 - 1e-8))
            .unwrap_or(0);
        let mut v = p.column(j).into_owned() / cr(norms[j]);
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let nv = v.norm();
        v /= cr(nv);
        p -= &v * v.adjoint();
        fix_phase(&mut v);
        basis.push(v);
    }
    basis.sort_by_key(pivot_index);
    basis
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// descending. Degenerate eigenspaces get a deterministic basis: pivoted
/// Gram-Schmidt on the eigenprojector, ordered by the index of each vector's
/// largest-modulus component, that component made positive real.
pub fn hermitian_eigendecompose(m: &CMatrix, tol: Tolerance) -> Result<HermitianEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let residual = (m - m.adjoint()).norm();
    if residual > tol.bound(m.norm()) {
        return Err(Error::NotHermitian { residual });
    }
    let h = (m + m.adjoint()) * cr(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let sorted = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

    let mut vectors = CMatrix::zeros(n, n);
    for block in cluster(&values, tol) {
        let cols = sorted.columns(block.start, block.len()).into_owned();
        let basis = canonical_subspace_basis(&cols);
        if block.len() > 1 {
            let mean = values[block.clone()].iter().sum::<f64>() / block.len() as f64;
            for v in &mut values[block.clone()] {
                *v = mean;
            }
        }
        for (offset, v) in basis.into_iter().enumerate() {
            vectors.set_column(block.start + offset, &v);
        }
    }
    Ok(HermitianEigen { values, vectors })
}

// ---------------------------------------------------------------------------
// Singular-value canonical form and polar decomposition

/// `B = sum_n b_n |phi_n><psi_n|`
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    /// Non-negative, descending.
    pub singular_values: Vec<f64>,
    /// Columns `|phi_n>`.
    pub left: CMatrix,
    /// Columns `|psi_n>`.
    pub right: CMatrix,
}

impl CanonicalForm {
    pub fn reassemble(&self) -> Operator {
        let n = self.singular_values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &b) in self.singular_values.iter().enumerate() {
            out += self.left.column(k) * self.right.column(k).adjoint() * cr(b);
        }
        Operator::wrap(out)
    }

    pub fn rank(&self, tol: Tolerance) -> usize {
        let top = self.singular_values.first().cloned().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&b| b > tol.bound(top))
            .count()
    }
}

/// Singular-value canonical form. The singular values are the eigenvalues of
/// `|B| = sqrt(B^dagger B)`; for `b_n > 0` the left vector is `B psi_n / b_n`.
/// Each right vector has its largest-modulus component positive real.
pub fn canonical_form(b: &Operator) -> CanonicalForm {
    let n = b.dim();
    let svd = b.m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = values.first().cloned().unwrap_or(0.0);
    let cut = Tolerance::default().bound(top);

    let mut left = CMatrix::zeros(n, n);
    let mut right = CMatrix::zeros(n, n);
    for (slot, &k) in order.iter().enumerate() {
        let mut psi: CVector = v_t.row(k).adjoint();
        fix_phase(&mut psi);
        let phi = if values[slot] > cut {
            &b.m * &psi / cr(values[slot])
        } else {
            let mut phi = u.column(k).into_owned();
            fix_phase(&mut phi);
            phi
        };
        left.set_column(slot, &phi);
        right.set_column(slot, &psi);
    }
    CanonicalForm {
        singular_values: values,
        left,
        right,
    }
}

#[derive(Clone, Debug)]
pub struct PolarDecomposition {
    /// Partial isometry built from the non-zero singular triples.
    pub isometry: Operator,
    /// `|B|`
    pub positive: Operator,
}

/// `B = U |B|`.
pub fn polar_decompose(b: &Operator) -> PolarDecomposition {
    let form = canonical_form(b);
    let n = b.dim();
    let top = form.singular_values.first().cloned().unwrap_or(0.0);
    let cut = Tolerance::default().bound(top);
    let mut u = CMatrix::zeros(n, n);
    let mut p = CMatrix::zeros(n, n);
    for (k, &s) in form.singular_values.iter().enumerate() {
        let psi = form.right.column(k);
        p += psi * psi.adjoint() * cr(s);
        if s > cut {
            u += form.left.column(k) * psi.adjoint();
        }
    }
    PolarDecomposition {
        isometry: Operator::wrap(u),
        positive: Operator::wrap(p),
    }
}

/// Square root of a positive semi-definite Hermitian matrix. Eigenvalues in
/// `[-tol, 0)` are clamped to zero, as are those within the eigensolver's
/// rounding floor, whose square roots would otherwise be pure noise.
pub fn sqrt_psd(m: &CMatrix, tol: Tolerance) -> Result<CMatrix> {
    let eig = hermitian_eigendecompose(m, tol)?;
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&low) = eig.values.last() {
        if low < -tol.bound(scale) {
            return Err(Error::NotPositive { eigenvalue: low });
        }
    }
    let n = m.nrows();
    let floor = 8.0 * n as f64 * f64::EPSILON * scale;
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        eig.values
            .iter()
            .map(|&x| cr(if x <= floor { 0.0 } else { x.sqrt() })),
    ));
    Ok(&eig.vectors * d * eig.vectors.adjoint())
}

// ---------------------------------------------------------------------------
// Rank-one factorization

/// `B = |ket><bra|` with `||bra|| = 1`.
#[derive(Clone, Debug)]
pub struct Rank1Factor {
    pub ket: CVector,
    pub bra: CVector,
    /// `||Bbar^2 - Bbar||_F` for `Bbar = B^dagger B / tr B^dagger B`.
    pub residual: f64,
}

impl Rank1Factor {
    pub fn operator(&self) -> Operator {
        Operator::outer(&self.ket, &self.bra)
    }
}

/// Residual of `Bbar = B^dagger B / tr(B^dagger B)` being a projector;
/// `None` for the zero operator.
pub fn projection_residual(b: &Operator) -> Option<f64> {
    let n2 = b.m.norm_squared();
    if n2 <= DEFAULT_ABS_TOL * DEFAULT_ABS_TOL {
        return None;
    }
    let bbar = b.m.adjoint() * &b.m / cr(n2);
    Some((&bbar * &bbar - &bbar).norm())
}

/// Factors `B = |b><beta|` when `B^dagger B / tr(B^dagger B)` is a rank-one
/// projection. This also covers traceless, nilpotent `B`.
pub fn rank1_factor_test(b: &Operator, tol: Tolerance) -> Option<Rank1Factor> {
    let residual = projection_residual(b)?;
    if residual > tol.bound(1.0) {
        return None;
    }
    let n2 = b.m.norm_squared();
    let bbar = b.m.adjoint() * &b.m / cr(n2);
    let eig = hermitian_eigendecompose(&bbar, Tolerance::relative(1e-8)).ok()?;
    let bra = eig.vector(0);
    let ket = &b.m * &bra;
    Some(Rank1Factor { ket, bra, residual })
}

// ---------------------------------------------------------------------------
// Two-copy space H (x) H

/// `M (u (x) v) = v (x) u` on `H (x) H`.
pub fn swap_operator(n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            m[(j * n + i, i * n + j)] = cr(1.0);
        }
    }
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Maps an operator `g` on history space (a matrix in trace-orthonormal
/// matrix-unit coordinates) to its realization on `H (x) H`, under the
/// correspondence `||A>><<B|| <-> A (x) B^dagger`.
pub fn to_product_space(g: &CMatrix, n: usize) -> CMatrix {
    assert_eq!(g.nrows(), n * n);
    let mut out = CMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for m in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + k, m * n + j)] = g[(i * n + m, j * n + k)];
                }
            }
        }
    }
    out
}

/// Inverse of [`to_product_space`].
pub fn from_product_space(g: &CMatrix, n: usize) -> CMatrix {
    assert_eq!(g.nrows(), n * n);
    let mut out = CMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for m in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + m, j * n + k)] = g[(i * n + k, m * n + j)];
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Trace-orthonormal bases of operator space

/// `N^2` trace-orthonormal operators spanning `L(H)`.
#[derive(Clone, Debug)]
pub struct TraceBasis {
    dim: usize,
    elements: Vec<Operator>,
}

impl TraceBasis {
    pub fn new(elements: Vec<Operator>, tol: Tolerance) -> Result<Self> {
        let dim = elements
            .first()
            .map(Operator::dim)
            .ok_or_else(|| Error::Schema("empty basis".into()))?;
        for e in &elements {
            e.check_dim(dim)?;
        }
        if elements.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: elements.len(),
            });
        }
        let basis = TraceBasis { dim, elements };
        let residual = basis.orthonormality_residual();
        if residual > tol.bound(dim as f64) {
            return Err(Error::NotOrthonormal { residual });
        }
        Ok(basis)
    }

    /// The matrix units `|i><m|`, ordered row-major.
    pub fn matrix_units(n: usize) -> Self {
        let elements = (0..n * n)
            .map(|k| Operator::matrix_unit(n, k / n, k % n))
            .collect();
        TraceBasis { dim: n, elements }
    }

    /// Basis whose `I`-th element is the operator with flattened coordinates
    /// `q.column(I)`; `q` must be unitary.
    pub(crate) fn from_columns(n: usize, q: &CMatrix) -> Self {
        let elements = (0..q.ncols())
            .map(|k| Operator::from_vec(n, &q.column(k).into_owned()))
            .collect();
        TraceBasis { dim: n, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn get(&self, k: usize) -> &Operator {
        &self.elements[k]
    }

    /// Matrix whose columns are the flattened basis elements.
    pub fn as_columns(&self) -> CMatrix {
        let n2 = self.dim * self.dim;
        let mut q = CMatrix::zeros(n2, self.elements.len());
        for (k, e) in self.elements.iter().enumerate() {
            q.set_column(k, &e.to_vec());
        }
        q
    }

    /// Components `tr(E_I^dagger h)`.
    pub fn components(&self, h: &Operator) -> Result<Vec<C64>> {
        h.check_dim(self.dim)?;
        self.elements.iter().map(|e| trace_inner(e, h)).collect()
    }

    pub fn reconstruct(&self, coeffs: &[C64]) -> Operator {
        let mut out = Operator::zeros(self.dim);
        for (e, &x) in self.elements.iter().zip(coeffs) {
            out += &(e * x);
        }
        out
    }

    /// `||Q^dagger Q - 1||_F`.
    pub fn orthonormality_residual(&self) -> f64 {
        let q = self.as_columns();
        let k = q.ncols();
        (q.adjoint() * &q - CMatrix::identity(k, k)).norm()
    }

    pub(crate) fn permuted(&self, order: &[usize]) -> Self {
        TraceBasis {
            dim: self.dim,
            elements: order.iter().map(|&k| self.elements[k].clone()).collect(),
        }
    }
}

/// Numerical rank of a set of operators, as flattened vectors.
pub fn operator_rank(ops: &[Operator], tol: Tolerance) -> usize {
    if ops.is_empty() {
        return 0;
    }
    let n = ops[0].dim();
    let mut a = CMatrix::zeros(n * n, ops.len());
    for (k, op) in ops.iter().enumerate() {
        a.set_column(k, &op.to_vec());
    }
    let sv = a.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol.bound(top)).count()
}
