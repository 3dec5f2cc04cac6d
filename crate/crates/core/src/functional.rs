//! Decoherence functionals as Hermitian forms on operator space.
//!
//! A functional is stored in eigenform: real weights `w_I` (descending) on a
//! trace-orthonormal basis `E_I`, so that
//! `d(h, h') = sum_I w_I conj(tr E_I^dagger h) tr E_I^dagger h'`.
//! Two matrix realizations are cached: the form matrix `G` on flattened
//! operators (`d(h, h') = vec(h)^dagger G vec(h')`) and its realignment `d_`
//! on `H (x) H` (`d(h, h') = tr[(h^dagger (x) h') d_]`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::histories::HistorySet;
use crate::operator::{
    cr, from_product_space, hermitian_eigendecompose, swap_operator, to_product_space, CMatrix,
    CVector, Operator, Tolerance, TraceBasis, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityClass {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
}

/// Initial and final density operators, normalized so `tr(rho_omega rho_alpha) = 1`.
#[derive(Clone, Debug)]
pub struct BoundaryPair {
    rho_alpha: Operator,
    rho_omega: Operator,
}

fn check_psd(rho: &Operator, tol: Tolerance) -> Result<()> {
    let eig = hermitian_eigendecompose(rho.as_matrix(), tol)?;
    let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let low = *eig.values.last().expect("non-empty");
    if low < -tol.bound(top) {
        return Err(Error::NotPositive { eigenvalue: low });
    }
    Ok(())
}

impl BoundaryPair {
    pub fn new(rho_alpha: Operator, rho_omega: Operator, tol: Tolerance) -> Result<Self> {
        rho_omega.check_dim(rho_alpha.dim())?;
        check_psd(&rho_alpha, tol)?;
        check_psd(&rho_omega, tol)?;
        let value = (rho_omega.as_matrix() * rho_alpha.as_matrix()).trace().re;
        if (value - 1.0).abs() > tol.bound(1.0) {
            return Err(Error::Normalization { value });
        }
        Ok(BoundaryPair {
            rho_alpha,
            rho_omega,
        })
    }

    /// Rescales `rho_omega` so that `tr(rho_omega rho_alpha) = 1`.
    pub fn normalized(rho_alpha: Operator, rho_omega: Operator, tol: Tolerance) -> Result<Self> {
        rho_omega.check_dim(rho_alpha.dim())?;
        let value = (rho_omega.as_matrix() * rho_alpha.as_matrix()).trace().re;
        if value <= tol.abs {
            return Err(Error::Normalization { value });
        }
        BoundaryPair::new(rho_alpha, rho_omega.scale(cr(1.0 / value)), tol)
    }

    pub fn rho_alpha(&self) -> &Operator {
        &self.rho_alpha
    }

    pub fn rho_omega(&self) -> &Operator {
        &self.rho_omega
    }

    pub fn dim(&self) -> usize {
        self.rho_alpha.dim()
    }
}

#[derive(Clone, Debug)]
pub struct DecoherenceFunctional {
    dim: usize,
    weights: Vec<f64>,
    basis: TraceBasis,
    /// Columns `vec(E_I)`.
    columns: CMatrix,
    form: CMatrix,
    underline: CMatrix,
    positivity: PositivityClass,
    boundary: Option<BoundaryPair>,
}

/// Counts of positive, negative and zero weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityEvidence {
    /// No negative weight.
    PositiveOnSpace,
    /// Negative weights exist but every sampled history has `d(h,h) >= 0`.
    IndefinitePositiveOnSamples,
    /// A sampled history has negative `d(h,h)`.
    NegativeOnSamples,
    /// Negative weights exist and no histories were sampled.
    IndefiniteUnsampled,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomsReport {
    pub hermiticity_residual: f64,
    pub normalization_residual: f64,
    pub ils_hermiticity_residual: f64,
    pub signature: Signature,
    pub weights: Vec<f64>,
    pub positivity: PositivityClass,
    pub min_sampled_probability: Option<f64>,
    pub evidence: PositivityEvidence,
}

fn zero_threshold(weights: &[f64], tol: Tolerance) -> f64 {
    let top = weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    tol.bound(top)
}

fn classify(weights: &[f64], tol: Tolerance) -> PositivityClass {
    let cut = zero_threshold(weights, tol);
    if weights.iter().any(|&w| w < -cut) {
        PositivityClass::Indefinite
    } else if weights.iter().any(|&w| w.abs() <= cut) {
        PositivityClass::PositiveSemidefinite
    } else {
        PositivityClass::PositiveDefinite
    }
}

impl DecoherenceFunctional {
    /// `d(h, h') = tr[rho_omega h^dagger rho_alpha h']`, diagonalized on the
    /// product basis `|i><m|` of the two boundaries' eigenbases with weights
    /// `a_i z_m`.
    pub fn canonical(boundary: BoundaryPair) -> Result<Self> {
        let tol = Tolerance::default();
        let n = boundary.dim();
        let ea = hermitian_eigendecompose(boundary.rho_alpha.as_matrix(), tol)?;
        let ez = hermitian_eigendecompose(boundary.rho_omega.as_matrix(), tol)?;
        let clamp = |v: f64| v.max(0.0);
        let mut terms: Vec<(f64, Operator)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for m in 0..n {
                let w = clamp(ea.values[i]) * clamp(ez.values[m]);
                terms.push((w, Operator::outer(&ea.vector(i), &ez.vector(m))));
            }
        }
        terms.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (weights, elements): (Vec<f64>, Vec<Operator>) = terms.into_iter().unzip();
        let basis = TraceBasis::new(elements, Tolerance::relative(1e-8))?;
        let mut d = DecoherenceFunctional::assemble(weights, basis, tol);
        d.boundary = Some(boundary);
        Ok(d)
    }

    /// Functional with the given weights on a trace-orthonormal basis; the
    /// pair is re-sorted by descending weight.
    pub fn from_weights(weights: Vec<f64>, basis: TraceBasis, tol: Tolerance) -> Result<Self> {
        let n = basis.dim();
        if weights.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
        let sorted: Vec<f64> = order.iter().map(|&k| weights[k]).collect();
        let basis = basis.permuted(&order);
        let (value, scale) =
            sorted
                .iter()
                .zip(basis.elements())
                .fold((0.0, 0.0), |(v, s), (w, e)| {
                    let t = e.trace().norm_sqr();
                    (v + w * t, s + w.abs() * t)
                });
        if (value - 1.0).abs() > tol.bound(scale.max(1.0)) {
            return Err(Error::Normalization { value });
        }
        Ok(DecoherenceFunctional::assemble(sorted, basis, tol))
    }

    /// Functional from its form matrix `G` on row-major flattened operators.
    pub fn from_form(form: &CMatrix, tol: Tolerance) -> Result<Self> {
        let n2 = form.nrows();
        let n = (n2 as f64).sqrt().round() as usize;
        if form.ncols() != n2 {
            return Err(Error::NotSquare {
                rows: n2,
                cols: form.ncols(),
            });
        }
        if n * n != n2 || n == 0 {
            return Err(Error::Schema(format!(
                "form size {n2} is not a square dimension"
            )));
        }
        let eig = hermitian_eigendecompose(form, tol)?;
        let basis = TraceBasis::from_columns(n, &eig.vectors);
        DecoherenceFunctional::from_weights(eig.values, basis, tol)
    }

    /// Functional from its realization on `H (x) H`.
    pub fn from_underline(underline: &CMatrix, tol: Tolerance) -> Result<Self> {
        let n2 = underline.nrows();
        let n = (n2 as f64).sqrt().round() as usize;
        if n * n != n2 || underline.ncols() != n2 {
            return Err(Error::Schema("underline matrix must be N^2 x N^2".into()));
        }
        DecoherenceFunctional::from_form(&from_product_space(underline, n), tol)
    }

    /// Convex (or general real) combination `sum_k lambda_k d_k`.
    pub fn mixture(terms: &[(f64, &DecoherenceFunctional)], tol: Tolerance) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Schema("empty mixture".into()))?;
        let n = first.1.dim;
        let mut form = CMatrix::zeros(n * n, n * n);
        for (lambda, d) in terms {
            if d.dim != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: d.dim,
                });
            }
            form += &d.form * cr(*lambda);
        }
        DecoherenceFunctional::from_form(&form, tol)
    }

    fn assemble(weights: Vec<f64>, basis: TraceBasis, tol: Tolerance) -> Self {
        let n = basis.dim();
        let columns = basis.as_columns();
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            weights.len(),
            weights.iter().map(|&w| cr(w)),
        ));
        let mut form = &columns * diag * columns.adjoint();
        form = (&form + form.adjoint()) * cr(0.5);
        let underline = to_product_space(&form, n);
        let positivity = classify(&weights, tol);
        DecoherenceFunctional {
            dim: n,
            weights,
            basis,
            columns,
            form,
            underline,
            positivity,
            boundary: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &TraceBasis {
        &self.basis
    }

    /// `G` with `d(h, h') = vec(h)^dagger G vec(h')`.
    pub fn form(&self) -> &CMatrix {
        &self.form
    }

    /// `d_` on `H (x) H` with `d(h, h') = tr[(h^dagger (x) h') d_]`.
    pub fn underline(&self) -> &CMatrix {
        &self.underline
    }

    pub fn positivity(&self) -> PositivityClass {
        self.positivity
    }

    pub fn is_positive(&self) -> bool {
        self.positivity != PositivityClass::Indefinite
    }

    /// Boundary operators, when built by [`DecoherenceFunctional::canonical`].
    pub fn boundary(&self) -> Option<&BoundaryPair> {
        self.boundary.as_ref()
    }

    /// Components `tr(E_I^dagger h)` in the eigenbasis.
    pub fn components(&self, h: &Operator) -> Result<CVector> {
        h.check_dim(self.dim)?;
        Ok(self.columns.adjoint() * h.to_vec())
    }

    pub fn evaluate(&self, h: &Operator, h2: &Operator) -> Result<C64> {
        let a = self.components(h)?;
        let b = self.components(h2)?;
        Ok(self
            .weights
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(&w, (x, y))| x.conj() * y * w)
            .sum())
    }

    /// `tr[(h^dagger (x) h') d_]`, an independent evaluation route.
    pub fn evaluate_underline(&self, h: &Operator, h2: &Operator) -> Result<C64> {
        h.check_dim(self.dim)?;
        h2.check_dim(self.dim)?;
        let n = self.dim;
        let hd = h.adjoint();
        let hd = hd.as_matrix();
        let h2 = h2.as_matrix();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        acc += hd[(i, j)] * h2[(k, l)] * self.underline[(j * n + l, i * n + k)];
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Matrix of `d(h_a, h_b)`.
    pub fn pair_matrix(&self, ops: &[Operator]) -> Result<CMatrix> {
        let n2 = self.dim * self.dim;
        let mut flat = CMatrix::zeros(n2, ops.len());
        for (k, h) in ops.iter().enumerate() {
            h.check_dim(self.dim)?;
            flat.set_column(k, &h.to_vec());
        }
        let coords = self.columns.adjoint() * flat;
        let mut weighted = coords.clone();
        for (r, &w) in self.weights.iter().enumerate() {
            let mut row = weighted.row_mut(r);
            row *= cr(w);
        }
        Ok(coords.adjoint() * weighted)
    }

    /// `d(h, h)`, real by Hermiticity.
    pub fn probability(&self, h: &Operator) -> Result<f64> {
        Ok(self.evaluate(h, h)?.re)
    }

    fn zero_cut(&self, tol: Tolerance) -> f64 {
        zero_threshold(&self.weights, tol)
    }

    pub fn signature(&self, tol: Tolerance) -> Signature {
        let cut = self.zero_cut(tol);
        let mut s = Signature {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for &w in &self.weights {
            if w > cut {
                s.positive += 1;
            } else if w < -cut {
                s.negative += 1;
            } else {
                s.zero += 1;
            }
        }
        s
    }

    /// Number of non-zero weights, the dimension of history space modulo
    /// the nullspace.
    pub fn rank(&self, tol: Tolerance) -> usize {
        let s = self.signature(tol);
        s.positive + s.negative
    }

    /// Indices of basis elements with zero weight; they span the nullspace.
    pub fn null_indices(&self, tol: Tolerance) -> Vec<usize> {
        let cut = self.zero_cut(tol);
        (0..self.weights.len())
            .filter(|&k| self.weights[k].abs() <= cut)
            .collect()
    }

    /// Basis operators spanning the nullspace.
    pub fn nullspace(&self, tol: Tolerance) -> Vec<Operator> {
        self.null_indices(tol)
            .into_iter()
            .map(|k| self.basis.get(k).clone())
            .collect()
    }

    /// Index ranges of equal weights.
    pub fn eigen_blocks(&self, tol: Tolerance) -> Vec<std::ops::Range<usize>> {
        let top = self.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        let gap = tol.bound(top);
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.weights.len() {
            if k == self.weights.len() || (self.weights[k - 1] - self.weights[k]).abs() > gap {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// `||d_^dagger - M d_ M||_F` with `M` the swap on `H (x) H`.
    pub fn ils_hermiticity_residual(&self) -> f64 {
        let m = swap_operator(self.dim);
        (self.underline.adjoint() - &m * &self.underline * &m).norm()
    }

    /// Checks Hermiticity, normalization and positivity. When samples are
    /// given, `d(h, h)` is evaluated on every sampled history.
    pub fn axioms_report(&self, samples: Option<&[HistorySet]>, tol: Tolerance) -> AxiomsReport {
        // Hermiticity over the matrix units, read off the H (x) H realization.
        let g = from_product_space(&self.underline, self.dim);
        let hermiticity_residual = (&g - g.adjoint()).norm();
        let identity = Operator::identity(self.dim);
        let one = self
            .evaluate(&identity, &identity)
            .expect("dimensions agree");
        let normalization_residual = (one - cr(1.0)).norm();
        let signature = self.signature(tol);
        let min_sampled_probability = samples.map(|sets| {
            sets.iter()
                .flat_map(|s| s.histories().iter())
                .map(|h| self.probability(h.op()).unwrap_or(f64::NAN))
                .fold(f64::INFINITY, f64::min)
        });
        let evidence = if signature.negative == 0 {
            PositivityEvidence::PositiveOnSpace
        } else {
            match min_sampled_probability {
                None => PositivityEvidence::IndefiniteUnsampled,
                Some(p) if p >= -tol.bound(1.0) => PositivityEvidence::IndefinitePositiveOnSamples,
                Some(_) => PositivityEvidence::NegativeOnSamples,
            }
        };
        AxiomsReport {
            hermiticity_residual,
            normalization_residual,
            ils_hermiticity_residual: self.ils_hermiticity_residual(),
            signature,
            weights: self.weights.clone(),
            positivity: self.positivity,
            min_sampled_probability,
            evidence,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{x_projectors, History};
    use crate::operator::kron;
    use crate::random::{complex_gaussian, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(entries: &[f64]) -> Operator {
        let n = entries.len();
        Operator::from_fn(n, |i, j| if i == j { cr(entries[i]) } else { cr(0.0) })
    }

    fn plus() -> Operator {
        x_projectors().0
    }

    fn canonical(a: Operator, z: Operator) -> DecoherenceFunctional {
        DecoherenceFunctional::canonical(BoundaryPair::new(a, z, Tolerance::default()).unwrap())
            .unwrap()
    }

    #[test]
    fn canonical_weight_examples() {
        let d = canonical(diag(&[1.0, 0.0]), Operator::identity(2));
        assert_eq!(d.weights(), &[1.0, 1.0, 0.0, 0.0]);
        let want = [(0, 0), (0, 1), (1, 0), (1, 1)];
        for (k, &(i, m)) in want.iter().enumerate() {
            assert!(d.basis().get(k).distance(&Operator::matrix_unit(2, i, m)) < 1e-15);
        }
        assert_eq!(d.positivity(), PositivityClass::PositiveSemidefinite);

        let d = canonical(plus(), plus());
        assert!((d.weights()[0] - 1.0).abs() < 1e-14);
        assert!(d.weights()[1..].iter().all(|w| w.abs() < 1e-14));
        assert!(d.basis().get(0).distance(&plus()) < 1e-14);

        let d = canonical(diag(&[0.5, 0.5]), Operator::identity(2));
        assert!(d.weights().iter().all(|w| (w - 0.5).abs() < 1e-15));
        assert_eq!(d.positivity(), PositivityClass::PositiveDefinite);
    }

    #[test]
    fn boundary_validation() {
        let tol = Tolerance::default();
        assert!(matches!(
            BoundaryPair::new(diag(&[1.0, -0.5]), Operator::identity(2), tol),
            Err(Error::NotPositive { .. })
        ));
        assert!(matches!(
            BoundaryPair::new(diag(&[1.0, 1.0]), Operator::identity(2), tol),
            Err(Error::Normalization { .. })
        ));
        let b = BoundaryPair::normalized(diag(&[1.0, 1.0]), Operator::identity(2), tol).unwrap();
        assert!((b.rho_omega().get(0, 0) - cr(0.5)).norm() < 1e-15);
    }

    #[test]
    fn evaluate_examples() {
        let d = canonical(diag(&[1.0, 0.0]), Operator::identity(2));
        let p0 = Operator::basis_projector(2, 0);
        assert!((d.evaluate(&p0, &p0).unwrap() - cr(1.0)).norm() < 1e-15);

        let d = canonical(plus(), plus());
        let p1 = Operator::basis_projector(2, 1);
        assert!((d.evaluate(&p0, &p1).unwrap() - cr(0.25)).norm() < 1e-14);
        let i = Operator::identity(2);
        assert!((d.evaluate(&i, &i).unwrap() - cr(1.0)).norm() < 1e-14);
        assert!(d.evaluate(&p0, &Operator::identity(3)).is_err());
    }

    #[test]
    fn from_weights_identity_direction() {
        // All weight on E_1 = I/sqrt 2. Weight 1 would give d(1,1) = 2, so
        // normalization forces weight 1/2 and d(h, h') = tr(h)^* tr(h') / 4.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = Operator::from_real_rows(&[&[0.0, s], &[s, 0.0]]).unwrap();
        let y = Operator::from_fn(2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -s),
            (1, 0) => C64::new(0.0, s),
            _ => cr(0.0),
        });
        let z = Operator::from_real_rows(&[&[s, 0.0], &[0.0, -s]]).unwrap();
        let e1 = Operator::identity(2).scale(cr(s));
        let basis = TraceBasis::new(vec![e1, x, y, z], Tolerance::default()).unwrap();
        assert!(matches!(
            DecoherenceFunctional::from_weights(
                vec![1.0, 0.0, 0.0, 0.0],
                basis.clone(),
                Tolerance::default()
            ),
            Err(Error::Normalization { .. })
        ));
        let d = DecoherenceFunctional::from_weights(
            vec![0.5, 0.0, 0.0, 0.0],
            basis,
            Tolerance::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = Operator::new(complex_gaussian(2, 2, &mut rng)).unwrap();
        let h2 = Operator::new(complex_gaussian(2, 2, &mut rng)).unwrap();
        let want = h.trace().conj() * h2.trace() * 0.25;
        assert!((d.evaluate(&h, &h2).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn from_weights_rejects_unnormalized_and_flags_indefinite() {
        let basis = TraceBasis::matrix_units(2);
        assert!(matches!(
            DecoherenceFunctional::from_weights(
                vec![1.0, 0.0, 0.0, 1.0],
                basis.clone(),
                Tolerance::default()
            ),
            Err(Error::Normalization { .. })
        ));
        // |0><0| and |1><1| carry the trace; |0><1| gets a negative weight
        let d = DecoherenceFunctional::from_weights(
            vec![0.7, -0.2, 0.1, 0.3],
            basis,
            Tolerance::default(),
        )
        .unwrap();
        assert_eq!(d.positivity(), PositivityClass::Indefinite);
        assert_eq!(d.weights(), &[0.7, 0.3, 0.1, -0.2]);
    }

    #[test]
    fn underline_of_diagonal_canonical() {
        let a = [0.6, 0.4];
        let z = [1.5, 0.5];
        let d = canonical(diag(&a), diag(&[z[0] / 1.1, z[1] / 1.1]));
        let mut want = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for m in 0..2 {
                want[(i * 2 + m, m * 2 + i)] = cr(a[i] * z[m] / 1.1);
            }
        }
        assert!((d.underline() - want).norm() < 1e-15);
        assert!((d.underline().trace() - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn dual_route_and_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=4 {
            let ra = Operator::new(random_density(n, &mut rng)).unwrap();
            let rz = Operator::new(random_density(n, &mut rng)).unwrap();
            let b = BoundaryPair::normalized(ra.clone(), rz.clone(), Tolerance::default()).unwrap();
            let rz = b.rho_omega().clone();
            let d = DecoherenceFunctional::canonical(b).unwrap();
            for _ in 0..20 {
                let h = Operator::new(complex_gaussian(n, n, &mut rng)).unwrap();
                let h2 = Operator::new(complex_gaussian(n, n, &mut rng)).unwrap();
                let x = d.evaluate(&h, &h2).unwrap();
                let y = d.evaluate_underline(&h, &h2).unwrap();
                let z =
                    (rz.as_matrix() * h.adjoint().as_matrix() * ra.as_matrix() * h2.as_matrix())
                        .trace();
                assert!((x - y).norm() <= 1e-10);
                assert!((x - z).norm() <= 1e-12);
            }
            assert!(d.ils_hermiticity_residual() <= 1e-12);
            // d_ = sum w E (x) E^dagger
            let mut direct = CMatrix::zeros(n * n, n * n);
            for (w, e) in d.weights().iter().zip(d.basis().elements()) {
                direct += kron(e.as_matrix(), &e.as_matrix().adjoint()) * cr(*w);
            }
            assert!((direct - d.underline()).norm() < 1e-13);
        }
    }

    #[test]
    fn form_roundtrip_and_mixture() {
        let d1 = canonical(diag(&[1.0, 0.0]), Operator::identity(2));
        let d2 = canonical(plus(), plus());
        let back = DecoherenceFunctional::from_form(d1.form(), Tolerance::default()).unwrap();
        assert!((back.form() - d1.form()).norm() < 1e-14);
        let back =
            DecoherenceFunctional::from_underline(d2.underline(), Tolerance::default()).unwrap();
        assert!((back.form() - d2.form()).norm() < 1e-14);
        let mix = DecoherenceFunctional::mixture(&[(0.5, &d1), (0.5, &d2)], Tolerance::default())
            .unwrap();
        let h = Operator::basis_projector(2, 0);
        let want = 0.5 * d1.probability(&h).unwrap() + 0.5 * d2.probability(&h).unwrap();
        assert!((mix.probability(&h).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn pair_matrix_matches_evaluate() {
        let d = canonical(diag(&[0.5, 0.5]), Operator::identity(2));
        let (xp, xm) = x_projectors();
        let ops: Vec<Operator> = vec![xp.clone(), xm.clone(), Operator::basis_projector(2, 0)];
        let pm = d.pair_matrix(&ops).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((pm[(a, b)] - d.evaluate(&ops[a], &ops[b]).unwrap()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn axioms_for_canonical_and_indefinite() {
        let d = canonical(diag(&[1.0, 0.0]), Operator::identity(2));
        let r = d.axioms_report(None, Tolerance::default());
        assert!(r.hermiticity_residual <= 1e-12);
        assert!(r.normalization_residual <= 1e-12);
        assert!(r.ils_hermiticity_residual <= 1e-12);
        assert_eq!(r.evidence, PositivityEvidence::PositiveOnSpace);

        let d = DecoherenceFunctional::from_weights(
            vec![0.7, -0.2, 0.1, 0.3],
            TraceBasis::matrix_units(2),
            Tolerance::default(),
        )
        .unwrap();
        let r = d.axioms_report(None, Tolerance::default());
        assert_eq!(r.evidence, PositivityEvidence::IndefiniteUnsampled);
        let (xp, xm) = x_projectors();
        let set = HistorySet::new(vec![
            History::from_projectors(vec![xp]).unwrap(),
            History::from_projectors(vec![xm]).unwrap(),
        ])
        .unwrap();
        let r = d.axioms_report(Some(std::slice::from_ref(&set)), Tolerance::default());
        // d(P_x+, P_x+) = (0.7 + 0.3 + 0.1 - 0.2) / 4 > 0
        assert_eq!(r.evidence, PositivityEvidence::IndefinitePositiveOnSamples);
        assert!((r.min_sampled_probability.unwrap() - 0.225).abs() < 1e-14);
    }

    #[test]
    fn nullspace_and_rank() {
        let d = canonical(diag(&[1.0, 0.0]), Operator::identity(2));
        assert_eq!(d.rank(Tolerance::default()), 2);
        let null = d.nullspace(Tolerance::default());
        assert_eq!(null.len(), 2);
        for h in &null {
            let g = Operator::identity(2);
            assert!(d.evaluate(h, &g).unwrap().norm() < 1e-15);
        }
        assert_eq!(d.eigen_blocks(Tolerance::default()), vec![0..2, 2..4]);
    }
}
