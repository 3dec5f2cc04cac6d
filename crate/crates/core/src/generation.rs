//! Exhaustive consistent sets generated from a functional's geometry: its
//! eigenvector set, and new sets obtained by `d`-unitary rotation followed by
//! rescaling back onto the consistency sphere.
//!
//! A `d`-unitary `V` preserves the form, `V^* d V = d`. In the eigenbasis of
//! `d` with `W = |w|` and `delta = sign(w)` it factors as
//! `V = W^{-1/2} U W^{1/2}` with `U^dagger delta U = delta`. Zero-weight
//! directions are left fixed.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consistency::ZERO_PROBABILITY;
use crate::error::{Error, Result};
use crate::functional::{DecoherenceFunctional, PositivityClass};
use crate::operator::{cr, operator_rank, CMatrix, CVector, Operator, Tolerance, C64};
use crate::random::{complex_gaussian, haar_special_unitary, random_hermitian};

/// Scale of the Lie-algebra element used for indefinite functionals.
const INDEFINITE_STEP: f64 = 0.5;

/// `D_I = tr(E_I^dagger) E_I` with probabilities `p_I = w_I |tr E_I|^2`.
#[derive(Clone, Debug)]
pub struct EigenvectorSet {
    pub ops: Vec<Operator>,
    pub probabilities: Vec<f64>,
}

pub fn eigenvector_set(d: &DecoherenceFunctional) -> EigenvectorSet {
    let mut ops = Vec::with_capacity(d.weights().len());
    let mut probabilities = Vec::with_capacity(d.weights().len());
    for (&w, e) in d.weights().iter().zip(d.basis().elements()) {
        let t = e.trace().conj();
        ops.push(e.scale(t));
        probabilities.push(w * t.norm_sqr());
    }
    EigenvectorSet { ops, probabilities }
}

/// A transformation of operator space preserving `d`.
#[derive(Clone, Debug)]
pub struct DUnitary {
    dim: usize,
    /// Acts on row-major flattened operators.
    matrix: CMatrix,
    inverse: CMatrix,
    /// `U` in eigen coordinates of `d`; identity on zero-weight directions.
    u_factor: CMatrix,
    w_sqrt: Vec<f64>,
    w_inv_sqrt: Vec<f64>,
}

struct EigenFrame {
    q: CMatrix,
    /// Indices of non-zero weights.
    range: Vec<usize>,
    w_sqrt: Vec<f64>,
    signs: Vec<f64>,
}

fn eigen_frame(d: &DecoherenceFunctional, tol: Tolerance) -> EigenFrame {
    let null = d.null_indices(tol);
    let range: Vec<usize> = (0..d.weights().len())
        .filter(|k| !null.contains(k))
        .collect();
    let w_sqrt = d
        .weights()
        .iter()
        .enumerate()
        .map(|(k, w)| {
            if null.contains(&k) {
                1.0
            } else {
                w.abs().sqrt()
            }
        })
        .collect();
    let signs = range.iter().map(|&k| d.weights()[k].signum()).collect();
    EigenFrame {
        q: d.basis().as_columns(),
        range,
        w_sqrt,
        signs,
    }
}

impl DUnitary {
    /// Builds `V` from `U` acting on the non-zero-weight eigen coordinates
    /// (in the order of `d`'s weights).
    pub fn from_u(d: &DecoherenceFunctional, u_range: &CMatrix, tol: Tolerance) -> Result<Self> {
        let frame = eigen_frame(d, tol);
        let r = frame.range.len();
        if u_range.nrows() != r || u_range.ncols() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: u_range.nrows(),
            });
        }
        let delta = CMatrix::from_diagonal(&DVector::from_iterator(
            r,
            frame.signs.iter().map(|&s| cr(s)),
        ));
        let residual = (u_range.adjoint() * &delta * u_range - &delta).norm();
        if residual > tol.bound(r as f64).max(1e-10) {
            return Err(Error::NotUnitary { residual });
        }
        let n2 = frame.q.nrows();
        let mut u = CMatrix::identity(n2, n2);
        for (a, &ia) in frame.range.iter().enumerate() {
            for (b, &ib) in frame.range.iter().enumerate() {
                u[(ia, ib)] = u_range[(a, b)];
            }
        }
        let w_sqrt = frame.w_sqrt;
        let w_inv_sqrt: Vec<f64> = w_sqrt.iter().map(|s| 1.0 / s).collect();
        // V_e = W^{-1/2} U W^{1/2}, and its inverse W^{-1/2} delta U^dagger delta W^{1/2}
        let mut ve = u.clone();
        for i in 0..n2 {
            for j in 0..n2 {
                ve[(i, j)] *= w_inv_sqrt[i] * w_sqrt[j];
            }
        }
        let mut full_delta = vec![1.0; n2];
        for (a, &ia) in frame.range.iter().enumerate() {
            full_delta[ia] = frame.signs[a];
        }
        let mut ve_inv = u.adjoint();
        for i in 0..n2 {
            for j in 0..n2 {
                ve_inv[(i, j)] *= w_inv_sqrt[i] * w_sqrt[j] * full_delta[i] * full_delta[j];
            }
        }
        let matrix = &frame.q * ve * frame.q.adjoint();
        let inverse = &frame.q * ve_inv * frame.q.adjoint();
        Ok(DUnitary {
            dim: d.dim(),
            matrix,
            inverse,
            u_factor: u,
            w_sqrt,
            w_inv_sqrt,
        })
    }

    pub fn identity(d: &DecoherenceFunctional, tol: Tolerance) -> Self {
        let r = d.rank(tol);
        DUnitary::from_u(d, &CMatrix::identity(r, r), tol).expect("identity preserves any form")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &CMatrix {
        &self.inverse
    }

    pub fn u_factor(&self) -> &CMatrix {
        &self.u_factor
    }

    pub fn w_sqrt(&self) -> &[f64] {
        &self.w_sqrt
    }

    pub fn w_inv_sqrt(&self) -> &[f64] {
        &self.w_inv_sqrt
    }

    pub fn apply(&self, h: &Operator) -> Operator {
        Operator::from_vec(self.dim, &(&self.matrix * h.to_vec()))
    }

    pub fn apply_inverse(&self, h: &Operator) -> Operator {
        Operator::from_vec(self.dim, &(&self.inverse * h.to_vec()))
    }

    /// `||V^dagger G V - G||_F` for the form matrix `G` of `d`.
    pub fn residual(&self, d: &DecoherenceFunctional) -> f64 {
        let g = d.form();
        (self.matrix.adjoint() * g * &self.matrix - g).norm()
    }

    /// `||V - W^{-1/2} U W^{1/2}||_F` in eigen coordinates.
    pub fn factorization_residual(&self, d: &DecoherenceFunctional) -> f64 {
        let q = d.basis().as_columns();
        let ve = q.adjoint() * &self.matrix * &q;
        let n2 = ve.nrows();
        let mut want = self.u_factor.clone();
        for i in 0..n2 {
            for j in 0..n2 {
                want[(i, j)] *= self.w_inv_sqrt[i] * self.w_sqrt[j];
            }
        }
        (ve - want).norm()
    }

    pub fn determinant(&self) -> C64 {
        self.matrix.determinant()
    }
}

fn exp_generator(x: &CMatrix) -> CMatrix {
    x.clone().exp()
}

/// Seeded random `d`-unitary. For positive `d`, `U` is Haar on `SU(r)`; for
/// indefinite `d`, `U = exp(X)` with `X = delta i H` traceless, which lies in
/// the identity component of the pseudo-unitary group.
pub fn random_dunitary(d: &DecoherenceFunctional, seed: u64, tol: Tolerance) -> Result<DUnitary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = eigen_frame(d, tol);
    let r = frame.range.len();
    let u = if frame.signs.iter().all(|&s| s > 0.0) {
        haar_special_unitary(r, &mut rng)
    } else {
        let h = random_hermitian(r, &mut rng);
        let mut x = CMatrix::from_fn(r, r, |i, j| C64::new(0.0, frame.signs[i]) * h[(i, j)]);
        let shift = x.trace() / cr(r as f64);
        for i in 0..r {
            x[(i, i)] -= shift;
        }
        exp_generator(&(x * cr(INDEFINITE_STEP)))
    };
    DUnitary::from_u(d, &u, tol)
}

/// Seeded random `d`-unitary fixing the identity operator, so that
/// rotate-rescale leaves every probability unchanged. `U` fixes
/// `1~ = W^{1/2} c(1)` and is Haar on its orthogonal complement.
pub fn probability_preserving_dunitary(
    d: &DecoherenceFunctional,
    seed: u64,
    tol: Tolerance,
) -> Result<DUnitary> {
    if d.positivity() == PositivityClass::Indefinite {
        return Err(Error::Indefinite);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = eigen_frame(d, tol);
    let r = frame.range.len();
    let one = Operator::identity(d.dim());
    let c1 = d.components(&one)?;
    let tilde = CVector::from_iterator(r, frame.range.iter().map(|&k| c1[k] * frame.w_sqrt[k]));
    let norm = tilde.norm();
    if norm <= tol.abs {
        return Err(Error::Normalization { value: 0.0 });
    }
    let mut seedmat = complex_gaussian(r, r, &mut rng);
    seedmat.set_column(0, &(&tilde / cr(norm)));
    let mut q = seedmat.qr().q();
    // make the first column exactly the normalized 1~
    let phase = q.column(0).dotc(&(&tilde / cr(norm)));
    let mut col = q.column_mut(0);
    col *= phase / cr(phase.norm());
    let mut inner = CMatrix::identity(r, r);
    if r > 1 {
        let haar = haar_special_unitary(r - 1, &mut rng);
        inner.view_mut((1, 1), (r - 1, r - 1)).copy_from(&haar);
    }
    let u = &q * inner * q.adjoint();
    DUnitary::from_u(d, &u, tol)
}

/// Rescaling rule for a rotated member `Vh`. Non-null `h` gets
/// `d(Vh, 1) / d(h, h)`. For null `h` it is zero when `d(Vh, 1)` is not,
/// and otherwise the coefficient of `h` in the expansion of `V^{-1} 1`.
pub fn rescale_factor(
    probability: f64,
    overlap_with_one: C64,
    expansion_coefficient: C64,
    tol: Tolerance,
) -> C64 {
    if probability.abs() > ZERO_PROBABILITY {
        overlap_with_one / probability
    } else if overlap_with_one.norm() > tol.bound(1.0) {
        cr(0.0)
    } else {
        expansion_coefficient
    }
}

/// Maps a spanning, pairwise `d`-orthogonal set `{h}` to `{t_h V h}`, which
/// is exhaustive and consistent.
pub fn rotate_rescale(
    d: &DecoherenceFunctional,
    v: &DUnitary,
    set: &[Operator],
    tol: Tolerance,
) -> Result<Vec<Operator>> {
    let n = d.dim();
    for h in set {
        h.check_dim(n)?;
    }
    let rank = operator_rank(set, tol);
    if rank < n * n || set.len() != n * n {
        return Err(Error::NotSpanning { rank, dim: n * n });
    }
    let pm = d.pair_matrix(set)?;
    let scale = (0..set.len()).fold(1.0f64, |m, a| m.max(pm[(a, a)].norm()));
    for a in 0..set.len() {
        for b in a + 1..set.len() {
            let value = pm[(a, b)].norm();
            if value > tol.bound(scale) {
                return Err(Error::NotOrthogonal {
                    first: a,
                    second: b,
                    value,
                });
            }
        }
    }
    let one = Operator::identity(n);
    // expansion of V^{-1} 1 in the set
    let mut a = CMatrix::zeros(n * n, set.len());
    for (k, h) in set.iter().enumerate() {
        a.set_column(k, &h.to_vec());
    }
    let target = v.apply_inverse(&one).to_vec();
    let coeffs = a
        .lu()
        .solve(&target)
        .ok_or(Error::NotSpanning { rank, dim: n * n })?;
    let mut out = Vec::with_capacity(set.len());
    for (k, h) in set.iter().enumerate() {
        let vh = v.apply(h);
        let overlap = d.evaluate(&vh, &one)?;
        let t = rescale_factor(pm[(k, k)].re, overlap, coeffs[k], tol);
        out.push(vh.scale(t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{check_operators, Mode};
    use crate::functional::BoundaryPair;
    use crate::histories::x_projectors;
    use crate::operator::{sum_operators, TraceBasis};
    use crate::random::random_density;

    fn diag(entries: &[f64]) -> Operator {
        let n = entries.len();
        Operator::from_fn(n, |i, j| if i == j { cr(entries[i]) } else { cr(0.0) })
    }

    fn canonical(a: Operator, z: Operator) -> DecoherenceFunctional {
        DecoherenceFunctional::canonical(
            BoundaryPair::normalized(a, z, Tolerance::default()).unwrap(),
        )
        .unwrap()
    }

    fn random_positive(n: usize, seed: u64) -> DecoherenceFunctional {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Operator::new(random_density(n, &mut rng)).unwrap();
        let z = Operator::new(random_density(n, &mut rng)).unwrap();
        canonical(a, z)
    }

    /// Signature (3, 1) in N = 2: the identity direction carries weight 1/2,
    /// the remaining traceless Pauli directions get 1, 1 and -1/2.
    fn indefinite() -> DecoherenceFunctional {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e1 = Operator::identity(2).scale(cr(s));
        let x = Operator::from_real_rows(&[&[0.0, s], &[s, 0.0]]).unwrap();
        let y = Operator::from_fn(2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -s),
            (1, 0) => C64::new(0.0, s),
            _ => cr(0.0),
        });
        let z = Operator::from_real_rows(&[&[s, 0.0], &[0.0, -s]]).unwrap();
        let basis = TraceBasis::new(vec![e1, x, y, z], Tolerance::default()).unwrap();
        DecoherenceFunctional::from_weights(vec![0.5, 1.0, 1.0, -0.5], basis, Tolerance::default())
            .unwrap()
    }

    #[test]
    fn eigenvector_set_diagonal_boundaries() {
        let d = canonical(diag(&[0.7, 0.3]), diag(&[1.0, 1.0]));
        let set = eigenvector_set(&d);
        let mut nonzero: Vec<(Operator, f64)> = set
            .ops
            .iter()
            .cloned()
            .zip(set.probabilities.iter().cloned())
            .filter(|(h, _)| h.frobenius_norm() > 1e-14)
            .collect();
        nonzero.sort_by(|a, b| b.1.total_cmp(&a.1));
        assert_eq!(nonzero.len(), 2);
        assert!(nonzero[0].0.distance(&Operator::basis_projector(2, 0)) < 1e-15);
        assert!((nonzero[0].1 - 0.7).abs() < 1e-15);
        assert!((nonzero[1].1 - 0.3).abs() < 1e-15);
        let total = sum_operators(&set.ops).unwrap();
        assert!(total.distance(&Operator::identity(2)) < 1e-12);
    }

    #[test]
    fn eigenvector_set_pure_boundaries() {
        // rho_alpha = |0><0|, rho_omega = 2|+><+|: single member P_z0 P_x+ with p = 1
        let plus = x_projectors().0;
        let d = canonical(diag(&[1.0, 0.0]), plus.scale(cr(2.0)));
        let set = eigenvector_set(&d);
        let pos: Vec<usize> = (0..4).filter(|&k| set.probabilities[k] > 1e-12).collect();
        assert_eq!(pos.len(), 1);
        let want = &Operator::basis_projector(2, 0) * &plus;
        assert!(set.ops[pos[0]].distance(&want) < 1e-14);
        assert!((set.probabilities[pos[0]] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvector_set_identity_only() {
        let d = indefinite();
        let set = eigenvector_set(&d);
        let nonzero: Vec<&Operator> = set
            .ops
            .iter()
            .filter(|h| h.frobenius_norm() > 1e-14)
            .collect();
        assert_eq!(nonzero.len(), 1);
        assert!(nonzero[0].distance(&Operator::identity(2)) < 1e-14);
    }

    #[test]
    fn identity_u_gives_identity_v() {
        let d = random_positive(3, 1);
        let v = DUnitary::identity(&d, Tolerance::default());
        assert!((v.matrix() - CMatrix::identity(9, 9)).norm() < 1e-12);
    }

    #[test]
    fn random_dunitary_positive_and_indefinite() {
        let tol = Tolerance::default();
        for seed in 0..5 {
            let d = random_positive(3, 100 + seed);
            let v = random_dunitary(&d, seed, tol).unwrap();
            assert!(v.residual(&d) <= 1e-10);
            assert!(v.factorization_residual(&d) <= 1e-10);
            assert!((v.determinant().norm() - 1.0).abs() < 1e-9);
            let again = random_dunitary(&d, seed, tol).unwrap();
            assert_eq!(v.matrix(), again.matrix());
        }
        let d = indefinite();
        let v = random_dunitary(&d, 7, tol).unwrap();
        let delta = CMatrix::from_diagonal(&DVector::from_vec(vec![
            cr(1.0),
            cr(1.0),
            cr(1.0),
            cr(-1.0),
        ]));
        let u = v.u_factor();
        assert!((u.adjoint() * &delta * u - &delta).norm() <= 1e-10);
        assert!(v.residual(&d) <= 1e-10);
    }

    #[test]
    fn rotate_identity_returns_eigenvector_set() {
        let tol = Tolerance::default();
        let d = random_positive(2, 5);
        let v = DUnitary::identity(&d, tol);
        let out = rotate_rescale(&d, &v, d.basis().elements(), tol).unwrap();
        let set = eigenvector_set(&d);
        for (a, b) in out.iter().zip(&set.ops) {
            assert!(a.distance(b) < 1e-12);
        }
    }

    #[test]
    fn rotate_rescale_is_exhaustive_and_consistent() {
        let tol = Tolerance::default();
        for seed in 0..10 {
            let d = random_positive(3, 200 + seed);
            let v = random_dunitary(&d, seed, tol).unwrap();
            let out = rotate_rescale(&d, &v, d.basis().elements(), tol).unwrap();
            let r = check_operators(&d, &out, Mode::Medium, tol).unwrap();
            assert!(r.exhaustion_residual <= 1e-9);
            assert!(r.consistent, "{:?}", r.max_offdiag);
            assert!(r.sum_rule_residual.unwrap() <= 1e-9);
        }
    }

    #[test]
    fn rotate_rescale_with_nullspace() {
        let tol = Tolerance::default();
        let d = canonical(diag(&[1.0, 0.0]), diag(&[0.6, 0.4]));
        let v = random_dunitary(&d, 3, tol).unwrap();
        assert!(v.residual(&d) <= 1e-10);
        let out = rotate_rescale(&d, &v, d.basis().elements(), tol).unwrap();
        let r = check_operators(&d, &out, Mode::Medium, tol).unwrap();
        assert!(r.exhaustion_residual <= 1e-9);
        assert!(r.consistent);
        let positive = r.probabilities.iter().filter(|&&p| p > 1e-10).count();
        assert!(positive <= 2);
    }

    #[test]
    fn rescale_factor_rules() {
        let tol = Tolerance::default();
        assert_eq!(rescale_factor(0.5, cr(0.25), cr(9.0), tol), cr(0.5));
        assert_eq!(rescale_factor(0.0, cr(0.3), cr(9.0), tol), cr(0.0));
        assert_eq!(rescale_factor(0.0, cr(0.0), cr(9.0), tol), cr(9.0));
    }

    #[test]
    fn rotate_rescale_rejects_bad_input() {
        let tol = Tolerance::default();
        let d = random_positive(2, 9);
        let v = DUnitary::identity(&d, tol);
        let short = &d.basis().elements()[..3];
        assert!(matches!(
            rotate_rescale(&d, &v, short, tol),
            Err(Error::NotSpanning { .. })
        ));
        let units = TraceBasis::matrix_units(2);
        assert!(matches!(
            rotate_rescale(&d, &v, units.elements(), tol),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn probability_preserving_keeps_probabilities() {
        let tol = Tolerance::default();
        let d = random_positive(3, 44);
        let base = eigenvector_set(&d);
        let c1 = d.components(&Operator::identity(3)).unwrap();
        let norm: f64 = d
            .weights()
            .iter()
            .zip(c1.iter())
            .map(|(w, c)| w * c.norm_sqr())
            .sum();
        assert!((norm - 1.0).abs() < 1e-12);
        for seed in 0..5 {
            let v = probability_preserving_dunitary(&d, seed, tol).unwrap();
            assert!(
                v.apply(&Operator::identity(3))
                    .distance(&Operator::identity(3))
                    < 1e-10
            );
            let out = rotate_rescale(&d, &v, d.basis().elements(), tol).unwrap();
            let r = check_operators(&d, &out, Mode::Medium, tol).unwrap();
            let mut a = r.probabilities.clone();
            let mut b = base.probabilities.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
        assert!(matches!(
            probability_preserving_dunitary(&indefinite(), 0, tol),
            Err(Error::Indefinite)
        ));
    }
}
