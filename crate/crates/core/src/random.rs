//! Seeded random matrices used by the d-unitary generators and by tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{c, cr, CMatrix, CVector};

/// Matrix of i.i.d. standard complex Gaussians.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

pub fn random_ket<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let v = complex_gaussian(n, 1, rng).column(0).into_owned();
    let norm = v.norm();
    v / cr(norm)
}

/// Random Hermitian matrix `(G + G^dagger) / 2`.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = complex_gaussian(n, n, rng);
    (&g + g.adjoint()) * cr(0.5)
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = complex_gaussian(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            cr(1.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Haar unitary scaled to unit determinant.
pub fn haar_special_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut u = haar_unitary(n, rng);
    let det = u.determinant();
    if n > 0 && det.norm() > 0.0 {
        let root = (det / det.norm()).powf(1.0 / n as f64);
        u /= root;
    }
    u
}

/// Full-rank density matrix drawn from the induced (Ginibre) measure.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = complex_gaussian(n, n, rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_unitary_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let u = haar_special_unitary(5, &mut a);
        let v = haar_special_unitary(5, &mut b);
        assert_eq!(u, v);
        assert!((u.adjoint() * &u - CMatrix::identity(5, 5)).norm() < 1e-13);
        assert!((u.determinant() - cr(1.0)).norm() < 1e-12);
    }

    #[test]
    fn density_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(4, &mut rng);
        assert!((rho.trace() - cr(1.0)).norm() < 1e-14);
        assert!((&rho - rho.adjoint()).norm() < 1e-14);
    }
}
