//! Oracles and generators shared by the integration tests. The oracles use
//! nalgebra directly and none of the library's evaluation code.

#![allow(dead_code)]

use decoherence::functional::{BoundaryPair, DecoherenceFunctional};
use decoherence::random::{complex_gaussian, haar_unitary, random_ket};
use decoherence::{CMatrix, Operator, Tolerance, TraceBasis, C64};
use rand::Rng;

/// `tr[rho_omega h^dagger rho_alpha h']`.
pub fn trace_oracle(ra: &CMatrix, ro: &CMatrix, h: &CMatrix, h2: &CMatrix) -> C64 {
    (ro * h.adjoint() * ra * h2).trace()
}

/// `tr[(h^dagger (x) h') d_]`.
pub fn kron_oracle(underline: &CMatrix, h: &CMatrix, h2: &CMatrix) -> C64 {
    (h.adjoint().kronecker(h2) * underline).trace()
}

/// PSD operator of the given rank with unit trace.
pub fn density_of_rank<R: Rng>(n: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = complex_gaussian(n, rank, rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

pub fn op(m: CMatrix) -> Operator {
    Operator::new(m).expect("finite square matrix")
}

pub fn random_operator<R: Rng>(n: usize, rng: &mut R) -> Operator {
    op(complex_gaussian(n, n, rng))
}

pub fn canonical_from(ra: CMatrix, ro: CMatrix) -> DecoherenceFunctional {
    let pair = BoundaryPair::normalized(op(ra), op(ro), Tolerance::default()).unwrap();
    DecoherenceFunctional::canonical(pair).unwrap()
}

pub fn random_canonical<R: Rng>(n: usize, rng: &mut R) -> DecoherenceFunctional {
    canonical_from(density_of_rank(n, n, rng), density_of_rank(n, n, rng))
}

/// Random functional with at least one negative weight, on a Haar-random
/// trace-orthonormal basis.
pub fn random_indefinite<R: Rng>(n: usize, rng: &mut R) -> DecoherenceFunctional {
    let n2 = n * n;
    loop {
        let u = haar_unitary(n2, rng);
        let elements: Vec<Operator> = (0..n2)
            .map(|k| Operator::from_vec(n, &u.column(k).into_owned()))
            .collect();
        let mut weights: Vec<f64> = (0..n2).map(|_| rng.random_range(-1.0..1.0)).collect();
        weights[0] = -rng.random_range(0.1..1.0);
        let norm: f64 = elements
            .iter()
            .zip(&weights)
            .map(|(e, w)| w * e.trace().norm_sqr())
            .sum();
        if norm < 0.1 {
            continue;
        }
        for w in &mut weights {
            *w /= norm;
        }
        let basis = TraceBasis::new(elements, Tolerance::default()).unwrap();
        return DecoherenceFunctional::from_weights(weights, basis, Tolerance::default()).unwrap();
    }
}

/// Pauli-based indefinite functional on a qubit: weight 1/2 on `I/sqrt 2`,
/// `1, 1, -1/2` on `X, Y, Z` over `sqrt 2`.
pub fn pauli_indefinite() -> DecoherenceFunctional {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |v: [[f64; 2]; 2]| {
        Operator::from_real_rows(&[&v[0], &v[1]])
            .unwrap()
            .scale(C64::new(s, 0.0))
    };
    let y = Operator::from_fn(2, |i, j| match (i, j) {
        (0, 1) => C64::new(0.0, -s),
        (1, 0) => C64::new(0.0, s),
        _ => C64::new(0.0, 0.0),
    });
    let basis = TraceBasis::new(
        vec![
            r([[1.0, 0.0], [0.0, 1.0]]),
            r([[0.0, 1.0], [1.0, 0.0]]),
            y,
            r([[1.0, 0.0], [0.0, -1.0]]),
        ],
        Tolerance::default(),
    )
    .unwrap();
    DecoherenceFunctional::from_weights(vec![0.5, 1.0, 1.0, -0.5], basis, Tolerance::default())
        .unwrap()
}

/// Pure state with `|<a|b>|^2` drawn from `[0.2, 0.8]`.
pub fn non_commuting_pair<R: Rng>(n: usize, rng: &mut R) -> (CMatrix, CMatrix) {
    let a = random_ket(n, rng);
    let mut perp = random_ket(n, rng);
    perp -= &a * a.dotc(&perp);
    perp /= C64::new(perp.norm(), 0.0);
    let overlap: f64 = rng.random_range(0.2f64..0.8);
    let b = &a * C64::new(overlap.sqrt(), 0.0) + &perp * C64::new((1.0 - overlap).sqrt(), 0.0);
    (&a * a.adjoint(), &b * b.adjoint())
}

/// Random partition of `0..n` into non-empty groups.
pub fn random_partition<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let groups = rng.random_range(1..=n);
    loop {
        let mut out = vec![Vec::new(); groups];
        for i in 0..n {
            out[rng.random_range(0..groups)].push(i);
        }
        if out.iter().all(|g| !g.is_empty()) {
            return out;
        }
    }
}

/// Projectors onto spans of the columns of `u` selected by each group.
pub fn projectors_from_partition(u: &CMatrix, partition: &[Vec<usize>]) -> Vec<Operator> {
    let n = u.nrows();
    partition
        .iter()
        .map(|g| {
            let mut m = CMatrix::zeros(n, n);
            for &k in g {
                let c = u.column(k);
                m += c * c.adjoint();
            }
            op(m)
        })
        .collect()
}

/// Random probabilities summing to one, each at least `floor`.
pub fn random_probabilities<R: Rng>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(floor..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}
