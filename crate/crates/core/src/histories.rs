//! Histories as time-ordered projector sequences, their class operators and
//! tensor-product projections, coarse graining, and the construction that
//! writes any small operator as a sum of disjoint four-time class operators.

use crate::error::{Error, Result};
use crate::operator::{cr, kron, CMatrix, CVector, Operator, Tolerance, C64};

/// Absolute tolerance on `||P^2 - P||_F` and `||P - P^dagger||_F`.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Tensor-product projections are only materialized up to this matrix size.
pub const MAX_TENSOR_DIM: usize = 64;

/// Largest operator norm accepted by [`ray_complete_decompose`].
pub const RAY_COMPLETE_RADIUS: f64 = 0.125;

/// Strictly increasing time labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalSupport {
    times: Vec<f64>,
}

impl TemporalSupport {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidSupport("no times given".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSupport("non-finite time".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSupport(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(TemporalSupport { times })
    }

    /// Times `0, 1, ..., k-1`.
    pub fn steps(k: usize) -> Result<Self> {
        TemporalSupport::new((0..k).map(|t| t as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// One projector per time of the support.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorSequence {
    support: TemporalSupport,
    projectors: Vec<Operator>,
}

fn check_projector(p: &Operator) -> Result<()> {
    let residual = p.projector_residual();
    if residual > PROJECTOR_TOL {
        return Err(Error::NotProjector { residual });
    }
    Ok(())
}

impl ProjectorSequence {
    pub fn new(support: TemporalSupport, projectors: Vec<Operator>) -> Result<Self> {
        if projectors.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: projectors.len(),
            });
        }
        let n = projectors[0].dim();
        for p in &projectors {
            p.check_dim(n)?;
            check_projector(p)?;
        }
        Ok(ProjectorSequence {
            support,
            projectors,
        })
    }

    /// Sequence on the support `0, 1, ..., k-1`.
    pub fn from_projectors(projectors: Vec<Operator>) -> Result<Self> {
        ProjectorSequence::new(TemporalSupport::steps(projectors.len())?, projectors)
    }

    pub fn support(&self) -> &TemporalSupport {
        &self.support
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    fn heisenberg(&self, evolution: Option<&[Operator]>) -> Vec<Operator> {
        match evolution {
            None => self.projectors.clone(),
            Some(us) => self
                .projectors
                .iter()
                .zip(us)
                .map(|(p, u)| &(&u.adjoint() * p) * u)
                .collect(),
        }
    }

    /// `P_1 (x) ... (x) P_k`, or `None` when `N^k` exceeds [`MAX_TENSOR_DIM`].
    fn tensor_product(&self, evolution: Option<&[Operator]>) -> Option<CMatrix> {
        let n = self.dim();
        let total = (n as u128).checked_pow(self.len() as u32)?;
        if total > MAX_TENSOR_DIM as u128 {
            return None;
        }
        let ps = self.heisenberg(evolution);
        let mut out = CMatrix::identity(1, 1);
        for p in &ps {
            out = kron(&out, p.as_matrix());
        }
        Some(out)
    }
}

fn check_evolution(n: usize, k: usize, evolution: &[Operator]) -> Result<()> {
    if evolution.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: evolution.len(),
        });
    }
    for u in evolution {
        u.check_dim(n)?;
        let residual = (u.adjoint() * u.clone()).distance(&Operator::identity(n));
        if residual > PROJECTOR_TOL {
            return Err(Error::NotUnitary { residual });
        }
    }
    Ok(())
}

/// Ordered product of the (optionally Heisenberg-evolved, `U^dagger P U`)
/// projectors, earliest time leftmost.
pub fn compile_class_operator(
    seq: &ProjectorSequence,
    evolution: Option<&[Operator]>,
) -> Result<Operator> {
    if let Some(us) = evolution {
        check_evolution(seq.dim(), seq.len(), us)?;
    }
    let ps = seq.heisenberg(evolution);
    let mut out = ps[0].clone();
    for p in &ps[1..] {
        out = &out * p;
    }
    Ok(out)
}

/// First time index at which the two sequences' projectors annihilate.
pub fn check_disjoint(a: &ProjectorSequence, b: &ProjectorSequence) -> Result<Option<usize>> {
    if a.support != b.support {
        return Err(Error::SupportMismatch);
    }
    b.projectors[0].check_dim(a.dim())?;
    Ok(a.projectors
        .iter()
        .zip(&b.projectors)
        .position(|(p, q)| (p * q).frobenius_norm() <= PROJECTOR_TOL))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistoryKind {
    Homogeneous,
    Inhomogeneous,
}

/// A homogeneous history (one projector sequence) or a sum of pairwise
/// disjoint ones, together with its compiled class operator.
#[derive(Clone, Debug)]
pub struct History {
    kind: HistoryKind,
    branches: Vec<ProjectorSequence>,
    evolution: Option<Vec<Operator>>,
    op: Operator,
    tensor_op: Option<Operator>,
}

impl History {
    pub fn homogeneous(seq: ProjectorSequence) -> Self {
        History::build(HistoryKind::Homogeneous, vec![seq], None)
            .expect("a single valid sequence always compiles")
    }

    /// Homogeneous history from projectors on the support `0..k`.
    pub fn from_projectors(projectors: Vec<Operator>) -> Result<Self> {
        Ok(History::homogeneous(ProjectorSequence::from_projectors(
            projectors,
        )?))
    }

    /// Homogeneous history in the Heisenberg picture, `P(t) = U(t)^dagger P U(t)`.
    pub fn evolved(seq: ProjectorSequence, evolution: Vec<Operator>) -> Result<Self> {
        check_evolution(seq.dim(), seq.len(), &evolution)?;
        History::build(HistoryKind::Homogeneous, vec![seq], Some(evolution))
    }

    /// Sum of pairwise disjoint branches; a single branch gives a homogeneous history.
    pub fn inhomogeneous(
        branches: Vec<ProjectorSequence>,
        evolution: Option<Vec<Operator>>,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Schema("history needs at least one branch".into()));
        }
        if let Some(us) = &evolution {
            check_evolution(branches[0].dim(), branches[0].len(), us)?;
        }
        for a in 0..branches.len() {
            for b in a + 1..branches.len() {
                if check_disjoint(&branches[a], &branches[b])?.is_none() {
                    return Err(Error::NotDisjoint {
                        first: a,
                        second: b,
                    });
                }
            }
        }
        let kind = if branches.len() == 1 {
            HistoryKind::Homogeneous
        } else {
            HistoryKind::Inhomogeneous
        };
        History::build(kind, branches, evolution)
    }

    fn build(
        kind: HistoryKind,
        branches: Vec<ProjectorSequence>,
        evolution: Option<Vec<Operator>>,
    ) -> Result<Self> {
        let ev = evolution.as_deref();
        let mut op = compile_class_operator(&branches[0], ev)?;
        for b in &branches[1..] {
            op += &compile_class_operator(b, ev)?;
        }
        let mut tensor: Option<CMatrix> = None;
        for b in &branches {
            match (b.tensor_product(ev), tensor.as_mut()) {
                (None, _) => {
                    tensor = None;
                    break;
                }
                (Some(t), None) => tensor = Some(t),
                (Some(t), Some(acc)) => *acc += t,
            }
        }
        Ok(History {
            kind,
            branches,
            evolution,
            op,
            tensor_op: tensor.map(Operator::wrap),
        })
    }

    pub fn kind(&self) -> HistoryKind {
        self.kind
    }

    pub fn branches(&self) -> &[ProjectorSequence] {
        &self.branches
    }

    pub fn evolution(&self) -> Option<&[Operator]> {
        self.evolution.as_deref()
    }

    /// Class operator.
    pub fn op(&self) -> &Operator {
        &self.op
    }

    /// Projection on `H^(x)k`, when small enough to materialize.
    pub fn tensor_op(&self) -> Option<&Operator> {
        self.tensor_op.as_ref()
    }

    pub fn support(&self) -> &TemporalSupport {
        self.branches[0].support()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Slot indices certifying that every branch of `self` is disjoint from
    /// every branch of `other`, in branch-pair order, or `None`.
    pub fn disjointness(&self, other: &History) -> Result<Option<Vec<usize>>> {
        if self.support() != other.support() {
            return Err(Error::SupportMismatch);
        }
        let mut slots = Vec::new();
        for a in &self.branches {
            for b in &other.branches {
                match check_disjoint(a, b)? {
                    Some(s) if self.evolution == other.evolution => slots.push(s),
                    Some(s) => {
                        // With different dynamics only the evolved projectors count.
                        let pa = &a.heisenberg(self.evolution())[s];
                        let pb = &b.heisenberg(other.evolution())[s];
                        if (pa * pb).frobenius_norm() > PROJECTOR_TOL {
                            return Ok(None);
                        }
                        slots.push(s);
                    }
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(slots))
    }
}

/// Evidence that histories `pair.0` and `pair.1` are disjoint: for each
/// branch pair, the time slot at which their projectors annihilate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointnessWitness {
    pub pair: (usize, usize),
    pub slots: Vec<usize>,
}

/// Ordered collection of histories sharing dimension and temporal support.
#[derive(Clone, Debug)]
pub struct HistorySet {
    histories: Vec<History>,
    exhaustive: bool,
    disjointness: Vec<DisjointnessWitness>,
}

impl HistorySet {
    pub fn new(histories: Vec<History>) -> Result<Self> {
        let first = histories
            .first()
            .ok_or_else(|| Error::Schema("history set is empty".into()))?;
        let n = first.dim();
        for h in &histories {
            h.op.check_dim(n)?;
            if h.support() != first.support() {
                return Err(Error::SupportMismatch);
            }
        }
        let mut disjointness = Vec::new();
        for a in 0..histories.len() {
            for b in a + 1..histories.len() {
                if let Some(slots) = histories[a].disjointness(&histories[b])? {
                    disjointness.push(DisjointnessWitness {
                        pair: (a, b),
                        slots,
                    });
                }
            }
        }
        let total = crate::operator::sum_operators(
            &histories.iter().map(|h| h.op.clone()).collect::<Vec<_>>(),
        )
        .expect("non-empty");
        let exhaustive =
            total.distance(&Operator::identity(n)) <= Tolerance::default().bound((n as f64).sqrt());
        Ok(HistorySet {
            histories,
            exhaustive,
            disjointness,
        })
    }

    /// The single fully coarse-grained history `u` on a `k`-time support.
    pub fn unit(n: usize, k: usize) -> Result<Self> {
        let seq = ProjectorSequence::from_projectors(vec![Operator::identity(n); k])?;
        HistorySet::new(vec![History::homogeneous(seq)])
    }

    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn get(&self, k: usize) -> &History {
        &self.histories[k]
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.histories[0].dim()
    }

    pub fn ops(&self) -> Vec<Operator> {
        self.histories.iter().map(|h| h.op.clone()).collect()
    }

    /// `sum_b C_b = 1` within tolerance.
    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn disjointness(&self) -> &[DisjointnessWitness] {
        &self.disjointness
    }

    pub fn is_pairwise_disjoint(&self) -> bool {
        let k = self.histories.len();
        self.disjointness.len() == k * (k - 1) / 2
    }

    /// Re-checks every recorded witness against the (evolved) projectors.
    pub fn verify_witnesses(&self) -> bool {
        self.disjointness.iter().all(|w| {
            let (ha, hb) = (&self.histories[w.pair.0], &self.histories[w.pair.1]);
            let mut slots = w.slots.iter();
            ha.branches.iter().all(|a| {
                hb.branches.iter().all(|b| match slots.next() {
                    Some(&s) => {
                        let pa = &a.heisenberg(ha.evolution())[s];
                        let pb = &b.heisenberg(hb.evolution())[s];
                        (pa * pb).frobenius_norm() <= PROJECTOR_TOL
                    }
                    None => false,
                })
            })
        })
    }
}

fn check_partition(len: usize, partition: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; len];
    for group in partition {
        if group.is_empty() {
            return Err(Error::InvalidPartition("empty group".into()));
        }
        for &k in group {
            if k >= len {
                return Err(Error::InvalidPartition(format!("index {k} out of range")));
            }
            if seen[k] {
                return Err(Error::InvalidPartition(format!("index {k} repeated")));
            }
            seen[k] = true;
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("index {k} not covered")));
    }
    Ok(())
}

/// If all sequences agree except at one common slot and the projectors there
/// sum to a projector, the merged single sequence.
fn merge_single_slot(seqs: &[&ProjectorSequence]) -> Option<ProjectorSequence> {
    let first = seqs[0];
    let mut slot: Option<usize> = None;
    for s in &seqs[1..] {
        for (t, (p, q)) in first.projectors.iter().zip(&s.projectors).enumerate() {
            if p.distance(q) > PROJECTOR_TOL {
                match slot {
                    None => slot = Some(t),
                    Some(u) if u == t => {}
                    Some(_) => return None,
                }
            }
        }
    }
    let slot = slot?;
    let mut sum = Operator::zeros(first.dim());
    for s in seqs {
        sum += &s.projectors[slot];
    }
    if sum.projector_residual() > PROJECTOR_TOL {
        return None;
    }
    let mut projectors = first.projectors.clone();
    projectors[slot] = sum;
    Some(ProjectorSequence {
        support: first.support.clone(),
        projectors,
    })
}

/// Sums the histories in each group of `partition`.
pub fn coarse_grain(set: &HistorySet, partition: &[Vec<usize>]) -> Result<HistorySet> {
    check_partition(set.len(), partition)?;
    let mut out = Vec::with_capacity(partition.len());
    for group in partition {
        if group.len() == 1 {
            out.push(set.histories[group[0]].clone());
            continue;
        }
        let evolution = set.histories[group[0]].evolution.clone();
        for &k in group {
            if set.histories[k].evolution != evolution {
                return Err(Error::InvalidPartition(
                    "histories in a group have different dynamics".into(),
                ));
            }
        }
        for (x, &a) in group.iter().enumerate() {
            for &b in &group[x + 1..] {
                let (a, b) = (a.min(b), a.max(b));
                if !set.disjointness.iter().any(|w| w.pair == (a, b)) {
                    return Err(Error::NotDisjoint {
                        first: a,
                        second: b,
                    });
                }
            }
        }
        let branches: Vec<&ProjectorSequence> = group
            .iter()
            .flat_map(|&k| set.histories[k].branches.iter())
            .collect();
        let merged = match merge_single_slot(&branches) {
            Some(seq) => History::build(HistoryKind::Homogeneous, vec![seq], evolution)?,
            None => History::build(
                HistoryKind::Inhomogeneous,
                branches.into_iter().cloned().collect(),
                evolution,
            )?,
        };
        out.push(merged);
    }
    HistorySet::new(out)
}

fn basis_ket(n: usize, i: usize) -> CVector {
    CVector::from_fn(n, |k, _| if k == i { cr(1.0) } else { cr(0.0) })
}

/// Solves `|l - A^4| = A^2 (1 - A^2)` for `A` in `[0, 1/2]` by bisection.
fn diagonal_amplitude(l: C64) -> f64 {
    if l.norm() == 0.0 {
        return 0.0;
    }
    let f = |a: f64| (l - cr(a.powi(4))).norm() - a * a * (1.0 - a * a);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Writes `target` as a sum of `N^2` four-time homogeneous class operators
/// `P_i P_eps P_sigma P_j`, one per ordered basis pair `(i, j)`. Histories
/// for different pairs are disjoint at the first or the last time.
pub fn ray_complete_decompose(target: &Operator) -> Result<HistorySet> {
    let n = target.dim();
    if n < 3 {
        return Err(Error::DimensionTooSmall { dim: n, min: 3 });
    }
    let norm = target.operator_norm();
    if norm > RAY_COMPLETE_RADIUS * (1.0 + 1e-12) {
        return Err(Error::NormTooLarge {
            norm,
            limit: RAY_COMPLETE_RADIUS,
        });
    }
    let support = TemporalSupport::steps(4)?;
    let identity = Operator::identity(n);
    let mut histories = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let l = target.get(i, j);
            let ei = basis_ket(n, i);
            let (eps, sigma) = if i != j {
                // <i|eps><eps|j> = A sqrt(1-A^2) e^{i theta} = l
                let s = 0.5 * (1.0 - (1.0 - 4.0 * l.norm_sqr()).max(0.0).sqrt());
                let a = s.sqrt();
                let phase = C64::from_polar(1.0, -l.arg());
                let eps = &ei * cr(a) + basis_ket(n, j) * (phase * (1.0 - s).sqrt());
                (Operator::projector_onto(&eps), identity.clone())
            } else {
                // A^4 + A^2 (1 - A^2) e^{i theta} = l
                let a = diagonal_amplitude(l);
                let b = (1.0 - a * a).max(0.0).sqrt();
                let theta = (l - cr(a.powi(4))).arg();
                let perp = basis_ket(n, (i + 1) % n);
                let eps = &ei * cr(a) + &perp * cr(b);
                let sigma = &ei * cr(a) + &perp * (C64::from_polar(b, theta));
                (
                    Operator::projector_onto(&eps),
                    Operator::projector_onto(&sigma),
                )
            };
            let seq = ProjectorSequence::new(
                support.clone(),
                vec![
                    Operator::basis_projector(n, i),
                    eps,
                    sigma,
                    Operator::basis_projector(n, j),
                ],
            )?;
            histories.push(History::homogeneous(seq));
        }
    }
    HistorySet::new(histories)
}

/// `|+>` and `|->` projectors in dimension 2.
pub fn x_projectors() -> (Operator, Operator) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = CVector::from_vec(vec![cr(s), cr(s)]);
    let minus = CVector::from_vec(vec![cr(s), cr(-s)]);
    (
        Operator::projector_onto(&plus),
        Operator::projector_onto(&minus),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{complex_gaussian, haar_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pz(i: usize) -> Operator {
        Operator::basis_projector(2, i)
    }

    #[test]
    fn support_validation() {
        assert!(TemporalSupport::new(vec![]).is_err());
        assert!(TemporalSupport::new(vec![1.0, 1.0]).is_err());
        assert!(TemporalSupport::new(vec![0.0, 0.5, 2.0]).is_ok());
    }

    #[test]
    fn class_operator_examples() {
        let seq = ProjectorSequence::from_projectors(vec![pz(0)]).unwrap();
        assert!(compile_class_operator(&seq, None).unwrap().distance(&pz(0)) == 0.0);

        let (xp, _) = x_projectors();
        let seq = ProjectorSequence::from_projectors(vec![pz(0), xp.clone()]).unwrap();
        let got = compile_class_operator(&seq, None).unwrap();
        // |0><0|+><+| = (1/sqrt 2)|0><+|
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = Operator::from_real_rows(&[&[0.5, 0.5], &[0.0, 0.0]]).unwrap();
        assert!(got.distance(&want) < 1e-15);
        assert!((got.get(0, 0) - cr(s * s)).norm() < 1e-15);

        let seq = ProjectorSequence::from_projectors(vec![Operator::identity(3); 3]).unwrap();
        assert!(
            compile_class_operator(&seq, None)
                .unwrap()
                .distance(&Operator::identity(3))
                == 0.0
        );
    }

    #[test]
    fn rejects_non_projectors() {
        let half = Operator::identity(2).scale(cr(0.5));
        assert!(matches!(
            ProjectorSequence::from_projectors(vec![half]),
            Err(Error::NotProjector { .. })
        ));
        let mixed = vec![pz(0), Operator::identity(3)];
        assert!(ProjectorSequence::from_projectors(mixed).is_err());
    }

    #[test]
    fn heisenberg_picture() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Operator::new(haar_unitary(2, &mut rng)).unwrap();
        let seq = ProjectorSequence::from_projectors(vec![pz(0), pz(1)]).unwrap();
        let got = compile_class_operator(&seq, Some(&[Operator::identity(2), u.clone()])).unwrap();
        let want = &pz(0) * &(&(&u.adjoint() * &pz(1)) * &u);
        assert!(got.distance(&want) < 1e-14);
        assert!(compile_class_operator(&seq, Some(&[pz(0), u])).is_err());
    }

    #[test]
    fn disjointness_examples() {
        let (xp, xm) = x_projectors();
        let a = ProjectorSequence::from_projectors(vec![pz(0), xp.clone()]).unwrap();
        let b = ProjectorSequence::from_projectors(vec![pz(1), xp.clone()]).unwrap();
        let c2 = ProjectorSequence::from_projectors(vec![pz(0), xm]).unwrap();
        assert_eq!(check_disjoint(&a, &b).unwrap(), Some(0));
        assert_eq!(check_disjoint(&a, &a).unwrap(), None);
        assert_eq!(check_disjoint(&a, &c2).unwrap(), Some(1));
        let other = ProjectorSequence::new(
            TemporalSupport::new(vec![0.0, 2.0]).unwrap(),
            vec![pz(0), xp],
        )
        .unwrap();
        assert!(matches!(
            check_disjoint(&a, &other),
            Err(Error::SupportMismatch)
        ));
    }

    fn two_time_set() -> HistorySet {
        let (xp, xm) = x_projectors();
        let mut hs = Vec::new();
        for z in 0..2 {
            for x in [&xp, &xm] {
                hs.push(History::from_projectors(vec![pz(z), x.clone()]).unwrap());
            }
        }
        HistorySet::new(hs).unwrap()
    }

    #[test]
    fn history_set_metadata() {
        let set = two_time_set();
        assert!(set.is_exhaustive());
        assert!(set.is_pairwise_disjoint());
        assert!(set.verify_witnesses());
        for h in set.histories() {
            assert!(h.op().operator_norm() <= 1.0 + 1e-12);
            let t = h.tensor_op().unwrap();
            assert!(t.projector_residual() < 1e-12);
            assert_eq!(t.dim(), 4);
        }
    }

    #[test]
    fn coarse_grain_examples() {
        let set = two_time_set();
        let same = coarse_grain(&set, &[vec![0], vec![1], vec![2], vec![3]]).unwrap();
        for (a, b) in same.histories().iter().zip(set.histories()) {
            assert!(a.op().distance(b.op()) == 0.0);
        }

        let full = coarse_grain(&set, &[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(full.len(), 1);
        assert!(full.get(0).op().distance(&Operator::identity(2)) < 1e-14);

        let merged = coarse_grain(&set, &[vec![0, 1], vec![2], vec![3]]).unwrap();
        assert_eq!(merged.get(0).kind(), HistoryKind::Homogeneous);
        assert!(merged.get(0).op().distance(&pz(0)) < 1e-14);
        assert!(merged.is_exhaustive());

        // z0 x+ together with z1 x- differs in two slots
        let diag = coarse_grain(&set, &[vec![0, 3], vec![1], vec![2]]).unwrap();
        assert_eq!(diag.get(0).kind(), HistoryKind::Inhomogeneous);
        let t = diag.get(0).tensor_op().unwrap();
        assert!(t.projector_residual() < 1e-12);
    }

    #[test]
    fn coarse_grain_rejects_bad_partitions() {
        let set = two_time_set();
        assert!(matches!(
            coarse_grain(&set, &[vec![0, 1], vec![1, 2, 3]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            coarse_grain(&set, &[vec![0, 1], vec![2]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            coarse_grain(&set, &[vec![0, 1, 2, 3, 4]]),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn inhomogeneous_requires_disjoint_branches() {
        let (xp, _) = x_projectors();
        let a = ProjectorSequence::from_projectors(vec![pz(0), xp.clone()]).unwrap();
        assert!(matches!(
            History::inhomogeneous(vec![a.clone(), a], None),
            Err(Error::NotDisjoint { .. })
        ));
    }

    #[test]
    fn ray_complete_zero_and_single_entry() {
        let zero = Operator::zeros(3);
        let set = ray_complete_decompose(&zero).unwrap();
        assert_eq!(set.len(), 9);
        for h in set.histories() {
            assert!(h.op().frobenius_norm() < 1e-15);
        }

        let mut t = Operator::zeros(3);
        t = &t + &Operator::matrix_unit(3, 0, 1).scale(cr(0.1));
        let set = ray_complete_decompose(&t).unwrap();
        let nonzero: Vec<_> = set
            .histories()
            .iter()
            .filter(|h| h.op().frobenius_norm() > 1e-14)
            .collect();
        assert_eq!(nonzero.len(), 1);
        let seq = &nonzero[0].branches()[0];
        assert!(seq.projectors()[2].distance(&Operator::identity(3)) == 0.0);
        // |eps> = a|0> + b|1> with a b* = 1/10
        let eps = seq.projectors()[1].as_matrix();
        assert!((eps[(0, 1)] - cr(0.1)).norm() < 1e-14);
        assert!(nonzero[0].op().distance(&t) < 1e-14);
    }

    #[test]
    fn ray_complete_random_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let g = Operator::new(complex_gaussian(3, 3, &mut rng)).unwrap();
            let t = g.scale(cr(0.125 / g.operator_norm()));
            let set = ray_complete_decompose(&t).unwrap();
            let total = crate::operator::sum_operators(&set.ops()).unwrap();
            assert!(total.distance(&t) <= 1e-8);
            assert!(set.is_pairwise_disjoint());
            for w in set.disjointness() {
                assert!(w.slots.iter().all(|&s| s == 0 || s == 3));
            }
        }
    }

    #[test]
    fn ray_complete_preconditions() {
        assert!(matches!(
            ray_complete_decompose(&Operator::zeros(2)),
            Err(Error::DimensionTooSmall { .. })
        ));
        assert!(matches!(
            ray_complete_decompose(&Operator::identity(3).scale(cr(0.2))),
            Err(Error::NormTooLarge { .. })
        ));
    }
}
