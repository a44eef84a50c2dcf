//! Bipartite density matrices on `C^M ⊗ C^N`.
//!
//! Product basis `|i⟩_A ⊗ |j⟩_B` maps to row `i * N + j`. The partial
//! transpose acts on Alice in that computational basis, and `e*` below is
//! always the entrywise conjugate in the same basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{
    self, check_hermitian, ensure_finite, kron_vec, min_eigenvalue, numerical_rank, range_basis,
    CMatrix, CVector, Tolerances, C64, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Hermitian PSD operator on `C^dim_a ⊗ C^dim_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    dim_a: usize,
    dim_b: usize,
    rho: CMatrix,
    normalized: bool,
}

impl BipartiteState {
    /// Validated, trace-one state.
    pub fn new(dim_a: usize, dim_b: usize, rho: CMatrix, tol: &Tolerances) -> Result<Self> {
        let s = Self::unnormalized(dim_a, dim_b, rho, tol)?;
        let tr = s.trace();
        if (tr - 1.0).abs() > tol.residual_abs {
            return Err(Error::PreconditionFailed(format!(
                "trace {tr} differs from 1"
            )));
        }
        Ok(Self {
            normalized: true,
            ..s
        })
    }

    /// Validated Hermitian PSD operator without the trace constraint.
    pub fn unnormalized(dim_a: usize, dim_b: usize, rho: CMatrix, tol: &Tolerances) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::DimensionMismatch("local dimensions must be positive".into()));
        }
        let d = dim_a * dim_b;
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, expected {d}x{d} for {dim_a}x{dim_b}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        ensure_finite(&rho)?;
        check_hermitian(&rho, tol)?;
        let rho = numlin::hermitian_part(&rho);
        let lmin = min_eigenvalue(&rho);
        let tr = rho.trace().re;
        if lmin < -tol.psd_floor(tr) {
            return Err(Error::NotPsd(lmin));
        }
        Ok(Self {
            dim_a,
            dim_b,
            rho,
            normalized: false,
        })
    }

    /// Skips validation; callers guarantee the invariants (internal use).
    pub(crate) fn from_parts(dim_a: usize, dim_b: usize, rho: CMatrix) -> Self {
        Self {
            dim_a,
            dim_b,
            rho: numlin::hermitian_part(&rho),
            normalized: false,
        }
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn normalize(&self) -> Self {
        let tr = self.trace();
        Self {
            rho: self.rho.unscale(tr),
            normalized: true,
            ..self.clone()
        }
    }

    pub fn rank(&self, tol: &Tolerances) -> usize {
        numerical_rank(&self.rho, tol)
    }

    pub fn rank_pt(&self, tol: &Tolerances) -> usize {
        numerical_rank(&self.partial_transpose(), tol)
    }

    /// Block `(i, j)` of the Alice block structure, i.e. `⟨i|ρ|j⟩` acting on Bob.
    pub fn block(&self, i: usize, j: usize) -> Result<CMatrix> {
        if i >= self.dim_a || j >= self.dim_a {
            return Err(Error::IndexOutOfRange(i, j, self.dim_a));
        }
        let n = self.dim_b;
        Ok(self.rho.view((i * n, j * n), (n, n)).into_owned())
    }

    pub fn partial_transpose(&self) -> CMatrix {
        partial_transpose(&self.rho, self.dim_a, self.dim_b)
    }

    /// Minimum eigenvalue of the partial transpose.
    pub fn min_eigenvalue_pt(&self) -> f64 {
        min_eigenvalue(&self.partial_transpose())
    }

    pub fn is_ppt(&self, tol: &Tolerances) -> bool {
        self.min_eigenvalue_pt() >= -tol.psd_floor(self.trace())
    }

    pub fn reduced_a(&self) -> CMatrix {
        let (m, n) = self.dims();
        CMatrix::from_fn(m, m, |i, j| {
            (0..n).map(|k| self.rho[(i * n + k, j * n + k)]).sum()
        })
    }

    pub fn reduced_b(&self) -> CMatrix {
        let (m, n) = self.dims();
        CMatrix::from_fn(n, n, |i, j| {
            (0..m).map(|k| self.rho[(k * n + i, k * n + j)]).sum()
        })
    }

    pub fn local_ranks(&self, tol: &Tolerances) -> (usize, usize) {
        (
            numerical_rank(&self.reduced_a(), tol),
            numerical_rank(&self.reduced_b(), tol),
        )
    }

    /// `(V⊗I) ρ (V†⊗I)` or `(I⊗V) ρ (I⊗V†)`; the result is unnormalized.
    pub fn local_filter(&self, side: Side, v: &CMatrix) -> Result<Self> {
        let (m, n) = self.dims();
        let op = match side {
            Side::A => {
                if v.shape() != (m, m) {
                    return Err(Error::DimensionMismatch(format!(
                        "Alice filter must be {m}x{m}"
                    )));
                }
                v.kronecker(&CMatrix::identity(n, n))
            }
            Side::B => {
                if v.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!(
                        "Bob filter must be {n}x{n}"
                    )));
                }
                CMatrix::identity(m, m).kronecker(v)
            }
        };
        Ok(Self::from_parts(m, n, &op * &self.rho * op.adjoint()))
    }

    /// General local map `(X⊗Y) ρ (X⊗Y)†` with rectangular `X`, `Y`.
    pub fn local_map(&self, x: &CMatrix, y: &CMatrix) -> Result<Self> {
        if x.ncols() != self.dim_a || y.ncols() != self.dim_b {
            return Err(Error::DimensionMismatch("local map input dimensions".into()));
        }
        let op = x.kronecker(y);
        Ok(Self::from_parts(x.nrows(), y.nrows(), &op * &self.rho * op.adjoint()))
    }

    /// Restricts to the ranges of the reduced operators.
    pub fn support_compress(&self, tol: &Tolerances) -> (Self, Isometries) {
        let va = range_basis(&self.reduced_a(), tol);
        let vb = range_basis(&self.reduced_b(), tol);
        if va.ncols() == 0 || vb.ncols() == 0 {
            // Zero operator: keep a 1x1 zero state.
            let iso = Isometries {
                a: CMatrix::from_fn(self.dim_a, 1, |i, _| if i == 0 { C64::new(1.0, 0.0) } else { ZERO }),
                b: CMatrix::from_fn(self.dim_b, 1, |i, _| if i == 0 { C64::new(1.0, 0.0) } else { ZERO }),
            };
            return (Self::from_parts(1, 1, CMatrix::zeros(1, 1)), iso);
        }
        let compressed = self
            .local_map(&va.adjoint(), &vb.adjoint())
            .expect("isometry shapes match");
        let compressed = Self {
            normalized: self.normalized,
            ..compressed
        };
        (compressed, Isometries { a: va, b: vb })
    }

    /// Exchanges the roles of Alice and Bob.
    pub fn swap_parties(&self) -> Self {
        let (m, n) = self.dims();
        let d = m * n;
        let perm = |k: usize| (k % n) * m + k / n;
        let mut out = CMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                out[(perm(r), perm(c))] = self.rho[(r, c)];
            }
        }
        Self {
            dim_a: n,
            dim_b: m,
            rho: out,
            normalized: self.normalized,
        }
    }

    /// Same dimensions, the partial transpose as the new operator.
    /// Only meaningful (PSD) for PPT states.
    pub fn partial_transpose_state(&self) -> Self {
        Self::from_parts(self.dim_a, self.dim_b, self.partial_transpose())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(self.dim_a, self.dim_b, self.rho.scale(factor))
    }
}

/// Block transpose on Alice: output block `(i, j)` is input block `(j, i)`.
pub fn partial_transpose(rho: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    let n = dim_b;
    let mut out = CMatrix::zeros(dim_a * n, dim_a * n);
    for i in 0..dim_a {
        for j in 0..dim_a {
            out.view_mut((i * n, j * n), (n, n))
                .copy_from(&rho.view((j * n, i * n), (n, n)));
        }
    }
    out
}

/// Column isometries mapping a compressed state back into the original spaces.
#[derive(Debug, Clone)]
pub struct Isometries {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl Isometries {
    pub fn expand(&self, s: &BipartiteState) -> BipartiteState {
        s.local_map(&self.a, &self.b).expect("isometry shapes match")
    }

    pub fn expand_vector(&self, p: &ProductVector) -> ProductVector {
        ProductVector {
            e: &self.a * &p.e,
            f: &self.b * &p.f,
        }
    }
}

/// Pair `(e, f)` standing for `|e⟩ ⊗ |f⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    pub e: CVector,
    pub f: CVector,
}

impl ProductVector {
    pub fn new(e: CVector, f: CVector) -> Result<Self> {
        if e.norm() == 0.0 || f.norm() == 0.0 {
            return Err(Error::PreconditionFailed("product vector factors must be nonzero".into()));
        }
        Ok(Self { e, f })
    }

    pub fn kron(&self) -> CVector {
        kron_vec(&self.e, &self.f)
    }

    /// `|e*, f⟩`.
    pub fn partial_conjugate(&self) -> Self {
        Self {
            e: self.e.map(|z| z.conj()),
            f: self.f.clone(),
        }
    }

    pub fn projector(&self) -> CMatrix {
        let v = self.kron();
        &v * v.adjoint()
    }

    pub fn norm_squared(&self) -> f64 {
        self.e.norm_squared() * self.f.norm_squared()
    }

    /// Unit factors with the largest-modulus component of each made real positive.
    pub fn canonical(&self) -> Self {
        Self {
            e: canonical_phase(&self.e.unscale(self.e.norm())),
            f: canonical_phase(&self.f.unscale(self.f.norm())),
        }
    }

    /// `min_θ ‖u − e^{iθ} w‖` for the normalized tensors.
    pub fn phase_distance(&self, other: &Self) -> f64 {
        let a = self.kron();
        let b = other.kron();
        let ov = (a.adjoint() * &b)[(0, 0)].norm() / (a.norm() * b.norm());
        (2.0 - 2.0 * ov.min(1.0)).max(0.0).sqrt()
    }

    pub fn swap(&self) -> Self {
        Self {
            e: self.f.clone(),
            f: self.e.clone(),
        }
    }
}

pub fn canonical_phase(v: &CVector) -> CVector {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        // Small slack keeps the choice stable under rounding.
        if z.norm() > best * (1.0 + 1e-9) {
            best = z.norm();
            idx = i;
        }
    }
    if best <= 0.0 {
        return v.clone();
    }
    let phase = v[idx].conj() / v[idx].norm();
    v.map(|z| z * phase)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub vector: ProductVector,
}

/// Weighted product projectors plus the Frobenius reconstruction residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub terms: Vec<Term>,
    pub residual: f64,
}

impl Decomposition {
    /// Builds a decomposition from unnormalized product vectors (weight absorbed
    /// into the vectors), canonicalizes, and records the residual against `rho`.
    pub fn from_vectors(vectors: &[ProductVector], rho: &CMatrix) -> Self {
        let terms = vectors
            .iter()
            .filter(|p| p.norm_squared() > 0.0)
            .map(|p| Term {
                weight: p.norm_squared(),
                vector: p.canonical(),
            })
            .collect();
        Self::from_terms(terms, rho)
    }

    pub fn from_terms(mut terms: Vec<Term>, rho: &CMatrix) -> Self {
        terms.retain(|t| t.weight > 0.0);
        for t in terms.iter_mut() {
            t.vector = t.vector.canonical();
        }
        terms.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        let mut d = Self {
            terms,
            residual: 0.0,
        };
        d.residual = (d.reconstruct(rho.nrows()) - rho).norm();
        d
    }

    pub fn reconstruct(&self, dim: usize) -> CMatrix {
        let mut out = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            out += t.vector.projector().scale(t.weight);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    pub fn is_valid(&self, tol: &Tolerances) -> bool {
        self.residual <= tol.residual_abs && self.terms.iter().all(|t| t.weight > 0.0)
    }

    /// Rank of the stacked Bob factors.
    pub fn bob_rank(&self, tol: &Tolerances) -> usize {
        if self.terms.is_empty() {
            return 0;
        }
        let n = self.terms[0].vector.f.len();
        let f = CMatrix::from_fn(n, self.terms.len(), |i, j| self.terms[j].vector.f[i]);
        numerical_rank(&f, tol)
    }

    /// Number of linearly independent projectors among the terms.
    pub fn projector_rank(&self, tol: &Tolerances) -> usize {
        let cols: Vec<Vec<f64>> = self
            .terms
            .iter()
            .map(|t| numlin::realify(&t.vector.projector()))
            .collect();
        if cols.is_empty() {
            return 0;
        }
        let m = CMatrix::from_fn(cols[0].len(), cols.len(), |i, j| C64::new(cols[j][i], 0.0));
        numerical_rank(&m, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{random_complex_vector, random_unit_vector, random_unitary, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn product_state(e: &CVector, f: &CVector) -> BipartiteState {
        let p = ProductVector::new(e.clone(), f.clone()).unwrap();
        let v = p.kron();
        BipartiteState::unnormalized(e.len(), f.len(), &v * v.adjoint(), &tol())
            .unwrap()
            .normalize()
    }

    fn bell() -> BipartiteState {
        let s = 1.0 / 2f64.sqrt();
        let v = CVector::from_vec(vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]);
        BipartiteState::new(2, 2, &v * v.adjoint(), &tol()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, m: usize, n: usize, rank: usize) -> BipartiteState {
        let g = CMatrix::from_fn(m * n, rank, |_, _| random_complex_vector(rng, 1)[0]);
        BipartiteState::unnormalized(m, n, &g * g.adjoint(), &tol()).unwrap().normalize()
    }

    #[test]
    fn rejects_bad_matrices() {
        let t = tol();
        assert!(matches!(
            BipartiteState::new(2, 2, CMatrix::identity(3, 3), &t),
            Err(Error::DimensionMismatch(_))
        ));
        let mut m = CMatrix::identity(4, 4).scale(0.25);
        m[(0, 0)] = C64::new(-0.25, 0.0);
        m[(1, 1)] = C64::new(0.75, 0.0);
        assert!(matches!(BipartiteState::new(2, 2, m, &t), Err(Error::NotPsd(_))));
        let mut m = CMatrix::identity(4, 4).scale(0.25);
        m[(0, 1)] = ONE;
        assert!(matches!(BipartiteState::new(2, 2, m, &t), Err(Error::NotHermitian(_))));
        let mut m = CMatrix::identity(4, 4);
        m[(0, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(BipartiteState::new(2, 2, m, &t), Err(Error::NonFinite)));
    }

    #[test]
    fn partial_transpose_of_product_conjugates_alice() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random_unit_vector(&mut rng, 3);
        let f = random_unit_vector(&mut rng, 2);
        let s = product_state(&e, &f);
        let expected = ProductVector::new(e.clone(), f.clone()).unwrap().partial_conjugate().projector();
        assert!((s.partial_transpose() - expected).norm() < 1e-12);
        assert!(s.is_ppt(&tol()));
    }

    #[test]
    fn partial_transpose_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_state(&mut rng, 3, 2, 6);
        let twice = partial_transpose(&s.partial_transpose(), 3, 2);
        assert_eq!(&twice, s.matrix());
    }

    #[test]
    fn bell_state_is_npt() {
        let b = bell();
        assert!((b.min_eigenvalue_pt() + 0.5).abs() < 1e-12);
        assert!(!b.is_ppt(&tol()));
    }

    #[test]
    fn werner_ppt_threshold() {
        // Partial transpose eigenvalues: (1+p)/4 three times and (1-3p)/4.
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let s = crate::fixtures::werner_family(p).unwrap();
            let oracle = (1.0 - 3.0 * p) / 4.0;
            assert!((s.min_eigenvalue_pt() - oracle.min((1.0 + p) / 4.0)).abs() < 1e-12);
            assert_eq!(s.is_ppt(&tol()), p <= 1.0 / 3.0 + 1e-9, "p = {p}");
        }
    }

    #[test]
    fn block_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(&mut rng, 3, 2, 4);
        let mut tr = 0.0;
        for i in 0..3 {
            let b = s.block(i, i).unwrap();
            assert!(numlin::hermiticity_defect(&b) < 1e-12);
            assert!(min_eigenvalue(&b) > -1e-12);
            tr += b.trace().re;
        }
        assert!((tr - s.trace()).abs() < 1e-12);
        assert!(matches!(s.block(3, 0), Err(Error::IndexOutOfRange(3, 0, 3))));

        let eta = random_state(&mut rng, 1, 3, 2);
        let e0 = CVector::from_vec(vec![ONE, ZERO]);
        let rho = (&e0 * e0.adjoint()).kronecker(eta.matrix());
        let s = BipartiteState::new(2, 3, rho, &tol()).unwrap();
        assert!((s.block(0, 0).unwrap() - eta.matrix()).norm() < 1e-14);
    }

    #[test]
    fn reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = random_unit_vector(&mut rng, 2);
        let f = random_unit_vector(&mut rng, 3);
        let s = product_state(&e, &f);
        assert!((s.reduced_a() - &e * e.adjoint()).norm() < 1e-12);
        assert!((s.reduced_b() - &f * f.adjoint()).norm() < 1e-12);

        let mm = crate::fixtures::maximally_mixed(2, 3);
        assert!((mm.reduced_a() - CMatrix::identity(2, 2).scale(0.5)).norm() < 1e-14);
        assert!((mm.reduced_b() - CMatrix::identity(3, 3).scale(1.0 / 3.0)).norm() < 1e-14);

        // Mixture of products: direct summation oracle.
        let mut rho = CMatrix::zeros(6, 6);
        let mut ra = CMatrix::zeros(2, 2);
        for p in [0.2, 0.3, 0.5] {
            let e = random_unit_vector(&mut rng, 2);
            let f = random_unit_vector(&mut rng, 3);
            rho += ProductVector::new(e.clone(), f).unwrap().projector().scale(p);
            ra += (&e * e.adjoint()).scale(p);
        }
        let s = BipartiteState::new(2, 3, rho, &tol()).unwrap();
        assert!((s.reduced_a() - ra).norm() < tol().residual_abs);
    }

    #[test]
    fn local_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(&mut rng, 2, 3, 3);
        let same = s.local_filter(Side::B, &CMatrix::identity(3, 3)).unwrap();
        assert!((same.matrix() - s.matrix()).norm() < 1e-14);

        let u = random_unitary(&mut rng, 3);
        let rotated = s.local_filter(Side::B, &u).unwrap();
        let (a, _) = numlin::hermitian_eigen(s.matrix());
        let (b, _) = numlin::hermitian_eigen(rotated.matrix());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }

        let full = random_state(&mut rng, 2, 3, 6);
        let v = numlin::inv_sqrt_on_range(&full.block(1, 1).unwrap(), &tol()).unwrap();
        let filtered = full.local_filter(Side::B, &v).unwrap();
        assert!((filtered.block(1, 1).unwrap() - CMatrix::identity(3, 3)).norm() < tol().residual_abs);

        assert!(s.local_filter(Side::A, &CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn support_compression() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_state(&mut rng, 2, 2, 4);
        let (c, _) = s.support_compress(&t);
        assert_eq!(c.dims(), (2, 2));

        let e0 = CVector::from_vec(vec![ONE, ZERO, ZERO]);
        let s = product_state(&e0, &e0);
        let (c, iso) = s.support_compress(&t);
        assert_eq!(c.dims(), (1, 1));
        assert!((iso.expand(&c).matrix() - s.matrix()).norm() < t.residual_abs);

        // Rank-2 separable state living on a 2x2 subspace of 3x4.
        let ua = random_unitary(&mut rng, 3).columns(0, 2).into_owned();
        let ub = random_unitary(&mut rng, 4).columns(0, 2).into_owned();
        let mut rho = CMatrix::zeros(12, 12);
        for w in [0.4, 0.6] {
            let e = &ua * random_unit_vector(&mut rng, 2);
            let f = &ub * random_unit_vector(&mut rng, 2);
            rho += ProductVector::new(e, f).unwrap().projector().scale(w);
        }
        let s = BipartiteState::new(3, 4, rho, &t).unwrap();
        let (c, iso) = s.support_compress(&t);
        assert_eq!(c.dims(), (2, 2));
        assert_eq!(c.local_ranks(&t), (2, 2));
        assert!((iso.expand(&c).matrix() - s.matrix()).norm() < t.residual_abs);
    }

    #[test]
    fn swapping_parties_twice_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_state(&mut rng, 2, 3, 4);
        let w = s.swap_parties();
        assert_eq!(w.dims(), (3, 2));
        assert!((w.reduced_a() - s.reduced_b()).norm() < 1e-14);
        assert_eq!(w.swap_parties().matrix(), s.matrix());
    }

    #[test]
    fn canonical_phase_and_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_complex_vector(&mut rng, 3);
        let f = random_complex_vector(&mut rng, 2);
        let p = ProductVector::new(e.clone(), f.clone()).unwrap();
        let q = ProductVector::new(e.map(|z| z * C64::new(0.0, 2.0)), f.map(|z| z * C64::new(-0.5, 0.1))).unwrap();
        assert!(p.phase_distance(&q) < 1e-12);
        let cp = p.canonical();
        let cq = q.canonical();
        assert!((cp.e - cq.e).norm() < 1e-12);
        assert!((cp.f - cq.f).norm() < 1e-12);
    }
}
