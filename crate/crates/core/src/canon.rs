//! Decomposition of rank-`N` PPT states supported on `M×N`.
//!
//! With a direction `a` for which `⟨a|ρ|a⟩` has full rank, rotate Alice so `a`
//! is last and filter Bob by `⟨a|ρ|a⟩^{-1/2}`. The filtered state is then
//! `Z†Z` with `Z = [C_1, …, C_{M−1}, I]`, the `C_k` form a commuting family of
//! normal matrices, and their joint eigenvectors give the product terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numlin::{
    check_commuting_normal, commutator, hermitian_eigen, inv_sqrt_on_range, joint_diagonalize,
    numerical_rank, random_unit_vector, sqrt_psd, unitary_with_last_column, CMatrix, CVector,
    Tolerances, C64, ONE,
};
use crate::reduce::{probe_kernel_alignment, reduction_step, subtract_product, Alignment};
use crate::state::{BipartiteState, Decomposition, ProductVector, Side};

/// Default number of random Alice directions tried before the recursive fallback.
pub const DEFAULT_DIRECTION_ATTEMPTS: usize = 64;

/// Number of full-rank directions compared when picking the best-conditioned one.
const DIRECTION_POOL: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    /// Bob filter `V = ⟨a|ρ|a⟩^{-1/2}`.
    pub filter: CMatrix,
    /// `V^{-1}`, used to map Bob vectors back.
    pub filter_inverse: CMatrix,
    /// Unitary whose last column is `a`.
    pub alice_basis: CMatrix,
    /// `C_1 … C_{M−1}`.
    pub blocks: Vec<CMatrix>,
    /// The filtered, rotated state `Z†Z`.
    pub filtered: BipartiteState,
}

impl CanonicalForm {
    /// `Z = [C_1, …, C_{M−1}, I]`.
    pub fn z(&self) -> CMatrix {
        let n = self.filter.nrows();
        let m = self.blocks.len() + 1;
        let mut z = CMatrix::zeros(n, m * n);
        for (k, c) in self.blocks.iter().enumerate() {
            z.view_mut((0, k * n), (n, n)).copy_from(c);
        }
        z.view_mut((0, (m - 1) * n), (n, n)).copy_from(&CMatrix::identity(n, n));
        z
    }

    /// Largest normality and commutator defects, each relative to
    /// `max(1, ‖C_i‖‖C_j‖)`.
    pub fn commutator_defects(&self) -> CommutatorDefects {
        let mut out = CommutatorDefects::default();
        for (i, ci) in self.blocks.iter().enumerate() {
            let s = ci.norm().powi(2).max(1.0);
            out.normality = out.normality.max(commutator(ci, &ci.adjoint()).norm() / s);
            for cj in &self.blocks[i + 1..] {
                let s = (ci.norm() * cj.norm()).max(1.0);
                out.commuting = out.commuting.max(commutator(ci, cj).norm() / s);
                out.commuting_adjoint = out.commuting_adjoint.max(commutator(ci, &cj.adjoint()).norm() / s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CommutatorDefects {
    pub normality: f64,
    pub commuting: f64,
    pub commuting_adjoint: f64,
}

impl CommutatorDefects {
    pub fn max(&self) -> f64 {
        self.normality.max(self.commuting).max(self.commuting_adjoint)
    }
}

/// `⟨a|ρ|a⟩` as an `N×N` matrix.
pub fn directional_block(s: &BipartiteState, a: &CVector) -> CMatrix {
    let (m, n) = s.dims();
    let rho = s.matrix();
    let mut out = CMatrix::zeros(n, n);
    for p in 0..m {
        for q in 0..m {
            let w = a[p].conj() * a[q];
            if w != C64::new(0.0, 0.0) {
                out += rho.view((p * n, q * n), (n, n)) * w;
            }
        }
    }
    out
}

/// Ratio of extreme eigenvalues of `⟨a|ρ|a⟩`, or `None` when it is rank deficient.
fn direction_quality(s: &BipartiteState, a: &CVector, tol: &Tolerances) -> Option<f64> {
    let b = directional_block(s, a);
    if numerical_rank(&b, tol) < s.dim_b() {
        return None;
    }
    let (ev, _) = hermitian_eigen(&b);
    let hi = ev.last().copied().unwrap_or(0.0);
    (hi > 0.0).then(|| ev[0] / hi)
}

/// Samples Haar-random directions and returns the best-conditioned full-rank one.
pub fn find_full_rank_direction<R: Rng + ?Sized>(
    s: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    attempts: usize,
) -> Result<CVector> {
    let m = s.dim_a();
    if m == 1 {
        let a = CVector::from_element(1, ONE);
        return direction_quality(s, &a, tol).map(|_| a).ok_or(Error::DirectionNotFound(0));
    }
    let mut best: Option<(f64, CVector)> = None;
    let mut found = 0;
    for _ in 0..attempts {
        let a = random_unit_vector(rng, m);
        if let Some(q) = direction_quality(s, &a, tol) {
            found += 1;
            if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
                best = Some((q, a));
            }
            if found >= DIRECTION_POOL {
                break;
            }
        }
    }
    best.map(|(_, a)| a).ok_or(Error::DirectionNotFound(attempts))
}

/// Builds and validates the canonical form along direction `a`.
pub fn to_canonical_form(s: &BipartiteState, a: &CVector, tol: &Tolerances) -> Result<CanonicalForm> {
    let (m, n) = s.dims();
    if a.len() != m || a.norm() == 0.0 {
        return Err(Error::DimensionMismatch(format!("direction must be a nonzero vector of length {m}")));
    }
    let u = unitary_with_last_column(a);
    let rotated = s.local_filter(Side::A, &u.adjoint())?;
    let e_mm = rotated.block(m - 1, m - 1)?;
    if numerical_rank(&e_mm, tol) < n {
        return Err(Error::CanonicalMismatch("direction block is rank deficient".into()));
    }
    let v = inv_sqrt_on_range(&e_mm, tol)?;
    let v_inv = sqrt_psd(&e_mm);
    let filtered = rotated.local_filter(Side::B, &v)?;
    let blocks: Vec<CMatrix> = (0..m - 1)
        .map(|k| filtered.block(m - 1, k))
        .collect::<Result<_>>()?;
    let cf = CanonicalForm {
        filter: v,
        filter_inverse: v_inv,
        alice_basis: u,
        blocks,
        filtered,
    };

    let scale = cf.filtered.matrix().norm().max(1.0);
    let defect = (cf.z().adjoint() * cf.z() - cf.filtered.matrix()).norm();
    if defect > tol.residual_abs * scale {
        return Err(Error::CanonicalMismatch(format!(
            "filtered state differs from Z†Z by {defect:.3e}; rank exceeds N"
        )));
    }
    check_commuting_normal(&cf.blocks, tol).map_err(|e| Error::CanonicalMismatch(e.to_string()))?;
    Ok(cf)
}

/// Product vectors of a canonical form, expressed in the original bases.
pub fn canonical_products(cf: &CanonicalForm, tol: &Tolerances) -> Result<Vec<ProductVector>> {
    let n = cf.filter.nrows();
    let m = cf.blocks.len() + 1;
    let (basis, table) = if cf.blocks.is_empty() {
        (CMatrix::identity(n, n), CMatrix::zeros(n, 0))
    } else {
        let jd = joint_diagonalize(&cf.blocks, tol)?;
        (jd.basis, jd.eigenvalues)
    };
    let mut out = Vec::with_capacity(n);
    for l in 0..n {
        let mut e_rot = CVector::from_element(m, ONE);
        for k in 0..m - 1 {
            e_rot[k] = table[(l, k)].conj();
        }
        let e = &cf.alice_basis * e_rot;
        let f = &cf.filter_inverse * basis.column(l);
        out.push(ProductVector { e, f });
    }
    Ok(out)
}

/// Decomposition together with the canonical forms used along the way.
#[derive(Debug, Clone)]
pub struct RankNOutcome {
    pub decomposition: Decomposition,
    pub canonical_forms: Vec<CanonicalForm>,
}

/// Decomposes a rank-`N` PPT state into `N` product projectors.
pub fn decompose_rank_n(s: &BipartiteState, tol: &Tolerances, seed: u64) -> Result<Decomposition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    decompose_rank_n_with(s, tol, &mut rng, DEFAULT_DIRECTION_ATTEMPTS).map(|o| o.decomposition)
}

/// As [`decompose_rank_n`], with an explicit generator and direction budget.
pub fn decompose_rank_n_with<R: Rng + ?Sized>(
    s: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    attempts: usize,
) -> Result<RankNOutcome> {
    if !s.is_ppt(tol) {
        return Err(Error::NotPpt(s.min_eigenvalue_pt()));
    }
    let mut forms = Vec::new();
    let vectors = decompose_general(s, tol, rng, attempts, &mut forms, 0)?;
    let decomposition = Decomposition::from_vectors(&vectors, s.matrix());
    let scale = s.matrix().norm().max(f64::MIN_POSITIVE);
    if decomposition.residual > tol.residual_abs * scale.max(1.0) {
        return Err(Error::DecompositionFailed(format!(
            "reconstruction residual {:.3e}",
            decomposition.residual
        )));
    }
    Ok(RankNOutcome {
        decomposition,
        canonical_forms: forms,
    })
}

/// Compresses, orients so that `M ≤ N`, checks ranks, decomposes and maps back.
fn decompose_general<R: Rng + ?Sized>(
    s: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    attempts: usize,
    forms: &mut Vec<CanonicalForm>,
    depth: usize,
) -> Result<Vec<ProductVector>> {
    let (c, iso) = s.support_compress(tol);
    if c.matrix().norm() == 0.0 {
        return Ok(Vec::new());
    }
    let swapped = c.dim_a() > c.dim_b();
    let c = if swapped { c.swap_parties() } else { c };
    let n = c.dim_b();
    let r = c.rank(tol);
    if r < n {
        return Err(Error::RankTooLow { rank: r, local: n });
    }
    if r > n {
        return Err(Error::RankTooHigh { rank: r, local: n });
    }
    let vecs = decompose_supported(&c, tol, rng, attempts, forms, depth)?;
    Ok(vecs
        .into_iter()
        .map(|p| {
            let p = if swapped { p.swap() } else { p };
            iso.expand_vector(&p)
        })
        .collect())
}

/// `c` is supported on `M×N` with `M ≤ N` and rank `N`.
fn decompose_supported<R: Rng + ?Sized>(
    c: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    attempts: usize,
    forms: &mut Vec<CanonicalForm>,
    depth: usize,
) -> Result<Vec<ProductVector>> {
    let (m, n) = c.dims();
    if depth > m + n {
        return Err(Error::DecompositionFailed("recursion depth exceeded".into()));
    }
    let direction = match find_full_rank_direction(c, tol, rng, attempts) {
        Ok(a) => a,
        Err(_) => match structured_direction(c, tol, rng, forms, depth)? {
            Structured::Direction(a) => a,
            Structured::Split(head, rest) => {
                let mut out = decompose_general(&rest, tol, rng, attempts, forms, depth + 1)?;
                out.push(head);
                return Ok(out);
            }
        },
    };
    let cf = to_canonical_form(c, &direction, tol)?;
    let out = canonical_products(&cf, tol)?;
    forms.push(cf);
    Ok(out)
}

enum Structured {
    Direction(CVector),
    Split(ProductVector, BipartiteState),
}

/// Fallback used when random sampling does not produce a full-rank direction.
///
/// Restrict Alice to the complement of the last computational basis vector.
/// If Bob's reduced rank there is deficient, the complement basis aligns with
/// the kernel and one product term can be split off. Otherwise the restriction
/// is itself a rank-`N` PPT state on `(M−1)×N`; its decomposition tells which
/// directions inside the complement are full rank.
fn structured_direction<R: Rng + ?Sized>(
    c: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    forms: &mut Vec<CanonicalForm>,
    depth: usize,
) -> Result<Structured> {
    let (m, n) = c.dims();
    if m == 1 {
        return Err(Error::DirectionNotFound(0));
    }
    let basis = CMatrix::identity(m, m);
    let complement = basis.columns(0, m - 1).into_owned();
    let w = c.local_map(&complement.adjoint(), &CMatrix::identity(n, n))?;
    if numerical_rank(&w.reduced_b(), tol) < n {
        return match probe_kernel_alignment(c, &basis, tol)? {
            Alignment::Image { f, g } => {
                let step = reduction_step(&basis, &f, &g)?;
                let rest = subtract_product(c, &step, tol)?;
                Ok(Structured::Split(step.product(), rest))
            }
            Alignment::Kernel { .. } => Err(Error::DecompositionFailed(
                "kernel-type alignment on a supported state".into(),
            )),
        };
    }
    // No random directions inside the restriction either: force the fallback.
    let sub = decompose_general(&w, tol, rng, 0, forms, depth + 1)?;
    let mut best: Option<(f64, CVector)> = None;
    for _ in 0..DIRECTION_POOL {
        let x = random_unit_vector(rng, m - 1);
        let q = sub
            .iter()
            .map(|p| x.dotc(&p.e).norm() / p.e.norm())
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, x));
        }
    }
    let (_, x) = best.expect("pool is nonempty");
    let a = &complement * x;
    if direction_quality(c, &a, tol).is_none() {
        return Err(Error::DirectionNotFound(DIRECTION_POOL));
    }
    Ok(Structured::Direction(a))
}
