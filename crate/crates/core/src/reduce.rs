//! Rank-lowering subtraction of a single product projector.
//!
//! Given an Alice basis `{a_i}`, look for `f` with `|a_i, f⟩ ∈ K(ρ)` for all
//! but the last basis vector. For a PPT state, `ρ|a_M, f⟩` is then either zero
//! or of the product form `|a_M, g⟩`, and removing `λ|a_M,g⟩⟨a_M,g|` with
//! `λ = 1/⟨g|f⟩` lowers both `r(ρ)` and `r(ρ^TA)` by one.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numlin::{
    kernel_basis, kron_vec, numerical_rank, random_unitary, right_singular_vectors, CMatrix,
    CVector, Tolerances, C64,
};
use crate::state::{BipartiteState, ProductVector};

#[derive(Debug, Clone, PartialEq)]
pub enum Alignment {
    /// `|a_M, f⟩` is also in the kernel.
    Kernel { f: CVector },
    /// `ρ|a_M, f⟩ = |a_M, g⟩`.
    Image { f: CVector, g: CVector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionStep {
    pub alice_basis: CMatrix,
    pub f: CVector,
    pub g: CVector,
    pub lambda: f64,
}

impl ReductionStep {
    /// Last Alice basis vector `a_M`.
    pub fn alice_last(&self) -> CVector {
        self.alice_basis.column(self.alice_basis.ncols() - 1).into_owned()
    }

    /// The subtracted term `√λ |a_M, g⟩`.
    pub fn product(&self) -> ProductVector {
        ProductVector {
            e: self.alice_last(),
            f: self.g.scale(self.lambda.sqrt()),
        }
    }
}

/// `ρ (a ⊗ I)` as an `MN × N` matrix.
fn slice_along(rho: &CMatrix, a: &CVector, n: usize) -> CMatrix {
    let m = a.len();
    let mut out = CMatrix::zeros(m * n, n);
    for (i, &ai) in a.iter().enumerate() {
        if ai != C64::new(0.0, 0.0) {
            out += rho.columns(i * n, n) * ai;
        }
    }
    out
}

/// Looks for the shared Bob direction `f` along the first `M−1` basis vectors.
pub fn probe_kernel_alignment(
    s: &BipartiteState,
    alice_basis: &CMatrix,
    tol: &Tolerances,
) -> Result<Alignment> {
    let (m, n) = s.dims();
    if alice_basis.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("Alice basis must be {m}x{m}")));
    }
    let rho = s.matrix();
    let scale = rho.norm().max(f64::MIN_POSITIVE);
    let cols: Vec<CVector> = (0..m).map(|i| alice_basis.column(i).into_owned()).collect();

    let candidates = if m == 1 {
        CMatrix::identity(n, n)
    } else {
        let mut stacked = CMatrix::zeros((m - 1) * m * n, n);
        for (i, a) in cols[..m - 1].iter().enumerate() {
            stacked
                .view_mut((i * m * n, 0), (m * n, n))
                .copy_from(&slice_along(rho, a, n).unscale(scale));
        }
        kernel_basis(&stacked, tol)
    };
    if candidates.ncols() == 0 {
        return Err(Error::NoAlignment);
    }

    // Pick the candidate with the largest image along a_M.
    let last = &cols[m - 1];
    let image = slice_along(rho, last, n) * &candidates;
    let (sv, v) = right_singular_vectors(&image);
    let smax = sv[0];
    let coeffs = v.column(0).into_owned();
    let f = &candidates * coeffs;
    let f = f.unscale(f.norm());

    if smax <= tol.residual_abs * scale {
        return Ok(Alignment::Kernel { f });
    }
    let w = rho * kron_vec(last, &f);
    let g = CVector::from_fn(n, |j, _| {
        (0..m).map(|i| last[i].conj() * w[i * n + j]).sum()
    });
    let off = (&w - kron_vec(last, &g)).norm();
    if off > tol.root_abs * w.norm() {
        return Err(Error::DecompositionFailed(format!(
            "image of the aligned vector is not a product with a_M (defect {off:.3e}); state not PPT?"
        )));
    }
    Ok(Alignment::Image { f, g })
}

/// Builds the rank-lowering step from an image-type alignment.
pub fn reduction_step(alice_basis: &CMatrix, f: &CVector, g: &CVector) -> Result<ReductionStep> {
    let gf = g.dotc(f);
    if gf.re <= 0.0 {
        return Err(Error::DecompositionFailed(format!("⟨g|f⟩ = {gf} is not positive")));
    }
    Ok(ReductionStep {
        alice_basis: alice_basis.clone(),
        f: f.clone(),
        g: g.clone(),
        lambda: 1.0 / gf.re,
    })
}

/// `ρ₁ = ρ − λ|a_M,g⟩⟨a_M,g|`, checking that both ranks drop by exactly one.
pub fn subtract_product(
    s: &BipartiteState,
    step: &ReductionStep,
    tol: &Tolerances,
) -> Result<BipartiteState> {
    let (m, n) = s.dims();
    if step.g.len() != n || step.alice_basis.shape() != (m, m) {
        return Err(Error::DimensionMismatch("reduction step does not fit the state".into()));
    }
    let r0 = s.rank(tol);
    let rt0 = s.rank_pt(tol);
    let p = step.product().projector();
    let out = BipartiteState::from_parts(m, n, s.matrix() - p);
    let r1 = out.rank(tol);
    let rt1 = out.rank_pt(tol);
    if r1 + 1 != r0 || rt1 + 1 != rt0 {
        return Err(Error::RankDropViolation(r0, r1, rt0, rt1));
    }
    Ok(out)
}

/// Probes the computational basis, then up to `attempts` random bases, for an
/// image-type alignment.
pub fn find_reduction<R: Rng + ?Sized>(
    s: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    attempts: usize,
) -> Option<ReductionStep> {
    let m = s.dim_a();
    let mut bases = vec![CMatrix::identity(m, m)];
    bases.extend((0..attempts).map(|_| random_unitary(rng, m)));
    for u in bases {
        if let Ok(Alignment::Image { f, g }) = probe_kernel_alignment(s, &u, tol) {
            if let Ok(step) = reduction_step(&u, &f, &g) {
                return Some(step);
            }
        }
    }
    None
}

/// Rank of `ρ` restricted along the single Alice direction `a`.
pub fn directional_rank(s: &BipartiteState, a: &CVector, tol: &Tolerances) -> usize {
    let n = s.dim_b();
    let block = CMatrix::from_fn(n, n, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for (p, ap) in a.iter().enumerate() {
            for (q, aq) in a.iter().enumerate() {
                acc += ap.conj() * s.matrix()[(p * n + i, q * n + j)] * aq;
            }
        }
        acc
    });
    numerical_rank(&block, tol)
}
