//! Eligible product vectors: `|e,f⟩ ∈ R(ρ)` with `|e*,f⟩ ∈ R(ρ^TA)`.
//!
//! Writing `e = (1, α_2, …, α_M)` in a generic Alice basis, such a vector
//! exists iff the constraint matrix `A(α, ᾱ)` built from the two kernels has
//! rank below `N`. The `N×N` minors of `A` give polynomial equations in the
//! free coordinates, which are solved by elimination and then polished on the
//! full constraint system.

pub mod elimination;
pub mod poly;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numlin::{
    kernel_basis, least_squares, numerical_rank, projector, random_complex_vector, random_unitary,
    range_basis, right_singular_vectors, singular_values, CMatrix, CVector, Tolerances, C64, ONE, ZERO,
};
use crate::state::{BipartiteState, ProductVector, Side};
use elimination::{back_substitute, eliminate, Elimination};
use poly::{determinant, MultiPoly};

/// Random Alice bases tried before a non-generic verdict is reported.
pub const ROTATION_ATTEMPTS: usize = 3;

const POLISH_ITERS: usize = 60;

const ROTATION_STREAM: u64 = 0x0e1e;

/// Orthonormal kernel bases of `ρ` and `ρ^TA`, stored as columns.
#[derive(Debug, Clone)]
pub struct KernelData {
    pub dim_a: usize,
    pub dim_b: usize,
    pub k_rho: CMatrix,
    pub k_rho_ta: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    /// Rows from `K(ρ)`, linear in `α`.
    Rho,
    /// Rows from `K(ρ^TA)`, linear in `ᾱ`.
    RhoTa,
}

impl KernelData {
    pub fn k(&self) -> usize {
        self.k_rho.ncols()
    }

    pub fn k_ta(&self) -> usize {
        self.k_rho_ta.ncols()
    }

    /// Bob vector `k_i^m` (or `k̃_i^m`): Alice block `m` of kernel vector `i`.
    pub fn component(&self, group: Group, i: usize, m: usize) -> CVector {
        let basis = match group {
            Group::Rho => &self.k_rho,
            Group::RhoTa => &self.k_rho_ta,
        };
        basis.view((m * self.dim_b, i), (self.dim_b, 1)).into_owned().column(0).into_owned()
    }

    fn rows(&self) -> Vec<(Group, usize)> {
        (0..self.k())
            .map(|i| (Group::Rho, i))
            .chain((0..self.k_ta()).map(|i| (Group::RhoTa, i)))
            .collect()
    }

    /// `Coef[m]` with `A(α) = Σ_m α_m D_m + ᾱ_m T_m`; returns `(D_m, T_m)`.
    fn coefficient_matrices(&self) -> Vec<(CMatrix, CMatrix)> {
        let rows = self.rows();
        let (m, n) = (self.dim_a, self.dim_b);
        (0..m)
            .map(|a| {
                let mut d = CMatrix::zeros(rows.len(), n);
                let mut t = CMatrix::zeros(rows.len(), n);
                for (r, &(g, i)) in rows.iter().enumerate() {
                    let k = self.component(g, i, a);
                    let target = if g == Group::Rho { &mut d } else { &mut t };
                    for c in 0..n {
                        target[(r, c)] = k[c].conj();
                    }
                }
                (d, t)
            })
            .collect()
    }
}

/// Kernel bases of `ρ` and `ρ^TA`, requiring `k(ρ) + k(ρ^TA) ≥ M + N − 2`.
pub fn kernel_data(s: &BipartiteState, tol: &Tolerances) -> Result<KernelData> {
    let (m, n) = s.dims();
    let k_rho = kernel_basis(s.matrix(), tol);
    let k_rho_ta = kernel_basis(&s.partial_transpose(), tol);
    let need = (m + n).saturating_sub(2);
    if k_rho.ncols() + k_rho_ta.ncols() < need {
        return Err(Error::RankSumTooHigh(k_rho.ncols(), k_rho_ta.ncols(), need));
    }
    Ok(KernelData {
        dim_a: m,
        dim_b: n,
        k_rho,
        k_rho_ta,
    })
}

/// `A(α)`: rows `Σ_m α_m ⟨k_i^m|` followed by rows `Σ_m ᾱ_m ⟨k̃_i^m|`.
pub fn constraint_matrix(kd: &KernelData, alpha: &CVector) -> CMatrix {
    assert_eq!(alpha.len(), kd.dim_a, "alpha length");
    let coef = kd.coefficient_matrices();
    let mut a = CMatrix::zeros(kd.k() + kd.k_ta(), kd.dim_b);
    for (m, (d, t)) in coef.iter().enumerate() {
        a += d * alpha[m] + t * alpha[m].conj();
    }
    a
}

/// Polynomial system extracted from the minors of `A`.
#[derive(Debug, Clone)]
pub struct MinorSystem {
    /// Variables `x_0..x_{M−2}` stand for `α_2..α_M`, `y_j = x_{j+M−1}` for their conjugates.
    pub nvars: usize,
    pub polys: Vec<MultiPoly>,
    /// Group whose variables are solved for.
    pub primary: Group,
    /// Whether the system only involves the primary group's variables.
    pub holomorphic: bool,
    /// Base rows shared by every minor.
    pub base_rows: Vec<(Group, usize)>,
}

impl MinorSystem {
    pub fn primary_vars(&self) -> Vec<usize> {
        let h = self.nvars / 2;
        match self.primary {
            Group::Rho => (0..h).collect(),
            Group::RhoTa => (h..2 * h).collect(),
        }
    }

    pub fn secondary_vars(&self) -> Vec<usize> {
        let h = self.nvars / 2;
        match self.primary {
            Group::Rho => (h..2 * h).collect(),
            Group::RhoTa => (0..h).collect(),
        }
    }
}

fn row_poly(kd: &KernelData, g: Group, i: usize) -> Vec<MultiPoly> {
    let h = kd.dim_a - 1;
    let nvars = 2 * h;
    let comps: Vec<CVector> = (0..kd.dim_a).map(|m| kd.component(g, i, m)).collect();
    let offset = if g == Group::Rho { 0 } else { h };
    (0..kd.dim_b)
        .map(|c| {
            let lin: Vec<(usize, C64)> = (1..kd.dim_a).map(|m| (offset + m - 1, comps[m][c].conj())).collect();
            MultiPoly::affine(nvars, comps[0][c].conj(), &lin)
        })
        .collect()
}

/// Builds the minor polynomials: `N−1` base rows plus each remaining row.
pub fn minor_polynomials<R: Rng + ?Sized>(kd: &KernelData, rng: &mut R) -> Result<MinorSystem> {
    let (m, n) = (kd.dim_a, kd.dim_b);
    if m < 2 {
        return Err(Error::PreconditionFailed("minor polynomials need M ≥ 2".into()));
    }
    let h = m - 1;
    let nvars = 2 * h;
    let primary = if kd.k() >= kd.k_ta() { Group::Rho } else { Group::RhoTa };
    let all = kd.rows();
    let (p_rows, s_rows): (Vec<_>, Vec<_>) = all.iter().partition(|(g, _)| *g == primary);
    let ordered: Vec<(Group, usize)> = p_rows.iter().chain(s_rows.iter()).copied().collect();
    if ordered.len() < n {
        return Err(Error::RankSumTooHigh(kd.k(), kd.k_ta(), n));
    }
    let polys: Vec<Vec<MultiPoly>> = ordered.iter().map(|&(g, i)| row_poly(kd, g, i)).collect();

    // Generic rank of the base rows, judged at a random point.
    let point: Vec<C64> = random_complex_vector(rng, nvars).iter().copied().collect();
    let numeric = |idx: &[usize]| {
        CMatrix::from_fn(idx.len(), n, |r, c| polys[idx[r]][c].eval(&point))
    };
    let tol = Tolerances::default();
    let base: Vec<usize> = (0..ordered.len())
        .combinations(n - 1)
        .take(10_000)
        .find(|idx| idx.is_empty() || numerical_rank(&numeric(idx), &tol) == n - 1)
        .ok_or(Error::DegenerateRowChoice)?;

    let mut pure = Vec::new();
    let mut mixed = Vec::new();
    for r in (0..ordered.len()).filter(|r| !base.contains(r)) {
        let mut mat: Vec<Vec<MultiPoly>> = base.iter().map(|&b| polys[b].clone()).collect();
        mat.push(polys[r].clone());
        let det = determinant(&mat);
        if det.is_empty() {
            continue;
        }
        let only_primary = base.iter().chain(std::iter::once(&r)).all(|&i| ordered[i].0 == primary);
        if only_primary {
            pure.push(det);
        } else {
            mixed.push(det);
        }
    }
    let base_rows = base.iter().map(|&b| ordered[b]).collect();
    if pure.len() >= h {
        return Ok(MinorSystem {
            nvars,
            polys: pure,
            primary,
            holomorphic: true,
            base_rows,
        });
    }
    let secondary: Vec<usize> = match primary {
        Group::Rho => (h..2 * h).collect(),
        Group::RhoTa => (0..h).collect(),
    };
    if let Some(linear) = linear_elimination(&mixed, &secondary, h) {
        let mut system = pure.clone();
        system.extend(linear);
        if system.len() >= h {
            return Ok(MinorSystem {
                nvars,
                polys: system,
                primary,
                holomorphic: false,
                base_rows,
            });
        }
    }
    let mut system: Vec<MultiPoly> = pure.into_iter().chain(mixed).collect();
    let conj: Vec<MultiPoly> = system.iter().map(|p| p.conj_swap(h)).collect();
    system.extend(conj);
    Ok(MinorSystem {
        nvars,
        polys: system,
        primary,
        holomorphic: false,
        base_rows,
    })
}

/// Cap on the `(h+1)`-minors taken from the linear system in the secondary variables.
const LINEAR_MINOR_CAP: usize = 24;

/// When every mixed minor is affine in the secondary variables `s`, writes them
/// as `L(p)·(1, s) = 0` and returns the `(h+1)`-minors of `L`, which vanish
/// exactly when some `s` solves the system.
fn linear_elimination(mixed: &[MultiPoly], secondary: &[usize], h: usize) -> Option<Vec<MultiPoly>> {
    if mixed.len() < h + 1 {
        return None;
    }
    let affine = mixed.iter().all(|p| {
        p.terms().all(|(e, _)| secondary.iter().map(|&v| e[v]).sum::<u32>() <= 1)
    });
    if !affine {
        return None;
    }
    let rows: Vec<Vec<MultiPoly>> = mixed
        .iter()
        .map(|p| {
            let mut constant = p.clone();
            for &v in secondary {
                constant = constant.substitute(v, ZERO);
            }
            let mut row = vec![constant];
            row.extend(secondary.iter().map(|&v| p.coeff_in(v, 1)));
            row
        })
        .collect();
    let minors: Vec<MultiPoly> = (0..rows.len())
        .combinations(h + 1)
        .take(LINEAR_MINOR_CAP)
        .map(|idx| determinant(&idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()))
        .filter(|d| !d.pruned(0.0).is_empty())
        .collect();
    Some(minors)
}

/// Eliminates the secondary variables first, then all primary ones but the last.
pub fn solve_minor_system(sys: &MinorSystem) -> Result<(Elimination, Vec<CVector>)> {
    let mut order: Vec<usize> = sys
        .secondary_vars()
        .into_iter()
        .filter(|&v| sys.polys.iter().any(|p| p.contains(v)))
        .collect();
    order.extend(sys.primary_vars());
    let elim = eliminate(&sys.polys, &order)?;
    let points = back_substitute(&elim, sys.nvars, &sys.primary_vars())?;
    let h = sys.nvars / 2;
    let alphas = points
        .into_iter()
        .map(|p| {
            let mut alpha = CVector::from_element(h + 1, ONE);
            for (j, v) in sys.primary_vars().into_iter().enumerate() {
                let z = p[v].expect("primary variables are back-substituted");
                alpha[j + 1] = if sys.primary == Group::Rho { z } else { z.conj() };
            }
            alpha
        })
        .collect();
    Ok((elim, alphas))
}

/// Gauss–Newton on `A(α, ᾱ) f = 0` over `α_2..α_M` and `f` with its largest entry pinned.
pub fn polish(kd: &KernelData, alpha0: &CVector) -> Option<(CVector, CVector, f64)> {
    let (m, n) = (kd.dim_a, kd.dim_b);
    let coef = kd.coefficient_matrices();
    let build = |alpha: &CVector| {
        let mut a = CMatrix::zeros(kd.k() + kd.k_ta(), n);
        for (k, (d, t)) in coef.iter().enumerate() {
            a += d * alpha[k] + t * alpha[k].conj();
        }
        a
    };
    let mut alpha = alpha0.clone();
    let a0 = build(&alpha);
    let (_, v) = right_singular_vectors(&a0);
    let mut f: CVector = v.column(n - 1).into_owned();
    let p = f.icamax();
    if f[p].norm() == 0.0 {
        return None;
    }
    f /= f[p];

    let rows = a0.nrows();
    let unknowns = 2 * (m - 1) + 2 * (n - 1);
    let mut res = build(&alpha) * &f;
    for _ in 0..POLISH_ITERS {
        let rn = res.norm();
        if rn == 0.0 || !rn.is_finite() {
            break;
        }
        let a = build(&alpha);
        let mut jac = CMatrix::zeros(2 * rows, unknowns);
        let mut col = 0;
        let put = |jac: &mut CMatrix, col: usize, v: &CVector| {
            for r in 0..rows {
                jac[(r, col)] = C64::new(v[r].re, 0.0);
                jac[(rows + r, col)] = C64::new(v[r].im, 0.0);
            }
        };
        for (d, t) in coef.iter().skip(1) {
            let df = d * &f;
            let tf = t * &f;
            put(&mut jac, col, &(&df + &tf));
            put(&mut jac, col + 1, &((&df - &tf) * C64::new(0.0, 1.0)));
            col += 2;
        }
        for c in (0..n).filter(|&c| c != p) {
            let ac: CVector = a.column(c).into_owned();
            put(&mut jac, col, &ac);
            put(&mut jac, col + 1, &(ac * C64::new(0.0, 1.0)));
            col += 2;
        }
        let rhs = CVector::from_fn(2 * rows, |r, _| {
            C64::new(if r < rows { -res[r].re } else { -res[r - rows].im }, 0.0)
        });
        let step: Vec<f64> = least_squares(&jac, &rhs, 1e-12).iter().map(|z| z.re).collect();
        let mut k = 0;
        let mut alpha_new = alpha.clone();
        for j in 1..m {
            alpha_new[j] += C64::new(step[k], step[k + 1]);
            k += 2;
        }
        let mut f_new = f.clone();
        for c in (0..n).filter(|&c| c != p) {
            f_new[c] += C64::new(step[k], step[k + 1]);
            k += 2;
        }
        let res_new = build(&alpha_new) * &f_new;
        if !(res_new.norm() < rn) {
            break;
        }
        let done = res_new.norm() <= 1e-15 * (1.0 + f_new.norm());
        alpha = alpha_new;
        f = f_new;
        res = res_new;
        if done {
            break;
        }
    }
    let scale = (1.0 + alpha.norm()) * f.norm();
    let rel = res.norm() / scale;
    let fnorm = f.norm();
    Some((alpha, f.unscale(fnorm), rel))
}

/// Range-membership residuals `(‖(1−P_R(ρ))v‖, ‖(1−P_R(ρ^TA))v*‖)` for the unit tensors.
pub fn eligibility_residuals(s: &BipartiteState, v: &ProductVector, tol: &Tolerances) -> (f64, f64) {
    let pr = projector(&range_basis(s.matrix(), tol));
    let pt = projector(&range_basis(&s.partial_transpose(), tol));
    eligibility_residuals_with(&pr, &pt, v)
}

fn eligibility_residuals_with(pr: &CMatrix, pt: &CMatrix, v: &ProductVector) -> (f64, f64) {
    let u = v.kron();
    let u = u.unscale(u.norm());
    let w = v.partial_conjugate().kron();
    let w = w.unscale(w.norm());
    ((&u - pr * &u).norm(), (&w - pt * &w).norm())
}

/// Result of the enumeration.
#[derive(Debug, Clone)]
pub struct EligibleSet {
    pub vectors: Vec<ProductVector>,
    /// Set when elimination succeeded, so every solution was among the candidates.
    pub exhaustive: bool,
    /// Bound on the candidate count implied by the elimination degrees.
    pub degree_bound: usize,
    /// Degree of the terminal univariate eliminant.
    pub terminal_degree: usize,
    /// Candidates that reached the polishing stage.
    pub candidates: usize,
    pub holomorphic: bool,
}

/// Finds all eligible product vectors of a state meeting the rank-sum bound.
pub fn enumerate_eligible(s: &BipartiteState, tol: &Tolerances, seed: u64) -> Result<EligibleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Keep the rotations independent of fixtures drawn from the same seed.
    rng.set_stream(ROTATION_STREAM);
    let mut last_err = Error::NonGeneric("no attempt made".into());
    for _ in 0..ROTATION_ATTEMPTS {
        match enumerate_in_random_basis(s, tol, &mut rng) {
            Ok(set) => return Ok(set),
            Err(e @ (Error::NonGeneric(_) | Error::DegenerateRowChoice)) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn enumerate_in_random_basis<R: Rng + ?Sized>(
    s: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
) -> Result<EligibleSet> {
    let (m, n) = s.dims();
    let u = random_unitary(rng, m);
    let rotated = s.local_filter(Side::A, &u.adjoint())?;
    let kd = kernel_data(&rotated, tol)?;

    let (alphas, terminal_degree, degree_bound, holomorphic) = if m == 1 {
        (vec![CVector::from_element(1, ONE)], 0, 1, true)
    } else {
        let sys = minor_polynomials(&kd, rng)?;
        let (elim, alphas) = solve_minor_system(&sys)?;
        let mut bound = elim.terminal_degree().max(1);
        for st in elim.stages.iter().filter(|st| sys.primary_vars().contains(&st.var)) {
            bound *= st.polys.iter().map(|p| p.degree_in(st.var) as usize).min().unwrap_or(1).max(1);
        }
        (alphas, elim.terminal_degree(), bound, sys.holomorphic)
    };
    let candidates = alphas.len();

    let pr = projector(&range_basis(s.matrix(), tol));
    let pt = projector(&range_basis(&s.partial_transpose(), tol));
    let polished: Vec<Result<Option<ProductVector>>> = alphas
        .par_iter()
        .map(|a0| {
            let Some((alpha, f, rel)) = polish(&kd, a0) else {
                return Ok(None);
            };
            if rel > tol.root_abs {
                return Ok(None);
            }
            let a = constraint_matrix(&kd, &alpha);
            let sv = singular_values(&a);
            let top = sv.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
            if n >= 2 && sv.len() >= n && sv[n - 2] <= tol.root_abs * top {
                return Err(Error::NonGeneric(
                    "constraint matrix has a kernel of dimension two or more".into(),
                ));
            }
            let v = ProductVector { e: &u * &alpha, f };
            let (r1, r2) = eligibility_residuals_with(&pr, &pt, &v);
            Ok((r1 <= tol.root_abs && r2 <= tol.root_abs).then_some(v))
        })
        .collect();
    let mut vectors: Vec<ProductVector> = Vec::new();
    for p in polished {
        if let Some(v) = p? {
            let v = v.canonical();
            if vectors.iter().all(|w| w.phase_distance(&v) > tol.root_abs.sqrt() * 1e-2) {
                vectors.push(v);
            }
        }
    }
    Ok(EligibleSet {
        vectors,
        exhaustive: true,
        degree_bound,
        terminal_degree,
        candidates,
        holomorphic,
    })
}

/// Local search for a single eligible vector from random starting points.
/// Meant for states whose eligible set is not finite.
pub fn find_eligible_local<R: Rng + ?Sized>(
    s: &BipartiteState,
    tol: &Tolerances,
    rng: &mut R,
    attempts: usize,
) -> Option<ProductVector> {
    let m = s.dim_a();
    let u = random_unitary(rng, m);
    let rotated = s.local_filter(Side::A, &u.adjoint()).ok()?;
    let kd = KernelData {
        dim_a: m,
        dim_b: s.dim_b(),
        k_rho: kernel_basis(rotated.matrix(), tol),
        k_rho_ta: kernel_basis(&rotated.partial_transpose(), tol),
    };
    let pr = projector(&range_basis(s.matrix(), tol));
    let pt = projector(&range_basis(&s.partial_transpose(), tol));
    for _ in 0..attempts {
        let mut a0 = random_complex_vector(rng, m);
        a0[0] = ONE;
        if kd.k() + kd.k_ta() == 0 {
            let f = random_complex_vector(rng, s.dim_b());
            return Some(ProductVector { e: &u * a0, f }.canonical());
        }
        let Some((alpha, f, rel)) = polish(&kd, &a0) else { continue };
        if rel > tol.root_abs * 1e-2 {
            continue;
        }
        let v = ProductVector { e: &u * &alpha, f };
        let (r1, r2) = eligibility_residuals_with(&pr, &pt, &v);
        if r1 <= tol.root_abs && r2 <= tol.root_abs {
            return Some(v.canonical());
        }
    }
    None
}

/// Whether `|e,f⟩` and `|e*,f⟩` lie in the respective ranges to `root_abs`.
pub fn is_eligible(s: &BipartiteState, v: &ProductVector, tol: &Tolerances) -> bool {
    let (a, b) = eligibility_residuals(s, v, tol);
    a <= tol.root_abs && b <= tol.root_abs
}

/// Constraint residual `‖A(α) f‖` for a product vector given in the state's own basis.
pub fn constraint_residual(kd: &KernelData, v: &ProductVector) -> f64 {
    let e = &v.e;
    if e[0].norm() == 0.0 {
        return f64::INFINITY;
    }
    let alpha = e.map(|z| z / e[0]);
    (constraint_matrix(kd, &alpha) * &v.f).norm() / v.f.norm()
}
