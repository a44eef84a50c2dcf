//! Tolerance-aware dense linear algebra on complex matrices.
//!
//! Every routine here is a pure function of its inputs. Rank decisions are
//! relative to the largest singular value so that unnormalized (filtered)
//! operators are treated the same way as normalized states.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
/// Dense complex matrix, row-major semantics via nalgebra indexing `(row, col)`.
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical thresholds shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Singular values below `rank_rel * sigma_max` count as zero.
    pub rank_rel: f64,
    /// Eigenvalue floor (scaled by the trace) used for positivity tests.
    pub psd_abs: f64,
    /// Frobenius residual allowed in reconstruction checks.
    pub residual_abs: f64,
    /// Residual allowed when verifying polynomial roots and kernel constraints.
    pub root_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: 1e-9,
            psd_abs: 1e-9,
            residual_abs: 1e-8,
            root_abs: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn new(rank_rel: f64, psd_abs: f64, residual_abs: f64, root_abs: f64) -> Result<Self> {
        let tol = Self {
            rank_rel,
            psd_abs,
            residual_abs,
            root_abs,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_rel", self.rank_rel),
            ("psd_abs", self.psd_abs),
            ("residual_abs", self.residual_abs),
            ("root_abs", self.root_abs),
        ] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::InvalidTolerances(format!(
                    "{name} = {v} must lie in (0, 1e-2]"
                )));
            }
        }
        Ok(())
    }

    /// Eigenvalue floor for an operator of the given trace.
    pub fn psd_floor(&self, trace: f64) -> f64 {
        if trace > 0.0 {
            self.psd_abs * trace
        } else {
            self.psd_abs
        }
    }
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

// The SVD routines in nalgebra 0.35 can return factors that do not recompose
// rank-deficient inputs, so singular vectors come from one-sided Jacobi.

const JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi: returns the singular values (descending, one per column)
/// and the unitary `V` of right singular vectors. `A V` has orthogonal columns.
fn jacobi_svd(m: &CMatrix) -> (Vec<f64>, CMatrix, CMatrix) {
    let c = m.ncols();
    let mut a = m.clone();
    let mut v = CMatrix::identity(c, c);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)];
                        mat[(i, p)] = xp * cs - xq * phase.conj() * sn;
                        mat[(i, q)] = xp * phase * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s = order.iter().map(|&j| norms[j]).collect();
    let a = CMatrix::from_fn(a.nrows(), c, |i, j| a[(i, order[j])]);
    let v = CMatrix::from_fn(c, c, |i, j| v[(i, order[j])]);
    (s, a, v)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Vec::new();
    }
    let (s, _, _) = if c > r { jacobi_svd(&m.adjoint()) } else { jacobi_svd(m) };
    s.into_iter().take(r.min(c)).collect()
}

fn rank_from_singular(s: &[f64], tol: &Tolerances) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= f64::MIN_POSITIVE {
        return 0;
    }
    s.iter().filter(|&&x| x > tol.rank_rel * smax).count()
}

pub fn numerical_rank(m: &CMatrix, tol: &Tolerances) -> usize {
    rank_from_singular(&singular_values(m), tol)
}

/// Singular values (descending, padded with zeros to the column count) and the
/// matching right singular vectors as columns of a unitary.
pub fn right_singular_vectors(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let c = m.ncols();
    if m.nrows() == 0 {
        return (vec![0.0; c], CMatrix::identity(c, c));
    }
    let (s, _, v) = jacobi_svd(m);
    (s, v)
}

/// Minimum-norm least-squares solution of `a x ≈ b`, ignoring singular
/// values below `rcond` times the largest.
pub fn least_squares(a: &CMatrix, b: &CVector, rcond: f64) -> CVector {
    let c = a.ncols();
    let mut x = CVector::zeros(c);
    if a.nrows() == 0 || c == 0 {
        return x;
    }
    let (s, av, v) = jacobi_svd(a);
    let cut = rcond * s[0];
    for (j, &sj) in s.iter().enumerate() {
        if sj > cut && sj > 0.0 {
            let coeff = av.column(j).dotc(b) / (sj * sj);
            x += v.column(j) * coeff;
        }
    }
    x
}

/// Orthonormal basis of the numerical null space, one vector per column.
pub fn kernel_basis(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    let c = m.ncols();
    if m.nrows() == 0 {
        return CMatrix::identity(c, c);
    }
    let (s, _, v) = jacobi_svd(m);
    let rank = rank_from_singular(&s, tol).min(m.nrows());
    v.columns(rank, c - rank).into_owned()
}

/// Orthonormal basis of the numerical column space, one vector per column.
pub fn range_basis(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    let r = m.nrows();
    if m.ncols() == 0 || r == 0 {
        return CMatrix::zeros(r, 0);
    }
    // Left singular vectors of `m` are the right ones of `m†`.
    let (s, _, v) = jacobi_svd(&m.adjoint());
    let rank = rank_from_singular(&s, tol).min(m.ncols());
    v.columns(0, rank).into_owned()
}

/// Orthogonal projector `B B^dag` onto the span of orthonormal columns.
pub fn projector(basis: &CMatrix) -> CMatrix {
    basis * basis.adjoint()
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn check_hermitian(m: &CMatrix, tol: &Tolerances) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let d = hermiticity_defect(m);
    if d > tol.residual_abs * m.norm().max(1.0) {
        return Err(Error::NotHermitian(d));
    }
    Ok(())
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

fn spectral_function(vals: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> f64, cutoff: f64) -> CMatrix {
    let n = vecs.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam > cutoff {
            let v = vecs.column(k);
            out += (v * v.adjoint()).scale(f(lam));
        }
    }
    out
}

/// Moore-Penrose inverse of a Hermitian PSD matrix.
pub fn pseudo_inverse(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    ensure_finite(m)?;
    check_hermitian(m, tol)?;
    let (vals, vecs) = hermitian_eigen(m);
    let lmax = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    Ok(spectral_function(&vals, &vecs, |l| 1.0 / l, tol.rank_rel * lmax))
}

/// `X` with `X m X` equal to the projector onto the range of `m`; vanishes on the kernel.
pub fn inv_sqrt_on_range(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    ensure_finite(m)?;
    check_hermitian(m, tol)?;
    let (vals, vecs) = hermitian_eigen(m);
    let trace_norm: f64 = vals.iter().map(|l| l.abs()).sum();
    if let Some(&lmin) = vals.first() {
        if lmin < -tol.psd_floor(trace_norm) {
            return Err(Error::NotPsd(lmin));
        }
    }
    let lmax = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    Ok(spectral_function(&vals, &vecs, |l| 1.0 / l.sqrt(), tol.rank_rel * lmax))
}

/// Square root of a Hermitian PSD matrix (negative noise eigenvalues clipped).
pub fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    spectral_function(&vals, &vecs, f64::sqrt, 0.0)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Common eigenbasis of a commuting family of normal matrices.
#[derive(Debug, Clone)]
pub struct JointDiagonalization {
    /// Unitary whose columns are the common eigenvectors.
    pub basis: CMatrix,
    /// Row `i`, column `k`: eigenvalue of family member `k` on eigenvector `i`.
    pub eigenvalues: CMatrix,
}

/// Checks normality and pairwise commutation (with adjoints) of a family.
/// Thresholds are `residual_abs` relative to the product of norms.
pub fn check_commuting_normal(family: &[CMatrix], tol: &Tolerances) -> Result<()> {
    for (k, c) in family.iter().enumerate() {
        let scale = c.norm_squared().max(1.0);
        let d = commutator(c, &c.adjoint()).norm();
        if d > tol.residual_abs * scale {
            return Err(Error::NonNormal(k, d));
        }
    }
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let scale = (family[i].norm() * family[j].norm()).max(1.0);
            let d1 = commutator(&family[i], &family[j]).norm();
            let d2 = commutator(&family[i], &family[j].adjoint()).norm();
            let d = d1.max(d2);
            if d > tol.residual_abs * scale {
                return Err(Error::NonCommutingFamily(d));
            }
        }
    }
    Ok(())
}

/// Simultaneous diagonalization of commuting normal matrices.
///
/// The family is split into Hermitian and anti-Hermitian parts. A generic
/// real combination of those parts seeds the basis, then complex Jacobi
/// sweeps drive the joint off-diagonal mass of all parts to zero.
pub fn joint_diagonalize(family: &[CMatrix], tol: &Tolerances) -> Result<JointDiagonalization> {
    let n = match family.first() {
        Some(c) => c.nrows(),
        None => {
            return Err(Error::DimensionMismatch("empty family".into()));
        }
    };
    for c in family {
        ensure_finite(c)?;
        if c.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "family member of shape {:?}, expected {n}x{n}",
                c.shape()
            )));
        }
    }
    check_commuting_normal(family, tol)?;

    let mut parts: Vec<CMatrix> = Vec::with_capacity(2 * family.len());
    for c in family {
        parts.push(hermitian_part(c));
        parts.push((c - c.adjoint()).scale(0.5).map(|z| z * -I));
    }
    let scale = parts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    // Irrational weights make accidental degeneracies of the seed unlikely.
    let mut seed = CMatrix::zeros(n, n);
    for (k, p) in parts.iter().enumerate() {
        let w = 1.0 / (1.0 + (k as f64 + 2.0).sqrt());
        seed += p.scale(w / p.norm().max(f64::MIN_POSITIVE));
    }
    let (_, mut basis) = hermitian_eigen(&seed);
    let mut rotated: Vec<CMatrix> = parts.iter().map(|p| basis.adjoint() * p * &basis).collect();

    for _sweep in 0..100 {
        let mut changed = false;
        for p in 0..n {
            for q in (p + 1)..n {
                if jacobi_rotation(&mut rotated, &mut basis, p, q, scale) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let raw = CMatrix::from_fn(n, family.len(), |i, k| {
        let b = basis.column(i);
        (b.adjoint() * &family[k] * b)[(0, 0)]
    });
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        for k in 0..family.len() {
            let ord = raw[(a, k)]
                .re
                .total_cmp(&raw[(b, k)].re)
                .then(raw[(a, k)].im.total_cmp(&raw[(b, k)].im));
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });
    let basis = CMatrix::from_fn(n, n, |i, j| basis[(i, order[j])]);
    let eigenvalues = CMatrix::from_fn(n, family.len(), |i, k| raw[(order[i], k)]);
    Ok(JointDiagonalization { basis, eigenvalues })
}

/// One Cardoso-Souloumiac complex Givens rotation on the plane (p, q).
/// Returns whether a non-negligible rotation was applied.
fn jacobi_rotation(mats: &mut [CMatrix], basis: &mut CMatrix, p: usize, q: usize, scale: f64) -> bool {
    let mut g = nalgebra::Matrix3::<f64>::zeros();
    for a in mats.iter() {
        let h = [
            a[(p, p)] - a[(q, q)],
            a[(p, q)] + a[(q, p)],
            I * (a[(q, p)] - a[(p, q)]),
        ];
        for r in 0..3 {
            for c in 0..3 {
                g[(r, c)] += (h[r] * h[c].conj()).re;
            }
        }
    }
    let off: f64 = mats.iter().map(|a| a[(p, q)].norm_sqr() + a[(q, p)].norm_sqr()).sum();
    if off.sqrt() <= 1e-15 * scale {
        return false;
    }
    let eig = g.symmetric_eigen();
    let mut best = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] > eig.eigenvalues[best] {
            best = k;
        }
    }
    let mut v = eig.eigenvectors.column(best).into_owned();
    if v[0] < 0.0 {
        v = -v;
    }
    let c = (0.5 + v[0] / 2.0).sqrt();
    if c <= 1e-300 {
        return false;
    }
    let sr = C64::new(v[1], -v[2]) * (0.5 / c);
    let sc = sr.conj();
    if sr.norm() <= 1e-15 {
        return false;
    }
    let cc = C64::new(c, 0.0);
    for a in mats.iter_mut() {
        let n = a.nrows();
        for i in 0..n {
            let ap = a[(i, p)];
            let aq = a[(i, q)];
            a[(i, p)] = cc * ap + sr * aq;
            a[(i, q)] = cc * aq - sc * ap;
        }
        for j in 0..n {
            let ap = a[(p, j)];
            let aq = a[(q, j)];
            a[(p, j)] = cc * ap + sc * aq;
            a[(q, j)] = cc * aq - sr * ap;
        }
    }
    let n = basis.nrows();
    for i in 0..n {
        let bp = basis[(i, p)];
        let bq = basis[(i, q)];
        basis[(i, p)] = cc * bp + sr * bq;
        basis[(i, q)] = cc * bq - sc * bp;
    }
    true
}

/// Sum of squared moduli of off-diagonal entries.
pub fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Real coordinates of a Hermitian matrix: real parts then imaginary parts.
pub fn realify(m: &CMatrix) -> Vec<f64> {
    let mut out: Vec<f64> = m.iter().map(|z| z.re).collect();
    out.extend(m.iter().map(|z| z.im));
    out
}

/// Kronecker product of two vectors, `a` as the slow index.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let n = b.len();
    CVector::from_fn(a.len() * n, |k, _| a[k / n] * b[k % n])
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    loop {
        let v = random_complex_vector(rng, n);
        let norm = v.norm();
        if norm > 1e-6 {
            return v.unscale(norm);
        }
    }
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Unitary whose last column is the unit vector `a`. The other columns are
/// the standard basis vectors, minus the one along `a`'s largest entry,
/// orthonormalized against `a`.
pub fn unitary_with_last_column(a: &CVector) -> CMatrix {
    let m = a.len();
    let a = a.unscale(a.norm());
    let skip = a.icamax();
    let mut u = CMatrix::zeros(m, m);
    u.set_column(m - 1, &a);
    for (k, j) in (0..m).filter(|&j| j != skip).enumerate() {
        let mut v = CVector::zeros(m);
        v[j] = ONE;
        for _ in 0..2 {
            for t in (0..k).chain(std::iter::once(m - 1)) {
                let q = u.column(t).into_owned();
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        u.set_column(k, &v.unscale(v.norm()));
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn diag(vals: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ))
    }

    /// Random rank-2 4x4 Hermitian matrix from explicit spectral factors.
    fn rank_two(rng: &mut ChaCha8Rng) -> (CMatrix, CMatrix) {
        let v = random_unitary(rng, 4);
        (&v * diag(&[1.0, 2.0, 0.0, 0.0]) * v.adjoint(), v)
    }

    #[test]
    fn hermitian_eigen_recomposes_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut worst: f64 = 0.0;
        for trial in 0..400 {
            let n = 4 + trial % 13;
            let k = 1 + trial % n;
            let g = CMatrix::from_fn(n, k, |_, _| random_complex_vector(&mut rng, 1)[0]);
            let m = &g * g.adjoint();
            let (vals, vecs) = hermitian_eigen(&m);
            let d = CMatrix::from_diagonal(&CVector::from_iterator(n, vals.iter().map(|&x| C64::new(x, 0.0))));
            let rec = (&vecs * d * vecs.adjoint() - &m).norm() / m.norm();
            worst = worst.max(rec);
            assert!((vecs.adjoint() * &vecs - CMatrix::identity(n, n)).norm() < 1e-12);
        }
        assert!(worst < 1e-13, "worst recomposition error {worst:e}");
    }

    #[test]
    fn bases_recompose_rank_deficient_hermitian() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let g = CMatrix::from_fn(9, 4, |_, _| random_complex_vector(&mut rng, 1)[0]);
            let m = &g * g.adjoint();
            let r = range_basis(&m, &t);
            let k = kernel_basis(&m, &t);
            assert_eq!((r.ncols(), k.ncols()), (4, 5));
            let p = projector(&r);
            assert!((&p * &m - &m).norm() < 1e-12 * m.norm());
            assert!((&m * &k).norm() < 1e-12 * m.norm());
            assert!((r.adjoint() * &k).norm() < 1e-12);
            let (s, v) = right_singular_vectors(&m);
            assert!((v.adjoint() * &v - CMatrix::identity(9, 9)).norm() < 1e-12);
            for (i, &x) in s.iter().enumerate() {
                assert!(((&m * v.column(i)).norm() - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bases_of_rectangular_matrices() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for (r, c, k) in [(2, 5, 2), (6, 3, 2), (4, 4, 1)] {
            let a = CMatrix::from_fn(r, k, |_, _| random_complex_vector(&mut rng, 1)[0]);
            let b = CMatrix::from_fn(k, c, |_, _| random_complex_vector(&mut rng, 1)[0]);
            let m = a * b;
            assert_eq!(numerical_rank(&m, &t), k);
            let ker = kernel_basis(&m, &t);
            assert_eq!(ker.ncols(), c - k);
            assert!((&m * &ker).norm() < 1e-12 * m.norm());
            let ran = range_basis(&m, &t);
            assert_eq!(ran.ncols(), k);
            assert!((&m - projector(&ran) * &m).norm() < 1e-12 * m.norm());
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&CMatrix::identity(3, 3), &tol()), 3);
        assert_eq!(numerical_rank(&diag(&[1.0, 1e-14, 0.0]), &tol()), 1);
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 3), &tol()), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random_complex_vector(&mut rng, 2);
        let f = random_complex_vector(&mut rng, 3);
        let v = kron_vec(&e, &f);
        assert_eq!(numerical_rank(&(&v * v.adjoint()), &tol()), 1);
    }

    #[test]
    fn tolerances_must_be_small_and_positive() {
        assert!(Tolerances::new(1e-9, 1e-9, 1e-8, 1e-6).is_ok());
        assert!(Tolerances::new(0.0, 1e-9, 1e-8, 1e-6).is_err());
        assert!(Tolerances::new(1e-9, 0.5, 1e-8, 1e-6).is_err());
    }

    #[test]
    fn kernel_and_range_examples() {
        assert_eq!(kernel_basis(&CMatrix::identity(4, 4), &tol()).ncols(), 0);
        let k = kernel_basis(&CMatrix::zeros(2, 2), &tol());
        assert_eq!(k.ncols(), 2);
        assert!((k.adjoint() * &k - CMatrix::identity(2, 2)).norm() < 1e-12);
        assert_eq!(range_basis(&CMatrix::identity(5, 5), &tol()).ncols(), 5);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, v) = rank_two(&mut rng);
        let k = kernel_basis(&m, &tol());
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() <= tol().residual_abs * m.norm());
        let r = range_basis(&m, &tol());
        assert_eq!(r.ncols(), 2);
        // Same subspace as the top two spectral vectors.
        let top = v.columns(0, 2).into_owned();
        assert!((projector(&r) - projector(&top)).norm() < 1e-10);

        let u = random_unit_vector(&mut rng, 3);
        let r = range_basis(&(&u * u.adjoint()), &tol());
        assert_eq!(r.ncols(), 1);
        assert!((1.0 - (r.column(0).adjoint() * &u)[(0, 0)].norm()) < 1e-12);
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CMatrix::from_fn(2, 5, |_, _| random_complex_vector(&mut rng, 1)[0]);
        let k = kernel_basis(&a, &tol());
        assert_eq!(k.ncols(), 3);
        assert!((&a * &k).norm() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let id = CMatrix::identity(3, 3);
        assert!((pseudo_inverse(&id, &tol()).unwrap() - &id).norm() < 1e-14);
        let p = pseudo_inverse(&diag(&[2.0, 0.0]), &tol()).unwrap();
        assert!((p - diag(&[0.5, 0.0])).norm() < 1e-14);
        let mut nh = CMatrix::identity(2, 2);
        nh[(0, 1)] = ONE;
        assert!(matches!(pseudo_inverse(&nh, &tol()), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn penrose_identities_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rank in 1..=4 {
            let a = CMatrix::from_fn(rank, 4, |_, _| random_complex_vector(&mut rng, 1)[0]);
            let m = a.adjoint() * &a;
            let x = pseudo_inverse(&m, &tol()).unwrap();
            let r = tol().residual_abs * m.norm().max(x.norm());
            assert!((&x * &m * &x - &x).norm() < r);
            assert!((&m * &x * &m - &m).norm() < r);
            assert!(hermiticity_defect(&(&x * &m)) < r);
            assert!(hermiticity_defect(&(&m * &x)) < r);
        }
    }

    #[test]
    fn inv_sqrt_examples() {
        let id = CMatrix::identity(3, 3);
        assert!((inv_sqrt_on_range(&id, &tol()).unwrap() - &id).norm() < 1e-14);
        let x = inv_sqrt_on_range(&diag(&[4.0, 0.0]), &tol()).unwrap();
        assert!((x - diag(&[0.5, 0.0])).norm() < 1e-14);
        assert!(matches!(
            inv_sqrt_on_range(&diag(&[1.0, -0.5]), &tol()),
            Err(Error::NotPsd(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CMatrix::from_fn(4, 4, |_, _| random_complex_vector(&mut rng, 1)[0]);
        let c = a.adjoint() * &a;
        let x = inv_sqrt_on_range(&c, &tol()).unwrap();
        assert!((&x * &c * &x - CMatrix::identity(4, 4)).norm() < tol().residual_abs);
    }

    fn assert_diagonalizes(family: &[CMatrix], jd: &JointDiagonalization) {
        let u = &jd.basis;
        let n = u.nrows();
        assert!((u.adjoint() * u - CMatrix::identity(n, n)).norm() < 1e-10);
        for (k, c) in family.iter().enumerate() {
            let d = u.adjoint() * c * u;
            assert!(off_diagonal_norm(&d) <= 1e-8 * c.norm().max(1.0), "member {k}");
            for i in 0..n {
                assert!((d[(i, i)] - jd.eigenvalues[(i, k)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_diagonalize_diagonal_family() {
        let fam = vec![diag(&[1.0, 2.0]), diag(&[3.0, 4.0])];
        let jd = joint_diagonalize(&fam, &tol()).unwrap();
        assert_diagonalizes(&fam, &jd);
        // Identity up to phase: each column has a single unit-modulus entry.
        for j in 0..2 {
            let col = jd.basis.column(j);
            let big = col.iter().filter(|z| z.norm() > 1.0 - 1e-10).count();
            assert_eq!(big, 1);
        }
        assert!((jd.eigenvalues[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((jd.eigenvalues[(1, 1)].re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn joint_diagonalize_normal_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = random_unitary(&mut rng, 4);
        let d = CMatrix::from_diagonal(&random_complex_vector(&mut rng, 4));
        let b = &u * d * u.adjoint();
        let fam = vec![b.clone(), b.adjoint()];
        let jd = joint_diagonalize(&fam, &tol()).unwrap();
        assert_diagonalizes(&fam, &jd);
    }

    #[test]
    fn joint_diagonalize_recovers_shared_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let u = random_unitary(&mut rng, 4);
        // Degenerate in the first member, split by the second.
        let d1 = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ONE, I, -ONE]));
        let d2 = CMatrix::from_diagonal(&random_complex_vector(&mut rng, 4));
        let fam = vec![&u * d1 * u.adjoint(), &u * d2 * u.adjoint()];
        let jd = joint_diagonalize(&fam, &tol()).unwrap();
        assert_diagonalizes(&fam, &jd);
        // Each recovered vector is parallel to one planted column.
        for j in 0..4 {
            let overlaps: Vec<f64> = (0..4)
                .map(|i| (u.column(i).adjoint() * jd.basis.column(j))[(0, 0)].norm())
                .collect();
            assert!(overlaps.iter().any(|&o| (o - 1.0).abs() < 1e-8));
        }
    }

    #[test]
    fn joint_diagonalize_rejects_bad_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = CMatrix::from_fn(3, 3, |_, _| random_complex_vector(&mut rng, 1)[0]);
        assert!(matches!(
            joint_diagonalize(&[a], &tol()),
            Err(Error::NonNormal(0, _))
        ));
        let h1 = hermitian_part(&CMatrix::from_fn(3, 3, |_, _| random_complex_vector(&mut rng, 1)[0]));
        let h2 = hermitian_part(&CMatrix::from_fn(3, 3, |_, _| random_complex_vector(&mut rng, 1)[0]));
        assert!(matches!(
            joint_diagonalize(&[h1, h2], &tol()),
            Err(Error::NonCommutingFamily(_))
        ));
    }
}
