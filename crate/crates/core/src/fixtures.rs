//! Deterministic generators and reference states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{
    kron_vec, numerical_rank, random_complex_vector, random_unit_vector, CMatrix, CVector,
    Tolerances, C64, ONE, ZERO,
};
use crate::state::{BipartiteState, Decomposition, ProductVector, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SeparableRandom,
    PptRandom,
    Werner,
    Isotropic,
    TilesUpb,
    MaximallyMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub dims: (usize, usize),
    pub terms: usize,
    /// Exact `r(ρ)` target for random families.
    pub rank: Option<usize>,
    /// Exact `r(ρ^TA)` target, reached by rejection sampling.
    pub rank_pt: Option<usize>,
    pub p: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn separable(m: usize, n: usize, terms: usize, seed: u64) -> Self {
        Self {
            family: Family::SeparableRandom,
            dims: (m, n),
            terms,
            rank: None,
            rank_pt: None,
            p: 0.0,
            seed,
        }
    }
}

const REJECTION_BUDGET: usize = 1000;

/// Runs a generator spec. The planted decomposition is returned for separable families.
pub fn generate(spec: &GeneratorSpec) -> Result<(BipartiteState, Option<Decomposition>)> {
    match spec.family {
        Family::SeparableRandom => random_separable(spec).map(|(s, d)| (s, Some(d))),
        Family::PptRandom => {
            let r = spec.rank.unwrap_or(spec.terms);
            ppt_random(spec.dims.0, spec.dims.1, r, spec.seed).map(|s| (s, None))
        }
        Family::Werner => werner_family(spec.p).map(|s| (s, None)),
        Family::Isotropic => isotropic(spec.dims.0, spec.p).map(|s| (s, None)),
        Family::TilesUpb => Ok((tiles_upb_state(), None)),
        Family::MaximallyMixed => {
            let (m, n) = spec.dims;
            if m == 0 || n == 0 {
                return Err(Error::InfeasibleSpec("dimensions must be positive".into()));
            }
            Ok((maximally_mixed(m, n), None))
        }
    }
}

/// `Σ p_i |e_i,f_i⟩⟨e_i,f_i|` with Haar-random factors and flat Dirichlet weights.
pub fn random_separable(spec: &GeneratorSpec) -> Result<(BipartiteState, Decomposition)> {
    let (m, n) = spec.dims;
    let k = spec.terms;
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::InfeasibleSpec("dimensions and term count must be positive".into()));
    }
    if let Some(r) = spec.rank {
        if r > k || r > m * n {
            return Err(Error::InfeasibleSpec(format!("rank {r} unreachable with {k} terms on {m}x{n}")));
        }
    }
    if let Some(r) = spec.rank_pt {
        if r > k || r > m * n {
            return Err(Error::InfeasibleSpec(format!("partial-transpose rank {r} unreachable")));
        }
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..REJECTION_BUDGET {
        let (s, d) = sample_separable(&mut rng, m, n, k);
        let ok_rank = spec.rank.is_none_or(|r| s.rank(&tol) == r);
        let ok_pt = spec.rank_pt.is_none_or(|r| s.rank_pt(&tol) == r);
        if ok_rank && ok_pt {
            return Ok((s, d));
        }
    }
    Err(Error::InfeasibleSpec(format!(
        "no sample reached the requested ranks within {REJECTION_BUDGET} draws"
    )))
}

fn sample_separable(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> (BipartiteState, Decomposition) {
    let weights = dirichlet(rng, k);
    let terms: Vec<Term> = weights
        .iter()
        .map(|&w| Term {
            weight: w,
            vector: ProductVector {
                e: random_unit_vector(rng, m),
                f: random_unit_vector(rng, n),
            },
        })
        .collect();
    let mut rho = CMatrix::zeros(m * n, m * n);
    for t in &terms {
        rho += t.vector.projector().scale(t.weight);
    }
    let rho = rho.unscale(rho.trace().re);
    let s = BipartiteState::from_parts(m, n, rho).normalize();
    let d = Decomposition::from_terms(terms, s.matrix());
    (s, d)
}

/// Separable state from explicit vectors and weights (weights renormalized).
pub fn separable_from_terms(m: usize, n: usize, terms: &[Term]) -> Result<(BipartiteState, Decomposition)> {
    let total: f64 = terms.iter().map(|t| t.weight).sum();
    if terms.is_empty() || total <= 0.0 {
        return Err(Error::InfeasibleSpec("need at least one positively weighted term".into()));
    }
    let mut rho = CMatrix::zeros(m * n, m * n);
    let mut scaled = Vec::with_capacity(terms.len());
    for t in terms {
        if t.vector.e.len() != m || t.vector.f.len() != n {
            return Err(Error::DimensionMismatch("term dimensions".into()));
        }
        let v = t.vector.canonical();
        let w = t.weight / total;
        rho += v.projector().scale(w);
        scaled.push(Term { weight: w, vector: v });
    }
    let s = BipartiteState::from_parts(m, n, rho).normalize();
    let d = Decomposition::from_terms(scaled, s.matrix());
    Ok((s, d))
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Rank-`r` Wishart state conditioned on being PPT (rejection sampling).
pub fn ppt_random(m: usize, n: usize, r: usize, seed: u64) -> Result<BipartiteState> {
    if m == 0 || n == 0 || r == 0 || r > m * n {
        return Err(Error::InfeasibleSpec(format!("rank {r} infeasible on {m}x{n}")));
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..REJECTION_BUDGET {
        let g = CMatrix::from_fn(m * n, r, |_, _| random_complex_vector(&mut rng, 1)[0]);
        let s = BipartiteState::from_parts(m, n, &g * g.adjoint()).normalize();
        if s.is_ppt(&tol) {
            return Ok(s);
        }
    }
    Err(Error::InfeasibleSpec(format!(
        "no PPT rank-{r} sample on {m}x{n} within {REJECTION_BUDGET} draws"
    )))
}

/// State built as `ρ' + λ|a_M,g⟩⟨a_M,g|` where every `|a_i, f⟩` lies in `K(ρ')`.
#[derive(Debug, Clone)]
pub struct PlantedReduction {
    pub state: BipartiteState,
    /// `ρ'`, scaled consistently with `state`.
    pub rest: BipartiteState,
    pub alice_basis: CMatrix,
    pub f: CVector,
    pub g: CVector,
    pub lambda: f64,
}

/// Planted instance in a Haar-random Alice basis. `rest_terms` product terms
/// make up `ρ'`, their Bob factors orthogonal to `f`.
pub fn planted_reduction(m: usize, n: usize, rest_terms: usize, seed: u64) -> Result<PlantedReduction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let u = crate::numlin::random_unitary(&mut rng, m);
    planted_reduction_in_basis(&u, n, rest_terms, seed)
}

pub fn planted_reduction_in_basis(
    alice_basis: &CMatrix,
    n: usize,
    rest_terms: usize,
    seed: u64,
) -> Result<PlantedReduction> {
    let m = alice_basis.nrows();
    if n < 2 || m == 0 || rest_terms == 0 {
        return Err(Error::InfeasibleSpec("need N ≥ 2 and at least one remaining term".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_unit_vector(&mut rng, n);
    let weights = dirichlet(&mut rng, rest_terms + 1);
    let mut rest = CMatrix::zeros(m * n, m * n);
    for &w in &weights[1..] {
        let e = random_unit_vector(&mut rng, m);
        let mut fb = random_unit_vector(&mut rng, n);
        fb -= &f * f.dotc(&fb);
        let fb = fb.unscale(fb.norm());
        rest += ProductVector { e, f: fb }.projector().scale(w);
    }
    let g = random_unit_vector(&mut rng, n);
    let a = alice_basis.column(m - 1).into_owned();
    let planted = ProductVector { e: a, f: g.clone() }.projector().scale(weights[0]);
    let rho = &rest + planted;
    let tr = rho.trace().re;
    let state = BipartiteState::from_parts(m, n, rho.unscale(tr)).normalize();
    let rest = BipartiteState::from_parts(m, n, rest.unscale(tr));
    Ok(PlantedReduction {
        state,
        rest,
        alice_basis: alice_basis.clone(),
        f,
        g,
        lambda: weights[0] / tr,
    })
}

fn phi_plus(d: usize) -> CVector {
    let s = 1.0 / (d as f64).sqrt();
    CVector::from_fn(d * d, |k, _| if k % (d + 1) == 0 { C64::new(s, 0.0) } else { ZERO })
}

/// `p|Φ+⟩⟨Φ+| + (1−p) I/4` on 2×2.
pub fn werner_family(p: f64) -> Result<BipartiteState> {
    isotropic(2, p)
}

/// `p|Φ+⟩⟨Φ+| + (1−p) I/d²` on d×d.
pub fn isotropic(d: usize, p: f64) -> Result<BipartiteState> {
    if !(0.0..=1.0).contains(&p) || d == 0 {
        return Err(Error::InfeasibleSpec(format!("mixing parameter {p} outside [0, 1]")));
    }
    let v = phi_plus(d);
    let dd = (d * d) as f64;
    let rho = (&v * v.adjoint()).scale(p) + CMatrix::identity(d * d, d * d).scale((1.0 - p) / dd);
    Ok(BipartiteState::from_parts(d, d, rho).normalize())
}

pub fn maximally_mixed(m: usize, n: usize) -> BipartiteState {
    let d = m * n;
    BipartiteState::from_parts(m, n, CMatrix::identity(d, d).scale(1.0 / d as f64)).normalize()
}

fn basis(n: usize, coeffs: &[(usize, f64)]) -> CVector {
    let mut v = CVector::zeros(n);
    for &(i, c) in coeffs {
        v[i] = C64::new(c, 0.0);
    }
    v.unscale(v.norm())
}

/// The five Tiles product vectors.
pub fn tiles_vectors() -> Vec<ProductVector> {
    let k = |c: &[(usize, f64)]| basis(3, c);
    vec![
        ProductVector { e: k(&[(0, 1.0)]), f: k(&[(0, 1.0), (1, -1.0)]) },
        ProductVector { e: k(&[(0, 1.0), (1, -1.0)]), f: k(&[(2, 1.0)]) },
        ProductVector { e: k(&[(2, 1.0)]), f: k(&[(1, 1.0), (2, -1.0)]) },
        ProductVector { e: k(&[(1, 1.0), (2, -1.0)]), f: k(&[(0, 1.0)]) },
        ProductVector {
            e: k(&[(0, 1.0), (1, 1.0), (2, 1.0)]),
            f: k(&[(0, 1.0), (1, 1.0), (2, 1.0)]),
        },
    ]
}

/// `(I − Σ_j |u_j⟩⟨u_j|)/4` over the Tiles basis.
pub fn tiles_upb_state() -> BipartiteState {
    let vs = tiles_vectors();
    debug_assert!(validate_upb(&vs, &Tolerances::default()).is_ok());
    let mut rho = CMatrix::identity(9, 9);
    for v in &vs {
        rho -= v.projector();
    }
    BipartiteState::from_parts(3, 3, rho.scale(0.25)).normalize()
}

/// Checks orthonormality and unextendibility of a set of product vectors.
///
/// A set is unextendible iff for every split of the vectors into two groups,
/// the Alice factors of one group span `C^M` or the Bob factors of the other
/// span `C^N`.
pub fn validate_upb(vs: &[ProductVector], tol: &Tolerances) -> Result<()> {
    let kets: Vec<CVector> = vs.iter().map(|v| kron_vec(&v.e, &v.f)).collect();
    for i in 0..kets.len() {
        for j in 0..kets.len() {
            let ov = kets[i].dotc(&kets[j]);
            let want = if i == j { ONE } else { ZERO };
            if (ov - want).norm() > tol.residual_abs {
                return Err(Error::PreconditionFailed(format!("vectors {i} and {j} are not orthonormal")));
            }
        }
    }
    let (m, n) = (vs[0].e.len(), vs[0].f.len());
    let span = |vecs: Vec<&CVector>, d: usize| -> usize {
        if vecs.is_empty() {
            return 0;
        }
        let mat = CMatrix::from_fn(d, vecs.len(), |r, c| vecs[c][r]);
        numerical_rank(&mat, tol)
    };
    for mask in 0u32..(1 << vs.len()) {
        let a: Vec<&CVector> = (0..vs.len()).filter(|i| mask & (1 << i) != 0).map(|i| &vs[i].e).collect();
        let b: Vec<&CVector> = (0..vs.len()).filter(|i| mask & (1 << i) == 0).map(|i| &vs[i].f).collect();
        if span(a, m) < m && span(b, n) < n {
            return Err(Error::PreconditionFailed(format!(
                "a product vector is orthogonal to the set (split mask {mask:#b})"
            )));
        }
    }
    Ok(())
}
