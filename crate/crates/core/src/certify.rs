//! Separability verdicts.
//!
//! The pipeline tries, in order: the partial-transpose test, the local-rank
//! test, the spectral ball around the maximally mixed state, the rank-`N`
//! decomposition, enumeration of eligible product vectors followed by a
//! nonnegative fit, and finally peeling off eligible product terms one at a
//! time.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon::{decompose_rank_n_with, DEFAULT_DIRECTION_ATTEMPTS};
use crate::error::{Error, Result};
use crate::numlin::{
    hermitian_eigen, least_squares, min_eigenvalue, numerical_rank, projector, range_basis,
    realify, CMatrix, CVector, Tolerances, C64, ZERO,
};
use crate::state::{BipartiteState, Decomposition, ProductVector, Term};
use crate::vectors::{enumerate_eligible, find_eligible_local, EligibleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Separable,
    Entangled,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    #[serde(rename = "NPT")]
    Npt,
    NoEligibleVectors,
    RankBelowLocal,
    /// The eligible set is finite and complete, yet no nonnegative combination reproduces the state.
    NoConvexCombination,
    NonGeneric,
    BudgetExhausted,
}

/// Which stage produced a separable verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ball,
    LocalDimensionOne,
    RankN,
    RankNTwin,
    Subsets,
    Bsa,
    Reduction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dims: (usize, usize),
    pub support_dims: (usize, usize),
    pub rank: usize,
    pub rank_pt: usize,
    pub local_ranks: (usize, usize),
    /// `(k(ρ), k(ρ^TA))` on the support.
    pub kernel_dims: (usize, usize),
    pub min_eigenvalue_pt: f64,
    pub rank_sum_bound: usize,
    pub method: Option<Method>,
    pub eligible_count: Option<usize>,
    pub terminal_degree: Option<usize>,
    pub bsa_lambda: Option<f64>,
    pub independent_projectors: Option<usize>,
    pub peeled_terms: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    pub reason: Option<Reason>,
    pub certificate: Option<Decomposition>,
    /// Eigenvector of `ρ^TA` with negative eigenvalue, for NPT verdicts.
    pub witness: Option<CVector>,
    pub diagnostics: Diagnostics,
}

impl Verdict {
    fn new(status: Status, reason: Option<Reason>, diagnostics: Diagnostics) -> Self {
        Self {
            status,
            reason,
            certificate: None,
            witness: None,
            diagnostics,
        }
    }

    fn separable(cert: Option<Decomposition>, method: Method, mut diagnostics: Diagnostics) -> Self {
        diagnostics.method = Some(method);
        Self {
            certificate: cert,
            ..Self::new(Status::Separable, None, diagnostics)
        }
    }

    pub fn is_separable(&self) -> bool {
        self.status == Status::Separable
    }
}

/// Pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub tol: Tolerances,
    pub seed: u64,
    pub direction_attempts: usize,
    pub subset_budget: usize,
    pub bsa_max_iters: usize,
    /// Random starts per local search for an eligible vector.
    pub local_attempts: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            seed: 0,
            direction_attempts: DEFAULT_DIRECTION_ATTEMPTS,
            subset_budget: 100_000,
            bsa_max_iters: 200,
            local_attempts: 32,
        }
    }
}

/// `λ_min(ρ/tr ρ) ≥ 1/(2+MN)`, sufficient for separability.
pub fn spectral_ball_check(s: &BipartiteState, tol: &Tolerances) -> bool {
    let tr = s.trace();
    if tr <= 0.0 {
        return false;
    }
    let (m, n) = s.dims();
    min_eigenvalue(s.matrix()) / tr >= 1.0 / (2 + m * n) as f64 - tol.psd_abs
}

fn real_columns(vectors: &[ProductVector]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .map(|v| {
            let u = v.kron();
            let u = u.unscale(u.norm());
            realify(&(&u * u.adjoint()))
        })
        .collect()
}

fn as_matrix(cols: &[&Vec<f64>], rows: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols.len(), |i, j| C64::new(cols[j][i], 0.0))
}

/// Least-squares weights on one subset, accepted if the fit is exact and nonnegative.
fn fit_subset(cols: &[&Vec<f64>], target: &CVector, tol: &Tolerances) -> Option<Vec<f64>> {
    let a = as_matrix(cols, target.len());
    let x = least_squares(&a, target, 1e-12);
    let res = (&a * &x - target).norm();
    if res > tol.residual_abs || x.iter().any(|c| c.re < -tol.residual_abs) {
        return None;
    }
    Some(x.iter().map(|c| c.re.max(0.0)).collect())
}

/// Lawson-Hanson nonnegative least squares. Returns the weights and the passive set.
fn nnls(cols: &[Vec<f64>], target: &CVector) -> (Vec<f64>, Vec<usize>) {
    let n = cols.len();
    let rows = target.len();
    let all: Vec<&Vec<f64>> = cols.iter().collect();
    let a = as_matrix(&all, rows);
    let mut x = vec![0.0; n];
    let mut passive: Vec<usize> = Vec::new();
    let scale = target.norm().max(f64::MIN_POSITIVE);
    for _ in 0..3 * n + 10 {
        let xv = CVector::from_iterator(n, x.iter().map(|&v| C64::new(v, 0.0)));
        let resid = target - &a * xv;
        let w: Vec<f64> = (0..n).map(|j| a.column(j).dotc(&resid).re).collect();
        let Some((j, &wj)) = w
            .iter()
            .enumerate()
            .filter(|(j, _)| !passive.contains(j))
            .max_by(|a, b| a.1.total_cmp(b.1))
        else {
            break;
        };
        if wj <= 1e-12 * scale {
            break;
        }
        passive.push(j);
        loop {
            let sub: Vec<&Vec<f64>> = passive.iter().map(|&k| &cols[k]).collect();
            let z = least_squares(&as_matrix(&sub, rows), target, 1e-12);
            if z.iter().all(|c| c.re > 0.0) {
                for (t, &k) in passive.iter().enumerate() {
                    x[k] = z[t].re;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (t, &k) in passive.iter().enumerate() {
                if z[t].re <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z[t].re));
                }
            }
            for (t, &k) in passive.iter().enumerate() {
                x[k] += alpha * (z[t].re - x[k]);
            }
            passive.retain(|&k| x[k] > 1e-15);
            for (k, xk) in x.iter_mut().enumerate() {
                if !passive.contains(&k) {
                    *xk = 0.0;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    (x, passive)
}

/// Searches for `ρ = Σ c_i P_i`, `c_i ≥ 0`, over linearly independent subsets
/// of the eligible projectors.
///
/// A greedy nonnegative least-squares pass runs first; the exhaustive pass
/// then visits every basis of the span of the projectors, which by
/// Carathéodory's theorem covers every nonnegative combination.
pub fn certify_by_subsets(
    s: &BipartiteState,
    es: &EligibleSet,
    tol: &Tolerances,
    budget: usize,
) -> Result<Verdict> {
    let mut diag = Diagnostics {
        eligible_count: Some(es.vectors.len()),
        ..Diagnostics::default()
    };
    if es.vectors.is_empty() {
        return Ok(if es.exhaustive {
            Verdict::new(Status::Entangled, Some(Reason::NoEligibleVectors), diag)
        } else {
            Verdict::new(Status::Inconclusive, Some(Reason::NonGeneric), diag)
        });
    }
    let tr = s.trace();
    let rho = s.matrix().unscale(tr);
    let target = CVector::from_vec(realify(&rho).into_iter().map(|x| C64::new(x, 0.0)).collect());
    let cols = real_columns(&es.vectors);
    let units: Vec<ProductVector> = es
        .vectors
        .iter()
        .map(|v| ProductVector {
            e: v.e.unscale(v.e.norm()),
            f: v.f.unscale(v.f.norm()),
        })
        .collect();
    let accept = |idx: &[usize], w: &[f64]| -> Decomposition {
        let terms = idx
            .iter()
            .zip(w)
            .map(|(&k, &c)| Term {
                weight: c * tr,
                vector: units[k].clone(),
            })
            .collect();
        Decomposition::from_terms(terms, s.matrix())
    };

    let (x, passive) = nnls(&cols, &target);
    let sub: Vec<&Vec<f64>> = passive.iter().map(|&k| &cols[k]).collect();
    if !passive.is_empty() {
        let w: Vec<f64> = passive.iter().map(|&k| x[k]).collect();
        let a = as_matrix(&sub, target.len());
        let xv = CVector::from_iterator(w.len(), w.iter().map(|&v| C64::new(v, 0.0)));
        if (&a * xv - &target).norm() <= tol.residual_abs {
            let d = accept(&passive, &w);
            diag.independent_projectors = Some(d.projector_rank(tol));
            return Ok(Verdict::separable(Some(d), Method::Subsets, diag));
        }
    }

    let all: Vec<&Vec<f64>> = cols.iter().collect();
    let span = numerical_rank(&as_matrix(&all, target.len()), tol);
    let mut visited = 0usize;
    for idx in (0..cols.len()).combinations(span) {
        visited += 1;
        if visited > budget {
            return Err(Error::CombinatorialBudget(budget));
        }
        let sub: Vec<&Vec<f64>> = idx.iter().map(|&k| &cols[k]).collect();
        if numerical_rank(&as_matrix(&sub, target.len()), tol) < span {
            continue;
        }
        if let Some(w) = fit_subset(&sub, &target, tol) {
            let d = accept(&idx, &w);
            diag.independent_projectors = Some(d.projector_rank(tol));
            return Ok(Verdict::separable(Some(d), Method::Subsets, diag));
        }
    }
    Ok(if es.exhaustive {
        Verdict::new(Status::Entangled, Some(Reason::NoConvexCombination), diag)
    } else {
        Verdict::new(Status::Inconclusive, Some(Reason::NonGeneric), diag)
    })
}

/// Outcome of the best separable approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct BsaResult {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Normalized remainder; zero when `λ = 1`.
    pub delta_rho: CMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// `λ` after every sweep, starting with the initial value.
    pub trace: Vec<f64>,
}

impl BsaResult {
    /// `ρ_s = Σ Λ_i P_i` as a decomposition of the given state.
    pub fn separable_part(&self, projectors: &[ProductVector], rho: &CMatrix) -> Decomposition {
        let tr = rho.trace().re;
        let terms = projectors
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| Term {
                weight: w * tr,
                vector: ProductVector {
                    e: p.e.unscale(p.e.norm()),
                    f: p.f.unscale(p.f.norm()),
                },
            })
            .collect();
        Decomposition::from_terms(terms, rho)
    }
}

/// Largest `t` with `m − t|v⟩⟨v| ≥ 0`: `1/⟨v|m⁺|v⟩` when `v ∈ R(m)`, else 0.
fn max_subtractable(m: &CMatrix, v: &CVector, tol: &Tolerances) -> f64 {
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    if top <= 0.0 {
        return 0.0;
    }
    // A looser cut than `rank_rel` keeps freshly touched directions out of the range.
    let cut = top * tol.rank_rel.max(1e-10) * 1e2;
    let mut inv = 0.0;
    let mut outside = 0.0;
    for (k, &l) in vals.iter().enumerate() {
        let c = vecs.column(k).dotc(v).norm_sqr();
        if l > cut {
            inv += c / l;
        } else {
            outside += c;
        }
    }
    if outside.sqrt() > tol.root_abs * 1e-2 || inv <= 0.0 {
        return 0.0;
    }
    1.0 / inv
}

struct BsaData {
    rho: CMatrix,
    rho_ta: CMatrix,
    p: Vec<CMatrix>,
    p_ta: Vec<CMatrix>,
    v: Vec<CVector>,
    v_ta: Vec<CVector>,
}

impl BsaData {
    fn remainder(&self, w: &[f64], skip: &[usize]) -> (CMatrix, CMatrix) {
        let mut d = self.rho.clone();
        let mut dt = self.rho_ta.clone();
        for (k, &wk) in w.iter().enumerate() {
            if wk > 0.0 && !skip.contains(&k) {
                d -= self.p[k].scale(wk);
                dt -= self.p_ta[k].scale(wk);
            }
        }
        (d, dt)
    }

    fn max_weight(&self, i: usize, d: &CMatrix, dt: &CMatrix, tol: &Tolerances) -> f64 {
        max_subtractable(d, &self.v[i], tol).min(max_subtractable(dt, &self.v_ta[i], tol))
    }
}

/// Best separable approximation over a fixed list of product vectors.
pub fn bsa_decompose(
    s: &BipartiteState,
    projectors: &[ProductVector],
    tol: &Tolerances,
    max_iters: usize,
) -> BsaResult {
    let tr = s.trace();
    let rho = s.matrix().unscale(tr);
    let (m, n) = s.dims();
    let unit = |v: CVector| v.unscale(v.norm());
    let v: Vec<CVector> = projectors.iter().map(|p| unit(p.kron())).collect();
    let v_ta: Vec<CVector> = projectors.iter().map(|p| unit(p.partial_conjugate().kron())).collect();
    let data = BsaData {
        rho_ta: crate::state::partial_transpose(&rho, m, n),
        rho,
        p: v.iter().map(|x| x * x.adjoint()).collect(),
        p_ta: v_ta.iter().map(|x| x * x.adjoint()).collect(),
        v,
        v_ta,
    };
    let k = projectors.len();
    let mut w = vec![0.0; k];
    let mut lambda = 0.0;
    let mut trace = vec![0.0];
    let mut converged = k == 0;
    let mut iterations = 0;
    while !converged && iterations < max_iters {
        iterations += 1;
        let before = lambda;
        for i in 0..k {
            let (d, dt) = data.remainder(&w, &[i]);
            let cand = data.max_weight(i, &d, &dt, tol);
            if cand > w[i] {
                w[i] = cand;
            }
        }
        for (i, j) in (0..k).tuple_combinations() {
            pair_step(&data, &mut w, i, j, tol);
        }
        lambda = w.iter().sum();
        // Never report a decrease caused by rounding.
        if lambda < before {
            lambda = before;
        }
        trace.push(lambda);
        if lambda - before < tol.residual_abs || lambda >= 1.0 - tol.residual_abs {
            converged = true;
        }
    }
    let (d, _) = data.remainder(&w, &[]);
    let delta_rho = if lambda < 1.0 - tol.residual_abs {
        d.unscale(1.0 - lambda)
    } else {
        CMatrix::zeros(d.nrows(), d.ncols())
    };
    BsaResult {
        weights: w,
        lambda,
        delta_rho,
        converged,
        iterations,
        trace,
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximizes `Λ_i + Λ_j` with the other weights frozen. The feasible set is
/// convex, so the best `Λ_j` is a concave function of `Λ_i`.
fn pair_step(data: &BsaData, w: &mut [f64], i: usize, j: usize, tol: &Tolerances) {
    let (d, dt) = data.remainder(w, &[i, j]);
    let hi = data.max_weight(i, &d, &dt, tol);
    if hi <= 0.0 {
        return;
    }
    let g = |t: f64| -> (f64, f64) {
        let di = &d - data.p[i].scale(t);
        let dti = &dt - data.p_ta[i].scale(t);
        let sj = data.max_weight(j, &di, &dti, tol);
        (t + sj, sj)
    };
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = g(x1).0;
    let mut f2 = g(x2).0;
    while b - a > tol.residual_abs * 1e-2 * hi.max(1.0) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = g(x2).0;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = g(x1).0;
        }
    }
    let mut best = (w[i] + w[j], w[i], w[j]);
    for t in [a, 0.5 * (a + b), b, 0.0, hi] {
        let (val, sj) = g(t);
        if val > best.0 + tol.residual_abs * 1e-3 {
            best = (val, t, sj);
        }
    }
    w[i] = best.1;
    w[j] = best.2;
}

/// Checks `r(ρ^TA) ≤ MN − r(σ^TA)` for a PPT `σ` supported in `K(ρ)`.
pub fn kernel_witness_bound(s: &BipartiteState, sigma: &BipartiteState, tol: &Tolerances) -> Result<bool> {
    if s.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch("state and witness dimensions differ".into()));
    }
    if !sigma.is_ppt(tol) {
        return Err(Error::PreconditionFailed("witness is not PPT".into()));
    }
    let pr = projector(&range_basis(sigma.matrix(), tol));
    let leak = (s.matrix() * pr).norm() / s.matrix().norm().max(f64::MIN_POSITIVE);
    if leak > tol.root_abs {
        return Err(Error::PreconditionFailed(format!(
            "range of the witness leaves the kernel (overlap {leak:.3e})"
        )));
    }
    let (m, n) = s.dims();
    Ok(s.rank_pt(tol) + sigma.rank_pt(tol) <= m * n)
}

/// Full pipeline.
pub fn separability_check(s: &BipartiteState, config: &Config) -> Verdict {
    let tol = &config.tol;
    let tr = s.trace();
    let (m, n) = s.dims();
    let mut diag = Diagnostics {
        dims: (m, n),
        min_eigenvalue_pt: s.min_eigenvalue_pt(),
        local_ranks: s.local_ranks(tol),
        ..Diagnostics::default()
    };
    if tr <= 0.0 {
        let d = Decomposition::from_terms(Vec::new(), s.matrix());
        return Verdict::separable(Some(d), Method::LocalDimensionOne, diag);
    }
    let normalized = s.normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ctx = Context {
        config,
        rng: &mut rng,
        peeled: 0,
    };
    let mut v = ctx.check(&normalized, &mut diag, 0);
    v.diagnostics.peeled_terms = ctx.peeled;
    if v.status == Status::Entangled && v.reason == Some(Reason::Npt) {
        let (vals, vecs) = hermitian_eigen(&s.partial_transpose());
        if vals[0] < 0.0 {
            v.witness = Some(vecs.column(0).into_owned());
        }
    }
    if let Some(cert) = v.certificate.take() {
        let terms = cert
            .terms
            .into_iter()
            .map(|t| Term {
                weight: t.weight * tr,
                vector: t.vector,
            })
            .collect();
        let full = Decomposition::from_terms(terms, s.matrix());
        let bound = tol.residual_abs * tr.max(1.0);
        if full.residual > bound || full.terms.iter().any(|t| t.weight < 0.0) {
            let mut out = Verdict::new(Status::Inconclusive, Some(Reason::BudgetExhausted), v.diagnostics);
            out.diagnostics.note = Some(format!("certificate residual {:.3e} too large", full.residual));
            out.diagnostics.method = None;
            return out;
        }
        v.diagnostics.independent_projectors = Some(full.projector_rank(tol));
        v.certificate = Some(full);
    }
    v
}

struct Context<'a> {
    config: &'a Config,
    rng: &'a mut ChaCha8Rng,
    peeled: usize,
}

fn expand(cert: Decomposition, iso: &crate::state::Isometries, rho: &CMatrix) -> Decomposition {
    let terms = cert
        .terms
        .into_iter()
        .map(|t| Term {
            weight: t.weight,
            vector: iso.expand_vector(&t.vector),
        })
        .collect();
    Decomposition::from_terms(terms, rho)
}

impl Context<'_> {
    /// Verdict for a trace-one state. Certificates are in the basis of `s`.
    fn check(&mut self, s: &BipartiteState, diag: &mut Diagnostics, depth: usize) -> Verdict {
        let tol = self.config.tol;
        let (c, iso) = s.support_compress(&tol);
        let (mc, nc) = c.dims();
        let r = c.rank(&tol);
        let rt = c.rank_pt(&tol);
        if depth == 0 {
            diag.support_dims = (mc, nc);
            diag.rank = r;
            diag.rank_pt = rt;
            diag.kernel_dims = (mc * nc - r, mc * nc - rt);
            diag.rank_sum_bound = (2 * mc * nc + 2).saturating_sub(mc + nc);
        }
        let d = diag.clone();

        if !c.is_ppt(&tol) {
            return Verdict::new(Status::Entangled, Some(Reason::Npt), d);
        }
        if mc == 1 || nc == 1 {
            let cert = local_dimension_one(&c);
            return Verdict::separable(Some(expand(cert, &iso, s.matrix())), Method::LocalDimensionOne, d);
        }
        let local = mc.max(nc);
        if r < local || rt < local {
            return Verdict::new(Status::Entangled, Some(Reason::RankBelowLocal), d);
        }
        if r == mc * nc && spectral_ball_check(&c, &tol) {
            return Verdict::separable(None, Method::Ball, d);
        }
        if r == local || rt == local {
            if let Some((cert, method)) = self.rank_n(&c, r == local) {
                return Verdict::separable(Some(expand(cert, &iso, s.matrix())), method, d);
            }
        }

        let mut reason = Reason::BudgetExhausted;
        if r + rt <= (2 * mc * nc + 2).saturating_sub(mc + nc) {
            match self.eligible_stage(&c, diag) {
                Ok(v) if v.status != Status::Inconclusive => {
                    let mut v = v;
                    if let Some(cert) = v.certificate.take() {
                        v.certificate = Some(expand(cert, &iso, s.matrix()));
                    }
                    return v;
                }
                Ok(v) => reason = v.reason.unwrap_or(Reason::NonGeneric),
                Err(Error::NonGeneric(_) | Error::DegenerateRowChoice) => reason = Reason::NonGeneric,
                Err(_) => {}
            }
        }

        if depth <= r + rt {
            if let Some(cert) = self.peel(&c, diag, depth) {
                let mut v = Verdict::separable(Some(expand(cert, &iso, s.matrix())), Method::Reduction, d);
                if let Some(m) = diag.method {
                    v.diagnostics.method = Some(m);
                }
                return v;
            }
        }
        let mut v = Verdict::new(Status::Inconclusive, Some(reason), diag.clone());
        v.diagnostics.method = None;
        v
    }

    fn rank_n(&mut self, c: &BipartiteState, direct: bool) -> Option<(Decomposition, Method)> {
        let tol = self.config.tol;
        let attempts = self.config.direction_attempts;
        if direct {
            if let Ok(out) = decompose_rank_n_with(c, &tol, self.rng, attempts) {
                return Some((out.decomposition, Method::RankN));
            }
        }
        // ρ^TA is PPT with partial transpose ρ; its terms |e,f⟩ give |e*,f⟩ for ρ.
        let twin = c.partial_transpose_state();
        let (mc, nc) = c.dims();
        if twin.rank(&tol) != mc.max(nc) {
            return None;
        }
        let out = decompose_rank_n_with(&twin, &tol, self.rng, attempts).ok()?;
        let terms = out
            .decomposition
            .terms
            .into_iter()
            .map(|t| Term {
                weight: t.weight,
                vector: t.vector.partial_conjugate(),
            })
            .collect();
        let d = Decomposition::from_terms(terms, c.matrix());
        (d.residual <= tol.residual_abs).then_some((d, Method::RankNTwin))
    }

    fn eligible_stage(&mut self, c: &BipartiteState, diag: &mut Diagnostics) -> Result<Verdict> {
        let tol = self.config.tol;
        let seed = rand::Rng::random::<u64>(self.rng);
        let es = enumerate_eligible(c, &tol, seed)?;
        if diag.eligible_count.is_none() {
            diag.eligible_count = Some(es.vectors.len());
            diag.terminal_degree = Some(es.terminal_degree);
        }
        let d = diag.clone();
        let verdict = match certify_by_subsets(c, &es, &tol, self.config.subset_budget) {
            Ok(v) => v,
            Err(Error::CombinatorialBudget(_)) => {
                Verdict::new(Status::Inconclusive, Some(Reason::BudgetExhausted), d.clone())
            }
            Err(e) => return Err(e),
        };
        match verdict.status {
            Status::Separable => Ok(Verdict {
                diagnostics: Diagnostics {
                    method: Some(Method::Subsets),
                    ..d
                },
                ..verdict
            }),
            Status::Entangled if verdict.reason == Some(Reason::NoEligibleVectors) => {
                Ok(Verdict::new(Status::Entangled, verdict.reason, d))
            }
            _ => {
                // Missed vectors would show up as an exact BSA split.
                let bsa = bsa_decompose(c, &es.vectors, &tol, self.config.bsa_max_iters);
                diag.bsa_lambda = Some(bsa.lambda);
                let d = diag.clone();
                if bsa.lambda >= 1.0 - tol.residual_abs {
                    let cert = bsa.separable_part(&es.vectors, c.matrix());
                    return Ok(Verdict::separable(Some(cert), Method::Bsa, d));
                }
                Ok(Verdict::new(verdict.status, verdict.reason, d))
            }
        }
    }

    /// Removes a maximal multiple of one eligible product projector and recurses.
    fn peel(&mut self, c: &BipartiteState, diag: &mut Diagnostics, depth: usize) -> Option<Decomposition> {
        let tol = self.config.tol;
        let v = find_eligible_local(c, &tol, self.rng, self.config.local_attempts)?;
        let u = v.kron();
        let u = u.unscale(u.norm());
        let ut = v.partial_conjugate().kron();
        let ut = ut.unscale(ut.norm());
        let rho = c.matrix();
        let rho_ta = c.partial_transpose();
        let lambda = max_subtractable(rho, &u, &tol).min(max_subtractable(&rho_ta, &ut, &tol));
        if lambda <= 0.0 || lambda > 1.0 + tol.residual_abs {
            return None;
        }
        let unit = ProductVector {
            e: v.e.unscale(v.e.norm()),
            f: v.f.unscale(v.f.norm()),
        };
        let head = Term {
            weight: lambda,
            vector: unit,
        };
        let (mc, nc) = c.dims();
        let rest = rho - (&u * u.adjoint()).scale(lambda);
        let rest_tr = rest.trace().re;
        let mut terms = vec![head];
        if rest_tr > tol.residual_abs {
            let rest = clip_to_range(&rest, &tol);
            let rest = BipartiteState::from_parts(mc, nc, rest.unscale(rest_tr)).normalize();
            if rest.rank(&tol) + rest.rank_pt(&tol) >= c.rank(&tol) + c.rank_pt(&tol) {
                return None;
            }
            self.peeled += 1;
            let sub = self.check(&rest, diag, depth + 1);
            let cert = sub.certificate?;
            terms.extend(cert.terms.into_iter().map(|t| Term {
                weight: t.weight * rest_tr,
                vector: t.vector,
            }));
        } else {
            self.peeled += 1;
        }
        let d = Decomposition::from_terms(terms, rho);
        (d.residual <= tol.residual_abs).then_some(d)
    }
}

/// Drops eigenvalues that are zero relative to the largest.
fn clip_to_range(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.last().copied().unwrap_or(0.0);
    let mut out = CMatrix::from_element(m.nrows(), m.ncols(), ZERO);
    for (k, &l) in vals.iter().enumerate() {
        if l > tol.rank_rel * top {
            let v = vecs.column(k);
            out += (v * v.adjoint()).scale(l);
        }
    }
    out
}

/// A state with one local dimension equal to one is a product of its eigenvectors.
fn local_dimension_one(c: &BipartiteState) -> Decomposition {
    let m = c.dim_a();
    let (vals, vecs) = hermitian_eigen(c.matrix());
    let terms = vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.0)
        .map(|(k, &l)| {
            let col = vecs.column(k).into_owned();
            let vector = if m == 1 {
                ProductVector {
                    e: CVector::from_element(1, C64::new(1.0, 0.0)),
                    f: col,
                }
            } else {
                ProductVector {
                    e: col,
                    f: CVector::from_element(1, C64::new(1.0, 0.0)),
                }
            };
            Term { weight: l, vector }
        })
        .collect();
    Decomposition::from_terms(terms, c.matrix())
}

#[cfg(test)]
mod tests;
