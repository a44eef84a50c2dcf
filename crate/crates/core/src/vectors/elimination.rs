//! Variable-by-variable elimination by pairwise cross-multiplication, and the
//! back-substitution that recovers the eliminated coordinates.

use nalgebra::Schur;

use super::poly::{determinant_bounded, MultiPoly};
use crate::error::{Error, Result};
use crate::numlin::{CMatrix, C64, ONE, ZERO};

/// Relative residual below which a substituted polynomial counts as vanishing
/// during back-substitution. Final acceptance happens after polishing.
pub const LOOSE_REL: f64 = 1e-4;

/// Looser threshold for branches of the back-substitution, which inherit the
/// error of the terminal root.
pub const BRANCH_REL: f64 = 1e-2;

/// Coefficients of a univariate polynomial below this fraction of the largest
/// are treated as zero when trimming the leading end.
const TRIM_REL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Stage {
    pub var: usize,
    /// Polynomials that contained `var` when it was eliminated.
    pub polys: Vec<MultiPoly>,
}

#[derive(Debug, Clone)]
pub struct Elimination {
    pub terminal_var: usize,
    /// Lowest-degree univariate eliminant, coefficients by ascending power.
    pub terminal: Vec<C64>,
    /// Pair and variable whose resultant gave the terminal eliminant, if any.
    pub terminal_pair: Option<(MultiPoly, MultiPoly, usize)>,
    /// Further univariate eliminants, used to filter terminal roots.
    pub filters: Vec<Vec<C64>>,
    pub stages: Vec<Stage>,
}

impl Elimination {
    pub fn terminal_degree(&self) -> usize {
        self.terminal.len().saturating_sub(1)
    }
}

/// Eliminates `order[..len−1]` in turn; `order.last()` is the terminal variable.
pub fn eliminate(system: &[MultiPoly], order: &[usize]) -> Result<Elimination> {
    let (&terminal_var, to_eliminate) = order
        .split_last()
        .ok_or_else(|| Error::NonGeneric("no variables".into()))?;
    let mut current: Vec<MultiPoly> = system
        .iter()
        .map(|p| p.pruned(0.0).normalized())
        .filter(|p| !p.is_empty())
        .collect();
    let mut stages = Vec::new();
    let mut sources: Vec<Option<(MultiPoly, MultiPoly, usize)>> = vec![None; current.len()];
    for (k, &v) in to_eliminate.iter().enumerate() {
        let remaining = order.len() - k - 1;
        let (mut with_v, without): (Vec<_>, Vec<_>) = current.into_iter().partition(|p| p.contains(v));
        sources = vec![None; without.len()];
        with_v.sort_by_key(|p| (p.degree_in(v), p.total_degree(), p.len()));
        let needed = remaining.saturating_sub(without.len());
        let target = needed.max(1) + 1;
        let mut produced = Vec::new();
        'outer: for i in 0..with_v.len() {
            for j in i + 1..with_v.len() {
                if produced.len() >= target {
                    break 'outer;
                }
                if let Some(e) = eliminate_pair(&with_v[i], &with_v[j], v) {
                    produced.push(e);
                    sources.push(Some((with_v[i].clone(), with_v[j].clone(), v)));
                }
            }
        }
        if produced.len() < needed {
            return Err(Error::NonGeneric(format!(
                "eliminating variable {v}: {} of {needed} required eliminants are nonzero",
                produced.len()
            )));
        }
        stages.push(Stage { var: v, polys: with_v });
        current = without;
        current.extend(produced);
    }

    let mut unis: Vec<(Vec<C64>, Option<(MultiPoly, MultiPoly, usize)>)> = current
        .iter()
        .zip(sources)
        .filter_map(|(p, src)| p.univariate(terminal_var).map(|c| (trim(&c), src)))
        .filter(|(c, _)| !c.is_empty())
        .collect();
    if unis.is_empty() {
        return Err(Error::NonGeneric("no univariate eliminant in the terminal variable".into()));
    }
    unis.sort_by_key(|(c, _)| c.len());
    let (terminal, terminal_pair) = unis.remove(0);
    Ok(Elimination {
        terminal_var,
        terminal,
        terminal_pair,
        filters: unis.into_iter().map(|(c, _)| c).collect(),
        stages,
    })
}

/// Largest Sylvester matrix built symbolically; bigger pairs use the cascade.
const SYLVESTER_MAX: u32 = 14;

/// Intermediate polynomials larger than this abandon the pair. Generic
/// systems in the supported dimensions stay far below it.
pub const MAX_TERMS: usize = 4000;

/// Eliminates `v` from the pair, returning a nonzero `v`-free combination or
/// `None` when the pair is degenerate.
pub fn eliminate_pair(p: &MultiPoly, q: &MultiPoly, v: usize) -> Option<MultiPoly> {
    let p = strip_power(p, v);
    let q = strip_power(q, v);
    if p.is_empty() || q.is_empty() {
        return None;
    }
    if p.degree_in(v) == 0 {
        return Some(p);
    }
    if q.degree_in(v) == 0 {
        return Some(q);
    }
    if p.degree_in(v) + q.degree_in(v) <= SYLVESTER_MAX {
        sylvester_resultant(&p, &q, v)
    } else {
        cascade_pair(p, q, v)
    }
}

/// `Res_v(p, q)` as the determinant of the Sylvester matrix.
///
/// When at most one other variable remains, the determinant is evaluated
/// numerically on the unit circle and the coefficients recovered by a discrete
/// Fourier transform; symbolic expansion loses too much to cancellation.
pub fn sylvester_resultant(p: &MultiPoly, q: &MultiPoly, v: usize) -> Option<MultiPoly> {
    let nvars = p.nvars();
    let others: Vec<usize> = (0..nvars).filter(|&w| w != v && (p.contains(w) || q.contains(w))).collect();
    match others.as_slice() {
        [] => {
            let r = sylvester_numeric(p, q, v, &vec![ZERO; nvars]);
            (r.norm() > 0.0).then(|| MultiPoly::constant(nvars, r))
        }
        [w] => interpolated_resultant(p, q, v, *w),
        _ => symbolic_resultant(p, q, v),
    }
}


fn sylvester_numeric(p: &MultiPoly, q: &MultiPoly, v: usize, point: &[C64]) -> C64 {
    let coeffs = |poly: &MultiPoly| {
        (0..=poly.degree_in(v))
            .map(|k| poly.coeff_in(v, k).eval(point))
            .collect::<Vec<C64>>()
    };
    let pc = coeffs(p);
    let qc = coeffs(q);
    let (m, n) = (pc.len() - 1, qc.len() - 1);
    let mut mat = CMatrix::zeros(m + n, m + n);
    for i in 0..n {
        for k in 0..=m {
            mat[(i, i + k)] = pc[m - k];
        }
    }
    for i in 0..m {
        for k in 0..=n {
            mat[(n + i, i + k)] = qc[n - k];
        }
    }
    mat.determinant()
}

fn interpolated_resultant(p: &MultiPoly, q: &MultiPoly, v: usize, w: usize) -> Option<MultiPoly> {
    let nvars = p.nvars();
    let bound = (p.total_degree() * q.total_degree()) as usize;
    let samples = bound + 1;
    let values: Vec<C64> = (0..samples)
        .map(|j| {
            let mut point = vec![ZERO; nvars];
            point[w] = C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / samples as f64);
            sylvester_numeric(p, q, v, &point)
        })
        .collect();
    let top = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return None;
    }
    let coeffs: Vec<C64> = (0..samples)
        .map(|k| {
            let acc: C64 = values
                .iter()
                .enumerate()
                .map(|(j, &val)| {
                    val * C64::from_polar(1.0, -std::f64::consts::TAU * (j * k) as f64 / samples as f64)
                })
                .sum();
            acc / samples as f64
        })
        .collect();
    let cmax = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r = MultiPoly::from_terms(
        nvars,
        coeffs.into_iter().enumerate().filter(|(_, c)| c.norm() > 1e-13 * cmax).map(|(k, c)| {
            let mut e = vec![0u32; nvars];
            e[w] = k as u32;
            (e, c)
        }),
    );
    // Identically zero up to rounding: the pair shares a factor.
    let scale = p.max_abs().powi(q.degree_in(v) as i32) * q.max_abs().powi(p.degree_in(v) as i32);
    if r.is_empty() || cmax <= 1e-11 * scale {
        return None;
    }
    Some(r.normalized())
}

fn symbolic_resultant(p: &MultiPoly, q: &MultiPoly, v: usize) -> Option<MultiPoly> {
    let (m, n) = (p.degree_in(v) as usize, q.degree_in(v) as usize);
    let size = m + n;
    let nvars = p.nvars();
    let pc: Vec<MultiPoly> = (0..=m).map(|k| p.coeff_in(v, k as u32)).collect();
    let qc: Vec<MultiPoly> = (0..=n).map(|k| q.coeff_in(v, k as u32)).collect();
    let mut rows = vec![vec![MultiPoly::zero(nvars); size]; size];
    for i in 0..n {
        for k in 0..=m {
            rows[i][i + k] = pc[m - k].clone();
        }
    }
    for i in 0..m {
        for k in 0..=n {
            rows[n + i][i + k] = qc[n - k].clone();
        }
    }
    let reference = p.max_abs().powi(n as i32) * q.max_abs().powi(m as i32);
    let r = determinant_bounded(&rows, MAX_TERMS)?.pruned(reference);
    if r.is_empty() || r.max_abs() <= 1e-11 * reference {
        return None;
    }
    Some(r.normalized())
}

/// Pairwise leading/trailing-coefficient elimination; may carry extraneous factors.
fn cascade_pair(mut p: MultiPoly, mut q: MultiPoly, v: usize) -> Option<MultiPoly> {
    loop {
        if p.is_empty() || q.is_empty() {
            return None;
        }
        if p.len() + q.len() > MAX_TERMS {
            return None;
        }
        let (dp, dq) = (p.degree_in(v), q.degree_in(v));
        if dp == 0 {
            return Some(p);
        }
        if dq == 0 {
            return Some(q);
        }
        if dp != dq {
            if dp < dq {
                std::mem::swap(&mut p, &mut q);
            }
            let (dp, dq) = (p.degree_in(v), q.degree_in(v));
            let a = q.coeff_in(v, dq).mul(&p);
            let b = p.coeff_in(v, dp).mul(&q).shift(v, dp - dq);
            p = combine(&a, &b, v)?;
        } else {
            let d = dp;
            let a = q.coeff_in(v, d).mul(&p);
            let b = p.coeff_in(v, d).mul(&q);
            let r = combine(&a, &b, v)?;
            if d == 1 {
                return Some(r);
            }
            let a = q.coeff_in(v, 0).mul(&p);
            let b = p.coeff_in(v, 0).mul(&q);
            let s = combine(&a, &b, v)?;
            p = r;
            q = s;
        }
    }
}

/// `a − b`, pruned against the scale of its inputs, with factors of `v` removed.
fn combine(a: &MultiPoly, b: &MultiPoly, v: usize) -> Option<MultiPoly> {
    let reference = a.max_abs().max(b.max_abs());
    let r = a.sub(b).pruned(reference);
    if r.is_empty() {
        return None;
    }
    Some(strip_power(&r, v).normalized())
}

fn strip_power(p: &MultiPoly, v: usize) -> MultiPoly {
    let low = p.low_degree_in(v);
    if low > 0 {
        p.unshift(v, low)
    } else {
        p.clone()
    }
}

/// Drops negligible leading coefficients; returns an empty vector for the zero polynomial.
pub fn trim(c: &[C64]) -> Vec<C64> {
    let m = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return Vec::new();
    }
    let mut out = c.to_vec();
    while out.last().is_some_and(|z| z.norm() <= TRIM_REL * m) {
        out.pop();
    }
    out
}

pub fn horner(c: &[C64], x: C64) -> C64 {
    c.iter().rev().fold(ZERO, |acc, &a| acc * x + a)
}

fn horner_abs(c: &[C64], x: C64) -> f64 {
    let r = x.norm();
    c.iter().rev().fold(0.0, |acc, a| acc * r + a.norm())
}

fn derivative(c: &[C64]) -> Vec<C64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &a)| a * k as f64)
        .collect()
}

/// Whether `|p(x)|` is small relative to `Σ|c_k||x|^k`.
fn relative_value(c: &[C64], x: C64) -> f64 {
    let s = horner_abs(c, x);
    if s == 0.0 {
        0.0
    } else {
        horner(c, x).norm() / s
    }
}

pub fn nearly_vanishes(c: &[C64], x: C64, rel: f64) -> bool {
    let s = horner_abs(c, x);
    s == 0.0 || horner(c, x).norm() <= rel * s
}

/// All complex roots via companion-matrix eigenvalues, then Newton polishing.
pub fn univariate_roots(coeffs: &[C64]) -> Vec<C64> {
    let c = trim(coeffs);
    if c.len() <= 1 {
        return Vec::new();
    }
    let zeros = c.iter().take_while(|z| **z == ZERO).count();
    let c = &c[zeros..];
    let mut roots = vec![ZERO; zeros];
    let deg = c.len() - 1;
    if deg == 0 {
        return roots;
    }
    let lead = c[deg];
    let mut comp = CMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let eig = Schur::new(comp).eigenvalues().unwrap_or_else(|| {
        // The complex Schur form is triangular, so this branch is not expected.
        nalgebra::DVector::from_element(deg, ZERO)
    });
    let dc = derivative(c);
    for &r0 in eig.iter() {
        let mut r = r0;
        for _ in 0..8 {
            let f = horner(c, r);
            let d = horner(&dc, r);
            if d.norm() == 0.0 || f.norm() == 0.0 {
                break;
            }
            let step = f / d;
            let next = r - step;
            if !next.re.is_finite() || !next.im.is_finite() || horner(c, next).norm() > f.norm() {
                break;
            }
            r = next;
        }
        roots.push(r);
    }
    roots
}

/// Newton steps on the numerically evaluated resultant that produced the
/// terminal eliminant, deflated by the other root estimates. Its coefficients
/// can be inaccurate near clustered roots while pointwise evaluation stays
/// accurate.
fn refine_terminal_root(elim: &Elimination, nvars: usize, root: C64, before: &[C64], after: &[C64]) -> C64 {
    let Some((p, q, v)) = &elim.terminal_pair else {
        return root;
    };
    let eval = |x: C64| {
        let mut point = vec![ZERO; nvars];
        point[elim.terminal_var] = x;
        sylvester_numeric(p, q, *v, &point)
    };
    let mut x = root;
    let mut fx = eval(x);
    for _ in 0..20 {
        if fx.norm() == 0.0 {
            break;
        }
        let h = 1e-7 * (1.0 + x.norm());
        let d = (eval(x + h) - eval(x - h)) / (2.0 * h);
        if d.norm() == 0.0 {
            break;
        }
        let pull: C64 = before.iter().chain(after).map(|&r| ONE / (x - r)).sum();
        let next = x - ONE / (d / fx - pull);
        let fn_ = eval(next);
        if !(fn_.norm() < fx.norm()) {
            break;
        }
        let small = (next - x).norm() <= 1e-15 * (1.0 + x.norm());
        x = next;
        fx = fn_;
        if small {
            break;
        }
    }
    x
}

/// Partial solution: known values of the stage and terminal variables.
pub type Point = Vec<Option<C64>>;

/// Back-substitutes from the terminal roots through the stages that eliminate
/// any of the `wanted` variables, returning every branch that survives the
/// loose filters. Branches on which a stage becomes identically zero make the
/// system non-generic.
pub fn back_substitute(elim: &Elimination, nvars: usize, wanted: &[usize]) -> Result<Vec<Point>> {
    let raw = univariate_roots(&elim.terminal);
    let mut points: Vec<Point> = raw
        .iter()
        .enumerate()
        .map(|(i, &r)| refine_terminal_root(elim, nvars, r, &raw[..i], &raw[i + 1..]))
        .filter(|&r| elim.filters.iter().all(|f| nearly_vanishes(f, r, LOOSE_REL)))
        .map(|r| {
            let mut p = vec![None; nvars];
            p[elim.terminal_var] = Some(r);
            p
        })
        .collect();
    for stage in elim.stages.iter().rev() {
        if wanted.iter().all(|&w| points.iter().all(|p| p[w].is_some())) {
            break;
        }
        let mut next = Vec::new();
        for p in &points {
            let unis: Vec<Vec<C64>> = stage
                .polys
                .iter()
                .filter_map(|poly| restrict(poly, p, stage.var))
                .filter(|c| c.len() >= 2)
                .collect();
            let Some(lowest) = unis.iter().min_by_key(|c| c.len()) else {
                return Err(Error::NonGeneric(format!(
                    "variable {} is undetermined on a solution branch",
                    stage.var
                )));
            };
            // An inaccurate terminal root can push every branch past the loose
            // filter; the best-scoring branch is then kept for polishing.
            let scored: Vec<(C64, f64)> = univariate_roots(lowest)
                .into_iter()
                .map(|r| (r, unis.iter().map(|c| relative_value(c, r)).fold(0.0, f64::max)))
                .collect();
            let mut kept: Vec<C64> = scored.iter().filter(|(_, s)| *s <= BRANCH_REL).map(|(r, _)| *r).collect();
            if kept.is_empty() {
                kept.extend(scored.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(r, _)| *r));
            }
            for r in kept {
                let mut q = p.clone();
                q[stage.var] = Some(r);
                next.push(q);
            }
        }
        points = next;
    }
    Ok(points)
}

/// Substitutes the known coordinates, leaving a univariate polynomial in `var`.
/// Coefficients that cancel down to rounding level are zeroed.
fn restrict(poly: &MultiPoly, point: &Point, var: usize) -> Option<Vec<C64>> {
    let mut s = poly.clone();
    let mut at = vec![ONE; point.len()];
    for (v, val) in point.iter().enumerate() {
        if let Some(x) = val {
            s = s.substitute(v, *x);
            at[v] = *x;
        }
    }
    let scale = poly.eval_abs(&at);
    let c = s.univariate(var)?;
    let cleaned: Vec<C64> = c
        .into_iter()
        .map(|z| if z.norm() <= 1e-10 * scale { ZERO } else { z })
        .collect();
    Some(trim(&cleaned))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn from_roots(roots: &[C64]) -> Vec<C64> {
        let mut p = vec![ONE];
        for &r in roots {
            let mut q = vec![ZERO; p.len() + 1];
            for (k, &a) in p.iter().enumerate() {
                q[k + 1] += a;
                q[k] -= a * r;
            }
            p = q;
        }
        p
    }

    fn contains_root(roots: &[C64], r: C64, eps: f64) -> bool {
        roots.iter().any(|x| (x - r).norm() < eps)
    }

    #[test]
    fn roots_of_known_polynomials() {
        let want = [c(1.0, 0.0), c(-2.0, 0.5), c(0.0, 3.0), c(0.25, -0.25)];
        let roots = univariate_roots(&from_roots(&want));
        assert_eq!(roots.len(), 4);
        for r in want {
            assert!(contains_root(&roots, r, 1e-10));
        }
        // Zero roots and a trailing negligible leading term.
        let mut p = from_roots(&[ZERO, ZERO, c(2.0, 0.0)]);
        p.push(c(1e-20, 0.0));
        let roots = univariate_roots(&p);
        assert_eq!(roots.len(), 3);
        assert!(contains_root(&roots, c(2.0, 0.0), 1e-12));
        assert!(univariate_roots(&[c(3.0, 0.0)]).is_empty());
    }

    #[test]
    fn linear_system_with_conjugate() {
        // {z0 − w, z1 − conj(w)} with z1 the conjugate slot of z0.
        let w = c(0.3, -1.2);
        let p = MultiPoly::affine(2, -w, &[(0, ONE)]);
        let q = p.conj_swap(1);
        let elim = eliminate(&[p, q], &[1, 0]).unwrap();
        assert_eq!(elim.terminal_degree(), 1);
        let roots = univariate_roots(&elim.terminal);
        assert!((roots[0] - w).norm() < 1e-14);
    }

    #[test]
    fn pair_elimination_is_a_resultant_multiple() {
        // P = x^2 + y^2 − 5, Q = x y − 2: common solutions (±1, ±2), (±2, ±1) with xy = 2.
        let x = MultiPoly::var(2, 0, ONE);
        let y = MultiPoly::var(2, 1, ONE);
        let p = x.mul(&x).add(&y.mul(&y)).add(&MultiPoly::constant(2, c(-5.0, 0.0)));
        let q = x.mul(&y).add(&MultiPoly::constant(2, c(-2.0, 0.0)));
        let e = eliminate_pair(&p, &q, 0).unwrap();
        let uni = e.univariate(1).unwrap();
        for r in [1.0, -1.0, 2.0, -2.0] {
            assert!(nearly_vanishes(&uni, c(r, 0.0), 1e-10), "y = {r}");
        }
    }

    #[test]
    fn degenerate_pair_is_detected() {
        let p = MultiPoly::affine(2, ONE, &[(0, ONE), (1, c(2.0, 0.0))]);
        let q = p.scale(c(0.0, 3.0));
        assert!(eliminate_pair(&p, &q, 0).is_none());
        assert!(matches!(eliminate(&[p, q], &[0, 1]), Err(Error::NonGeneric(_))));
    }

    #[test]
    fn two_variable_back_substitution() {
        // Intersection of two generic conics: four solutions.
        let x = MultiPoly::var(2, 0, ONE);
        let y = MultiPoly::var(2, 1, ONE);
        let k = |re: f64| MultiPoly::constant(2, c(re, 0.0));
        let p = x.mul(&x).add(&y.mul(&y).scale(c(2.0, 0.0))).add(&k(-3.0));
        let q = x.mul(&y).add(&x.scale(c(0.5, 0.0))).add(&k(-1.5));
        let elim = eliminate(&[p.clone(), q.clone()], &[0, 1]).unwrap();
        let pts = back_substitute(&elim, 2, &[0]).unwrap();
        assert!(pts.len() >= 4, "{} points", pts.len());
        for pt in pts {
            let z = [pt[0].unwrap(), pt[1].unwrap()];
            assert!(p.eval(&z).norm() < 1e-6 * p.eval_abs(&z));
            assert!(q.eval(&z).norm() < 1e-6 * q.eval_abs(&z));
        }
    }
}
