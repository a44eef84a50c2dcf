//! Sparse multivariate polynomials with complex coefficients.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::numlin::{C64, ZERO};

/// Coefficients below this fraction of the largest one are dropped by [`MultiPoly::pruned`].
pub const PRUNE_REL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The monomial `c · z_var`.
    pub fn var(nvars: usize, var: usize, c: C64) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, c);
        p
    }

    /// `constant + Σ c_v z_v`.
    pub fn affine(nvars: usize, constant: C64, linear: &[(usize, C64)]) -> Self {
        let mut p = Self::constant(nvars, constant);
        for &(v, c) in linear {
            p = p.add(&Self::var(nvars, v, c));
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, C64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent length");
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Vec<u32>, c: C64) {
        if c == ZERO {
            return;
        }
        let sum = self.terms.get(&e).copied().unwrap_or(ZERO) + c;
        if sum == ZERO {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut acc: HashMap<Vec<u32>, C64> = HashMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert(ZERO) += c1 * c2;
            }
        }
        Self::from_terms(self.nvars, acc)
    }

    /// Multiplies by `z_var^k`.
    pub fn shift(&self, var: usize, k: u32) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut e = e.clone();
                    e[var] += k;
                    (e, *c)
                })
                .collect(),
        }
    }

    /// Divides by `z_var^k`; terms of lower degree in `var` are discarded.
    pub fn unshift(&self, var: usize, k: u32) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[var] >= k)
                .map(|(e, c)| {
                    let mut e = e.clone();
                    e[var] -= k;
                    (e, *c)
                })
                .collect(),
        }
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    /// Lowest exponent of `var` across all terms.
    pub fn low_degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).min().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn contains(&self, var: usize) -> bool {
        self.terms.keys().any(|e| e[var] > 0)
    }

    /// Coefficient of `z_var^d` as a polynomial in the remaining variables.
    pub fn coeff_in(&self, var: usize, d: u32) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[var] == d)
                .map(|(e, c)| {
                    let mut e = e.clone();
                    e[var] = 0;
                    (e, *c)
                })
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops coefficients below `PRUNE_REL` of the largest.
    pub fn pruned(&self, reference: f64) -> Self {
        let cut = PRUNE_REL * reference.max(self.max_abs());
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > cut)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Scales so the largest coefficient has modulus one.
    pub fn normalized(&self) -> Self {
        let m = self.max_abs();
        if m == 0.0 {
            return self.clone();
        }
        self.scale(C64::new(1.0 / m, 0.0))
    }

    pub fn eval(&self, point: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut t = *c;
                for (v, &k) in e.iter().enumerate() {
                    if k > 0 {
                        t *= point[v].powu(k);
                    }
                }
                t
            })
            .sum()
    }

    /// `Σ |c| |z|^e`, the natural scale for judging `|p(z)|`.
    pub fn eval_abs(&self, point: &[C64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut t = c.norm();
                for (v, &k) in e.iter().enumerate() {
                    if k > 0 {
                        t *= point[v].norm().powi(k as i32);
                    }
                }
                t
            })
            .sum()
    }

    /// Fixes `var = value`.
    pub fn substitute(&self, var: usize, value: C64) -> Self {
        let mut acc: HashMap<Vec<u32>, C64> = HashMap::new();
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let k = e2[var];
            e2[var] = 0;
            *acc.entry(e2).or_insert(ZERO) += c * value.powu(k);
        }
        Self::from_terms(self.nvars, acc)
    }

    /// Dense coefficients in `var` (index = power) for a polynomial in that variable only.
    pub fn univariate(&self, var: usize) -> Option<Vec<C64>> {
        let mut out = vec![ZERO; self.degree_in(var) as usize + 1];
        for (e, c) in &self.terms {
            if e.iter().enumerate().any(|(v, &k)| v != var && k > 0) {
                return None;
            }
            out[e[var] as usize] += c;
        }
        Some(out)
    }

    /// Conjugates coefficients and swaps variable `i` with `i + half` for `i < half`.
    pub fn conj_swap(&self, half: usize) -> Self {
        assert_eq!(self.nvars, 2 * half);
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut e2 = e.clone();
                    e2.rotate_left(half);
                    (e2, c.conj())
                })
                .collect(),
        }
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(v, &k)| if k == 1 { format!("z{v}") } else { format!("z{v}^{k}") })
                    .collect();
                format!("({:.3e}{:+.3e}i){}", c.re, c.im, mono.join(""))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Determinant of a square matrix of polynomials by Laplace expansion along
/// rows, memoized over the set of remaining columns.
pub fn determinant(rows: &[Vec<MultiPoly>]) -> MultiPoly {
    determinant_bounded(rows, usize::MAX).expect("unbounded determinant")
}

/// As [`determinant`], giving up with `None` once any partial expansion has
/// more than `max_terms` terms.
pub fn determinant_bounded(rows: &[Vec<MultiPoly>], max_terms: usize) -> Option<MultiPoly> {
    let n = rows.len();
    assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
    let nvars = rows.first().and_then(|r| r.first()).map(|p| p.nvars()).unwrap_or(0);
    if n == 0 {
        return Some(MultiPoly::constant(nvars, C64::new(1.0, 0.0)));
    }
    let mut memo: HashMap<u64, MultiPoly> = HashMap::new();
    det_rec(rows, 0, (1u64 << n) - 1, &mut memo, nvars, max_terms)
}

fn det_rec(
    rows: &[Vec<MultiPoly>],
    row: usize,
    cols: u64,
    memo: &mut HashMap<u64, MultiPoly>,
    nvars: usize,
    max_terms: usize,
) -> Option<MultiPoly> {
    if row == rows.len() {
        return Some(MultiPoly::constant(nvars, C64::new(1.0, 0.0)));
    }
    if let Some(p) = memo.get(&cols) {
        return Some(p.clone());
    }
    let mut acc = MultiPoly::zero(nvars);
    let mut sign = 1.0;
    for c in 0..rows.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = &rows[row][c];
        if !entry.is_empty() {
            let minor = det_rec(rows, row + 1, cols & !(1 << c), memo, nvars, max_terms)?;
            acc = acc.add(&entry.mul(&minor).scale(C64::new(sign, 0.0)));
            if acc.len() > max_terms {
                return None;
            }
        }
        sign = -sign;
    }
    memo.insert(cols, acc.clone());
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{CMatrix, ONE};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn arithmetic_and_evaluation() {
        // (1 + 2 z0)(z1 − i) at (0.5, 2)
        let p = MultiPoly::affine(2, ONE, &[(0, c(2.0, 0.0))]);
        let q = MultiPoly::affine(2, c(0.0, -1.0), &[(1, ONE)]);
        let r = p.mul(&q);
        let pt = [c(0.5, 0.0), c(2.0, 0.0)];
        assert!((r.eval(&pt) - c(2.0, 0.0) * c(2.0, -1.0)).norm() < 1e-14);
        assert_eq!(r.total_degree(), 2);
        assert_eq!(r.degree_in(0), 1);
        assert!(r.sub(&r).is_empty());
    }

    #[test]
    fn coefficient_extraction_and_substitution() {
        let x = MultiPoly::var(2, 0, ONE);
        let y = MultiPoly::var(2, 1, ONE);
        // x^2 y + 3x + y
        let p = x.mul(&x).mul(&y).add(&x.scale(c(3.0, 0.0))).add(&y);
        assert_eq!(p.coeff_in(0, 2), MultiPoly::var(2, 1, ONE));
        let s = p.substitute(1, c(2.0, 0.0));
        assert_eq!(s.univariate(0).unwrap(), vec![c(2.0, 0.0), c(3.0, 0.0), c(2.0, 0.0)]);
        assert!(p.univariate(0).is_none());
        assert_eq!(p.shift(0, 1).unshift(0, 1), p);
    }

    #[test]
    fn conjugate_swap() {
        // p = (1+i) z0 z1^2 on variables (z0, z1 | z2, z3) with half = 2
        let p = MultiPoly::from_terms(4, [(vec![1, 2, 0, 0], c(1.0, 1.0))]);
        let q = p.conj_swap(2);
        assert_eq!(q, MultiPoly::from_terms(4, [(vec![0, 0, 1, 2], c(1.0, -1.0))]));
        assert_eq!(q.conj_swap(2), p);
    }

    #[test]
    fn determinant_matches_numeric() {
        // Random affine entries, evaluated determinant vs numeric determinant.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut g = || c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        for n in 1..=4 {
            let rows: Vec<Vec<MultiPoly>> = (0..n)
                .map(|_| (0..n).map(|_| MultiPoly::affine(2, g(), &[(0, g()), (1, g())])).collect())
                .collect();
            let d = determinant(&rows);
            assert!(d.total_degree() <= n as u32);
            let pt = [g(), g()];
            let m = CMatrix::from_fn(n, n, |i, j| rows[i][j].eval(&pt));
            assert!((d.eval(&pt) - m.determinant()).norm() < 1e-12);
        }
    }

    #[test]
    fn bounded_determinant_gives_up() {
        let rows: Vec<Vec<MultiPoly>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| MultiPoly::affine(4, c(1.0 + i as f64, 0.0), &[(j, ONE), ((i + j) % 4, c(0.5, 0.0))]))
                    .collect()
            })
            .collect();
        let full = determinant_bounded(&rows, usize::MAX).unwrap();
        assert!(full.len() > 3);
        assert!(determinant_bounded(&rows, 3).is_none());
        assert_eq!(determinant_bounded(&rows, full.len() * 4), Some(full));
    }
}
