//! JSON documents for states, decompositions and verdicts.
//!
//! Complex numbers are written as `[re, im]` pairs. Matrices are lists of rows.

use serde::{Deserialize, Serialize};

use crate::certify::{Diagnostics, Reason, Status, Verdict};
use crate::error::{Error, Result};
use crate::numlin::{CMatrix, CVector, Tolerances, C64};
use crate::state::{BipartiteState, Decomposition, ProductVector, Term};

pub type Complex = [f64; 2];

fn to_pairs(v: &CVector) -> Vec<Complex> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[Complex]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub dim_a: usize,
    pub dim_b: usize,
    pub matrix: Vec<Vec<Complex>>,
}

impl StateDocument {
    pub fn from_state(s: &BipartiteState) -> Self {
        let m = s.matrix();
        Self {
            dim_a: s.dim_a(),
            dim_b: s.dim_b(),
            matrix: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        }
    }

    /// Validates Hermiticity and positivity; the trace may differ from one.
    pub fn to_state(&self, tol: &Tolerances) -> Result<BipartiteState> {
        let d = self.dim_a * self.dim_b;
        if self.matrix.len() != d || self.matrix.iter().any(|row| row.len() != d) {
            return Err(Error::Document(format!(
                "matrix must be {d}x{d} for dimensions {}x{}",
                self.dim_a, self.dim_b
            )));
        }
        let m = CMatrix::from_fn(d, d, |i, j| {
            let p = self.matrix[i][j];
            C64::new(p[0], p[1])
        });
        BipartiteState::unnormalized(self.dim_a, self.dim_b, m, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDocument {
    pub weight: f64,
    pub e: Vec<Complex>,
    pub f: Vec<Complex>,
}

impl TermDocument {
    pub fn from_term(t: &Term) -> Self {
        Self {
            weight: t.weight,
            e: to_pairs(&t.vector.e),
            f: to_pairs(&t.vector.f),
        }
    }

    pub fn to_term(&self) -> Term {
        Term {
            weight: self.weight,
            vector: ProductVector {
                e: from_pairs(&self.e),
                f: from_pairs(&self.f),
            },
        }
    }
}

/// Sidecar holding a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDocument {
    pub residual: f64,
    pub terms: Vec<TermDocument>,
}

impl DecompositionDocument {
    pub fn from_decomposition(d: &Decomposition) -> Self {
        Self {
            residual: d.residual,
            terms: d.terms.iter().map(TermDocument::from_term).collect(),
        }
    }

    /// Rebuilds the decomposition, recomputing the residual against `rho`.
    pub fn to_decomposition(&self, rho: &CMatrix) -> Decomposition {
        Decomposition::from_terms(self.terms.iter().map(TermDocument::to_term).collect(), rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDiagnostics {
    #[serde(flatten)]
    pub base: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npt_witness: Option<Vec<Complex>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDocument {
    pub status: Status,
    pub reason: Option<Reason>,
    pub certificate: Option<Vec<TermDocument>>,
    pub diagnostics: VerdictDiagnostics,
}

impl VerdictDocument {
    pub fn from_verdict(v: &Verdict) -> Self {
        Self {
            status: v.status,
            reason: v.reason,
            certificate: v
                .certificate
                .as_ref()
                .map(|d| d.terms.iter().map(TermDocument::from_term).collect()),
            diagnostics: VerdictDiagnostics {
                base: v.diagnostics.clone(),
                npt_witness: v.witness.as_ref().map(to_pairs),
            },
        }
    }

    /// Rebuilds a verdict; the certificate residual is recomputed against `rho`.
    pub fn to_verdict(&self, rho: &CMatrix) -> Verdict {
        Verdict {
            status: self.status,
            reason: self.reason,
            certificate: self.certificate.as_ref().map(|terms| {
                Decomposition::from_terms(terms.iter().map(TermDocument::to_term).collect(), rho)
            }),
            witness: self.diagnostics.npt_witness.as_deref().map(from_pairs),
            diagnostics: self.diagnostics.base.clone(),
        }
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    serde_json::to_string_pretty(doc).map_err(|e| Error::Document(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
}

pub fn read_state(text: &str, tol: &Tolerances) -> Result<BipartiteState> {
    from_json::<StateDocument>(text)?.to_state(tol)
}
