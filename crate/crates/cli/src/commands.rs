use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sepcheck::document::{
    from_json, read_state, to_json, DecompositionDocument, StateDocument, TermDocument,
    VerdictDocument,
};
use sepcheck::{
    bsa_decompose, canon, enumerate_eligible, fixtures, separability_check, BipartiteState,
    Error, GeneratorSpec, ProductVector, Result, Status, Tolerances,
};

use crate::config::{Cli, Command, Format};

pub struct Output {
    pub stdout: String,
    pub code: u8,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: 0 }
    }
}

pub fn run(cli: &Cli) -> Result<Output> {
    let tol = cli.tolerances()?;
    match &cli.command {
        Command::Inspect { path } => inspect(cli, &load(path, &tol)?, &tol),
        Command::Certify {
            path,
            certificate,
            no_sidecar,
        } => {
            let sidecar = (!no_sidecar).then(|| certificate.clone().unwrap_or_else(|| suffixed(path, "certificate")));
            certify(cli, &load(path, &tol)?, sidecar.as_deref())
        }
        Command::Generate {
            family,
            dims,
            terms,
            rank,
            rank_pt,
            p,
            out,
        } => {
            let spec = GeneratorSpec {
                family: (*family).into(),
                dims: (dims[0], dims[1]),
                terms: *terms,
                rank: *rank,
                rank_pt: *rank_pt,
                p: *p,
                seed: cli.seed,
            };
            generate(&spec, out.as_deref())
        }
        Command::Ppt { path } => ppt(cli, &load(path, &tol)?, &tol),
        Command::Decompose { path } => decompose(cli, &load(path, &tol)?),
        Command::EligibleVectors { path } => eligible(cli, &load(path, &tol)?, &tol),
        Command::Bsa { path, projectors } => bsa(cli, &load(path, &tol)?, projectors.as_deref(), &tol),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Document(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, format!("{text}\n")).map_err(|e| Error::Document(format!("{}: {e}", path.display())))
}

fn load(path: &Path, tol: &Tolerances) -> Result<BipartiteState> {
    read_state(&read(path)?, tol)
}

/// `dir/name.json` becomes `dir/name.<tag>.json`.
fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.json"))
}

fn render<T: Serialize>(cli: &Cli, doc: &T, text: impl FnOnce() -> String) -> Result<String> {
    match cli.format {
        Format::Json => to_json(doc),
        Format::Text => Ok(text()),
    }
}

#[derive(Serialize)]
struct InspectReport {
    dim_a: usize,
    dim_b: usize,
    trace: f64,
    rank: usize,
    rank_pt: usize,
    local_ranks: (usize, usize),
    kernel_dims: (usize, usize),
    ppt: bool,
    min_eigenvalue_pt: f64,
    support_dims: (usize, usize),
    rank_sum: usize,
    rank_sum_bound: usize,
    within_rank_sum_bound: bool,
}

fn inspect(cli: &Cli, s: &BipartiteState, tol: &Tolerances) -> Result<Output> {
    let (m, n) = s.dims();
    let r = s.rank(tol);
    let rt = s.rank_pt(tol);
    let (c, _) = s.support_compress(tol);
    let (mc, nc) = c.dims();
    let bound = (2 * mc * nc + 2).saturating_sub(mc + nc);
    let report = InspectReport {
        dim_a: m,
        dim_b: n,
        trace: s.trace(),
        rank: r,
        rank_pt: rt,
        local_ranks: s.local_ranks(tol),
        kernel_dims: (m * n - r, m * n - rt),
        ppt: s.is_ppt(tol),
        min_eigenvalue_pt: s.min_eigenvalue_pt(),
        support_dims: (mc, nc),
        rank_sum: r + rt,
        rank_sum_bound: bound,
        within_rank_sum_bound: r + rt <= bound,
    };
    let out = render(cli, &report, || {
        let mut t = String::new();
        let _ = writeln!(t, "dims        {m}x{n} (support {mc}x{nc})");
        let _ = writeln!(t, "trace       {:.12}", report.trace);
        let _ = writeln!(t, "ranks       r={r} r_TA={rt}");
        let _ = writeln!(t, "local ranks {:?}", report.local_ranks);
        let _ = writeln!(t, "kernels     k={} k_TA={}", report.kernel_dims.0, report.kernel_dims.1);
        let _ = writeln!(t, "ppt         {} (min eigenvalue {:.3e})", report.ppt, report.min_eigenvalue_pt);
        let _ = write!(t, "rank sum    {} <= {}: {}", r + rt, bound, report.within_rank_sum_bound);
        t
    })?;
    Ok(Output::ok(out))
}

fn certify(cli: &Cli, s: &BipartiteState, sidecar: Option<&Path>) -> Result<Output> {
    let config = cli.config()?;
    let v = separability_check(s, &config);
    if let (Some(path), Some(cert)) = (sidecar, &v.certificate) {
        write(path, &to_json(&DecompositionDocument::from_decomposition(cert))?)?;
    }
    let code = match v.status {
        Status::Separable => 0,
        Status::Entangled => 1,
        Status::Inconclusive => 2,
    };
    let doc = VerdictDocument::from_verdict(&v);
    let out = render(cli, &doc, || {
        let mut t = format!("{:?}", v.status);
        if let Some(r) = v.reason {
            let _ = write!(t, " ({r:?})");
        }
        if let Some(m) = v.diagnostics.method {
            let _ = write!(t, " via {m:?}");
        }
        if let Some(c) = &v.certificate {
            let _ = write!(t, "\n{} terms, residual {:.3e}", c.len(), c.residual);
        }
        t
    })?;
    Ok(Output { stdout: out, code })
}

fn generate(spec: &GeneratorSpec, out: Option<&Path>) -> Result<Output> {
    let (s, planted) = fixtures::generate(spec)?;
    let text = to_json(&StateDocument::from_state(&s))?;
    match out {
        None => Ok(Output::ok(text)),
        Some(path) => {
            write(path, &text)?;
            if let Some(d) = planted {
                write(
                    &suffixed(path, "decomposition"),
                    &to_json(&DecompositionDocument::from_decomposition(&d))?,
                )?;
            }
            Ok(Output::ok(String::new()))
        }
    }
}

#[derive(Serialize)]
struct PptReport {
    ppt: bool,
    min_eigenvalue_pt: f64,
}

fn ppt(cli: &Cli, s: &BipartiteState, tol: &Tolerances) -> Result<Output> {
    let report = PptReport {
        ppt: s.is_ppt(tol),
        min_eigenvalue_pt: s.min_eigenvalue_pt(),
    };
    let out = render(cli, &report, || {
        format!("ppt {} (min eigenvalue {:.3e})", report.ppt, report.min_eigenvalue_pt)
    })?;
    Ok(Output {
        stdout: out,
        code: if report.ppt { 0 } else { 1 },
    })
}

fn decompose(cli: &Cli, s: &BipartiteState) -> Result<Output> {
    let config = cli.config()?;
    let d = canon::decompose_rank_n(s, &config.tol, config.seed)?;
    let doc = DecompositionDocument::from_decomposition(&d);
    let out = render(cli, &doc, || format!("{} terms, residual {:.3e}", d.len(), d.residual))?;
    Ok(Output::ok(out))
}

#[derive(Serialize)]
struct EligibleReport {
    exhaustive: bool,
    degree_bound: usize,
    terminal_degree: usize,
    candidates: usize,
    vectors: Vec<TermDocument>,
}

fn as_term(v: &ProductVector) -> TermDocument {
    TermDocument::from_term(&sepcheck::Term {
        weight: 1.0,
        vector: v.clone(),
    })
}

fn eligible(cli: &Cli, s: &BipartiteState, tol: &Tolerances) -> Result<Output> {
    let es = enumerate_eligible(s, tol, cli.seed)?;
    let report = EligibleReport {
        exhaustive: es.exhaustive,
        degree_bound: es.degree_bound,
        terminal_degree: es.terminal_degree,
        candidates: es.candidates,
        vectors: es.vectors.iter().map(as_term).collect(),
    };
    let out = render(cli, &report, || {
        format!(
            "{} eligible vectors (exhaustive {}, terminal degree {}, {} candidates)",
            es.vectors.len(),
            es.exhaustive,
            es.terminal_degree,
            es.candidates
        )
    })?;
    Ok(Output::ok(out))
}

#[derive(Serialize)]
struct BsaReport {
    lambda: f64,
    converged: bool,
    iterations: usize,
    weights: Vec<f64>,
    lambda_trace: Vec<f64>,
    min_eigenvalue_delta: f64,
    min_eigenvalue_delta_pt: f64,
}

fn bsa(cli: &Cli, s: &BipartiteState, projectors: Option<&Path>, tol: &Tolerances) -> Result<Output> {
    let vectors: Vec<ProductVector> = match projectors {
        Some(path) => from_json::<DecompositionDocument>(&read(path)?)?
            .terms
            .iter()
            .map(|t| t.to_term().vector)
            .collect(),
        None => enumerate_eligible(s, tol, cli.seed)?.vectors,
    };
    let (m, n) = s.dims();
    if vectors.iter().any(|v| v.e.len() != m || v.f.len() != n) {
        return Err(Error::DimensionMismatch("projector dimensions do not match the state".into()));
    }
    let out = bsa_decompose(s, &vectors, tol, cli.max_iters);
    let dt = sepcheck::state::partial_transpose(&out.delta_rho, m, n);
    let report = BsaReport {
        lambda: out.lambda,
        converged: out.converged,
        iterations: out.iterations,
        weights: out.weights.clone(),
        lambda_trace: out.trace.clone(),
        min_eigenvalue_delta: sepcheck::numlin::min_eigenvalue(&out.delta_rho),
        min_eigenvalue_delta_pt: sepcheck::numlin::min_eigenvalue(&dt),
    };
    let text = render(cli, &report, || {
        format!(
            "lambda {:.9} after {} sweeps (converged {})",
            out.lambda, out.iterations, out.converged
        )
    })?;
    Ok(Output::ok(text))
}
