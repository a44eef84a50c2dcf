use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sepcheck::document::{from_json, to_json, StateDocument, VerdictDocument};
use sepcheck::fixtures::{self, random_separable};
use sepcheck::numlin::random_unitary;
use sepcheck::{
    bsa_decompose, separability_check, BipartiteState, CMatrix, Config, GeneratorSpec, Status,
    Tolerances,
};

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Partial transpose on Alice written out index by index.
fn pt_oracle(rho: &CMatrix, m: usize, n: usize) -> CMatrix {
    DMatrix::from_fn(m * n, m * n, |r, c| {
        let (i, j) = (r / n, r % n);
        let (k, l) = (c / n, c % n);
        rho[(k * n + j, i * n + l)]
    })
}

/// Rank from Hermitian eigenvalues, relative to the largest.
fn rank_oracle(m: &CMatrix) -> usize {
    let ev = m.clone().symmetric_eigenvalues();
    let top = ev.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    ev.iter().filter(|&&x| x > 1e-9 * top).count()
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

fn separable_state() -> impl Strategy<Value = (BipartiteState, usize)> {
    (dims(), 1usize..=3, any::<u64>()).prop_filter_map("infeasible", |((m, n), t, seed)| {
        let terms = t.min(m.max(n));
        random_separable(&GeneratorSpec::separable(m, n, terms, seed)).ok().map(|(s, _)| (s, terms))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_transpose_matches_index_formula((s, _) in separable_state()) {
        let (m, n) = s.dims();
        let pt = s.partial_transpose();
        prop_assert!((&pt - pt_oracle(s.matrix(), m, n)).norm() < 1e-14);
        let back = sepcheck::state::partial_transpose(&pt, m, n);
        prop_assert!((back - s.matrix()).norm() < 1e-14);
        prop_assert!((pt.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_invariant_under_local_unitaries((s, _) in separable_state(), seed in any::<u64>()) {
        let (m, n) = s.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(&mut rng, m);
        let v = random_unitary(&mut rng, n);
        let t = s.local_map(&u, &v).unwrap();
        let tol = tol();
        prop_assert_eq!(t.rank(&tol), s.rank(&tol));
        prop_assert_eq!(t.rank_pt(&tol), s.rank_pt(&tol));
        prop_assert_eq!(t.local_ranks(&tol), s.local_ranks(&tol));
        prop_assert_eq!(s.rank(&tol), rank_oracle(s.matrix()));
        prop_assert_eq!(s.rank_pt(&tol), rank_oracle(&pt_oracle(s.matrix(), m, n)));
    }

    #[test]
    fn swap_preserves_ranks((s, _) in separable_state()) {
        let tol = tol();
        let w = s.swap_parties();
        prop_assert_eq!(w.dims(), (s.dim_b(), s.dim_a()));
        prop_assert_eq!(w.rank(&tol), s.rank(&tol));
        prop_assert_eq!(w.rank_pt(&tol), s.rank_pt(&tol));
        prop_assert!((w.swap_parties().matrix() - s.matrix()).norm() < 1e-14);
    }

    #[test]
    fn separable_verdicts_carry_sound_certificates((s, _) in separable_state(), seed in 0u64..1000) {
        let config = Config { seed, ..Config::default() };
        let v = separability_check(&s, &config);
        prop_assert_eq!(v.status, Status::Separable);
        if let Some(cert) = &v.certificate {
            let mut rebuilt = CMatrix::zeros(s.matrix().nrows(), s.matrix().ncols());
            for t in &cert.terms {
                prop_assert!(t.weight > 0.0);
                let psi = t.vector.e.kronecker(&t.vector.f);
                rebuilt += (&psi * psi.adjoint()).scale(t.weight);
            }
            prop_assert!((rebuilt - s.matrix()).norm() < 1e-8);
        }
    }

    #[test]
    fn ppt_random_states_are_ppt(seed in any::<u64>()) {
        let r = 3;
        let s = fixtures::ppt_random(2, 2, r, seed).unwrap();
        prop_assert!(s.is_ppt(&tol()));
        prop_assert_eq!(s.rank(&tol()), r);
    }

    #[test]
    fn bsa_lambda_is_monotone((m, n) in (2usize..=3, 2usize..=3), terms in 1usize..=3, mu in 0.05f64..0.95, seed in any::<u64>()) {
        let (s, d) = random_separable(&GeneratorSpec::separable(m, n, terms, seed)).unwrap();
        let noise = fixtures::maximally_mixed(m, n);
        let rho = s.matrix().scale(mu) + noise.matrix().scale(1.0 - mu);
        let mixed = BipartiteState::new(m, n, rho, &tol()).unwrap();
        let vectors: Vec<_> = d.terms.iter().map(|t| t.vector.clone()).collect();
        let out = bsa_decompose(&mixed, &vectors, &tol(), 50);
        prop_assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert!(out.lambda >= -1e-12 && out.lambda <= 1.0 + 1e-9);
        prop_assert!(out.weights.iter().all(|&w| w >= -1e-12));
        let sum: f64 = out.weights.iter().sum();
        prop_assert!((sum - out.lambda).abs() < 1e-8);
    }

    #[test]
    fn state_document_round_trips((s, _) in separable_state()) {
        let text = to_json(&StateDocument::from_state(&s)).unwrap();
        let back = from_json::<StateDocument>(&text).unwrap().to_state(&tol()).unwrap();
        prop_assert_eq!(back.dims(), s.dims());
        prop_assert_eq!(back.matrix(), s.matrix());
    }
}

#[test]
fn verdict_document_round_trips() {
    let (s, _) = random_separable(&GeneratorSpec::separable(2, 3, 3, 11)).unwrap();
    let v = separability_check(&s, &Config::default());
    let doc = VerdictDocument::from_verdict(&v);
    let text = to_json(&doc).unwrap();
    let back = from_json::<VerdictDocument>(&text).unwrap().to_verdict(s.matrix());
    assert_eq!(back.status, v.status);
    assert_eq!(back.certificate, v.certificate);
    assert_eq!(to_json(&VerdictDocument::from_verdict(&back)).unwrap(), text);
}

#[test]
fn werner_boundary() {
    let t = tol();
    assert!(fixtures::werner_family(0.3).unwrap().is_ppt(&t));
    assert!(!fixtures::werner_family(0.34).unwrap().is_ppt(&t));
    let v = separability_check(&fixtures::werner_family(0.5).unwrap(), &Config::default());
    assert_eq!(v.status, Status::Entangled);
    assert!(v.witness.is_some());
}
