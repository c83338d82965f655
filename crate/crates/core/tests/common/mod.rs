//! Randomised invariants shared by the proptest suite and the acceptance
//! runner. Each `check_*` function is one property; `run` drives it with a
//! fixed-seed runner so failures reproduce.

#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use nps_core::clustering::{self, lloyd};
use nps_core::linalg::{self, kron, vec_of};
use nps_core::nps::{self, BetaPolicy, Depth, Recurrence};
use nps_core::sbm::{self, Assignment, Density, Digraph, RoleModel};
use nps_core::spectral;

pub const CASES: u32 = 128;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]))
}

/// Runs `check` on `cases` draws from `strategy`, returning the first
/// (shrunk) failure as text.
pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, check).map_err(|e| e.to_string())
}

pub fn matrix(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
    })
}

pub fn matrix_pair(max_n: usize) -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        let m = move || prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v));
        (m(), m())
    })
}

/// A digraph with at least one edge.
pub fn digraph(max_n: usize) -> impl Strategy<Value = Digraph> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::bool::weighted(0.4), n * n)))
        .prop_filter("needs an edge", |(_, bits)| bits.iter().any(|&b| b))
        .prop_map(|(n, bits)| {
            let edges = (0..n * n).filter(|&e| bits[e]).map(|e| (e / n, e % n));
            Digraph::from_edges(n, edges).unwrap()
        })
}

pub fn role_model(max_q: usize) -> impl Strategy<Value = RoleModel> {
    (1..=max_q).prop_flat_map(|q| {
        (
            prop::collection::vec(1u32..=5, q),
            prop::collection::vec(0.05..1.0f64, q * q),
        )
            .prop_map(move |(sizes, probs)| {
                let fractions = sizes.into_iter().map(f64::from).collect();
                RoleModel::new(fractions, DMatrix::from_vec(q, q, probs), Density::Constant(1.0)).unwrap()
            })
    })
}

/// Labels in `0..q` where every role occurs at least once.
pub fn full_labels(q: usize, n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..q, n - q)
        .prop_map(move |rest| (0..q).chain(rest).collect::<Vec<_>>())
        .prop_shuffle()
}

/// A truth partition with nonempty clusters and an arbitrary found one.
pub fn assignment_pair(max_q: usize, max_n: usize) -> impl Strategy<Value = (Assignment, Assignment)> {
    (1..=max_q)
        .prop_flat_map(move |q| (Just(q), q.max(2)..=max_n.max(q + 1)))
        .prop_flat_map(|(q, n)| (Just(q), full_labels(q, n), prop::collection::vec(0..q, n)))
        .prop_map(|(q, truth, found)| {
            (Assignment::new(truth, q).unwrap(), Assignment::new(found, q).unwrap())
        })
}

fn lambda_min(m: &DMatrix<f64>) -> f64 {
    *linalg::sym_eigenvalues_desc(m).last().unwrap()
}

fn scale_of(m: &DMatrix<f64>) -> f64 {
    linalg::sym_spectral_norm(m).max(1.0)
}

/// `S_1 ⪯ S_2 ⪯ … ⪯ S_6` for the sampled recurrence.
pub fn check_loewner(g: Digraph) -> Result<(), TestCaseError> {
    let beta = nps::choose_beta(&g, BetaPolicy::Safe).unwrap();
    let iterates: Vec<DMatrix<f64>> = Recurrence::new(&g, beta.beta2).unwrap().take(6).collect();
    for w in iterates.windows(2) {
        let gap = lambda_min(&(&w[1] - &w[0]));
        prop_assert!(gap >= -1e-10 * scale_of(&w[1]), "λ_min(S_k+1 − S_k) = {gap}");
    }
    Ok(())
}

/// `S_k ⪰ S_1 ⪰ 0` on samples and `T_k ⪰ 0` on expectations.
pub fn check_psd_floor((g, model, n): (Digraph, RoleModel, usize)) -> Result<(), TestCaseError> {
    let beta = nps::choose_beta(&g, BetaPolicy::HalfGamma).unwrap();
    let s1 = nps::similarity_recurrence(&g, beta.beta2, Depth::Steps(1), nps::Source::Sample).unwrap();
    let s5 = nps::similarity_recurrence(&g, beta.beta2, Depth::Steps(5), nps::Source::Sample).unwrap();
    let tol = 1e-10 * scale_of(s5.matrix());
    prop_assert!(lambda_min(s1.matrix()) >= -tol);
    prop_assert!(lambda_min(&(s5.matrix() - s1.matrix())) >= -tol);

    let m = sbm::expected_adjacency(&model, n).unwrap();
    let mb = nps::choose_beta(&m, BetaPolicy::HalfGamma).unwrap();
    let t = nps::expected_similarity(&m, mb.beta2, Depth::Steps(4)).unwrap();
    let (values, _) = t.eigen();
    let top = values.first().copied().unwrap_or(0.0).max(1.0);
    prop_assert!(values.iter().all(|&v| v >= -1e-10 * top), "T_k eigenvalues {values:?}");
    Ok(())
}

/// Renaming found roles or reordering nodes leaves `f̂` unchanged.
pub fn check_fhat_invariance(
    ((truth, found), names, order): ((Assignment, Assignment), Vec<usize>, Vec<usize>),
) -> Result<(), TestCaseError> {
    let q = truth.roles();
    let names: Vec<usize> = names.into_iter().take(q).collect();
    let order: Vec<usize> = order.into_iter().take(truth.len()).collect();
    let base = clustering::misclassification(&truth, &found).unwrap().value;
    let renamed = clustering::misclassification(&truth, &found.relabeled(&names).unwrap()).unwrap().value;
    prop_assert_eq!(base, renamed);
    let moved = clustering::misclassification(
        &truth.permuted(&order).unwrap(),
        &found.permuted(&order).unwrap(),
    )
    .unwrap()
    .value;
    prop_assert_eq!(base, moved);
    prop_assert_eq!(clustering::misclassification(&truth, &truth).unwrap().value, 0.0);
    Ok(())
}

pub fn fhat_invariance_input() -> impl Strategy<Value = ((Assignment, Assignment), Vec<usize>, Vec<usize>)> {
    assignment_pair(6, 30).prop_flat_map(|(t, f)| {
        let q = t.roles();
        let n = t.len();
        (
            Just((t, f)),
            Just((0..q).collect::<Vec<_>>()).prop_shuffle(),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

pub fn check_fhat_solvers((truth, found): (Assignment, Assignment)) -> Result<(), TestCaseError> {
    let exhaustive = clustering::misclassification_exhaustive(&truth, &found).unwrap();
    let bottleneck = clustering::misclassification_bottleneck(&truth, &found).unwrap();
    prop_assert_eq!(exhaustive.value, bottleneck.value);
    Ok(())
}

/// `vec(Γ_W[X]) = (W⊗W + Wᵀ⊗Wᵀ) vec(X)`.
pub fn check_gamma_kronecker((w, x): (DMatrix<f64>, DMatrix<f64>)) -> Result<(), TestCaseError> {
    let direct = vec_of(&nps::gamma_apply(&w, &x).unwrap());
    let k = kron(&w, &w) + kron(&w.transpose(), &w.transpose());
    let via = &k * vec_of(&x);
    prop_assert!((&direct - &via).amax() <= 1e-12 * (1.0 + via.amax()));
    prop_assert_eq!(nps::gamma_kronecker(&w), k);
    Ok(())
}

pub fn subspace_pair(max_n: usize) -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), 1..n))
        .prop_flat_map(|(n, r)| {
            let m = move || {
                prop::collection::vec(-1.0..1.0f64, n * r).prop_map(move |v| DMatrix::from_vec(n, r, v))
            };
            (m(), m())
        })
        .prop_filter("full column rank", |(a, b)| {
            let r = a.ncols();
            linalg::numerical_rank(a, 1e-6) == r && linalg::numerical_rank(b, 1e-6) == r
        })
        .prop_map(|(a, b)| (linalg::orthonormalize(a), linalg::orthonormalize(b)))
}

/// The sines agree with the spectrum of `Π_U − Π_V`, whose nonzero
/// eigenvalues are `±sin θ_i`.
pub fn check_principal_angles((u, v): (DMatrix<f64>, DMatrix<f64>)) -> Result<(), TestCaseError> {
    let sines = spectral::principal_angle_sines(&u, &v).unwrap().sines;
    let diff = &u * u.transpose() - &v * v.transpose();
    let eig = linalg::sym_eigenvalues_desc(&diff);
    let mut positive: Vec<f64> = eig.iter().copied().filter(|&e| e > 1e-9).collect();
    let mut negative: Vec<f64> = eig.iter().copied().filter(|&e| e < -1e-9).map(f64::abs).collect();
    positive.sort_by(|a, b| b.total_cmp(a));
    negative.sort_by(|a, b| b.total_cmp(a));
    prop_assert_eq!(positive.len(), negative.len());
    let nonzero: Vec<f64> = sines.iter().copied().filter(|&s| s > 1e-9).collect();
    prop_assert_eq!(nonzero.len(), positive.len());
    for ((s, p), m) in nonzero.iter().zip(&positive).zip(&negative) {
        prop_assert!((s - p).abs() < 1e-9 && (s - m).abs() < 1e-9);
    }
    let norm = linalg::sym_spectral_norm(&diff);
    prop_assert!((spectral::principal_angle_sines(&u, &v).unwrap().norm() - norm).abs() < 1e-9);
    Ok(())
}

pub fn lloyd_input() -> impl Strategy<Value = (DMatrix<f64>, usize, Vec<usize>)> {
    (3usize..40, 1usize..4, 1usize..5)
        .prop_flat_map(|(n, d, q)| {
            let q = q.min(n);
            (
                prop::collection::vec(-5.0..5.0f64, n * d).prop_map(move |v| DMatrix::from_vec(n, d, v)),
                Just(q),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
}

/// Lloyd never increases the inertia and reports the final one.
pub fn check_lloyd_monotone((rows, q, order): (DMatrix<f64>, usize, Vec<usize>)) -> Result<(), TestCaseError> {
    let init = DMatrix::from_fn(q, rows.ncols(), |c, j| rows[(order[c], j)]);
    let run = lloyd(&rows, &init, 300).unwrap();
    for w in run.history.windows(2) {
        prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "history {:?}", run.history);
    }
    let recomputed = clustering::partition_inertia(&rows, &run.labels, q);
    prop_assert!((recomputed - run.inertia).abs() <= 1e-9 * (1.0 + recomputed));
    Ok(())
}
