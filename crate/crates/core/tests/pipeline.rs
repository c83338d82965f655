use nps_core::clustering::{extract_roles, misclassification, ExtractOptions};
use nps_core::linalg::DenseSymmetric;
use nps_core::nps::{self, BetaPolicy, Depth, SimilarityState, Source};
use nps_core::par::Exec;
use nps_core::sbm::{self, cycle_model, io};
use nps_core::spectral::{self, Algorithm1Options};

#[test]
fn algorithm1_tracks_the_dense_similarity_subspace() {
    let (g, _) = sbm::sample_adjacency(&cycle_model(0.75).unwrap(), 10, 4).unwrap();
    let beta = nps::choose_beta(&g, BetaPolicy::HalfGamma).unwrap();
    for k in [1, 3, 6] {
        let x = spectral::algorithm1_subspace(&g, 3, beta.beta, k, &Algorithm1Options::default()).unwrap();
        let s = nps::similarity_recurrence(&g, beta.beta2, Depth::Steps(k), Source::Sample).unwrap();
        let dense = spectral::truncated_evd(&DenseSymmetric(s.matrix()), 3, 4).unwrap();
        let angle = spectral::principal_angle_sines(&dense.basis, &x).unwrap().norm();
        assert!(angle < 0.15, "k = {k}: ‖sin Θ‖ = {angle}");
    }
}

#[test]
fn shuffled_sample_is_recovered_up_to_relabelling() {
    let model = cycle_model(0.75).unwrap();
    let (g, truth) = sbm::sample_adjacency(&model, 12, 9).unwrap();
    let (g, truth, perm) = sbm::shuffle(&g, &truth, 9).unwrap();
    assert_ne!(perm, (0..perm.len()).collect::<Vec<_>>());
    let opts = ExtractOptions {
        seed: 9,
        exec: Exec::Sequential,
        ..ExtractOptions::default()
    };
    let out = extract_roles(&g, 3, &opts).unwrap();
    assert_eq!(misclassification(&truth, &out.assignment).unwrap().value, 0.0);
    assert_eq!(out.rank_estimate.unwrap().rank, 3);
    let par = extract_roles(&g, 3, &ExtractOptions { exec: Exec::default(), ..opts }).unwrap();
    assert_eq!(par.assignment, out.assignment);
}

#[test]
fn files_round_trip_through_buffers() {
    let (g, truth) = sbm::sample_adjacency(&cycle_model(0.6).unwrap(), 2, 5).unwrap();
    let mut edges = Vec::new();
    io::write_edge_list(&g, &mut edges).unwrap();
    assert_eq!(io::read_edge_list(edges.as_slice()).unwrap(), g);
    let mut labels = Vec::new();
    io::write_assignment(&truth, &mut labels).unwrap();
    assert_eq!(io::read_assignment(labels.as_slice(), Some(3)).unwrap(), truth);

    let beta = nps::choose_beta(&g, BetaPolicy::Safe).unwrap();
    let s = nps::similarity_recurrence(&g, beta.beta2, Depth::Limit, Source::Sample).unwrap();
    let mut dump = Vec::new();
    s.write_binary(&mut dump).unwrap();
    let back = SimilarityState::read_binary(dump.as_slice()).unwrap();
    assert_eq!(&back.matrix, s.matrix());
    assert_eq!(back.depth, Depth::Limit);
    assert_eq!(back.beta2, beta.beta2);
}

#[test]
fn limit_agrees_with_oracle_on_a_sample() {
    let (full, _) = sbm::sample_adjacency(&cycle_model(0.6).unwrap(), 2, 11).unwrap();
    // Induced subgraph on nodes from all three clusters keeps the oracle small.
    let keep = [0, 1, 2, 20, 21, 22, 40, 41];
    let edges = full
        .edges()
        .filter_map(|(i, j)| Some((keep.iter().position(|&k| k == i)?, keep.iter().position(|&k| k == j)?)));
    let g = sbm::Digraph::from_edges(keep.len(), edges).unwrap();
    let beta = nps::choose_beta(&g, BetaPolicy::HalfGamma).unwrap();
    let limit = nps::similarity_recurrence(&g, beta.beta2, Depth::Limit, Source::Sample).unwrap();
    let oracle = nps::similarity_limit_oracle(&g.to_dense(), beta.beta2, 64).unwrap();
    let err = (limit.matrix() - oracle.matrix()).amax() / oracle.matrix().amax();
    assert!(err < 1e-9, "relative error {err}");
}
