//! Role extraction: k-means on the rows of a dominant-subspace basis, and the
//! misclassification rate `f̂` against a known partition.

mod kmeans;
mod misclass;

use nalgebra::DMatrix;

use crate::linalg::{Bibliometric, LinearOperator};
use crate::nps::{self, Beta, BetaPolicy};
use crate::par::Exec;
use crate::sbm::Assignment;
use crate::spectral::{self, Algorithm1Options, RankEstimate, SpectralReport};
use crate::Result;

pub use kmeans::{
    kmeans, lloyd, partition_inertia, KMeansOptions, KMeansResult, LloydRun, DEFAULT_RESTARTS,
    MAX_LLOYD_ITERATIONS,
};
pub use misclass::{
    misclassification, misclassification_bottleneck, misclassification_exhaustive,
    MisclassificationScore, EXHAUSTIVE_MAX_ROLES,
};

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub policy: BetaPolicy,
    /// Depth of the low-rank iteration (at least 1).
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Also compute the leading spectrum of `S_1` and a rank estimate.
    pub diagnose_rank: bool,
    /// Strategy for the k-means restarts.
    pub exec: Exec,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            policy: BetaPolicy::HalfGamma,
            k: 1,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            diagnose_rank: true,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub assignment: Assignment,
    pub beta: Beta,
    /// `N × q` basis whose rows were clustered.
    pub basis: DMatrix<f64>,
    pub kmeans: KMeansResult,
    /// Leading eigenvalues of `S_1 = AAᵀ + AᵀA` with its gap table.
    pub spectrum: Option<SpectralReport>,
    pub rank_estimate: Option<RankEstimate>,
    /// The rank estimate differs from the requested `q`.
    pub rank_warning: bool,
}

/// β from the policy, the low-rank iteration basis `X_k`, then k-means on its rows.
pub fn extract_roles<L: LinearOperator + ?Sized>(
    a: &L,
    q: usize,
    opts: &ExtractOptions,
) -> Result<Extraction> {
    let beta = nps::choose_beta(a, opts.policy)?;
    let mut alg = Algorithm1Options::default();
    alg.eigen.seed = opts.seed;
    let basis = spectral::algorithm1_subspace(a, q, beta.beta, opts.k, &alg)?;
    let km = kmeans(
        &basis,
        q,
        &KMeansOptions {
            restarts: opts.restarts,
            seed: opts.seed,
            exec: opts.exec,
            ..KMeansOptions::default()
        },
    )?;
    let (spectrum, rank_estimate) = if opts.diagnose_rank {
        let window = spectral::gap_window(q, a.nrows());
        let report = spectral::truncated_evd(&Bibliometric(a), q, window)?;
        let est = report.estimate_rank().ok();
        (Some(report), est)
    } else {
        (None, None)
    };
    Ok(Extraction {
        assignment: km.labels.clone(),
        beta,
        basis,
        kmeans: km,
        rank_warning: rank_estimate.is_some_and(|e| e.rank != q),
        spectrum,
        rank_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{cycle_model, ideal_adjacency, sample_adjacency, Digraph};

    #[test]
    fn ideal_graph_is_recovered_exactly() {
        let roles = DMatrix::from_row_slice(3, 3, &[false, true, false, false, false, true, true, false, false]);
        let truth = Assignment::contiguous(&[5, 8, 6]);
        let g = ideal_adjacency(&truth, &roles).unwrap();
        let out = extract_roles(&g, 3, &ExtractOptions::default()).unwrap();
        assert_eq!(misclassification(&truth, &out.assignment).unwrap().value, 0.0);
        assert_eq!(out.rank_estimate.unwrap().rank, 3);
        assert!(!out.rank_warning);
    }

    #[test]
    fn single_role() {
        let (g, truth) = sample_adjacency(&cycle_model(0.6).unwrap(), 2, 1).unwrap();
        let one = Assignment::new(vec![0; truth.len()], 1).unwrap();
        let out = extract_roles(&g, 1, &ExtractOptions::default()).unwrap();
        assert_eq!(misclassification(&one, &out.assignment).unwrap().value, 0.0);
    }

    #[test]
    fn cycle_sample_is_mostly_recovered() {
        let model = cycle_model(0.6).unwrap();
        let (g, truth) = sample_adjacency(&model, 20, 7).unwrap();
        let opts = ExtractOptions {
            seed: 7,
            ..ExtractOptions::default()
        };
        let out = extract_roles(&g, 3, &opts).unwrap();
        assert!(misclassification(&truth, &out.assignment).unwrap().value < 0.1);
        let deeper = extract_roles(&g, 3, &ExtractOptions { k: 5, ..opts }).unwrap();
        assert!(misclassification(&truth, &deeper.assignment).unwrap().value < 0.1);
    }

    #[test]
    fn zero_graph_is_rejected() {
        let g = Digraph::from_edges(4, []).unwrap();
        assert!(extract_roles(&g, 2, &ExtractOptions::default()).is_err());
    }
}
