//! Stochastic Block Model for directed graphs.
//!
//! A [`RoleModel`] partitions `m·n` nodes into `q` clusters of sizes
//! `m_1 n, …, m_q n` and draws edge `(i, j)` independently with probability
//! `f(n)·θ_{ξ(i) ξ(j)}`. Samples are emitted cluster-contiguous (all nodes of
//! cluster 0, then cluster 1, …); [`shuffle`] produces permuted inputs.

mod digraph;
pub mod io;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::linalg::{self, LinearOperator};
use crate::par::Exec;
use crate::rng::{self, purpose};
use crate::{Error, Result};

pub use digraph::Digraph;

/// Relative tolerance used for the cached ranks of `Υ` and `[Υ Υᵀ]`.
pub const RANK_TOL: f64 = 1e-10;

/// The density schedule `f(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Constant(f64),
    /// `scale · n^(−exponent)` with `0 ≤ exponent < 1`, so that `n f(n) → ∞`.
    PowerLaw { scale: f64, exponent: f64 },
}

impl Default for Density {
    fn default() -> Self {
        Density::Constant(1.0)
    }
}

impl Density {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            Density::Constant(c) => c,
            Density::PowerLaw { scale, exponent } => scale * (n as f64).powf(-exponent),
        }
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            Density::Constant(c) => Density::Constant(c * factor),
            Density::PowerLaw { scale, exponent } => Density::PowerLaw {
                scale: scale * factor,
                exponent,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Density::Constant(c) if c > 0.0 && c <= 1.0 => Ok(()),
            Density::PowerLaw { scale, exponent }
                if scale > 0.0 && scale <= 1.0 && (0.0..1.0).contains(&exponent) =>
            {
                Ok(())
            }
            other => Err(Error::InvalidModel(format!(
                "density {other:?} must lie in (0, 1] with n·f(n) → ∞"
            ))),
        }
    }
}

/// Block model generator: role count, cluster fractions, normalised
/// probability matrix `Υ` (max entry 1) and density `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleModel {
    fractions: Vec<f64>,
    upsilon: DMatrix<f64>,
    density: Density,
    rank_upsilon: usize,
    rank_compound: usize,
}

impl RoleModel {
    /// `probabilities` holds the raw block probabilities `θ_ab` (scaled by
    /// `density`); the largest entry is folded into the density so that the
    /// stored `Υ` has maximum 1.
    pub fn new(fractions: Vec<f64>, probabilities: DMatrix<f64>, density: Density) -> Result<Self> {
        let q = fractions.len();
        if q == 0 {
            return Err(Error::InvalidModel("at least one role is required".into()));
        }
        if let Some(bad) = fractions.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidModel(format!("cluster fraction {bad} is not positive")));
        }
        if probabilities.nrows() != q || probabilities.ncols() != q {
            return Err(Error::dims(
                format!("{q}x{q} probability matrix"),
                format!("{}x{}", probabilities.nrows(), probabilities.ncols()),
            ));
        }
        for col in 0..q {
            for row in 0..q {
                let value = probabilities[(row, col)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::ProbabilityOutOfRange { row, col, value });
                }
            }
        }
        density.validate()?;
        let max = probabilities.max();
        let (upsilon, density) = if max > 0.0 {
            (probabilities / max, density.scaled(max))
        } else {
            (probabilities, density)
        };
        let rank_upsilon = linalg::numerical_rank(&upsilon, RANK_TOL);
        let rank_compound = linalg::numerical_rank(&linalg::compound_dense(&upsilon), RANK_TOL);
        Ok(RoleModel {
            fractions,
            upsilon,
            density,
            rank_upsilon,
            rank_compound,
        })
    }

    pub fn roles(&self) -> usize {
        self.fractions.len()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Normalised `Υ` (max entry 1, or all zero).
    pub fn upsilon(&self) -> &DMatrix<f64> {
        &self.upsilon
    }

    pub fn density(&self) -> Density {
        self.density
    }

    pub fn f(&self, n: usize) -> f64 {
        self.density.at(n)
    }

    /// `m = Σ m_i`.
    pub fn total_fraction(&self) -> f64 {
        self.fractions.iter().sum()
    }

    pub fn min_fraction(&self) -> f64 {
        self.fractions.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_fraction(&self) -> f64 {
        self.fractions.iter().copied().fold(0.0, f64::max)
    }

    /// `s = rank(Υ)`.
    pub fn rank_upsilon(&self) -> usize {
        self.rank_upsilon
    }

    /// `r = rank([Υ Υᵀ])`, the rank of every `T_k`, `k ≥ 1`.
    pub fn rank_compound(&self) -> usize {
        self.rank_compound
    }

    /// `[Υ Υᵀ]` (q × 2q).
    pub fn compound_upsilon(&self) -> DMatrix<f64> {
        linalg::compound_dense(&self.upsilon)
    }

    /// Singular values of `[Υ Υᵀ]`, descending.
    pub fn compound_singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.compound_upsilon())
    }

    /// `δ² = 4 m n f(n)`.
    pub fn delta_sq(&self, n: usize) -> f64 {
        4.0 * self.total_fraction() * n as f64 * self.f(n)
    }

    /// Block probabilities `f(n)·Υ`, validated to lie in `[0, 1]`.
    pub fn block_probabilities(&self, n: usize) -> Result<DMatrix<f64>> {
        let p = &self.upsilon * self.f(n);
        let q = self.roles();
        for col in 0..q {
            for row in 0..q {
                let v = p[(row, col)];
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::ProbabilityOutOfRange { row, col, value: v });
                }
            }
        }
        Ok(p)
    }

    /// Cluster sizes `round(m_i n)`.
    pub fn cluster_sizes(&self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::InvalidArgument("scale n must be at least 1".into()));
        }
        self.fractions
            .iter()
            .enumerate()
            .map(|(cluster, m)| {
                let size = (m * n as f64).round() as usize;
                if size == 0 {
                    Err(Error::EmptyCluster { cluster, n })
                } else {
                    Ok(size)
                }
            })
            .collect()
    }

    pub fn n_nodes(&self, n: usize) -> Result<usize> {
        Ok(self.cluster_sizes(n)?.iter().sum())
    }
}

/// The three-role cycle model: `q = 3`, `m_i = 10` and
/// `Υ = p·C + (1 − p)·(J − C)` with `C` the cyclic shift.
pub fn cycle_model(p: f64) -> Result<RoleModel> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidModel(format!("cycle probability {p} must lie in (0, 1)")));
    }
    let cycle = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 1., 0., 0.]);
    let ones = DMatrix::from_element(3, 3, 1.0);
    let probabilities = &cycle * p + (ones - &cycle) * (1.0 - p);
    RoleModel::new(vec![10.0; 3], probabilities, Density::Constant(1.0))
}

/// Node-to-role map with labels in `0..roles`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<usize>,
    roles: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, roles: usize) -> Result<Self> {
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= roles) {
            return Err(Error::LabelOutOfRange { node, label, roles });
        }
        Ok(Assignment { labels, roles })
    }

    /// Cluster-contiguous assignment for the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Self {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(a, &s)| std::iter::repeat_n(a, s))
            .collect();
        Assignment {
            labels,
            roles: sizes.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn roles(&self) -> usize {
        self.roles
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.roles];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Node lists `C_a`.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.roles];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Applies `label ↦ map[label]`.
    pub fn relabeled(&self, map: &[usize]) -> Result<Self> {
        Assignment::new(self.labels.iter().map(|&l| map[l]).collect(), self.roles)
    }

    /// Moves node `i` to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: perm.len(),
            });
        }
        let mut labels = vec![0; self.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            labels[perm[i]] = l;
        }
        Assignment::new(labels, self.roles)
    }
}

/// Draws one digraph from the model at scale `n`. Row `i` uses its own RNG
/// substream of `seed`, so the output is a pure function of
/// `(model, n, seed)` whatever the thread count.
pub fn sample_adjacency(model: &RoleModel, n: usize, seed: u64) -> Result<(Digraph, Assignment)> {
    let p = model.block_probabilities(n)?;
    let sizes = model.cluster_sizes(n)?;
    let assignment = Assignment::contiguous(&sizes);
    let n_nodes = assignment.len();
    let labels = assignment.labels();
    let rows = Exec::default().map(n_nodes, |i| {
        let mut rng = rng::stream(seed, purpose::SAMPLE_ROW + i as u64);
        let a = labels[i];
        let mut row = Vec::new();
        for (j, &b) in labels.iter().enumerate() {
            if rng.random::<f64>() < p[(a, b)] {
                row.push(j as u32);
            }
        }
        row
    });
    Ok((Digraph::from_sorted_rows(n_nodes, rows), assignment))
}

/// Applies a uniformly random node relabelling; returns the permutation
/// (`old i → new perm[i]`) together with the relabelled graph and truth.
pub fn shuffle(
    graph: &Digraph,
    assignment: &Assignment,
    seed: u64,
) -> Result<(Digraph, Assignment, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..graph.n_nodes()).collect();
    perm.shuffle(&mut rng::stream(seed, purpose::SHUFFLE));
    Ok((graph.permuted(&perm)?, assignment.permuted(&perm)?, perm))
}

/// `E[A] = f(n) Z Υ Zᵀ` kept in factored form.
#[derive(Debug, Clone)]
pub struct ExpectedAdjacency {
    assignment: Assignment,
    sizes: Vec<usize>,
    core: DMatrix<f64>,
}

pub fn expected_adjacency(model: &RoleModel, n: usize) -> Result<ExpectedAdjacency> {
    let sizes = model.cluster_sizes(n)?;
    Ok(ExpectedAdjacency {
        assignment: Assignment::contiguous(&sizes),
        sizes,
        core: model.block_probabilities(n)?,
    })
}

impl ExpectedAdjacency {
    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `f(n)·Υ`.
    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    /// The 0/1 block indicator `Z` (N × q).
    pub fn indicator(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n_nodes(), self.sizes.len());
        for (i, &l) in self.assignment.labels().iter().enumerate() {
            z[(i, l)] = 1.0;
        }
        z
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let labels = self.assignment.labels();
        DMatrix::from_fn(self.n_nodes(), self.n_nodes(), |i, j| {
            self.core[(labels[i], labels[j])]
        })
    }

    /// `C = D^{1/2} (fΥ) D^{1/2}` with `D = diag(|C_a|)`; `M = Z̃ C Z̃ᵀ` for
    /// the orthonormal `Z̃ = Z D^{-1/2}`.
    pub fn reduced_core(&self) -> DMatrix<f64> {
        let q = self.sizes.len();
        DMatrix::from_fn(q, q, |a, b| {
            self.core[(a, b)] * (self.sizes[a] as f64).sqrt() * (self.sizes[b] as f64).sqrt()
        })
    }

    /// Nonzero-padded singular values of `M` (length q, descending).
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.reduced_core())
    }

    /// Singular values of `[M Mᵀ]` (length q, descending).
    pub fn compound_singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&linalg::compound_dense(&self.reduced_core()))
    }

    fn block_sums(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.sizes.len(), x.ncols());
        for (i, &l) in self.assignment.labels().iter().enumerate() {
            for c in 0..x.ncols() {
                out[(l, c)] += x[(i, c)];
            }
        }
        out
    }

    fn expand(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let labels = self.assignment.labels();
        DMatrix::from_fn(self.n_nodes(), y.ncols(), |i, c| y[(labels[i], c)])
    }
}

impl LinearOperator for ExpectedAdjacency {
    fn nrows(&self) -> usize {
        self.n_nodes()
    }
    fn ncols(&self) -> usize {
        self.n_nodes()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.expand(&(&self.core * self.block_sums(x)))
    }
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.expand(&self.core.tr_mul(&self.block_sums(x)))
    }
    fn to_dense(&self) -> DMatrix<f64> {
        ExpectedAdjacency::to_dense(self)
    }
}

/// Block-constant digraph with block `(a, b)` full when `binary_roles[(a, b)]`.
pub fn ideal_adjacency(assignment: &Assignment, binary_roles: &DMatrix<bool>) -> Result<Digraph> {
    let q = assignment.roles();
    if binary_roles.nrows() != q || binary_roles.ncols() != q {
        return Err(Error::dims(
            format!("{q}x{q} role matrix"),
            format!("{}x{}", binary_roles.nrows(), binary_roles.ncols()),
        ));
    }
    let labels = assignment.labels();
    let rows = labels
        .iter()
        .map(|&a| {
            labels
                .iter()
                .enumerate()
                .filter(|(_, &b)| binary_roles[(a, b)])
                .map(|(j, _)| j as u32)
                .collect()
        })
        .collect();
    Ok(Digraph::from_sorted_rows(labels.len(), rows))
}

/// Edge density of every block `(a, b)`: `|E ∩ C_a × C_b| / (|C_a| |C_b|)`.
pub fn block_densities(graph: &Digraph, assignment: &Assignment) -> Result<DMatrix<f64>> {
    if graph.n_nodes() != assignment.len() {
        return Err(Error::LengthMismatch {
            left: graph.n_nodes(),
            right: assignment.len(),
        });
    }
    let q = assignment.roles();
    let labels = assignment.labels();
    let sizes = assignment.cluster_sizes();
    let mut counts = DMatrix::<f64>::zeros(q, q);
    for (i, j) in graph.edges() {
        counts[(labels[i], labels[j])] += 1.0;
    }
    Ok(DMatrix::from_fn(q, q, |a, b| {
        let cells = (sizes[a] * sizes[b]) as f64;
        if cells > 0.0 {
            counts[(a, b)] / cells
        } else {
            0.0
        }
    }))
}
