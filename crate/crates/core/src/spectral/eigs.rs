//! Dominant eigenpairs of symmetric operators.
//!
//! Two iterative backends share one result type:
//!
//! * [`subspace_iteration`]: block power iteration with Rayleigh–Ritz, used
//!   for the `q` dominant singular vectors of `[A Aᵀ]` where the signal/noise
//!   gap makes it converge in a handful of sweeps;
//! * [`lanczos`]: Lanczos with full reorthogonalisation and a growing Krylov
//!   space, used for eigenvalue windows that reach into the noise bulk.
//!
//! Small operators (dimension ≤ [`DENSE_CUTOFF`]) are materialised and
//! solved densely by [`top_eigenpairs`].

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;

use crate::linalg::{self, SymmetricOperator};
use crate::rng::{self, purpose};
use crate::{Error, Result};

pub const DENSE_CUTOFF: usize = 200;

/// Which end of the spectrum to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    LargestAlgebraic,
    LargestMagnitude,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual tolerance relative to the largest Ritz value in magnitude.
    pub tol: f64,
    pub which: Which,
    pub seed: u64,
    /// Extra block vectors for subspace iteration.
    pub oversample: usize,
    pub max_iterations: usize,
    pub dense_cutoff: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            which: Which::LargestAlgebraic,
            seed: 0x5EED,
            oversample: 4,
            max_iterations: 2000,
            dense_cutoff: DENSE_CUTOFF,
        }
    }
}

/// Leading eigenpairs in the requested order.
#[derive(Debug, Clone)]
pub struct EigenWindow {
    pub values: Vec<f64>,
    /// N × values.len(), orthonormal columns.
    pub vectors: DMatrix<f64>,
    /// Largest residual norm among the returned pairs.
    pub max_residual: f64,
    /// Operator applications (block applications for subspace iteration).
    pub iterations: usize,
}

fn ordered(values: &[f64], which: Which) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match which {
        Which::LargestAlgebraic => idx.sort_by(|&a, &b| values[b].total_cmp(&values[a])),
        Which::LargestMagnitude => {
            idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()))
        }
    }
    idx
}

fn dense_window(m: &DMatrix<f64>, count: usize, which: Which) -> EigenWindow {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = ordered(&vals, which);
    let take = &order[..count.min(order.len())];
    EigenWindow {
        values: take.iter().map(|&i| vals[i]).collect(),
        vectors: DMatrix::from_fn(m.nrows(), take.len(), |r, c| eig.eigenvectors[(r, take[c])]),
        max_residual: 0.0,
        iterations: 1,
    }
}

/// Leading `count` eigenpairs, dense for small operators and Lanczos
/// otherwise.
pub fn top_eigenpairs<S: SymmetricOperator + ?Sized>(
    op: &S,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenWindow> {
    if op.dim() <= opts.dense_cutoff {
        return Ok(dense_window(&op.to_dense(), count, opts.which));
    }
    lanczos(op, count, opts)
}

/// Largest eigenvalue of a symmetric operator (0 for an empty operator).
pub fn largest_eigenvalue<S: SymmetricOperator + ?Sized>(op: &S) -> Result<f64> {
    if op.dim() == 0 {
        return Ok(0.0);
    }
    Ok(top_eigenpairs(op, 1, &EigenOptions::default())?.values[0])
}

/// Spectral norm `max |λ|` of a symmetric operator.
pub fn symmetric_norm<S: SymmetricOperator + ?Sized>(op: &S) -> Result<f64> {
    if op.dim() == 0 {
        return Ok(0.0);
    }
    let opts = EigenOptions {
        which: Which::LargestMagnitude,
        ..EigenOptions::default()
    };
    Ok(top_eigenpairs(op, 1, &opts)?.values[0].abs())
}

fn random_unit(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let norm = v.norm();
    v / norm
}

/// Lanczos with full reorthogonalisation. The Krylov dimension starts at
/// `max(2·count + 20, 60)` and doubles until every requested Ritz pair has
/// residual `≤ tol · max|θ|` or the space spans the whole operator.
/// Invariant subspaces (breakdown) are continued with fresh random vectors.
pub fn lanczos<S: SymmetricOperator + ?Sized>(
    op: &S,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenWindow> {
    let n = op.dim();
    let count = count.min(n);
    if count == 0 {
        return Ok(EigenWindow {
            values: vec![],
            vectors: DMatrix::zeros(n, 0),
            max_residual: 0.0,
            iterations: 0,
        });
    }
    let mut rng = rng::stream(opts.seed, purpose::LANCZOS);
    let mut basis: Vec<f64> = Vec::with_capacity(n * 64);
    let mut alphas: Vec<f64> = Vec::new();
    // betas[j] couples basis vectors j and j+1.
    let mut betas: Vec<f64> = Vec::new();
    let mut checkpoint = n.min((2 * count + 20).max(60));
    let mut q = random_unit(n, &mut rng);
    let mut scale_estimate = 0.0_f64;

    loop {
        let j = alphas.len();
        basis.extend_from_slice(q.as_slice());
        let mut w = op.apply(&DMatrix::from_column_slice(n, 1, q.as_slice()));
        let mut w = DVector::from_column_slice(w.as_mut_slice());
        let alpha = q.dot(&w);
        alphas.push(alpha);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            let qmat = DMatrixView::from_slice(&basis, n, j + 1);
            let h = qmat.tr_mul(&w);
            w -= qmat * h;
        }
        let mut beta = w.norm();
        scale_estimate = scale_estimate.max(alpha.abs() + beta);
        let dim = j + 1;

        if dim == checkpoint || dim == n {
            let t = tridiagonal(&alphas, &betas);
            let eig = nalgebra::SymmetricEigen::new(t);
            let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let order = ordered(&vals, opts.which);
            let take = &order[..count.min(dim)];
            let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let residual_coupling = if dim == n { 0.0 } else { beta };
            let residuals: Vec<f64> = take
                .iter()
                .map(|&i| (residual_coupling * eig.eigenvectors[(dim - 1, i)]).abs())
                .collect();
            let max_residual = residuals.iter().fold(0.0_f64, |a, &r| a.max(r));
            if (take.len() == count && max_residual <= opts.tol * scale) || dim == n {
                let qmat = DMatrixView::from_slice(&basis, n, dim);
                let s = DMatrix::from_fn(dim, take.len(), |r, c| eig.eigenvectors[(r, take[c])]);
                return Ok(EigenWindow {
                    values: take.iter().map(|&i| vals[i]).collect(),
                    vectors: qmat * s,
                    max_residual,
                    iterations: dim,
                });
            }
            checkpoint = n.min(2 * checkpoint);
        }

        if beta <= 1e-12 * scale_estimate.max(f64::MIN_POSITIVE) {
            // Invariant subspace found: restart from a random direction
            // orthogonal to the current basis, decoupled in T.
            let qmat = DMatrixView::from_slice(&basis, n, dim);
            let mut fresh = random_unit(n, &mut rng);
            for _ in 0..2 {
                let h = qmat.tr_mul(&fresh);
                fresh -= qmat * h;
            }
            let norm = fresh.norm();
            if norm == 0.0 {
                return Err(Error::NotConverged {
                    what: "Lanczos restart",
                    iterations: dim,
                });
            }
            q = fresh / norm;
            beta = 0.0;
        } else {
            q = w / beta;
        }
        betas.push(beta);
    }
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

/// Block subspace iteration with Rayleigh–Ritz on `count + oversample`
/// vectors. Converged when the first `count` Ritz residuals are all
/// `≤ tol · |θ_1|`.
pub fn subspace_iteration<S: SymmetricOperator + ?Sized>(
    op: &S,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenWindow> {
    let n = op.dim();
    let count = count.min(n);
    let block = (count + opts.oversample).min(n);
    let mut rng = rng::stream(opts.seed, purpose::SUBSPACE);
    let mut x = linalg::orthonormalize(DMatrix::from_fn(n, block, |_, _| {
        rng.random::<f64>() - 0.5
    }));
    for it in 1..=opts.max_iterations {
        let ax = op.apply(&x);
        let mut h = x.tr_mul(&ax);
        linalg::symmetrize(&mut h);
        let eig = nalgebra::SymmetricEigen::new(h);
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let order = ordered(&vals, opts.which);
        let w = DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        let theta: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let ritz = &x * &w;
        let aritz = &ax * &w;
        let scale = theta.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let max_residual = (0..count)
            .map(|c| (aritz.column(c) - ritz.column(c) * theta[c]).norm())
            .fold(0.0_f64, f64::max);
        if max_residual <= opts.tol * scale {
            return Ok(EigenWindow {
                values: theta[..count].to_vec(),
                vectors: ritz.columns(0, count).into_owned(),
                max_residual,
                iterations: it,
            });
        }
        x = linalg::orthonormalize(aritz);
    }
    Err(Error::NotConverged {
        what: "subspace iteration",
        iterations: opts.max_iterations,
    })
}
