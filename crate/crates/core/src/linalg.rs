//! Operator abstractions and small dense helpers shared by the numerical
//! modules.
//!
//! Large matrices in this crate are rarely materialised: the adjacency is
//! sparse, the expected adjacency is a low-rank factorisation, and the
//! similarity matrices of interest are Gram matrices of compound blocks.
//! [`LinearOperator`] and [`SymmetricOperator`] let the eigensolvers work on
//! all of them through block products.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// A (possibly rectangular) linear map applied to blocks of column vectors.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `self · x`, where `x` has `ncols()` rows.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `selfᵀ · x`, where `x` has `nrows()` rows.
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    fn to_dense(&self) -> DMatrix<f64> {
        self.apply(&DMatrix::identity(self.ncols(), self.ncols()))
    }
}

/// A symmetric linear map `R^N → R^N`.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.apply(&DMatrix::identity(self.dim(), self.dim()));
        symmetrize(&mut m);
        m
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(x)
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// A dense matrix that the caller guarantees to be symmetric.
#[derive(Debug, Clone, Copy)]
pub struct DenseSymmetric<'a>(pub &'a DMatrix<f64>);

impl SymmetricOperator for DenseSymmetric<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0 * x
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// `Lᵀ L`.
#[derive(Debug, Clone, Copy)]
pub struct Gram<'a, L: ?Sized>(pub &'a L);

impl<L: LinearOperator + ?Sized> SymmetricOperator for Gram<'_, L> {
    fn dim(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply_t(&self.0.apply(x))
    }
}

/// `L Lᵀ`.
#[derive(Debug, Clone, Copy)]
pub struct OuterGram<'a, L: ?Sized>(pub &'a L);

impl<L: LinearOperator + ?Sized> SymmetricOperator for OuterGram<'_, L> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply(&self.0.apply_t(x))
    }
}

/// The `N × 2N` compound matrix `[W Wᵀ]` of a square operator `W`.
#[derive(Debug, Clone, Copy)]
pub struct Compound<'a, L: ?Sized>(pub &'a L);

impl<L: LinearOperator + ?Sized> LinearOperator for Compound<'_, L> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        2 * self.0.nrows()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.0.nrows();
        let top = x.rows(0, n).into_owned();
        let bottom = x.rows(n, n).into_owned();
        self.0.apply(&top) + self.0.apply_t(&bottom)
    }
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.0.nrows();
        let mut out = DMatrix::zeros(2 * n, x.ncols());
        out.rows_mut(0, n).copy_from(&self.0.apply_t(x));
        out.rows_mut(n, n).copy_from(&self.0.apply(x));
        out
    }
}

/// `W Wᵀ + Wᵀ W = [W Wᵀ][W Wᵀ]ᵀ`, the bibliometric symmetrisation and the
/// first similarity matrix `S_1 = Γ_W[I]`.
#[derive(Debug, Clone, Copy)]
pub struct Bibliometric<'a, L: ?Sized>(pub &'a L);

impl<L: LinearOperator + ?Sized> SymmetricOperator for Bibliometric<'_, L> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let wx = self.0.apply(x);
        let wtx = self.0.apply_t(x);
        self.0.apply(&wtx) + self.0.apply_t(&wx)
    }
}

/// `L1 − L2`.
#[derive(Debug, Clone, Copy)]
pub struct Difference<'a, L1: ?Sized, L2: ?Sized>(pub &'a L1, pub &'a L2);

impl<L1: LinearOperator + ?Sized, L2: LinearOperator + ?Sized> LinearOperator
    for Difference<'_, L1, L2>
{
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply(x) - self.1.apply(x)
    }
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply_t(x) - self.1.apply_t(x)
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Orthonormal basis of the column span of `x` (thin Householder QR).
pub fn orthonormalize(x: DMatrix<f64>) -> DMatrix<f64> {
    x.qr().q()
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm of a dense matrix via its singular values.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm of a symmetric matrix, `max |λ_i|`.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues_desc(m)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Number of singular values above `rel_tol · σ_1`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// `[W Wᵀ]` materialised.
pub fn compound_dense(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let mut out = DMatrix::zeros(n, 2 * n);
    out.columns_mut(0, n).copy_from(w);
    out.columns_mut(n, n).copy_from(&w.transpose());
    out
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Largest `|(UᵀU − I)_{ij}|`.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.tr_mul(u) - DMatrix::identity(u.ncols(), u.ncols());
    g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
