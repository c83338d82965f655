//! Neighbourhood Pattern Similarity.
//!
//! For a square `W` the map `Γ_W[X] = W X Wᵀ + Wᵀ X W` drives the recurrence
//!
//! ```text
//! S_0 = 0,    S_{k+1} = Γ_W[I + β² S_k]
//! ```
//!
//! whose limit is the weighted sum of all in/out walk-pattern counts. With
//! `W = A` (a sample) this gives `S_k`; with `W = M = E[A]` it gives `T_k`.
//! The limit exists when `β² ‖Γ_W‖ < 1`, and `‖Γ_W‖ = ‖W Wᵀ + Wᵀ W‖`.
//!
//! `T_k` has rank at most `q` and is computed in a `q × q` reduced form by
//! [`expected_similarity`].

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::linalg::{self, Bibliometric, Gram, LinearOperator, SymmetricOperator};
use crate::sbm::{Assignment, ExpectedAdjacency};
use crate::spectral::eigs;
use crate::{Error, Result};

/// Relative step size at which the limit recurrence stops.
pub const LIMIT_TOL: f64 = 1e-12;
/// Step cap for the limit recurrence.
pub const LIMIT_CAP: usize = 200;
/// Largest `N` for which the `N² × N²` vec system is solved.
pub const ORACLE_CAP: usize = 64;

/// `Γ_W[X]` for dense matrices.
pub fn gamma_apply(w: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !w.is_square() || w.shape() != x.shape() {
        return Err(Error::dims(
            format!("square W and X of equal size, W is {:?}", w.shape()),
            format!("{:?}", x.shape()),
        ));
    }
    Ok(gamma(w, x))
}

/// `Γ_W[X]` through block products only: `W X Wᵀ = W·(W Xᵀ)ᵀ` and
/// `Wᵀ X W = Wᵀ·(Wᵀ Xᵀ)ᵀ`.
fn gamma<L: LinearOperator + ?Sized>(w: &L, x: &DMatrix<f64>) -> DMatrix<f64> {
    let xt = x.transpose();
    w.apply(&w.apply(&xt).transpose()) + w.apply_t(&w.apply_t(&xt).transpose())
}

/// `‖Γ_W‖ = ‖W Wᵀ + Wᵀ W‖ = ‖[W Wᵀ]‖²`.
pub fn gamma_norm<L: LinearOperator + ?Sized>(w: &L) -> f64 {
    eigs::largest_eigenvalue(&Bibliometric(w))
        .expect("eigensolver failed on a positive semidefinite operator")
        .max(0.0)
}

/// The cheap upper bound `2‖W‖² ≥ ‖Γ_W‖`.
pub fn gamma_norm_bound<L: LinearOperator + ?Sized>(w: &L) -> f64 {
    2.0 * operator_norm_sq(w)
}

fn operator_norm_sq<L: LinearOperator + ?Sized>(w: &L) -> f64 {
    eigs::largest_eigenvalue(&Gram(w))
        .expect("eigensolver failed on a positive semidefinite operator")
        .max(0.0)
}

/// `W ⊗ W + Wᵀ ⊗ Wᵀ`, the matrix of `Γ_W` acting on column-major `vec(X)`.
pub fn gamma_kronecker(w: &DMatrix<f64>) -> DMatrix<f64> {
    let wt = w.transpose();
    linalg::kron(w, w) + linalg::kron(&wt, &wt)
}

/// `Γ_W` (or `Γ_W − Γ_V`) as a symmetric operator on `R^{N²}` under
/// column-major vectorisation.
struct VecGamma<'a> {
    w: &'a DMatrix<f64>,
    minus: Option<&'a DMatrix<f64>>,
}

impl SymmetricOperator for VecGamma<'_> {
    fn dim(&self) -> usize {
        self.w.nrows() * self.w.nrows()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.w.nrows();
        let mut out = DMatrix::zeros(n * n, x.ncols());
        for c in 0..x.ncols() {
            let xm = DMatrix::from_column_slice(n, n, x.column(c).as_slice());
            let mut g = gamma(self.w, &xm);
            if let Some(v) = self.minus {
                g -= gamma(v, &xm);
            }
            out.column_mut(c).copy_from_slice(g.as_slice());
        }
        out
    }
}

/// `‖(W⊗W + Wᵀ⊗Wᵀ) − (V⊗V + Vᵀ⊗Vᵀ)‖₂`, the norm of `Γ_W − Γ_V` on
/// `R^{N×N}` with the Frobenius norm, for `N ≤ cap`.
pub fn gamma_difference_norm(w: &DMatrix<f64>, v: &DMatrix<f64>, cap: usize) -> Result<f64> {
    if !w.is_square() || w.shape() != v.shape() {
        return Err(Error::dims(format!("{:?}", w.shape()), format!("{:?}", v.shape())));
    }
    if w.nrows() > cap {
        return Err(Error::OracleCap { n: w.nrows(), cap });
    }
    eigs::symmetric_norm(&VecGamma { w, minus: Some(v) })
}

/// How β is derived from the input graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    /// `β² = 1/(4‖A‖²)`.
    Safe,
    /// `β² = 1/(2‖Γ_A‖)`, so that `β²‖Γ_A‖ = ½`.
    HalfGamma,
    /// `β = 1/(2‖[A Aᵀ]‖²)`, taken literally as a value of β (not β²).
    Fig4Literal,
    /// A given β, checked against `β²‖Γ_A‖ < 1`.
    Explicit(f64),
}

impl fmt::Display for BetaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaPolicy::Safe => f.write_str("safe"),
            BetaPolicy::HalfGamma => f.write_str("half-gamma"),
            BetaPolicy::Fig4Literal => f.write_str("fig4-literal"),
            BetaPolicy::Explicit(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for BetaPolicy {
    type Err = Error;

    /// `safe`, `half-gamma`, `fig4-literal`, or a nonnegative number for β.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "safe" => Ok(BetaPolicy::Safe),
            "half-gamma" => Ok(BetaPolicy::HalfGamma),
            "fig4-literal" => Ok(BetaPolicy::Fig4Literal),
            other => match other.parse::<f64>() {
                Ok(b) if b.is_finite() && b >= 0.0 => Ok(BetaPolicy::Explicit(b)),
                _ => Err(Error::InvalidArgument(format!(
                    "beta policy `{s}`: expected safe, half-gamma, fig4-literal or a number >= 0"
                ))),
            },
        }
    }
}

/// A chosen β together with the norm it was checked against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    pub beta: f64,
    pub beta2: f64,
    /// `‖Γ_A‖` of the graph β was chosen for.
    pub gamma_norm: f64,
}

impl Beta {
    /// `β²‖Γ_A‖`, the contraction factor of the recurrence.
    pub fn contraction(&self) -> f64 {
        self.beta2 * self.gamma_norm
    }
}

pub fn choose_beta<L: LinearOperator + ?Sized>(a: &L, policy: BetaPolicy) -> Result<Beta> {
    let gamma_norm = gamma_norm(a);
    if gamma_norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let beta2 = match policy {
        BetaPolicy::Safe => 0.25 / operator_norm_sq(a),
        BetaPolicy::HalfGamma => 0.5 / gamma_norm,
        BetaPolicy::Fig4Literal => (0.5 / gamma_norm).powi(2),
        BetaPolicy::Explicit(b) => b * b,
    };
    check_convergence(beta2, gamma_norm)?;
    Ok(Beta {
        beta: beta2.sqrt(),
        beta2,
        gamma_norm,
    })
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
fn check_convergence(beta2: f64, gamma_norm: f64) -> Result<()> {
    if !(beta2 >= 0.0) || beta2 * gamma_norm >= 1.0 {
        return Err(Error::ConvergenceCondition { beta2, gamma_norm });
    }
    Ok(())
}

/// Requested recurrence depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Steps(usize),
    /// Iterate until the step is below [`LIMIT_TOL`] relative, or [`LIMIT_CAP`].
    Limit,
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Steps(k) => write!(f, "{k}"),
            Depth::Limit => f.write_str("limit"),
        }
    }
}

impl FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "limit" || s == "inf" {
            return Ok(Depth::Limit);
        }
        s.parse()
            .map(Depth::Steps)
            .map_err(|_| Error::InvalidArgument(format!("depth `{s}`: expected an integer or `limit`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Sample,
    Expectation,
}

/// A dense similarity matrix and how it was produced.
#[derive(Debug, Clone)]
pub struct SimilarityState {
    matrix: DMatrix<f64>,
    depth: Depth,
    steps: usize,
    beta2: f64,
    source: Source,
}

impl SimilarityState {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn depth(&self) -> Depth {
        self.depth
    }

    /// Recurrence steps actually taken (equal to `k` unless the depth is
    /// [`Depth::Limit`]).
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Binary container: three little-endian 8-byte fields (`N` as u64,
    /// `k` as u64 with `u64::MAX` meaning the limit, `β²` as f64) followed by
    /// the `N²` entries row-major as little-endian f64.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        let k = match self.depth {
            Depth::Steps(k) => k as u64,
            Depth::Limit => u64::MAX,
        };
        out.write_all(&(n as u64).to_le_bytes())?;
        out.write_all(&k.to_le_bytes())?;
        out.write_all(&self.beta2.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * n);
        for i in 0..n {
            buf.clear();
            for j in 0..n {
                buf.extend_from_slice(&self.matrix[(i, j)].to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads a container written by [`SimilarityState::write_binary`].
    pub fn read_binary<R: Read>(mut input: R) -> Result<SimilarityDump> {
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let k = u64::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let beta2 = f64::from_le_bytes(word);
        let mut bytes = vec![0u8; 8 * n * n];
        input.read_exact(&mut bytes)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(SimilarityDump {
            matrix: DMatrix::from_row_slice(n, n, &values),
            depth: if k == u64::MAX {
                Depth::Limit
            } else {
                Depth::Steps(k as usize)
            },
            beta2,
        })
    }
}

/// Contents of a binary similarity container.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDump {
    pub matrix: DMatrix<f64>,
    pub depth: Depth,
    pub beta2: f64,
}

/// The chain `S_1, S_2, …` for a fixed `W` and β².
pub struct Recurrence<'a, L: ?Sized> {
    w: &'a L,
    s1: DMatrix<f64>,
    beta2: f64,
    current: DMatrix<f64>,
}

impl<'a, L: LinearOperator + ?Sized> Recurrence<'a, L> {
    /// Checks `β²‖Γ_W‖ < 1` and starts at `S_0 = 0`.
    pub fn new(w: &'a L, beta2: f64) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::dims("square matrix", format!("{}x{}", w.nrows(), w.ncols())));
        }
        check_convergence(beta2, gamma_norm(w))?;
        let n = w.nrows();
        let mut s1 = Bibliometric(w).apply(&DMatrix::identity(n, n));
        linalg::symmetrize(&mut s1);
        Ok(Recurrence {
            w,
            s1,
            beta2,
            current: DMatrix::zeros(n, n),
        })
    }

    /// The most recent iterate (`S_0 = 0` before the first step).
    pub fn current(&self) -> &DMatrix<f64> {
        &self.current
    }

    /// Advances one step and returns `‖S_{k+1} − S_k‖_F / ‖S_{k+1}‖_F`.
    pub fn step(&mut self) -> f64 {
        let next = if self.beta2 == 0.0 {
            self.s1.clone()
        } else {
            let mut g = gamma(self.w, &self.current);
            g *= self.beta2;
            g += &self.s1;
            linalg::symmetrize(&mut g);
            g
        };
        let change = (&next - &self.current).norm();
        let size = next.norm();
        self.current = next;
        if size == 0.0 {
            0.0
        } else {
            change / size
        }
    }

    pub fn into_current(self) -> DMatrix<f64> {
        self.current
    }
}

impl<L: LinearOperator + ?Sized> Iterator for Recurrence<'_, L> {
    type Item = DMatrix<f64>;

    fn next(&mut self) -> Option<DMatrix<f64>> {
        self.step();
        Some(self.current.clone())
    }
}

/// Runs the recurrence to the requested depth. The limit uses the Frobenius
/// step criterion `‖S_{k+1} − S_k‖ ≤ 1e-12 ‖S_{k+1}‖`.
pub fn similarity_recurrence<L: LinearOperator + ?Sized>(
    w: &L,
    beta2: f64,
    depth: Depth,
    source: Source,
) -> Result<SimilarityState> {
    let mut rec = Recurrence::new(w, beta2)?;
    let steps = run(&mut rec, depth);
    Ok(SimilarityState {
        matrix: rec.into_current(),
        depth,
        steps,
        beta2,
        source,
    })
}

fn run<L: LinearOperator + ?Sized>(rec: &mut Recurrence<'_, L>, depth: Depth) -> usize {
    match depth {
        Depth::Steps(k) => {
            for _ in 0..k {
                rec.step();
            }
            k
        }
        Depth::Limit => {
            for step in 1..=LIMIT_CAP {
                if rec.step() <= LIMIT_TOL {
                    return step;
                }
            }
            LIMIT_CAP
        }
    }
}

/// Solves `(I − β² (W⊗W + Wᵀ⊗Wᵀ)) vec S = vec(W Wᵀ + Wᵀ W)` densely, for
/// `N ≤ cap`.
pub fn similarity_limit_oracle(w: &DMatrix<f64>, beta2: f64, cap: usize) -> Result<SimilarityState> {
    let n = w.nrows();
    if !w.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", w.nrows(), w.ncols())));
    }
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    let op = VecGamma { w, minus: None };
    let rho = eigs::symmetric_norm(&op)?;
    if beta2 * rho >= 1.0 {
        return Err(Error::SingularSystem);
    }
    let mut s1 = Bibliometric(w).apply(&DMatrix::identity(n, n));
    linalg::symmetrize(&mut s1);
    let rhs = linalg::vec_of(&s1);
    let mut system = -beta2 * op.to_dense();
    for i in 0..n * n {
        system[(i, i)] += 1.0;
    }
    let solution = system.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    let mut matrix = DMatrix::from_column_slice(n, n, solution.as_slice());
    linalg::symmetrize(&mut matrix);
    Ok(SimilarityState {
        matrix,
        depth: Depth::Limit,
        steps: 0,
        beta2,
        source: Source::Sample,
    })
}

/// `T_k` for a block model in reduced form.
///
/// With `Z̃ = Z D^{-1/2}` (orthonormal columns) and `M = Z̃ C Z̃ᵀ`, every
/// iterate is `T_k = Z̃ R_k Z̃ᵀ` where `R_{k+1} = Γ_C[I_q + β² R_k]`, so the
/// recurrence runs on `q × q` matrices.
#[derive(Debug, Clone)]
pub struct ExpectedSimilarity {
    assignment: Assignment,
    sizes: Vec<usize>,
    reduced: DMatrix<f64>,
    depth: Depth,
    steps: usize,
    beta2: f64,
}

pub fn expected_similarity(
    expected: &ExpectedAdjacency,
    beta2: f64,
    depth: Depth,
) -> Result<ExpectedSimilarity> {
    let c = expected.reduced_core();
    let mut rec = Recurrence::new(&c, beta2)?;
    let steps = run(&mut rec, depth);
    Ok(ExpectedSimilarity {
        assignment: expected.assignment().clone(),
        sizes: expected.sizes().to_vec(),
        reduced: rec.into_current(),
        depth,
        steps,
        beta2,
    })
}

impl ExpectedSimilarity {
    pub fn reduced(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// Nonzero spectrum and eigenvectors (`N × q`, orthonormal), descending.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let (values, v) = linalg::sym_eigen_desc(&self.reduced);
        (values, self.lift(&v))
    }

    /// `Z̃ y`.
    fn lift(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let labels = self.assignment.labels();
        DMatrix::from_fn(labels.len(), y.ncols(), |i, c| {
            y[(labels[i], c)] / (self.sizes[labels[i]] as f64).sqrt()
        })
    }

    /// `Z̃ᵀ x`.
    fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.sizes.len(), x.ncols());
        for (i, &l) in self.assignment.labels().iter().enumerate() {
            for c in 0..x.ncols() {
                out[(l, c)] += x[(i, c)];
            }
        }
        for (l, &s) in self.sizes.iter().enumerate() {
            out.row_mut(l).scale_mut(1.0 / (s as f64).sqrt());
        }
        out
    }

    pub fn to_state(&self) -> SimilarityState {
        let mut matrix = SymmetricOperator::to_dense(self);
        linalg::symmetrize(&mut matrix);
        SimilarityState {
            matrix,
            depth: self.depth,
            steps: self.steps,
            beta2: self.beta2,
            source: Source::Expectation,
        }
    }
}

impl SymmetricOperator for ExpectedSimilarity {
    fn dim(&self) -> usize {
        self.assignment.len()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.lift(&(&self.reduced * self.project(x)))
    }
    fn to_dense(&self) -> DMatrix<f64> {
        let z = self.lift(&DMatrix::identity(self.sizes.len(), self.sizes.len()));
        &z * &self.reduced * z.transpose()
    }
}
