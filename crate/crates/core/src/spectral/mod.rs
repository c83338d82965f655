//! Dominant subspaces, spectral gaps and principal angles.
//!
//! [`algorithm1_subspace`] computes a basis approximating the dominant
//! eigenspace of `S_k` using only products with the sparse adjacency and
//! small dense factorisations; [`truncated_evd`] works on any symmetric
//! operator (dense `S_k`, the reduced `T_k`, …) and produces the gap table
//! that [`estimate_rank`] reads.

pub mod eigs;

use std::io::Write;

use nalgebra::DMatrix;

use crate::linalg::{self, Bibliometric, LinearOperator, SymmetricOperator};
use crate::sbm::Assignment;
use crate::{Error, Result};

pub use eigs::{EigenOptions, EigenWindow, Which};

/// Eigenvalues below this are treated as zero by [`estimate_rank`].
pub const SIGNAL_FLOOR: f64 = 1e-12;

/// Size of the eigenvalue window used for rank estimation when `q` roles are
/// expected.
pub fn gap_window(q: usize, n: usize) -> usize {
    (3 * q + 5).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    /// `λ_i − λ_{i+1}`.
    pub abs_gap: f64,
    /// `λ_i / λ_{i+1}` (infinite when `λ_{i+1} ≤ 0 < λ_i`).
    pub rel_gap: f64,
}

/// Leading eigenvalues (descending), a basis for the first `r` of them, and
/// the consecutive gaps of the whole window.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub gaps: Vec<Gap>,
}

impl SpectralReport {
    pub fn from_window(eigenvalues: Vec<f64>, basis: DMatrix<f64>) -> Self {
        let gaps = eigenvalues
            .windows(2)
            .map(|w| Gap {
                abs_gap: w[0] - w[1],
                rel_gap: if w[1] > 0.0 {
                    w[0] / w[1]
                } else if w[0] > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NAN
                },
            })
            .collect();
        SpectralReport {
            eigenvalues,
            basis,
            gaps,
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn estimate_rank(&self) -> Result<RankEstimate> {
        estimate_rank(&self.eigenvalues)
    }

    /// CSV with header `index,eigenvalue,abs_gap,rel_gap`; indices are
    /// 1-based and the last row has empty gap fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,eigenvalue,abs_gap,rel_gap")?;
        for (i, &v) in self.eigenvalues.iter().enumerate() {
            match self.gaps.get(i) {
                Some(g) => writeln!(out, "{},{v:e},{:e},{:e}", i + 1, g.abs_gap, g.rel_gap)?,
                None => writeln!(out, "{},{v:e},,", i + 1)?,
            }
        }
        Ok(())
    }
}

/// Leading `r` eigenpairs of a symmetric operator, with the eigenvalue window
/// extended to `max(window, r + 1)` values (capped at the dimension) for the
/// gap table.
pub fn truncated_evd<S: SymmetricOperator + ?Sized>(
    op: &S,
    r: usize,
    window: usize,
) -> Result<SpectralReport> {
    let n = op.dim();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!(
            "rank {r} outside 1..={n}"
        )));
    }
    let count = window.max(r + 1).min(n);
    let w = eigs::top_eigenpairs(op, count, &EigenOptions::default())?;
    let basis = w.vectors.columns(0, r).into_owned();
    Ok(SpectralReport::from_window(w.values, basis))
}

/// A relative gap at least this large separates signal from noise. Gaps
/// inside the noise bulk sit close to 1.
pub const SIGNIFICANT_GAP: f64 = 2.0;

/// Outcome of the relative-gap rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEstimate {
    pub rank: usize,
    /// `λ_rank / λ_{rank+1}`.
    pub ratio: f64,
    /// Second-best index and its ratio, if there is one.
    pub runner_up: Option<(usize, f64)>,
    /// The two best ratios are within a factor 2 of each other.
    pub ambiguous: bool,
}

/// Relative gaps `λ_i / λ_{i+1}` over a descending window, with the
/// denominator floored at [`SIGNAL_FLOOR`] and indices whose `λ_i` is at or
/// below the floor skipped. The rank is the last `i` whose gap reaches
/// [`SIGNIFICANT_GAP`]; with no such gap it falls back to the largest ratio,
/// ties going to the smaller `i`.
///
/// Taking the largest ratio outright fails at moderate sizes: gaps inside the
/// signal block stay O(1) but can be large (about 47 for the 3-role cycle at
/// `p = 0.6`), while the signal/noise gap only grows like `n`.
pub fn estimate_rank(eigenvalues: &[f64]) -> Result<RankEstimate> {
    if eigenvalues.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "rank estimation needs at least 2 eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    let mut ratios: Vec<(usize, f64)> = eigenvalues
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > SIGNAL_FLOOR)
        .map(|(i, w)| (i + 1, w[0] / w[1].max(SIGNAL_FLOOR)))
        .collect();
    if ratios.is_empty() {
        return Err(Error::NoSignal {
            floor: SIGNAL_FLOOR,
        });
    }
    let last_significant = ratios.iter().rev().find(|(_, r)| *r >= SIGNIFICANT_GAP).copied();
    // Stable sort keeps the smaller index first among equal ratios.
    ratios.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (rank, ratio) = last_significant.unwrap_or(ratios[0]);
    let runner_up = ratios.iter().find(|(i, _)| *i != rank).copied();
    let ambiguous = ratios.get(1).is_some_and(|(_, r)| ratios[0].1 <= 2.0 * r);
    Ok(RankEstimate {
        rank,
        ratio,
        runner_up,
        ambiguous,
    })
}

/// Principal-angle sines between two subspaces, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceAngles {
    pub sines: Vec<f64>,
}

impl SubspaceAngles {
    /// `‖sin Θ‖ = ‖Π_U − Π_V‖`, the largest sine.
    pub fn norm(&self) -> f64 {
        self.sines.first().copied().unwrap_or(0.0)
    }
}

pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Sines of the principal angles between `span(U)` and `span(V)`, computed
/// as the singular values of `V − U(UᵀV)`. For equal dimensions these are
/// the nonzero singular values of `Π_U − Π_V` (each appearing twice there).
pub fn principal_angle_sines(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<SubspaceAngles> {
    if u.ncols() != v.ncols() {
        return Err(Error::RankMismatch {
            left: u.ncols(),
            right: v.ncols(),
        });
    }
    if u.nrows() != v.nrows() {
        return Err(Error::dims(
            format!("{} rows", u.nrows()),
            format!("{} rows", v.nrows()),
        ));
    }
    for m in [u, v] {
        let deviation = linalg::orthonormality_defect(m);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
    }
    if u.ncols() == 0 {
        return Ok(SubspaceAngles { sines: vec![] });
    }
    let residual = v - u * u.tr_mul(v);
    let sines = linalg::singular_values(&residual)
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    Ok(SubspaceAngles { sines })
}

/// Options for [`algorithm1_subspace`].
#[derive(Debug, Clone)]
pub struct Algorithm1Options {
    pub eigen: EigenOptions,
}

impl Default for Algorithm1Options {
    fn default() -> Self {
        Algorithm1Options {
            eigen: EigenOptions::default(),
        }
    }
}

/// `q`-dimensional basis approximating the dominant eigenspace of `S_k`
/// without forming it.
///
/// `X_1` holds the `q` dominant left singular vectors of `[A Aᵀ]` (Lanczos on
/// `AAᵀ + AᵀA`, dense below the cutoff); for
/// `h = 2..=k`, `X_h` holds those of `Y_h = [βA X_{h−1}, βAᵀ X_{h−1}, X_1]`,
/// computed from the `3q × 3q` Gram matrix of `Y_h`.
pub fn algorithm1_subspace<L: LinearOperator + ?Sized>(
    a: &L,
    q: usize,
    beta: f64,
    k: usize,
    opts: &Algorithm1Options,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if q == 0 || q > n {
        return Err(Error::TooManyRoles {
            requested: q,
            nodes: n,
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("depth k must be at least 1".into()));
    }
    let x1 = eigs::top_eigenpairs(&Bibliometric(a), q, &opts.eigen)?.vectors;
    let mut x = x1.clone();
    for _ in 2..=k {
        let mut y = DMatrix::zeros(n, 3 * q);
        y.columns_mut(0, q).copy_from(&(a.apply(&x) * beta));
        y.columns_mut(q, q).copy_from(&(a.apply_t(&x) * beta));
        y.columns_mut(2 * q, q).copy_from(&x1);
        let gram = y.tr_mul(&y);
        let (_, v) = linalg::sym_eigen_desc(&gram);
        x = linalg::orthonormalize(&y * v.columns(0, q));
    }
    Ok(x)
}

/// Groups rows of `basis` that coincide up to `tol · max row norm`; labels
/// are numbered in order of first appearance.
pub fn distinct_row_partition(basis: &DMatrix<f64>, tol: f64) -> Assignment {
    let scale = (0..basis.nrows())
        .map(|i| basis.row(i).norm())
        .fold(0.0_f64, f64::max);
    let mut reps: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(basis.nrows());
    for i in 0..basis.nrows() {
        let found = reps
            .iter()
            .position(|&r| (basis.row(i) - basis.row(r)).norm() <= tol * scale);
        labels.push(found.unwrap_or_else(|| {
            reps.push(i);
            reps.len() - 1
        }));
    }
    Assignment::new(labels, reps.len()).expect("labels are below the class count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseSymmetric;
    use crate::rng;
    use nalgebra::DVector;
    use rand::Rng;

    fn random_orthonormal(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut g = rng::stream(seed, 0);
        linalg::orthonormalize(DMatrix::from_fn(n, r, |_, _| g.random::<f64>() - 0.5))
    }

    #[test]
    fn diagonal_truncation() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let rep = truncated_evd(&DenseSymmetric(&s), 2, 8).unwrap();
        assert_eq!(rep.eigenvalues.len(), 3);
        assert!((rep.eigenvalues[0] - 3.0).abs() < 1e-14 && (rep.eigenvalues[1] - 2.0).abs() < 1e-14);
        let e = DMatrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(principal_angle_sines(&rep.basis, &e).unwrap().norm() < 1e-12);
        assert!(truncated_evd(&DenseSymmetric(&s), 4, 8).is_err());
    }

    #[test]
    fn rank_rule_examples() {
        let est = estimate_rank(&[100.0, 90.0, 80.0, 1.0, 0.9]).unwrap();
        assert_eq!(est.rank, 3);
        assert!(!est.ambiguous);
        let flat = estimate_rank(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(flat.rank, 1);
        assert!(flat.ambiguous);
        assert!(matches!(estimate_rank(&[1e-13, 0.0]), Err(Error::NoSignal { .. })));
        assert!(estimate_rank(&[1.0]).is_err());
        // An exact zero after the signal is floored, not divided by.
        assert_eq!(estimate_rank(&[5.0, 4.0, 0.0, 0.0]).unwrap().rank, 2);
        // A large gap inside the signal block does not hide the later one.
        let cycle = estimate_rank(&[980.0, 21.0, 20.8, 2.06, 2.05, 2.04]).unwrap();
        assert_eq!(cycle.rank, 3);
        assert_eq!(cycle.runner_up.unwrap().0, 1);
        assert!(!cycle.ambiguous);
    }

    #[test]
    fn angles_trivial_cases() {
        let u = random_orthonormal(10, 3, 1);
        assert!(principal_angle_sines(&u, &u).unwrap().norm() < 1e-12);
        let e0 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e1 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((principal_angle_sines(&e0, &e1).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!(matches!(
            principal_angle_sines(&u, &random_orthonormal(10, 2, 2)),
            Err(Error::RankMismatch { .. })
        ));
        assert!(matches!(
            principal_angle_sines(&(u.clone() * 2.0), &u),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn angles_match_projector_difference() {
        let u = random_orthonormal(20, 3, 3);
        let v = random_orthonormal(20, 3, 4);
        let diff = &u * u.transpose() - &v * v.transpose();
        let oracle = linalg::singular_values(&diff);
        let got = principal_angle_sines(&u, &v).unwrap();
        for (i, s) in got.sines.iter().enumerate() {
            assert!((s - oracle[2 * i]).abs() < 1e-10, "{s} vs {}", oracle[2 * i]);
        }
    }

    #[test]
    fn algorithm1_symmetric_input() {
        let mut g = rng::stream(9, 0);
        let b = DMatrix::from_fn(30, 30, |_, _| g.random::<f64>());
        let a = &b + b.transpose();
        let x = algorithm1_subspace(&a, 2, 0.0, 1, &Algorithm1Options::default()).unwrap();
        let (vals, vecs) = linalg::sym_eigen_desc(&(&a * &a));
        assert!(vals[1] > vals[2] * 1.01);
        let sines = principal_angle_sines(&x, &vecs.columns(0, 2).into_owned()).unwrap();
        assert!(sines.norm() < 1e-6);
        assert!(algorithm1_subspace(&a, 31, 0.0, 1, &Algorithm1Options::default()).is_err());
        assert!(algorithm1_subspace(&a, 2, 0.0, 0, &Algorithm1Options::default()).is_err());
    }

    #[test]
    fn row_partition_groups_equal_rows() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1e-14, 0.0, 1.0]);
        let p = distinct_row_partition(&m, 1e-8);
        assert_eq!(p.labels(), &[0, 1, 0, 1]);
        assert_eq!(p.roles(), 2);
    }

    #[test]
    fn csv_layout() {
        let rep = SpectralReport::from_window(vec![4.0, 2.0, 0.0], DMatrix::zeros(3, 1));
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,eigenvalue,abs_gap,rel_gap");
        assert_eq!(lines[1], "1,4e0,2e0,2e0");
        assert_eq!(lines[2], "2,2e0,2e0,inf");
        assert_eq!(lines[3], "3,0e0,,");
    }
}
