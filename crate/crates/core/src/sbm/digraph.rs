use nalgebra::DMatrix;

use crate::linalg::LinearOperator;
use crate::par;
use crate::{Error, Result};

/// Columns processed together by the block gather.
const LANES: usize = 8;

/// Rows handled per parallel task in the sparse block products.
const ROWS_PER_TASK: usize = 64;

/// Unweighted directed graph stored as a 0/1 adjacency matrix in compressed
/// sparse row form, with the transpose kept alongside so that products with
/// `A` and `Aᵀ` are both row-parallel gathers.
///
/// Self-loops are allowed; multi-edges are not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    out_ptr: Vec<usize>,
    out_idx: Vec<u32>,
    in_ptr: Vec<usize>,
    in_idx: Vec<u32>,
}

impl Digraph {
    /// Builds a graph from per-row successor lists that are already sorted
    /// and free of duplicates.
    pub(crate) fn from_sorted_rows(n: usize, rows: Vec<Vec<u32>>) -> Self {
        debug_assert_eq!(rows.len(), n);
        let mut out_ptr = Vec::with_capacity(n + 1);
        out_ptr.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut out_idx = Vec::with_capacity(total);
        for row in rows {
            out_idx.extend_from_slice(&row);
            out_ptr.push(out_idx.len());
        }
        let (in_ptr, in_idx) = transpose_csr(n, &out_ptr, &out_idx);
        Digraph {
            n,
            out_ptr,
            out_idx,
            in_ptr,
            in_idx,
        }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("{n} nodes exceed u32 indexing")));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            rows[i].push(j as u32);
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({i}, {})", w[0])));
            }
        }
        Ok(Self::from_sorted_rows(n, rows))
    }

    /// Reads a square 0/1 matrix.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dims("square matrix", format!("{}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let mut rows = vec![Vec::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in 0..n {
                let v = a[(i, j)];
                if v == 1.0 {
                    row.push(j as u32);
                } else if v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) = {v} is not 0/1"
                    )));
                }
            }
        }
        Ok(Self::from_sorted_rows(n, rows))
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Number of edges `μ` (nonzeros of `A`).
    pub fn n_edges(&self) -> usize {
        self.out_idx.len()
    }

    pub fn successors(&self, i: usize) -> &[u32] {
        &self.out_idx[self.out_ptr[i]..self.out_ptr[i + 1]]
    }

    pub fn predecessors(&self, j: usize) -> &[u32] {
        &self.in_idx[self.in_ptr[j]..self.in_ptr[j + 1]]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.successors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.successors(i).iter().map(move |&j| (i, j as usize)))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (i, j) in self.edges() {
            a[(i, j)] = 1.0;
        }
        a
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::LengthMismatch {
                left: self.n,
                right: perm.len(),
            });
        }
        Self::from_edges(self.n, self.edges().map(|(i, j)| (perm[i], perm[j])))
    }

    fn gather(&self, ptr: &[usize], idx: &[u32], x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n, "block has {} rows, graph has {} nodes", x.nrows(), self.n);
        let b = x.ncols();
        if b == 0 || self.n == 0 {
            return DMatrix::zeros(self.n, b);
        }
        if b == 1 {
            return DMatrix::from_vec(self.n, 1, self.gather_vector(ptr, idx, x.as_slice()));
        }
        let mut out = DMatrix::zeros(self.n, b);
        for first in (0..b).step_by(LANES) {
            let width = LANES.min(b - first);
            // Row j of the column group, padded to LANES, is contiguous.
            let mut src = vec![[0.0; LANES]; self.n];
            for c in 0..width {
                for (s, &v) in src.iter_mut().zip(x.column(first + c).iter()) {
                    s[c] = v;
                }
            }
            let mut rows = vec![[0.0; LANES]; self.n];
            par::for_each_chunk_mut(&mut rows, ROWS_PER_TASK, |task, chunk| {
                for (r, acc) in chunk.iter_mut().enumerate() {
                    let i = task * ROWS_PER_TASK + r;
                    for &j in &idx[ptr[i]..ptr[i + 1]] {
                        let s = &src[j as usize];
                        for l in 0..LANES {
                            acc[l] += s[l];
                        }
                    }
                }
            });
            for c in 0..width {
                for (o, r) in out.column_mut(first + c).iter_mut().zip(&rows) {
                    *o = r[c];
                }
            }
        }
        out
    }

    /// Single-vector gather; four accumulators keep the adds independent.
    fn gather_vector(&self, ptr: &[usize], idx: &[u32], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        par::for_each_chunk_mut(&mut out, ROWS_PER_TASK, |task, chunk| {
            for (r, o) in chunk.iter_mut().enumerate() {
                let i = task * ROWS_PER_TASK + r;
                let row = &idx[ptr[i]..ptr[i + 1]];
                let mut acc = [0.0; 4];
                let mut quads = row.chunks_exact(4);
                for q in &mut quads {
                    for (a, &j) in acc.iter_mut().zip(q) {
                        *a += x[j as usize];
                    }
                }
                let tail: f64 = quads.remainder().iter().map(|&j| x[j as usize]).sum();
                *o = (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
            }
        });
        out
    }
}

impl LinearOperator for Digraph {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.gather(&self.out_ptr, &self.out_idx, x)
    }
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.gather(&self.in_ptr, &self.in_idx, x)
    }
    fn to_dense(&self) -> DMatrix<f64> {
        Digraph::to_dense(self)
    }
}

fn transpose_csr(n: usize, ptr: &[usize], idx: &[u32]) -> (Vec<usize>, Vec<u32>) {
    let mut counts = vec![0usize; n + 1];
    for &j in idx {
        counts[j as usize + 1] += 1;
    }
    for k in 0..n {
        counts[k + 1] += counts[k];
    }
    let t_ptr = counts.clone();
    let mut next = counts;
    let mut t_idx = vec![0u32; idx.len()];
    for i in 0..n {
        for &j in &idx[ptr[i]..ptr[i + 1]] {
            let slot = &mut next[j as usize];
            t_idx[*slot] = i as u32;
            *slot += 1;
        }
    }
    (t_ptr, t_idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Digraph {
        Digraph::from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 2), (3, 0)]).unwrap()
    }

    #[test]
    fn products_match_dense() {
        let g = small();
        let a = g.to_dense();
        let x = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 2.5);
        assert_eq!(LinearOperator::apply(&g, &x), &a * &x);
        assert_eq!(g.apply_t(&x), a.transpose() * &x);
    }

    #[test]
    fn transpose_lists() {
        let g = small();
        assert_eq!(g.predecessors(0), &[2, 3]);
        assert_eq!(g.predecessors(2), &[1, 2]);
        assert!(g.has_edge(2, 2));
        assert!(!g.has_edge(0, 2));
        assert_eq!(g.n_edges(), 5);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(Digraph::from_edges(2, [(0, 1), (0, 1)]).is_err());
        assert!(Digraph::from_edges(2, [(0, 2)]).is_err());
    }

    #[test]
    fn dense_round_trip() {
        let g = small();
        assert_eq!(Digraph::from_dense(&g.to_dense()).unwrap(), g);
        let bad = DMatrix::from_element(2, 2, 0.5);
        assert!(Digraph::from_dense(&bad).is_err());
    }

    #[test]
    fn permutation_relabels_edges() {
        let g = small();
        let perm = [3, 2, 1, 0];
        let p = g.permuted(&perm).unwrap();
        for (i, j) in g.edges() {
            assert!(p.has_edge(perm[i], perm[j]));
        }
        assert_eq!(p.n_edges(), g.n_edges());
    }
}
