use nalgebra::DMatrix;
use rand::Rng;

use crate::par::Exec;
use crate::rng::{self, purpose};
use crate::sbm::Assignment;
use crate::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 20;

#[derive(Debug, Clone)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: DEFAULT_RESTARTS,
            max_iterations: MAX_LLOYD_ITERATIONS,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Assignment,
    /// `q × r`, one center per row.
    pub centers: DMatrix<f64>,
    pub inertia: f64,
    pub restarts_used: usize,
    /// Index of the restart that produced this result.
    pub best_restart: usize,
}

/// One Lloyd run.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centers: DMatrix<f64>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
}

/// Rows of a column-major matrix copied into a row-major buffer.
struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    fn new(rows: &DMatrix<f64>) -> Self {
        let t = rows.transpose();
        Points {
            data: t.as_slice().to_vec(),
            dim: rows.ncols(),
        }
    }

    fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center (lowest index on ties) and its squared distance.
fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &Points, q: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(points.row(i), &centers[0])).collect();
    while centers.len() < q {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(points.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd_points(points: &Points, mut centers: Vec<Vec<f64>>, max_iterations: usize) -> LloydRun {
    let n = points.len();
    let q = centers.len();
    let dim = points.dim;
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    for _ in 0..max_iterations.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dists[i] = d;
            inertia += d;
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; q];
        let mut counts = vec![0usize; q];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, x) in sums[labels[i]].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..q {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..q {
            if counts[c] == 0 {
                // Empty cluster: move its center onto the point farthest
                // from its current center.
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("at least one point");
                centers[c] = points.row(far).to_vec();
                dists[far] = 0.0;
            }
        }
    }
    let inertia = *history.last().expect("at least one assignment step");
    LloydRun {
        labels,
        centers: DMatrix::from_fn(q, dim, |c, j| centers[c][j]),
        inertia,
        history,
    }
}

/// Lloyd iterations from given initial centers (`q × r`), until the
/// assignment is stable or `max_iterations` assignment steps were made.
pub fn lloyd(rows: &DMatrix<f64>, initial: &DMatrix<f64>, max_iterations: usize) -> Result<LloydRun> {
    if initial.ncols() != rows.ncols() {
        return Err(Error::dims(
            format!("{} center columns", rows.ncols()),
            initial.ncols(),
        ));
    }
    if rows.nrows() == 0 || initial.nrows() == 0 {
        return Err(Error::InvalidArgument("k-means needs points and centers".into()));
    }
    let centers = (0..initial.nrows())
        .map(|c| initial.row(c).iter().copied().collect())
        .collect();
    Ok(lloyd_points(&Points::new(rows), centers, max_iterations))
}

/// Best of `restarts` k-means++ / Lloyd runs on the rows of `rows`.
/// Restart `i` draws from its own substream, so the result does not depend
/// on the execution strategy.
pub fn kmeans(rows: &DMatrix<f64>, q: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = rows.nrows();
    if q == 0 || q > n {
        return Err(Error::TooManyRoles {
            requested: q,
            nodes: n,
        });
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let points = Points::new(rows);
    let runs = opts.exec.map(opts.restarts, |r| {
        let mut rng = rng::stream(rng::child_seed(opts.seed, r as u64), purpose::KMEANS);
        let seeds = plus_plus_seeds(&points, q, &mut rng);
        lloyd_points(&points, seeds, opts.max_iterations)
    });
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    let run = runs.into_iter().nth(best).expect("restarts >= 1");
    Ok(KMeansResult {
        labels: Assignment::new(run.labels, q)?,
        centers: run.centers,
        inertia: run.inertia,
        restarts_used: opts.restarts,
        best_restart: best,
    })
}

/// Sum of squared distances of rows to their cluster means.
pub fn partition_inertia(rows: &DMatrix<f64>, labels: &[usize], q: usize) -> f64 {
    let dim = rows.ncols();
    let mut sums = vec![vec![0.0; dim]; q];
    let mut counts = vec![0usize; q];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..dim {
            sums[l][j] += rows[(i, j)];
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            (0..dim)
                .map(|j| (rows[(i, j)] - sums[l][j] / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(seed: u64) -> KMeansOptions {
        KMeansOptions {
            seed,
            ..KMeansOptions::default()
        }
    }

    #[test]
    fn repeated_points_are_recovered_exactly() {
        let pts = [[0.0, 1.0], [2.0, -1.0], [5.0, 5.0]];
        let sizes = [4, 7, 2];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, (p, &s)) in pts.iter().zip(&sizes).enumerate() {
            for _ in 0..s {
                rows.extend_from_slice(p);
                truth.push(c);
            }
        }
        let m = DMatrix::from_row_slice(truth.len(), 2, &rows);
        let res = kmeans(&m, 3, &opts(1)).unwrap();
        assert_eq!(res.inertia, 0.0);
        let l = res.labels.labels();
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                assert_eq!(truth[i] == truth[j], l[i] == l[j]);
            }
        }
    }

    #[test]
    fn single_cluster_center_is_mean() {
        let m = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 3.0, 0.0, 0.0, 6.0]);
        let res = kmeans(&m, 1, &opts(0)).unwrap();
        assert!((res.centers[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((res.centers[(0, 1)] - 2.0).abs() < 1e-15);
        assert!((res.inertia - partition_inertia(&m, &[0, 0, 0], 1)).abs() < 1e-12);
    }

    #[test]
    fn within_factor_ten_of_exhaustive_optimum() {
        for seed in 0..10 {
            let mut g = rng::stream(seed, 99);
            let m = DMatrix::from_fn(8, 2, |_, _| g.random::<f64>());
            let mut best = f64::INFINITY;
            for mask in 1u32..255 {
                let labels: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
                best = best.min(partition_inertia(&m, &labels, 2));
            }
            let res = kmeans(&m, 2, &opts(seed)).unwrap();
            assert!(res.inertia <= 10.0 * best + 1e-12);
            assert!(res.inertia >= best - 1e-12);
        }
    }

    #[test]
    fn errors() {
        let m = DMatrix::zeros(3, 2);
        assert!(kmeans(&m, 4, &opts(0)).is_err());
        assert!(kmeans(&m, 0, &opts(0)).is_err());
        let no_restarts = KMeansOptions {
            restarts: 0,
            ..KMeansOptions::default()
        };
        assert!(kmeans(&m, 1, &no_restarts).is_err());
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // Both initial centers sit left of all points; the second one starts
        // empty and must be moved.
        let m = DMatrix::from_row_slice(4, 1, &[0.0, 0.1, 10.0, 10.1]);
        let init = DMatrix::from_row_slice(2, 1, &[-1.0, -5.0]);
        let run = lloyd(&m, &init, 300).unwrap();
        assert!(run.inertia < 0.011);
        assert!(run.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn deterministic_across_exec() {
        let mut g = rng::stream(4, 0);
        let m = DMatrix::from_fn(60, 3, |_, _| g.random::<f64>());
        let a = kmeans(&m, 4, &KMeansOptions { exec: Exec::Sequential, ..opts(5) }).unwrap();
        let b = kmeans(&m, 4, &opts(5)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }
}
