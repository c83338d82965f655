use crate::sbm::Assignment;
use crate::{Error, Result};

/// Largest role count solved by enumerating permutations.
pub const EXHAUSTIVE_MAX_ROLES: usize = 8;

/// `f̂ = min_π max_i |T_{π(i)} Δ C_i| / |C_i|` with `C` the true and `T` the
/// found clusters; `matching[i] = π(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisclassificationScore {
    pub value: f64,
    pub matching: Vec<usize>,
}

/// `cost[i][j] = |T_j Δ C_i| / |C_i|`.
fn cost_matrix(truth: &Assignment, found: &Assignment) -> Result<Vec<Vec<f64>>> {
    if truth.len() != found.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: found.len(),
        });
    }
    if truth.roles() != found.roles() {
        return Err(Error::RoleCountMismatch {
            left: truth.roles(),
            right: found.roles(),
        });
    }
    let q = truth.roles();
    let mut overlap = vec![vec![0usize; q]; q];
    for (&c, &t) in truth.labels().iter().zip(found.labels()) {
        overlap[c][t] += 1;
    }
    let c_sizes = truth.cluster_sizes();
    let t_sizes = found.cluster_sizes();
    if let Some(i) = c_sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyTruthCluster(i));
    }
    Ok((0..q)
        .map(|i| {
            (0..q)
                .map(|j| (c_sizes[i] + t_sizes[j] - 2 * overlap[i][j]) as f64 / c_sizes[i] as f64)
                .collect()
        })
        .collect())
}

/// Exhaustive search for `q ≤ 8`, bottleneck matching above.
pub fn misclassification(truth: &Assignment, found: &Assignment) -> Result<MisclassificationScore> {
    if truth.roles() <= EXHAUSTIVE_MAX_ROLES {
        misclassification_exhaustive(truth, found)
    } else {
        misclassification_bottleneck(truth, found)
    }
}

/// Enumerates all `q!` permutations in lexicographic order (identity first)
/// and keeps the first one attaining the minimum.
pub fn misclassification_exhaustive(
    truth: &Assignment,
    found: &Assignment,
) -> Result<MisclassificationScore> {
    let cost = cost_matrix(truth, found)?;
    let q = cost.len();
    let mut perm: Vec<usize> = (0..q).collect();
    let mut best = MisclassificationScore {
        value: f64::INFINITY,
        matching: perm.clone(),
    };
    loop {
        let value = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[i][j])
            .fold(0.0_f64, f64::max);
        if value < best.value {
            best = MisclassificationScore {
                value,
                matching: perm.clone(),
            };
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Smallest threshold `t` among the cost entries such that a perfect
/// matching uses only entries `≤ t`, found by binary search.
pub fn misclassification_bottleneck(
    truth: &Assignment,
    found: &Assignment,
) -> Result<MisclassificationScore> {
    let cost = cost_matrix(truth, found)?;
    let q = cost.len();
    if q == 0 {
        return Ok(MisclassificationScore {
            value: 0.0,
            matching: vec![],
        });
    }
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(&cost, levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let matching = perfect_matching(&cost, levels[lo]).expect("the largest level admits every pair");
    Ok(MisclassificationScore {
        value: levels[lo],
        matching,
    })
}

/// Kuhn's augmenting-path matching on the graph `cost[i][j] ≤ t`.
fn perfect_matching(cost: &[Vec<f64>], t: f64) -> Option<Vec<usize>> {
    let q = cost.len();
    let mut owner: Vec<Option<usize>> = vec![None; q];
    for i in 0..q {
        let mut seen = vec![false; q];
        if !augment(i, cost, t, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut matching = vec![0; q];
    for (j, o) in owner.iter().enumerate() {
        matching[o.expect("perfect matching")] = j;
    }
    Some(matching)
}

fn augment(i: usize, cost: &[Vec<f64>], t: f64, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
    for j in 0..cost.len() {
        if cost[i][j] <= t && !seen[j] {
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, cost, t, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
    }
    false
}
