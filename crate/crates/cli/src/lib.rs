//! Command implementations behind the `nps` binary.

pub mod commands;
pub mod plot;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use nps_core::nps::{BetaPolicy, Depth};
use nps_core::par::Exec;

/// Settings shared by the experiment commands. Unset fields fall back to
/// the per-command defaults.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub trials: Option<usize>,
    pub grid: Option<Vec<usize>>,
    pub p: Option<Vec<f64>>,
    pub k: Option<Depth>,
    pub policy: Option<BetaPolicy>,
    pub exec: Exec,
}

impl ExperimentConfig {
    pub fn trials_or(&self, default: usize) -> Result<usize> {
        let t = self.trials.unwrap_or(default);
        if t == 0 {
            bail!("--trials must be at least 1");
        }
        Ok(t)
    }

    pub fn grid_or(&self, default: &[usize]) -> Vec<usize> {
        self.grid.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn p_or(&self, default: &[f64]) -> Vec<f64> {
        self.p.clone().unwrap_or_else(|| default.to_vec())
    }

    /// A finite depth, or an error naming the command that needs one.
    pub fn steps_or(&self, default: usize, command: &str) -> Result<usize> {
        match self.k {
            None => Ok(default),
            Some(Depth::Steps(0)) => bail!("{command} needs --k of at least 1"),
            Some(Depth::Steps(k)) => Ok(k),
            Some(Depth::Limit) => bail!("{command} needs a finite --k"),
        }
    }

    pub fn policy_or(&self, default: BetaPolicy) -> BetaPolicy {
        self.policy.unwrap_or(default)
    }
}

/// `a:b` (every integer), `a:step:b`, or a comma list; strictly increasing
/// and positive.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let num = |t: &str| -> Result<usize> {
        t.trim().parse().with_context(|| format!("`{t}` in n-grid `{s}` is not a nonnegative integer"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [a, b] => (num(a)?..=num(b)?).collect(),
        [a, step, b] => {
            let step = num(step)?;
            if step == 0 {
                bail!("n-grid `{s}` has a zero step");
            }
            (num(a)?..=num(b)?).step_by(step).collect()
        }
        _ => bail!("n-grid `{s}`: expected `a:b`, `a:step:b` or a comma list"),
    };
    if grid.is_empty() {
        bail!("n-grid `{s}` is empty");
    }
    if grid[0] == 0 {
        bail!("n-grid `{s}` contains 0");
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("n-grid `{s}` is not strictly increasing");
    }
    Ok(grid)
}

/// Comma-separated probabilities in `[0, 1]`.
pub fn parse_probabilities(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let p: f64 = t.trim().parse().with_context(|| format!("`{t}` is not a number"))?;
            if !(0.0..=1.0).contains(&p) {
                bail!("probability {p} is outside [0, 1]");
            }
            Ok(p)
        })
        .collect()
}

/// Caps the worker pool from `NPS_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("NPS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .with_context(|| format!("NPS_THREADS=`{value}` is not a positive integer"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("10:13").unwrap(), vec![10, 11, 12, 13]);
        assert_eq!(parse_grid("10:10:50").unwrap(), vec![10, 20, 30, 40, 50]);
        assert_eq!(parse_grid("5, 7,9").unwrap(), vec![5, 7, 9]);
        assert!(parse_grid("3,3").is_err());
        assert!(parse_grid("0:2").is_err());
        assert!(parse_grid("5:2").is_err());
        assert!(parse_grid("1:0:4").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn probabilities() {
        assert_eq!(parse_probabilities("0.6,0.75").unwrap(), vec![0.6, 0.75]);
        assert!(parse_probabilities("1.5").is_err());
    }
}
