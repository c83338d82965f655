//! Data behind the cycle-model figures: leading eigenvalues of `S_k` and
//! `T_k` as `n` grows, and the mean misclassification rate of extracted
//! roles.
//!
//! Sample `t` at scale `n` is drawn with seed `child_seed(child_seed(seed, n), t)`,
//! so rows do not depend on the execution strategy or on which other grid
//! points are requested.

use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::clustering::{self, ExtractOptions};
use crate::linalg::{Bibliometric, DenseSymmetric};
use crate::nps::{self, BetaPolicy, Depth, Source};
use crate::par::Exec;
use crate::rng;
use crate::sbm::{self, cycle_model};
use crate::spectral;
use crate::Result;

pub fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    rng::child_seed(rng::child_seed(seed, n as u64), trial as u64)
}

/// `(3 + √8) p (1 − p) m n`, the predicted size of the first noise
/// eigenvalue of `S_1` for the cycle model.
pub fn noise_estimate(p: f64, m: f64, n: usize) -> f64 {
    (3.0 + 8f64.sqrt()) * p * (1.0 - p) * m * n as f64
}

/// The reference curve `3/(10n + 24)` drawn over the misclassification means.
pub fn misclassification_overlay(n: usize) -> f64 {
    3.0 / (10.0 * n as f64 + 24.0)
}

#[derive(Debug, Clone)]
pub struct SpectrumConfig {
    pub p: f64,
    pub grid: Vec<usize>,
    pub k: usize,
    pub policy: BetaPolicy,
    pub trials: usize,
    pub seed: u64,
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    /// Eigenvalues of the sampled `S_k`.
    Sample,
    /// Nonzero eigenvalues of `T_k`.
    Expected,
    NoiseEstimate,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Series::Sample => "S",
            Series::Expected => "T",
            Series::NoiseEstimate => "noise_estimate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    pub p: f64,
    pub n: usize,
    pub trial: usize,
    pub series: Series,
    /// 1-based eigenvalue index.
    pub index: usize,
    pub value: f64,
}

/// For each `n` and trial: the leading `q + 1` eigenvalues of `S_k`, the `q`
/// eigenvalues of `T_k` (once per `n`), and the noise estimate at index
/// `r + 1`.
pub fn spectrum_points(cfg: &SpectrumConfig) -> Result<Vec<SpectrumPoint>> {
    let model = cycle_model(cfg.p)?;
    let q = model.roles();
    let r = model.rank_compound();
    let mut out = Vec::new();
    for &n in &cfg.grid {
        let per_trial = cfg.exec.try_map(cfg.trials, |t| -> Result<(Vec<f64>, Vec<f64>)> {
            let (graph, _) = sbm::sample_adjacency(&model, n, trial_seed(cfg.seed, n, t))?;
            let beta = nps::choose_beta(&graph, cfg.policy)?;
            let count = q + 1;
            let s_vals = if cfg.k == 1 {
                spectral::truncated_evd(&Bibliometric(&graph), q, count)?.eigenvalues
            } else {
                let s = nps::similarity_recurrence(&graph, beta.beta2, Depth::Steps(cfg.k), Source::Sample)?;
                spectral::truncated_evd(&DenseSymmetric(s.matrix()), q, count)?.eigenvalues
            };
            let expected = sbm::expected_adjacency(&model, n)?;
            let t_vals = nps::expected_similarity(&expected, beta.beta2, Depth::Steps(cfg.k))?
                .eigen()
                .0;
            Ok((s_vals, t_vals))
        })?;
        for (t, (s_vals, t_vals)) in per_trial.into_iter().enumerate() {
            out.extend(s_vals.iter().enumerate().map(|(i, &v)| SpectrumPoint {
                p: cfg.p,
                n,
                trial: t,
                series: Series::Sample,
                index: i + 1,
                value: v,
            }));
            out.extend(t_vals.iter().enumerate().map(|(i, &v)| SpectrumPoint {
                p: cfg.p,
                n,
                trial: t,
                series: Series::Expected,
                index: i + 1,
                value: v,
            }));
        }
        out.push(SpectrumPoint {
            p: cfg.p,
            n,
            trial: 0,
            series: Series::NoiseEstimate,
            index: r + 1,
            value: noise_estimate(cfg.p, model.total_fraction(), n),
        });
    }
    Ok(out)
}

/// Long-format CSV: `p,n,trial,series,index,value`.
pub fn write_spectrum_csv<W: Write>(points: &[SpectrumPoint], mut out: W) -> Result<()> {
    writeln!(out, "p,n,trial,series,index,value")?;
    for pt in points {
        writeln!(
            out,
            "{},{},{},{},{},{:e}",
            pt.p, pt.n, pt.trial, pt.series, pt.index, pt.value
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MisclassConfig {
    pub p: f64,
    pub grid: Vec<usize>,
    /// Low-rank iteration depths evaluated on the same samples.
    pub ks: Vec<usize>,
    pub policy: BetaPolicy,
    pub trials: usize,
    pub restarts: usize,
    pub seed: u64,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisclassRow {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub std_err: f64,
    pub overlay: f64,
}

/// Mean `f̂` per `(n, k)`. `progress(done, total)` is called after each
/// trial.
pub fn misclassification_rows(
    cfg: &MisclassConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<MisclassRow>> {
    let model = cycle_model(cfg.p)?;
    let q = model.roles();
    let total = cfg.grid.len() * cfg.trials;
    let done = AtomicUsize::new(0);
    let mut rows = Vec::new();
    for &n in &cfg.grid {
        let per_trial = cfg.exec.try_map(cfg.trials, |t| -> Result<Vec<f64>> {
            let seed = trial_seed(cfg.seed, n, t);
            let (graph, truth) = sbm::sample_adjacency(&model, n, seed)?;
            let scores = cfg
                .ks
                .iter()
                .map(|&k| {
                    let opts = ExtractOptions {
                        policy: cfg.policy,
                        k,
                        restarts: cfg.restarts,
                        seed,
                        diagnose_rank: false,
                        exec: Exec::Sequential,
                    };
                    let found = clustering::extract_roles(&graph, q, &opts)?;
                    Ok(clustering::misclassification(&truth, &found.assignment)?.value)
                })
                .collect::<Result<Vec<f64>>>()?;
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            Ok(scores)
        })?;
        for (j, &k) in cfg.ks.iter().enumerate() {
            let values: Vec<f64> = per_trial.iter().map(|s| s[j]).collect();
            let count = values.len() as f64;
            let mean = values.iter().sum::<f64>() / count;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            rows.push(MisclassRow {
                n,
                k,
                trials: values.len(),
                mean,
                std_err: (var / count).sqrt(),
                overlay: misclassification_overlay(n),
            });
        }
    }
    Ok(rows)
}

/// CSV: `n,k,trials,mean_fhat,std_err,overlay`.
pub fn write_misclassification_csv<W: Write>(rows: &[MisclassRow], mut out: W) -> Result<()> {
    writeln!(out, "n,k,trials,mean_fhat,std_err,overlay")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{:e}",
            r.n, r.k, r.trials, r.mean, r.std_err, r.overlay
        )?;
    }
    Ok(())
}
