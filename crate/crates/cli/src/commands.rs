use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use nps_core::clustering::{self, ExtractOptions, DEFAULT_RESTARTS};
use nps_core::diagnostics::{self, BoundKind, NoiseDistribution, Scenario};
use nps_core::experiments::{self, trial_seed, MisclassConfig, SpectrumConfig};
use nps_core::nps::{self, BetaPolicy, Depth, Source};
use nps_core::sbm::{self, cycle_model, io};
use serde_json::json;

use crate::{plot, ExperimentConfig};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Writes `<stem>.edges` and `<stem>.truth` for every `(p, n, trial)`.
pub fn generate(cfg: &ExperimentConfig, shuffle: bool) -> Result<Vec<PathBuf>> {
    create_dir(&cfg.out)?;
    let trials = cfg.trials_or(1)?;
    let mut written = Vec::new();
    for p in cfg.p_or(&[0.6]) {
        let model = cycle_model(p)?;
        for &n in &cfg.grid_or(&[10]) {
            for t in 0..trials {
                let seed = trial_seed(cfg.seed, n, t);
                let (mut graph, mut truth) = sbm::sample_adjacency(&model, n, seed)?;
                if shuffle {
                    (graph, truth, _) = sbm::shuffle(&graph, &truth, seed)?;
                }
                let stem = format!("cycle_p{p}_n{n}_t{t}");
                let edges = cfg.out.join(format!("{stem}.edges"));
                let mut w = create(&edges)?;
                io::write_edge_list(&graph, &mut w)?;
                w.flush()?;
                let labels = cfg.out.join(format!("{stem}.truth"));
                let mut w = create(&labels)?;
                io::write_assignment(&truth, &mut w)?;
                w.flush()?;
                written.push(edges);
                written.push(labels);
            }
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, Default)]
pub struct ExtractArgs {
    pub graph: PathBuf,
    pub q: usize,
    pub truth: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub spectrum_csv: Option<PathBuf>,
    pub fhat: Option<PathBuf>,
    pub dump_similarity: Option<PathBuf>,
    pub restarts: Option<usize>,
}

pub fn extract(cfg: &ExperimentConfig, args: &ExtractArgs) -> Result<()> {
    let file = File::open(&args.graph).with_context(|| format!("opening {}", args.graph.display()))?;
    let graph = io::read_edge_list(BufReader::new(file))
        .with_context(|| format!("reading {}", args.graph.display()))?;
    let k = cfg.steps_or(1, "extract")?;
    let opts = ExtractOptions {
        policy: cfg.policy_or(BetaPolicy::HalfGamma),
        k,
        restarts: args.restarts.unwrap_or(DEFAULT_RESTARTS),
        seed: cfg.seed,
        diagnose_rank: true,
        exec: cfg.exec,
    };
    let out = clustering::extract_roles(&graph, args.q, &opts)?;
    println!("nodes {}, edges {}", graph.n_nodes(), graph.n_edges());
    println!("beta {:e} (beta^2 {:e}, policy {}), k {k}", out.beta.beta, out.beta.beta2, opts.policy);
    if let Some(est) = out.rank_estimate {
        println!(
            "estimated rank {} (ratio {:.4}{})",
            est.rank,
            est.ratio,
            if est.ambiguous { ", ambiguous" } else { "" }
        );
        if out.rank_warning {
            eprintln!("warning: estimated rank {} differs from q = {}", est.rank, args.q);
        }
    }
    println!("k-means inertia {:e} (best of {} restarts)", out.kmeans.inertia, out.kmeans.restarts_used);

    let path = args.assignment.clone().unwrap_or_else(|| cfg.out.join("assignment.txt"));
    let mut w = create(&path)?;
    io::write_assignment(&out.assignment, &mut w)?;
    w.flush()?;
    println!("assignment written to {}", path.display());

    if let Some(path) = &args.spectrum_csv {
        let report = out.spectrum.as_ref().expect("rank diagnosis was requested");
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(truth_path) = &args.truth {
        let file = File::open(truth_path).with_context(|| format!("opening {}", truth_path.display()))?;
        let truth = io::read_assignment(BufReader::new(file), Some(args.q))
            .with_context(|| format!("reading {}", truth_path.display()))?;
        let score = clustering::misclassification(&truth, &out.assignment)?;
        println!("fhat {} (matching {:?})", score.value, score.matching);
        if let Some(path) = &args.fhat {
            let line = json!({
                "graph": args.graph.display().to_string(),
                "q": args.q,
                "k": k,
                "seed": cfg.seed,
                "value": score.value,
                "matching": score.matching,
            });
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            writeln!(f, "{line}")?;
        }
    } else if args.fhat.is_some() {
        bail!("--fhat needs --truth");
    }
    if let Some(path) = &args.dump_similarity {
        let s = nps::similarity_recurrence(&graph, out.beta.beta2, Depth::Steps(k), Source::Sample)?;
        let mut w = create(path)?;
        s.write_binary(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Which spectrum figure to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumFigure {
    /// `β = 0`, `k = 1`.
    Figure2,
    /// Half-gamma policy, `k = 10` unless overridden.
    Figure3,
}

/// Writes `<name>.csv` and `<name>.svg`; returns both paths.
pub fn spectrum_figure(cfg: &ExperimentConfig, which: SpectrumFigure) -> Result<(PathBuf, PathBuf)> {
    let (name, k, policy) = match which {
        SpectrumFigure::Figure2 => {
            if cfg.k.is_some_and(|k| k != Depth::Steps(1))
                || cfg.policy.is_some_and(|p| p != BetaPolicy::Explicit(0.0))
            {
                bail!("figure2 always uses beta = 0 and k = 1; use figure3 for other settings");
            }
            ("figure2", 1, BetaPolicy::Explicit(0.0))
        }
        SpectrumFigure::Figure3 => ("figure3", cfg.steps_or(10, "figure3")?, cfg.policy_or(BetaPolicy::HalfGamma)),
    };
    let mut points = Vec::new();
    for p in cfg.p_or(&[0.6, 0.75]) {
        points.extend(experiments::spectrum_points(&SpectrumConfig {
            p,
            grid: cfg.grid_or(&[10, 20, 30, 40, 50]),
            k,
            policy,
            trials: cfg.trials_or(1)?,
            seed: cfg.seed,
            exec: cfg.exec,
        })?);
    }
    let mut csv = Vec::new();
    experiments::write_spectrum_csv(&points, &mut csv)?;
    let csv = String::from_utf8(csv)?;
    let svg = plot::spectrum_svg(&csv)?;
    let csv_path = cfg.out.join(format!("{name}.csv"));
    let svg_path = cfg.out.join(format!("{name}.svg"));
    write_file(&csv_path, csv.as_bytes())?;
    write_file(&svg_path, svg.as_bytes())?;
    Ok((csv_path, svg_path))
}

pub fn figure4(cfg: &ExperimentConfig, restarts: Option<usize>, quiet: bool) -> Result<(PathBuf, PathBuf)> {
    let ps = cfg.p_or(&[0.6]);
    let [p] = ps.as_slice() else {
        bail!("figure4 takes a single --p value");
    };
    let deep = cfg.steps_or(10, "figure4")?;
    let mut ks = vec![1, deep];
    ks.dedup();
    let config = MisclassConfig {
        p: *p,
        grid: cfg.grid_or(&[10, 20, 30, 40, 50]),
        ks,
        policy: cfg.policy_or(BetaPolicy::Fig4Literal),
        trials: cfg.trials_or(500)?,
        restarts: restarts.unwrap_or(DEFAULT_RESTARTS),
        seed: cfg.seed,
        exec: cfg.exec,
    };
    let last_percent = AtomicUsize::new(0);
    let progress = |done: usize, total: usize| {
        let percent = 100 * done / total;
        if !quiet && last_percent.fetch_max(percent, Ordering::Relaxed) < percent {
            eprint!("\rfigure4: {done}/{total} trials ({percent}%)");
            if done == total {
                eprintln!();
            }
        }
    };
    let rows = experiments::misclassification_rows(&config, &progress)?;
    let mut csv = Vec::new();
    experiments::write_misclassification_csv(&rows, &mut csv)?;
    let csv = String::from_utf8(csv)?;
    let svg = plot::misclassification_svg(&csv)?;
    let csv_path = cfg.out.join("figure4.csv");
    let svg_path = cfg.out.join("figure4.svg");
    write_file(&csv_path, csv.as_bytes())?;
    write_file(&svg_path, svg.as_bytes())?;
    for r in &rows {
        println!(
            "n {:>3}  k {:>2}  mean fhat {:.3e} ± {:.1e}  overlay {:.3e}",
            r.n, r.k, r.mean, r.std_err, r.overlay
        );
    }
    let model = cycle_model(*p)?;
    for &k in &config.ks {
        let series: Vec<(usize, f64)> = rows.iter().filter(|r| r.k == k).map(|r| (r.n, r.mean)).collect();
        println!(
            "k {k}: smallest constant C in mean fhat <= C q^5/delta^2 (m_max/m_min)^5 |[U U^T]|^2/sigma_q^4: {:.3e}",
            diagnostics::smallest_constant(&model, &series)
        );
    }
    Ok((csv_path, svg_path))
}

/// Scans every bound; returns `true` when an exact bound was violated.
pub fn bounds(cfg: &ExperimentConfig, conjecture: bool) -> Result<bool> {
    let depth = cfg.k.unwrap_or(Depth::Steps(3));
    let policy = cfg.policy_or(BetaPolicy::HalfGamma);
    let grid = cfg.grid_or(&[4, 8, 12, 16, 20]);
    let seeds = cfg.trials_or(2)?;
    let mut records = Vec::new();
    for p in cfg.p_or(&[0.6]) {
        let scenario = Scenario {
            name: format!("cycle-p{p}"),
            model: cycle_model(p)?,
            policy,
            depth,
        };
        for &n in &grid {
            records.extend(diagnostics::check_noise_norm(
                &scenario,
                n,
                seeds,
                trial_seed(cfg.seed, n, usize::MAX),
                cfg.exec,
            )?);
        }
        records.extend(diagnostics::scan(&scenario, &grid, seeds, cfg.seed, cfg.exec)?);
    }
    let path = cfg.out.join("bounds.csv");
    let mut w = create(&path)?;
    diagnostics::write_bounds_csv(&records, &mut w)?;
    w.flush()?;

    let summary = diagnostics::summarize(&records);
    let mut table = String::from("name,kind,evaluated,held,first_n,violated\n");
    println!("{:<30} {:<10} {:>9} {:>6} {:>8}  status", "bound", "kind", "evaluated", "held", "first n");
    for s in &summary {
        let first = s.first_n.map_or("-".to_string(), |n| n.to_string());
        let status = match (s.kind, s.violated, s.first_n) {
            (_, true, _) => "VIOLATED",
            (BoundKind::Exact, false, _) => "ok",
            (BoundKind::Asymptotic, _, Some(_)) => "holds from first n",
            (BoundKind::Asymptotic, _, None) => "not yet on grid",
        };
        println!(
            "{:<30} {:<10} {:>9} {:>6} {:>8}  {status}",
            s.name, s.kind, s.evaluated, s.held, first
        );
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.name, s.kind, s.evaluated, s.held, first, s.violated
        ));
    }
    write_file(&cfg.out.join("bounds_summary.csv"), table.as_bytes())?;
    println!("records written to {}", path.display());

    if conjecture {
        report_conjecture(cfg, 1000, NoiseDistribution::Rademacher, 10)?;
    }
    Ok(summary.iter().any(|s| s.violated))
}

fn report_conjecture(cfg: &ExperimentConfig, size: usize, dist: NoiseDistribution, trials: usize) -> Result<PathBuf> {
    let stats = diagnostics::check_conjecture(size, trials, dist, cfg.seed, cfg.exec)?;
    println!(
        "‖[Z Zᵀ]‖/√(2N), N = {size}, {dist}, {trials} trials: mean {:.4}, max {:.4}, sd {:.4}",
        stats.mean, stats.max, stats.std_dev
    );
    println!(
        "targets: sharp (1+√½)σ = {:.4}, loose 2σ = {:.4}",
        stats.sharp_target, stats.loose_target
    );
    let mut csv = String::from("trial,ratio\n");
    for (t, r) in stats.ratios.iter().enumerate() {
        csv.push_str(&format!("{t},{r:e}\n"));
    }
    let path = cfg.out.join("conjecture.csv");
    write_file(&path, csv.as_bytes())?;
    Ok(path)
}

pub fn conjecture(cfg: &ExperimentConfig, size: usize, dist: NoiseDistribution) -> Result<PathBuf> {
    let trials = cfg.trials_or(10)?;
    report_conjecture(cfg, size, dist, trials)
}

/// Regenerates the chart for a saved figure CSV next to it.
pub fn plot_csv(csv_path: &Path) -> Result<PathBuf> {
    let csv = fs::read_to_string(csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let svg = plot::svg_from_csv(&csv).with_context(|| format!("plotting {}", csv_path.display()))?;
    let path = csv_path.with_extension("svg");
    write_file(&path, svg.as_bytes())?;
    Ok(path)
}
