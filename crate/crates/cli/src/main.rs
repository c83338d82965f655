use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use nps_core::diagnostics::NoiseDistribution;
use nps_core::nps::{BetaPolicy, Depth};
use nps_core::par::Exec;
use nps_cli::commands::{self, ExtractArgs, SpectrumFigure};
use nps_cli::{configure_threads, parse_grid, parse_probabilities, ExperimentConfig};

/// Role extraction in directed graphs with neighbourhood pattern similarity
/// matrices, and the cycle-model experiments.
///
/// NPS_THREADS caps the number of worker threads.
#[derive(Parser, Debug)]
#[command(name = "nps", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed; every command is deterministic given it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Samples per grid point (command-specific default).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Scales n as `a:b`, `a:step:b` or `a,b,c`.
    #[arg(long, global = true, value_parser = parse_grid)]
    n_grid: Option<::std::vec::Vec<usize>>,
    /// Cycle-model probabilities, comma separated.
    #[arg(long, global = true, value_parser = parse_probabilities)]
    p: Option<::std::vec::Vec<f64>>,
    /// Recurrence depth: a positive integer, or `limit` where allowed.
    #[arg(long, global = true)]
    k: Option<Depth>,
    /// `safe`, `half-gamma`, `fig4-literal` or an explicit β.
    #[arg(long, global = true)]
    beta_policy: Option<BetaPolicy>,
    /// Run trials one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample cycle-model digraphs with their true roles.
    Generate {
        /// Randomly relabel nodes before writing.
        #[arg(long)]
        shuffle: bool,
    },
    /// Extract q roles from an edge-list file.
    Extract {
        graph: PathBuf,
        #[arg(long)]
        q: usize,
        /// True labels; prints the misclassification error.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Where to write the labels [default: <out>/assignment.txt].
        #[arg(long)]
        assignment: Option<PathBuf>,
        /// Leading spectrum of S_1 with its gaps.
        #[arg(long)]
        spectrum_csv: Option<PathBuf>,
        /// Append the misclassification result as a JSON line.
        #[arg(long)]
        fhat: Option<PathBuf>,
        /// Write the dense S_k in binary form.
        #[arg(long)]
        dump_similarity: Option<PathBuf>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Eigenvalues of S_1 and T_1 against n (β = 0).
    Figure2,
    /// Eigenvalues of S_k and T_k against n (half-gamma β, k = 10).
    Figure3,
    /// Mean misclassification error against n for k = 1 and k = 10.
    Figure4 {
        #[arg(long)]
        restarts: Option<usize>,
        /// No progress output.
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate the spectral bounds over the n-grid.
    Bounds {
        /// Also measure the compound-noise statistic at N = 1000.
        #[arg(long)]
        conjecture: bool,
    },
    /// Re-render the SVG for a figure CSV (written next to it).
    Plot { csv: PathBuf },
    /// Measure ‖[Z Zᵀ]‖/√(2N) for iid noise.
    Conjecture {
        #[arg(long, default_value_t = 1000)]
        size: usize,
        /// `rademacher` or `bernoulli:<p>`.
        #[arg(long, default_value = "rademacher")]
        distribution: NoiseDistribution,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    let g = cli.global;
    let cfg = ExperimentConfig {
        seed: g.seed,
        out: g.out,
        trials: g.trials,
        grid: g.n_grid,
        p: g.p,
        k: g.k,
        policy: g.beta_policy,
        exec: if g.sequential { Exec::Sequential } else { Exec::default() },
    };
    match cli.command {
        Command::Generate { shuffle } => {
            let files = commands::generate(&cfg, shuffle)?;
            println!("wrote {} files to {}", files.len(), cfg.out.display());
        }
        Command::Extract {
            graph,
            q,
            truth,
            assignment,
            spectrum_csv,
            fhat,
            dump_similarity,
            restarts,
        } => commands::extract(
            &cfg,
            &ExtractArgs {
                graph,
                q,
                truth,
                assignment,
                spectrum_csv,
                fhat,
                dump_similarity,
                restarts,
            },
        )?,
        Command::Figure2 | Command::Figure3 => {
            let which = if matches!(cli.command, Command::Figure2) {
                SpectrumFigure::Figure2
            } else {
                SpectrumFigure::Figure3
            };
            let (csv, svg) = commands::spectrum_figure(&cfg, which)?;
            println!("wrote {} and {}", csv.display(), svg.display());
        }
        Command::Figure4 { restarts, quiet } => {
            let (csv, svg) = commands::figure4(&cfg, restarts, quiet)?;
            println!("wrote {} and {}", csv.display(), svg.display());
        }
        Command::Bounds { conjecture } => {
            if commands::bounds(&cfg, conjecture)? {
                eprintln!("error: an exact bound was violated");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Plot { csv } => {
            println!("wrote {}", commands::plot_csv(&csv)?.display());
        }
        Command::Conjecture { size, distribution } => {
            let path = commands::conjecture(&cfg, size, distribution)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
