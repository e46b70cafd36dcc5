//! Command-line front end: experiments from TOML configs, with re-fit and
//! report rendering over previously written artifacts.
//!
//! All human-facing output (progress, summaries, tables) goes to standard
//! error; data lives only in files, so the tool composes in pipelines.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use otoclab::analysis::{bound_report, fit_cf, FitInit, FitWindow};
use otoclab::correlators::EnsembleResult;
use otoclab::experiment::{run_experiment, ExperimentConfig, FitReport, ProgressFn};
use otoclab::output::{read_ensemble_csv, read_json, write_json};

/// Name of the environment variable supplying the default worker count.
const THREADS_ENV: &str = "OTOCLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "otoclab",
    version,
    about = "Scrambling correlators, interferometric protocol runs, and Lyapunov fits \
             for all-to-all transverse-field spin ensembles",
    after_help = "Worker threads for disorder realizations come from --threads, then the \
                  OTOCLAB_THREADS environment variable, then the available parallelism."
)]
struct Cli {
    /// Worker threads for disorder realizations.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress progress and summaries on standard error.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a config end to end and write all artifacts.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without computing or writing anything.
    Validate { config: PathBuf },
    /// Re-fit previously written C(t) CSVs without recomputing them.
    Fit {
        /// One or more C-series CSV files, one temperature each.
        #[arg(required = true)]
        csvs: Vec<PathBuf>,
        /// Fit windows `t_lo:t_hi`, comma-separated: one per CSV, or a
        /// single window shared by all.
        #[arg(long, required = true, value_delimiter = ',')]
        windows: Vec<String>,
        /// Starting value for the shared scale N_c.
        #[arg(long)]
        init_nc: Option<f64>,
        /// Starting value for the shared exponent Δ.
        #[arg(long)]
        init_delta: Option<f64>,
        /// Where to write the fit report.
        #[arg(long, default_value = "fit.json")]
        out: PathBuf,
    },
    /// Render a saved fit report and its chaos-bound comparison.
    Report { fit: PathBuf },
}

fn main() {
    // Realization-level parallelism belongs to the worker pool; keep the
    // BLAS inside each worker single-threaded unless the user says otherwise.
    for var in ["OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS"] {
        if std::env::var_os(var).is_none() {
            std::env::set_var(var, "1");
        }
    }
    let cli = Cli::parse();
    let threads = resolve_threads(cli.threads);
    // A failure here means a pool already exists, which is equally fine.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();

    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .filter(|&t| t > 0)
    })
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|p| p.get())
            .unwrap_or(1)
    })
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
        } => run(&config, output_dir, seed, cli.quiet),
        Command::Validate { config } => validate(&config, cli.quiet),
        Command::Fit {
            csvs,
            windows,
            init_nc,
            init_delta,
            out,
        } => fit(&csvs, &windows, init_nc, init_delta, &out, cli.quiet),
        Command::Report { fit } => report(&fit),
    }
}

fn load_config(
    path: &Path,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)
        .with_context(|| format!("loading {}", path.display()))?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    Ok(config)
}

fn run(
    path: &Path,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    quiet: bool,
) -> anyhow::Result<()> {
    let config = load_config(path, output_dir, seed)?;
    let started = Instant::now();
    let progress = move |done: usize, total: usize| {
        let step = (total / 20).max(1);
        if done % step == 0 || done == total {
            let elapsed = started.elapsed().as_secs_f64();
            let eta = elapsed / done as f64 * (total - done) as f64;
            eprintln!("  {done}/{total} realizations, {elapsed:.0} s elapsed, ETA {eta:.0} s");
        }
    };
    let progress: ProgressFn<'_> = &progress;
    let summary = run_experiment(&config, if quiet { None } else { Some(progress) })?;
    if !quiet {
        eprintln!(
            "wrote {} artifacts to {} in {:.1} s",
            summary.artifacts.len(),
            summary.output_dir.display(),
            summary.wall_seconds
        );
    }
    Ok(())
}

fn validate(path: &Path, quiet: bool) -> anyhow::Result<()> {
    let config = load_config(path, None, None)?;
    config.validate()?;
    if !quiet {
        eprintln!(
            "ok: {} ({} observables × {} temperatures, {} realizations)",
            path.display(),
            config.observables.len(),
            config.betas.len(),
            config.n_realizations
        );
    }
    Ok(())
}

fn parse_window(text: &str) -> anyhow::Result<FitWindow> {
    let (lo, hi) = text
        .split_once(':')
        .with_context(|| format!("window {text:?} is not of the form t_lo:t_hi"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad window endpoint {s:?}"))
    };
    Ok(FitWindow {
        t_lo: parse(lo)?,
        t_hi: parse(hi)?,
    })
}

fn fit(
    csvs: &[PathBuf],
    windows: &[String],
    init_nc: Option<f64>,
    init_delta: Option<f64>,
    out: &Path,
    quiet: bool,
) -> anyhow::Result<()> {
    let curves: Vec<EnsembleResult> = csvs
        .iter()
        .map(|p| read_ensemble_csv(p).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<_>>()?;
    let windows: Vec<FitWindow> = windows
        .iter()
        .map(|w| parse_window(w))
        .collect::<anyhow::Result<_>>()?;
    let windows = match windows.len() {
        1 => vec![windows[0]; curves.len()],
        n if n == curves.len() => windows,
        n => bail!("{n} windows for {} curves; give one per curve or one shared", curves.len()),
    };

    let mut init = FitInit::default();
    if let Some(n_c) = init_nc {
        init.n_c = n_c;
    }
    if let Some(delta) = init_delta {
        init.delta = delta;
    }

    let refs: Vec<&EnsembleResult> = curves.iter().collect();
    let fit = fit_cf(&refs, &windows, init)?;
    let report = FitReport {
        dissipation: Vec::new(),
        fit,
    };
    write_json(out, &report)?;
    if !quiet {
        eprintln!("wrote {}", out.display());
        render_fit(&report);
    }
    Ok(())
}

fn render_fit(report: &FitReport) {
    let fit = &report.fit;
    for row in &report.dissipation {
        match row.t_d {
            Some(t_d) => eprintln!("  β = {:<6} t_d = {t_d:.4}", row.beta),
            None => eprintln!(
                "  β = {:<6} R never fell below {} (floor {:.4})",
                row.beta,
                row.threshold,
                row.floor.unwrap_or(f64::NAN)
            ),
        }
    }
    for c in &fit.curves {
        eprintln!(
            "  β = {:<6} λ = {:.4} ± {:.4}  (window [{:.3}, {:.3}], {} points)",
            c.beta, c.lambda, c.lambda_stderr, c.window.t_lo, c.window.t_hi, c.n_points
        );
    }
    eprintln!(
        "  N_c = {:.4} ± {:.4}, Δ = {:.4} ± {:.4}, rss = {:.3e}, {} after {} iterations",
        fit.n_c,
        fit.n_c_stderr,
        fit.delta,
        fit.delta_stderr,
        fit.rss,
        if fit.converged {
            "converged"
        } else {
            "NOT converged"
        },
        fit.iterations
    );
}

fn report(path: &Path) -> anyhow::Result<()> {
    let report: FitReport = read_json(path)?;
    render_fit(&report);
    let bound = bound_report(&report.fit)?;
    eprintln!(
        "  {:>8}  {:>8}  {:>8}  {:>8}  {:>12}  {}",
        "T", "λ", "2Δλ", "2Δλ/T", "bound 2πT/2Δ", "exceeds"
    );
    for row in &bound.rows {
        eprintln!(
            "  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>12.4}  {}",
            row.temperature,
            row.lambda,
            row.growth_exponent,
            row.ratio,
            row.bound,
            if row.exceeds_bound { "yes" } else { "no" }
        );
    }
    Ok(())
}
