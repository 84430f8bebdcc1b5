use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mcmc_ci::bounds::{e_t0_uniform, BoundInputs, Formula};
use mcmc_ci::dag::{generate_dataset, save_dataset};
use mcmc_ci::estimators::{tmix_hat, EstimatorReport};
use mcmc_ci::harness::output::write_atomically;
use mcmc_ci::harness::{
    bound_curves, emit_outputs, resolve_parameters, run_dag_posterior, run_estimation, run_experiment, symmetric_grid,
    ExperimentConfig,
};
use mcmc_ci::rng::chain_rng;
use mcmc_ci::{Error, Result};

#[derive(Parser)]
#[command(name = "mcmc-ci", version, about = "Confidence bounds for MCMC averages")]
struct Cli {
    /// Worker threads for the chain batch. Never changes the output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate V_f, sigma^2, gap and mixing time from a trace or a config.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// File with one observable value per line.
        #[arg(long, conflicts_with = "config")]
        trace: Option<PathBuf>,
        /// Treat the trace as coming from a non-reversible chain.
        #[arg(long)]
        nonreversible: bool,
        /// Bound C on |f - E f| recorded in the report.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        t0: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Bound curves on a t grid, from a config or explicit parameters.
    Bound(BoundArgs),
    /// Full experiment: tails.csv, report.txt and manifest.txt.
    Tails {
        #[command(flatten)]
        common: Common,
        /// Override the number of evaluation runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Posterior edge probability with a Bernstein confidence interval.
    DagPosterior {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic six-node binary dataset.
    GenDataset {
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    v_f: Option<f64>,
    /// Spectral gap, or pseudo spectral gap with --nonreversible.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Burn-in; defaults to floor(30 t_mix).
    #[arg(long)]
    t0: Option<usize>,
    #[arg(long)]
    nonreversible: bool,
    /// Number of parallel chains averaged together.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Comma-separated formula names.
    #[arg(long, default_value = "chebyshev,bernstein,bernstein_one_sided,normal")]
    formulas: String,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    half_width: Option<f64>,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    Ok(cfg)
}

/// Print `text`, or write it as `dir/name` when an output directory is set.
fn deliver(out: Option<&Path>, name: &str, text: String) -> Result<()> {
    match out {
        Some(dir) => {
            let written = write_atomically(dir, &[(name, text)])?;
            eprintln!("wrote {}", written[0].display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn read_trace(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        values.push(line.parse().map_err(|_| Error::Parse {
            row: no + 1,
            column: 1,
            message: format!("not a number: {line:?}"),
        })?);
    }
    Ok(values)
}

fn estimate(
    common: &Common,
    trace: Option<&Path>,
    reversible: bool,
    c: f64,
    window: (Option<usize>, Option<usize>),
) -> Result<()> {
    let report = match trace {
        Some(path) => {
            let values = read_trace(path)?;
            let window = match window {
                (None, None) => None,
                (t0, k) => {
                    let (d_t0, d_k) = mcmc_ci::estimators::default_policy(values.len())?;
                    Some((t0.unwrap_or(d_t0), k.unwrap_or(d_k)))
                }
            };
            EstimatorReport::from_values(&values, reversible, c, window)?
        }
        None => {
            let mut cfg = load_config(common)?;
            if window.0.is_some() {
                cfg.estimation.t0_hat = window.0;
            }
            if window.1.is_some() {
                cfg.estimation.k = window.1;
            }
            run_estimation(&cfg)?
        }
    };
    deliver(common.out.as_deref(), "estimate.txt", report.to_record())
}

fn bound(args: &BoundArgs) -> Result<()> {
    let formulas = args
        .formulas
        .split(',')
        .map(|s| Formula::from_name(s.trim()))
        .collect::<Result<Vec<_>>>()?;
    let inputs = if args.common.config.is_some() {
        let (params, _) = resolve_parameters(&load_config(&args.common)?)?;
        params.bound_inputs()
    } else {
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| Error::Config(format!("--{flag} is required without --config")))
        };
        let reversible = !args.nonreversible;
        let gamma = need(args.gamma, "gamma")?;
        let tmix = tmix_hat(gamma, reversible)?;
        let n = args
            .n
            .ok_or_else(|| Error::Config("--n is required without --config".into()))?;
        let t0 = args.t0.unwrap_or((30.0 * tmix).floor() as usize);
        BoundInputs {
            v_f: need(args.v_f, "v-f")?,
            sigma2: need(args.sigma2, "sigma2")?,
            gamma,
            tmix,
            c: need(args.c, "c")?,
            n,
            t0,
            e_t0: e_t0_uniform(t0, tmix)?,
            reversible,
            n_chains: args.chains,
        }
    };
    inputs.validate()?;
    let half_width = args
        .half_width
        .unwrap_or(6.0 * inputs.sigma2.sqrt() / (inputs.effective_length()).sqrt());
    let grid = symmetric_grid(args.points, half_width);
    let curves = bound_curves(&inputs, &formulas, &grid)?;
    let mut text = String::from("t,log_bound,bound_uncapped,formula_id\n");
    for curve in &curves {
        text.extend(curve.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    deliver(args.common.out.as_deref(), "bounds.csv", text)
}

fn tails(common: &Common, runs: Option<usize>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(r) = runs {
        cfg.runs = r;
    }
    let summary = run_experiment(&cfg)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    for path in emit_outputs(&summary, &cfg, &out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn dag_posterior(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let post = run_dag_posterior(&cfg)?;
    let mut text = String::new();
    let _ = writeln!(text, "observable={}", post.observable);
    let _ = writeln!(text, "estimate={}", post.estimate);
    let _ = writeln!(text, "half_width={}", post.half_width);
    let _ = writeln!(text, "delta={}", post.delta);
    let _ = writeln!(text, "interval_low={}", (post.estimate - post.half_width).max(0.0));
    let _ = writeln!(text, "interval_high={}", (post.estimate + post.half_width).min(1.0));
    if let Some(exact) = post.exact {
        let _ = writeln!(text, "exact={exact}");
    }
    let _ = writeln!(text, "t0={}", post.params.t0);
    let _ = writeln!(text, "n={}", post.params.n);
    text.push_str("\n[estimator]\n");
    text.push_str(&post.report.to_record());
    deliver(common.out.as_deref(), "posterior.txt", text)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate {
            common,
            trace,
            nonreversible,
            c,
            t0,
            k,
        } => estimate(&common, trace.as_deref(), !nonreversible, c, (t0, k)),
        Command::Bound(args) => bound(&args),
        Command::Tails { common, runs } => tails(&common, runs),
        Command::DagPosterior { common } => dag_posterior(&common),
        Command::GenDataset { rows, seed, out } => {
            let data = generate_dataset(rows, &mut chain_rng(seed));
            save_dataset(&out, &data)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
