use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinetic::config::{ExperimentConfig, GridSpec};
use kinetic::experiments::{dinf_table, ecf_tables, martingale_run, pool_history, simulate_table, spectral_table, Context};
use kinetic::table::{fmt_f64, Table};
use kinetic::verify::{ode_comparison, Suite, SuiteOutcome};
use kinetic::Result;

/// Branching random walk experiments for kinetic-type equations.
#[derive(Debug, Parser)]
#[command(name = "kinetic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration; each subcommand has a built-in default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Suffix of output file names.
    #[arg(long)]
    label: Option<String>,
    /// Comma-separated checkpoints.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral constants and a table of Φ(s), μ(s).
    Spectral {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires_all = ["s_max", "s_points"])]
        s_min: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long)]
        s_points: Option<usize>,
    },
    /// Martingale observables per checkpoint.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical characteristic functions per checkpoint.
    Ecf {
        #[command(flatten)]
        common: Common,
    },
    /// Pool iteration of the fixed-point equation.
    FixedPoint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pool: Option<usize>,
        #[arg(long)]
        iterations: Option<u32>,
    },
    /// Runs a verification suite; exits 0 iff every test passes.
    Verify {
        #[command(flatten)]
        common: Common,
        /// spectral, yule, martingale, max_weight, fixed_point, ode_crosscheck or boundary.
        #[arg(long)]
        suite: String,
    },
    /// Monte Carlo against the Runge–Kutta reference.
    OdeCheck {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, fallback: Suite) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => fallback.preset(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(r) = common.replicates {
        cfg.replicates = r;
    }
    if let Some(l) = &common.label {
        cfg.label = Some(l.clone());
    }
    if let Some(t) = &common.times {
        cfg.times = t.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(table: &Table, ctx: &Context) -> Result<()> {
    let path = table.write(&ctx.config.out_dir(), &ctx.header())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn report(outcome: &SuiteOutcome, name: String, ctx: &Context) -> Result<bool> {
    let mut table = outcome.report_table();
    table.name = name;
    write(&table, ctx)?;
    for t in &outcome.tables {
        write(t, ctx)?;
    }
    print!("{}", outcome.summary());
    Ok(outcome.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Spectral { common, s_min, s_max, s_points } => {
            let mut cfg = resolve(&common, Suite::Spectral)?;
            if let (Some(min), Some(max), Some(points)) = (s_min, s_max, s_points) {
                cfg.s_grid = Some(GridSpec { min, max, points });
                cfg.validate()?;
            }
            let ctx = Context::new(cfg)?;
            let (p, table) = spectral_table(&ctx.config)?;
            println!("gamma_star {}", fmt_f64(p.gamma_star));
            println!("phi(gamma_star) {}", fmt_f64(p.phi_at));
            println!("mu(gamma_star) {}", fmt_f64(p.mu_at));
            println!("phi''(gamma_star) {}", fmt_f64(p.phi_second_at));
            println!("c_gamma {}", fmt_f64(p.c_gamma));
            write(&table, &ctx)?;
            Ok(true)
        }
        Command::Simulate { common } => {
            let ctx = Context::new(resolve(&common, Suite::Martingale)?)?;
            let run = martingale_run(&ctx, &[])?;
            let table = simulate_table(&run, ctx.config.label());
            println!("{}", table.columns().join(" "));
            for row in table.rows() {
                println!("{}", row.join(" "));
            }
            write(&table, &ctx)?;
            Ok(true)
        }
        Command::Ecf { common } => {
            let ctx = Context::new(resolve(&common, Suite::OdeCrosscheck)?)?;
            for table in ecf_tables(&ctx)? {
                write(&table, &ctx)?;
            }
            Ok(true)
        }
        Command::FixedPoint { common, pool, iterations } => {
            let mut cfg = resolve(&common, Suite::FixedPoint)?;
            if let Some(p) = pool {
                cfg.pool.size = p;
            }
            if let Some(i) = iterations {
                cfg.pool.iterations = i;
            }
            let ctx = Context::new(cfg)?;
            let profile = ctx.config.profile()?;
            let model = ctx.config.weight_model()?;
            let run = pool_history(&ctx, &profile, &model)?;
            let label = ctx.config.label().to_string();
            write(&run.table(format!("fixed-point_{label}")), &ctx)?;
            let mut sample = dinf_table(format!("fixed-point_{label}_dinf"), &run.pool, "fixed-point-iteration");
            sample.meta("iterations", run.history.len()).meta("pool_size", run.pool.len());
            write(&sample, &ctx)?;
            Ok(true)
        }
        Command::Verify { common, suite } => {
            let suite = Suite::from_name(&suite)?;
            let ctx = Context::new(resolve(&common, suite)?)?;
            let outcome = suite.run(&ctx)?;
            report(&outcome, format!("verify_{suite}"), &ctx)
        }
        Command::OdeCheck { common } => {
            let ctx = Context::new(resolve(&common, Suite::OdeCrosscheck)?)?;
            let label = ctx.config.label().to_string();
            let (reports, tables) = ode_comparison(&ctx, &format!("ode-check_{label}"))?;
            let outcome = SuiteOutcome { suite: Suite::OdeCrosscheck, reports, tables, header: ctx.header() };
            report(&outcome, format!("ode-check_{label}"), &ctx)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

