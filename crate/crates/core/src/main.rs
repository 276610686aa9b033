//! Command-line front end for the day-to-day bottleneck simulator.
//!
//! Exit codes: `0` success (for `run`: converged), `1` configuration or
//! I/O error, `2` the run finished without converging, `3` the measured
//! stability decay rate is more than 10% off the prediction.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use tubesim::{
    analytic_decay, balance, build_grids, check_ue, config_to_string, fmt_sig,
    perturbation_experiment, perturbation_fine_grid, rates_from_pieces, read_config_file,
    read_departure_pieces, run, validate, CsvSink, DayRecord, DaySink, StopRule, ValidatedConfig64,
};

#[derive(Parser)]
#[command(
    name = "tubesim",
    version,
    about = "Day-to-day dynamics of departure-time choice at a single bottleneck"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the day-to-day adjustment from an initial departure profile
    Run(RunArgs),
    /// Print the analytic stationary state and its equilibrium certificate
    Spue(ConfigOnly),
    /// Perturb the stationary state and measure the decay back to it
    Stability(StabilityArgs),
    /// Print the built-in demonstration config (or its departure profile)
    DemoConfig(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Initial departure profile, one `time rate` pair per line
    #[arg(long)]
    f0: PathBuf,
    /// Directory for CSV artifacts (omit to run without writing files)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace artifacts already present in --out
    #[arg(long)]
    overwrite: bool,
    /// Override the configured day cap (counted in day steps)
    #[arg(long)]
    max_days: Option<f64>,
    /// Override the configured equilibrium gap tolerance (0 disables)
    #[arg(long)]
    ue_gap_tol: Option<f64>,
}

#[derive(Args)]
struct ConfigOnly {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Initial density surplus moved upstream (default: 2% of the
    /// critical density)
    #[arg(long)]
    epsilon0: Option<f64>,
    /// Number of day steps to observe
    #[arg(long, default_value_t = 80)]
    steps: usize,
}

#[derive(Args)]
struct DemoArgs {
    /// Print the demonstration departure profile instead of the config
    #[arg(long)]
    pieces: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Spue(args) => cmd_spue(args),
        Command::Stability(args) => cmd_stability(args),
        Command::DemoConfig(args) => cmd_demo_config(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ValidatedConfig64> {
    let cfg = read_config_file::<f64>(path)?;
    validate(cfg).with_context(|| format!("invalid configuration {}", path.display()))
}

/// Sink for runs without an output directory.
struct Discard;

impl DaySink<f64> for Discard {
    fn record(&mut self, _day: &DayRecord<f64>) -> tubesim::Result<()> {
        Ok(())
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = read_config_file::<f64>(&args.config)?;
    if let Some(md) = args.max_days {
        cfg.max_days = md;
    }
    if let Some(tol) = args.ue_gap_tol {
        cfg.ue_gap_tol = tol;
    }
    let cfg = validate(cfg)
        .with_context(|| format!("invalid configuration {}", args.config.display()))?;
    let grids = build_grids(&cfg);
    let pieces = read_departure_pieces(&args.f0)?;
    let f0 = rates_from_pieces(&cfg, &grids, &pieces)?;
    let rule = StopRule::from_config(&cfg);

    let summary = match &args.out {
        Some(dir) => {
            let mut sink = CsvSink::create(dir, &grids, args.overwrite)?;
            let summary = run(&cfg, &grids, &f0, &rule, &mut sink)?;
            sink.finalize(&summary, &config_to_string(cfg.cfg()))?;
            summary
        }
        None => run(&cfg, &grids, &f0, &rule, &mut Discard)?,
    };

    println!("days recorded    {}", summary.days);
    println!("final day        {}", fmt_sig(summary.final_day));
    println!("final ue gap     {}", fmt_sig(summary.final_gap));
    println!("block edge x*    {}", fmt_sig(summary.final_x_star));
    println!("stop reason      {}", summary.reason);
    println!("converged        {}", summary.converged);
    if let Some(dir) = &args.out {
        println!("artifacts in     {}", dir.display());
    }
    if summary.max_mass_error > 1e-6 * cfg.cfg().n {
        eprintln!(
            "warning: commuter mass drifted by up to {} vehicles",
            fmt_sig(summary.max_mass_error)
        );
    }
    Ok(if summary.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_spue(args: ConfigOnly) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let grids = build_grids(&cfg);
    let spue = tubesim::analytic_spue(&cfg, &grids);
    let day = balance(&cfg, &grids, &spue.density)?;
    let report = check_ue(&cfg, &grids, &day);

    println!("l_star,t1,t2,t_switch,rate_early,rate_late,cost");
    println!(
        "{},{},{},{},{},{},{}",
        fmt_sig(spue.l_star),
        fmt_sig(spue.window.0),
        fmt_sig(spue.window.1),
        fmt_sig(spue.t_switch),
        fmt_sig(spue.rates.0),
        fmt_sig(spue.rates.1),
        fmt_sig(report.phi_min),
    );
    println!();
    println!("jammed cells         {}", spue.jam_cells);
    println!("relative ue gap      {}", fmt_sig(day.gap));
    println!("arrival residual     {}", fmt_sig(report.arrival_residual));
    println!(
        "departure residual   {}",
        fmt_sig(report.departure_residual)
    );
    println!("unused cost margin   {}", fmt_sig(report.unused_margin));
    Ok(ExitCode::SUCCESS)
}

fn cmd_stability(args: StabilityArgs) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let epsilon0 = args.epsilon0.unwrap_or(0.02 * cfg.kappa_c());
    let result = perturbation_experiment(&cfg, epsilon0, args.steps)?;

    println!("initial deviation    {}", fmt_sig(result.epsilon0));
    println!("per-step factor      {}", fmt_sig(result.per_step_factor));
    println!(
        "fitted decay rate    {} per day",
        fmt_sig(result.fitted_rate)
    );
    println!(
        "theory decay rate    {} per day",
        fmt_sig(result.theory_rate)
    );
    println!("fit r^2              {}", fmt_sig(result.r_squared));
    let ratio = result.fitted_rate / result.theory_rate;
    println!("fitted / theory      {}", fmt_sig(ratio));
    let horizon = cfg.cfg().n / cfg.kappa() / cfg.cfg().u.min(cfg.cfg().w);
    println!(
        "1/e recovery after   {} days (analytic check: {})",
        fmt_sig(horizon),
        fmt_sig(analytic_decay(&cfg, horizon))
    );

    let grids = build_grids(&cfg);
    let deviations = perturbation_fine_grid(&cfg, &grids, epsilon0, args.steps.min(16))?;
    let gone = deviations
        .iter()
        .position(|&d| d <= 1e-9 * epsilon0)
        .map(|j| format!("{} day step(s)", j))
        .unwrap_or_else(|| format!("more than {} day steps", deviations.len() - 1));
    println!("cell-level swap on the simulation grid is absorbed after {gone}");

    Ok(if (ratio - 1.0).abs() <= 0.1 {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "stability mismatch: fitted rate {} deviates from predicted {} by more than 10%",
            fmt_sig(result.fitted_rate),
            fmt_sig(result.theory_rate)
        );
        ExitCode::from(3)
    })
}

fn cmd_demo_config(args: DemoArgs) -> anyhow::Result<ExitCode> {
    if args.pieces {
        for (t, rate) in tubesim::demo::demo_departure_pieces::<f64>() {
            println!("{} {}", fmt_sig(t), fmt_sig(rate));
        }
    } else {
        print!("{}", config_to_string(&tubesim::demo::demo_config::<f64>()));
    }
    Ok(ExitCode::SUCCESS)
}
