use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use wiener_core::bench::{emit_report, linear_baseline_std, run_experiment, run_method, ExperimentConfig, MethodSettings, ReportFormat};
use wiener_core::ml::MlSettings;
use wiener_core::system::simulate_record;
use wiener_core::{DataRecord, Method, Seed};

#[derive(Debug, Parser)]
#[command(name = "wiener", version, about = "Stochastic Wiener system identification toolkit")]
struct Cli {
    /// Experiment config (TOML). Defaults to the gaussian reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    /// Run ML at order 200 on the first 200 realizations only.
    #[arg(long, global = true)]
    desk_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one data record from the config's system.
    Simulate,
    /// Run one estimator on a data record.
    Estimate {
        /// Data record CSV with columns t,u,y.
        #[arg(long)]
        data: PathBuf,
        /// ML, PEM, PEM_W, II0, II1_UNW, II1_W or II1_SIM.
        #[arg(long)]
        method: Method,
    },
    /// Run the Monte Carlo comparison described by the config.
    Bench,
    /// Print the linear-case standard deviation for the config.
    Baseline,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::paper_gaussian(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = Seed(seed);
    }
    if cli.desk_scale {
        cfg.desk_scale = true;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    match &cli.out {
        Some(p) => {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(p)
        }
        None => bail!("--out <dir> is required for this command"),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let format: ReportFormat = cli.format.parse()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Simulate => {
            let dir = out_dir(cli)?;
            let (data, _) = simulate_record(&cfg.system_spec(), cfg.n, cfg.master_seed)?;
            let path = dir.join("data.csv");
            data.save(&path)?;
            writeln!(out, "wrote {} samples to {}", data.n(), path.display())?;
        }
        Command::Estimate { data, method } => {
            let record = DataRecord::load(data).with_context(|| format!("reading data {}", data.display()))?;
            let (order, _) = cfg.ml_schedule();
            let settings = MethodSettings {
                ml: MlSettings::with_order(order),
                simulation: cfg.s.map(|s| (s, cfg.master_seed)),
                ..Default::default()
            };
            let report = run_method(*method, &record, &cfg.system_spec(), &settings)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(format!("estimate_{}.json", method.tag())), &text)?;
            }
            writeln!(out, "{text}")?;
        }
        Command::Bench => {
            let dir = out_dir(cli)?;
            let result = run_experiment(&cfg)?;
            let files = emit_report(&result, format, dir)?;
            writeln!(out, "{:<8} {:>10} {:>10} {:>8} {:>10}", "method", "mean", "std", "failures", "time_s")?;
            for s in &result.summaries {
                writeln!(
                    out,
                    "{:<8} {:>10.4} {:>10.4} {:>8} {:>10.2}",
                    s.method.tag(),
                    s.mean,
                    s.std,
                    s.failures,
                    s.wall_time_s
                )?;
            }
            writeln!(
                out,
                "linear baseline std {:.4} (quoted {:.4})",
                result.linear_baseline_std, result.quoted_linear_baseline_std
            )?;
            writeln!(out, "summary {}", files.summary.display())?;
            writeln!(out, "raw {}", files.raw.display())?;
            writeln!(out, "ledger {}", files.ledger.display())?;
        }
        Command::Baseline => {
            writeln!(
                out,
                "formula {} quoted {}",
                linear_baseline_std(&cfg),
                wiener_core::bench::QUOTED_LINEAR_BASELINE_STD
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wiener: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
