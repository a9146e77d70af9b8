use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maats::harness::{self, output, plot, HarnessError};
use maats::scenario::{load_config_file, AllocatorKind, ConfigError, ScenarioConfig, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "maats", version, about = "Multi-quadrotor cable-suspended load transport simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario JSON; falls back to $MAATS_CONFIG, then built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop mission and write timeseries.csv and metrics.json.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        allocator: Option<AllocatorKind>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG charts.
        #[arg(long)]
        plot: bool,
    },
    /// Run the mission once per penalty weight and write sweep.json.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated penalty weights.
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: bool,
    },
    /// Time warm-started allocator cycles on a recorded demand sequence.
    Bench {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
    },
}

fn load(arg: &ConfigArg) -> Result<ScenarioConfig, ConfigError> {
    let path = arg
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(p) => load_config_file(&p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn out_dir(cfg: &ScenarioConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn simulate(cfg: &ScenarioConfig, dir: &Path, with_plot: bool) -> Result<(), HarnessError> {
    let (records, metrics) = harness::run_simulation(cfg)?;
    output::write_timeseries(dir, &records)?;
    output::write_json(dir, output::METRICS_FILE, &metrics)?;
    if with_plot {
        plot::plot_run(dir, &records)?;
    }
    println!(
        "rms {:.4} m, max {:.4} m, min angle {:.2} deg, J_T {:.3} N s, peak/mean {:.3}, solver mean {:.3} ms",
        metrics.rms_error,
        metrics.max_error,
        metrics.min_pairwise_angle,
        metrics.j_t,
        metrics.peak_to_mean_ratio,
        metrics.solver_time_mean * 1e3
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { config, mu, allocator, duration, dt, out, plot } => {
            let mut cfg = load(&config)?;
            if let Some(mu) = mu {
                cfg.alloc.mu = mu;
            }
            if let Some(kind) = allocator {
                cfg.alloc.kind = kind;
            }
            if let Some(d) = duration {
                cfg.duration = d;
            }
            if let Some(dt) = dt {
                cfg.dt = dt;
            }
            cfg.validate()?;
            let dir = out_dir(&cfg, out);
            simulate(&cfg, &dir, plot)
        }
        Command::Sweep { config, mu, out, plot } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg, out);
            let entries = harness::sweep_mu(&cfg, &mu)?;
            output::write_json(&dir, output::SWEEP_FILE, &entries)?;
            if plot {
                plot::plot_sweep(&dir, &entries)?;
            }
            for e in &entries {
                println!(
                    "mu {:.3}: min angle {:.2} deg, J_T {:.3} N s, rms {:.4} m",
                    e.mu, e.metrics.min_pairwise_angle, e.metrics.j_t, e.metrics.rms_error
                );
            }
            println!("wrote {}", dir.join(output::SWEEP_FILE).display());
            Ok(())
        }
        Command::Bench { config, samples } => {
            let cfg = load(&config)?;
            let summary = harness::bench_allocator(&cfg, samples)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
