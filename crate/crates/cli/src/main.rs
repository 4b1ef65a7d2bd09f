use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use effcap_cli::config::{RawConfig, RunConfig};
use effcap_cli::figures::{reproduce_figure, FigureOptions};
use effcap_cli::validation::{run_suite, Options, Suite};
use effcap_cli::{reports, sweep, CliError};

#[derive(Parser)]
#[command(name = "effcap", version, about = "Effective capacity of MIMO links under QoS constraints")]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set scenario.theta_hat=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output file (directory for `reproduce-fig`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo samples per point.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate over the configured SNR grid.
    Sweep,
    /// Bit energy against rate over the configured SNR grid.
    BitEnergy,
    /// Low-SNR derivatives, minimum bit energy and wideband slope.
    LowSnr,
    /// High-SNR slope and power offset.
    HighSnr,
    /// Rate and bit energy over a coherence-bandwidth grid.
    SparseWideband,
    /// Simulates the buffer and checks the queue-tail exponent.
    QueueValidate {
        /// Also write the simulated trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Writes the per-curve datasets of one figure.
    ReproduceFig {
        /// fig1 ... fig6
        name: String,
    },
    /// Runs a validation suite: lowsnr, highsnr, wideband, queue or all.
    Validate { suite: String },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut raw = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for o in &cli.overrides {
        raw.apply_override(o)?;
    }
    if let Some(s) = cli.seed {
        raw.apply_override(&format!("mc.seed={s}"))?;
    }
    if let Some(n) = cli.samples {
        raw.apply_override(&format!("mc.n_samples={n}"))?;
    }
    raw.build()
}

fn out_path<'a>(cli: &'a Cli, cfg: &'a RunConfig) -> Option<&'a Path> {
    cli.out.as_deref().or(cfg.output.path.as_deref().map(Path::new))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let out = out_path(cli, &cfg);
    match &cli.command {
        Command::Sweep => sweep::sweep_table(&sweep::run_sweep(&cfg)?).write_to(out),
        Command::BitEnergy => sweep::run_bit_energy(&cfg)?.write_to(out),
        Command::LowSnr => reports::low_snr_report(&cfg)?.write_to(out),
        Command::HighSnr => reports::high_snr_report(&cfg)?.write_to(out),
        Command::SparseWideband => {
            let (rows, summary) = reports::sparse_report(&cfg)?;
            rows.write_to(out)?;
            if !cli.quiet {
                eprint!("{}", summary.to_csv_string());
            }
            Ok(())
        }
        Command::QueueValidate { trace } => {
            let (table, pass) = reports::queue_report(&cfg, trace.as_deref())?;
            table.write_to(out)?;
            if pass {
                Ok(())
            } else {
                Err(CliError::Validation("queue tail exponent outside tolerance".into()))
            }
        }
        Command::ReproduceFig { name } => {
            let opts = FigureOptions {
                n_samples: cli.samples.unwrap_or(FigureOptions::default().n_samples),
                seed: cli.seed.unwrap_or(cfg.mc.seed),
                ..FigureOptions::default()
            };
            let curves = reproduce_figure(name, &opts)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(name));
            fs::create_dir_all(&dir)?;
            for c in &curves {
                let path = dir.join(format!("{}.csv", c.stem));
                c.table().write_to(Some(&path))?;
                if !cli.quiet {
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Command::Validate { suite } => {
            let suite = Suite::parse(suite).ok_or_else(|| {
                CliError::Config(format!("unknown suite {suite:?}; expected lowsnr, highsnr, wideband, queue or all"))
            })?;
            let opts = Options {
                samples: cli.samples,
                seed: cli.seed.unwrap_or(cfg.mc.seed),
                queue_blocks: cfg.queue.n_blocks,
                ..Options::default()
            };
            let checks = run_suite(suite, &opts)?;
            for c in &checks {
                if !cli.quiet || c.failed() {
                    println!("{}", c.line());
                }
            }
            let failed = checks.iter().filter(|c| c.failed()).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Validation(format!("{failed} of {} checks failed", checks.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("effcap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
