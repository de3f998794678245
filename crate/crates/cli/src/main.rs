use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qreflect_cli::{
    available_memory, check_budget, exit, exit_code, load_config, oracle, parse_bytes, run_single,
    run_sweep, sweep, Precision, RunOptions, SweepAxis, SweepOptions,
};

#[derive(Parser)]
#[command(
    name = "qreflect",
    version,
    about = "Quantum reflection from a corrugated surface"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one wave packet and write its reflectivity series.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write the wave function every N recorded samples.
        #[arg(long, value_name = "N")]
        snapshot_every: Option<usize>,
    },
    /// Run one simulation per value of a single parameter.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        /// Parameter to vary: n_x, n_y, cutoff, amplitude, sigma_y or dt.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values; units are accepted, e.g. `5nm,10nm`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Number of points run at the same time (bounded by the memory budget).
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tabulate the one-dimensional reflectivity against the cutoff.
    Oracle1d {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated cutoffs.
        #[arg(long, value_delimiter = ',', conflicts_with = "range")]
        cutoffs: Vec<String>,
        /// Log-spaced cutoffs as `lo:hi:n`.
        #[arg(long)]
        range: Option<String>,
        /// Write `oracle1d.csv` here instead of printing the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the predicted memory of a run without allocating it.
    PredictMem {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        resources: ResourceArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting parameters: reference, desk or desk-flat.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Override one key, e.g. `--set cutoff=5nm`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<qreflect::SimConfig> {
        load_config(&self.preset, self.config.as_deref(), &self.overrides)
    }
}

#[derive(Args)]
struct ResourceArgs {
    /// Memory budget, e.g. `8G`. Defaults to the memory currently available.
    #[arg(long, value_parser = parse_bytes)]
    max_mem: Option<u64>,
    #[arg(long, default_value = "f64")]
    precision: Precision,
}

impl ResourceArgs {
    fn budget(&self) -> Option<u64> {
        self.max_mem.or_else(available_memory)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Run {
            config,
            resources,
            out,
            snapshot_every,
        } => {
            let summary = run_single(&RunOptions {
                config: config.load()?,
                out,
                max_mem: resources.budget(),
                precision: resources.precision,
                snapshot_every,
            })?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", summary.line());
            Ok(exit::OK)
        }
        Command::Sweep {
            config,
            resources,
            axis,
            values,
            parallel,
            out,
        } => {
            let opts = SweepOptions {
                base: config.load()?,
                axis,
                values,
                parallel,
                max_mem: resources.budget(),
                precision: resources.precision,
            };
            let outcome = run_sweep(&opts)?;
            let path = sweep::write_outputs(&outcome, &opts, &out)?;
            for row in &outcome.rows {
                if let Err(e) = &row.result {
                    eprintln!("warning: {} = {}: {e}", axis.key(), row.axis_value);
                }
            }
            println!(
                "{} points ({} failed) written to {}",
                outcome.rows.len(),
                outcome.failures(),
                path.display()
            );
            Ok(exit::OK)
        }
        Command::Oracle1d {
            config,
            cutoffs,
            range,
            out,
        } => {
            let base = config.load()?;
            let values = match range {
                Some(spec) => oracle::parse_range(&base, &spec)?,
                None if cutoffs.is_empty() => vec![base.cutoff],
                None => cutoffs
                    .iter()
                    .map(|c| oracle::parse_cutoff(&base, c))
                    .collect::<qreflect::Result<_>>()?,
            };
            let rows = oracle::oracle_table(&base, &values)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                    let path = dir.join("oracle1d.csv");
                    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
                    oracle::write_table(&rows, &mut f)?;
                    f.flush()?;
                    println!("wrote {}", path.display());
                }
                None => oracle::write_table(&rows, &mut std::io::stdout().lock())?,
            }
            if rows.len() >= 3 {
                match oracle::effective(&rows) {
                    Ok((mono, avg)) => {
                        eprintln!(
                            "effective R (log-uniform average): {mono:e}, packet-averaged {avg:e}"
                        )
                    }
                    Err(e) => eprintln!("no effective average: {e}"),
                }
            }
            Ok(exit::OK)
        }
        Command::PredictMem { config, resources } => {
            let cfg = config.load()?;
            let m = resources.precision.memory(cfg.n_x, cfg.n_y);
            println!("factor_bytes={}", m.factor_bytes);
            println!("workspace_bytes={}", m.workspace_bytes);
            println!(
                "total_bytes={} ({:.3} GB)",
                m.total(),
                m.total() as f64 / 1e9
            );
            check_budget(m.total(), resources.budget())?;
            Ok(exit::OK)
        }
    }
}
