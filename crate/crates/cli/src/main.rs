use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use boostlab::commands::{self, Format, Sink, SweepKind};
use boostlab::config::ExperimentConfig;
use boostlab::error::CliError;
use boostlab::{dump_configs, load_configs, presets};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "boostlab",
    version,
    about = "Boost converter voltage control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Experiment description (JSON object or array of objects).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: fig1..fig6 or pid-pbc.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: the config's out_dir, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Assignable equilibria, constant controls and existence margins.
    Equilibria(Source),
    /// Integrate every run; write CSV and SVG artifacts.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Replace every integrator with fixed-step RK4 of this step.
        #[arg(long)]
        rk4: Option<f64>,
        /// Keep every n-th sample in the written artifacts (overrides the config).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Characteristic polynomial, Routh-Hurwitz verdict and eigenvalues of
    /// each PI equilibrium, or a property sweep.
    Stability {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        sweep: Option<SweepKind>,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Equilibria of the zero dynamics with stability tags.
    ZeroDynamics(Source),
    /// Quadratic attraction estimate, cross-checked by simulation.
    Doa {
        #[command(flatten)]
        source: Source,
        /// Number of boundary samples to simulate.
        #[arg(long)]
        checks: Option<usize>,
    },
    /// Randomised property sweep over admissible parameters.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the experiment description as JSON.
    DumpConfig(Source),
}

fn configs(src: &Source) -> Result<Vec<ExperimentConfig>, CliError> {
    match (&src.config, &src.preset) {
        (Some(path), _) => load_configs(path),
        (None, Some(name)) => presets::preset(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset `{name}`; available: {}",
                presets::NAMES.join(", ")
            ))
        }),
        (None, None) => Err(CliError::Config(
            "give --config <file> or --preset <name>".into(),
        )),
    }
}

fn sink(src: &Source, cfgs: &[ExperimentConfig]) -> Sink {
    Sink {
        dir: commands::output_dir(src.out.as_deref(), cfgs),
        format: src.format,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    match cli.command {
        Command::Equilibria(src) => {
            let cfgs = configs(&src)?;
            commands::equilibria(&cfgs, Some(&sink(&src, &cfgs)), &mut w)
        }
        Command::Simulate {
            source,
            rk4,
            stride,
        } => {
            if stride == Some(0) {
                return Err(CliError::Config("--stride must be >= 1".into()));
            }
            if let Some(h) = rk4 {
                if !(h.is_finite() && h > 0.0) {
                    return Err(CliError::Config(format!("--rk4 step must be > 0, got {h}")));
                }
            }
            let cfgs = configs(&source)?;
            commands::simulate(&cfgs, &sink(&source, &cfgs), rk4, stride, &mut w)
        }
        Command::Stability {
            source,
            sweep,
            n,
            seed,
        } => match sweep {
            Some(kind) => {
                let s = Sink {
                    dir: commands::output_dir(source.out.as_deref(), &[]),
                    format: source.format,
                };
                commands::sweep(kind, n, seed, source.out.as_ref().map(|_| &s), &mut w)
            }
            None => {
                let cfgs = configs(&source)?;
                commands::stability(&cfgs, Some(&sink(&source, &cfgs)), &mut w)
            }
        },
        Command::ZeroDynamics(src) => {
            let cfgs = configs(&src)?;
            commands::zero_dynamics_cmd(&cfgs, Some(&sink(&src, &cfgs)), &mut w)
        }
        Command::Doa { source, checks } => {
            let cfgs = configs(&source)?;
            commands::doa(&cfgs, Some(&sink(&source, &cfgs)), checks, &mut w)
        }
        Command::Sweep { kind, n, seed, out } => {
            let s = out.map(|dir| Sink {
                dir,
                format: Format::Both,
            });
            commands::sweep(kind, n, seed, s.as_ref(), &mut w)
        }
        Command::DumpConfig(src) => {
            let cfgs = configs(&src)?;
            w.write_all(dump_configs(&cfgs).as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("boostlab: {e}");
            e.exit_code()
        }
    }
}
