use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::error::Error;
use shelab::experiments;

#[derive(Parser)]
#[command(name = "shelab", version, about = "Stochastic heat equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print every constraint with its margin.
    Validate(Common),
    /// Run an experiment and write its artifacts and manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// Reuse checksum-verified batches from an interrupted run.
        #[arg(long)]
        resume: bool,
    },
    /// Print the checks of a finished run and verify its artifacts.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; without it the preset of --experiment is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    experiment: Option<ExperimentKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown experiment {s}; one of {}", ExperimentKind::ALL.map(|k| k.name()).join(", ")))
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match (&self.config, self.experiment) {
            (Some(p), _) => ExperimentConfig::load(p).map_err(|e| match e {
                Error::Io(e) => Error::Config(format!("cannot read {}: {e}", p.display())),
                e => e,
            })?,
            (None, Some(k)) => ExperimentConfig::preset(k),
            (None, None) => return Err(Error::Config("give --config or --experiment".into())),
        };
        if self.config.is_some() {
            if let Some(k) = self.experiment {
                cfg.experiment = k;
            }
        }
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        if let Some(n) = self.paths {
            cfg.mc.n_paths = n;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InsufficientSamples { .. } => 2,
        _ => 3,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(c) => {
            let cfg = match c.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            for d in cfg.diagnostics() {
                println!("{}", d.line());
            }
            match cfg.validate() {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Run { common, resume } => {
            let cfg = match common.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = cfg.output_dir.clone();
            match experiments::run(&cfg, &out, resume) {
                Ok(o) => {
                    for w in &o.warnings {
                        println!("{w}");
                    }
                    for c in &o.checks {
                        println!("{}", c.line());
                    }
                    println!("artifacts in {}", out.display());
                    if o.pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Report { out } => match experiments::report(&out) {
            Ok((m, o, bad)) => {
                println!("{} (seed {}, {} paths, {:.1} s)", m.experiment.name(), m.seed, m.n_paths, m.wall_clock_seconds);
                for c in &o.checks {
                    println!("{}", c.line());
                }
                for b in &bad {
                    println!("FAIL checksum mismatch: {b}");
                }
                if o.pass() && bad.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => fail(e),
        },
    }
}
