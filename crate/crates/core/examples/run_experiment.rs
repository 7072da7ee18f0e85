//! Runs an experiment to disk, then verifies it through its manifest.
//! Usage: run_experiment [kind] [out-dir]

use std::path::PathBuf;

use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::experiments::{report, run};

fn main() -> shelab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "regularity".into());
    let kind = ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| shelab::Error::Config(format!("unknown experiment {name}")))?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(format!("shelab-{name}")));
    let cfg = ExperimentConfig::preset(kind);
    let outcome = run(&cfg, &out, false)?;
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    let (manifest, _, bad) = report(&out)?;
    println!("{} artifacts in {}, {} mismatching, {:.1}s", manifest.artifacts.len(), out.display(), bad.len(), manifest.wall_clock_seconds);
    Ok(())
}
