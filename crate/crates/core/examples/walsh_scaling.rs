//! Walsh integral scaling and the γ22 moment check on a reduced sample.

use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::experiments::{execute, Ctx};

fn main() -> shelab::Result<()> {
    for kind in [ExperimentKind::WalshScaling, ExperimentKind::Gamma22Moments] {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.mc.n_paths = 500;
        let mut ctx = Ctx::in_memory(&cfg);
        println!("{}", kind.name());
        for c in execute(&mut ctx)? {
            println!("  {}", c.line());
        }
    }
    Ok(())
}
