//! The time seminorm Y along one path next to its exact mean, the working
//! cutoff R and γ22, with sup|ū| beside the level a = δ1^{1/4}.

use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::experiments::grr::{expected_y, working_cutoff, working_log_c};
use shelab::experiments::sups::f_sampler;
use shelab::green::KernelParams;
use shelab::seminorm::{gamma22, time_functional};

fn main() -> shelab::Result<()> {
    let cfg = ExperimentConfig::preset(ExperimentKind::GrrCheck);
    let (w, sp, bc) = (cfg.window, cfg.seminorm, cfg.model.bc);
    let m = cfg.grid.window_steps;
    let log_c = working_log_c(&w, cfg.sweep.reference_delta1, cfg.sweep.kappa, m, &sp, bc)?;
    for d in cfg.sweep.delta1.clone() {
        let ey = expected_y(&w, d, m, &sp, bc, &KernelParams::default())?;
        let cut = working_cutoff(log_c, d, &sp);
        let sampler = f_sampler(&cfg, d)?;
        // Entry 0 of an anchored draw is u(s0, y0); the rest are increments.
        let mut ubar = sampler.draw(cfg.mc.seed, 0).raw()[..=m].to_vec();
        ubar[0] = 0.0;
        let trace = time_functional(&ubar, w.s0, d / m as f64, sp.p0, sp.gamma0);
        let a = d.powf(0.25);
        let sup = ubar.iter().map(|v| v.abs()).fold(0.0, f64::max);
        println!(
            "δ1 = {d}: ln E[Y] {:.3}  ln Y {:.3}  ln R {:.3}  sup|ū| {sup:.4} vs a {a:.4}  γ22 {:.3e}",
            ey.ln(),
            trace.last_log(),
            cut.log_r,
            gamma22(&trace, &cut)
        );
    }
    Ok(())
}
