//! Kernel density of F2, the smallest Gaussian-envelope constant it needs
//! at each δ1, and the empirical tail with Wilson intervals.

use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::density::{fit_density_constant, gaussian_envelope, kde, tail_probability, KdeOptions, ScaledEstimate};
use shelab::experiments::sups::sample_f;
use shelab::experiments::Ctx;

fn main() -> shelab::Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::DensityF);
    cfg.mc.n_paths = 5000;
    let mut ctx = Ctx::in_memory(&cfg);
    for d in cfg.sweep.delta1.clone() {
        let f = sample_f(&mut ctx, d)?;
        let est = kde(&[&f.f2], &KdeOptions::undersmoothed())?;
        let scale = d.powf(0.25);
        let c = fit_density_constant(&ScaledEstimate { delta: d, scale, est: &est }, gaussian_envelope);
        let z: Vec<f64> = (1..=4).map(|k| k as f64 * scale).collect();
        let tail = tail_probability(&f.f2, &z);
        println!("δ1 = {d}: mass {:.4}  peak {:.3}  c {c:.3}", est.mass(), est.peak());
        for k in 0..z.len() {
            println!("  P(F2 > {:.3}) = {:.4}  [{:.4}, {:.4}]", z[k], tail.prob[k], tail.lo[k], tail.hi[k]);
        }
    }
    Ok(())
}
