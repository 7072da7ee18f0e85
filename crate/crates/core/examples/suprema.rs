//! Samples (F1, F2) and M0 with the exact window samplers and prints
//! a few summary statistics.

use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::experiments::sups::{sample_f, sample_m0};
use shelab::experiments::Ctx;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> shelab::Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::DensityF);
    cfg.mc.n_paths = 2000;
    let mut ctx = Ctx::in_memory(&cfg);
    for d in [0.01, 0.04] {
        let f = sample_f(&mut ctx, d)?;
        println!("δ1 = {d}: E[F1] {:+.4}  E[F2] {:.4}  refined {}  uncertified {}", mean(&f.f1), mean(&f.f2), f.refined, f.uncertified);
    }
    let m = sample_m0(&mut ctx, 0.04, 0.1)?;
    println!("(δ1, δ2) = (0.04, 0.1): E[M0] {:.4}  δ = {:.3}", mean(&m.m0), m.delta());
    Ok(())
}
