//! Variance exponents of time and space increments over spectral paths,
//! and the deterministic rectangular-increment bound.

use std::io::Write;

use crate::density::{exponent_fit, probe_row, rect_bound_fit, ExponentFit, RegularityProbe, MIN_REGULARITY_PATHS, RECT_SLACK};
use crate::error::Result;
use crate::field::{SpaceTimeGrid, SpectralSampler};
use crate::green::{covariance, BoundaryCondition, KernelParams};
use crate::stats::fit_line;

use super::{require_paths, Check, Ctx};

pub const TIME_LAGS: [usize; 4] = [1, 2, 4, 8];
pub const SPACE_LAGS: [usize; 4] = [1, 2, 3, 4];

/// Spectral window ending at T_reg with the step of the full grid, so
/// only the last few steps are simulated from the exact marginal.
pub fn regularity_grid(nt: usize, nx: usize, t_reg: f64) -> Result<SpaceTimeGrid> {
    let dt = t_reg / nt as f64;
    let n = TIME_LAGS[TIME_LAGS.len() - 1];
    SpaceTimeGrid::window(t_reg - n as f64 * dt, t_reg, n, 0.0, 1.0, nx)
}

/// Interior columns from nx/4 to 3nx/4.
pub fn probe(nx: usize) -> RegularityProbe {
    RegularityProbe {
        base_time: 0,
        columns: (nx / 4..=3 * nx / 4 - SPACE_LAGS[SPACE_LAGS.len() - 1]).collect(),
        time_lags: TIME_LAGS.to_vec(),
        space_lags: SPACE_LAGS.to_vec(),
    }
}

/// Slopes of the exact increment variances on the same probe, the oracle
/// for the MC exponents.
pub fn exact_slopes(g: &SpaceTimeGrid, pr: &RegularityProbe, bc: BoundaryCondition, params: &KernelParams) -> Result<(f64, f64)> {
    let t0 = g.time(pr.base_time);
    let var = |t: f64, x: f64, s: f64, y: f64| -> Result<f64> {
        Ok(covariance(t, x, t, x, bc, params)? + covariance(s, y, s, y, bc, params)? - 2.0 * covariance(t, x, s, y, bc, params)?)
    };
    let nc = pr.columns.len() as f64;
    let mut tv = Vec::new();
    for &l in &pr.time_lags {
        let mut v = 0.0;
        for &c in &pr.columns {
            v += var(g.time(pr.base_time + l), g.pos(c), t0, g.pos(c))? / nc;
        }
        tv.push(v.ln());
    }
    let mut sv = Vec::new();
    for &l in &pr.space_lags {
        let mut v = 0.0;
        for &c in &pr.columns {
            v += var(t0, g.pos(c + l), t0, g.pos(c))? / nc;
        }
        sv.push(v.ln());
    }
    let tx: Vec<f64> = pr.time_lags.iter().map(|&l| (l as f64 * g.dt()).ln()).collect();
    let sx: Vec<f64> = pr.space_lags.iter().map(|&l| (l as f64 * g.dx()).ln()).collect();
    Ok((fit_line(&tx, &tv, None).slope, fit_line(&sx, &sv, None).slope))
}

fn write_fit(o: &mut Vec<u8>, kind: &str, f: &ExponentFit) -> std::io::Result<()> {
    for (l, v) in f.lags.iter().zip(&f.variances) {
        writeln!(o, "{kind},{l},{v},{},{}", f.fit.slope, f.fit.slope_se)?;
    }
    Ok(())
}

pub fn run(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    require_paths(cfg.mc.n_paths, MIN_REGULARITY_PATHS)?;
    let bc = cfg.model.bc;
    let params = KernelParams::default();
    let g = regularity_grid(cfg.grid.nt, cfg.grid.nx, cfg.grid.t_regularity)?;
    let pr = probe(cfg.grid.nx);
    let sampler = SpectralSampler::new(g, bc, cfg.grid.truncation)?;
    let seed = ctx.seed("regularity");
    let rows = ctx.store.rows("regularity", seed, cfg.mc.n_paths, |p| Ok(probe_row(&sampler.sample(seed, p), &pr)))?;
    let k = pr.time_lags.len();
    let time = exponent_fit(
        pr.time_lags.iter().map(|&l| l as f64 * g.dt()).collect(),
        &rows.iter().map(|r| r[..k].to_vec()).collect::<Vec<_>>(),
    );
    let space = exponent_fit(
        pr.space_lags.iter().map(|&l| l as f64 * g.dx()).collect(),
        &rows.iter().map(|r| r[k..].to_vec()).collect::<Vec<_>>(),
    );
    let (et, es) = exact_slopes(&g, &pr, bc, &params)?;

    let bases = [(0.1, 0.2), (0.3, 0.5), (0.5, 0.7), (0.8, 0.4)];
    let dts: Vec<f64> = (0..9).map(|i| 1e-5 * 4f64.powi(i)).collect();
    let dxs: Vec<f64> = (0..7).map(|i| 1e-3 * 2.5f64.powi(i)).collect();
    let rect = rect_bound_fit(bc, &params, &bases, &dts, &dxs, (1e-3, 1e-2))?;

    ctx.sink.write("regularity.csv", |o| {
        writeln!(o, "kind,lag,mean_square,slope,slope_se")?;
        write_fit(o, "time", &time)?;
        write_fit(o, "space", &space)?;
        Ok(())
    })?;
    ctx.sink.write("rect_bound.json", |o| Ok(serde_json::to_writer_pretty(o, &rect)?))?;

    Ok(vec![
        Check::new("time-increment variance slope", (time.fit.slope - 0.5).abs() <= 0.05, time.fit.slope, "0.50 ± 0.05"),
        Check::new("space-increment variance slope", (space.fit.slope - 1.0).abs() <= 0.1, space.fit.slope, "1.00 ± 0.10"),
        Check::new(
            "rectangular bound: C fitted on coarse lags holds on fine lags",
            rect.pass,
            rect.fine_max_ratio / rect.fitted_c,
            format!("≤ {}", 1.0 + RECT_SLACK),
        ),
        Check::new("exact time-variance slope on the probe", (et - 0.5).abs() <= 0.05, et, "0.50 ± 0.05").secondary(),
        Check::new("exact space-variance slope on the probe", (es - 1.0).abs() <= 0.1, es, "1.00 ± 0.10").secondary(),
    ])
}
