//! Walsh integrals of u_A² against finite-difference noise, and the
//! negative moments of γ_A^{2,2}.

use std::io::Write;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::field::{FdWarmStart, FieldPath, SpaceTimeGrid};
use crate::malliavin::{build_ua2_from_trace, walsh_integral, AuxFieldSpec, Ua2Field};
use crate::seminorm::{gamma22, time_functional, CutoffSpec, YTrace};
use crate::stats::{fit_line, mean, variance};
use crate::suprema::WindowConfig;

use super::grr::{working_cutoff, working_log_c};
use super::sups::f_sampler;
use super::{require_paths, Check, Ctx};

/// A single draw may carry at most this share of Σ 1/γ before the
/// estimate of E[1/γ] is flagged as divergent.
pub const DIVERGENCE_SHARE: f64 = 0.01;
/// Largest decay of δ1·E[1/γ] per unit of ln δ1 still read as bounded.
pub const BOUNDED_SLOPE: f64 = -0.1;

/// Everything needed to build u_A² on the finite-difference window
/// [s0, s0+δ1] × [0,1] started from the exact law of the scheme at s0.
pub struct WalshSetup {
    pub sampler: FdWarmStart,
    pub window: WindowConfig,
    pub spec: AuxFieldSpec,
    pub cut: CutoffSpec,
    /// Scheme step of the window start, s0/dt.
    pub start_row: usize,
    /// The Y trace is evaluated every `hold` steps and held in between.
    pub hold: usize,
}

impl WalshSetup {
    pub fn new(cfg: &ExperimentConfig, delta1: f64, log_c: f64) -> Result<Self> {
        let dt = cfg.grid.walsh_dt;
        let m = (delta1 / dt).round() as usize;
        let window = cfg.window.with_deltas(m as f64 * dt, cfg.window.delta2);
        let g = SpaceTimeGrid::window(window.s0, window.s0 + window.delta1, m, 0.0, 1.0, cfg.grid.walsh_nx)?;
        Ok(Self {
            sampler: FdWarmStart::new(g, cfg.model.bc)?,
            spec: AuxFieldSpec::from_window(&window)?,
            cut: working_cutoff(log_c, window.delta1, &cfg.seminorm),
            start_row: (window.s0 / dt).round() as usize,
            hold: m.div_ceil(cfg.grid.window_steps).max(1),
            window,
        })
    }

    /// Y on every `hold`-th window time, held constant in between, so row
    /// k of u_A² only sees the path up to row k.
    pub fn held_trace(&self, path: &FieldPath, cfg: &ExperimentConfig) -> Result<YTrace> {
        let g = &path.grid;
        let j = g.pos_index(self.window.y0)?;
        let coarse: Vec<f64> = (0..=g.nt).step_by(self.hold).map(|i| path.values[[i, j]]).collect();
        let tr = time_functional(&coarse, g.time(0), g.dt() * self.hold as f64, cfg.seminorm.p0, cfg.seminorm.gamma0);
        Ok(YTrace {
            times: g.times(),
            log_y: (0..=g.nt).map(|i| tr.log_y[i / self.hold]).collect(),
            dropped: tr.dropped,
        })
    }

    /// u_A² with rows numbered from `first_row`.
    pub fn ua2(&self, path: &FieldPath, cfg: &ExperimentConfig, first_row: usize) -> Result<Ua2Field> {
        let tr = self.held_trace(path, cfg)?;
        Ok(build_ua2_from_trace(&tr, &self.cut, &self.spec.phi_delta1, path.grid.nx, first_row))
    }
}

/// ln c of the working cutoff of a config.
pub fn config_log_c(cfg: &ExperimentConfig) -> Result<f64> {
    working_log_c(&cfg.window, cfg.sweep.reference_delta1, cfg.sweep.kappa, cfg.grid.window_steps, &cfg.seminorm, cfg.model.bc)
}

pub fn run_walsh(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    require_paths(cfg.mc.n_paths, 100)?;
    let log_c = config_log_c(cfg)?;
    let mut rows_out = Vec::new();
    for &d1 in &cfg.sweep.delta1 {
        let setup = WalshSetup::new(cfg, d1, log_c)?;
        let stage = format!("walsh-{d1}");
        let seed = ctx.seed(&stage);
        let rows = ctx.store.rows(&stage, seed, cfg.mc.n_paths, |p| {
            let (path, noise) = setup.sampler.sample(seed, p);
            let u = setup.ua2(&path, cfg, 0)?;
            Ok(vec![walsh_integral(&noise, &u.adapted())?, u.field.norm_sq()])
        })?;
        let ints: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let norms: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let n = ints.len() as f64;
        let sq: Vec<f64> = ints.iter().map(|v| v * v).collect();
        let ms = mean(&sq);
        rows_out.push((setup.window.delta1, ms, variance(&sq) / n, mean(&ints), (variance(&ints) / n).sqrt(), mean(&norms)));
    }
    let x: Vec<f64> = rows_out.iter().map(|r| r.0.ln()).collect();
    // ln √E[I²]: delta-method variance of ½ ln of the mean square
    let y: Vec<f64> = rows_out.iter().map(|r| 0.5 * r.1.ln()).collect();
    let v: Vec<f64> = rows_out.iter().map(|r| 0.25 * r.2 / (r.1 * r.1)).collect();
    let fit = fit_line(&x, &y, Some(&v));
    let nfit = fit_line(&x, &rows_out.iter().map(|r| r.5.ln()).collect::<Vec<_>>(), None);
    let mut checks = vec![Check::new("‖δ(u_A²)‖_L² exponent in δ₁", (fit.slope - 0.75).abs() <= 0.1, fit.slope, "0.75 ± 0.10")];
    for r in &rows_out {
        checks.push(Check::new(format!("E[δ(u_A²)] = 0 at δ₁={}", r.0), r.3.abs() <= 3.0 * r.4, r.3 / r.4, "|z| ≤ 3").secondary());
        let iso = (r.1 - r.5) / r.2.sqrt();
        checks.push(Check::new(format!("isometry E[δ(u_A²)²] = E‖u_A²‖² at δ₁={}", r.0), iso.abs() <= 4.0, iso, "|z| ≤ 4").secondary());
    }
    checks.push(Check::new("E‖u_A²‖² exponent in δ₁", (nfit.slope - 1.5).abs() <= 0.1, nfit.slope, "1.50 ± 0.10").secondary());
    ctx.sink.write("walsh.csv", |o| {
        writeln!(o, "delta1,mean_square,mean_square_var,mean,stderr,mean_norm_sq")?;
        for r in &rows_out {
            writeln!(o, "{},{},{},{},{},{}", r.0, r.1, r.2, r.3, r.4, r.5)?;
        }
        Ok(())
    })?;
    Ok(checks)
}

pub fn run_gamma22(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    require_paths(cfg.mc.n_paths, 100)?;
    let sp = cfg.seminorm;
    let m = cfg.grid.window_steps;
    let log_c = config_log_c(cfg)?;
    let mut out = Vec::new();
    for &d1 in &cfg.sweep.delta1 {
        let sampler = f_sampler(cfg, d1)?;
        let cut = working_cutoff(log_c, d1, &sp);
        let stage = format!("gamma22-{d1}");
        let seed = ctx.seed(&stage);
        let rows = ctx.store.rows(&stage, seed, cfg.mc.n_paths, |p| {
            let d = sampler.draw(seed, p);
            let mut vals = d.raw()[..=m].to_vec();
            vals[0] = 0.0;
            let tr = time_functional(&vals, cfg.window.s0, d1 / m as f64, sp.p0, sp.gamma0);
            Ok(vec![gamma22(&tr, &cut)])
        })?;
        let inv: Vec<f64> = rows.iter().map(|r| d1 / r[0]).collect();
        let total: f64 = inv.iter().sum();
        let share = inv.iter().cloned().fold(0.0, f64::max) / total;
        let zero = rows.iter().filter(|r| r[0] <= 0.0).count();
        out.push((d1, mean(&inv), (variance(&inv) / inv.len() as f64).sqrt(), share, zero));
    }
    let x: Vec<f64> = out.iter().map(|r| r.0.ln()).collect();
    let y: Vec<f64> = out.iter().map(|r| r.1.ln()).collect();
    let v: Vec<f64> = out.iter().map(|r| (r.2 / r.1).powi(2)).collect();
    let fit = fit_line(&x, &y, Some(&v));
    let c = out.iter().map(|r| r.1 + 2.0 * r.2).fold(0.0, f64::max);
    let divergent = out.iter().any(|r| r.4 > 0 || !(r.3 <= DIVERGENCE_SHARE));
    let worst = out.iter().map(|r| r.3).fold(0.0, f64::max);
    let checks = vec![
        Check::new(
            "δ₁·E[1/γ₂₂] bounded across δ₁ (log-log slope)",
            fit.slope + 2.0 * fit.slope_se >= BOUNDED_SLOPE,
            fit.slope,
            format!("≥ {BOUNDED_SLOPE} within 2 SE"),
        ),
        Check::new("E[1/γ₂₂] divergence flag", !divergent, worst, format!("no γ₂₂ = 0, largest share ≤ {DIVERGENCE_SHARE}")),
        Check::new("one constant c with δ₁·E[1/γ₂₂] ≤ c", c.is_finite(), c, "finite").secondary(),
    ];
    ctx.sink.write("gamma22.csv", |o| {
        writeln!(o, "delta1,delta1_mean_inverse,stderr,largest_share,zero_count")?;
        for r in &out {
            writeln!(o, "{},{},{},{},{}", r.0, r.1, r.2, r.3, r.4)?;
        }
        Ok(())
    })?;
    Ok(checks)
}
