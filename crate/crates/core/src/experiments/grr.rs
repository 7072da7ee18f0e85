//! GRR implication checks and the scaling of E[Y] and E[Ȳ].

use std::io::Write;

use crate::error::Result;
use crate::field::{SpaceTimeGrid, WindowSampler};
use crate::green::{covariance, rect_increment_variance, BoundaryCondition, KernelParams};
use crate::seminorm::{
    expected_time_functional, gaussian_even_moment, grr_rect_log_c, grr_rect_verdicts, grr_time_log_c, grr_time_verdicts, rect_functional, time_functional,
    CutoffSpec, SeminormParams, Verdict,
};
use crate::stats::{fit_line, mean, variance};
use crate::suprema::WindowConfig;

use super::sups::f_sampler;
use super::{require_paths, Check, Ctx};

/// Var(u(t_i, y0) − u(t_j, y0)) on the times s0 + i·δ1/m, i = 0..=m.
pub fn column_increment_variances(w: &WindowConfig, delta1: f64, m: usize, bc: BoundaryCondition, params: &KernelParams) -> Result<Vec<Vec<f64>>> {
    let t: Vec<f64> = (0..=m).map(|i| w.s0 + delta1 * i as f64 / m as f64).collect();
    let mut c = vec![vec![0.0; m + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=i {
            c[i][j] = covariance(t[i], w.y0, t[j], w.y0, bc, params)?;
            c[j][i] = c[i][j];
        }
    }
    Ok((0..=m).map(|i| (0..=m).map(|j| c[i][i] + c[j][j] - 2.0 * c[i][j]).collect()).collect())
}

/// Exact E[Y_{s0+δ1}] of the discrete functional on m steps.
pub fn expected_y(w: &WindowConfig, delta1: f64, m: usize, sp: &SeminormParams, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    let v = column_increment_variances(w, delta1, m, bc, params)?;
    let e = expected_time_functional(m + 1, delta1 / m as f64, sp.p0, sp.gamma0, |i, j| v[i][j]);
    Ok(e[m])
}

/// ln c of the working cutoff: with a = δ1^{1/4}, R = κ·E[Y_{s0+δ1}] at the
/// reference δ1. Since R and E[Y] then scale alike in δ1, ψ(Y) acts at a
/// comparable level for every δ1.
pub fn working_log_c(w: &WindowConfig, reference: f64, kappa: f64, m: usize, sp: &SeminormParams, bc: BoundaryCondition) -> Result<f64> {
    let ey = expected_y(w, reference, m, sp, bc, &KernelParams::default())?;
    let q = 2.0 * sp.p0 as f64;
    Ok((kappa * ey).ln() - q * 0.25 * reference.ln() + 0.5 * (sp.gamma0 - 4.0) * reference.ln())
}

/// Working cutoff at δ1 with a = δ1^{1/4}.
pub fn working_cutoff(log_c: f64, delta1: f64, sp: &SeminormParams) -> CutoffSpec {
    CutoffSpec::time(log_c, delta1.powf(0.25), delta1, sp)
}

fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect()
}

/// Window of the Ȳ functional: [0, Δ•] × [y0, y0+Δ*] on mt × mx steps.
pub fn rect_grid(w: &WindowConfig, mt: usize, mx: usize) -> Result<SpaceTimeGrid> {
    SpaceTimeGrid::window(0.0, w.delta_bullet(), mt, w.y0, w.y0 + w.delta_star(), mx)
}

/// Exact E[Ȳ_{Δ•}] = E[Y₀] + E[Y₁] of the discrete functional.
pub fn expected_ybar(w: &WindowConfig, mt: usize, mx: usize, sp: &SeminormParams, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    let g = rect_grid(w, mt, mx)?;
    let (ht, hx) = (g.dt(), g.dx());
    let t: Vec<f64> = (0..=mt).map(|i| g.time(i)).collect();
    let x: Vec<f64> = (0..=mx).map(|j| g.pos(j)).collect();
    let mut c = vec![vec![0.0; mt + 1]; mt + 1];
    for i in 0..=mt {
        for j in 0..=i {
            c[i][j] = covariance(t[i], x[0], t[j], x[0], bc, params)?;
            c[j][i] = c[i][j];
        }
    }
    let e0 = expected_time_functional(mt + 1, ht, sp.p0, sp.gamma0, |i, j| c[i][i] + c[j][j] - 2.0 * c[i][j])[mt];
    let (g1, g2) = (sp.gamma1.unwrap_or(0.0), sp.gamma2.unwrap_or(0.0));
    let q = 2.0 * sp.p0 as f64;
    let mom = gaussian_even_moment(sp.p0);
    let wt = trapezoid(mt + 1, ht);
    let wx = trapezoid(mx + 1, hx);
    let mut e1 = 0.0;
    for i in 1..=mt {
        for j in 0..i {
            let kt = (ht * (i - j) as f64).powf(-(1.0 + q * g1));
            for l in 1..=mx {
                for k in 0..l {
                    let kx = (hx * (l - k) as f64).powf(-(1.0 + q * g2));
                    let v = rect_increment_variance(t[i], t[j], x[l], x[k], bc, params)?;
                    e1 += 4.0 * wt[i] * wt[j] * wx[k] * wx[l] * kt * kx * mom * v.powi(sp.p0 as i32);
                }
            }
        }
    }
    Ok(e0 + e1)
}

/// Verdict tallies of one path at one level a.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub pass: usize,
    pub vacuous: usize,
    pub fail: usize,
    /// Grid r with sup > a.
    pub exceed: usize,
    /// Grid r with sup > a and the premise true.
    pub exceed_premise: usize,
}

impl Tally {
    fn from(verdicts: &[Verdict], sups: &[f64], a: f64) -> Self {
        let mut t = Tally::default();
        for (v, s) in verdicts.iter().zip(sups) {
            match v {
                Verdict::Pass => t.pass += 1,
                Verdict::Vacuous => t.vacuous += 1,
                Verdict::Fail => t.fail += 1,
            }
            if *s > a {
                t.exceed += 1;
                if *v == Verdict::Fail {
                    t.exceed_premise += 1;
                }
            }
        }
        t
    }

    fn row(&self) -> [f64; 5] {
        [self.pass as f64, self.vacuous as f64, self.fail as f64, self.exceed as f64, self.exceed_premise as f64]
    }
}

fn running_sup(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut s = 0.0f64;
    v.map(|x| {
        s = s.max(x);
        s
    })
    .collect()
}

/// Smallest ln c at which some grid r of the trace would violate the
/// implication: min_r ln Y_r + offset − q·ln sup_r, with offset the
/// δ-dependent part of ln R.
fn critical_log_c(log_y: &[f64], sups: &[f64], offset: f64, q: f64) -> f64 {
    log_y
        .iter()
        .zip(sups)
        .filter(|(_, s)| **s > 0.0)
        .map(|(ly, s)| ly + offset - q * s.ln())
        .fold(f64::INFINITY, f64::min)
}

const KAPPAS: [f64; 3] = [0.1, 1.0, 10.0];

pub fn run(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    require_paths(cfg.mc.n_paths, 100)?;
    let bc = cfg.model.bc;
    let kp = KernelParams::default();
    let sp = cfg.seminorm;
    let spr = cfg.seminorm_rect;
    let m = cfg.grid.window_steps;
    let q = 2.0 * sp.p0 as f64;
    let log_c = grr_time_log_c(&sp);
    let mut checks = Vec::new();
    let mut time_rows = Vec::new();
    let mut crit_time = f64::INFINITY;
    let mut total = Tally::default();
    let mut consistent = true;
    let mut ey = Vec::new();
    let mut mc = Vec::new();
    for &d1 in &cfg.sweep.delta1 {
        let e = expected_y(&cfg.window, d1, m, &sp, bc, &kp)?;
        ey.push(e);
        // a with R = κ·E[Y] for each κ
        let levels: Vec<f64> = KAPPAS.iter().map(|k| (((k * e).ln() - log_c + 0.5 * (sp.gamma0 - 4.0) * d1.ln()) / q).exp()).collect();
        let sampler = f_sampler(cfg, d1)?;
        let stage = format!("grr-time-{d1}");
        let seed = ctx.seed(&stage);
        let offset = -0.5 * (sp.gamma0 - 4.0) * d1.ln();
        let rows = ctx.store.rows(&stage, seed, cfg.mc.n_paths, |p| {
            let d = sampler.draw(seed, p);
            let ubar = &d.raw()[..=m];
            let mut vals = ubar.to_vec();
            vals[0] = 0.0;
            let tr = time_functional(&vals, cfg.window.s0, d1 / m as f64, sp.p0, sp.gamma0);
            let sups = running_sup(vals.iter().map(|v| v.abs()));
            let cut = |a: f64| CutoffSpec::time(log_c, a, d1, &sp);
            let mut row = vec![tr.last_log(), critical_log_c(&tr.log_y, &sups, -offset, q)];
            for &a in &levels {
                let v = grr_time_verdicts(&tr, &sups, &cut(a), a);
                row.extend(Tally::from(&v, &sups, a).row());
            }
            Ok(row)
        })?;
        let ys: Vec<f64> = rows.iter().map(|r| r[0].exp()).collect();
        mc.push((mean(&ys), (variance(&ys) / ys.len() as f64).sqrt()));
        crit_time = crit_time.min(rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min));
        for (k, &a) in levels.iter().enumerate() {
            let mut t = Tally::default();
            for r in &rows {
                let c = &r[2 + 5 * k..7 + 5 * k];
                t.pass += c[0] as usize;
                t.vacuous += c[1] as usize;
                t.fail += c[2] as usize;
                t.exceed += c[3] as usize;
                t.exceed_premise += c[4] as usize;
            }
            consistent &= t.fail == t.exceed_premise && t.pass + t.vacuous + t.fail == rows.len() * (m + 1);
            total.pass += t.pass;
            total.vacuous += t.vacuous;
            total.fail += t.fail;
            time_rows.push((d1, a, t));
        }
    }

    // rectangle variant on the configured window
    let w = cfg.window;
    let (mt, mx) = (cfg.grid.rect_time_steps, cfg.grid.rect_space_steps);
    let log_cr = grr_rect_log_c(&spr)?;
    let eyb = expected_ybar(&w, mt, mx, &spr, bc, &kp)?;
    let qr = 2.0 * spr.p0 as f64;
    let rect_offset = (4.0 - spr.gamma0) * w.delta().ln();
    let rect_levels: Vec<f64> = KAPPAS.iter().map(|k| (((k * eyb).ln() - log_cr - rect_offset) / qr).exp()).collect();
    let rs = WindowSampler::new(rect_grid(&w, mt, mx)?, bc, &kp)?;
    let stage = "grr-rect";
    let seed = ctx.seed(stage);
    let rows = ctx.store.rows(stage, seed, cfg.mc.n_paths, |p| {
        let path = rs.sample(seed, p);
        let tr = rect_functional(&path.values, 0.0, path.grid.dt(), path.grid.dx(), 0, &spr)?;
        let sups = running_sup(path.values.rows().into_iter().map(|r| r.iter().fold(0.0f64, |s, v| s.max(v.abs()))));
        let logs: Vec<f64> = (0..tr.times.len()).map(|k| tr.log_total(k)).collect();
        let mut row = vec![critical_log_c(&logs, &sups, -rect_offset, qr)];
        for &a in &rect_levels {
            let cut = CutoffSpec::rect(log_cr, a, w.delta(), &spr);
            let v = grr_rect_verdicts(&tr, &sups, &cut, a);
            row.extend(Tally::from(&v, &sups, a).row());
        }
        Ok(row)
    })?;
    let crit_rect = rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let mut rect_total = Tally::default();
    let mut rect_rows = Vec::new();
    for (k, &a) in rect_levels.iter().enumerate() {
        let mut t = Tally::default();
        for r in &rows {
            let c = &r[1 + 5 * k..6 + 5 * k];
            t.pass += c[0] as usize;
            t.vacuous += c[1] as usize;
            t.fail += c[2] as usize;
            t.exceed += c[3] as usize;
            t.exceed_premise += c[4] as usize;
        }
        consistent &= t.fail == t.exceed_premise && t.pass + t.vacuous + t.fail == rows.len() * (mt + 1);
        rect_total.pass += t.pass;
        rect_total.vacuous += t.vacuous;
        rect_total.fail += t.fail;
        rect_rows.push((a, t));
    }

    checks.push(Check::new("GRR time variant: FAIL verdicts", total.fail == 0, total.fail as f64, "0"));
    checks.push(Check::new("GRR rectangle variant: FAIL verdicts", rect_total.fail == 0, rect_total.fail as f64, "0"));
    checks.push(Check::new("GRR contrapositive accounting", consistent, f64::from(u8::from(consistent)), "sup > a only with premise false"));
    checks.push(Check::new("GRR time: ln c below empirical critical ln c", log_c < crit_time, crit_time - log_c, "> 0"));
    checks.push(Check::new("GRR rectangle: ln c̄ below empirical critical ln c̄", log_cr < crit_rect, crit_rect - log_cr, "> 0"));
    checks.push(Check::new("GRR time: non-vacuous PASS verdicts", total.pass > 0, total.pass as f64, "> 0").secondary());

    // scaling of E[Y] and E[Ȳ]
    let x: Vec<f64> = cfg.sweep.delta1.iter().map(|d| d.ln()).collect();
    let fit = fit_line(&x, &ey.iter().map(|e| e.ln()).collect::<Vec<_>>(), None);
    let target = 2.0 + (sp.p0 as f64 - sp.gamma0) / 2.0;
    checks.push(Check::new("E[Y] exponent in δ₁", (fit.slope - target).abs() <= 0.15, fit.slope, format!("{target} ± 0.15")));
    let lv: Vec<f64> = mc.iter().map(|(m, s)| (s / m).powi(2)).collect();
    let mc_fit = fit_line(&x, &mc.iter().map(|(m, _)| m.ln()).collect::<Vec<_>>(), Some(&lv));
    checks.push(Check::new("Monte Carlo E[Y] exponent in δ₁", (mc_fit.slope - target).abs() <= 0.15, mc_fit.slope, format!("{target} ± 0.15")).secondary());
    let mut eybar = Vec::new();
    for &d in &cfg.sweep.rect_delta {
        let wd = w.with_deltas((d / 2.0).powi(2), d / 2.0);
        eybar.push(expected_ybar(&wd, mt, mx, &spr, bc, &kp)?);
    }
    let xr: Vec<f64> = cfg.sweep.rect_delta.iter().map(|d| d.ln()).collect();
    let rfit = fit_line(&xr, &eybar.iter().map(|e| e.ln()).collect::<Vec<_>>(), None);
    let rtarget = 4.0 + spr.p0 as f64 - spr.gamma0;
    checks.push(Check::new("E[Ȳ] exponent in δ", (rfit.slope - rtarget).abs() <= 0.3, rfit.slope, format!("{rtarget} ± 0.3")));

    ctx.sink.write("grr_time.csv", |o| {
        writeln!(o, "delta1,a,pass,vacuous,fail,sup_exceeds,sup_exceeds_with_premise")?;
        for (d, a, t) in &time_rows {
            writeln!(o, "{d},{a},{},{},{},{},{}", t.pass, t.vacuous, t.fail, t.exceed, t.exceed_premise)?;
        }
        Ok(())
    })?;
    ctx.sink.write("grr_rect.csv", |o| {
        writeln!(o, "delta,abar,pass,vacuous,fail,sup_exceeds,sup_exceeds_with_premise")?;
        for (a, t) in &rect_rows {
            writeln!(o, "{},{a},{},{},{},{},{}", w.delta(), t.pass, t.vacuous, t.fail, t.exceed, t.exceed_premise)?;
        }
        Ok(())
    })?;
    ctx.sink.write("y_scaling.csv", |o| {
        writeln!(o, "functional,delta,exact_mean,mc_mean,mc_stderr")?;
        for (k, d) in cfg.sweep.delta1.iter().enumerate() {
            writeln!(o, "Y,{d},{},{},{}", ey[k], mc[k].0, mc[k].1)?;
        }
        for (k, d) in cfg.sweep.rect_delta.iter().enumerate() {
            writeln!(o, "Ybar,{d},{},,", eybar[k])?;
        }
        Ok(())
    })?;
    Ok(checks)
}
