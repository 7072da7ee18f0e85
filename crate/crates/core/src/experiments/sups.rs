//! Exact samples of (F1, F2) and M0 over the δ sweeps, and the density,
//! tail, positivity and mean-scaling checks built on them.

use std::io::Write;

use crate::config::ExperimentConfig;
use crate::density::{
    mean_sup_scaling, verify_density_bound_f, verify_density_bound_m0, verify_tail_bound, BoundOptions, BoundReport, DeltaSamples, Theorem, TailCurve,
    MIN_BOUND_SAMPLES,
};
use crate::error::Result;
use crate::field::{SpaceTimeGrid, WindowSampler};
use crate::green::KernelParams;
use crate::stats::mean;
use crate::suprema::{certify_positive, f2_refinement_offsets, m0_refinement_points};

use super::{require_paths, Check, Ctx};

/// Refinement positions per time level of the M0 certificate.
const M0_REFINE_POSITIONS: usize = 4;
/// Relative change of a mean supremum between the two resolutions that
/// raises the non-convergence flag.
pub const RESOLUTION_TOLERANCE: f64 = 0.05;
/// Rescaled thresholds z/scale of the tail checks.
const TAIL_POINTS: usize = 40;

/// Anchored exact sampler of u(·, y0) on [s0, s0+δ1], with the conditional
/// refinement offsets of the F2 positivity certificate.
pub fn f_sampler(cfg: &ExperimentConfig, delta1: f64) -> Result<WindowSampler> {
    let w = &cfg.window;
    let m = cfg.grid.window_steps;
    let g = SpaceTimeGrid::window(w.s0, w.s0 + delta1, m, w.y0, w.y0, 0)?;
    let mut s = WindowSampler::anchored(g, cfg.model.bc, &KernelParams::default())?;
    s.add_points(&f2_refinement_offsets(delta1, m, cfg.grid.refinement_levels))?;
    Ok(s)
}

/// Exact sampler of u on [0, δ1] × [y0, y0+δ2] with refinement points near t = 0.
pub fn m0_sampler(cfg: &ExperimentConfig, delta1: f64, delta2: f64) -> Result<WindowSampler> {
    let w = cfg.window.with_deltas(delta1, delta2);
    let (mt, mx) = (cfg.grid.m0_time_steps, cfg.grid.m0_space_steps);
    let g = SpaceTimeGrid::window(0.0, delta1, mt, w.y0, w.y0 + delta2, mx)?;
    let mut s = WindowSampler::new(g, cfg.model.bc, &KernelParams::default())?;
    s.add_points(&m0_refinement_points(&w, mt, cfg.grid.refinement_levels, M0_REFINE_POSITIONS))?;
    Ok(s)
}

/// (F1, F2) samples at one δ1. `f2_coarse` uses every other grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct FSet {
    pub delta1: f64,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f2_coarse: Vec<f64>,
    /// Paths whose grid maximum was 0 and needed refinement points.
    pub refined: usize,
    /// Paths with F2 = 0 even after refinement.
    pub uncertified: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct M0Set {
    pub delta1: f64,
    pub delta2: f64,
    pub m0: Vec<f64>,
    pub m0_coarse: Vec<f64>,
    pub refined: usize,
    pub uncertified: usize,
}

impl M0Set {
    pub fn delta(&self) -> f64 {
        self.delta1.sqrt() + self.delta2
    }
}

fn certified(rows: &[Vec<f64>], col: usize) -> (usize, usize) {
    let refined = rows.iter().filter(|r| r[col] >= 0.0).count();
    let failed = rows.iter().filter(|r| r[col] == -2.0).count();
    (refined + failed, failed)
}

pub fn sample_f(ctx: &mut Ctx<'_>, delta1: f64) -> Result<FSet> {
    let cfg = ctx.cfg;
    let s = f_sampler(cfg, delta1)?;
    let m = cfg.grid.window_steps;
    let extras = s.extra_len();
    let stage = format!("f-{delta1}");
    let seed = ctx.seed(&stage);
    let rows = ctx.store.rows(&stage, seed, cfg.mc.n_paths, |p| {
        let mut d = s.draw(seed, p);
        let raw = d.raw();
        let f1 = raw[0];
        let f2 = raw[1..=m].iter().fold(0.0f64, |a, b| a.max(*b));
        let coarse = raw[2..=m].iter().step_by(2).fold(0.0f64, |a, b| a.max(*b));
        let (f2, tag) = if f2 > 0.0 {
            (f2, -1.0)
        } else {
            match certify_positive(&mut d, extras) {
                Some(k) => (d.extra(k), k as f64),
                None => (0.0, -2.0),
            }
        };
        Ok(vec![f1, f2, coarse, tag])
    })?;
    let (refined, uncertified) = certified(&rows, 3);
    Ok(FSet {
        delta1,
        f1: rows.iter().map(|r| r[0]).collect(),
        f2: rows.iter().map(|r| r[1]).collect(),
        f2_coarse: rows.iter().map(|r| r[2]).collect(),
        refined,
        uncertified,
    })
}

pub fn sample_m0(ctx: &mut Ctx<'_>, delta1: f64, delta2: f64) -> Result<M0Set> {
    let cfg = ctx.cfg;
    let s = m0_sampler(cfg, delta1, delta2)?;
    let (mt, mx) = (cfg.grid.m0_time_steps, cfg.grid.m0_space_steps);
    let extras = s.extra_len();
    let stage = format!("m0-{delta1}-{delta2}");
    let seed = ctx.seed(&stage);
    let rows = ctx.store.rows(&stage, seed, cfg.mc.n_paths, |p| {
        let mut d = s.draw(seed, p);
        let raw = d.raw();
        let m0 = raw.iter().fold(0.0f64, |a, b| a.max(*b));
        let mut coarse = 0.0f64;
        for i in (0..=mt).step_by(2) {
            for j in (0..=mx).step_by(2) {
                coarse = coarse.max(raw[i * (mx + 1) + j]);
            }
        }
        let (m0, tag) = if m0 > 0.0 {
            (m0, -1.0)
        } else {
            match certify_positive(&mut d, extras) {
                Some(k) => (d.extra(k), k as f64),
                None => (0.0, -2.0),
            }
        };
        Ok(vec![m0, coarse, tag])
    })?;
    let (refined, uncertified) = certified(&rows, 2);
    Ok(M0Set {
        delta1,
        delta2,
        m0: rows.iter().map(|r| r[0]).collect(),
        m0_coarse: rows.iter().map(|r| r[1]).collect(),
        refined,
        uncertified,
    })
}

pub fn f_sets(ctx: &mut Ctx<'_>) -> Result<Vec<FSet>> {
    let d = ctx.cfg.sweep.delta1.clone();
    d.into_iter().map(|d1| sample_f(ctx, d1)).collect()
}

pub fn m0_sets(ctx: &mut Ctx<'_>) -> Result<Vec<M0Set>> {
    let d = ctx.cfg.sweep.m0.clone();
    d.into_iter().map(|[a, b]| sample_m0(ctx, a, b)).collect()
}

fn f_samples(sets: &[FSet]) -> Vec<DeltaSamples> {
    sets.iter()
        .map(|s| DeltaSamples {
            delta: s.delta1,
            scale: s.delta1.powf(0.25),
            columns: vec![s.f1.clone(), s.f2.clone()],
        })
        .collect()
}

fn m0_samples(sets: &[M0Set]) -> Vec<DeltaSamples> {
    sets.iter()
        .map(|s| DeltaSamples {
            delta: s.delta(),
            scale: s.delta().sqrt(),
            columns: vec![s.m0.clone()],
        })
        .collect()
}

/// Index of the sample set whose δ1 is the configured reference δ1.
fn reference_index(deltas1: impl Iterator<Item = f64>, reference: f64) -> Result<usize> {
    deltas1
        .enumerate()
        .find(|(_, d)| (d - reference).abs() <= 1e-12 * reference)
        .map(|(k, _)| k)
        .ok_or_else(|| crate::error::Error::Config(format!("reference δ₁ = {reference} is not in the sweep")))
}

fn bound_checks(label: &str, rep: &BoundReport) -> Vec<Check> {
    let failures: usize = rep.summaries.iter().map(|s| s.failures).sum();
    let ratio = if rep.collapse_peak > 0.0 { rep.collapse_distance / rep.collapse_peak } else { f64::INFINITY };
    vec![
        Check::new(format!("{label}: density bound with c fitted at the reference δ₁"), rep.pass, failures as f64, "0 lattice failures"),
        Check::new(format!("{label}: scaling collapse beyond MC slack / peak"), rep.collapse_pass(), ratio, format!("≤ {}", rep.collapse_tolerance)),
        Check::new(
            format!("{label}: raw scaling collapse / peak"),
            rep.collapse_raw_distance <= rep.collapse_tolerance * rep.collapse_peak,
            rep.collapse_raw_distance / rep.collapse_peak,
            format!("≤ {}", rep.collapse_tolerance),
        )
        .secondary(),
    ]
}

fn resolution_check(label: &str, fine: &[f64], coarse: &[f64]) -> Check {
    let (a, b) = (mean(fine), mean(coarse));
    let rel = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
    Check::new(format!("{label}: two-resolution mean change"), rel <= RESOLUTION_TOLERANCE, rel, format!("≤ {RESOLUTION_TOLERANCE}")).secondary()
}

/// Density bound, collapse, positivity and mean scaling for (F1, F2).
pub fn analyze_density_f(ctx: &mut Ctx<'_>, sets: &[FSet]) -> Result<Vec<Check>> {
    let samples = f_samples(sets);
    let opts = BoundOptions {
        reference: Some(reference_index(sets.iter().map(|s| s.delta1), ctx.cfg.sweep.reference_delta1)?),
        ..BoundOptions::default()
    };
    let (rep, ests) = verify_density_bound_f(&samples, &opts)?;
    let mut checks = bound_checks("(F1,F2)", &rep);
    if let Some(r) = &rep.refined {
        let f: usize = r.summaries.iter().map(|s| s.failures).sum();
        checks.push(Check::new("(F1,F2): |z1|-refined envelope", r.pass, f as f64, "0 lattice failures").secondary());
    }
    let nonpos: usize = sets.iter().map(|s| s.f2.iter().filter(|v| **v <= 0.0).count()).sum();
    let total: usize = sets.iter().map(|s| s.f2.len()).sum();
    checks.push(Check::new(format!("F2 > 0 in {total} samples"), nonpos == 0, nonpos as f64, "0 non-positive"));
    let means = mean_sup_scaling(&sets.iter().map(|s| s.delta1).collect::<Vec<_>>(), &sets.iter().map(|s| s.f2.clone()).collect::<Vec<_>>())?;
    checks.push(Check::new("E[F2] slope in δ₁", means.within(0.25, 0.03), means.fit.slope, "0.25 ± 0.03"));
    for s in sets {
        checks.push(resolution_check(&format!("F2 at δ₁={}", s.delta1), &s.f2, &s.f2_coarse));
    }
    for (s, e) in sets.iter().zip(&ests) {
        ctx.sink.write(&format!("density_f_{}.csv", s.delta1), |o| e.write_csv(o))?;
    }
    ctx.sink.write("bound_f.json", |o| rep.write_json(o))?;
    ctx.sink.write("mean_f2.csv", |o| {
        writeln!(o, "delta1,mean,stderr,refined,uncertified")?;
        for (k, s) in sets.iter().enumerate() {
            writeln!(o, "{},{},{},{},{}", s.delta1, means.means[k], means.mean_se[k], s.refined, s.uncertified)?;
        }
        Ok(())
    })?;
    Ok(checks)
}

/// Density bound, collapse, positivity and mean scaling for M0.
pub fn analyze_density_m0(ctx: &mut Ctx<'_>, sets: &[M0Set]) -> Result<Vec<Check>> {
    let samples = m0_samples(sets);
    let opts = BoundOptions {
        reference: Some(reference_index(sets.iter().map(|s| s.delta1), ctx.cfg.sweep.reference_delta1)?),
        ..BoundOptions::default()
    };
    let (rep, ests) = verify_density_bound_m0(&samples, &opts)?;
    let mut checks = bound_checks("M0", &rep);
    let nonpos: usize = sets.iter().map(|s| s.m0.iter().filter(|v| **v <= 0.0).count()).sum();
    let total: usize = sets.iter().map(|s| s.m0.len()).sum();
    checks.push(Check::new(format!("M0 > 0 in {total} samples"), nonpos == 0, nonpos as f64, "0 non-positive"));
    let means = mean_sup_scaling(&sets.iter().map(|s| s.delta()).collect::<Vec<_>>(), &sets.iter().map(|s| s.m0.clone()).collect::<Vec<_>>())?;
    checks.push(Check::new("E[M0] slope in δ", means.within(0.5, 0.05), means.fit.slope, "0.50 ± 0.05"));
    for s in sets {
        checks.push(resolution_check(&format!("M0 at (δ₁,δ₂)=({},{})", s.delta1, s.delta2), &s.m0, &s.m0_coarse));
    }
    for (s, e) in sets.iter().zip(&ests) {
        ctx.sink.write(&format!("density_m0_{}_{}.csv", s.delta1, s.delta2), |o| e.write_csv(o))?;
    }
    ctx.sink.write("bound_m0.json", |o| rep.write_json(o))?;
    ctx.sink.write("mean_m0.csv", |o| {
        writeln!(o, "delta1,delta2,delta,mean,stderr,refined,uncertified")?;
        for (k, s) in sets.iter().enumerate() {
            writeln!(o, "{},{},{},{},{},{},{}", s.delta1, s.delta2, s.delta(), means.means[k], means.mean_se[k], s.refined, s.uncertified)?;
        }
        Ok(())
    })?;
    Ok(checks)
}

fn tail_grid(samples: &DeltaSamples) -> Vec<f64> {
    let col = &samples.columns[samples.columns.len() - 1];
    let top = col.iter().cloned().fold(0.0f64, f64::max) / samples.scale;
    let top = top.max(1.0 + 1e-9);
    (0..TAIL_POINTS).map(|k| 1.0 + (top - 1.0) * k as f64 / (TAIL_POINTS - 1) as f64).collect()
}

fn write_tails(o: &mut Vec<u8>, rep: &BoundReport, curves: &[TailCurve], samples: &[DeltaSamples]) -> Result<()> {
    writeln!(o, "delta,scale,z,prob,lo,hi,bound")?;
    let mut k = 0;
    for (c, s) in curves.iter().zip(samples) {
        for i in 0..c.thresholds.len() {
            writeln!(o, "{},{},{},{},{},{},{}", s.delta, s.scale, c.thresholds[i], c.prob[i], c.lo[i], c.hi[i], rep.verdicts[k].bound)?;
            k += 1;
        }
    }
    Ok(())
}

/// Gaussian tail bounds for F2 (scale δ1^{1/4}) and M0 (scale δ^{1/2}),
/// fitted at the largest δ and checked within Wilson slack at the others.
pub fn analyze_tails(ctx: &mut Ctx<'_>, f: &[FSet], m0: &[M0Set]) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let reference = ctx.cfg.sweep.reference_delta1;
    let rf = reference_index(f.iter().map(|s| s.delta1), reference)?;
    let rm = reference_index(m0.iter().map(|s| s.delta1), reference)?;
    for (label, theorem, samples, r) in [("F2", Theorem::TailF2, f_samples(f), rf), ("M0", Theorem::TailM0, m0_samples(m0), rm)] {
        let zeta = tail_grid(&samples[r]);
        let (rep, curves) = verify_tail_bound(theorem, &samples, &zeta, r)?;
        let failures: usize = rep.summaries.iter().map(|s| s.failures).sum();
        checks.push(Check::new(format!("{label} tail bound with c fitted at the reference δ₁"), rep.pass, failures as f64, "0 threshold failures"));
        let name = label.to_lowercase();
        ctx.sink.write(&format!("tails_{name}.csv"), |o| write_tails(o, &rep, &curves, &samples))?;
        let mut slim = rep.clone();
        slim.verdicts.retain(|v| !v.pass);
        ctx.sink.write(&format!("tail_bound_{name}.json"), |o| slim.write_json(o))?;
    }
    Ok(checks)
}

pub fn run_density_f(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    require_paths(ctx.cfg.mc.n_paths, MIN_BOUND_SAMPLES)?;
    let sets = f_sets(ctx)?;
    analyze_density_f(ctx, &sets)
}

pub fn run_density_m0(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    require_paths(ctx.cfg.mc.n_paths, MIN_BOUND_SAMPLES)?;
    let sets = m0_sets(ctx)?;
    analyze_density_m0(ctx, &sets)
}

pub fn run_tails(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    require_paths(ctx.cfg.mc.n_paths, 1000)?;
    let f = f_sets(ctx)?;
    let m = m0_sets(ctx)?;
    analyze_tails(ctx, &f, &m)
}
