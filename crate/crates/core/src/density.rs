//! Kernel density and tail estimation for the supremum statistics, and the
//! verification of Gaussian-type upper bounds and scaling exponents.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldPath;
use crate::green::{rect_increment_variance, BoundaryCondition, KernelParams};
use crate::stats::{fit_line, log_bisect, mean, variance, wilson, LineFit};

/// Fewest samples `kde` accepts.
pub const MIN_KDE_SAMPLES: usize = 100;
/// Fewest samples per δ for a bound verdict.
pub const MIN_BOUND_SAMPLES: usize = 100_000;
/// Version of the serialized `BoundReport` layout.
pub const BOUND_SCHEMA_VERSION: u32 = 1;

const KERNEL_REACH: f64 = 8.0;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Debug, PartialEq)]
pub struct KdeOptions {
    /// Bandwidth per dimension; Silverman's rule when `None`.
    pub bandwidth: Option<Vec<f64>>,
    /// Multiplies the automatic bandwidth (0.5 undersmooths).
    pub bandwidth_factor: f64,
    /// Minimum lattice points per dimension.
    pub points: usize,
    /// Cap on lattice points per dimension.
    pub max_points: usize,
    /// Explicit lattice axes; automatic (range ± 3 bandwidths) when `None`.
    pub lattice: Option<Vec<Vec<f64>>>,
}

impl Default for KdeOptions {
    fn default() -> Self {
        Self {
            bandwidth: None,
            bandwidth_factor: 1.0,
            points: 64,
            max_points: 1024,
            lattice: None,
        }
    }
}

impl KdeOptions {
    pub fn undersmoothed() -> Self {
        Self {
            bandwidth_factor: 0.5,
            ..Self::default()
        }
    }
}

/// Density values on a rectangular lattice, stored row-major with the
/// last dimension fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub dims: usize,
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub n_samples: usize,
}

impl DensityEstimate {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| if a.len() > 1 { a[1] - a[0] } else { 1.0 }).product()
    }

    /// Lattice Riemann sum of the density.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Lattice coordinates of flat index `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        match self.dims {
            1 => vec![self.axes[0][k]],
            _ => {
                let n2 = self.axes[1].len();
                vec![self.axes[0][k / n2], self.axes[1][k % n2]]
            }
        }
    }

    /// Multilinear interpolation; zero outside the lattice.
    pub fn interpolate(&self, z: &[f64]) -> f64 {
        let mut idx = Vec::with_capacity(self.dims);
        for (d, &zd) in z.iter().enumerate() {
            let a = &self.axes[d];
            if zd < a[0] || zd > a[a.len() - 1] {
                return 0.0;
            }
            let step = a[1] - a[0];
            let f = (zd - a[0]) / step;
            let i = (f.floor() as usize).min(a.len() - 2);
            idx.push((i, f - i as f64));
        }
        match self.dims {
            1 => {
                let (i, f) = idx[0];
                (1.0 - f) * self.values[i] + f * self.values[i + 1]
            }
            _ => {
                let n2 = self.axes[1].len();
                let ((i, f), (j, g)) = (idx[0], idx[1]);
                let v = |a: usize, b: usize| self.values[a * n2 + b];
                (1.0 - f) * ((1.0 - g) * v(i, j) + g * v(i, j + 1)) + f * ((1.0 - g) * v(i + 1, j) + g * v(i + 1, j + 1))
            }
        }
    }

    /// CSV with columns z (or z1,z2), value, stderr.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        if self.dims == 1 {
            writeln!(out, "z,value,stderr")?;
        } else {
            writeln!(out, "z1,z2,value,stderr")?;
        }
        for k in 0..self.values.len() {
            let p = self.point(k);
            let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{}", coords.join(","), self.values[k], self.stderr[k])?;
        }
        Ok(())
    }
}

fn check_columns(samples: &[&[f64]]) -> Result<usize> {
    if samples.is_empty() || samples.len() > 2 {
        return Err(Error::Estimation(format!("kde supports 1 or 2 dimensions, got {}", samples.len())));
    }
    let n = samples[0].len();
    if samples.iter().any(|c| c.len() != n) {
        return Err(Error::Estimation("sample columns differ in length".into()));
    }
    if n < MIN_KDE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_KDE_SAMPLES,
            got: n,
        });
    }
    Ok(n)
}

/// Silverman's rule σ_j·(4/((d+2)n))^{1/(d+4)} per dimension.
pub fn silverman(samples: &[&[f64]]) -> Result<Vec<f64>> {
    let n = check_columns(samples)?;
    let d = samples.len() as f64;
    let factor = (4.0 / ((d + 2.0) * n as f64)).powf(1.0 / (d + 4.0));
    samples
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let s = variance(c).sqrt();
            if !(s > 0.0) {
                return Err(Error::Estimation(format!("zero variance in dimension {k}")));
            }
            Ok(s * factor)
        })
        .collect()
}

fn kernel_window(axis: &[f64], x: f64, h: f64) -> (usize, Vec<f64>) {
    let lo = axis[0];
    let step = axis[1] - axis[0];
    let a = ((x - KERNEL_REACH * h - lo) / step).ceil().max(0.0) as usize;
    let b = (((x + KERNEL_REACH * h - lo) / step).floor()).min(axis.len() as f64 - 1.0);
    if b < a as f64 {
        return (a, Vec::new());
    }
    let w = (a..=b as usize)
        .map(|i| {
            let u = (axis[i] - x) / h;
            INV_SQRT_2PI / h * (-0.5 * u * u).exp()
        })
        .collect();
    (a, w)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Gaussian product-kernel density estimate. The standard error is the
/// exact bootstrap standard error of p̂ at each lattice point,
/// √((mean K² − p̂²)/n).
pub fn kde(samples: &[&[f64]], opts: &KdeOptions) -> Result<DensityEstimate> {
    let n = check_columns(samples)?;
    let dims = samples.len();
    let bw: Vec<f64> = match &opts.bandwidth {
        Some(b) if b.len() == dims && b.iter().all(|v| *v > 0.0) => b.clone(),
        Some(_) => return Err(Error::Estimation("bandwidth must be positive in every dimension".into())),
        None => silverman(samples)?.into_iter().map(|h| h * opts.bandwidth_factor).collect(),
    };
    let axes: Vec<Vec<f64>> = match &opts.lattice {
        Some(a) if a.len() == dims && a.iter().all(|v| v.len() >= 2) => a.clone(),
        Some(_) => return Err(Error::Estimation("lattice must have ≥ 2 points per dimension".into())),
        None => samples
            .iter()
            .zip(&bw)
            .map(|(c, &h)| {
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
                let need = ((hi - lo) / (0.75 * h)).ceil() as usize + 1;
                linspace(lo, hi, need.max(opts.points).min(opts.max_points))
            })
            .collect(),
    };
    let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let total: usize = shape.iter().product();
    let mut sum = vec![0.0; total];
    let mut sq = vec![0.0; total];
    for i in 0..n {
        if dims == 1 {
            let (a, w) = kernel_window(&axes[0], samples[0][i], bw[0]);
            for (k, v) in w.iter().enumerate() {
                sum[a + k] += v;
                sq[a + k] += v * v;
            }
        } else {
            let (a, w1) = kernel_window(&axes[0], samples[0][i], bw[0]);
            let (b, w2) = kernel_window(&axes[1], samples[1][i], bw[1]);
            for (k, v1) in w1.iter().enumerate() {
                let row = (a + k) * shape[1] + b;
                for (l, v2) in w2.iter().enumerate() {
                    let v = v1 * v2;
                    sum[row + l] += v;
                    sq[row + l] += v * v;
                }
            }
        }
    }
    let nf = n as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let stderr = values.iter().zip(&sq).map(|(p, q)| ((q / nf - p * p).max(0.0) / nf).sqrt()).collect();
    Ok(DensityEstimate {
        dims,
        axes,
        values,
        stderr,
        bandwidth: bw,
        n_samples: n,
    })
}

/// Standard error of `est` from `resamples` bootstrap resamples of the data.
pub fn bootstrap_stderr(samples: &[&[f64]], est: &DensityEstimate, resamples: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let n = check_columns(samples)?;
    let opts = KdeOptions {
        bandwidth: Some(est.bandwidth.clone()),
        lattice: Some(est.axes.clone()),
        ..KdeOptions::default()
    };
    let mut s1 = vec![0.0; est.values.len()];
    let mut s2 = vec![0.0; est.values.len()];
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; n]; samples.len()];
    for _ in 0..resamples {
        for i in 0..n {
            let k = rng.random_range(0..n);
            for (d, c) in cols.iter_mut().enumerate() {
                c[i] = samples[d][k];
            }
        }
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let b = kde(&refs, &opts)?;
        for (k, v) in b.values.iter().enumerate() {
            s1[k] += v;
            s2[k] += v * v;
        }
    }
    let r = resamples as f64;
    Ok(s1.iter().zip(&s2).map(|(a, b)| ((b / r - (a / r).powi(2)) * r / (r - 1.0)).max(0.0).sqrt()).collect())
}

/// Empirical survival function with 95% Wilson intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub thresholds: Vec<f64>,
    pub prob: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: usize,
}

/// P{X > z} for each threshold z.
pub fn tail_probability(samples: &[f64], thresholds: &[f64]) -> TailCurve {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut curve = TailCurve {
        thresholds: thresholds.to_vec(),
        prob: Vec::new(),
        lo: Vec::new(),
        hi: Vec::new(),
        n,
    };
    for &z in thresholds {
        let k = n - sorted.partition_point(|&x| x <= z);
        let (lo, hi) = wilson(k, n);
        curve.prob.push(k as f64 / n as f64);
        curve.lo.push(lo);
        curve.hi.push(hi);
    }
    curve
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    ThmF,
    CorF2,
    ThmM0,
    TailF2,
    TailM0,
    EqMoment,
}

/// One comparison of an estimate with the fitted envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointVerdict {
    pub delta: f64,
    pub z: Vec<f64>,
    pub estimate: f64,
    /// Lower end of the estimate after the Monte Carlo slack.
    pub lower: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub delta: f64,
    pub scale: f64,
    pub checked: usize,
    pub failures: usize,
    /// Lattice points below the admissible threshold.
    pub excluded: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub theorem: Theorem,
    pub fitted_c: f64,
    pub reference_delta: f64,
    pub summaries: Vec<DeltaSummary>,
    pub verdicts: Vec<PointVerdict>,
    /// Collapse distance net of the MC slack; see [`Collapse`].
    pub collapse_distance: f64,
    pub collapse_raw_distance: f64,
    pub collapse_peak: f64,
    pub collapse_tolerance: f64,
    /// Separate verdict for the |z1|-refined envelope (F only).
    pub refined: Option<Box<BoundReport>>,
    pub pass: bool,
}

impl BoundReport {
    pub fn collapse_pass(&self) -> bool {
        self.collapse_distance <= self.collapse_tolerance * self.collapse_peak
    }

    pub fn write_json(&self, out: &mut impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut *out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundOptions {
    pub min_samples: usize,
    /// Slack in units of the estimate's standard error.
    pub slack_se: f64,
    /// Allowed collapse distance as a fraction of the peak.
    pub collapse_tolerance: f64,
    /// Index of the set c is fitted on; the largest δ when `None`.
    pub reference: Option<usize>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            min_samples: MIN_BOUND_SAMPLES,
            slack_se: 2.0,
            collapse_tolerance: 0.1,
            reference: None,
        }
    }
}

/// Envelope of a density or tail bound at point z for scale s and constant c.
/// Must be nondecreasing in c.
pub type Envelope = fn(c: f64, z: &[f64], s: f64) -> f64;

/// c/s·exp(−z_last²/(c s²)).
pub fn gaussian_envelope(c: f64, z: &[f64], s: f64) -> f64 {
    let zl = z[z.len() - 1];
    c / s * (-zl * zl / (c * s * s)).exp()
}

/// Gaussian envelope times (|z1|^{-1/4} ∧ 1)·exp(−z1²/c).
pub fn refined_envelope(c: f64, z: &[f64], s: f64) -> f64 {
    let z1 = z[0];
    gaussian_envelope(c, z, s) * z1.abs().powf(-0.25).min(1.0) * (-z1 * z1 / c).exp()
}

/// c·exp(−z²/(c s²)).
pub fn tail_envelope(c: f64, z: &[f64], s: f64) -> f64 {
    gaussian_envelope(c, z, s) * s
}

/// Smallest c with envelope ≥ value; values ≤ 0 need no constant.
pub fn minimal_constant(value: f64, z: &[f64], s: f64, env: Envelope) -> f64 {
    if value <= 0.0 {
        return 0.0;
    }
    log_bisect(1e-12, 1e12, |c| env(c, z, s) >= value)
}

/// Density estimate at one δ, with the scale s of the bound.
pub struct ScaledEstimate<'a> {
    pub delta: f64,
    pub scale: f64,
    pub est: &'a DensityEstimate,
}

/// Minimal constant over admissible lattice points (last coordinate ≥ s).
pub fn fit_density_constant(e: &ScaledEstimate<'_>, env: Envelope) -> f64 {
    let mut c: f64 = 0.0;
    for k in 0..e.est.values.len() {
        let z = e.est.point(k);
        if z[z.len() - 1] >= e.scale {
            c = c.max(minimal_constant(e.est.values[k], &z, e.scale, env));
        }
    }
    c
}

/// Verdicts of p̂ − slack·SE ≤ envelope(c) on the admissible lattice.
pub fn density_verdicts(e: &ScaledEstimate<'_>, c: f64, env: Envelope, slack_se: f64) -> (DeltaSummary, Vec<PointVerdict>) {
    let mut verdicts = Vec::new();
    let mut excluded = 0;
    for k in 0..e.est.values.len() {
        let z = e.est.point(k);
        if z[z.len() - 1] < e.scale {
            excluded += 1;
            continue;
        }
        let p = e.est.values[k];
        let lower = p - slack_se * e.est.stderr[k];
        let bound = env(c, &z, e.scale);
        verdicts.push(PointVerdict {
            delta: e.delta,
            z,
            estimate: p,
            lower,
            bound,
            pass: p == 0.0 || lower <= bound,
        });
    }
    let failures = verdicts.iter().filter(|v| !v.pass).count();
    (
        DeltaSummary {
            delta: e.delta,
            scale: e.scale,
            checked: verdicts.len(),
            failures,
            excluded,
            pass: failures == 0,
        },
        verdicts,
    )
}

/// Samples of one δ configuration: columns (F1, F2) or (M0).
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSamples {
    pub delta: f64,
    pub scale: f64,
    pub columns: Vec<Vec<f64>>,
}

impl DeltaSamples {
    fn refs(&self) -> Vec<&[f64]> {
        self.columns.iter().map(|c| c.as_slice()).collect()
    }

    fn rescaled(&self) -> Vec<Vec<f64>> {
        let mut cols = self.columns.clone();
        let last = cols.len() - 1;
        for v in cols[last].iter_mut() {
            *v /= self.scale;
        }
        cols
    }
}

/// Density differences of the rescaled variables (last coordinate divided
/// by the scale) between the reference and every other set, over the
/// admissible region, with a common bandwidth and lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collapse {
    /// Largest |p̂_δ − p̂_ref| less `slack_se` combined standard errors.
    pub distance: f64,
    /// Largest |p̂_δ − p̂_ref| without slack.
    pub raw_distance: f64,
    /// Peak of the reference estimate.
    pub peak: f64,
}

pub fn collapse_distance(sets: &[DeltaSamples], reference: usize, slack_se: f64) -> Result<Collapse> {
    let scaled: Vec<Vec<Vec<f64>>> = sets.iter().map(|s| s.rescaled()).collect();
    let rref: Vec<&[f64]> = scaled[reference].iter().map(|c| c.as_slice()).collect();
    let bw = silverman(&rref)?;
    let dims = rref.len();
    let mut axes = Vec::with_capacity(dims);
    for d in 0..dims {
        let lo = scaled.iter().flat_map(|s| s[d].iter()).cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw[d];
        let hi = scaled.iter().flat_map(|s| s[d].iter()).cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw[d];
        let need = ((hi - lo) / (0.75 * bw[d])).ceil() as usize + 1;
        axes.push(linspace(lo, hi, need.clamp(64, 1024)));
    }
    let opts = KdeOptions {
        bandwidth: Some(bw),
        lattice: Some(axes),
        ..KdeOptions::default()
    };
    let ests = scaled
        .iter()
        .map(|s| {
            let r: Vec<&[f64]> = s.iter().map(|c| c.as_slice()).collect();
            kde(&r, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let r = &ests[reference];
    let mut c = Collapse {
        distance: 0.0,
        raw_distance: 0.0,
        peak: r.peak(),
    };
    for k in 0..r.values.len() {
        let z = r.point(k);
        if z[dims - 1] < 1.0 {
            continue;
        }
        for (i, e) in ests.iter().enumerate() {
            if i != reference {
                let d = (e.values[k] - r.values[k]).abs();
                let se = (e.stderr[k].powi(2) + r.stderr[k].powi(2)).sqrt();
                c.raw_distance = c.raw_distance.max(d);
                c.distance = c.distance.max(d - slack_se * se);
            }
        }
    }
    Ok(c)
}

fn check_sizes(sets: &[DeltaSamples], opts: &BoundOptions) -> Result<()> {
    for s in sets {
        let n = s.columns[0].len();
        if n < opts.min_samples {
            return Err(Error::InsufficientSamples {
                needed: opts.min_samples,
                got: n,
            });
        }
    }
    Ok(())
}

fn density_report(theorem: Theorem, sets: &[DeltaSamples], ests: &[DensityEstimate], reference: usize, env: Envelope, opts: &BoundOptions) -> BoundReport {
    let scaled: Vec<ScaledEstimate<'_>> = sets
        .iter()
        .zip(ests)
        .map(|(s, e)| ScaledEstimate {
            delta: s.delta,
            scale: s.scale,
            est: e,
        })
        .collect();
    let c = fit_density_constant(&scaled[reference], env);
    let mut summaries = Vec::new();
    let mut verdicts = Vec::new();
    for e in &scaled {
        let (s, v) = density_verdicts(e, c, env, opts.slack_se);
        summaries.push(s);
        verdicts.extend(v);
    }
    let pass = summaries.iter().all(|s| s.pass);
    BoundReport {
        schema_version: BOUND_SCHEMA_VERSION,
        theorem,
        fitted_c: c,
        reference_delta: sets[reference].delta,
        summaries,
        verdicts,
        collapse_distance: 0.0,
        collapse_raw_distance: 0.0,
        collapse_peak: 0.0,
        collapse_tolerance: opts.collapse_tolerance,
        refined: None,
        pass,
    }
}

/// Index of the set with the largest δ.
pub fn largest_delta(sets: &[DeltaSamples]) -> usize {
    (0..sets.len()).max_by(|&a, &b| sets[a].delta.total_cmp(&sets[b].delta)).unwrap_or(0)
}

/// Fits c·δ1^{-1/4}·exp(−z2²/(c δ1^{1/2})) on the largest δ1 with the
/// undersmoothed KDE of (F1, F2) and checks the other δ1 values, plus the
/// |z1|-refined envelope and the scaling collapse in z2/δ1^{1/4}.
pub fn verify_density_bound_f(sets: &[DeltaSamples], opts: &BoundOptions) -> Result<(BoundReport, Vec<DensityEstimate>)> {
    verify_density(Theorem::ThmF, sets, opts, Some(refined_envelope))
}

/// Same with the 1D KDE of M0, scale δ^{1/2}, δ = δ1^{1/2} + δ2.
pub fn verify_density_bound_m0(sets: &[DeltaSamples], opts: &BoundOptions) -> Result<(BoundReport, Vec<DensityEstimate>)> {
    verify_density(Theorem::ThmM0, sets, opts, None)
}

fn verify_density(theorem: Theorem, sets: &[DeltaSamples], opts: &BoundOptions, refined: Option<Envelope>) -> Result<(BoundReport, Vec<DensityEstimate>)> {
    if sets.len() < 2 {
        return Err(Error::Estimation("need at least two δ values".into()));
    }
    check_sizes(sets, opts)?;
    let ests = sets.iter().map(|s| kde(&s.refs(), &KdeOptions::undersmoothed())).collect::<Result<Vec<_>>>()?;
    let reference = opts.reference.unwrap_or_else(|| largest_delta(sets));
    if reference >= sets.len() {
        return Err(Error::Estimation("no reference set".into()));
    }
    let mut report = density_report(theorem, sets, &ests, reference, gaussian_envelope, opts);
    let c = collapse_distance(sets, reference, opts.slack_se)?;
    report.collapse_distance = c.distance;
    report.collapse_raw_distance = c.raw_distance;
    report.collapse_peak = c.peak;
    if let Some(env) = refined {
        let mut r = density_report(Theorem::CorF2, sets, &ests, reference, env, opts);
        r.verdicts.clear();
        report.refined = Some(Box::new(r));
    }
    Ok((report, ests))
}

/// Fits c·exp(−z²/(c s²)) to the reference survival function at thresholds
/// z = s·ζ and checks every set: the Wilson lower end must not exceed the
/// envelope. Also reports the sup distance of the rescaled survival curves.
pub fn verify_tail_bound(theorem: Theorem, sets: &[DeltaSamples], zeta: &[f64], reference: usize) -> Result<(BoundReport, Vec<TailCurve>)> {
    if sets.is_empty() || reference >= sets.len() {
        return Err(Error::Estimation("no reference set".into()));
    }
    let col = |s: &DeltaSamples| s.columns[s.columns.len() - 1].clone();
    let curves: Vec<TailCurve> = sets
        .iter()
        .map(|s| {
            let th: Vec<f64> = zeta.iter().map(|z| z * s.scale).collect();
            tail_probability(&col(s), &th)
        })
        .collect();
    let rc = &curves[reference];
    let s_ref = sets[reference].scale;
    let mut c: f64 = 0.0;
    for (k, &z) in rc.thresholds.iter().enumerate() {
        c = c.max(minimal_constant(rc.prob[k], &[z], s_ref, tail_envelope));
    }
    let mut summaries = Vec::new();
    let mut verdicts = Vec::new();
    let mut dist: f64 = 0.0;
    for (s, cv) in sets.iter().zip(&curves) {
        let mut failures = 0;
        for (k, &z) in cv.thresholds.iter().enumerate() {
            let bound = tail_envelope(c, &[z], s.scale);
            let pass = cv.lo[k] <= bound;
            failures += usize::from(!pass);
            dist = dist.max((cv.prob[k] - rc.prob[k]).abs());
            verdicts.push(PointVerdict {
                delta: s.delta,
                z: vec![z],
                estimate: cv.prob[k],
                lower: cv.lo[k],
                bound,
                pass,
            });
        }
        summaries.push(DeltaSummary {
            delta: s.delta,
            scale: s.scale,
            checked: cv.thresholds.len(),
            failures,
            excluded: 0,
            pass: failures == 0,
        });
    }
    let pass = summaries.iter().all(|s| s.pass);
    Ok((
        BoundReport {
            schema_version: BOUND_SCHEMA_VERSION,
            theorem,
            fitted_c: c,
            reference_delta: sets[reference].delta,
            summaries,
            verdicts,
            collapse_distance: dist,
            collapse_raw_distance: dist,
            collapse_peak: 1.0,
            collapse_tolerance: 0.1,
            refined: None,
            pass,
        },
        curves,
    ))
}

/// Log-log regression of a sample mean against δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub deltas: Vec<f64>,
    pub means: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub fit: LineFit,
}

impl ScalingReport {
    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.fit.slope - target).abs() <= tol
    }
}

/// Slope of log E[X] against log δ, weighted by the delta-method variance
/// of log of the sample mean. Exact data (zero variance) gives an
/// unweighted fit.
pub fn mean_sup_scaling(deltas: &[f64], samples: &[Vec<f64>]) -> Result<ScalingReport> {
    if deltas.len() < 3 || samples.len() != deltas.len() {
        return Err(Error::Estimation("need ≥ 3 δ values with one sample set each".into()));
    }
    let means: Vec<f64> = samples.iter().map(|s| mean(s)).collect();
    if means.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Estimation("sample means must be positive".into()));
    }
    let se: Vec<f64> = samples.iter().map(|s| if s.len() > 1 { (variance(s) / s.len() as f64).sqrt() } else { 0.0 }).collect();
    let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let lv: Vec<f64> = se.iter().zip(&means).map(|(s, m)| (s / m).powi(2)).collect();
    let fit = if lv.iter().all(|v| *v > 0.0) { fit_line(&x, &y, Some(&lv)) } else { fit_line(&x, &y, None) };
    Ok(ScalingReport {
        deltas: deltas.to_vec(),
        means,
        mean_se: se,
        fit,
    })
}

/// Increment variance against lag with its log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub lags: Vec<f64>,
    pub variances: Vec<f64>,
    pub fit: LineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityProbe {
    /// Time index range of base points for time increments.
    pub base_time: usize,
    /// Column indices used as base points.
    pub columns: Vec<usize>,
    pub time_lags: Vec<usize>,
    pub space_lags: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub n_paths: usize,
    pub time: ExponentFit,
    pub space: ExponentFit,
}

/// Fewest paths `regularity_report` accepts.
pub const MIN_REGULARITY_PATHS: usize = 1000;

/// Log-log fit of mean per-path squared increments against the lags.
pub fn exponent_fit(lags: Vec<f64>, per_path: &[Vec<f64>]) -> ExponentFit {
    let k = lags.len();
    let n = per_path.len() as f64;
    let mut variances = vec![0.0; k];
    let mut vv = vec![0.0; k];
    for p in per_path {
        for j in 0..k {
            variances[j] += p[j] / n;
            vv[j] += p[j] * p[j] / n;
        }
    }
    let lvar: Vec<f64> = (0..k).map(|j| ((vv[j] - variances[j].powi(2)) / n / variances[j].powi(2)).max(1e-300)).collect();
    let x: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let fit = if lvar.iter().all(|v| *v > 1e-200) { fit_line(&x, &y, Some(&lvar)) } else { fit_line(&x, &y, None) };
    ExponentFit { lags, variances, fit }
}

/// Squared increments of one path averaged over the probe columns: the
/// time lags first, then the space lags. The probe must fit the grid.
pub fn probe_row(p: &FieldPath, probe: &RegularityProbe) -> Vec<f64> {
    let nc = probe.columns.len() as f64;
    let t0 = probe.base_time;
    let time = probe.time_lags.iter().map(|&l| probe.columns.iter().map(|&c| (p.values[[t0 + l, c]] - p.values[[t0, c]]).powi(2)).sum::<f64>() / nc);
    let space = probe.space_lags.iter().map(|&l| probe.columns.iter().map(|&c| (p.values[[t0, c + l]] - p.values[[t0, c]]).powi(2)).sum::<f64>() / nc);
    time.chain(space).collect()
}

/// Mean-square increments in time (at fixed columns, from `base_time`) and
/// in space (at row `base_time`, from each column), and their exponents.
pub fn regularity_report(paths: &[FieldPath], probe: &RegularityProbe) -> Result<RegularityReport> {
    regularity_report_with_min(paths, probe, MIN_REGULARITY_PATHS)
}

pub fn regularity_report_with_min(paths: &[FieldPath], probe: &RegularityProbe, min_paths: usize) -> Result<RegularityReport> {
    if paths.len() < min_paths {
        return Err(Error::InsufficientSamples {
            needed: min_paths,
            got: paths.len(),
        });
    }
    let g = &paths[0].grid;
    let (nt, nx) = paths[0].values.dim();
    let t0 = probe.base_time;
    if probe.time_lags.iter().any(|l| t0 + l >= nt) || probe.columns.iter().any(|&c| probe.space_lags.iter().any(|l| c + l >= nx)) || t0 >= nt {
        return Err(Error::Config("regularity probe outside the grid".into()));
    }
    let rows: Vec<Vec<f64>> = paths.iter().map(|p| probe_row(p, probe)).collect();
    let k = probe.time_lags.len();
    let per_time: Vec<Vec<f64>> = rows.iter().map(|r| r[..k].to_vec()).collect();
    let per_space: Vec<Vec<f64>> = rows.iter().map(|r| r[k..].to_vec()).collect();
    Ok(RegularityReport {
        n_paths: paths.len(),
        time: exponent_fit(probe.time_lags.iter().map(|&l| l as f64 * g.dt()).collect(), &per_time),
        space: exponent_fit(probe.space_lags.iter().map(|&l| l as f64 * g.dx()).collect(), &per_space),
    })
}

/// Relative slack of the fine-lag ratios over the coarse-fitted C. The ratio
/// rises to its supremum 2/√π only in the limit of vanishing lags, so a C
/// fitted on coarse lags is approached from below; a wrong exponent would
/// instead grow without bound as the lags shrink.
pub const RECT_SLACK: f64 = 0.05;

/// Deterministic check of E|□u|² ≤ C·min(|t−s|^{1/2}, |x−y|): C is fitted
/// on the coarse lags and must hold, within [`RECT_SLACK`], at the fine ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectBoundReport {
    pub fitted_c: f64,
    pub fine_max_ratio: f64,
    pub points: usize,
    pub pass: bool,
}

/// Base points (t, x) in `bases`, time lags `dts`, space lags `dxs`.
/// Lags at or above `split` in both directions form the fitting set.
pub fn rect_bound_fit(bc: BoundaryCondition, params: &KernelParams, bases: &[(f64, f64)], dts: &[f64], dxs: &[f64], split: (f64, f64)) -> Result<RectBoundReport> {
    let mut fit_c: f64 = 0.0;
    let mut fine: f64 = 0.0;
    let mut points = 0;
    for &(s, y) in bases {
        for &ht in dts {
            for &hx in dxs {
                let v = rect_increment_variance(s + ht, s, y + hx, y, bc, params)?;
                let ratio = v / ht.sqrt().min(hx);
                points += 1;
                if ht >= split.0 && hx >= split.1 {
                    fit_c = fit_c.max(ratio);
                } else {
                    fine = fine.max(ratio);
                }
            }
        }
    }
    Ok(RectBoundReport {
        fitted_c: fit_c,
        fine_max_ratio: fine,
        points,
        pass: fine <= fit_c * (1.0 + RECT_SLACK),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpaceTimeGrid;
    use crate::rng::{fill_normals, path_rng};
    use approx::assert_relative_eq;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        fill_normals(&mut path_rng(seed, 0), &mut v);
        v
    }

    #[test]
    fn gaussian_density_at_origin() {
        let (a, b) = (normals(100_000, 1), normals(100_000, 2));
        let e = kde(&[&a, &b], &KdeOptions::default()).unwrap();
        let p0 = e.interpolate(&[0.0, 0.0]);
        assert!((p0 / (1.0 / (2.0 * std::f64::consts::PI)) - 1.0).abs() < 0.05, "{p0}");
        assert!((e.mass() - 1.0).abs() < 0.01);
        assert!(e.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn kde_translation_equivariant() {
        let a = normals(500, 3);
        let b: Vec<f64> = a.iter().map(|v| v + 2.5).collect();
        let ea = kde(&[&a], &KdeOptions::default()).unwrap();
        let eb = kde(&[&b], &KdeOptions::default()).unwrap();
        assert_eq!(ea.values.len(), eb.values.len());
        for k in 0..ea.values.len() {
            assert_relative_eq!(ea.axes[0][k] + 2.5, eb.axes[0][k], epsilon = 1e-12);
            assert_relative_eq!(ea.values[k], eb.values[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn kde_rejects_bad_input() {
        let few = vec![0.0; 50];
        assert!(matches!(kde(&[&few], &KdeOptions::default()), Err(Error::InsufficientSamples { .. })));
        let flat = vec![1.0; 200];
        assert!(matches!(kde(&[&flat], &KdeOptions::default()), Err(Error::Estimation(_))));
    }

    #[test]
    fn exact_bootstrap_matches_resampling() {
        let a = normals(2000, 4);
        let opts = KdeOptions {
            points: 16,
            max_points: 16,
            ..KdeOptions::default()
        };
        let e = kde(&[&a], &opts).unwrap();
        let se = bootstrap_stderr(&[&a], &e, 200, &mut path_rng(9, 0)).unwrap();
        let k = e.values.len() / 2;
        assert!((se[k] / e.stderr[k] - 1.0).abs() < 0.2, "{} vs {}", se[k], e.stderr[k]);
    }

    #[test]
    fn tail_edges() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let c = tail_probability(&x, &[-1.0, 5000.0]);
        assert_eq!(c.prob, vec![1.0, 0.0]);
        assert_relative_eq!(c.hi[1], 3.0 / 1000.0);
    }

    #[test]
    fn zero_density_points_pass() {
        let e = DensityEstimate {
            dims: 1,
            axes: vec![vec![0.0, 1.0, 2.0, 3.0]],
            values: vec![0.0; 4],
            stderr: vec![0.0; 4],
            bandwidth: vec![0.1],
            n_samples: 100_000,
        };
        let se = ScaledEstimate {
            delta: 0.1,
            scale: 0.5,
            est: &e,
        };
        let (s, _) = density_verdicts(&se, 1e-9, gaussian_envelope, 2.0);
        assert!(s.pass);
        assert_eq!(s.excluded, 1);
    }

    #[test]
    fn synthetic_scaling_is_exact() {
        let d = [0.01, 0.02, 0.04];
        let s: Vec<Vec<f64>> = d.iter().map(|x: &f64| vec![3.0 * x.powf(0.25); 4]).collect();
        let r = mean_sup_scaling(&d, &s).unwrap();
        assert_relative_eq!(r.fit.slope, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn refuses_small_bound_samples() {
        let mk = |d: f64| DeltaSamples {
            delta: d,
            scale: d.sqrt(),
            columns: vec![normals(10, 5)],
        };
        let r = verify_density_bound_m0(&[mk(0.1), mk(0.2)], &BoundOptions::default());
        assert!(matches!(r, Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn synthetic_self_similar_bound() {
        let mk = |d: f64, seed| {
            let s = d.sqrt();
            DeltaSamples {
                delta: d,
                scale: s,
                columns: vec![normals(20_000, seed).iter().map(|v| s * v.abs()).collect()],
            }
        };
        let sets = [mk(0.05, 11), mk(0.1, 12), mk(0.2, 13)];
        let opts = BoundOptions {
            min_samples: 1000,
            ..BoundOptions::default()
        };
        let (rep, _) = verify_density_bound_m0(&sets, &opts).unwrap();
        assert!(rep.pass, "{:?}", rep.summaries);
        assert!(rep.collapse_pass(), "{} {}", rep.collapse_distance, rep.collapse_peak);
        let zeta: Vec<f64> = (0..30).map(|i| 1.0 + 0.1 * i as f64).collect();
        let (t, _) = verify_tail_bound(Theorem::TailM0, &sets, &zeta, 2).unwrap();
        assert!(t.pass);
    }

    #[test]
    fn brownian_time_exponent_and_ramp() {
        let g = SpaceTimeGrid::new(1.0, 64, 4).unwrap();
        let probe = RegularityProbe {
            base_time: 8,
            columns: vec![1, 2],
            time_lags: vec![1, 2, 4, 8],
            space_lags: vec![1, 2],
        };
        let paths: Vec<FieldPath> = (0..400)
            .map(|p| {
                let z = normals(65, 100 + p);
                let mut w = vec![0.0; 65];
                for i in 1..65 {
                    w[i] = w[i - 1] + z[i] * (1.0f64 / 64.0).sqrt();
                }
                FieldPath::from_fn(g.clone(), BoundaryCondition::Neumann, |t, x| w[(t * 64.0).round() as usize] * (1.0 + x))
            })
            .collect();
        let r = regularity_report_with_min(&paths, &probe, 100).unwrap();
        assert!((r.time.fit.slope - 1.0).abs() < 0.1, "{}", r.time.fit.slope);
        let ramp = vec![FieldPath::from_fn(g, BoundaryCondition::Neumann, |t, x| t + 3.0 * x)];
        let r = regularity_report_with_min(&ramp, &probe, 1).unwrap();
        assert_relative_eq!(r.time.fit.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.space.fit.slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn verdicts_monotone_in_c() {
        let a = normals(1000, 21).iter().map(|v| v.abs()).collect::<Vec<_>>();
        let e = kde(&[&a], &KdeOptions::default()).unwrap();
        let se = ScaledEstimate {
            delta: 0.1,
            scale: 0.3,
            est: &e,
        };
        let mut last = 0;
        for c in [0.01, 0.1, 1.0, 10.0] {
            let (s, _) = density_verdicts(&se, c, gaussian_envelope, 2.0);
            assert!(c == 0.01 || s.failures <= last);
            last = s.failures;
        }
    }
}
