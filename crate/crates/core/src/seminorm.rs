//! Hölder seminorms, the GRR functionals Y_r and Ȳ_r, the cutoff ψ and the
//! supremum-control check.

use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintCheck;
use crate::error::{Error, Result};
use crate::field::FieldPath;
use crate::suprema::WindowConfig;

pub use crate::smooth::{psi, psi_derivative, psi_log};

/// Exponents of the seminorms. The rectangle exponents (θ, γ1, γ2) are only
/// needed for Ȳ; time-only experiments leave them unset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormParams {
    pub p0: u32,
    pub gamma0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
}

impl SeminormParams {
    pub fn time_default() -> Self {
        Self {
            p0: 7,
            gamma0: 4.5,
            theta: None,
            gamma1: None,
            gamma2: None,
        }
    }

    pub fn rect_default() -> Self {
        Self {
            p0: 32,
            gamma0: 5.0,
            theta: Some(0.25),
            gamma1: Some(0.018),
            gamma2: Some(0.0265),
        }
    }

    pub fn theta1(&self) -> Option<f64> {
        self.theta.map(|t| 0.5 - t)
    }

    pub fn theta2(&self) -> Option<f64> {
        self.theta.map(|t| 2.0 * t)
    }

    pub fn two_p0(&self) -> i32 {
        2 * self.p0 as i32
    }

    fn rect_exponents(&self) -> Result<(f64, f64, f64)> {
        match (self.theta, self.gamma1, self.gamma2) {
            (Some(t), Some(g1), Some(g2)) => Ok((t, g1, g2)),
            _ => Err(Error::Config("rectangle functional needs theta, gamma1 and gamma2".into())),
        }
    }

    pub fn validate(&self) -> Vec<ConstraintCheck> {
        let p0 = self.p0 as f64;
        let mut out = vec![
            ConstraintCheck::less("p₀ − 2 > γ₀", self.gamma0, p0 - 2.0),
            ConstraintCheck::less("γ₀ > 4", 4.0, self.gamma0),
        ];
        if self.theta.is_none() && self.gamma1.is_none() && self.gamma2.is_none() {
            return out;
        }
        let Ok((th, g1, g2)) = self.rect_exponents() else {
            out.push(ConstraintCheck {
                name: "θ, γ₁, γ₂ all set".into(),
                holds: false,
                margin: -1.0,
            });
            return out;
        };
        let floor = 1.0 / (2.0 * p0);
        let (t1, t2) = (0.5 - th, 2.0 * th);
        out.push(ConstraintCheck::less("0 < θ", 0.0, th));
        out.push(ConstraintCheck::less("θ < 1/2", th, 0.5));
        out.push(ConstraintCheck::less("1/(2p₀) < γ₁", floor, g1));
        out.push(ConstraintCheck::less("γ₁ < θ₁/2 − 1/(2p₀)", g1, t1 / 2.0 - floor));
        out.push(ConstraintCheck::less("1/(2p₀) < γ₂", floor, g2));
        out.push(ConstraintCheck::less("γ₂ < θ₂/2 − 1/(2p₀)", g2, t2 / 2.0 - floor));
        out.push(ConstraintCheck::equal(
            "2γ₁ + γ₂ = (γ₀ − 1)/(2p₀)",
            2.0 * g1 + g2,
            (self.gamma0 - 1.0) / (2.0 * p0),
            1e-12,
        ));
        out
    }
}

/// Trapezoid weights of `n` uniform nodes with spacing `h`.
fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect()
}

/// (∫∫ |f(x)−f(y)|^{2p}/|x−y|^{1+2pγ} dx dy)^{1/(2p)} for `f` sampled on a
/// uniform grid over [a, b], by the trapezoid rule without the diagonal.
pub fn holder_seminorm(f: &[f64], a: f64, b: f64, p: u32, gamma: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let h = (b - a) / (n - 1) as f64;
    let w = trapezoid(n, h);
    let scale = f.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - f.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if scale == 0.0 {
        return 0.0;
    }
    let q = 2 * p as i32;
    let expo = 1.0 + 2.0 * p as f64 * gamma;
    let mut sum = 0.0;
    for i in 1..n {
        for j in 0..i {
            let d = ((f[i] - f[j]) / scale).abs();
            sum += w[i] * w[j] * d.powi(q) / (h * (i - j) as f64).powf(expo);
        }
    }
    (2.0 * sum).powf(1.0 / q as f64) * scale
}

/// Cumulative values r ↦ Y_r on the grid times of a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YTrace {
    pub times: Vec<f64>,
    /// ln Y at each time; −∞ where Y = 0.
    pub log_y: Vec<f64>,
    /// Terms that underflowed the floating range and were dropped.
    pub dropped: usize,
}

impl YTrace {
    pub fn value(&self, k: usize) -> f64 {
        self.log_y[k].exp()
    }

    pub fn last_log(&self) -> f64 {
        *self.log_y.last().expect("trace has at least one time")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "r,log_Y")?;
        for (t, l) in self.times.iter().zip(&self.log_y) {
            writeln!(out, "{t},{l}")?;
        }
        Ok(())
    }
}

/// Turns pair contributions f_ij (i > j) into the cumulative trapezoid
/// double integral over [t_0, t_k]², for every k, in scaled units.
///
/// Y_k = 2h²[Σ_{1≤i<k} R_i + ½R_k], R_i = Σ_{j<i} a_j f_ij, a_0 = ½.
fn cumulate(n: usize, h: f64, mut pair: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for k in 1..n {
        let mut r = 0.0;
        for j in 0..k {
            let a = if j == 0 { 0.5 } else { 1.0 };
            r += a * pair(k, j);
        }
        out[k] = 2.0 * h * h * (acc + 0.5 * r);
        acc += r;
    }
    out
}

fn to_logs(scaled: &[f64], log_scale: f64) -> Vec<f64> {
    scaled
        .iter()
        .map(|&v| if v > 0.0 { v.ln() + log_scale } else { f64::NEG_INFINITY })
        .collect()
}

/// Y trace of a uniformly sampled time series: Y_k is the trapezoid value of
/// ∫∫_{[t_0,t_k]²} (f(t)−f(s))^{2p0}/|t−s|^{γ0/2} ds dt.
pub fn time_functional(values: &[f64], t0: f64, h: f64, p0: u32, gamma0: f64) -> YTrace {
    let n = values.len();
    let times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * h).collect();
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = hi - lo;
    if n < 2 || !(scale > 0.0) {
        return YTrace {
            times,
            log_y: vec![f64::NEG_INFINITY; n],
            dropped: 0,
        };
    }
    let q = 2 * p0 as i32;
    let kern: Vec<f64> = (0..n).map(|d| if d == 0 { 0.0 } else { (h * d as f64).powf(-gamma0 / 2.0) }).collect();
    let mut dropped = 0;
    let scaled = cumulate(n, h, |i, j| {
        let d = (values[i] - values[j]) / scale;
        let p = d.powi(q);
        if p < f64::MIN_POSITIVE && d != 0.0 {
            dropped += 1;
            return 0.0;
        }
        p * kern[i - j]
    });
    YTrace {
        times,
        log_y: to_logs(&scaled, q as f64 * scale.ln()),
        dropped,
    }
}

fn column_series(path: &FieldPath, i0: usize, i1: usize, j: usize) -> Vec<f64> {
    (i0..=i1).map(|i| path.values[[i, j]]).collect()
}

/// r ↦ Y_r on every grid time of [s0, s0+δ1].
pub fn y_trace(path: &FieldPath, w: &WindowConfig, sp: &SeminormParams) -> Result<YTrace> {
    let g = &path.grid;
    let i0 = g.time_index(w.s0)?;
    let i1 = g.time_index(w.s0 + w.delta1)?;
    let j = g.pos_index(w.y0)?;
    Ok(time_functional(&column_series(path, i0, i1, j), g.time(i0), g.dt(), sp.p0, sp.gamma0))
}

/// Y_r for a grid time r in [s0, s0+δ1].
pub fn y_r(path: &FieldPath, w: &WindowConfig, r: f64, sp: &SeminormParams) -> Result<f64> {
    let g = &path.grid;
    let k = g.time_index(r)? as isize - g.time_index(w.s0)? as isize;
    if k < 0 || r > w.s0 + w.delta1 + 1e-12 {
        return Err(Error::Config(format!("r = {r} outside [s0, s0+δ1]")));
    }
    Ok(y_trace(path, w, sp)?.value(k as usize))
}

/// r ↦ Ȳ_r = Y₀(r) + Y₁(r) on grid times of [0, Δ•].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YbarTrace {
    pub times: Vec<f64>,
    pub log_y0: Vec<f64>,
    pub log_y1: Vec<f64>,
    pub dropped: usize,
}

impl YbarTrace {
    pub fn log_total(&self, k: usize) -> f64 {
        log_add(self.log_y0[k], self.log_y1[k])
    }

    pub fn value(&self, k: usize) -> f64 {
        self.log_total(k).exp()
    }
}

pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Rectangle functional for a field sampled on a uniform grid: rows are
/// times t_0 + i·ht, columns positions x_0 + j·hx. `y0_col` holds the
/// column used for the Y₀ part.
pub fn rect_functional(values: &ndarray::Array2<f64>, t0: f64, ht: f64, hx: f64, y0_col: usize, sp: &SeminormParams) -> Result<YbarTrace> {
    let (_, g1, g2) = sp.rect_exponents()?;
    let (nt, nxp) = values.dim();
    let col: Vec<f64> = values.column(y0_col).to_vec();
    let y0 = time_functional(&col, t0, ht, sp.p0, sp.gamma0);
    let times = y0.times.clone();
    let q = sp.two_p0();
    let p0 = sp.p0 as f64;

    // spatial increments d_i[k,l] = u(t_i, x_l) − u(t_i, x_k), l > k
    let pairs: Vec<(usize, usize)> = (0..nxp).flat_map(|l| (0..l).map(move |k| (k, l))).collect();
    let vx = trapezoid(nxp, hx);
    let wx: Vec<f64> = pairs
        .iter()
        .map(|&(k, l)| vx[k] * vx[l] * (hx * (l - k) as f64).powf(-(1.0 + 2.0 * p0 * g2)))
        .collect();
    let incs: Vec<Vec<f64>> = (0..nt)
        .map(|i| pairs.iter().map(|&(k, l)| values[[i, l]] - values[[i, k]]).collect())
        .collect();
    // Rectangular increments below the rounding level of u are exact zeros.
    let umax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * umax;
    let mut scale = 0.0f64;
    for i in 1..nt {
        for j in 0..i {
            for (a, b) in incs[i].iter().zip(&incs[j]) {
                let d = (a - b).abs();
                if d > floor {
                    scale = scale.max(d);
                }
            }
        }
    }
    if !(scale > 0.0) || nt < 2 || nxp < 2 {
        return Ok(YbarTrace {
            times,
            log_y0: y0.log_y,
            log_y1: vec![f64::NEG_INFINITY; nt],
            dropped: y0.dropped,
        });
    }
    let kt: Vec<f64> = (0..nt)
        .map(|d| if d == 0 { 0.0 } else { (ht * d as f64).powf(-(1.0 + 2.0 * p0 * g1)) })
        .collect();
    let inv = 1.0 / scale;
    let mut dropped = y0.dropped;
    let scaled = cumulate(nt, ht, |i, j| {
        let mut z = 0.0;
        for ((a, b), w) in incs[i].iter().zip(&incs[j]).zip(&wx) {
            let diff = a - b;
            if diff.abs() <= floor {
                continue;
            }
            let d = diff * inv;
            let p = d.powi(q);
            if p < f64::MIN_POSITIVE {
                if d != 0.0 {
                    dropped += 1;
                }
                continue;
            }
            z += w * p;
        }
        // the x-pair sum covers l > k only
        2.0 * z * kt[i - j]
    });
    Ok(YbarTrace {
        times,
        log_y0: y0.log_y,
        log_y1: to_logs(&scaled, q as f64 * scale.ln()),
        dropped,
    })
}

/// Ȳ trace on [0, Δ•] × [y0, y0+Δ*]; the path grid must start at t = 0
/// and contain both ranges.
pub fn ybar_trace(path: &FieldPath, w: &WindowConfig, sp: &SeminormParams) -> Result<YbarTrace> {
    let g = &path.grid;
    let i0 = g.time_index(0.0)?;
    let i1 = g.time_index(w.delta_bullet())?;
    let j0 = g.pos_index(w.y0)?;
    let j1 = g.pos_index(w.y0 + w.delta_star())?;
    let sub = path.values.slice(ndarray::s![i0..=i1, j0..=j1]).to_owned();
    rect_functional(&sub, g.time(i0), g.dt(), g.dx(), 0, sp)
}

pub fn ybar_r(path: &FieldPath, w: &WindowConfig, r: f64, sp: &SeminormParams) -> Result<f64> {
    let k = path.grid.time_index(r)?;
    if r > w.delta_bullet() + 1e-12 {
        return Err(Error::Config(format!("r = {r} outside [0, Δ•]")));
    }
    Ok(ybar_trace(path, w, sp)?.value(k - path.grid.time_index(0.0)?))
}

/// ln K with sup|ū| ≤ K·Y^{1/(2p0)}·h^{(γ0−4)/(4p0)} over an interval of
/// length h (GRR with Ψ(x) = x^{2p0}, p(u) = u^{γ0/(2p0)}).
pub fn log_grr_time_factor(p0: u32, gamma0: f64) -> f64 {
    let q = 2.0 * p0 as f64;
    let beta = (gamma0 - 4.0) / q;
    10f64.ln() + 4f64.ln() / q + 16f64.ln() * 2.0 / q + (gamma0 / (gamma0 - 4.0)).ln() + beta * 2f64.ln()
}

/// ln K_i for the one-parameter GRR bound with exponent γ_i.
pub fn log_grr_rect_factor(p0: u32, gamma: f64) -> f64 {
    let q = 2.0 * p0 as f64;
    8f64.ln() + 4f64.ln() / q + ((1.0 + q * gamma) / (q * gamma - 1.0)).ln()
}

/// ln c for the time variant: c = K^{−2p0}.
pub fn grr_time_log_c(sp: &SeminormParams) -> f64 {
    -(2.0 * sp.p0 as f64) * log_grr_time_factor(sp.p0, sp.gamma0)
}

/// ln c̄ for the rectangle variant: c̄ = min((2K0)^{−2p0}, (2K1K2)^{−2p0}).
pub fn grr_rect_log_c(sp: &SeminormParams) -> Result<f64> {
    let (_, g1, g2) = sp.rect_exponents()?;
    let q = 2.0 * sp.p0 as f64;
    let k0 = log_grr_time_factor(sp.p0, sp.gamma0);
    let k12 = log_grr_rect_factor(sp.p0, g1) + log_grr_rect_factor(sp.p0, g2);
    Ok(-q * (2f64.ln() + k0.max(k12)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    Time,
    Rect,
}

/// Threshold R (or R̄) kept as logarithms; R̄ is far below the f64 range for
/// the rectangle defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub kind: CutoffKind,
    pub log_r: f64,
    pub log_c: f64,
}

impl CutoffSpec {
    /// R = c·a^{2p0}·δ1^{−(γ0−4)/2}.
    pub fn time(log_c: f64, a: f64, delta1: f64, sp: &SeminormParams) -> Self {
        let q = 2.0 * sp.p0 as f64;
        Self {
            kind: CutoffKind::Time,
            log_r: log_c + q * a.ln() - 0.5 * (sp.gamma0 - 4.0) * delta1.ln(),
            log_c,
        }
    }

    /// R̄ = c·ā^{2p0}·δ^{4−γ0}.
    pub fn rect(log_c: f64, abar: f64, delta: f64, sp: &SeminormParams) -> Self {
        let q = 2.0 * sp.p0 as f64;
        Self {
            kind: CutoffKind::Rect,
            log_r: log_c + q * abar.ln() + (4.0 - sp.gamma0) * delta.ln(),
            log_c,
        }
    }

    pub fn r(&self) -> f64 {
        self.log_r.exp()
    }

    pub fn c(&self) -> f64 {
        self.log_c.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Vacuous,
    Fail,
}

/// Verdict of "premise ⇒ sup ≤ bound".
pub fn implication(premise: bool, sup: f64, bound: f64) -> Verdict {
    match (premise, sup <= bound) {
        (false, _) => Verdict::Vacuous,
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
    }
}

/// Time variant at every grid r of the trace: Y_r ≤ R ⇒ sup_{[s0,r]}|ū| ≤ a.
/// `ubar` is aligned with the trace times.
pub fn grr_time_verdicts(trace: &YTrace, ubar: &[f64], cut: &CutoffSpec, a: f64) -> Vec<Verdict> {
    let mut sup = 0.0f64;
    trace
        .log_y
        .iter()
        .zip(ubar)
        .map(|(ly, u)| {
            sup = sup.max(u.abs());
            implication(*ly <= cut.log_r, sup, a)
        })
        .collect()
}

/// Rectangle variant at every grid r: Ȳ_r ≤ R̄ ⇒ sup_{[0,r]×cols}|u| ≤ ā,
/// with `row_sup[k]` the maximum of |u| over the columns at time k.
pub fn grr_rect_verdicts(trace: &YbarTrace, row_sup: &[f64], cut: &CutoffSpec, abar: f64) -> Vec<Verdict> {
    let mut sup = 0.0f64;
    (0..trace.times.len())
        .map(|k| {
            sup = sup.max(row_sup[k]);
            implication(trace.log_total(k) <= cut.log_r, sup, abar)
        })
        .collect()
}

/// Single-r check on a path for the time variant.
pub fn grr_implication_check(path: &FieldPath, w: &WindowConfig, r: f64, sp: &SeminormParams, cut: &CutoffSpec, a: f64) -> Result<Verdict> {
    let trace = y_trace(path, w, sp)?;
    let g = &path.grid;
    let i0 = g.time_index(w.s0)?;
    let k = g.time_index(r)?.checked_sub(i0).ok_or_else(|| Error::Config(format!("r = {r} before s0")))?;
    if k >= trace.len() {
        return Err(Error::Config(format!("r = {r} beyond s0 + δ1")));
    }
    let j = g.pos_index(w.y0)?;
    let sup = (i0..=i0 + k).map(|i| (path.values[[i, j]] - path.values[[i0, j]]).abs()).fold(0.0, f64::max);
    Ok(implication(trace.log_y[k] <= cut.log_r, sup, a))
}

/// Single-r check on a path for the rectangle variant, sup over
/// [0, r] × [y0, y0+Δ*].
pub fn grr_rect_implication_check(path: &FieldPath, w: &WindowConfig, r: f64, sp: &SeminormParams, cut: &CutoffSpec, abar: f64) -> Result<Verdict> {
    let trace = ybar_trace(path, w, sp)?;
    let g = &path.grid;
    let k = g.time_index(r)?;
    let j0 = g.pos_index(w.y0)?;
    let j1 = g.pos_index(w.y0 + w.delta_star())?;
    let mut sup = 0.0f64;
    for i in 0..=k {
        for j in j0..=j1 {
            sup = sup.max(path.values[[i, j]].abs());
        }
    }
    Ok(implication(trace.log_total(k) <= cut.log_r, sup, abar))
}

/// ψ(Y_{r_k}) on the trace times.
pub fn psi_trace(trace: &YTrace, cut: &CutoffSpec) -> Vec<f64> {
    trace.log_y.iter().map(|ly| psi_log(*ly, cut.log_r)).collect()
}

/// ∫_{s0}^{s0+δ1} ψ(Y_r) dr by the left-point rule on the trace times.
pub fn gamma22(trace: &YTrace, cut: &CutoffSpec) -> f64 {
    let psi = psi_trace(trace, cut);
    trace.times.windows(2).zip(&psi).map(|(t, p)| (t[1] - t[0]) * p).sum()
}

/// (2p−1)!! = E[Z^{2p}] for a standard normal Z.
pub fn gaussian_even_moment(p: u32) -> f64 {
    (1..=p).map(|k| (2 * k - 1) as f64).product()
}

/// E[Y] trace for a centred Gaussian series with increment variances
/// `var(i, j)` on uniform times.
pub fn expected_time_functional(n: usize, h: f64, p0: u32, gamma0: f64, mut var: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let m = gaussian_even_moment(p0);
    cumulate(n, h, |i, j| m * var(i, j).max(0.0).powi(p0 as i32) * (h * (i - j) as f64).powf(-gamma0 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpaceTimeGrid;
    use crate::green::BoundaryCondition;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn default_params_validate() {
        assert!(crate::constraint::all_hold(&SeminormParams::time_default().validate()));
        assert!(crate::constraint::all_hold(&SeminormParams::rect_default().validate()));
        let bad = SeminormParams {
            p0: 5,
            ..SeminormParams::time_default()
        };
        let failing: Vec<_> = bad.validate().into_iter().filter(|c| !c.holds).map(|c| c.name).collect();
        assert_eq!(failing, vec!["p₀ − 2 > γ₀".to_string()]);
    }

    #[test]
    fn seminorm_examples() {
        let n = 2001;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        assert_eq!(holder_seminorm(&vec![3.0; n], 0.0, 1.0, 1, 0.25), 0.0);
        let v = holder_seminorm(&xs, 0.0, 1.0, 1, 0.25);
        assert_relative_eq!(v, (8.0f64 / 15.0).sqrt(), max_relative = 1e-3);
        let scaled: Vec<f64> = xs.iter().map(|x| -2.5 * x).collect();
        assert_relative_eq!(holder_seminorm(&scaled, 0.0, 1.0, 1, 0.25), 2.5 * v, max_relative = 1e-12);
    }

    #[test]
    fn ramp_y_matches_closed_form() {
        let (delta, m) = (0.04, 2000);
        let h = delta / m as f64;
        let vals: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
        let tr = time_functional(&vals, 0.4, h, 7, 4.5);
        // ∫∫_{[0,δ]²} |t−s|^{14−2.25} = 2δ^{13.75}/(12.75·13.75)
        let exact = 2.0 * delta.powf(13.75) / (12.75 * 13.75);
        assert_relative_eq!(tr.value(m), exact, max_relative = 1e-4);
        assert!(tr.log_y.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn zero_path_gives_zero_functionals() {
        let g = SpaceTimeGrid::new(1.0, 100, 20).unwrap();
        let p = FieldPath::from_fn(g, BoundaryCondition::Dirichlet, |_, _| 0.0);
        let w = WindowConfig::default().with_deltas(0.1, 0.1);
        assert_eq!(y_r(&p, &w, 0.5, &SeminormParams::time_default()).unwrap(), 0.0);
        let wr = WindowConfig::default().with_deltas(0.01, 0.1);
        assert_eq!(ybar_r(&p, &wr, 0.04, &SeminormParams::rect_default()).unwrap(), 0.0);
        let cut = CutoffSpec::time(grr_time_log_c(&SeminormParams::time_default()), 0.3, 0.1, &SeminormParams::time_default());
        assert_eq!(grr_implication_check(&p, &w, 0.5, &SeminormParams::time_default(), &cut, 0.3).unwrap(), Verdict::Pass);
        assert_relative_eq!(gamma22(&y_trace(&p, &w, &SeminormParams::time_default()).unwrap(), &cut), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn separable_field_has_no_rect_part() {
        let g = SpaceTimeGrid::new(1.0, 100, 20).unwrap();
        let p = FieldPath::from_fn(g, BoundaryCondition::Neumann, |t, x| (5.0 * t).sin() + x * x);
        let w = WindowConfig::default().with_deltas(0.01, 0.1);
        let tr = ybar_trace(&p, &w, &SeminormParams::rect_default()).unwrap();
        assert!(tr.log_y1.iter().all(|v| *v == f64::NEG_INFINITY));
        assert!(tr.log_y0.last().unwrap().is_finite());
    }

    #[test]
    fn rect_functional_matches_direct_sum() {
        let sp = SeminormParams {
            p0: 2,
            gamma0: 4.5,
            theta: Some(0.25),
            gamma1: Some(0.3),
            gamma2: Some(0.3),
        };
        let v = ndarray::Array2::from_shape_fn((5, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.1 + (i * j) as f64 * 0.05);
        let (ht, hx) = (0.1, 0.2);
        let tr = rect_functional(&v, 0.0, ht, hx, 0, &sp).unwrap();
        let wt = trapezoid(5, ht);
        let wx = trapezoid(4, hx);
        let mut direct = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..4 {
                    for l in 0..4 {
                        if i == j || k == l {
                            continue;
                        }
                        let r: f64 = v[[i, k]] + v[[j, l]] - v[[i, l]] - v[[j, k]];
                        direct += wt[i] * wt[j] * wx[k] * wx[l] * r.powi(4)
                            / ((ht * (i as f64 - j as f64).abs()).powf(1.0 + 4.0 * 0.3) * (hx * (k as f64 - l as f64).abs()).powf(1.0 + 4.0 * 0.3));
                    }
                }
            }
        }
        assert_relative_eq!(tr.log_y1[4].exp(), direct, max_relative = 1e-12);
    }

    #[test]
    fn grr_constants_are_tiny() {
        let lc = grr_time_log_c(&SeminormParams::time_default());
        assert!(lc < -60.0 && lc > -80.0, "{lc}");
        let lr = grr_rect_log_c(&SeminormParams::rect_default()).unwrap();
        assert!(lr < lc);
    }

    #[test]
    fn psi_examples() {
        let r = 3.7;
        assert_eq!(psi(0.25 * r, r), 1.0);
        assert_eq!(psi(2.0 * r, r), 0.0);
        let mid = psi(0.75 * r, r);
        assert!(mid > 0.0 && mid < 1.0);
        assert!(psi_derivative(0.75 * r, r).abs() <= 4.0 / r);
    }

    #[test]
    fn contrapositive_is_consistent() {
        // sup > a forces a non-PASS verdict, and PASS forces sup ≤ a.
        for (prem, sup) in [(true, 0.1), (true, 2.0), (false, 0.1), (false, 2.0)] {
            let v = implication(prem, sup, 1.0);
            if sup > 1.0 {
                assert_ne!(v, Verdict::Pass);
                assert_eq!(v == Verdict::Fail, prem);
            }
        }
    }

    proptest! {
        #[test]
        fn y_trace_nondecreasing(vals in proptest::collection::vec(-1.0f64..1.0, 2..40)) {
            let tr = time_functional(&vals, 0.0, 0.01, 7, 4.5);
            prop_assert!(tr.log_y.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn ybar_trace_nondecreasing(vals in proptest::collection::vec(-1.0f64..1.0, 30)) {
            let v = ndarray::Array2::from_shape_vec((6, 5), vals).unwrap();
            let tr = rect_functional(&v, 0.0, 0.01, 0.02, 0, &SeminormParams::rect_default()).unwrap();
            prop_assert!((1..6).all(|k| tr.log_total(k) >= tr.log_total(k - 1)));
        }

        #[test]
        fn seminorm_homogeneous(vals in proptest::collection::vec(-1.0f64..1.0, 3..30), c in -5.0f64..5.0) {
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            let a = holder_seminorm(&vals, 0.0, 1.0, 2, 0.3);
            let b = holder_seminorm(&scaled, 0.0, 1.0, 2, 0.3);
            prop_assert!((b - c.abs() * a).abs() <= 1e-9 * (1.0 + b));
        }
    }
}
