//! Supremum statistics F = (F1, F2), M0 and their increment fields.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintCheck;
use crate::error::Result;
use crate::field::{FieldPath, WindowDraw};

/// Observation window and the bracketing constants of the cutoffs.
///
/// `I = [i_lo, i_hi]` is the time interval, `J = [j_lo, j_hi]` the space
/// interval; `f0 = 1` on `[c1, big_c1]`, `g0 = 1` on `[c2, big_c2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub s0: f64,
    pub y0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub t_max: f64,
    pub i_lo: f64,
    pub i_hi: f64,
    pub j_lo: f64,
    pub j_hi: f64,
    pub c1: f64,
    pub big_c1: f64,
    pub c2: f64,
    pub big_c2: f64,
    pub big_c1_bar: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            s0: 0.4,
            y0: 0.5,
            delta1: 0.01,
            delta2: 0.02,
            t_max: 1.0,
            i_lo: 0.2,
            i_hi: 0.8,
            j_lo: 0.3,
            j_hi: 0.7,
            c1: 0.1,
            big_c1: 0.9,
            c2: 0.1,
            big_c2: 0.95,
            big_c1_bar: 0.5,
        }
    }
}

impl WindowConfig {
    pub fn with_deltas(mut self, delta1: f64, delta2: f64) -> Self {
        self.delta1 = delta1;
        self.delta2 = delta2;
        self
    }

    /// δ = δ1^{1/2} + δ2.
    pub fn delta(&self) -> f64 {
        self.delta1.sqrt() + self.delta2
    }

    /// Δ• = δ².
    pub fn delta_bullet(&self) -> f64 {
        self.delta().powi(2)
    }

    /// Δ* = δ ∧ (1 − y0).
    pub fn delta_star(&self) -> f64 {
        self.delta().min(1.0 - self.y0)
    }

    fn spatial_room(&self) -> f64 {
        (self.j_lo - self.c2).min((self.big_c2 - self.j_hi) / 2.0)
    }

    /// Bracketing of I and J by the cutoff constants.
    pub fn check_cutoffs(&self) -> Vec<ConstraintCheck> {
        vec![
            ConstraintCheck::less("0 < c₁", 0.0, self.c1),
            ConstraintCheck::less("c₁ < I̲", self.c1, self.i_lo),
            ConstraintCheck::less("I̲ < I̅", self.i_lo, self.i_hi),
            ConstraintCheck::less("I̅ < C₁", self.i_hi, self.big_c1),
            ConstraintCheck::less("C₁ < T", self.big_c1, self.t_max),
            ConstraintCheck::less("0 < c₂", 0.0, self.c2),
            ConstraintCheck::less("c₂ < J̲", self.c2, self.j_lo),
            ConstraintCheck::less("J̲ < J̄", self.j_lo, self.j_hi),
            ConstraintCheck::less("J̄ < C₂", self.j_hi, self.big_c2),
            ConstraintCheck::less("C₂ < 1", self.big_c2, 1.0),
            ConstraintCheck::within("s₀ ∈ I", self.s0, self.i_lo, self.i_hi),
            ConstraintCheck::within("y₀ ∈ J", self.y0, self.j_lo, self.j_hi),
        ]
    }

    /// Conditions for the (F1, F2) window.
    pub fn check_f_geometry(&self) -> Vec<ConstraintCheck> {
        vec![
            ConstraintCheck::less("0 < δ₁", 0.0, self.delta1),
            ConstraintCheck::less("δ₁ < 1", self.delta1, 1.0),
            ConstraintCheck::within("s₀ + δ₁ ∈ I", self.s0 + self.delta1, self.i_lo, self.i_hi),
            ConstraintCheck::less("δ₁^{1/2} < min{J̲−c₂,(C₂−J̄)/2}", self.delta1.sqrt(), self.spatial_room()),
        ]
    }

    /// Conditions for the M0 rectangle.
    pub fn check_m0_geometry(&self) -> Vec<ConstraintCheck> {
        vec![
            ConstraintCheck::less("0 < δ₂", 0.0, self.delta2),
            ConstraintCheck::within("y₀ + δ₂ ∈ J", self.y0 + self.delta2, self.j_lo, self.j_hi),
            ConstraintCheck::less("(δ₁^{1/2}+δ₂)² < C̄₁", self.delta_bullet(), self.big_c1_bar),
            ConstraintCheck::less("C̄₁ < T", self.big_c1_bar, self.t_max),
            ConstraintCheck::less("δ₁^{1/2}+δ₂ < min{J̲−c₂,(C₂−J̄)/2}", self.delta(), self.spatial_room()),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FStats {
    pub f1: f64,
    pub f2: f64,
    pub s: f64,
    /// Number of window times within 1e-12 of the maximum of ū.
    pub ties: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct M0Stats {
    pub m0: f64,
    pub sbar: f64,
    pub xbar: f64,
}

/// F1 = u(s0, y0), F2 = max of ū over grid times in [s0, s0+δ1], S = argmax.
pub fn compute_f(path: &FieldPath, w: &WindowConfig) -> Result<FStats> {
    let g = &path.grid;
    let i0 = g.time_index(w.s0)?;
    let i1 = g.time_index(w.s0 + w.delta1)?;
    let j = g.pos_index(w.y0)?;
    let f1 = path.values[[i0, j]];
    let mut best = 0.0;
    let mut arg = i0;
    for i in i0..=i1 {
        let v = path.values[[i, j]] - f1;
        if v > best {
            best = v;
            arg = i;
        }
    }
    let ties = (i0..=i1).filter(|&i| (path.values[[i, j]] - f1 - best).abs() <= 1e-12).count();
    Ok(FStats {
        f1,
        f2: best,
        s: g.time(arg),
        ties,
    })
}

/// Maximum of u over the grid rectangle [0, δ1] × [y0, y0+δ2]; ties go to
/// the earliest time, then the smallest position.
pub fn compute_m0(path: &FieldPath, w: &WindowConfig) -> Result<M0Stats> {
    let g = &path.grid;
    let i0 = g.time_index(0.0)?;
    let i1 = g.time_index(w.delta1)?;
    let j0 = g.pos_index(w.y0)?;
    let j1 = g.pos_index(w.y0 + w.delta2)?;
    let mut best = f64::NEG_INFINITY;
    let (mut bi, mut bj) = (i0, j0);
    for i in i0..=i1 {
        for j in j0..=j1 {
            let v = path.values[[i, j]];
            if v > best {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    Ok(M0Stats {
        m0: best,
        sbar: g.time(bi),
        xbar: g.pos(bj),
    })
}

/// One CSV row of supremum statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupStatistics {
    pub seed: u64,
    pub path: u64,
    pub f1: f64,
    pub f2: f64,
    pub s: f64,
    pub m0: f64,
    pub sbar: f64,
    pub xbar: f64,
}

pub fn compute_sup_statistics(path: &FieldPath, w: &WindowConfig) -> Result<SupStatistics> {
    let f = compute_f(path, w)?;
    let m = compute_m0(path, w)?;
    Ok(SupStatistics {
        seed: path.seed,
        path: path.path_index,
        f1: f.f1,
        f2: f.f2,
        s: f.s,
        m0: m.m0,
        sbar: m.sbar,
        xbar: m.xbar,
    })
}

pub fn write_sup_csv(out: &mut impl Write, rows: &[SupStatistics]) -> Result<()> {
    writeln!(out, "seed,F1,F2,S,M0,Sbar,Xbar")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{},{}", r.seed, r.f1, r.f2, r.s, r.m0, r.sbar, r.xbar)?;
    }
    Ok(())
}

/// ū(·, y0) on the F window, ǔ on the whole grid and rectangular increments.
pub struct IncrementFields<'a> {
    path: &'a FieldPath,
    /// ū(t_i, y0) for window rows i0..=i1.
    pub ubar: Vec<f64>,
    pub window_start: usize,
    /// ǔ(t, x) = u(t, x) − u(t, y0) on every node.
    pub ucheck: Array2<f64>,
}

impl IncrementFields<'_> {
    /// u(t,x) + u(s,y) − u(t,y) − u(s,x) at rows (t, s), columns (x, y).
    pub fn rect(&self, t: usize, s: usize, x: usize, y: usize) -> f64 {
        let v = &self.path.values;
        (v[[t, x]] - v[[t, y]]) - (v[[s, x]] - v[[s, y]])
    }
}

pub fn increment_fields<'a>(path: &'a FieldPath, w: &WindowConfig) -> Result<IncrementFields<'a>> {
    let g = &path.grid;
    let i0 = g.time_index(w.s0)?;
    let i1 = g.time_index((w.s0 + w.delta1).min(g.t_max))?;
    let j = g.pos_index(w.y0)?;
    let base = path.values[[i0, j]];
    let ubar = (i0..=i1).map(|i| path.values[[i, j]] - base).collect();
    let ucheck = Array2::from_shape_fn(path.values.dim(), |(i, k)| path.values[[i, k]] - path.values[[i, j]]);
    Ok(IncrementFields {
        path,
        ubar,
        window_start: i0,
        ucheck,
    })
}

/// Time offsets (δ1/m)·2^{-k}·{1, 4/3, 5/3}, k = 1..=levels, that probe ū
/// ever closer to s0.
pub fn f2_refinement_offsets(delta1: f64, m: usize, levels: usize) -> Vec<(f64, f64)> {
    let h = delta1 / m as f64;
    let mut out = Vec::with_capacity(3 * levels);
    for k in 1..=levels {
        let base = h * 0.5f64.powi(k as i32);
        for f in [1.0, 4.0 / 3.0, 5.0 / 3.0] {
            out.push((base * f, 0.0));
        }
    }
    out
}

/// Points (t, x) at times (δ1/mt)·4^{-k}·{1, 2}, k = 1..=levels, and
/// `nxs` positions spread over (y0, y0+δ2).
pub fn m0_refinement_points(w: &WindowConfig, mt: usize, levels: usize, nxs: usize) -> Vec<(f64, f64)> {
    let h = w.delta1 / mt as f64;
    let mut out = Vec::with_capacity(2 * levels * nxs);
    for k in 1..=levels {
        let base = h * 0.25f64.powi(k as i32);
        for f in [1.0, 2.0] {
            for l in 0..nxs {
                out.push((base * f, w.y0 + w.delta2 * (l as f64 + 0.5) / nxs as f64));
            }
        }
    }
    out
}

/// Draws the configured extra points in order until one is positive.
/// Returns its index, or `None` when every extra point is ≤ 0.
pub fn certify_positive(draw: &mut WindowDraw<'_>, extras: usize) -> Option<usize> {
    (0..extras).find(|&k| draw.extra(k) > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::field::SpaceTimeGrid;
    use crate::green::BoundaryCondition;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(1.0, 100, 20).unwrap()
    }

    #[test]
    fn zero_path() {
        let p = FieldPath::from_fn(grid(), BoundaryCondition::Dirichlet, |_, _| 0.0);
        let w = WindowConfig::default().with_deltas(0.1, 0.1);
        let f = compute_f(&p, &w).unwrap();
        assert_eq!((f.f1, f.f2, f.s), (0.0, 0.0, 0.4));
        let m = compute_m0(&p, &w).unwrap();
        assert_eq!((m.m0, m.sbar, m.xbar), (0.0, 0.0, 0.5));
    }

    #[test]
    fn linear_ramp() {
        let w = WindowConfig {
            s0: 0.2,
            ..WindowConfig::default()
        }
        .with_deltas(0.1, 0.1);
        let p = FieldPath::from_fn(grid(), BoundaryCondition::Neumann, |t, _| t - 0.2 + 0.7);
        let f = compute_f(&p, &w).unwrap();
        assert!((f.f1 - 0.7).abs() < 1e-15);
        assert!((f.f2 - 0.1).abs() < 1e-12);
        assert!((f.s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn separable_m0() {
        let w = WindowConfig::default().with_deltas(0.1, 0.1);
        let p = FieldPath::from_fn(grid(), BoundaryCondition::Neumann, |t, _| t);
        let m = compute_m0(&p, &w).unwrap();
        assert!((m.m0 - 0.1).abs() < 1e-12 && (m.sbar - 0.1).abs() < 1e-12);
        assert_eq!(m.xbar, 0.5);
    }

    #[test]
    fn off_grid_window_is_config_error() {
        let p = FieldPath::from_fn(grid(), BoundaryCondition::Neumann, |t, _| t);
        let w = WindowConfig {
            s0: 0.405,
            ..WindowConfig::default()
        };
        assert!(matches!(compute_f(&p, &w), Err(Error::Config(_))));
    }

    #[test]
    fn increments_and_rect_antisymmetry() {
        let p = FieldPath::from_fn(grid(), BoundaryCondition::Neumann, |t, x| (3.0 * t).sin() * (x * x + t));
        let w = WindowConfig::default().with_deltas(0.1, 0.1);
        let inc = increment_fields(&p, &w).unwrap();
        assert_eq!(inc.ubar[0], 0.0);
        let jy = 10;
        assert!(inc.ucheck.column(jy).iter().all(|v| *v == 0.0));
        for (t, s, x, y) in [(3, 7, 2, 9), (50, 10, 4, 4), (1, 99, 0, 20)] {
            let r = inc.rect(t, s, x, y);
            assert_eq!(r, -inc.rect(s, t, x, y));
            assert_eq!(r, -inc.rect(t, s, y, x));
        }
    }

    #[test]
    fn geometry_checks() {
        let w = WindowConfig::default();
        assert!(crate::constraint::all_hold(&w.check_cutoffs()));
        assert!(crate::constraint::all_hold(&w.check_f_geometry()));
        assert!(crate::constraint::all_hold(&w.check_m0_geometry()));
        let bad = WindowConfig {
            j_lo: 0.4,
            j_hi: 0.6,
            ..WindowConfig::default()
        }
        .with_deltas(0.5, 0.02);
        let fails: Vec<_> = bad.check_f_geometry().into_iter().filter(|c| !c.holds).map(|c| c.name).collect();
        assert!(fails.iter().any(|n| n == "δ₁^{1/2} < min{J̲−c₂,(C₂−J̄)/2}"));
    }

    #[test]
    fn refinement_offsets_shrink() {
        let o = f2_refinement_offsets(0.04, 64, 5);
        assert_eq!(o.len(), 15);
        assert!(o.windows(3).step_by(3).all(|w| w[0].0 < w[1].0 && w[1].0 < w[2].0));
        assert!(o[14].0 < 0.04 / 64.0 / 16.0);
    }
}
