//! Malliavin derivative kernels, the auxiliary fields u_A¹ and u_A², pairing
//! identities and Walsh integrals against stored noise.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::field::{dual_widths, FieldPath, NoiseField};
use crate::green::{evaluate_green, heat_identity_a, BoundaryCondition, KernelParams};
use crate::quad::{integrate, QuadSpec};
use crate::seminorm::{psi_trace, CutoffSpec, SeminormParams, YTrace};
use crate::smooth::{Plateau, Profile};
use crate::suprema::WindowConfig;

/// Default absolute tolerance of the pairing quadratures.
pub const PAIRING_TOL: f64 = 1e-8;

/// (r, v) ↦ 1_{r<t}·G(t−r, x, v), the derivative of u(t, x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeKernel {
    pub t: f64,
    pub x: f64,
    pub bc: BoundaryCondition,
}

impl DerivativeKernel {
    pub fn new(t: f64, x: f64, bc: BoundaryCondition) -> Self {
        Self { t, x, bc }
    }

    pub fn eval(&self, r: f64, v: f64, params: &KernelParams) -> Result<f64> {
        if r >= self.t {
            return Ok(0.0);
        }
        evaluate_green(self.t - r, self.x, v, self.bc, params)
    }

    /// ⟨Du(t,x), Du(s,y)⟩ by nested quadrature of the kernel product.
    pub fn pairing(&self, other: &DerivativeKernel, params: &KernelParams, tol: f64) -> Result<f64> {
        if self.bc != other.bc {
            return Err(precondition("kernels with different boundary conditions"));
        }
        let m = self.t.min(other.t);
        if m <= 0.0 {
            return Ok(0.0);
        }
        let mut failure = None;
        let mut outer = |sigma: f64| -> f64 {
            let r = m - sigma * sigma;
            let (ta, tb) = (self.t - r, other.t - r);
            if ta <= 0.0 || tb <= 0.0 || failure.is_some() {
                return 0.0;
            }
            let w = ta.min(tb).sqrt();
            let mut pts = vec![self.x, other.x];
            for c in [self.x, other.x] {
                pts.extend([c - 4.0 * w, c + 4.0 * w, c - 10.0 * w, c + 10.0 * w]);
            }
            let inner = integrate(
                |v| {
                    crate::green::green_image_or_eigen(ta, self.x, v, self.bc, params)
                        * crate::green::green_image_or_eigen(tb, other.x, v, self.bc, params)
                },
                0.0,
                1.0,
                &pts,
                QuadSpec::abs(0.05 * tol / (1.0 + m.sqrt())),
            );
            match inner {
                Ok(q) => 2.0 * sigma * q.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        let res = integrate(&mut outer, 0.0, m.sqrt(), &[], QuadSpec::abs(0.5 * tol));
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(res?.value)
    }
}

/// Cutoff functions of the localisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxFieldSpec {
    pub f0: Plateau,
    pub g0: Plateau,
    pub phi0: Plateau,
    pub phi_delta1: Plateau,
    pub phibar_delta: Plateau,
}

impl AuxFieldSpec {
    pub fn from_window(w: &WindowConfig) -> Result<Self> {
        let sd = w.delta1.sqrt();
        let d = w.delta();
        Ok(Self {
            f0: Plateau::new(w.c1 / 2.0, w.c1, w.big_c1, (w.big_c1 + w.t_max) / 2.0)?,
            g0: Plateau::new(w.c2 / 2.0, w.c2, w.big_c2, (w.big_c2 + 1.0) / 2.0)?,
            phi0: Plateau::new(-1.0, 0.0, 1.0, 2.0)?,
            phi_delta1: Plateau::new(w.y0 - sd, w.y0, w.y0 + sd, w.y0 + 2.0 * sd)?,
            phibar_delta: Plateau::new(w.y0 - d, w.y0, w.y0 + d, w.y0 + 2.0 * d)?,
        })
    }
}

/// ⟨DF1, u_A¹⟩ = A(s0, y0) for u_A¹ = (∂_r − ∂²_v)(f0 g0).
pub fn pair_df1_ua1(w: &WindowConfig, spec: &AuxFieldSpec, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    if w.s0 <= 0.0 {
        return Err(Error::Domain("s0 = 0 makes F1 identically zero".into()));
    }
    heat_identity_a(w.s0, w.y0, &spec.f0, &spec.g0, bc, params, PAIRING_TOL)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingMode {
    /// Both times must lie in I.
    Strict,
    /// Any times; used to show the pairing is nonzero off the plateau.
    Diagnostic,
}

/// ⟨D(u(t,y0) − u(s,y0)), u_A¹⟩ = A(t, y0) − A(s, y0).
pub fn pair_duincrement_ua1(
    t: f64,
    s: f64,
    w: &WindowConfig,
    spec: &AuxFieldSpec,
    bc: BoundaryCondition,
    params: &KernelParams,
    mode: PairingMode,
) -> Result<f64> {
    if mode == PairingMode::Strict {
        for v in [t, s] {
            if v < w.i_lo || v > w.i_hi {
                return Err(precondition(format!("time {v} outside I = [{}, {}]", w.i_lo, w.i_hi)));
            }
        }
    }
    if t == s {
        return Ok(0.0);
    }
    let a = heat_identity_a(t, w.y0, &spec.f0, &spec.g0, bc, params, PAIRING_TOL)?;
    let b = heat_identity_a(s, w.y0, &spec.f0, &spec.g0, bc, params, PAIRING_TOL)?;
    Ok(a - b)
}

/// Row-indexed grid field used for discrete 𝓗 inner products: row k covers
/// the time cell [t_{first_row+k}, t_{first_row+k+1}) of width `dt`, column
/// j the dual cell of width `widths[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HField {
    pub first_row: usize,
    pub dt: f64,
    pub widths: Vec<f64>,
    pub values: Array2<f64>,
}

impl HField {
    pub fn norm_sq(&self) -> f64 {
        h_inner(self, self)
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.first_row..self.first_row + self.values.nrows()
    }
}

/// Σ_n Σ_j dt·w_j·a(n,j)·b(n,j) over the rows both fields share.
pub fn h_inner(a: &HField, b: &HField) -> f64 {
    let lo = a.first_row.max(b.first_row);
    let hi = a.rows().end.min(b.rows().end);
    let mut s = 0.0;
    for n in lo..hi {
        let ra = a.values.row(n - a.first_row);
        let rb = b.values.row(n - b.first_row);
        for j in 0..a.widths.len() {
            s += a.widths[j] * ra[j] * rb[j];
        }
    }
    s * a.dt
}

/// Left-point discretisation of Du(t, x) on a full-space grid with step dt.
pub fn derivative_kernel_field(k: &DerivativeKernel, dt: f64, nx: usize, params: &KernelParams) -> Result<HField> {
    let rows = (k.t / dt - 1e-9).ceil().max(0.0) as usize;
    let mut values = Array2::zeros((rows, nx + 1));
    for n in 0..rows {
        for j in 0..=nx {
            values[[n, j]] = k.eval(n as f64 * dt, j as f64 / nx as f64, params)?;
        }
    }
    Ok(HField {
        first_row: 0,
        dt,
        widths: dual_widths(nx),
        values,
    })
}

/// u_A² on the cells of the window, together with ψ(Y) and its integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Ua2Field {
    pub field: HField,
    /// Cell left endpoints r_k (window times except the last).
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub psi: Vec<f64>,
    /// Ψ(r_k) = Σ_{i<k} ψ_i·dt.
    pub big_psi: Vec<f64>,
}

impl Ua2Field {
    /// u_A²(r, v) at a grid column; zero outside ]s0, s0+δ1].
    pub fn value_at(&self, r: f64, j: usize) -> f64 {
        let t0 = self.times[0];
        let dt = self.field.dt;
        if r <= t0 || r > t0 + dt * self.times.len() as f64 + 1e-15 {
            return 0.0;
        }
        let k = (((r - t0) / dt).ceil() as usize).clamp(1, self.times.len()) - 1;
        self.field.values[[k, j]]
    }

    /// Adapted view: row k only uses the path up to r_k.
    pub fn adapted(&self) -> AdaptedField {
        AdaptedField {
            first_row: self.field.first_row,
            values: self.field.values.clone(),
            measurable_through: self.field.rows().collect(),
        }
    }
}

/// u_A²(r,v) = φ(v)ψ(Y_r) − φ''(v)Ψ(r) from a Y trace on window times with
/// spacing dt. `first_row` is the noise row of the first window cell.
pub fn build_ua2_from_trace(trace: &YTrace, cut: &CutoffSpec, phi: &Plateau, nx: usize, first_row: usize) -> Ua2Field {
    let m = trace.len() - 1;
    let dt = if m > 0 { trace.times[1] - trace.times[0] } else { 0.0 };
    let psi_all = psi_trace(trace, cut);
    let psi: Vec<f64> = psi_all[..m].to_vec();
    let mut big_psi = Vec::with_capacity(m);
    let mut acc = 0.0;
    for p in &psi {
        big_psi.push(acc);
        acc += p * dt;
    }
    let xs: Vec<f64> = (0..=nx).map(|j| j as f64 / nx as f64).collect();
    let ph: Vec<f64> = xs.iter().map(|&v| phi.value(v)).collect();
    let ph2: Vec<f64> = xs.iter().map(|&v| phi.d2(v)).collect();
    let values = Array2::from_shape_fn((m, nx + 1), |(k, j)| ph[j] * psi[k] - ph2[j] * big_psi[k]);
    Ua2Field {
        field: HField {
            first_row,
            dt,
            widths: dual_widths(nx),
            values,
        },
        times: trace.times[..m].to_vec(),
        xs,
        psi,
        big_psi,
    }
}

/// u_A² for a full-space path whose grid contains the window.
pub fn build_ua2(path: &FieldPath, w: &WindowConfig, sp: &SeminormParams, cut: &CutoffSpec, spec: &AuxFieldSpec) -> Result<Ua2Field> {
    if !path.grid.full_space() {
        return Err(Error::Config("u_A² needs a full-space grid".into()));
    }
    let trace = crate::seminorm::y_trace(path, w, sp)?;
    let first = path.grid.time_index(w.s0)?;
    Ok(build_ua2_from_trace(&trace, cut, &spec.phi_delta1, path.grid.nx, first))
}

/// Integrand on noise rows first_row.. whose row k is a function of the
/// path up to row `measurable_through[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedField {
    pub first_row: usize,
    pub values: Array2<f64>,
    pub measurable_through: Vec<usize>,
}

impl AdaptedField {
    pub fn deterministic(values: Array2<f64>, first_row: usize) -> Self {
        let n = values.nrows();
        Self {
            first_row,
            values,
            measurable_through: vec![0; n],
        }
    }
}

/// Σ_n Σ_j h(t_n, x_j)·W^n_j. Path row n depends on noise rows < n, so a
/// row may use the path up to its own time index and no further.
pub fn walsh_integral(noise: &NoiseField, h: &AdaptedField) -> Result<f64> {
    let (rows, cols) = h.values.dim();
    if cols != noise.increments.ncols() || h.first_row + rows > noise.increments.nrows() || h.measurable_through.len() != rows {
        return Err(Error::Config("integrand does not fit the noise grid".into()));
    }
    let mut s = 0.0;
    for k in 0..rows {
        let n = h.first_row + k;
        if h.measurable_through[k] > n {
            return Err(Error::Adaptedness {
                row: n,
                through: h.measurable_through[k],
            });
        }
        let w = noise.increments.row(n);
        s += h.values.row(k).iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(s)
}

/// 2p0 ΣΣ_{i≠j} w_i w_j (u_i−u_j)^{2p0−1}/|t_i−t_j|^{γ0/2}·(a_i − a_j) with
/// trapezoid weights, where a_i = ⟨Du(t_i, y0), h⟩ for some h.
pub fn dy_pairing_sum(values: &[f64], a: &[f64], h: f64, p0: u32, gamma0: f64) -> f64 {
    let n = values.len();
    let scale = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if n < 2 || !(scale > 0.0) {
        return 0.0;
    }
    let q = 2 * p0 as i32 - 1;
    let w = |i: usize| if i == 0 || i + 1 == n { 0.5 * h } else { h };
    let mut s = 0.0;
    for i in 1..n {
        for j in 0..i {
            let d = (values[i] - values[j]) / scale;
            // (i,j) and (j,i) contribute equally: odd power times odd difference
            s += 2.0 * w(i) * w(j) * d.powi(q) * (a[i] - a[j]) / (h * (i - j) as f64).powf(gamma0 / 2.0);
        }
    }
    2.0 * p0 as f64 * s * scale.powi(q)
}

/// ⟨DY_r, u_A¹⟩ at r = s0 + δ1, with ⟨Du(t, y0), u_A¹⟩ = A(t, y0) evaluated
/// by the heat-identity quadrature at every window time.
pub fn pair_dyr_ua1(
    path: &FieldPath,
    w: &WindowConfig,
    sp: &SeminormParams,
    spec: &AuxFieldSpec,
    bc: BoundaryCondition,
    params: &KernelParams,
) -> Result<f64> {
    let g = &path.grid;
    let i0 = g.time_index(w.s0)?;
    let i1 = g.time_index(w.s0 + w.delta1)?;
    let j = g.pos_index(w.y0)?;
    let vals: Vec<f64> = (i0..=i1).map(|i| path.values[[i, j]]).collect();
    if vals.iter().all(|v| *v == vals[0]) {
        return Ok(0.0);
    }
    let a = (i0..=i1)
        .map(|i| heat_identity_a(g.time(i), w.y0, &spec.f0, &spec.g0, bc, params, 1e-10))
        .collect::<Result<Vec<_>>>()?;
    Ok(dy_pairing_sum(&vals, &a, g.dt(), sp.p0, sp.gamma0))
}

/// Continuous piecewise-linear profile through (knots[k], values[k]),
/// constant before the first knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    fn locate(&self, r: f64) -> Option<usize> {
        if r <= self.knots[0] {
            return None;
        }
        let k = self.knots.partition_point(|&t| t < r);
        Some(k.min(self.knots.len() - 1))
    }
}

impl Profile for PiecewiseLinear {
    fn value(&self, r: f64) -> f64 {
        match self.locate(r) {
            None => self.values[0],
            Some(k) => {
                let (a, b) = (self.knots[k - 1], self.knots[k]);
                let f = ((r - a) / (b - a)).min(1.0);
                self.values[k - 1] + f * (self.values[k] - self.values[k - 1])
            }
        }
    }
    fn d1(&self, r: f64) -> f64 {
        match self.locate(r) {
            None => 0.0,
            Some(k) if r > self.knots[k] => 0.0,
            Some(k) => (self.values[k] - self.values[k - 1]) / (self.knots[k] - self.knots[k - 1]),
        }
    }
    fn d2(&self, _r: f64) -> f64 {
        0.0
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// ⟨D(u(S,y0) − u(s0,y0)), u_A²⟩ by quadrature, for S = times[k_s].
/// u_A² = (∂_r − ∂²_v)(φ·Ψ) with Ψ piecewise linear, so this is the heat
/// identity at (S, y0); it should equal Ψ(S) = ∫_{s0}^S ψ(Y_r)dr.
pub fn pair_df2_ua2(ua2: &Ua2Field, k_s: usize, phi: &Plateau, y0: f64, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    let m = ua2.times.len();
    if k_s > m {
        return Err(Error::Config(format!("S index {k_s} beyond the window")));
    }
    if k_s == 0 {
        return Ok(0.0);
    }
    let mut knots = ua2.times.clone();
    knots.push(ua2.times[0] + m as f64 * ua2.field.dt);
    let mut values = ua2.big_psi.clone();
    values.push(ua2.big_psi[m - 1] + ua2.psi[m - 1] * ua2.field.dt);
    let prof = PiecewiseLinear { knots: knots.clone(), values };
    heat_identity_a(knots[k_s], y0, &prof, phi, bc, params, PAIRING_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpaceTimeGrid;
    use crate::green::covariance;
    use approx::assert_relative_eq;

    fn kp() -> KernelParams {
        KernelParams::default()
    }

    #[test]
    fn kernel_pairing_is_covariance() {
        let bc = BoundaryCondition::Neumann;
        for &(t, x, s, y) in &[(0.3, 0.2, 0.5, 0.6), (0.05, 0.5, 0.05, 0.5)] {
            let a = DerivativeKernel::new(t, x, bc);
            let b = DerivativeKernel::new(s, y, bc);
            let p = a.pairing(&b, &kp(), 1e-9).unwrap();
            assert_relative_eq!(p, covariance(t, x, s, y, bc, &kp()).unwrap(), epsilon = 1e-7);
        }
    }

    #[test]
    fn df1_pairing_is_one() {
        let w = WindowConfig::default();
        let spec = AuxFieldSpec::from_window(&w).unwrap();
        let v = pair_df1_ua1(&w, &spec, BoundaryCondition::Dirichlet, &kp()).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-5);
        let bad = WindowConfig { s0: 0.0, ..w };
        assert!(pair_df1_ua1(&bad, &spec, BoundaryCondition::Dirichlet, &kp()).is_err());
    }

    #[test]
    fn increment_pairing_vanishes_on_plateau() {
        let w = WindowConfig::default();
        let spec = AuxFieldSpec::from_window(&w).unwrap();
        let bc = BoundaryCondition::Neumann;
        assert_eq!(pair_duincrement_ua1(0.5, 0.5, &w, &spec, bc, &kp(), PairingMode::Strict).unwrap(), 0.0);
        let v = pair_duincrement_ua1(w.s0, w.s0 + w.delta1, &w, &spec, bc, &kp(), PairingMode::Strict).unwrap();
        assert!(v.abs() < 1e-6);
        let d = pair_duincrement_ua1(0.5, 0.07, &w, &spec, bc, &kp(), PairingMode::Diagnostic).unwrap();
        assert_relative_eq!(d, 1.0 - spec.f0.value(0.07), epsilon = 1e-6);
        assert!(d.abs() > 0.1);
        assert!(pair_duincrement_ua1(0.5, 0.07, &w, &spec, bc, &kp(), PairingMode::Strict).is_err());
    }

    #[test]
    fn walsh_rejects_anticipating_integrand() {
        let g = SpaceTimeGrid::new(0.01, 10, 4).unwrap();
        let noise = NoiseField::zeros(g);
        let mut h = AdaptedField::deterministic(Array2::ones((10, 5)), 0);
        h.measurable_through[3] = 4;
        assert!(matches!(walsh_integral(&noise, &h), Err(Error::Adaptedness { row: 3, through: 4 })));
    }

    #[test]
    fn ua2_with_unit_psi() {
        let n = 11;
        let times: Vec<f64> = (0..n).map(|i| 0.4 + i as f64 * 0.001).collect();
        let trace = YTrace {
            times,
            log_y: vec![f64::NEG_INFINITY; n],
            dropped: 0,
        };
        let sp = SeminormParams::time_default();
        let cut = CutoffSpec::time(-70.0, 0.3, 0.01, &sp);
        let phi = Plateau::new(0.4, 0.5, 0.6, 0.7).unwrap();
        let u = build_ua2_from_trace(&trace, &cut, &phi, 20, 40);
        for k in 0..n - 1 {
            for j in 0..=20 {
                let v = j as f64 / 20.0;
                let r = 0.4 + k as f64 * 0.001;
                assert_relative_eq!(u.field.values[[k, j]], phi.value(v) - (r - 0.4) * phi.d2(v), epsilon = 1e-12);
            }
        }
        assert_eq!(u.value_at(0.4, 3), 0.0);
        assert_eq!(u.value_at(0.3, 3), 0.0);
    }

    #[test]
    fn df1_and_ua2_rows_are_disjoint() {
        let dt = 0.001;
        let k = DerivativeKernel::new(0.4, 0.5, BoundaryCondition::Dirichlet);
        let d = derivative_kernel_field(&k, dt, 16, &kp()).unwrap();
        let times: Vec<f64> = (0..11).map(|i| 0.4 + i as f64 * dt).collect();
        let trace = YTrace {
            times,
            log_y: vec![f64::NEG_INFINITY; 11],
            dropped: 0,
        };
        let sp = SeminormParams::time_default();
        let cut = CutoffSpec::time(-70.0, 0.3, 0.01, &sp);
        let phi = Plateau::new(0.4, 0.5, 0.6, 0.7).unwrap();
        let u = build_ua2_from_trace(&trace, &cut, &phi, 16, 400);
        assert_eq!(d.rows().end, 400);
        assert_eq!(h_inner(&d, &u.field), 0.0);
    }

    #[test]
    fn dy_pairing_zero_for_constant_a() {
        let vals = [0.0, 0.3, -0.1, 0.4];
        assert_eq!(dy_pairing_sum(&vals, &[1.0; 4], 0.01, 7, 4.5), 0.0);
        assert_eq!(dy_pairing_sum(&[0.2; 4], &[0.0, 1.0, 2.0, 3.0], 0.01, 7, 4.5), 0.0);
    }

    #[test]
    fn piecewise_linear_profile() {
        let p = PiecewiseLinear {
            knots: vec![1.0, 2.0, 3.0],
            values: vec![0.0, 1.0, 1.5],
        };
        assert_eq!(p.value(0.5), 0.0);
        assert_relative_eq!(p.value(2.5), 1.25);
        assert_relative_eq!(p.d1(2.5), 0.5);
        assert_eq!(p.value(4.0), 1.5);
    }
}
