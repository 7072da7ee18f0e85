//! Heat kernel on [0,1] with Dirichlet or Neumann boundary conditions for
//! ∂u/∂t = ∂²u/∂x², its space-time covariance and the heat identity A.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::quad::{integrate, QuadSpec};
use crate::smooth::Profile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    /// Index of the first eigenmode (Neumann has the constant mode 0).
    pub fn first_mode(self) -> usize {
        match self {
            Self::Dirichlet => 1,
            Self::Neumann => 0,
        }
    }

    pub fn eigenvalue(self, n: usize) -> f64 {
        let k = n as f64 * PI;
        k * k
    }

    /// Orthonormal eigenfunction e_n(x) of -d²/dx² in L²([0,1]).
    pub fn eigenfunction(self, n: usize, x: f64) -> f64 {
        match self {
            Self::Dirichlet => SQRT_2 * (n as f64 * PI * x).sin(),
            Self::Neumann if n == 0 => 1.0,
            Self::Neumann => SQRT_2 * (n as f64 * PI * x).cos(),
        }
    }

    /// Sign of the reflected image term.
    fn image_sign(self) -> f64 {
        match self {
            Self::Dirichlet => -1.0,
            Self::Neumann => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Eigen,
    Image,
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub truncation: usize,
    pub tolerance: f64,
    pub method: KernelMethod,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            truncation: 4096,
            tolerance: 1e-10,
            method: KernelMethod::Auto,
        }
    }
}

impl KernelParams {
    pub fn with_method(mut self, method: KernelMethod) -> Self {
        self.method = method;
        self
    }

    fn check(&self) -> Result<()> {
        if self.truncation == 0 || !(self.tolerance > 0.0) {
            return Err(domain("kernel params need truncation >= 1 and tolerance > 0"));
        }
        Ok(())
    }

    fn use_image(&self, t: f64) -> bool {
        match self.method {
            KernelMethod::Eigen => false,
            KernelMethod::Image => true,
            KernelMethod::Auto => t < AUTO_CROSSOVER,
        }
    }
}

/// Below this time Auto evaluates by images, above it by eigenmodes.
pub const AUTO_CROSSOVER: f64 = 0.05;

const IMAGE_CUTOFF: f64 = 1e-16;

fn check_pos(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("position {x} outside [0,1]")));
    }
    Ok(())
}

/// Whole-line heat kernel for ∂t = ∂²x.
pub fn gaussian_kernel(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// ∫₀^τ p(σ, z) dσ in closed form.
pub fn gaussian_kernel_time_integral(tau: f64, z: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let a = z.abs();
    (tau / PI).sqrt() * (-a * a / (4.0 * tau)).exp() - 0.5 * a * libm::erfc(a / (2.0 * tau.sqrt()))
}

/// Image sum Σ_k [k(x−y+2k) ± k(x+y+2k)] for a kernel `k` decaying in |z|.
fn image_sum(x: f64, y: f64, sign: f64, cutoff: f64, kern: impl Fn(f64) -> f64) -> f64 {
    let mut total = kern(x - y) + sign * kern(x + y);
    let mut k = 1i64;
    loop {
        let s = 2.0 * k as f64;
        let terms = [kern(x - y + s), kern(x - y - s), kern(x + y + s), kern(x + y - s)];
        total += terms[0] + terms[1] + sign * (terms[2] + terms[3]);
        let biggest = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if k >= 2 && biggest < cutoff {
            break;
        }
        k += 1;
    }
    total
}

fn green_image(t: f64, x: f64, y: f64, bc: BoundaryCondition) -> f64 {
    image_sum(x, y, bc.image_sign(), IMAGE_CUTOFF, |z| gaussian_kernel(t, z))
}

fn green_eigen(t: f64, x: f64, y: f64, bc: BoundaryCondition, p: &KernelParams) -> Result<f64> {
    let mut sum = 0.0;
    let mut tail = f64::INFINITY;
    let mut n = bc.first_mode();
    while n <= p.truncation {
        sum += bc.eigenfunction(n, x) * bc.eigenfunction(n, y) * (-bc.eigenvalue(n) * t).exp();
        // Σ_{m>n} 2e^{-π²m²t} bounded by a geometric series.
        let m = (n + 1) as f64;
        let r = (-PI * PI * (2.0 * m + 1.0) * t).exp();
        tail = 2.0 * (-PI * PI * m * m * t).exp() / (1.0 - r);
        if tail <= p.tolerance {
            return Ok(sum);
        }
        n += 1;
    }
    Err(Error::Truncation {
        modes: p.truncation,
        achieved: tail,
        tolerance: p.tolerance,
    })
}

/// G(t, x, y).
pub fn evaluate_green(t: f64, x: f64, y: f64, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    params.check()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("kernel time must be positive, got {t}")));
    }
    check_pos(x)?;
    check_pos(y)?;
    if params.use_image(t) {
        Ok(green_image(t, x, y, bc))
    } else {
        green_eigen(t, x, y, bc, params)
    }
}

/// Σ_{n≥1} e_n(x)e_n(y)/(2λ_n), the τ = 0 value of [`stationary_part`].
pub fn stationary_part_at_zero(x: f64, y: f64, bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Dirichlet => 0.5 * x.min(y) * (1.0 - x.max(y)),
        BoundaryCondition::Neumann => {
            let h = |z: f64| 1.0 / 6.0 - z / 2.0 + z * z / 4.0;
            0.5 * (h((x - y).abs()) + h(x + y))
        }
    }
}

/// S(τ) = Σ_{n≥1} e_n(x)e_n(y)e^{-λ_n τ}/(2λ_n).
pub fn stationary_part(tau: f64, x: f64, y: f64, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    if tau == 0.0 {
        return Ok(stationary_part_at_zero(x, y, bc));
    }
    if params.use_image(tau) {
        let j = image_sum(x, y, bc.image_sign(), 1e-18, |z| gaussian_kernel_time_integral(tau, z));
        let mass = match bc {
            BoundaryCondition::Dirichlet => 0.0,
            BoundaryCondition::Neumann => tau,
        };
        return Ok(stationary_part_at_zero(x, y, bc) - 0.5 * (j - mass));
    }
    let mut sum = 0.0;
    let mut tail = f64::INFINITY;
    for n in 1..=params.truncation {
        let lam = bc.eigenvalue(n);
        sum += bc.eigenfunction(n, x) * bc.eigenfunction(n, y) * (-lam * tau).exp() / (2.0 * lam);
        let m = (n + 1) as f64;
        tail = (-PI * PI * m * m * tau).exp() / (PI * PI * n as f64);
        if tail <= params.tolerance {
            return Ok(sum);
        }
    }
    Err(Error::Truncation {
        modes: params.truncation,
        achieved: tail,
        tolerance: params.tolerance,
    })
}

/// E[u(t,x) u(s,y)].
pub fn covariance(t: f64, x: f64, s: f64, y: f64, bc: BoundaryCondition, params: &KernelParams) -> Result<f64> {
    params.check()?;
    if !(t >= 0.0 && s >= 0.0) || !(t.is_finite() && s.is_finite()) {
        return Err(domain(format!("covariance times must be nonnegative, got {t}, {s}")));
    }
    check_pos(x)?;
    check_pos(y)?;
    if t == 0.0 || s == 0.0 {
        return Ok(0.0);
    }
    let near = stationary_part((t - s).abs(), x, y, bc, params)?;
    let far = stationary_part(t + s, x, y, bc, params)?;
    let zero_mode = match bc {
        BoundaryCondition::Dirichlet => 0.0,
        BoundaryCondition::Neumann => t.min(s),
    };
    Ok(near - far + zero_mode)
}

/// E[(u(t,x)+u(s,y)−u(t,y)−u(s,x))²].
pub fn rect_increment_variance(
    t: f64,
    s: f64,
    x: f64,
    y: f64,
    bc: BoundaryCondition,
    params: &KernelParams,
) -> Result<f64> {
    if t == s || x == y {
        return Ok(0.0);
    }
    // increment = Σ c_i u(p_i)
    let pts = [(t, x, 1.0), (s, y, 1.0), (t, y, -1.0), (s, x, -1.0)];
    let mut v = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i..] {
            let c = covariance(a.0, a.1, b.0, b.1, bc, params)?;
            let w = if std::ptr::eq(a, b) { 1.0 } else { 2.0 };
            v += w * a.2 * b.2 * c;
        }
    }
    Ok(v.max(0.0))
}

/// A(t,x) = ∫₀^t∫₀¹ G(t−r,x,v)(∂_r − ∂²_v)(f(r)g(v)) dv dr by nested
/// adaptive quadrature; the outer variable is σ with r = t − σ².
pub fn heat_identity_a(
    t: f64,
    x: f64,
    f: &dyn Profile,
    g: &dyn Profile,
    bc: BoundaryCondition,
    params: &KernelParams,
    tol: f64,
) -> Result<f64> {
    params.check()?;
    check_pos(x)?;
    if !(t >= 0.0) {
        return Err(domain(format!("time must be nonnegative, got {t}")));
    }
    if f.value(0.0).abs() > 1e-12 {
        return Err(precondition(format!("f(0) = {} must vanish", f.value(0.0))));
    }
    check_bc(g, bc)?;
    if t == 0.0 {
        return Ok(0.0);
    }

    let gbreaks = g.breakpoints();
    let inner_tol = 0.05 * tol / (1.0 + t.sqrt());
    let mut failure: Option<Error> = None;
    let outer = |sigma: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let tau = sigma * sigma;
        if tau == 0.0 {
            return 0.0;
        }
        let r = t - tau;
        let (fr, dfr) = (f.value(r), f.d1(r));
        if fr == 0.0 && dfr == 0.0 {
            return 0.0;
        }
        let sq = tau.sqrt();
        let mut pts = gbreaks.clone();
        pts.extend([x, x - 4.0 * sq, x + 4.0 * sq, x - 10.0 * sq, x + 10.0 * sq]);
        let inner = integrate(
            |v| {
                let gk = green_image_or_eigen(tau, x, v, bc, params);
                gk * (dfr * g.value(v) - fr * g.d2(v))
            },
            0.0,
            1.0,
            &pts,
            QuadSpec::abs(inner_tol),
        );
        match inner {
            Ok(q) => 2.0 * sigma * q.value,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let fbreaks: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .filter(|b| *b > 0.0 && *b < t)
        .map(|b| (t - b).sqrt())
        .collect();
    let mut outer = outer;
    let res = integrate(&mut outer, 0.0, t.sqrt(), &fbreaks, QuadSpec::abs(0.5 * tol));
    drop(outer);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(res?.value)
}

/// Kernel evaluation for interior quadrature nodes; never fails for τ > 0.
pub(crate) fn green_image_or_eigen(tau: f64, x: f64, v: f64, bc: BoundaryCondition, params: &KernelParams) -> f64 {
    if tau < AUTO_CROSSOVER || params.method == KernelMethod::Image {
        green_image(tau, x, v, bc)
    } else {
        green_eigen(tau, x, v, bc, params).unwrap_or_else(|_| green_image(tau, x, v, bc))
    }
}

fn check_bc(g: &dyn Profile, bc: BoundaryCondition) -> Result<()> {
    let tol = 1e-9;
    match bc {
        BoundaryCondition::Dirichlet => {
            let (a, b) = (g.value(0.0), g.value(1.0));
            if a.abs() > tol || b.abs() > tol {
                return Err(precondition(format!("Dirichlet profile must vanish at 0 and 1, got {a}, {b}")));
            }
        }
        BoundaryCondition::Neumann => {
            let (a, b) = (g.d1(0.0), g.d1(1.0));
            if a.abs() > tol || b.abs() > tol {
                return Err(precondition(format!("Neumann profile needs zero slope at 0 and 1, got {a}, {b}")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::FnProfile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const D: BoundaryCondition = BoundaryCondition::Dirichlet;
    const N: BoundaryCondition = BoundaryCondition::Neumann;

    fn kp() -> KernelParams {
        KernelParams::default()
    }

    #[test]
    fn dirichlet_vanishes_on_boundary() {
        assert_eq!(evaluate_green(0.1, 0.0, 0.5, D, &kp()).unwrap().abs() < 1e-15, true);
    }

    #[test]
    fn short_time_matches_eigen_oracle() {
        let g = evaluate_green(0.02, 0.5, 0.5, D, &kp()).unwrap();
        let eig = evaluate_green(0.02, 0.5, 0.5, D, &kp().with_method(KernelMethod::Eigen)).unwrap();
        assert_relative_eq!(g, eig, epsilon = 1e-9);
        // free kernel minus the two nearest reflections at distance 1
        let free = 1.0 / (4.0 * PI * 0.02f64).sqrt();
        let images = 2.0 * gaussian_kernel(0.02, 1.0);
        assert_relative_eq!(g, free - images, epsilon = 1e-12);
        assert!((g - free).abs() < 2e-5);
    }

    #[test]
    fn nonpositive_time_is_domain_error() {
        assert!(matches!(evaluate_green(0.0, 0.2, 0.3, D, &kp()), Err(Error::Domain(_))));
        assert!(matches!(evaluate_green(-1.0, 0.2, 0.3, N, &kp()), Err(Error::Domain(_))));
    }

    #[test]
    fn truncation_error_reports_bound() {
        let p = KernelParams {
            truncation: 3,
            tolerance: 1e-12,
            method: KernelMethod::Eigen,
        };
        match evaluate_green(1e-3, 0.5, 0.5, D, &p) {
            Err(Error::Truncation { modes, achieved, .. }) => {
                assert_eq!(modes, 3);
                assert!(achieved > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn methods_agree_on_grid() {
        let eig = kp().with_method(KernelMethod::Eigen);
        let img = kp().with_method(KernelMethod::Image);
        for bc in [D, N] {
            for &t in &[1e-4, 1e-3, 0.01, 0.05, 0.2, 1.0] {
                for i in 0..20 {
                    for j in 0..20 {
                        let (x, y) = (i as f64 / 19.0, j as f64 / 19.0);
                        let a = evaluate_green(t, x, y, bc, &eig).unwrap();
                        let b = evaluate_green(t, x, y, bc, &img).unwrap();
                        assert!((a - b).abs() <= 2.0 * eig.tolerance, "{bc:?} t={t} x={x} y={y}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn neumann_mass_is_one() {
        for &(t, x) in &[(1e-3, 0.1), (0.03, 0.0), (0.3, 0.7), (2.0, 1.0)] {
            let m = integrate(
                |y| evaluate_green(t, x, y, N, &kp()).unwrap(),
                0.0,
                1.0,
                &[x],
                QuadSpec::abs(1e-11),
            )
            .unwrap();
            assert_relative_eq!(m.value, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        for bc in [D, N] {
            let (t, s, x, y) = (0.01, 0.03, 0.3, 0.45);
            let lhs = integrate(
                |z| evaluate_green(t, x, z, bc, &kp()).unwrap() * evaluate_green(s, z, y, bc, &kp()).unwrap(),
                0.0,
                1.0,
                &[x, y],
                QuadSpec::abs(1e-11),
            )
            .unwrap()
            .value;
            let rhs = evaluate_green(t + s, x, y, bc, &kp()).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(covariance(0.0, 0.3, 0.0, 0.6, D, &kp()).unwrap(), 0.0);
        assert_relative_eq!(covariance(5.0, 0.5, 5.0, 0.5, D, &kp()).unwrap(), 0.125, epsilon = 1e-6);
        let t = 1e-3f64;
        assert_relative_eq!(
            covariance(t, 0.5, t, 0.5, D, &kp()).unwrap(),
            (t / (2.0 * PI)).sqrt(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn covariance_matches_kernel_quadrature() {
        // Var u(t,x) = ∫₀^t G(2σ, x, x) dσ
        for bc in [D, N] {
            for &(t, x) in &[(0.02, 0.1), (0.3, 0.5), (1.5, 0.9)] {
                let q = integrate(
                    |sig| evaluate_green(2.0 * sig, x, x, bc, &kp()).unwrap(),
                    0.0,
                    t,
                    &[],
                    QuadSpec::abs(1e-11),
                );
                let q = q.unwrap().value;
                let c = covariance(t, x, t, x, bc, &kp()).unwrap();
                assert_relative_eq!(c, q, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn covariance_methods_agree() {
        let eig = kp().with_method(KernelMethod::Eigen);
        let img = kp().with_method(KernelMethod::Image);
        for bc in [D, N] {
            for &(t, s) in &[(0.01, 0.02), (0.1, 0.4), (0.7, 0.75)] {
                let a = covariance(t, 0.3, s, 0.6, bc, &eig).unwrap();
                let b = covariance(t, 0.3, s, 0.6, bc, &img).unwrap();
                assert_relative_eq!(a, b, epsilon = 2e-10);
            }
        }
    }

    #[test]
    fn rect_trivial_cases() {
        assert_eq!(rect_increment_variance(0.3, 0.3, 0.2, 0.6, D, &kp()).unwrap(), 0.0);
        assert_eq!(rect_increment_variance(0.3, 0.1, 0.4, 0.4, N, &kp()).unwrap(), 0.0);
        assert!(rect_increment_variance(0.3, 0.1, 0.4, 0.5, N, &kp()).unwrap() > 0.0);
    }

    #[test]
    fn heat_identity_examples() {
        let zero = FnProfile::new(|_| 0.0, |_| 0.0, |_| 0.0);
        let cosg = FnProfile::new(|v: f64| (PI * v).cos(), |v: f64| -PI * (PI * v).sin(), |v: f64| -PI * PI * (PI * v).cos());
        let a = heat_identity_a(0.3, 0.25, &zero, &cosg, N, &kp(), 1e-8).unwrap();
        assert_eq!(a, 0.0);

        let lin = FnProfile::new(|t| t, |_| 1.0, |_| 0.0);
        let a = heat_identity_a(0.3, 0.25, &lin, &cosg, N, &kp(), 1e-8).unwrap();
        assert_relative_eq!(a, 0.3 * (0.25 * PI).cos(), epsilon = 1e-5);

        let sat = FnProfile::new(|t: f64| 1.0 - (-t).exp(), |t: f64| (-t).exp(), |t: f64| -(-t).exp());
        let sing = FnProfile::new(|v: f64| (PI * v).sin(), |v: f64| PI * (PI * v).cos(), |v: f64| -PI * PI * (PI * v).sin());
        let a = heat_identity_a(0.5, 0.5, &sat, &sing, D, &kp(), 1e-8).unwrap();
        assert_relative_eq!(a, 1.0 - (-0.5f64).exp(), epsilon = 1e-5);
    }

    #[test]
    fn heat_identity_rejects_bad_profiles() {
        let lin = FnProfile::new(|t| t, |_| 1.0, |_| 0.0);
        let cosg = FnProfile::new(|v: f64| (PI * v).cos(), |v: f64| -PI * (PI * v).sin(), |v: f64| -PI * PI * (PI * v).cos());
        assert!(matches!(heat_identity_a(0.3, 0.5, &lin, &cosg, D, &kp(), 1e-8), Err(Error::Precondition(_))));
        let shifted = FnProfile::new(|t| t + 1.0, |_| 1.0, |_| 0.0);
        assert!(matches!(heat_identity_a(0.3, 0.5, &shifted, &cosg, N, &kp(), 1e-8), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_positive(t in 1e-3f64..2.0, x in 0.01f64..0.99, y in 0.01f64..0.99) {
            for bc in [D, N] {
                let a = evaluate_green(t, x, y, bc, &kp()).unwrap();
                let b = evaluate_green(t, y, x, bc, &kp()).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a > 0.0);
            }
        }

        #[test]
        fn covariance_gram_is_psd(pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..7)) {
            for bc in [D, N] {
                let n = pts.len();
                let mut m = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        m[i][j] = covariance(pts[i].0, pts[i].1, pts[j].0, pts[j].1, bc, &kp()).unwrap();
                    }
                }
                // Cholesky with a small shift must succeed.
                let tol = 1e-9;
                let mut l = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..=i {
                        let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                        if i == j {
                            let d = m[i][i] + tol - s;
                            prop_assert!(d > 0.0, "negative pivot {}", d);
                            l[i][i] = d.sqrt();
                        } else {
                            l[i][j] = (m[i][j] - s) / l[j][j];
                        }
                    }
                }
            }
        }
    }
}
