//! Deterministic identities: kernel cross-checks, covariance oracles, the
//! heat identity and the pairing identities of the localisation.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::Result;
use crate::green::{evaluate_green, heat_identity_a, BoundaryCondition, KernelMethod, KernelParams};
use crate::malliavin::{
    derivative_kernel_field, h_inner, pair_df1_ua1, pair_df2_ua2, pair_duincrement_ua1, pair_dyr_ua1, AuxFieldSpec, DerivativeKernel, PairingMode, PAIRING_TOL,
};
use crate::quad::{integrate, QuadSpec};
use crate::smooth::FnProfile;

use super::walsh::{config_log_c, WalshSetup};
use super::{Check, Ctx};

const BCS: [BoundaryCondition; 2] = [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann];

/// max |eigen − image| over 20 log-spaced t in [1e-4, 1] and a 20×20 grid.
pub fn kernel_agreement() -> Result<f64> {
    let eig = KernelParams::default().with_method(KernelMethod::Eigen);
    let img = KernelParams::default().with_method(KernelMethod::Image);
    let mut worst: f64 = 0.0;
    for bc in BCS {
        for k in 0..20 {
            let t = 1e-4 * 1e4f64.powf(k as f64 / 19.0);
            for i in 0..20 {
                for j in 0..20 {
                    let (x, y) = (i as f64 / 19.0, j as f64 / 19.0);
                    let d = evaluate_green(t, x, y, bc, &eig)? - evaluate_green(t, x, y, bc, &img)?;
                    worst = worst.max(d.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// max |∫G(t,x,z)G(s,z,y)dz − G(t+s,x,y)| over a few triples.
pub fn chapman_kolmogorov() -> Result<f64> {
    let kp = KernelParams::default();
    let mut worst: f64 = 0.0;
    for bc in BCS {
        for &(t, s, x, y) in &[(0.01f64, 0.02f64, 0.3, 0.6), (0.001, 0.004, 0.5, 0.52), (0.2, 0.05, 0.1, 0.9), (0.5, 0.5, 0.0, 1.0)] {
            let mut err = None;
            let w = t.max(s).sqrt();
            let pts = [x - 6.0 * w, x, x + 6.0 * w, y - 6.0 * w, y, y + 6.0 * w];
            let q = integrate(
                |z| match (evaluate_green(t, x, z, bc, &kp), evaluate_green(s, z, y, bc, &kp)) {
                    (Ok(a), Ok(b)) => a * b,
                    (Err(e), _) | (_, Err(e)) => {
                        err = Some(e);
                        0.0
                    }
                },
                0.0,
                1.0,
                &pts,
                QuadSpec::abs(1e-9),
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            let d = q.value - evaluate_green(t + s, x, y, bc, &kp)?;
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

/// Var u(t, x) as ‖Du(t,x)‖²_𝓗 by quadrature.
pub fn variance_by_pairing(t: f64, x: f64, bc: BoundaryCondition) -> Result<f64> {
    let k = DerivativeKernel::new(t, x, bc);
    k.pairing(&k, &KernelParams::default(), 1e-9)
}

/// Worst |A − f·g| over the two test pairs.
pub fn heat_identity_error() -> Result<f64> {
    let kp = KernelParams::default();
    let lin = FnProfile::new(|t| t, |_| 1.0, |_| 0.0);
    let cosg = FnProfile::new(|v: f64| (PI * v).cos(), |v: f64| -PI * (PI * v).sin(), |v: f64| -PI * PI * (PI * v).cos());
    let sat = FnProfile::new(|t: f64| 1.0 - (-t).exp(), |t: f64| (-t).exp(), |t: f64| -(-t).exp());
    let sing = FnProfile::new(|v: f64| (PI * v).sin(), |v: f64| PI * (PI * v).cos(), |v: f64| -PI * PI * (PI * v).sin());
    let a = heat_identity_a(0.3, 0.25, &lin, &cosg, BoundaryCondition::Neumann, &kp, 1e-8)?;
    let b = heat_identity_a(0.5, 0.5, &sat, &sing, BoundaryCondition::Dirichlet, &kp, 1e-8)?;
    let ea = (a - 0.3 * (PI * 0.25).cos()).abs();
    let eb = (b - (1.0 - (-0.5f64).exp())).abs();
    Ok(ea.max(eb))
}

pub fn run(ctx: &mut Ctx<'_>) -> Result<Vec<Check>> {
    let cfg = ctx.cfg;
    let bc = cfg.model.bc;
    let kp = KernelParams::default();
    let mut checks = Vec::new();

    let agree = kernel_agreement()?;
    checks.push(Check::new("Green kernel |eigen − image|", agree <= 1e-8, agree, "≤ 1e-8"));
    let ck = chapman_kolmogorov()?;
    checks.push(Check::new("Chapman–Kolmogorov residual", ck <= 1e-6, ck, "≤ 1e-6"));

    let stat = variance_by_pairing(3.0, 0.5, BoundaryCondition::Dirichlet)?;
    checks.push(Check::new("Dirichlet stationary variance at x = 0.5", (stat - 0.125).abs() <= 1e-6, stat, "0.125 ± 1e-6"));
    let small = BCS.iter().map(|&b| variance_by_pairing(1e-3, 0.5, b)).collect::<Result<Vec<_>>>()?;
    let want = (1e-3 / (2.0 * PI)).sqrt();
    let small_err = small.iter().map(|v| (v - want).abs()).fold(0.0, f64::max);
    checks.push(Check::new("small-t variance √(t/2π) at t = 1e-3", small_err <= 1e-6, small_err, "≤ 1e-6"));

    let heat = heat_identity_error()?;
    checks.push(Check::new("heat identity |A − f·g|", heat <= 1e-5, heat, "≤ 1e-5"));

    let w = cfg.window;
    let spec = AuxFieldSpec::from_window(&w)?;
    let p1 = pair_df1_ua1(&w, &spec, bc, &kp)?;
    checks.push(Check::new("⟨DF₁, u_A¹⟩", (p1 - 1.0).abs() <= 1e-5, p1, "1 ± 1e-5"));
    let inc = pair_duincrement_ua1(w.s0, w.s0 + w.delta1, &w, &spec, bc, &kp, PairingMode::Strict)?;
    checks.push(Check::new("⟨D(u(s₀+δ₁,y₀) − u(s₀,y₀)), u_A¹⟩", inc.abs() <= 1e-6, inc, "0 ± 1e-6"));

    // pairings that need a sampled path: FD window started from the exact law
    let setup = WalshSetup::new(cfg, w.delta1, config_log_c(cfg)?)?;
    let seed = ctx.seed("identities");
    let (path, _) = setup.sampler.sample(seed, 0);
    let nx = path.grid.nx;
    let ua2 = setup.ua2(&path, cfg, setup.start_row)?;
    let df1 = derivative_kernel_field(&DerivativeKernel::new(w.s0, w.y0, bc), cfg.grid.walsh_dt, nx, &kp)?;
    let p2 = h_inner(&df1, &ua2.field);
    checks.push(Check::new("⟨DF₁, u_A²⟩ (discrete)", p2 == 0.0, p2, "0 exactly"));
    let dy = pair_dyr_ua1(&path, &setup.window, &cfg.seminorm, &spec, bc, &kp)?;
    checks.push(Check::new("⟨DY_r, u_A¹⟩ at r = s₀+δ₁", dy.abs() <= 1e-6, dy, "0 ± 1e-6"));
    let m = ua2.times.len();
    let big_psi = ua2.big_psi[m - 1] + ua2.psi[m - 1] * ua2.field.dt;
    let df2 = pair_df2_ua2(&ua2, m, &setup.spec.phi_delta1, w.y0, bc, &kp)?;
    let e2 = (df2 - big_psi).abs();
    checks.push(Check::new("⟨D(u(S,y₀) − u(s₀,y₀)), u_A²⟩ = ∫ψ(Y_r)dr", e2 <= 1e-5, e2, "≤ 1e-5"));

    ctx.sink.write("identities.csv", |o| {
        writeln!(o, "name,value")?;
        for (k, v) in [
            ("kernel_agreement", agree),
            ("chapman_kolmogorov", ck),
            ("stationary_variance", stat),
            ("small_t_variance_dirichlet", small[0]),
            ("small_t_variance_neumann", small[1]),
            ("heat_identity_error", heat),
            ("df1_ua1", p1),
            ("increment_ua1", inc),
            ("df1_ua2", p2),
            ("dy_ua1", dy),
            ("df2_ua2", df2),
            ("psi_integral", big_psi),
            ("pairing_tolerance", PAIRING_TOL),
        ] {
            writeln!(o, "{k},{v}")?;
        }
        Ok(())
    })?;
    Ok(checks)
}
