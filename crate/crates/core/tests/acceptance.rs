//! The fifteen acceptance criteria, one PASS/FAIL line each. Sampling is
//! shared between criteria where they use the same draws.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use shelab::config::{ExperimentConfig, ExperimentKind};
use shelab::experiments::{self, identities, sups, Check, Ctx};
use shelab::green::BoundaryCondition;

struct Suite {
    failed: usize,
}

impl Suite {
    fn report(&mut self, id: usize, title: &str, checks: &[&Check], extra: Option<(bool, String)>) {
        let mut pass = checks.iter().all(|c| c.pass);
        let mut detail: Vec<String> = checks.iter().map(|c| c.line()).collect();
        if let Some((ok, msg)) = extra {
            pass &= ok;
            detail.push(msg);
        }
        if checks.is_empty() && detail.is_empty() {
            pass = false;
        }
        self.failed += usize::from(!pass);
        println!("{} criterion {id:>2}: {title}", if pass { "PASS" } else { "FAIL" });
        for d in detail {
            println!("        {d}");
        }
    }
}

fn pick<'a>(checks: &'a [Check], keys: &[&str]) -> Vec<&'a Check> {
    checks.iter().filter(|c| c.primary && keys.iter().any(|k| c.name.contains(k))).collect()
}

fn primary(checks: &[Check]) -> Vec<&Check> {
    checks.iter().filter(|c| c.primary).collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn runtime(limit: Duration, took: Duration) -> Option<(bool, String)> {
    Some((took < limit, format!("runtime {:.1} s (limit {} s)", took.as_secs_f64(), limit.as_secs())))
}

fn run_kind(kind: ExperimentKind) -> Vec<Check> {
    let cfg = ExperimentConfig::preset(kind);
    let mut ctx = Ctx::in_memory(&cfg);
    experiments::execute(&mut ctx).unwrap_or_else(|e| panic!("{}: {e}", kind.name()))
}

/// Runs `cfg` twice from scratch and once resumed; every artifact and batch
/// file must be byte-identical across the three.
fn determinism(cfg: &ExperimentConfig, root: &Path) -> (bool, String) {
    let dirs = [root.join("a"), root.join("b")];
    for d in &dirs {
        experiments::run(cfg, d, false).expect("run");
    }
    experiments::run(cfg, &dirs[0], true).expect("resumed run");
    let (ma, _, bad_a) = experiments::report(&dirs[0]).expect("report");
    let (mb, _, bad_b) = experiments::report(&dirs[1]).expect("report");
    let mut same = bad_a.is_empty() && bad_b.is_empty() && ma.artifacts == mb.artifacts && ma.batches == mb.batches;
    for a in &ma.artifacts {
        same &= std::fs::read(dirs[0].join(&a.file)).ok() == std::fs::read(dirs[1].join(&a.file)).ok();
    }
    (same, format!("{}: {} artifacts, {} batches", cfg.experiment.name(), ma.artifacts.len(), ma.batches.len()))
}

fn main() -> ExitCode {
    let mut s = Suite { failed: 0 };
    let total = Instant::now();

    let ((agree, ck), took) = timed(|| (identities::kernel_agreement().unwrap(), identities::chapman_kolmogorov().unwrap()));
    let c1 = [
        Check::new("max |eigen − image|", agree <= 1e-8, agree, "≤ 1e-8"),
        Check::new("Chapman–Kolmogorov residual", ck <= 1e-6, ck, "≤ 1e-6"),
    ];
    s.report(1, "Green kernel cross-method agreement", &c1.iter().collect::<Vec<_>>(), runtime(Duration::from_secs(10), took));

    let stat = identities::variance_by_pairing(3.0, 0.5, BoundaryCondition::Dirichlet).unwrap();
    let want = (1e-3 / (2.0 * std::f64::consts::PI)).sqrt();
    let mut c2 = vec![Check::new("Dirichlet stationary variance at 0.5", (stat - 0.125).abs() <= 1e-6, stat, "0.125 ± 1e-6")];
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let v = identities::variance_by_pairing(1e-3, 0.5, bc).unwrap();
        c2.push(Check::new(format!("{} variance at t = 1e-3", bc.name()), (v - want).abs() <= 1e-6, v, format!("{want:.9} ± 1e-6")));
    }
    s.report(2, "covariance oracles", &c2.iter().collect::<Vec<_>>(), None);

    let (heat, took) = timed(|| identities::heat_identity_error().unwrap());
    let c3 = Check::new("max |A − f·g| over both pairs", heat <= 1e-5, heat, "≤ 1e-5");
    s.report(3, "heat identity", &[&c3], runtime(Duration::from_secs(30), took));

    let (reg, took) = timed(|| run_kind(ExperimentKind::Regularity));
    s.report(4, "regularity exponents and rectangular bound", &primary(&reg), runtime(Duration::from_secs(300), took));

    let grr_checks = run_kind(ExperimentKind::GrrCheck);
    s.report(5, "GRR implication", &pick(&grr_checks, &["FAIL verdicts", "contrapositive", "critical"]), None);
    s.report(6, "Y and Ȳ scaling exponents", &pick(&grr_checks, &["exponent"]), None);

    let id = run_kind(ExperimentKind::Identities);
    s.report(7, "pairing identities", &pick(&id, &["⟨"]), None);

    s.report(8, "Walsh integral scaling", &primary(&run_kind(ExperimentKind::WalshScaling)), None);
    s.report(9, "negative moments of γ₂₂", &primary(&run_kind(ExperimentKind::Gamma22Moments)), None);

    // 10⁵ draws per δ, shared by criteria 10 to 14
    let start = Instant::now();
    let fcfg = ExperimentConfig::preset(ExperimentKind::DensityF);
    let mut fctx = Ctx::in_memory(&fcfg);
    let fsets = sups::f_sets(&mut fctx).unwrap();
    let f_checks = sups::analyze_density_f(&mut fctx, &fsets).unwrap();
    let f_time = start.elapsed();
    let mcfg = ExperimentConfig::preset(ExperimentKind::DensityM0);
    let mut mctx = Ctx::in_memory(&mcfg);
    let msets = sups::m0_sets(&mut mctx).unwrap();
    let m_checks = sups::analyze_density_m0(&mut mctx, &msets).unwrap();
    let tcfg = ExperimentConfig::preset(ExperimentKind::Tails);
    let mut tctx = Ctx::in_memory(&tcfg);
    let t_checks = sups::analyze_tails(&mut tctx, &fsets, &msets).unwrap();
    let sup_time = start.elapsed();

    s.report(10, "Gaussian tail bounds for F₂ and M₀", &primary(&t_checks), None);
    s.report(11, "density bound for (F₁, F₂)", &pick(&f_checks, &["density bound", "collapse"]), runtime(Duration::from_secs(1800), f_time));
    s.report(12, "density bound for M₀", &pick(&m_checks, &["density bound", "collapse"]), runtime(Duration::from_secs(1800), sup_time));
    let mut pos = pick(&f_checks, &["> 0"]);
    pos.extend(pick(&m_checks, &["> 0"]));
    s.report(13, "positivity of F₂ and M₀", &pos, None);
    let mut slopes = pick(&f_checks, &["slope"]);
    slopes.extend(pick(&m_checks, &["slope"]));
    s.report(14, "mean-supremum scaling", &slopes, None);
    for c in f_checks.iter().chain(&m_checks).filter(|c| !c.primary && !c.pass) {
        println!("        note: {}", c.line());
    }

    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (k, kind) in [ExperimentKind::Gamma22Moments, ExperimentKind::Tails, ExperimentKind::Regularity].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.mc.n_paths = 2000;
        cfg.mc.batch_size = 500;
        let (pass, note) = determinism(&cfg, &tmp.path().join(k.to_string()));
        ok &= pass;
        notes.push(note);
    }
    s.report(15, "byte-identical reruns", &[], Some((ok, notes.join("; "))));

    println!("{} of 15 criteria failed; {:.0} s", s.failed, total.elapsed().as_secs_f64());
    if s.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
