//! Experiment configuration: TOML sections mirroring the library modules.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintCheck;
use crate::error::{Error, Result};
use crate::green::BoundaryCondition;
use crate::seminorm::SeminormParams;
use crate::suprema::WindowConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Identities,
    Regularity,
    GrrCheck,
    DensityF,
    DensityM0,
    Tails,
    WalshScaling,
    Gamma22Moments,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::Identities,
        Self::Regularity,
        Self::GrrCheck,
        Self::DensityF,
        Self::DensityM0,
        Self::Tails,
        Self::WalshScaling,
        Self::Gamma22Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Identities => "identities",
            Self::Regularity => "regularity",
            Self::GrrCheck => "grr_check",
            Self::DensityF => "density_f",
            Self::DensityM0 => "density_m0",
            Self::Tails => "tails",
            Self::WalshScaling => "walsh_scaling",
            Self::Gamma22Moments => "gamma22_moments",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub bc: BoundaryCondition,
    pub t_max: f64,
}

/// Resolutions of the samplers used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Spectral full-space grid: time steps over [0, T_reg], space cells, modes.
    pub nt: usize,
    pub nx: usize,
    pub t_regularity: f64,
    pub truncation: usize,
    /// Time steps of the exact (F1, F2) column window.
    pub window_steps: usize,
    /// Time and space steps of the exact M0 rectangle.
    pub m0_time_steps: usize,
    pub m0_space_steps: usize,
    /// Time and space steps of the exact Ȳ rectangle.
    pub rect_time_steps: usize,
    pub rect_space_steps: usize,
    /// Finite-difference grid of the Walsh experiment.
    pub walsh_nx: usize,
    pub walsh_dt: f64,
    /// Conditional refinement levels of the positivity certificate.
    pub refinement_levels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub batch_size: usize,
}

/// δ values swept by the scaling and bound experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub delta1: Vec<f64>,
    /// (δ1, δ2) pairs of the M0 experiments.
    pub m0: Vec<[f64; 2]>,
    /// δ = δ1^{1/2} + δ2 values of the Ȳ scaling, with δ1 = (δ/2)², δ2 = δ/2.
    pub rect_delta: Vec<f64>,
    /// δ1 at which the working cutoff constant is frozen.
    pub reference_delta1: f64,
    /// R = κ·E[Y_{s0+δ1}] at the reference δ1.
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub window: WindowConfig,
    pub seminorm: SeminormParams,
    pub seminorm_rect: SeminormParams,
    pub mc: McConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Identities,
            output_dir: PathBuf::from("out"),
            model: ModelConfig {
                bc: BoundaryCondition::Dirichlet,
                t_max: 1.0,
            },
            grid: GridConfig {
                nt: 512,
                nx: 64,
                t_regularity: 0.5,
                truncation: 512,
                window_steps: 512,
                m0_time_steps: 48,
                m0_space_steps: 24,
                rect_time_steps: 16,
                rect_space_steps: 16,
                walsh_nx: 64,
                walsh_dt: 5e-5,
                refinement_levels: 60,
            },
            window: WindowConfig::default(),
            seminorm: SeminormParams::time_default(),
            seminorm_rect: SeminormParams::rect_default(),
            mc: McConfig {
                n_paths: 10_000,
                seed: 20_240_601,
                batch_size: 1000,
            },
            sweep: SweepConfig {
                delta1: vec![0.01, 0.02, 0.04],
                m0: vec![[0.01, 0.05], [0.04, 0.1], [0.09, 0.2]],
                rect_delta: vec![0.05, 0.1, 0.2],
                reference_delta1: 0.04,
                kappa: 1.0,
            },
        }
    }
}

/// One named constraint from a config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub section: String,
    pub check: ConstraintCheck,
    /// Failing hard checks reject the config; soft ones are warnings.
    pub hard: bool,
}

impl Diagnostic {
    pub fn line(&self) -> String {
        let status = match (self.check.holds, self.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        format!("{status} [{}] {} (margin {:.6})", self.section, self.check.name, self.check.margin)
    }
}

impl ExperimentConfig {
    /// Window that keeps every δ1 of the default sweep and the first M0
    /// pair inside the geometric conditions: J = [0.45, 0.55], c₂ = 0.2,
    /// C₂ = 0.97, (δ1, δ2) = (0.01, 0.05).
    pub fn sweep_window() -> WindowConfig {
        WindowConfig {
            j_lo: 0.45,
            j_hi: 0.55,
            c2: 0.2,
            big_c2: 0.97,
            ..WindowConfig::default()
        }
        .with_deltas(0.01, 0.05)
    }

    /// Default config for an experiment kind. Sweeping kinds use
    /// [`Self::sweep_window`]; the density kinds use 10⁵ paths.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            output_dir: PathBuf::from(format!("out/{}", kind.name())),
            ..Self::default()
        };
        match kind {
            ExperimentKind::Identities | ExperimentKind::Regularity => {}
            _ => c.window = Self::sweep_window(),
        }
        if matches!(kind, ExperimentKind::DensityF | ExperimentKind::DensityM0 | ExperimentKind::Tails) {
            c.mc.n_paths = 100_000;
        }
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    /// Every constraint with its margin. Window, seminorm and grid checks
    /// are hard; sweep entries outside the geometric conditions are warnings,
    /// since the sweeps deliberately probe δ values beyond them.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |section: &str, checks: Vec<ConstraintCheck>, hard: bool| {
            out.extend(checks.into_iter().map(|check| Diagnostic {
                section: section.to_string(),
                check,
                hard,
            }));
        };
        let mut w = self.window;
        w.t_max = self.model.t_max;
        push("window", w.check_cutoffs(), true);
        push("window", w.check_f_geometry(), true);
        push("window", w.check_m0_geometry(), true);
        push("seminorm", self.seminorm.validate(), true);
        push("seminorm_rect", self.seminorm_rect.validate(), true);
        if self.seminorm_rect.theta.is_none() {
            push("seminorm_rect", vec![ConstraintCheck::less("θ set", 0.0, -1.0)], true);
        }
        let g = &self.grid;
        let dx = 1.0 / g.walsh_nx.max(1) as f64;
        let steps = w.s0 / g.walsh_dt;
        push(
            "grid",
            vec![
                ConstraintCheck::less("0 < T", 0.0, self.model.t_max),
                ConstraintCheck::less("1 < nx", 1.0, g.nx as f64),
                ConstraintCheck::less("1 < nt", 1.0, g.nt as f64),
                ConstraintCheck::within("T_reg ∈ (0, T]", g.t_regularity, f64::MIN_POSITIVE, self.model.t_max),
                ConstraintCheck::less("0 < truncation", 0.0, g.truncation as f64),
                ConstraintCheck::less("1 < window_steps", 1.0, g.window_steps as f64),
                ConstraintCheck::less("1 < m0 steps", 1.0, g.m0_time_steps.min(g.m0_space_steps) as f64),
                ConstraintCheck::less("1 < rect steps", 1.0, g.rect_time_steps.min(g.rect_space_steps) as f64),
                ConstraintCheck::less("dt/dx² ≤ 1/2 (Walsh grid)", g.walsh_dt / (dx * dx), 0.5 + 1e-12),
                ConstraintCheck::equal("s₀ multiple of Walsh dt", steps, steps.round(), 1e-6),
            ],
            true,
        );
        push(
            "mc",
            vec![
                ConstraintCheck::less("0 < n_paths", 0.0, self.mc.n_paths as f64),
                ConstraintCheck::less("0 < batch_size", 0.0, self.mc.batch_size as f64),
            ],
            true,
        );
        for &d1 in &self.sweep.delta1 {
            let wd = w.with_deltas(d1, w.delta2);
            push(&format!("sweep δ₁={d1}"), wd.check_f_geometry(), false);
        }
        for &[d1, d2] in &self.sweep.m0 {
            let wd = w.with_deltas(d1, d2);
            push(&format!("sweep (δ₁,δ₂)=({d1},{d2})"), wd.check_m0_geometry(), false);
        }
        push(
            "sweep",
            vec![
                ConstraintCheck::less("0 < κ", 0.0, self.sweep.kappa),
                ConstraintCheck::less("0 < reference δ₁", 0.0, self.sweep.reference_delta1),
            ],
            true,
        );
        out
    }

    /// Hard failures as one config error naming each violated inequality.
    pub fn validate(&self) -> Result<Vec<Diagnostic>> {
        let d = self.diagnostics();
        let bad: Vec<String> = d.iter().filter(|x| x.hard && !x.check.holds).map(|x| format!("[{}] {}", x.section, x.check.name)).collect();
        if bad.is_empty() {
            Ok(d)
        } else {
            Err(Error::Config(format!("violated: {}", bad.join("; "))))
        }
    }
}
