//! Sampled solution paths on space-time grids.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::BoundaryCondition;

mod fd;
mod gaussian;
pub mod io;
mod spectral;

pub use fd::{FdWarmStart, FiniteDifferenceSampler};
pub use gaussian::{GaussianSampler, WindowDraw, WindowSampler};
pub use spectral::SpectralSampler;

/// Default number of eigenmodes for the spectral sampler.
pub const DEFAULT_TRUNCATION: usize = 512;

/// Uniform grid over `[t_start, t_max] × [x_start, x_end]`.
///
/// Most grids start at `t = 0` and span `[0,1]`; windows used by the exact
/// Gaussian sampler may cover a sub-rectangle, and `nx = 0` describes a
/// single column at `x_start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub t_start: f64,
    pub t_max: f64,
    pub nt: usize,
    pub x_start: f64,
    pub x_end: f64,
    pub nx: usize,
}

impl SpaceTimeGrid {
    pub fn new(t_max: f64, nt: usize, nx: usize) -> Result<Self> {
        Self::window(0.0, t_max, nt, 0.0, 1.0, nx)
    }

    pub fn window(t_start: f64, t_max: f64, nt: usize, x_start: f64, x_end: f64, nx: usize) -> Result<Self> {
        if !(t_start >= 0.0 && t_max > t_start && t_max.is_finite()) || nt == 0 {
            return Err(Error::Config(format!(
                "time grid needs 0 <= t_start < t_max and nt >= 1, got [{t_start}, {t_max}] with nt = {nt}"
            )));
        }
        if !(0.0..=1.0).contains(&x_start) || !(0.0..=1.0).contains(&x_end) || x_end < x_start {
            return Err(Error::Config(format!("space range [{x_start}, {x_end}] not inside [0,1]")));
        }
        if nx > 0 && x_end == x_start {
            return Err(Error::Config("nx > 0 needs a nondegenerate space range".into()));
        }
        Ok(Self {
            t_start,
            t_max,
            nt,
            x_start,
            x_end,
            nx,
        })
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_start) / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        if self.nx == 0 {
            0.0
        } else {
            (self.x_end - self.x_start) / self.nx as f64
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.nt {
            self.t_max
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn pos(&self, j: usize) -> f64 {
        if j == self.nx {
            self.x_end
        } else {
            self.x_start + j as f64 * self.dx()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|i| self.time(i)).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..=self.nx).map(|j| self.pos(j)).collect()
    }

    /// Whether the space axis is the full interval [0,1].
    pub fn full_space(&self) -> bool {
        self.x_start == 0.0 && self.x_end == 1.0 && self.nx > 0
    }

    fn snap(v: f64, start: f64, step: f64, n: usize, what: &str) -> Result<usize> {
        if step == 0.0 {
            return if (v - start).abs() <= 1e-12 {
                Ok(0)
            } else {
                Err(Error::Config(format!("{what} {v} is not the grid value {start}")))
            };
        }
        let k = ((v - start) / step).round();
        if k < 0.0 || k > n as f64 || (start + k * step - v).abs() > 1e-7 * step {
            return Err(Error::Config(format!("{what} {v} is not on the grid (step {step})")));
        }
        Ok(k as usize)
    }

    /// Row index of time `t`; off-grid times are a configuration error.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        Self::snap(t, self.t_start, self.dt(), self.nt, "time")
    }

    /// Column index of position `x`.
    pub fn pos_index(&self, x: f64) -> Result<usize> {
        Self::snap(x, self.x_start, self.dx(), self.nx, "position")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Spectral,
    FiniteDifference,
    /// Exact joint-Gaussian draw from the covariance on the grid nodes.
    Gaussian,
}

impl SamplerKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            Self::Spectral => 0,
            Self::FiniteDifference => 1,
            Self::Gaussian => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Self::Spectral),
            1 => Ok(Self::FiniteDifference),
            2 => Ok(Self::Gaussian),
            _ => Err(Error::Format(format!("unknown sampler code {c}"))),
        }
    }
}

/// One sampled path: `values[[i, j]] = u(t_i, x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPath {
    pub grid: SpaceTimeGrid,
    pub values: Array2<f64>,
    pub bc: BoundaryCondition,
    pub seed: u64,
    pub path_index: u64,
    pub sampler: SamplerKind,
    pub truncation: Option<usize>,
}

impl FieldPath {
    /// Path built from explicit values, mostly for synthetic tests.
    pub fn from_values(grid: SpaceTimeGrid, values: Array2<f64>, bc: BoundaryCondition) -> Result<Self> {
        if values.dim() != (grid.nt + 1, grid.nx + 1) {
            return Err(Error::Config(format!(
                "values have shape {:?}, grid needs {:?}",
                values.dim(),
                (grid.nt + 1, grid.nx + 1)
            )));
        }
        Ok(Self {
            grid,
            values,
            bc,
            seed: 0,
            path_index: 0,
            sampler: SamplerKind::Gaussian,
            truncation: None,
        })
    }

    /// Path with `u(t,x) = f(t,x)` on every node.
    pub fn from_fn(grid: SpaceTimeGrid, bc: BoundaryCondition, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nt + 1, grid.nx + 1), |(i, j)| f(grid.time(i), grid.pos(j)));
        Self {
            grid,
            values,
            bc,
            seed: 0,
            path_index: 0,
            sampler: SamplerKind::Gaussian,
            truncation: None,
        }
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Subsample every `ft`-th time and `fx`-th space node.
    pub fn coarsen(&self, ft: usize, fx: usize) -> Result<Self> {
        let g = self.grid;
        if ft == 0 || fx == 0 || g.nt % ft != 0 || (g.nx > 0 && g.nx % fx != 0) {
            return Err(Error::Config(format!("cannot coarsen {}x{} by {ft}x{fx}", g.nt, g.nx)));
        }
        let grid = SpaceTimeGrid {
            nt: g.nt / ft,
            nx: g.nx / fx,
            ..g
        };
        let values = Array2::from_shape_fn((grid.nt + 1, grid.nx + 1), |(i, j)| self.values[[i * ft, j * fx]]);
        Ok(Self {
            grid,
            values,
            ..self.clone()
        })
    }
}

/// Discrete white-noise cell integrals used by the finite-difference scheme.
///
/// Cell `j` is the dual cell around node `x_j`: width `dx` inside and `dx/2`
/// at the two ends, so the widths tile [0,1]. Row `n` covers
/// `[t_n, t_{n+1})` of `grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    pub grid: SpaceTimeGrid,
    pub widths: Vec<f64>,
    pub increments: Array2<f64>,
}

impl NoiseField {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self {
            grid,
            widths: dual_widths(grid.nx),
            increments: Array2::zeros((grid.nt, grid.nx + 1)),
        }
    }

    /// Cell variance dt·width.
    pub fn cell_variance(&self, j: usize) -> f64 {
        self.grid.dt() * self.widths[j]
    }
}

/// Dual-cell widths of a vertex grid with `nx` cells on [0,1]: dx/2 at
/// the ends, dx inside.
pub fn dual_widths(nx: usize) -> Vec<f64> {
    let dx = 1.0 / nx as f64;
    (0..=nx)
        .map(|j| if j == 0 || j == nx { 0.5 * dx } else { dx })
        .collect()
}

/// Exact transition of an Ornstein-Uhlenbeck coefficient over time `delta`.
pub fn ou_transition(a: f64, lambda: f64, delta: f64, xi: f64) -> f64 {
    if lambda == 0.0 {
        return a + xi * delta.sqrt();
    }
    (-lambda * delta).exp() * a + xi * ou_std(lambda, delta)
}

pub(crate) fn ou_std(lambda: f64, delta: f64) -> f64 {
    if lambda == 0.0 {
        delta.sqrt()
    } else {
        (-(-2.0 * lambda * delta).exp_m1() / (2.0 * lambda)).sqrt()
    }
}

/// Spectral sample with the default sampler settings.
pub fn sample_spectral(grid: SpaceTimeGrid, bc: BoundaryCondition, seed: u64, truncation: usize) -> Result<FieldPath> {
    Ok(SpectralSampler::new(grid, bc, truncation)?.sample(seed, 0))
}

/// Finite-difference sample and the noise that drove it.
pub fn sample_finite_difference(grid: SpaceTimeGrid, bc: BoundaryCondition, seed: u64) -> Result<(FieldPath, NoiseField)> {
    Ok(FiniteDifferenceSampler::new(grid, bc)?.sample(seed, 0))
}
