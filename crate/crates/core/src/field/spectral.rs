use std::f64::consts::{PI, SQRT_2};

use ndarray::Array2;

use super::{ou_std, FieldPath, SamplerKind, SpaceTimeGrid};
use crate::error::{Error, Result};
use crate::green::BoundaryCondition;
use crate::rng::{fill_normals, path_rng};

/// Truncated eigen-expansion sampler: each coefficient a_n is an exact
/// Ornstein-Uhlenbeck process with rate λ_n.
#[derive(Clone, Debug)]
pub struct SpectralSampler {
    grid: SpaceTimeGrid,
    bc: BoundaryCondition,
    truncation: usize,
    lambdas: Vec<f64>,
    decay: Vec<f64>,
    step_sd: Vec<f64>,
    start_sd: Vec<f64>,
    /// Mode n contributes `factor * a_n` to bin `bin`.
    fold: Vec<(usize, f64)>,
    table: Array2<f64>,
}

impl SpectralSampler {
    pub fn new(grid: SpaceTimeGrid, bc: BoundaryCondition, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::Precondition("spectral truncation must be at least 1".into()));
        }
        let first = bc.first_mode();
        let modes: Vec<usize> = (first..first + truncation).collect();
        let dt = grid.dt();
        let lambdas: Vec<f64> = modes.iter().map(|&n| bc.eigenvalue(n)).collect();
        let decay = lambdas.iter().map(|&l| (-l * dt).exp()).collect();
        let step_sd = lambdas.iter().map(|&l| ou_std(l, dt)).collect();
        let start_sd = lambdas.iter().map(|&l| if grid.t_start > 0.0 { ou_std(l, grid.t_start) } else { 0.0 }).collect();

        let xs = grid.positions();
        let zero_at = |x: f64| bc == BoundaryCondition::Dirichlet && (x == 0.0 || x == 1.0);
        let (fold, table) = if grid.full_space() {
            // Nodes j/nx: fold mode numbers modulo 2nx onto nx+1 bins.
            let nx = grid.nx;
            let period = 2 * nx;
            let fold = modes
                .iter()
                .map(|&n| {
                    let r = n % period;
                    match bc {
                        BoundaryCondition::Dirichlet => {
                            if r == 0 || r == nx {
                                (0, 0.0)
                            } else if r < nx {
                                (r, SQRT_2)
                            } else {
                                (period - r, -SQRT_2)
                            }
                        }
                        BoundaryCondition::Neumann => {
                            let s = if n == 0 { 1.0 } else { SQRT_2 };
                            if r <= nx {
                                (r, s)
                            } else {
                                (period - r, s)
                            }
                        }
                    }
                })
                .collect();
            let table = Array2::from_shape_fn((nx + 1, nx + 1), |(m, j)| {
                if zero_at(xs[j]) {
                    return 0.0;
                }
                let arg = m as f64 * PI * j as f64 / nx as f64;
                match bc {
                    BoundaryCondition::Dirichlet => arg.sin(),
                    BoundaryCondition::Neumann => arg.cos(),
                }
            });
            (fold, table)
        } else {
            let fold = (0..modes.len()).map(|k| (k, 1.0)).collect();
            let table = Array2::from_shape_fn((modes.len(), xs.len()), |(k, j)| {
                if zero_at(xs[j]) {
                    0.0
                } else {
                    bc.eigenfunction(modes[k], xs[j])
                }
            });
            (fold, table)
        };
        Ok(Self {
            grid,
            bc,
            truncation,
            lambdas,
            decay,
            step_sd,
            start_sd,
            fold,
            table,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    /// Coefficient trajectories a_n(t_i), shape (nt+1) × truncation.
    pub fn sample_coefficients(&self, seed: u64, path: u64) -> Array2<f64> {
        let n = self.truncation;
        let mut rng = path_rng(seed, path);
        let mut coef = Array2::zeros((self.grid.nt + 1, n));
        let mut xi = vec![0.0; n];
        if self.grid.t_start > 0.0 {
            fill_normals(&mut rng, &mut xi);
            for k in 0..n {
                coef[[0, k]] = self.start_sd[k] * xi[k];
            }
        }
        for i in 0..self.grid.nt {
            fill_normals(&mut rng, &mut xi);
            for k in 0..n {
                coef[[i + 1, k]] = self.decay[k] * coef[[i, k]] + self.step_sd[k] * xi[k];
            }
        }
        coef
    }

    pub fn sample(&self, seed: u64, path: u64) -> FieldPath {
        let coef = self.sample_coefficients(seed, path);
        let bins = self.table.nrows();
        let mut folded = Array2::zeros((self.grid.nt + 1, bins));
        for (i, row) in coef.outer_iter().enumerate() {
            for (k, &(bin, factor)) in self.fold.iter().enumerate() {
                folded[[i, bin]] += factor * row[k];
            }
        }
        let mut values = folded.dot(&self.table);
        if self.grid.t_start == 0.0 {
            values.row_mut(0).fill(0.0);
        }
        FieldPath {
            grid: self.grid,
            values,
            bc: self.bc,
            seed,
            path_index: path,
            sampler: SamplerKind::Spectral,
            truncation: Some(self.truncation),
        }
    }
}
