use ndarray::Array2;

use super::gaussian::GaussianSampler;
use super::{dual_widths, FieldPath, NoiseField, SamplerKind, SpaceTimeGrid};
use crate::error::{Error, Result};
use crate::green::BoundaryCondition;
use crate::rng::{fill_normals, path_rng};

/// Explicit Euler scheme on the vertex grid x_j = j/nx with white-noise
/// cell integrals on the dual cells.
#[derive(Clone, Debug)]
pub struct FiniteDifferenceSampler {
    grid: SpaceTimeGrid,
    bc: BoundaryCondition,
    ratio: f64,
}

impl FiniteDifferenceSampler {
    pub fn new(grid: SpaceTimeGrid, bc: BoundaryCondition) -> Result<Self> {
        if !grid.full_space() {
            return Err(Error::Config("finite differences need the full interval [0,1]".into()));
        }
        let (dt, dx) = (grid.dt(), grid.dx());
        if dt > 0.5 * dx * dx * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "explicit scheme unstable: dt = {dt:e} exceeds dx²/2 = {:e}",
                0.5 * dx * dx
            )));
        }
        Ok(Self {
            grid,
            bc,
            ratio: dt / (dx * dx),
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn draw_noise(&self, rng: &mut rand_chacha::ChaCha8Rng) -> NoiseField {
        let g = self.grid;
        let widths = dual_widths(g.nx);
        let sd: Vec<f64> = widths.iter().map(|w| (g.dt() * w).sqrt()).collect();
        let mut inc = Array2::zeros((g.nt, g.nx + 1));
        let mut xi = vec![0.0; g.nx + 1];
        for mut row in inc.outer_iter_mut() {
            fill_normals(rng, &mut xi);
            for j in 0..=g.nx {
                row[j] = sd[j] * xi[j];
            }
        }
        NoiseField {
            grid: g,
            widths,
            increments: inc,
        }
    }

    /// Run the scheme from `initial` driven by `noise`.
    pub fn evolve(&self, noise: &NoiseField, initial: &[f64]) -> Result<FieldPath> {
        let g = self.grid;
        if noise.increments.dim() != (g.nt, g.nx + 1) || initial.len() != g.nx + 1 {
            return Err(Error::Config("noise or initial state does not match the grid".into()));
        }
        let nx = g.nx;
        let r = self.ratio;
        let dx = g.dx();
        let mut values = Array2::zeros((g.nt + 1, nx + 1));
        values.row_mut(0).assign(&ndarray::ArrayView1::from(initial));
        let mut cur = initial.to_vec();
        let mut next = vec![0.0; nx + 1];
        for n in 0..g.nt {
            let w = noise.increments.row(n);
            for j in 1..nx {
                next[j] = cur[j] + r * (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) + w[j] / dx;
            }
            match self.bc {
                BoundaryCondition::Dirichlet => {
                    next[0] = 0.0;
                    next[nx] = 0.0;
                }
                BoundaryCondition::Neumann => {
                    next[0] = cur[0] + 2.0 * r * (cur[1] - cur[0]) + 2.0 * w[0] / dx;
                    next[nx] = cur[nx] + 2.0 * r * (cur[nx - 1] - cur[nx]) + 2.0 * w[nx] / dx;
                }
            }
            values.row_mut(n + 1).assign(&ndarray::ArrayView1::from(&next[..]));
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(FieldPath {
            grid: g,
            values,
            bc: self.bc,
            seed: 0,
            path_index: 0,
            sampler: SamplerKind::FiniteDifference,
            truncation: None,
        })
    }

    pub fn sample(&self, seed: u64, path: u64) -> (FieldPath, NoiseField) {
        let mut rng = path_rng(seed, path);
        let noise = self.draw_noise(&mut rng);
        let zeros = vec![0.0; self.grid.nx + 1];
        let mut p = self.evolve(&noise, &zeros).expect("noise drawn on the sampler grid");
        p.seed = seed;
        p.path_index = path;
        (p, noise)
    }

    /// One-step matrix M and per-node noise variance D of the scheme.
    fn step_operator(&self) -> (Array2<f64>, Vec<f64>) {
        let nx = self.grid.nx;
        let r = self.ratio;
        let dt = self.grid.dt();
        let dx = self.grid.dx();
        let mut m = Array2::zeros((nx + 1, nx + 1));
        let mut d = vec![dt / dx; nx + 1];
        for j in 1..nx {
            m[[j, j]] = 1.0 - 2.0 * r;
            m[[j, j - 1]] = r;
            m[[j, j + 1]] = r;
        }
        match self.bc {
            BoundaryCondition::Dirichlet => {
                d[0] = 0.0;
                d[nx] = 0.0;
            }
            BoundaryCondition::Neumann => {
                m[[0, 0]] = 1.0 - 2.0 * r;
                m[[0, 1]] = 2.0 * r;
                m[[nx, nx]] = 1.0 - 2.0 * r;
                m[[nx, nx - 1]] = 2.0 * r;
                d[0] = 2.0 * dt / dx;
                d[nx] = 2.0 * dt / dx;
            }
        }
        (m, d)
    }
}

/// Finite-difference sampler that starts at step `n0` from the exact law
/// of the scheme's state there, so only the window has to be simulated.
#[derive(Clone, Debug)]
pub struct FdWarmStart {
    sampler: FiniteDifferenceSampler,
    start: GaussianSampler,
}

impl FdWarmStart {
    /// `grid.t_start` must be a whole number of steps of size `grid.dt()`.
    pub fn new(grid: SpaceTimeGrid, bc: BoundaryCondition) -> Result<Self> {
        let sampler = FiniteDifferenceSampler::new(grid, bc)?;
        let steps = grid.t_start / grid.dt();
        let n0 = steps.round();
        if (steps - n0).abs() > 1e-6 {
            return Err(Error::Config(format!("window start {} is not a multiple of dt", grid.t_start)));
        }
        let (m, d) = sampler.step_operator();
        let k = m.nrows();
        // Σ_n = Σ_{k<n} M^k D M^kᵀ by binary doubling.
        let mut p = Array2::<f64>::eye(k);
        let mut sigma = Array2::<f64>::zeros((k, k));
        let n0 = n0 as u64;
        if n0 > 0 {
            for bit in (0..64 - n0.leading_zeros()).rev() {
                sigma = &sigma + &p.dot(&sigma).dot(&p.t());
                p = p.dot(&p);
                if (n0 >> bit) & 1 == 1 {
                    sigma = m.dot(&sigma).dot(&m.t());
                    for j in 0..k {
                        sigma[[j, j]] += d[j];
                    }
                    p = m.dot(&p);
                }
            }
        }
        let start = GaussianSampler::from_covariance(k, |i, j| 0.5 * (sigma[[i, j]] + sigma[[j, i]]));
        Ok(Self { sampler, start })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.sampler.grid
    }

    pub fn sample(&self, seed: u64, path: u64) -> (FieldPath, NoiseField) {
        let mut rng = path_rng(seed, path);
        let init = self.start.sample(&mut rng);
        let noise = self.sampler.draw_noise(&mut rng);
        let mut p = self.sampler.evolve(&noise, &init).expect("noise drawn on the sampler grid");
        p.seed = seed;
        p.path_index = path;
        (p, noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_gives_zero_path() {
        let g = SpaceTimeGrid::new(0.05, 100, 16).unwrap();
        let s = FiniteDifferenceSampler::new(g, BoundaryCondition::Neumann).unwrap();
        let p = s.evolve(&NoiseField::zeros(g), &vec![0.0; 17]).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unstable_step_rejected() {
        let g = SpaceTimeGrid::new(0.1, 10, 16).unwrap();
        assert!(matches!(FiniteDifferenceSampler::new(g, BoundaryCondition::Dirichlet), Err(Error::Precondition(_))));
    }

    #[test]
    fn same_seed_same_output() {
        let g = SpaceTimeGrid::new(0.01, 40, 8).unwrap();
        let s = FiniteDifferenceSampler::new(g, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(s.sample(5, 1), s.sample(5, 1));
    }

    #[test]
    fn warm_start_matches_full_simulation_in_law() {
        // Var at the window start must equal the variance of a full run.
        let nx = 8;
        let dt = 1.0 / (4.0 * 64.0);
        let full = SpaceTimeGrid::new(40.0 * dt, 40, nx).unwrap();
        let win = SpaceTimeGrid::window(40.0 * dt, 41.0 * dt, 1, 0.0, 1.0, nx).unwrap();
        let fs = FiniteDifferenceSampler::new(full, BoundaryCondition::Neumann).unwrap();
        let ws = FdWarmStart::new(win, BoundaryCondition::Neumann).unwrap();
        // Exact variance by direct recursion.
        let (m, d) = fs.step_operator();
        let mut sig = Array2::<f64>::zeros((nx + 1, nx + 1));
        for _ in 0..40 {
            sig = m.dot(&sig).dot(&m.t());
            for j in 0..=nx {
                sig[[j, j]] += d[j];
            }
        }
        for i in 0..=nx {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| ws.start.row(i)[k] * ws.start.row(j)[k]).sum();
                assert!((v - sig[[i, j]]).abs() < 1e-12);
            }
        }
    }
}
