//! Draws the field with the spectral and finite-difference samplers and
//! compares the empirical variance at one point with the exact value.

use shelab::field::{sample_finite_difference, sample_spectral, SpaceTimeGrid};
use shelab::green::{covariance, BoundaryCondition, KernelParams};

fn main() -> shelab::Result<()> {
    let bc = BoundaryCondition::Dirichlet;
    let grid = SpaceTimeGrid::new(0.25, 640, 32)?;
    let (i, j) = (grid.nt, grid.nx / 2);
    let exact = covariance(grid.time(i), grid.pos(j), grid.time(i), grid.pos(j), bc, &KernelParams::default())?;
    let n = 2000;
    let (mut spec, mut fd) = (0.0, 0.0);
    for seed in 0..n {
        spec += sample_spectral(grid, bc, seed, 128)?.values[[i, j]].powi(2);
        fd += sample_finite_difference(grid, bc, seed)?.0.values[[i, j]].powi(2);
    }
    let se = exact * (2.0 / n as f64).sqrt();
    println!("Var u({}, {}) exact {exact:.6}", grid.time(i), grid.pos(j));
    println!("  spectral {:.6}  finite-difference {:.6}  (MC s.e. {se:.6})", spec / n as f64, fd / n as f64);
    Ok(())
}
