//! Green kernel of the heat operator on [0,1] by image sums and by
//! eigen-expansion, and the covariance of the solution.

use shelab::green::{covariance, evaluate_green, BoundaryCondition, KernelMethod, KernelParams};

fn main() -> shelab::Result<()> {
    let image = KernelParams::default().with_method(KernelMethod::Image);
    let eigen = KernelParams::default().with_method(KernelMethod::Eigen);
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        println!("{}", bc.name());
        for t in [0.001, 0.01, 0.1, 1.0] {
            let a = evaluate_green(t, 0.3, 0.5, bc, &image)?;
            let b = evaluate_green(t, 0.3, 0.5, bc, &eigen)?;
            println!("  G({t}, 0.3, 0.5)  image {a:.12}  eigen {b:.12}  diff {:.1e}", (a - b).abs());
        }
        let p = KernelParams::default();
        println!("  Var u(0.5, 0.5) = {:.8}", covariance(0.5, 0.5, 0.5, 0.5, bc, &p)?);
        println!("  Cov(u(0.5,0.5), u(0.4,0.6)) = {:.8}", covariance(0.5, 0.5, 0.4, 0.6, bc, &p)?);
    }
    Ok(())
}
