//! Deterministic identities: kernel agreement, Chapman-Kolmogorov, the
//! variance as a Malliavin pairing and the heat identity.

use shelab::experiments::identities::{chapman_kolmogorov, heat_identity_error, kernel_agreement, variance_by_pairing};
use shelab::green::{covariance, BoundaryCondition, KernelParams};

fn main() -> shelab::Result<()> {
    println!("image vs eigen, max rel. error   {:.2e}", kernel_agreement()?);
    println!("Chapman-Kolmogorov, max error    {:.2e}", chapman_kolmogorov()?);
    println!("heat identity, max error         {:.2e}", heat_identity_error()?);
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let by_pairing = variance_by_pairing(0.3, 0.4, bc)?;
        let exact = covariance(0.3, 0.4, 0.3, 0.4, bc, &KernelParams::default())?;
        println!("{}: ‖Du(0.3,0.4)‖² {by_pairing:.10}  Var {exact:.10}", bc.name());
    }
    Ok(())
}
