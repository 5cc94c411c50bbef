//! Lowest Dirichlet eigenvalues of the discrete Laplacian on the unit square,
//! next to the continuum values `π²(j² + k²)` and the exact discrete ones.

use kgmvar::elliptic::{analytic_box_eigenvalues, dirichlet_eigenpairs, discrete_box_eigenvalues, EIG_TOL};
use kgmvar::grid::Domain;

fn main() -> kgmvar::Result<()> {
    let d = Domain::cube(2, 1.0, 31)?;
    let k = 6;
    let computed = dirichlet_eigenpairs(&d, k, EIG_TOL, 7)?;
    let exact = discrete_box_eigenvalues(&d, k);
    let continuum = analytic_box_eigenvalues(&d, k);
    println!("{:>3} {:>14} {:>14} {:>14}", "k", "computed", "discrete", "continuum");
    for (i, (lam, _)) in computed.iter().enumerate() {
        println!("{:>3} {:>14.8} {:>14.8} {:>14.8}", i + 1, lam, exact[i], continuum[i]);
    }
    Ok(())
}
