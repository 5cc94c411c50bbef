//! Weak coupling: as `q → 0` the matter field approaches the solution of the
//! uncoupled Klein-Gordon problem.

use kgmvar::grid::{BoundaryData, BoundaryKind, Domain};
use kgmvar::harness::{run_q_limit_dirichlet, HarnessConfig};

fn main() -> kgmvar::Result<()> {
    let d = Domain::cube(2, 1.0, 21)?;
    let h = BoundaryData::constant(&d, BoundaryKind::DirichletTrace, 1.0);
    let zeta = BoundaryData::constant(&d, BoundaryKind::DirichletTrace, 1.0);
    let v = run_q_limit_dirichlet(&d, 1.0, 0.5, &h, &zeta, &[0.4, 0.2, 0.1, 0.05], &HarnessConfig::default())?;
    for (k, x) in &v.measured {
        println!("{k:<28} {x:.6e}");
    }
    println!("pass: {}", v.pass);
    Ok(())
}
