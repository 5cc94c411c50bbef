//! Odd power nonlinearity with zero matter trace: a mountain-pass solution
//! and further distinct solutions from symmetric subspaces.

use kgmvar::elliptic::{check_spectral_condition, smallest_eigenvalue, EIG_TOL};
use kgmvar::functional::{FunctionalContext, NonlinearityModel, PhysicalParams};
use kgmvar::grid::{BoundaryData, BoundaryKind, Domain};
use kgmvar::optimize::{multiplicity_probe, MultiplicityConfig};

fn main() -> kgmvar::Result<()> {
    let d = Domain::cube(2, 1.0, 21)?;
    let p = PhysicalParams::new(1.0, 0.5, 0.1)?;
    let zeta = BoundaryData::constant(&d, BoundaryKind::DirichletTrace, 1.0);
    let (lambda1, _) = smallest_eigenvalue(&d, EIG_TOL)?;
    let spectral = check_spectral_condition(&p, &zeta, lambda1);
    println!("spectral margin {:.4} (holds: {})", spectral.margin, spectral.holds);

    let ctx = FunctionalContext::nonlinear(&d, p, &zeta, NonlinearityModel::power(4.0, 1.0)?)?;
    let out = multiplicity_probe(&ctx, &MultiplicityConfig::default())?;
    for (label, err) in &out.attempts {
        println!("subspace {label}: {}", err.as_deref().unwrap_or("ok"));
    }
    for (i, cp) in out.points.iter().enumerate() {
        let res = cp.certificate(&ctx)?;
        println!("solution {}: J = {:.6}, residual = {:.2e}", i + 1, cp.j_value, res.total);
    }
    Ok(())
}
