//! Matter trace with a prescribed potential flux: the minimizer and the
//! discrete flux balance it satisfies.

use kgmvar::functional::{FunctionalContext, PhysicalParams};
use kgmvar::grid::{integrate_boundary, BoundaryData, BoundaryKind, Domain, ScalarField};
use kgmvar::optimize::{minimize, DescentConfig};
use kgmvar::reduction::neumann_flux_integral;

fn main() -> kgmvar::Result<()> {
    let d = Domain::cube(2, 1.0, 31)?;
    let p = PhysicalParams::new(1.0, 0.5, 0.05)?;
    let h = BoundaryData::constant(&d, BoundaryKind::DirichletTrace, 1.0);
    let theta = BoundaryData::constant(&d, BoundaryKind::NeumannFlux, 0.1);
    let ctx = FunctionalContext::mixed(&d, p, &h, &theta)?;

    let cp = minimize(&ctx, &ScalarField::zeros(&d), &DescentConfig::default())?;
    let state = ctx.reduce(&cp.v)?;
    let charge = neumann_flux_integral(&state, ctx.u_lift(), ctx.potential());
    let flux = p.q * integrate_boundary(&theta, &d)?;
    let res = cp.certificate(&ctx)?;
    println!("J              {:.10}", cp.j_value);
    println!("kappa          {:.6}", ctx.kappa());
    println!("charge         {charge:.12}");
    println!("q * flux       {flux:.12}");
    println!("residual       {:.3e}", res.total);
    Ok(())
}
