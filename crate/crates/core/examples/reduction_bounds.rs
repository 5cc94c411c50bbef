//! The reduction map `v ↦ φ_v`: solves the potential equation for a random
//! matter perturbation and checks the a priori bounds and the energy identity.

use kgmvar::elliptic::{solve_lifting_u, solve_phi_d};
use kgmvar::functional::PhysicalParams;
use kgmvar::grid::{BoundaryData, BoundaryKind, Domain, ScalarField};
use kgmvar::reduction::{solve_phi_v_dirichlet, verify_energy_identity, verify_phi_bounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kgmvar::Result<()> {
    let d = Domain::cube(2, 1.0, 41)?;
    let p = PhysicalParams::new(1.0, 1.2, 0.3)?;
    let h = BoundaryData::from_fn(&d, BoundaryKind::DirichletTrace, |x| 1.0 + 0.5 * x[0]);
    let zeta = BoundaryData::from_fn(&d, BoundaryKind::DirichletTrace, |x| x[1] - 0.5);

    let u = solve_lifting_u(&d, &p, &h)?;
    let phi_d = solve_phi_d(&d, &zeta, &p)?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vals: Vec<f64> = (0..d.num_interior()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let v = ScalarField::from_interior(&d, &vals);

    let state = solve_phi_v_dirichlet(&d, &v, &u, &phi_d)?;
    let bounds = verify_phi_bounds(&state, &u, &phi_d)?;
    println!("|Phi_D|_inf        {:.6}", phi_d.sup_norm());
    println!("|phi_v|_inf        {:.6}", state.phi_v.sup_norm());
    println!("one-signed Phi_D   {}", bounds.one_signed);
    println!("nodewise excess    {:.3e}", bounds.maxmin_violation);
    println!("sup-norm excess    {:.3e}", bounds.sup_violation);
    println!("energy identity    {:.3e}", verify_energy_identity(&state, &u, &phi_d));
    println!("cg iterations      {}", state.stats.iterations);
    println!("bounds hold        {}", bounds.pass);
    Ok(())
}
