//! Property-based invariants of the discrete operators, the reduction map
//! and the serialization layer.

mod common;

use common::*;
use kgmvar::config::{BoundarySpec, DomainSpec, RunConfig};
use kgmvar::elliptic::{solve_lifting_u, solve_phi_d, solve_phi_n, BcKind, EllipticOperator};
use kgmvar::field_io::{csv_string, read_csv};
use kgmvar::functional::{FunctionalContext, NonlinearityModel, PhysicalParams, Regime};
use kgmvar::grid::{inner, integrate_boundary, BoundaryData, BoundaryKind, Domain, ScalarField};
use kgmvar::reduction::{neumann_flux_integral, solve_phi_v_dirichlet, solve_phi_v_neumann};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (Domain, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = random_domain(&mut rng, 400);
    (d, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_symmetric_and_positive(seed in any::<u64>(), neumann in any::<bool>()) {
        let (d, mut rng) = setup(seed);
        let bc = if neumann { BcKind::Neumann } else { BcKind::Dirichlet };
        let w = random_interior(&d, &mut rng, 1.0).map(|x| x * x);
        let op = EllipticOperator::laplacian(&d, bc).with_potential(&w).unwrap();
        let x = random_interior(&d, &mut rng, 1.0);
        let y = random_interior(&d, &mut rng, 1.0);
        let axy = inner(&op.apply(&x).unwrap(), &y);
        let xay = inner(&x, &op.apply(&y).unwrap());
        prop_assert!((axy - xay).abs() <= 1e-10 * axy.abs().max(1.0));
        prop_assert!(inner(&op.apply(&x).unwrap(), &x) > 0.0);
    }

    #[test]
    fn reduced_potential_is_bounded_by_one_signed_data(seed in any::<u64>(), q in 0.01f64..0.5, omega in 0.6f64..2.0, sign in any::<bool>()) {
        let (d, mut rng) = setup(seed);
        let omega = if sign { omega } else { -omega };
        let p = PhysicalParams::new(1.0, omega, q).unwrap();
        let h = random_boundary(&d, BoundaryKind::DirichletTrace, &mut rng, -1.0, 1.0);
        let zeta = random_boundary(&d, BoundaryKind::DirichletTrace, &mut rng, -1.0, 1.0);
        let u = solve_lifting_u(&d, &p, &h).unwrap();
        let pd = solve_phi_d(&d, &zeta, &p).unwrap();
        let v = random_interior(&d, &mut rng, 2.0);
        let s = solve_phi_v_dirichlet(&d, &v, &u, &pd).unwrap();
        for &i in d.interior_nodes() {
            let (f, g) = (s.phi_v.get(i), pd.get(i));
            // φ_v sits between 0 and -Φ_D
            prop_assert!(f * g <= 1e-12);
            prop_assert!(f.abs() <= g.abs() + 1e-8);
        }
    }

    #[test]
    fn neumann_solves_balance_the_flux(seed in any::<u64>(), q in 0.01f64..1.0) {
        let (d, mut rng) = setup(seed);
        let p = PhysicalParams::new(1.0, 0.3, q).unwrap();
        let h = random_boundary(&d, BoundaryKind::DirichletTrace, &mut rng, 0.5, 1.0);
        let theta = random_boundary(&d, BoundaryKind::NeumannFlux, &mut rng, -1.0, 1.0);
        let u = solve_lifting_u(&d, &p, &h).unwrap();
        let (pn, kappa) = solve_phi_n(&d, &theta, q).unwrap();
        let v = random_interior(&d, &mut rng, 0.5);
        let s = solve_phi_v_neumann(&d, &v, &u, &pn, q, kappa).unwrap();
        let lhs = neumann_flux_integral(&s, &u, &pn);
        let rhs = q * integrate_boundary(&theta, &d).unwrap();
        let scale = q * integrate_boundary(&theta.map(f64::abs), &d).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * scale.max(1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn odd_nonlinear_functional_is_even_without_matter_trace(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Domain::cube(2, 1.0, 9).unwrap();
        let zeta = random_boundary(&d, BoundaryKind::DirichletTrace, &mut rng, -1.0, 1.0);
        let ctx = FunctionalContext::nonlinear(&d, PhysicalParams::new(1.0, 0.5, 0.2).unwrap(), &zeta, NonlinearityModel::power(4.0, 1.0).unwrap()).unwrap();
        let v = random_interior(&d, &mut rng, 1.0);
        let a = ctx.eval_j(&v).unwrap();
        let b = ctx.eval_j(&v.scaled(-1.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>()) {
        let (d, mut rng) = setup(seed);
        let f = random_interior(&d, &mut rng, 1e3);
        let g = random_interior(&d, &mut rng, 1e-7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, csv_string(&[("f", &f), ("g", &g)]).unwrap()).unwrap();
        let back = read_csv(&path, &d).unwrap();
        prop_assert_eq!(back[0].1.values(), f.values());
        prop_assert_eq!(back[1].1.values(), g.values());
    }

    #[test]
    fn run_config_json_round_trips(n in 3usize..40, q in 0.01f64..1.0, amp in -2.0f64..2.0) {
        let cfg = RunConfig {
            domain: DomainSpec::cube(2, 1.0, n),
            params: PhysicalParams::new(1.0, 0.5, q).unwrap(),
            regime: Regime::Dirichlet,
            h: BoundarySpec::Sinusoidal { amplitude: amp, wavenumbers: vec![1.0, 2.0], phase: 0.1 },
            zeta: BoundarySpec::constant(amp),
            theta: BoundarySpec::default(),
            nonlinearity: None,
            solver: Default::default(),
            out_dir: None,
            seed: 3,
        };
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn zero_field_has_zero_gradient_in_the_homogeneous_problem() {
    let d = Domain::cube(2, 1.0, 11).unwrap();
    let zero = BoundaryData::zeros(&d, BoundaryKind::DirichletTrace);
    let ctx = FunctionalContext::dirichlet(&d, PhysicalParams::new(1.0, 0.0, 0.1).unwrap(), &zero, &zero).unwrap();
    let g = ctx.grad_j(&ScalarField::zeros(&d)).unwrap();
    assert_eq!(g.sup_norm(), 0.0);
}
