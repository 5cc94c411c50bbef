//! Acceptance criteria, one PASS/FAIL line each. Runs with a plain `main`
//! so the lines are printed even when everything passes.

mod common;

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use kgmvar::config::BoundarySpec;
use kgmvar::elliptic::{smallest_eigenvalue, solve_lifting_u, solve_phi_d, solve_phi_n, EIG_TOL};
use kgmvar::functional::{FunctionalContext, NonlinearityModel, PhysicalParams};
use kgmvar::grid::{BoundaryData, BoundaryKind, Domain, ScalarField};
use kgmvar::harness::{
    run_all, run_change_of_variables, run_dichotomy, run_mixed, run_nonlinear, run_q_limit_dirichlet,
    run_q_limit_neumann, scenario_set, HarnessConfig, Verdict,
};
use kgmvar::reduction::{solve_phi_v_dirichlet, solve_phi_v_neumann, verify_energy_identity, verify_phi_bounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let e = t.elapsed();
    ensure(e < limit, format!("{what} took {:.1} s, budget {:.0} s", e.as_secs_f64(), limit.as_secs_f64()))
}

fn err(e: kgmvar::KgmError) -> String {
    e.to_string()
}

fn measured(v: &Verdict, key: &str) -> Result<f64, String> {
    v.measured.get(key).copied().ok_or_else(|| format!("{}: no measurement {key}", v.scenario))
}

fn unit_square(n: usize) -> Domain {
    Domain::cube(2, 1.0, n).unwrap()
}

fn bdata(spec: BoundarySpec, d: &Domain, kind: BoundaryKind) -> BoundaryData {
    spec.build(d, kind).unwrap()
}

fn closed_form_lambda1(d: &Domain) -> f64 {
    d.spacing().iter().map(|h| 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2)).sum()
}

fn eigenvalue_oracle() -> Outcome {
    let t = Instant::now();
    let d = unit_square(63);
    let (l, _) = smallest_eigenvalue(&d, EIG_TOL).map_err(err)?;
    let rel = (l - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    let closed = (l - closed_form_lambda1(&d)).abs();
    ensure(rel <= 0.01, format!("square: relative error {rel:.3e}"))?;
    ensure(closed <= 1e-8, format!("square: closed-form gap {closed:.3e}"))?;
    within(t, Duration::from_secs(10), "square")?;

    let t = Instant::now();
    let c = Domain::cube(3, 1.0, 23).unwrap();
    let (lc, _) = smallest_eigenvalue(&c, EIG_TOL).map_err(err)?;
    let relc = (lc - 3.0 * PI * PI).abs() / (3.0 * PI * PI);
    ensure(relc <= 0.02, format!("cube: relative error {relc:.3e}"))?;
    within(t, Duration::from_secs(10), "cube")?;
    Ok(format!("square rel {rel:.2e}, closed-form gap {closed:.1e}; cube rel {relc:.2e}"))
}

fn dense_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = [0.0f64; 5];
    for _ in 0..20 {
        let d = random_domain(&mut rng, 512);
        let l = Lattice::new(&d);
        let p = PhysicalParams::new(rng.gen_range(0.5..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.05..1.0)).unwrap();
        let h = random_boundary(&d, BoundaryKind::DirichletTrace, &mut rng, -1.0, 1.0);
        let zeta = random_boundary(&d, BoundaryKind::DirichletTrace, &mut rng, -1.0, 1.0);
        let theta = random_boundary(&d, BoundaryKind::NeumannFlux, &mut rng, -1.0, 1.0);
        let v = random_interior(&d, &mut rng, 1.0);

        let u = solve_lifting_u(&d, &p, &h).map_err(err)?;
        let u_o = oracle_lift_u(&l, p.m, p.q, &h);
        worst[0] = worst[0].max(rel_err(u.values(), u_o.values()));

        let pd = solve_phi_d(&d, &zeta, &p).map_err(err)?;
        let pd_o = oracle_phi_d(&l, p.q, p.omega, &zeta);
        worst[1] = worst[1].max(rel_err(pd.values(), pd_o.values()));

        let (pn, kappa) = solve_phi_n(&d, &theta, p.q).map_err(err)?;
        let (pn_o, kappa_o) = oracle_phi_n(&l, p.q, &theta);
        worst[2] = worst[2].max(rel_err(&l.interior_of(&pn), &pn_o)).max((kappa - kappa_o).abs() / kappa_o.abs().max(1e-300));

        let w: Vec<f64> = l.nodes.iter().map(|&i| (v.get(i) + u.get(i)).powi(2)).collect();
        let sd = solve_phi_v_dirichlet(&d, &v, &u, &pd).map_err(err)?;
        let sd_o = oracle_phi_v_dirichlet(&l, &w, &l.interior_of(&pd));
        worst[3] = worst[3].max(rel_err(&l.interior_of(&sd.phi_v), &sd_o));

        let sn = solve_phi_v_neumann(&d, &v, &u, &pn, p.q, kappa).map_err(err)?;
        let sn_o = oracle_phi_v_neumann(&l, &w, &l.interior_of(&pn), p.q * kappa);
        worst[4] = worst[4].max(rel_err(&l.interior_of(&sn.phi_v), &sn_o));
    }
    let top = worst.iter().fold(0.0f64, |m, x| m.max(*x));
    ensure(top <= 1e-9, format!("worst relative errors U, Phi_D, Phi_N, phi_v(D), phi_v(N): {worst:?}"))?;
    Ok(format!("20 instances, worst relative error {top:.2e}"))
}

/// Random Dirichlet reduction instance with a one-signed `Φ_D`.
struct BoundsInstance {
    d: Domain,
    v: ScalarField,
    u: ScalarField,
    phi_d: ScalarField,
}

fn bounds_instance(rng: &mut ChaCha8Rng) -> BoundsInstance {
    let d = random_domain(rng, 512);
    let q = rng.gen_range(1e-3..=0.5);
    let omega = rng.gen_range(0.6..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let p = PhysicalParams::new(rng.gen_range(0.5..2.0), omega, q).unwrap();
    let h = random_boundary(&d, BoundaryKind::DirichletTrace, rng, -1.0, 1.0);
    let zeta = random_boundary(&d, BoundaryKind::DirichletTrace, rng, -1.0, 1.0);
    let u = solve_lifting_u(&d, &p, &h).unwrap();
    let phi_d = solve_phi_d(&d, &zeta, &p).unwrap();
    let v = random_interior(&d, rng, 2.0);
    BoundsInstance { d, v, u, phi_d }
}

fn potential_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst_maxmin: f64 = 0.0;
    let mut worst_sup: f64 = 0.0;
    let mut worst_split: f64 = 0.0;
    for k in 0..100 {
        let s = bounds_instance(&mut rng);
        let l = Lattice::new(&s.d);
        let state = solve_phi_v_dirichlet(&s.d, &s.v, &s.u, &s.phi_d).map_err(err)?;
        let phi = l.interior_of(&state.phi_v);
        let pd = l.interior_of(&s.phi_d);
        let pd_sup = s.phi_d.sup_norm();
        let mut sum_sup: f64 = 0.0;
        let mut phi_sup: f64 = 0.0;
        for (f, g) in phi.iter().zip(&pd) {
            worst_maxmin = worst_maxmin.max(-g.max(0.0) - f).max(f - (-g).max(0.0));
            sum_sup = sum_sup.max((f + g).abs());
            phi_sup = phi_sup.max(f.abs());
        }
        worst_sup = worst_sup.max(sum_sup - pd_sup).max(phi_sup - pd_sup);

        let w: Vec<f64> = l.nodes.iter().map(|&i| (s.v.get(i) + s.u.get(i)).powi(2)).collect();
        let neg_part: Vec<f64> = pd.iter().map(|g| -(-g).max(0.0)).collect();
        let pos_part: Vec<f64> = pd.iter().map(|g| -g.max(0.0)).collect();
        let tilde = oracle_phi_v_dirichlet(&l, &w, &neg_part);
        let hat = oracle_phi_v_dirichlet(&l, &w, &pos_part);
        for i in 0..phi.len() {
            worst_split = worst_split.max((tilde[i] - phi[i].max(0.0)).abs()).max((hat[i] - (-phi[i]).max(0.0)).abs());
        }
        let report = verify_phi_bounds(&state, &s.u, &s.phi_d).map_err(err)?;
        ensure(report.pass, format!("instance {k}: library bound report fails: {report:?}"))?;
    }
    ensure(worst_maxmin <= 1e-8, format!("max-min violation {worst_maxmin:.3e}"))?;
    ensure(worst_sup <= 1e-8, format!("sup-norm violation {worst_sup:.3e}"))?;
    ensure(worst_split <= 1e-8, format!("positive/negative part defect {worst_split:.3e}"))?;
    Ok(format!(
        "100 instances, violations {:.1e} / {:.1e}, split defect {worst_split:.1e}",
        worst_maxmin.max(0.0),
        worst_sup.max(0.0)
    ))
}

fn energy_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..100 {
        let s = bounds_instance(&mut rng);
        let state = solve_phi_v_dirichlet(&s.d, &s.v, &s.u, &s.phi_d).map_err(err)?;
        worst = worst.max(verify_energy_identity(&state, &s.u, &s.phi_d));
        count += 1;
    }
    let scenarios = scenario_set("all", 31).map_err(err)?;
    for r in run_all(&scenarios, &HarnessConfig::default()) {
        let v = r.map_err(err)?;
        for c in &v.certificates {
            if let Some(e) = c.energy_identity {
                worst = worst.max(e);
                count += 1;
            }
        }
    }
    ensure(worst <= 1e-8, format!("worst relative residual {worst:.3e} over {count} solves"))?;
    Ok(format!("{count} solves, worst relative residual {worst:.2e}"))
}

fn gradient_checks() -> Outcome {
    let t = Instant::now();
    let d = unit_square(15);
    let p = PhysicalParams::new(1.0, 0.5, 0.3).unwrap();
    let h = bdata(BoundarySpec::Linear { offset: 0.5, slope: vec![0.5, -0.3] }, &d, BoundaryKind::DirichletTrace);
    let zeta = bdata(BoundarySpec::constant(1.0), &d, BoundaryKind::DirichletTrace);
    let theta = bdata(
        BoundarySpec::Sinusoidal { amplitude: 0.2, wavenumbers: vec![1.0, 0.0], phase: 0.3 },
        &d,
        BoundaryKind::NeumannFlux,
    );
    let contexts = [
        ("dirichlet", FunctionalContext::dirichlet(&d, p, &h, &zeta).map_err(err)?),
        ("mixed", FunctionalContext::mixed(&d, p, &h, &theta).map_err(err)?),
        ("nonlinear", FunctionalContext::nonlinear(&d, p, &zeta, NonlinearityModel::power(4.0, 1.0).unwrap()).map_err(err)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for (name, ctx) in &contexts {
        for _ in 0..5 {
            let v = random_interior(&d, &mut rng, 0.5);
            let g = ctx.grad_j(&v).map_err(err)?;
            for _ in 0..10 {
                let w = random_interior(&d, &mut rng, 1.0);
                let an: f64 = d.interior_nodes().iter().map(|&i| g.get(i) * w.get(i)).sum();
                let eps = 1e-5;
                let fd = (ctx.eval_j(&v.axpy(eps, &w)).map_err(err)? - ctx.eval_j(&v.axpy(-eps, &w)).map_err(err)?) / (2.0 * eps);
                let rel = (fd - an).abs() / an.abs().max(1e-8);
                ensure(rel <= 1e-4, format!("{name}: relative error {rel:.3e}"))?;
                worst = worst.max(rel);
            }
        }
    }
    within(t, Duration::from_secs(30), "gradient checks")?;
    Ok(format!("3 regimes x 5 points x 10 directions, worst relative error {worst:.2e}"))
}

fn dichotomy() -> Outcome {
    let d = unit_square(31);
    let p = PhysicalParams::new(1.0, 0.5, 0.1).unwrap();
    let zeta = bdata(BoundarySpec::constant(1.0), &d, BoundaryKind::DirichletTrace);
    let cfg = HarnessConfig::default();
    let one = bdata(BoundarySpec::constant(1.0), &d, BoundaryKind::DirichletTrace);
    let zero = BoundaryData::zeros(&d, BoundaryKind::DirichletTrace);
    let a = run_dichotomy(&d, p, &one, &zeta, &cfg).map_err(err)?;
    let (un, res) = (measured(&a, "u_norm")?, measured(&a, "residual")?);
    ensure(a.pass && un > 1e-3 && res <= 1e-6, format!("nontrivial branch: |u| {un:.3e}, residual {res:.3e}"))?;
    let b = run_dichotomy(&d, p, &zero, &zeta, &cfg).map_err(err)?;
    let (vn, id) = (measured(&b, "max_v_norm")?, measured(&b, "max_identity")?);
    ensure(b.certificates.len() == 5, "trivial branch must use 5 starts")?;
    ensure(b.pass && vn <= 1e-6 && id <= 1e-8, format!("trivial branch: |v| {vn:.3e}, identity {id:.3e}"))?;
    Ok(format!("|u| = {un:.3e} (residual {res:.1e}); trivial |v| {vn:.1e}, identity {id:.1e}"))
}

fn change_of_variables() -> Outcome {
    let d = unit_square(31);
    let cfg = HarnessConfig::default();
    let cases = [
        (PhysicalParams::new(1.0, 0.5, 0.1).unwrap(), BoundarySpec::constant(1.0), BoundarySpec::constant(1.0)),
        (
            PhysicalParams::new(1.2, 0.8, 0.3).unwrap(),
            BoundarySpec::Linear { offset: 0.2, slope: vec![1.0, 0.5] },
            BoundarySpec::Sinusoidal { amplitude: 1.0, wavenumbers: vec![1.0, 1.0], phase: 0.0 },
        ),
        (PhysicalParams::new(0.7, -0.4, 0.2).unwrap(), BoundarySpec::constant(-0.5), BoundarySpec::constant(2.0)),
    ];
    let mut worst: f64 = 0.0;
    for (p, h, z) in cases {
        let h = bdata(h, &d, BoundaryKind::DirichletTrace);
        let z = bdata(z, &d, BoundaryKind::DirichletTrace);
        let v = run_change_of_variables(&d, p, &h, &z, &cfg).map_err(err)?;
        let r = measured(&v, "original_matter_residual")?.hypot(measured(&v, "original_potential_residual")?);
        ensure(v.pass && r <= 1e-6, format!("q = {}: original residual {r:.3e}", p.q))?;
        worst = worst.max(r);
    }
    Ok(format!("3 certified solutions, worst original-system residual {worst:.2e}"))
}

fn flux_balance() -> Outcome {
    let d = unit_square(31);
    let cfg = HarnessConfig::default();
    let p = PhysicalParams::new(1.0, 0.5, 0.05).unwrap();
    let cases = [
        (BoundarySpec::constant(1.0), BoundarySpec::constant(0.1)),
        (
            BoundarySpec::Linear { offset: 0.5, slope: vec![0.5, 0.0] },
            BoundarySpec::Sinusoidal { amplitude: 0.2, wavenumbers: vec![1.0, 0.0], phase: 0.4 },
        ),
        (BoundarySpec::constant(-1.0), BoundarySpec::constant(-0.05)),
    ];
    let mut worst: f64 = 0.0;
    for (h, t) in cases {
        let h = bdata(h, &d, BoundaryKind::DirichletTrace);
        let t = bdata(t, &d, BoundaryKind::NeumannFlux);
        let v = run_mixed(&d, p, &h, &t, &cfg).map_err(err)?;
        let e = measured(&v, "flux_balance_error")?;
        ensure(v.pass && e <= 1e-6, format!("flux balance error {e:.3e}"))?;
        worst = worst.max(e);
    }
    let zero = BoundaryData::zeros(&d, BoundaryKind::DirichletTrace);
    let t = bdata(BoundarySpec::Linear { offset: -0.05, slope: vec![0.1, 0.0] }, &d, BoundaryKind::NeumannFlux);
    let v = run_mixed(&d, p, &zero, &t, &cfg).map_err(err)?;
    let un = measured(&v, "max_u_norm")?;
    ensure(v.pass && un <= 1e-6, format!("zero trace, zero flux: |u| {un:.3e}"))?;
    Ok(format!("worst relative flux imbalance {worst:.2e}; trivial |u| {un:.1e}"))
}

fn q_limits() -> Outcome {
    let d = unit_square(31);
    let cfg = HarnessConfig::default();
    let one = bdata(BoundarySpec::constant(1.0), &d, BoundaryKind::DirichletTrace);
    let a = run_q_limit_dirichlet(&d, 1.0, 0.5, &one, &one, &[0.4, 0.2, 0.1, 0.05], &cfg).map_err(err)?;
    let ratio = measured(&a, "max_ratio")?;
    ensure(a.pass && ratio <= 0.7, format!("dirichlet: worst ratio {ratio:.3}"))?;
    let theta = bdata(BoundarySpec::constant(1.0), &d, BoundaryKind::NeumannFlux);
    let b = run_q_limit_neumann(&d, 1.0, 0.5, &one, &theta, &[0.05], &cfg).map_err(err)?;
    let (inc, flux) = (measured(&b, "incompatibility")?, measured(&b, "total_flux")?);
    ensure(b.pass && inc != 0.0 && (inc - flux).abs() <= 1e-12 * flux.abs(), format!("neumann: defect {inc:.6e} vs flux {flux:.6e}"))?;
    Ok(format!("dirichlet worst ratio {ratio:.3}; neumann defect {inc:.6} = total flux {flux:.6}"))
}

fn mountain_pass_multiplicity() -> Outcome {
    let t = Instant::now();
    let d = unit_square(31);
    let p = PhysicalParams::new(1.0, 0.5, 0.1).unwrap();
    let zeta = bdata(BoundarySpec::constant(1.0), &d, BoundaryKind::DirichletTrace);
    let v = run_nonlinear(&d, p, &zeta, NonlinearityModel::power(4.0, 1.0).unwrap(), &HarnessConfig::default()).map_err(err)?;
    let (j, res) = (measured(&v, "mp_j")?, measured(&v, "mp_residual")?);
    ensure(j > 0.0 && res <= 1e-8, format!("mountain pass: J {j:.3e}, residual {res:.3e}"))?;
    let n = measured(&v, "distinct_solutions")?;
    ensure(n >= 2.0, format!("only {n} solutions"))?;
    let (j1, j2) = (measured(&v, "j[1]")?, measured(&v, "j[2]")?);
    let (g1, g2) = (measured(&v, "grad_norm[1]")?, measured(&v, "grad_norm[2]")?);
    ensure(j2 > j1 && g2 > g1, format!("J {j1:.3e} -> {j2:.3e}, grad {g1:.3e} -> {g2:.3e}"))?;
    // Φ_D is harmonic with constant trace qζ - ω
    let sup = 1.0 * p.q - p.omega;
    for k in 1..=2 {
        let s = measured(&v, &format!("phi_sup[{k}]"))?;
        ensure(s <= sup.abs() + 1e-8, format!("solution {k}: |phi| {s:.6e} above {:.6e}", sup.abs()))?;
    }
    ensure(v.pass, format!("verdict fails: {:?}", v.notes))?;
    within(t, Duration::from_secs(180), "nonlinear scenario")?;
    Ok(format!("J1 = {j1:.4}, J2 = {j2:.4}, residual {res:.1e}, {:.1} s", t.elapsed().as_secs_f64()))
}

fn full_suite() -> Outcome {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_kgmvar"))
        .args(["verify", "all", "--quiet"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
    within(t, Duration::from_secs(600), "verify all")?;
    Ok(format!("exit 0 in {:.1} s", t.elapsed().as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("eigenvalue oracle", eigenvalue_oracle),
        ("dense-solve equivalence", dense_equivalence),
        ("reduced potential bounds", potential_bounds),
        ("energy identity", energy_identity),
        ("gradient checks", gradient_checks),
        ("dirichlet dichotomy", dichotomy),
        ("change of variables", change_of_variables),
        ("neumann flux balance", flux_balance),
        ("q -> 0 behavior", q_limits),
        ("mountain pass and multiplicity", mountain_pass_multiplicity),
        ("full verify suite", full_suite),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
