use rayon::prelude::*;

use super::newton::refine_point;
use super::{CriticalKind, CriticalPoint, MountainPassConfig};
use crate::error::{KgmError, Result};
use super::Subspace;
use crate::functional::FunctionalContext;
use crate::grid::{dirichlet_form, inner, l2_norm, ScalarField};

/// Doubles `t` from `endpoint_scale_start` until `J(t·direction) < 0`.
pub fn find_negative_endpoint(ctx: &FunctionalContext, direction: &ScalarField, cfg: &MountainPassConfig) -> Result<ScalarField> {
    cfg.validate()?;
    if direction.interior_sup_norm() == 0.0 {
        return Err(KgmError::Config("endpoint direction is zero".into()));
    }
    let dir = direction.zero_trace();
    let mut t = cfg.endpoint_scale_start;
    for _ in 0..60 {
        let e = dir.scaled(t);
        if ctx.eval_j(&e)? < 0.0 {
            return Ok(e);
        }
        t *= 2.0;
    }
    Err(KgmError::NoNegativeEndpoint(60))
}

/// Mountain pass between `0` and `endpoint` on the whole space.
pub fn mountain_pass(ctx: &FunctionalContext, endpoint: &ScalarField, cfg: &MountainPassConfig) -> Result<CriticalPoint> {
    mountain_pass_in(ctx, endpoint, cfg, &Subspace::Full)
}

fn h_distance(a: &ScalarField, b: &ScalarField, m2: f64) -> f64 {
    let diff = a.sub(b);
    (dirichlet_form(&diff, &diff) + m2 * l2_norm(&diff).powi(2)).sqrt()
}

fn h_norm(a: &ScalarField, m2: f64) -> f64 {
    (dirichlet_form(a, a) + m2 * l2_norm(a).powi(2)).sqrt()
}

/// Redistributes the points strictly between `lo` and `hi` evenly in arc
/// length measured in the `H¹₀` norm weighted by `m²`.
fn reparameterize(
    ctx: &FunctionalContext,
    path: &mut [ScalarField],
    values: &mut [f64],
    lo: usize,
    hi: usize,
) -> Result<()> {
    if hi <= lo + 1 {
        return Ok(());
    }
    let m2 = ctx.params().m.powi(2);
    let old = path[lo..=hi].to_vec();
    let k = old.len();
    let mut arc = vec![0.0; k];
    for i in 1..k {
        arc[i] = arc[i - 1] + h_distance(&old[i], &old[i - 1], m2);
    }
    let total = arc[k - 1];
    if !(total > 0.0) {
        return Ok(());
    }
    let mut seg = 0;
    let mut fresh = Vec::with_capacity(k - 2);
    for j in 1..k - 1 {
        let s = total * j as f64 / (k - 1) as f64;
        while seg + 1 < k - 1 && arc[seg + 1] < s {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let a = if len > 0.0 { ((s - arc[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        fresh.push(old[seg].scaled(1.0 - a).add(&old[seg + 1].scaled(a)));
    }
    let vals: Vec<f64> = fresh.par_iter().map(|f| ctx.eval_j(f)).collect::<Result<_>>()?;
    for (j, (f, v)) in fresh.into_iter().zip(vals).enumerate() {
        path[lo + 1 + j] = f;
        values[lo + 1 + j] = v;
    }
    Ok(())
}

/// Path-deformation mountain pass restricted to `space`.
///
/// The path from `0` to `endpoint` is kept at `path_points` states. Its
/// highest point is deformed as a climbing image: a Sobolev-gradient descent
/// step orthogonal to the path tangent and a one-dimensional Newton ascent
/// step along it, both capped by the mean point spacing. The two halves of
/// the path on either side of the climbing point are periodically
/// reparameterized by arc length, after which the highest point is
/// re-selected. The final point is Newton-refined on the whole space, which
/// only succeeds when `space` is left invariant by the gradient of `J`.
pub fn mountain_pass_in(
    ctx: &FunctionalContext,
    endpoint: &ScalarField,
    cfg: &MountainPassConfig,
    space: &Subspace,
) -> Result<CriticalPoint> {
    cfg.validate()?;
    let end = space.project(&endpoint.zero_trace());
    let j_end = ctx.eval_j(&end)?;
    if !(j_end < 0.0) {
        return Err(KgmError::MountainPass(format!("endpoint has J = {j_end:.6e} >= 0")));
    }
    let m2 = ctx.params().m.powi(2);
    let n = cfg.path_points;
    let mut path: Vec<ScalarField> = (0..n).map(|i| end.scaled(i as f64 / (n - 1) as f64)).collect();
    let mut values: Vec<f64> = path.par_iter().map(|z| ctx.eval_j(z)).collect::<Result<_>>()?;

    let mut history = Vec::new();
    let mut converged = false;
    let mut deforms = 0;
    let mut top = argmax(&values);
    while deforms < cfg.max_deforms {
        if deforms > 0 && deforms % cfg.reparam_every == 0 {
            reparameterize(ctx, &mut path, &mut values, 0, top)?;
            reparameterize(ctx, &mut path, &mut values, top, n - 1)?;
            top = argmax(&values);
        }
        if top == 0 || top == n - 1 {
            return Err(KgmError::MountainPass("path maximum collapsed to an endpoint".into()));
        }
        let z = path[top].clone();
        let eval = ctx.evaluate(&z)?;
        values[top] = eval.value;
        history.push(eval.value);
        let d = space.project(&ctx.sobolev_gradient(&eval.residual)?);
        let gnorm = inner(&eval.residual, &d).max(0.0).sqrt();
        if gnorm <= cfg.deform_tol {
            converged = true;
            break;
        }

        let chord = path[top + 1].sub(&path[top - 1]);
        let spacing = 0.5 * h_norm(&chord, m2);
        let tau = chord.scaled(1.0 / h_norm(&chord, m2).max(f64::MIN_POSITIVE));
        // H-inner product with the Sobolev gradient is the W-inner product
        // with the residual, so c = dJ/ds along τ
        let c = inner(&eval.residual, &tau);
        let perp = d.axpy(-c, &tau);
        let eps = 1e-4 * spacing.max(1e-8);
        let probe = ctx.evaluate(&z.axpy(eps, &tau))?;
        let curvature = (inner(&probe.residual, &tau) - c) / eps;
        let s = if curvature < 0.0 { -c / curvature } else { c };
        let mut step = perp.scaled(-1.0).axpy(s.clamp(-spacing, spacing), &tau);
        let len = h_norm(&step, m2);
        if len > spacing && len > 0.0 {
            step = step.scaled(spacing / len);
        }
        path[top] = space.project(&z.add(&step));
        values[top] = ctx.eval_j(&path[top])?;
        deforms += 1;
    }
    if !converged {
        return Err(KgmError::MountainPass(format!("no convergence after {} deformations", cfg.max_deforms)));
    }
    let eval = ctx.evaluate(&path[top])?;
    let rough = CriticalPoint {
        v: path[top].clone(),
        phi_v: eval.phi_v,
        j_value: eval.value,
        grad_norm: super::weighted_norm(&eval.residual),
        kind: CriticalKind::MountainPass,
        iterations: deforms,
        converged,
        j_history: history,
    };
    let cp = refine_point(ctx, &rough, &cfg.newton, CriticalKind::MountainPass)?;
    if !(cp.j_value > 0.0) || l2_norm(&cp.v) <= 1e-3 {
        return Err(KgmError::MountainPass(format!(
            "refined point is trivial (J = {:.3e}, |v| = {:.3e})",
            cp.j_value,
            l2_norm(&cp.v)
        )));
    }
    Ok(cp)
}

fn argmax(values: &[f64]) -> usize {
    (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{smallest_eigenvalue, EIG_TOL};
    use crate::functional::{NonlinearityModel, PhysicalParams};
    use crate::grid::{BoundaryData, BoundaryKind, Domain};

    fn ctx(n: usize) -> FunctionalContext {
        let d = Domain::cube(2, 1.0, n).unwrap();
        let p = PhysicalParams::new(1.0, 0.5, 0.1).unwrap();
        let zeta = BoundaryData::constant(&d, BoundaryKind::DirichletTrace, 1.0);
        FunctionalContext::nonlinear(&d, p, &zeta, NonlinearityModel::power(4.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn endpoint_search() {
        let c = ctx(11);
        let (_, e1) = smallest_eigenvalue(c.domain(), EIG_TOL).unwrap();
        let cfg = MountainPassConfig::default();
        let end = find_negative_endpoint(&c, &e1, &cfg).unwrap();
        assert!(c.eval_j(&end).unwrap() < 0.0);
        assert!(c.eval_j(&end.scaled(2.0)).unwrap() < 0.0);
        assert!(find_negative_endpoint(&c, &ScalarField::zeros(c.domain()), &cfg).is_err());
    }

    #[test]
    fn finds_positive_solution_and_its_mirror() {
        let c = ctx(15);
        let (_, e1) = smallest_eigenvalue(c.domain(), EIG_TOL).unwrap();
        let cfg = MountainPassConfig::default();
        let end = find_negative_endpoint(&c, &e1, &cfg).unwrap();
        let a = mountain_pass(&c, &end, &cfg).unwrap();
        assert!(a.converged);
        assert!(a.j_value > 0.0);
        assert!(a.certificate(&c).unwrap().total < 1e-8);
        let b = mountain_pass(&c, &end.scaled(-1.0), &cfg).unwrap();
        assert!((a.j_value - b.j_value).abs() < 1e-8 * a.j_value);
        assert!(l2_norm(&a.v.add(&b.v)) < 1e-6 * l2_norm(&a.v));
    }
}
