use serde::{Deserialize, Serialize};

use super::{CriticalKind, CriticalPoint};
use crate::elliptic::{BcKind, EllipticOperator};
use crate::error::{KgmError, Result};
use crate::functional::{FunctionalContext, SystemResidual};
use crate::grid::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// target for the weighted residual of both equations
    pub tol: f64,
    pub max_iters: usize,
    pub minres_tol: f64,
    pub minres_max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 40, minres_tol: 1e-10, minres_max_iter: 20_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinresStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Unpreconditioned MINRES for a symmetric, possibly indefinite operator.
pub fn minres(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, MinresStats) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if beta1 == 0.0 {
        return (x, MinresStats { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut relres = 1.0;
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for k in 0..n {
            v[k] = s * y[k];
        }
        apply(&v, &mut y);
        if itn >= 2 {
            let c = beta / oldb;
            for k in 0..n {
                y[k] -= c * r1[k];
            }
        }
        let alfa: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        let c = alfa / beta;
        for k in 0..n {
            y[k] -= c * r2[k];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for k in 0..n {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
            x[k] += phi * w[k];
        }
        relres = phibar / beta1;
        if relres <= tol || beta == 0.0 {
            return (x, MinresStats { iterations: itn, relative_residual: relres, converged: true });
        }
    }
    (x, MinresStats { iterations: max_iter, relative_residual: relres, converged: false })
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub v: ScalarField,
    pub phi: ScalarField,
    pub residual: SystemResidual,
    pub iterations: usize,
    pub converged: bool,
    pub minres_iterations: usize,
}

fn residuals(ctx: &FunctionalContext, v: &[f64], phi: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let (_, r1) = ctx.saddle(v, phi);
    let r2 = ctx.potential_equation(v, phi);
    let total = ctx.weigh(&r1, &r2).total;
    (r1, r2, total)
}

/// Symmetric Jacobian of `(R₁, -R₂)` at `(v, φ)` acting on `(a, b)`.
struct Jacobian {
    lap_v: EllipticOperator,
    lap_phi: EllipticOperator,
    diag11: Vec<f64>,
    off: Vec<f64>,
    u2: Vec<f64>,
}

impl Jacobian {
    fn new(ctx: &FunctionalContext, v: &[f64], phi: &[f64]) -> Self {
        let d = ctx.domain();
        let m2 = ctx.params().m.powi(2);
        let n = v.len();
        let pot = ctx.potential_interior();
        let ul = ctx.u_interior();
        let mut diag11 = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        for i in 0..n {
            let s = phi[i] + pot[i];
            let u = v[i] + ul[i];
            diag11[i] = m2 - s * s - ctx.model().map_or(0.0, |g| g.g_prime(v[i]));
            off[i] = -2.0 * s * u;
            u2[i] = u * u;
        }
        Self {
            lap_v: EllipticOperator::laplacian(d, BcKind::Dirichlet),
            lap_phi: EllipticOperator::laplacian(d, ctx.potential_bc()),
            diag11,
            off,
            u2,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag11.len();
        let (a, b) = x.split_at(n);
        let (ya, yb) = y.split_at_mut(n);
        self.lap_v.apply_interior(a, ya);
        self.lap_phi.apply_interior(b, yb);
        for i in 0..n {
            ya[i] += self.diag11[i] * a[i] + self.off[i] * b[i];
            yb[i] = -(yb[i] + self.u2[i] * b[i]) + self.off[i] * a[i];
        }
    }
}

/// Damped Newton on the coupled discrete system for `(v, φ)`, starting from
/// `v0` and its reduced potential. Each step solves the symmetric indefinite
/// Jacobian system with MINRES and backtracks on the weighted residual.
pub fn newton_refine(ctx: &FunctionalContext, v0: &ScalarField, cfg: &NewtonConfig) -> Result<NewtonOutcome> {
    let d = ctx.domain().clone();
    let mut v = v0.zero_trace().interior_values();
    let state = ctx.reduce(&ScalarField::from_interior(&d, &v))?;
    let mut phi = state.phi_v.interior_values();
    let n = v.len();
    let (mut r1, mut r2, mut norm) = residuals(ctx, &v, &phi);
    let mut iterations = 0;
    let mut inner = 0;
    let mut converged = norm <= cfg.tol;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let jac = Jacobian::new(ctx, &v, &phi);
        let rhs: Vec<f64> = r1.iter().map(|r| -r).chain(r2.iter().copied()).collect();
        let (delta, stats) = minres(|x, y| jac.apply(x, y), &rhs, cfg.minres_tol, cfg.minres_max_iter);
        inner += stats.iterations;
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1.0 / 1024.0 {
            let tv: Vec<f64> = (0..n).map(|i| v[i] + t * delta[i]).collect();
            let tp: Vec<f64> = (0..n).map(|i| phi[i] + t * delta[n + i]).collect();
            let (a, b, nn) = residuals(ctx, &tv, &tp);
            if nn < (1.0 - 1e-4 * t) * norm {
                v = tv;
                phi = tp;
                r1 = a;
                r2 = b;
                norm = nn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        converged = norm <= cfg.tol;
        if !accepted {
            break;
        }
    }
    let v_field = ScalarField::from_interior(&d, &v);
    let phi_field = match ctx.potential_bc() {
        BcKind::Neumann => crate::reduction::neumann_field(&d, &phi),
        BcKind::Dirichlet => ScalarField::from_interior(&d, &phi),
    };
    Ok(NewtonOutcome {
        v: v_field,
        phi: phi_field,
        residual: ctx.weigh(&r1, &r2),
        iterations,
        converged,
        minres_iterations: inner,
    })
}

/// Newton-refines a critical point and re-evaluates `J` there.
pub(crate) fn refine_point(ctx: &FunctionalContext, cp: &CriticalPoint, cfg: &NewtonConfig, kind: CriticalKind) -> Result<CriticalPoint> {
    let out = newton_refine(ctx, &cp.v, cfg)?;
    if !out.residual.total.is_finite() {
        return Err(KgmError::Newton("residual is not finite".into()));
    }
    let value = ctx.eval_j(&out.v)?;
    let mut history = cp.j_history.clone();
    history.push(value);
    Ok(CriticalPoint {
        v: out.v,
        phi_v: out.phi,
        j_value: value,
        grad_norm: out.residual.matter,
        kind,
        iterations: cp.iterations + out.iterations,
        converged: out.converged,
        j_history: history,
    })
}
