use super::{weighted_norm, CriticalKind, CriticalPoint, DescentConfig};
use crate::error::{KgmError, Result};
use crate::functional::{Evaluation, FunctionalContext};
use crate::grid::{inner, ScalarField};

/// Relative size of `J` differences treated as round-off.
const ROUNDOFF: f64 = 1e-12;

/// Evaluation that maps a degenerate Neumann sub-solve to `None`, so the
/// line search can treat such trial points as rejected.
pub(crate) fn try_evaluate(ctx: &FunctionalContext, v: &ScalarField) -> Result<Option<Evaluation>> {
    match ctx.evaluate(v) {
        Ok(e) => Ok(Some(e)),
        Err(KgmError::DegenerateOperator(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Outcome of one backtracking search along `-d`.
pub(crate) struct Step {
    pub v: ScalarField,
    pub eval: Evaluation,
    pub t: f64,
}

/// Armijo backtracking along `-d` with `slope = ‖d‖_H²`. Once the predicted
/// decrease falls below round-off in `J`, the sufficient-decrease test is
/// replaced by the approximate condition on the directional derivative,
/// `φ'(t) ≤ (1 - 2c) φ'(0)` in absolute value.
pub(crate) fn armijo(
    ctx: &FunctionalContext,
    v: &ScalarField,
    j0: f64,
    d: &ScalarField,
    slope: f64,
    t0: f64,
    c: f64,
    shrink: f64,
) -> Result<Step> {
    let mut t = t0;
    let floor = ROUNDOFF * j0.abs().max(f64::MIN_POSITIVE);
    while t > 1e-16 * t0.max(1.0) {
        let trial = v.axpy(-t, d);
        if let Some(eval) = try_evaluate(ctx, &trial)? {
            if eval.value <= j0 - c * t * slope {
                return Ok(Step { v: trial, eval, t });
            }
            if c * t * slope <= floor && eval.value <= j0 + floor {
                let slope_t = inner(&eval.residual, d);
                if slope_t >= -(1.0 - 2.0 * c) * slope && slope_t <= (1.0 - 2.0 * c) * slope {
                    return Ok(Step { v: trial, eval, t });
                }
            }
        }
        t *= shrink;
    }
    Err(KgmError::LineSearch(t))
}

/// Sobolev-gradient descent with Armijo backtracking from `v0`.
///
/// Stops when the weighted `L²` norm of the strong residual drops below
/// `grad_tol`. Exceeding `max_iters` returns the last iterate with
/// `converged = false`.
pub fn minimize(ctx: &FunctionalContext, v0: &ScalarField, cfg: &DescentConfig) -> Result<CriticalPoint> {
    cfg.validate()?;
    let mut v = v0.zero_trace();
    let mut eval = ctx.evaluate(&v)?;
    let mut history = vec![eval.value];
    let mut t = cfg.initial_step;
    for it in 0..cfg.max_iters {
        let rn = weighted_norm(&eval.residual);
        if rn <= cfg.grad_tol {
            return Ok(finish(v, eval, rn, it, true, history));
        }
        let d = ctx.sobolev_gradient(&eval.residual)?;
        let slope = inner(&eval.residual, &d);
        let step = armijo(ctx, &v, eval.value, &d, slope, t, cfg.armijo_slope, cfg.backtrack_factor)?;
        // start the next search from a slightly longer step than accepted
        t = (step.t / cfg.backtrack_factor).min(cfg.initial_step);
        v = step.v;
        eval = step.eval;
        history.push(eval.value);
    }
    let rn = weighted_norm(&eval.residual);
    let ok = rn <= cfg.grad_tol;
    Ok(finish(v, eval, rn, cfg.max_iters, ok, history))
}

fn finish(v: ScalarField, eval: Evaluation, rn: f64, iterations: usize, converged: bool, j_history: Vec<f64>) -> CriticalPoint {
    CriticalPoint {
        v,
        phi_v: eval.phi_v,
        j_value: eval.value,
        grad_norm: rn,
        kind: CriticalKind::Minimizer,
        iterations,
        converged,
        j_history,
    }
}
