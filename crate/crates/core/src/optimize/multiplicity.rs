use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

use super::{find_negative_endpoint, mountain_pass_in, CriticalPoint, MountainPassConfig, Subspace};
use crate::elliptic::dirichlet_eigenpairs;
use crate::error::{KgmError, Result};
use crate::functional::{FunctionalContext, Regime};
use crate::grid::{h1_seminorm, l2_norm, Domain, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplicityConfig {
    pub mountain_pass: MountainPassConfig,
    /// number of Dirichlet eigenfields computed, bounding the complements
    /// `X_k` tried; the probe stops once two distinct points are found
    pub max_subspace: usize,
    /// relative `L²` distance below which two points (up to sign) coincide
    pub dedup_tol: f64,
    pub seed: u64,
}

impl Default for MultiplicityConfig {
    fn default() -> Self {
        Self { mountain_pass: MountainPassConfig::default(), max_subspace: 4, dedup_tol: 1e-3, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct MultiplicityOutcome {
    /// distinct critical points ordered by increasing `J`
    pub points: Vec<CriticalPoint>,
    /// first index `k` with `‖Φ_D‖∞² - m² < λ_k`
    pub first_index: usize,
    pub eigenvalues: Vec<f64>,
    /// subspaces tried, with the failure message if any
    pub attempts: Vec<(String, Option<String>)>,
}

/// `min(‖a-b‖, ‖a+b‖) / max(‖a‖, ‖b‖)`.
pub(crate) fn orbit_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    let scale = l2_norm(a).max(l2_norm(b)).max(f64::MIN_POSITIVE);
    l2_norm(&a.sub(b)).min(l2_norm(&a.add(b))) / scale
}

/// Product-sine eigenfield with `modes[a]` half-waves along axis `a`.
fn sine_mode(d: &Domain, modes: &[usize]) -> ScalarField {
    let l = d.lengths().to_vec();
    ScalarField::from_fn(d, |x| (0..l.len()).map(|a| (modes[a] as f64 * PI * x[a] / l[a]).sin()).product())
}

/// Mountain passes in a sequence of subspaces, each Newton-refined on the
/// whole space; distinct points (up to the sign symmetry of an even
/// functional) are returned ordered by `J`.
///
/// The first pass runs in `X_k`, the complement of the first `k-1`
/// Dirichlet eigenfields for the first index `k` with
/// `‖Φ_D‖∞² - m² < λ_k`, started along the `k`-th eigenfield. Further passes
/// run in the subspaces of fields odd under a mid-plane reflection (longest
/// axis first), started along the eigenfield with two half-waves on that
/// axis; such a subspace is used only when the data are mirror-symmetric,
/// which makes its constrained critical points free ones. When no such
/// symmetry exists the complements `X_k` for larger `k` are tried instead.
pub fn multiplicity_probe(ctx: &FunctionalContext, cfg: &MultiplicityConfig) -> Result<MultiplicityOutcome> {
    if ctx.regime() != Regime::Nonlinear {
        return Err(KgmError::Config("multiplicity probe needs the nonlinear regime".into()));
    }
    let d = ctx.domain();
    let kmax = cfg.max_subspace.clamp(2, 10).min(d.num_interior());
    let pairs = dirichlet_eigenpairs(d, kmax, 1e-10, cfg.seed)?;
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let excess = ctx.potential().sup_norm().powi(2) - ctx.params().m.powi(2);
    let first = eigenvalues.iter().position(|&l| excess < l).map_or(kmax + 1, |j| j + 1);

    let complement = |k: usize| {
        let basis: Vec<ScalarField> = pairs[..k - 1].iter().map(|p| p.1.clone()).collect();
        (if basis.is_empty() { Subspace::Full } else { Subspace::Complement(basis) }, pairs[k - 1].1.clone())
    };
    let mut plan = Vec::new();
    if first <= kmax {
        plan.push(complement(first));
    }
    let mut axes: Vec<usize> = (0..d.dim()).collect();
    axes.sort_by(|&a, &b| d.lengths()[b].total_cmp(&d.lengths()[a]));
    for a in axes {
        let space = Subspace::Odd(a);
        if d.counts()[a] >= 2 && space.preserved_by(ctx) {
            let mut modes = vec![1; d.dim()];
            modes[a] = 2;
            plan.push((space, sine_mode(d, &modes)));
        }
    }
    for k in first + 1..=kmax {
        plan.push(complement(k));
    }

    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut attempts = Vec::new();
    for (space, dir) in plan {
        let label = space.label();
        let run = find_negative_endpoint(ctx, &dir, &cfg.mountain_pass)
            .and_then(|end| mountain_pass_in(ctx, &end, &cfg.mountain_pass, &space))
            .and_then(|cp| {
                if cp.converged {
                    Ok(cp)
                } else {
                    Err(KgmError::Newton(format!("refinement stalled at residual {:.3e}", cp.grad_norm)))
                }
            });
        match run {
            Ok(cp) => {
                attempts.push((label, None));
                if points.iter().all(|p| orbit_distance(&p.v, &cp.v) >= cfg.dedup_tol) {
                    points.push(cp);
                }
            }
            Err(e) => attempts.push((label, Some(e.to_string()))),
        }
        if points.len() >= 2 {
            break;
        }
    }
    points.sort_by(|a, b| a.j_value.total_cmp(&b.j_value));
    Ok(MultiplicityOutcome { points, first_index: first, eigenvalues, attempts })
}

/// `‖∇v‖₂` of each point, in the order given.
pub fn gradient_norms(points: &[CriticalPoint]) -> Vec<f64> {
    points.iter().map(|p| h1_seminorm(&p.v)).collect()
}
