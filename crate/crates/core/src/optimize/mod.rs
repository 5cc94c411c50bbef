//! Critical-point finders for the reduced functionals: Sobolev-gradient
//! descent for the coercive problems, a path-deformation mountain-pass
//! scheme, damped Newton refinement of the coupled system, and a
//! multiplicity probe for odd nonlinearities.

mod descent;
mod mountain_pass;
mod multiplicity;
mod newton;
mod subspace;

pub use descent::minimize;
pub use mountain_pass::{find_negative_endpoint, mountain_pass, mountain_pass_in};
pub use subspace::Subspace;
pub use multiplicity::{gradient_norms, multiplicity_probe, MultiplicityConfig, MultiplicityOutcome};
pub use newton::{minres, newton_refine, MinresStats, NewtonConfig, NewtonOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{KgmError, Result};
use crate::functional::{FunctionalContext, SystemResidual};
use crate::grid::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    /// stop when the weighted `L²` norm of the strong residual is below this
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-8, max_iters: 500, armijo_slope: 1e-4, backtrack_factor: 0.5, initial_step: 1.0 }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.max_iters > 0
            && self.armijo_slope > 0.0
            && self.armijo_slope < 1.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.initial_step > 0.0;
        if !ok {
            return Err(KgmError::Config(format!("invalid descent config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainPassConfig {
    pub path_points: usize,
    /// stop deforming when the Sobolev gradient norm at the path maximum is
    /// below this
    pub deform_tol: f64,
    pub max_deforms: usize,
    /// initial scale of the endpoint search along a direction
    pub endpoint_scale_start: f64,
    /// arc-length reparameterization period, in deformation steps
    pub reparam_every: usize,
    /// Newton refinement applied to the path maximum
    pub newton: NewtonConfig,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        Self {
            path_points: 21,
            deform_tol: 1e-3,
            max_deforms: 4000,
            endpoint_scale_start: 0.1,
            reparam_every: 10,
            newton: NewtonConfig::default(),
        }
    }
}

impl MountainPassConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.path_points >= 3
            && self.deform_tol > 0.0
            && self.max_deforms > 0
            && self.endpoint_scale_start > 0.0
            && self.reparam_every > 0;
        if !ok {
            return Err(KgmError::Config(format!("invalid mountain pass config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Minimizer,
    MountainPass,
}

#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub v: ScalarField,
    pub phi_v: ScalarField,
    pub j_value: f64,
    /// weighted `L²` norm of the strong matter residual at `(v, φ_v)`
    pub grad_norm: f64,
    pub kind: CriticalKind,
    pub iterations: usize,
    pub converged: bool,
    /// `J` after each accepted step
    pub j_history: Vec<f64>,
}

impl CriticalPoint {
    /// Residuals of both discrete equations at `(v, φ_v)`.
    pub fn certificate(&self, ctx: &FunctionalContext) -> Result<SystemResidual> {
        ctx.system_residual(&self.v, &self.phi_v)
    }
}

pub(crate) fn weighted_norm(f: &ScalarField) -> f64 {
    crate::grid::l2_norm(f)
}
