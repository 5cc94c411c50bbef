//! Reduced functionals `J(v) = F(v, φ_v)` for the linear Dirichlet, mixed
//! Dirichlet/Neumann and nonlinear Dirichlet problems, their discrete
//! gradients, and the power nonlinearity.
//!
//! Every `J` is evaluated through the saddle function `F(v, φ)` whose
//! `φ`-derivative vanishes at `φ_v`. At an exact solve this agrees with the
//! closed forms (e.g. `½‖∇v‖² + (m²/2)‖v‖² - ½∫Φ_D(φ_v+Φ_D)(v+U)²`), and
//! solver error in `φ_v` enters only quadratically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::{
    solve_interior, solve_lifting_u, solve_phi_d, solve_phi_n, BcKind, EllipticOperator, SolveStats,
    CG_MAX_ITER, CG_TOL,
};
use crate::error::{KgmError, Result};
use crate::grid::{h1_seminorm, l2_norm, lp_norm, BoundaryData, Domain, ScalarField};
use crate::reduction::{neumann_field, phi_v_dirichlet_interior, phi_v_neumann_interior, ReducedState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub omega: f64,
    pub q: f64,
}

impl PhysicalParams {
    pub fn new(m: f64, omega: f64, q: f64) -> Result<Self> {
        let p = Self { m, omega, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(KgmError::Config(format!("mass must be positive, got {}", self.m)));
        }
        if !self.omega.is_finite() || !self.q.is_finite() {
            return Err(KgmError::Config("omega and q must be finite".into()));
        }
        Ok(())
    }
}

/// `g(t) = μ|t|^{p-2}t`, `G(t) = (μ/p)|t|^p`. `s` and `r` are the exponent
/// and threshold of the superquadraticity condition `0 < sG(t) ≤ t g(t)`
/// for `|t| ≥ r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityModel {
    pub p: f64,
    pub mu: f64,
    pub s: f64,
    pub r: f64,
}

impl NonlinearityModel {
    pub fn power(p: f64, mu: f64) -> Result<Self> {
        let m = Self { p, mu, s: p, r: 0.0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0 && self.p < 6.0) {
            return Err(KgmError::Config(format!("exponent p must lie in (2, 6), got {}", self.p)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(KgmError::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.s > 2.0 && self.s <= self.p) {
            return Err(KgmError::Config(format!("s must lie in (2, p], got {}", self.s)));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(KgmError::Config(format!("r must be nonnegative, got {}", self.r)));
        }
        Ok(())
    }

    /// Power models are odd in `t`.
    pub fn is_odd(&self) -> bool {
        true
    }

    pub fn g(&self, t: f64) -> f64 {
        self.mu * t.abs().powf(self.p - 2.0) * t
    }

    pub fn big_g(&self, t: f64) -> f64 {
        self.mu / self.p * t.abs().powf(self.p)
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        self.mu * (self.p - 1.0) * t.abs().powf(self.p - 2.0)
    }

    /// Samples `±t` on a log grid over `[1e-6, 1e6]` and checks the growth,
    /// origin, superquadraticity and lower-bound conditions.
    pub fn verify_ar(&self, samples: usize) -> ArReport {
        let samples = samples.max(2);
        let b1 = self.mu / self.p;
        let b2 = if self.s == self.p { 0.0 } else { self.mu / self.p };
        let mut ar: f64 = 0.0;
        let mut lower: f64 = 0.0;
        let mut odd: f64 = 0.0;
        let mut growth: f64 = 0.0;
        let mut positive = true;
        for k in 0..samples {
            let e = -6.0 + 12.0 * k as f64 / (samples - 1) as f64;
            for t in [10f64.powf(e), -(10f64.powf(e))] {
                let (g, big) = (self.g(t), self.big_g(t));
                let scale = (t * g).abs().max(f64::MIN_POSITIVE);
                if t.abs() >= self.r {
                    ar = ar.max((self.s * big - t * g) / scale);
                    positive &= self.s * big > 0.0;
                }
                lower = lower.max((b1 * t.abs().powf(self.s) - b2 - big) / big.max(1.0));
                odd = odd.max((self.g(-t) + g).abs() / g.abs().max(f64::MIN_POSITIVE));
                // |g| ≤ a₁ + a₂|t|^{p-1} with a₁ = 0, a₂ = μ
                growth = growth.max((g.abs() - self.mu * t.abs().powf(self.p - 1.0)) / g.abs().max(1.0));
            }
        }
        let small = self.g(1e-6) / 1e-6;
        let pass = ar <= 1e-12 && lower <= 1e-12 && odd <= 1e-12 && growth <= 1e-12 && positive && small < 1e-6;
        ArReport {
            ar_defect: ar,
            lower_bound_defect: lower,
            odd_defect: odd,
            growth_defect: growth,
            origin_ratio: small,
            b1,
            b2,
            pass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArReport {
    /// max relative `sG - tg`, must be `≤ 0`
    pub ar_defect: f64,
    /// max excess of `b₁|t|^s - b₂` over `G`
    pub lower_bound_defect: f64,
    pub odd_defect: f64,
    pub growth_defect: f64,
    /// `g(t)/t` at `t = 1e-6`
    pub origin_ratio: f64,
    pub b1: f64,
    pub b2: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Dirichlet,
    Mixed,
    Nonlinear,
}

/// Lifted data entering a reduced functional. Immutable once built.
#[derive(Clone, Debug)]
pub struct FunctionalContext {
    domain: Domain,
    params: PhysicalParams,
    regime: Regime,
    u_lift: ScalarField,
    /// `Φ_D` (Dirichlet, nonlinear) or `Φ_N` (mixed)
    potential: ScalarField,
    kappa: f64,
    model: Option<NonlinearityModel>,
    u_int: Vec<f64>,
    pot_int: Vec<f64>,
}

/// `J(v)` with the strong residual of the matter equation and the potential
/// used to compute them.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    /// `-Δ_h v + m²v - (φ_v+Φ)²(v+U) - g(v)` on interior nodes.
    pub residual: ScalarField,
    pub phi_v: ScalarField,
    pub stats: SolveStats,
}

/// Weighted `ℓ²` residuals of the two discrete equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemResidual {
    pub matter: f64,
    pub potential: f64,
    pub total: f64,
}

impl FunctionalContext {
    /// Linear problem with Dirichlet data for both fields.
    pub fn dirichlet(d: &Domain, params: PhysicalParams, h: &BoundaryData, zeta: &BoundaryData) -> Result<Self> {
        let u_lift = solve_lifting_u(d, &params, h)?;
        let phi_d = solve_phi_d(d, zeta, &params)?;
        Self::from_fields(d, params, Regime::Dirichlet, u_lift, phi_d, 0.0, None)
    }

    /// Linear problem with Dirichlet data for the matter field and flux data
    /// for the potential. Requires `m² - Φ_N² ≥ 0` at every node.
    pub fn mixed(d: &Domain, params: PhysicalParams, h: &BoundaryData, theta: &BoundaryData) -> Result<Self> {
        let u_lift = solve_lifting_u(d, &params, h)?;
        let (phi_n, kappa) = solve_phi_n(d, theta, params.q)?;
        Self::from_fields(d, params, Regime::Mixed, u_lift, phi_n, kappa, None)
    }

    /// Nonlinear problem with zero matter trace, so `U ≡ 0`.
    pub fn nonlinear(d: &Domain, params: PhysicalParams, zeta: &BoundaryData, model: NonlinearityModel) -> Result<Self> {
        let phi_d = solve_phi_d(d, zeta, &params)?;
        Self::from_fields(d, params, Regime::Nonlinear, ScalarField::zeros(d), phi_d, 0.0, Some(model))
    }

    /// Builds a context from already lifted fields.
    pub fn from_fields(
        d: &Domain,
        params: PhysicalParams,
        regime: Regime,
        u_lift: ScalarField,
        potential: ScalarField,
        kappa: f64,
        model: Option<NonlinearityModel>,
    ) -> Result<Self> {
        params.validate()?;
        d.check_same(u_lift.domain(), "U")?;
        d.check_same(potential.domain(), "potential")?;
        if !u_lift.is_finite() || !potential.is_finite() || !kappa.is_finite() {
            return Err(KgmError::Config("lifted fields must be finite".into()));
        }
        match regime {
            Regime::Nonlinear => {
                let m = model.ok_or_else(|| KgmError::Config("nonlinear regime needs a model".into()))?;
                m.validate()?;
                if u_lift.sup_norm() != 0.0 {
                    return Err(KgmError::Config("nonlinear regime requires U = 0 (h = 0)".into()));
                }
            }
            _ if model.is_some() => {
                return Err(KgmError::Config("nonlinearity only supported in the nonlinear regime".into()));
            }
            Regime::Mixed => {
                let margin = params.m * params.m - potential.sup_norm().powi(2);
                if margin < 0.0 {
                    return Err(KgmError::Config(format!(
                        "m^2 - Phi_N^2 must be nonnegative, min is {margin:.6e}; reduce |q| or theta"
                    )));
                }
            }
            Regime::Dirichlet => {}
        }
        let u_int = u_lift.interior_values();
        let pot_int = potential.interior_values();
        Ok(Self {
            domain: d.clone(),
            params,
            regime,
            u_lift,
            potential,
            kappa,
            model,
            u_int,
            pot_int,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn u_lift(&self) -> &ScalarField {
        &self.u_lift
    }

    /// `Φ_D` in the Dirichlet regimes, `Φ_N` in the mixed regime.
    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn model(&self) -> Option<&NonlinearityModel> {
        self.model.as_ref()
    }

    /// `min_i (m² - Φ_i²)` over all nodes.
    pub fn potential_margin(&self) -> f64 {
        self.params.m * self.params.m - self.potential.sup_norm().powi(2)
    }

    pub fn potential_bc(&self) -> BcKind {
        match self.regime {
            Regime::Mixed => BcKind::Neumann,
            _ => BcKind::Dirichlet,
        }
    }

    pub(crate) fn u_interior(&self) -> &[f64] {
        &self.u_int
    }

    pub(crate) fn potential_interior(&self) -> &[f64] {
        &self.pot_int
    }

    pub(crate) fn q_kappa(&self) -> f64 {
        self.params.q * self.kappa
    }

    fn check_v(&self, v: &ScalarField) -> Result<()> {
        self.domain.check_same(v.domain(), "v")?;
        if v.boundary_sup_norm() != 0.0 {
            return Err(KgmError::Config("v must have zero trace".into()));
        }
        Ok(())
    }

    /// `φ_v` as interior values.
    pub(crate) fn phi_interior(&self, v: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let d = &self.domain;
        let w: Vec<f64> = v.iter().zip(&self.u_int).map(|(a, b)| (a + b).powi(2)).collect();
        match self.regime {
            Regime::Mixed => phi_v_neumann_interior(d, &w, &self.potential, self.q_kappa(), tol),
            _ => phi_v_dirichlet_interior(d, &w, &self.potential, tol),
        }
    }

    fn phi_field(&self, x: &[f64]) -> ScalarField {
        match self.regime {
            Regime::Mixed => neumann_field(&self.domain, x),
            _ => ScalarField::from_interior(&self.domain, x),
        }
    }

    /// Reduction map for this context.
    pub fn reduce(&self, v: &ScalarField) -> Result<ReducedState> {
        self.check_v(v)?;
        let (x, stats) = self.phi_interior(&v.interior_values(), CG_TOL)?;
        Ok(ReducedState {
            v: v.clone(),
            phi_v: self.phi_field(&x),
            regime: self.potential_bc(),
            auxiliary: None,
            stats,
        })
    }

    fn potential_operator(&self) -> EllipticOperator {
        EllipticOperator::laplacian(&self.domain, self.potential_bc())
    }

    /// Saddle value `F(v, φ)` and strong matter residual, interior vectors.
    pub(crate) fn saddle(&self, v: &[f64], phi: &[f64]) -> (f64, Vec<f64>) {
        let d = &self.domain;
        let n = v.len();
        let m2 = self.params.m * self.params.m;
        let lap = EllipticOperator::laplacian(d, BcKind::Dirichlet);
        let mut lv = vec![0.0; n];
        lap.apply_interior(v, &mut lv);
        let mut lphi = vec![0.0; n];
        self.potential_operator().apply_interior(phi, &mut lphi);

        let mut value = 0.0;
        let mut res = vec![0.0; n];
        for i in 0..n {
            let s = phi[i] + self.pot_int[i];
            let u = v[i] + self.u_int[i];
            value += 0.5 * v[i] * lv[i] + 0.5 * m2 * v[i] * v[i] - 0.5 * s * s * u * u - 0.5 * phi[i] * lphi[i];
            res[i] = lv[i] + m2 * v[i] - s * s * u;
            if self.regime == Regime::Mixed {
                value += self.q_kappa() * phi[i];
            }
            if let Some(model) = &self.model {
                value -= model.big_g(v[i]);
                res[i] -= model.g(v[i]);
            }
        }
        (value * d.cell_volume(), res)
    }

    /// `J(v)` with the strong residual of its Euler-Lagrange equation.
    pub fn evaluate(&self, v: &ScalarField) -> Result<Evaluation> {
        self.check_v(v)?;
        let x = v.interior_values();
        let (phi, stats) = self.phi_interior(&x, CG_TOL)?;
        let (value, res) = self.saddle(&x, &phi);
        Ok(Evaluation {
            value,
            residual: ScalarField::from_interior(&self.domain, &res),
            phi_v: self.phi_field(&phi),
            stats,
        })
    }

    pub fn eval_j(&self, v: &ScalarField) -> Result<f64> {
        Ok(self.evaluate(v)?.value)
    }

    /// Raw gradient: partial derivatives of the discrete `J` with respect to
    /// the interior values, so `dJ(v)[w] = Σ_i r_i w_i`.
    pub fn grad_j(&self, v: &ScalarField) -> Result<ScalarField> {
        Ok(self.evaluate(v)?.residual.scaled(self.domain.cell_volume()))
    }

    /// Sobolev gradient: `(-Δ_h + m²)⁻¹` applied to a strong residual.
    pub fn sobolev_gradient(&self, residual: &ScalarField) -> Result<ScalarField> {
        let op = EllipticOperator::laplacian(&self.domain, BcKind::Dirichlet).with_shift(self.params.m.powi(2));
        let (x, _) = solve_interior(&op, &residual.interior_values(), CG_TOL, CG_MAX_ITER)?;
        Ok(ScalarField::from_interior(&self.domain, &x))
    }

    /// Residuals of both discrete equations at `(v, φ)` without re-solving
    /// for `φ`.
    pub fn system_residual(&self, v: &ScalarField, phi: &ScalarField) -> Result<SystemResidual> {
        self.check_v(v)?;
        let x = v.interior_values();
        let p = phi.interior_values();
        let (_, r1) = self.saddle(&x, &p);
        let r2 = self.potential_equation(&x, &p);
        Ok(self.weigh(&r1, &r2))
    }

    pub(crate) fn weigh(&self, r1: &[f64], r2: &[f64]) -> SystemResidual {
        let w = self.domain.cell_volume();
        let matter = (r1.iter().map(|r| r * r).sum::<f64>() * w).sqrt();
        let potential = (r2.iter().map(|r| r * r).sum::<f64>() * w).sqrt();
        SystemResidual { matter, potential, total: matter.hypot(potential) }
    }

    /// `(-Δ_h + u²)φ + Φu² - qκ` on interior nodes.
    pub(crate) fn potential_equation(&self, v: &[f64], phi: &[f64]) -> Vec<f64> {
        let mut lphi = vec![0.0; v.len()];
        self.potential_operator().apply_interior(phi, &mut lphi);
        let qk = if self.regime == Regime::Mixed { self.q_kappa() } else { 0.0 };
        (0..v.len())
            .map(|i| {
                let u2 = (v[i] + self.u_int[i]).powi(2);
                lphi[i] + (phi[i] + self.pot_int[i]) * u2 - qk
            })
            .collect()
    }
}

fn require(ctx: &FunctionalContext, regime: Regime) -> Result<()> {
    if ctx.regime() != regime {
        return Err(KgmError::Config(format!("expected {regime:?} context, got {:?}", ctx.regime())));
    }
    Ok(())
}

pub fn eval_j_dirichlet(ctx: &FunctionalContext, v: &ScalarField) -> Result<f64> {
    require(ctx, Regime::Dirichlet)?;
    ctx.eval_j(v)
}

pub fn grad_j_dirichlet(ctx: &FunctionalContext, v: &ScalarField) -> Result<ScalarField> {
    require(ctx, Regime::Dirichlet)?;
    ctx.grad_j(v)
}

pub fn eval_j_mixed(ctx: &FunctionalContext, v: &ScalarField) -> Result<f64> {
    require(ctx, Regime::Mixed)?;
    ctx.eval_j(v)
}

pub fn grad_j_mixed(ctx: &FunctionalContext, v: &ScalarField) -> Result<ScalarField> {
    require(ctx, Regime::Mixed)?;
    ctx.grad_j(v)
}

pub fn eval_j_nonlinear(ctx: &FunctionalContext, v: &ScalarField) -> Result<f64> {
    require(ctx, Regime::Nonlinear)?;
    ctx.eval_j(v)
}

pub fn grad_j_nonlinear(ctx: &FunctionalContext, v: &ScalarField) -> Result<ScalarField> {
    require(ctx, Regime::Nonlinear)?;
    ctx.grad_j(v)
}

/// Both sides of the coercivity chain at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityWitness {
    pub j: f64,
    pub lower_bound: f64,
    pub grad_norm: f64,
    /// the constant `‖Φ_D‖∞² ‖U‖₂ / √λ₁` multiplying `‖∇v‖₂`
    pub c: f64,
}

/// `J(v) ≥ (λ₁ - max{0, ‖Φ_D‖∞² - m²})/(2λ₁) ‖∇v‖² - ‖Φ_D‖∞²/2 ‖U‖² - c‖∇v‖`.
pub fn coercivity_witness(ctx: &FunctionalContext, v: &ScalarField, lambda1: f64) -> Result<CoercivityWitness> {
    require(ctx, Regime::Dirichlet)?;
    let j = ctx.eval_j(v)?;
    let pd2 = ctx.potential().sup_norm().powi(2);
    let m2 = ctx.params().m.powi(2);
    let u2 = l2_norm(ctx.u_lift());
    let c = pd2 * u2 / lambda1.sqrt();
    let g = h1_seminorm(v);
    let lower = (lambda1 - (pd2 - m2).max(0.0)) / (2.0 * lambda1) * g * g - 0.5 * pd2 * u2 * u2 - c * g;
    Ok(CoercivityWitness { j, lower_bound: lower, grad_norm: g, c })
}

/// Projects out `basis` (each of unit weighted `L²` norm) from `v`.
pub fn project_out(v: &ScalarField, basis: &[ScalarField]) -> ScalarField {
    let mut out = v.clone();
    for b in basis {
        let c = crate::grid::inner(&out, b);
        out = out.axpy(-c, b);
    }
    out
}

/// Outcome of the search for a sphere `‖∇v‖₂ = ρ` on which `J > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereWitness {
    pub rho: f64,
    /// `min J` over the sampled directions on the sphere of radius `rho`
    pub min_j: f64,
    /// largest radius found with positive minimum
    pub radius_limit: f64,
    pub directions: usize,
}

fn sphere_min(ctx: &FunctionalContext, dirs: &[ScalarField], rho: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for d in dirs {
        best = best.min(ctx.eval_j(&d.scaled(rho))?);
    }
    Ok(best)
}

/// Searches a radius `ρ` with `J > 0` on the sampled sphere `‖∇v‖₂ = ρ`
/// inside the complement of `exclude`. Directions are random interior
/// fields plus the lowest eigenfields passed in `extra`, normalized in the
/// `H¹₀` seminorm. The witness radius is a quarter of the largest positive
/// radius found by doubling and bisection.
pub fn sphere_positivity(
    ctx: &FunctionalContext,
    extra: &[ScalarField],
    exclude: &[ScalarField],
    random_dirs: usize,
    seed: u64,
) -> Result<SphereWitness> {
    let d = ctx.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::new();
    for e in extra {
        dirs.push(project_out(e, exclude));
    }
    for _ in 0..random_dirs {
        let vals: Vec<f64> = (0..d.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        dirs.push(project_out(&ScalarField::from_interior(d, &vals), exclude));
    }
    let dirs: Vec<ScalarField> = dirs
        .into_iter()
        .filter_map(|f| {
            let n = h1_seminorm(&f);
            (n > 1e-12).then(|| f.scaled(1.0 / n))
        })
        .collect();
    if dirs.is_empty() {
        return Err(KgmError::Config("no admissible directions for the sphere test".into()));
    }
    let mut r = 1.0;
    let mut tries = 0;
    // bracket the first radius where the minimum turns nonpositive
    if sphere_min(ctx, &dirs, r)? > 0.0 {
        while tries < 40 && sphere_min(ctx, &dirs, 2.0 * r)? > 0.0 {
            r *= 2.0;
            tries += 1;
        }
    } else {
        while sphere_min(ctx, &dirs, r)? <= 0.0 {
            r *= 0.5;
            tries += 1;
            if tries > 60 {
                return Err(KgmError::Config("J is not positive near the origin".into()));
            }
        }
    }
    let (mut lo, mut hi) = (r, 2.0 * r);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if sphere_min(ctx, &dirs, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.25 * lo;
    Ok(SphereWitness { rho, min_j: sphere_min(ctx, &dirs, rho)?, radius_limit: lo, directions: dirs.len() })
}

/// Admissible constants in `J(v) ≤ c₁‖∇v‖² + c₃‖∇v‖^p` for the sampled
/// fields: `c₁ = ½ + (m² + ‖Φ_D‖∞²)/(2λ₁)` and `c₃` the largest observed
/// `(μ/p)‖v‖_p^p / ‖∇v‖^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub c1: f64,
    pub c3: f64,
    /// max over samples of `J(v) - c₁‖∇v‖² - c₃‖∇v‖^p`
    pub worst_excess: f64,
    pub holds: bool,
}

pub fn upper_bound_constants(ctx: &FunctionalContext, fields: &[ScalarField], lambda1: f64) -> Result<UpperBound> {
    require(ctx, Regime::Nonlinear)?;
    let model = *ctx.model().expect("nonlinear context has a model");
    let m2 = ctx.params().m.powi(2);
    let pd2 = ctx.potential().sup_norm().powi(2);
    let c1 = 0.5 + (m2 + pd2) / (2.0 * lambda1);
    let mut c3: f64 = 0.0;
    for f in fields {
        let g = h1_seminorm(f);
        if g > 0.0 {
            c3 = c3.max(model.mu / model.p * lp_norm(f, model.p).powf(model.p) / g.powf(model.p));
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for f in fields {
        let g = h1_seminorm(f);
        let j = ctx.eval_j(f)?;
        worst = worst.max(j - c1 * g * g - c3 * g.powf(model.p));
    }
    Ok(UpperBound { c1, c3, worst_excess: worst, holds: worst <= 1e-10 })
}
