//! Lifting solves that carry the nonhomogeneous boundary data: the matter
//! lift `U`, the harmonic potential `Φ_D`, and the zero-mean Neumann
//! potential `Φ_N` with its compatibility constant `κ`.

use std::f64::consts::PI;

use super::{solve_interior, BcKind, EllipticOperator, SolveStats, CG_MAX_ITER, CG_TOL};
use crate::error::{KgmError, Result};
use crate::functional::PhysicalParams;
use crate::grid::{integrate_boundary, BoundaryData, BoundaryKind, Domain, ScalarField};

/// Interior vector `sum_b trace_b / h_a^2` over boundary neighbors: the
/// right-hand side contribution of a Dirichlet trace.
pub(crate) fn dirichlet_lift(d: &Domain, trace: &[f64]) -> Vec<f64> {
    let mut rhs = vec![0.0; d.num_interior()];
    for (i, r) in rhs.iter_mut().enumerate() {
        let nf = d.neighbors_full(i);
        let ni = d.neighbors_interior(i);
        for slot in 0..nf.len() {
            if ni[slot] == Domain::NO_NODE {
                let b = d.boundary_index(nf[slot]).expect("boundary neighbor");
                *r += trace[b] * d.inv_h2(slot);
            }
        }
    }
    rhs
}

/// Interior field `sum_b scale * θ_b / h_a` over boundary neighbors: the
/// right-hand side contribution of an outward flux `scale * θ`.
pub fn neumann_flux_rhs(d: &Domain, theta: &BoundaryData, scale: f64) -> ScalarField {
    let mut rhs = vec![0.0; d.num_interior()];
    for (i, r) in rhs.iter_mut().enumerate() {
        let nf = d.neighbors_full(i);
        let ni = d.neighbors_interior(i);
        for slot in 0..nf.len() {
            if ni[slot] == Domain::NO_NODE {
                let b = d.boundary_index(nf[slot]).expect("boundary neighbor");
                *r += scale * theta.values()[b] / d.spacing()[slot / 2];
            }
        }
    }
    ScalarField::from_interior(d, &rhs)
}

/// Solves `op x = source` with Dirichlet trace `trace` (boundary order).
pub(crate) fn solve_with_trace(
    op: &EllipticOperator,
    source: &[f64],
    trace: &[f64],
    tol: f64,
) -> Result<(ScalarField, SolveStats)> {
    let d = op.domain();
    let lift = dirichlet_lift(d, trace);
    let rhs: Vec<f64> = source.iter().zip(&lift).map(|(s, l)| s + l).collect();
    let (x, stats) = solve_interior(op, &rhs, tol, CG_MAX_ITER)?;
    let mut field = ScalarField::from_interior(d, &x);
    field.set_boundary(trace);
    Ok((field, stats))
}

/// Fills the boundary layer of a Neumann field: face nodes get
/// `interior + h_a * scale * θ`, edge/corner nodes copy the nearest interior
/// node.
pub(crate) fn extend_neumann(field: &mut ScalarField, flux: Option<(&BoundaryData, f64)>) {
    let d = field.domain().clone();
    let dims = d.full_dims().to_vec();
    for (b, &full) in d.boundary_nodes().iter().enumerate() {
        let value = match d.boundary_face(b) {
            Some(face) => {
                let s = d.stride(face.axis);
                let inner = if face.high { full - s } else { full + s };
                let add = flux.map_or(0.0, |(t, c)| c * t.values()[b] * d.spacing()[face.axis]);
                field.get(inner) + add
            }
            None => {
                let mut m = d.multi_index(full);
                for a in 0..d.dim() {
                    m[a] = m[a].clamp(1, dims[a] - 2);
                }
                field.get(d.full_index(&m[..d.dim()]))
            }
        };
        field.values_mut()[full] = value;
    }
}

fn require_kind(data: &BoundaryData, kind: BoundaryKind, what: &str) -> Result<()> {
    if data.kind() != kind {
        return Err(KgmError::Config(format!("{what} must be {kind:?}, got {:?}", data.kind())));
    }
    Ok(())
}

/// `-ΔU + m²U = 0` in the box, `U = √(4π) q h` on the boundary.
pub fn solve_lifting_u(d: &Domain, params: &PhysicalParams, h: &BoundaryData) -> Result<ScalarField> {
    params.validate()?;
    require_kind(h, BoundaryKind::DirichletTrace, "h")?;
    if h.len() != d.num_boundary() {
        return Err(KgmError::DomainMismatch("h".into()));
    }
    let scale = (4.0 * PI).sqrt() * params.q;
    let trace: Vec<f64> = h.values().iter().map(|v| scale * v).collect();
    let op = EllipticOperator::laplacian(d, BcKind::Dirichlet).with_shift(params.m * params.m);
    let zero = vec![0.0; d.num_interior()];
    Ok(solve_with_trace(&op, &zero, &trace, CG_TOL)?.0)
}

/// Discrete harmonic `Φ_D` with trace `qζ - ω`.
pub fn solve_phi_d(d: &Domain, zeta: &BoundaryData, params: &PhysicalParams) -> Result<ScalarField> {
    require_kind(zeta, BoundaryKind::DirichletTrace, "zeta")?;
    if zeta.len() != d.num_boundary() {
        return Err(KgmError::DomainMismatch("zeta".into()));
    }
    let trace: Vec<f64> = zeta.values().iter().map(|z| params.q * z - params.omega).collect();
    let op = EllipticOperator::laplacian(d, BcKind::Dirichlet);
    let zero = vec![0.0; d.num_interior()];
    Ok(solve_with_trace(&op, &zero, &trace, CG_TOL)?.0)
}

/// `ΔΦ_N = qκ`, `∂Φ_N/∂n = qθ`, zero mean, with `κ = ∮θ / |Ω|_h`.
///
/// `κ` uses the discrete volume so the compatibility condition holds to
/// round-off for the discrete operator.
pub fn solve_phi_n(d: &Domain, theta: &BoundaryData, q: f64) -> Result<(ScalarField, f64)> {
    require_kind(theta, BoundaryKind::NeumannFlux, "theta")?;
    let flux = integrate_boundary(theta, d)?;
    let kappa = flux / d.discrete_volume();
    let mut rhs = neumann_flux_rhs(d, theta, q).interior_values();
    rhs.iter_mut().for_each(|r| *r -= q * kappa);

    let defect: f64 = rhs.iter().sum();
    let scale: f64 = rhs.iter().map(|r| r.abs()).sum();
    if defect.abs() > 1e-10 * scale.max(1.0) {
        return Err(KgmError::Incompatible(defect * d.cell_volume()));
    }

    let op = EllipticOperator::laplacian(d, BcKind::Neumann);
    let (x, _) = solve_interior(&op, &rhs, CG_TOL, CG_MAX_ITER)?;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if mean.abs() > CG_TOL * x.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
        return Err(KgmError::Incompatible(mean));
    }
    let mut field = ScalarField::from_interior(d, &x);
    extend_neumann(&mut field, Some((theta, q)));
    Ok((field, kappa))
}

/// Uncoupled matter problem `-Δu - (ω² - m²)u = 0`, `u = h`. The shift
/// `m² - ω²` may be negative; the solve fails with
/// [`KgmError::Indefinite`] once it reaches `-λ₁`.
pub fn solve_split_u(d: &Domain, m: f64, omega: f64, h: &BoundaryData) -> Result<ScalarField> {
    require_kind(h, BoundaryKind::DirichletTrace, "h")?;
    if h.len() != d.num_boundary() {
        return Err(KgmError::DomainMismatch("h".into()));
    }
    let op = EllipticOperator::laplacian(d, BcKind::Dirichlet).with_shift(m * m - omega * omega);
    let zero = vec![0.0; d.num_interior()];
    Ok(solve_with_trace(&op, &zero, h.values(), CG_TOL)?.0)
}

/// Uncoupled potential problem `Δφ = 0`, `φ = ζ`.
pub fn solve_split_phi(d: &Domain, zeta: &BoundaryData) -> Result<ScalarField> {
    require_kind(zeta, BoundaryKind::DirichletTrace, "zeta")?;
    if zeta.len() != d.num_boundary() {
        return Err(KgmError::DomainMismatch("zeta".into()));
    }
    let op = EllipticOperator::laplacian(d, BcKind::Dirichlet);
    let zero = vec![0.0; d.num_interior()];
    Ok(solve_with_trace(&op, &zero, zeta.values(), CG_TOL)?.0)
}

/// Solvability defect of `Δφ = 0`, `∂φ/∂n = θ`: the weighted sum of the
/// flux right-hand side, which the discrete Neumann Laplacian annihilates
/// against constants.
pub fn neumann_incompatibility(d: &Domain, theta: &BoundaryData) -> Result<f64> {
    require_kind(theta, BoundaryKind::NeumannFlux, "theta")?;
    if theta.len() != d.num_boundary() {
        return Err(KgmError::DomainMismatch("theta".into()));
    }
    Ok(neumann_flux_rhs(d, theta, 1.0).interior_values().iter().sum::<f64>() * d.cell_volume())
}
