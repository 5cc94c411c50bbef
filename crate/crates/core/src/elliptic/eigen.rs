//! Dirichlet eigenpairs of the discrete Laplacian by (deflated) inverse
//! iteration, box closed forms, and the spectral condition on the data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{solve_interior, BcKind, EllipticOperator, CG_MAX_ITER};
use crate::error::{KgmError, Result};
use crate::functional::PhysicalParams;
use crate::grid::{BoundaryData, Domain, ScalarField};

/// Default tolerance on the relative Rayleigh-quotient increment.
pub const EIG_TOL: f64 = 1e-8;
const EIG_MAX_ITER: usize = 5000;
const INNER_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    // twice is enough
    for _ in 0..2 {
        for b in basis {
            let c = dot(x, b);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
        }
    }
}

fn rayleigh(op: &EllipticOperator, x: &[f64], scratch: &mut [f64]) -> f64 {
    op.apply_interior(x, scratch);
    dot(scratch, x) / dot(x, x)
}

fn inverse_iteration(
    op: &EllipticOperator,
    mut x: Vec<f64>,
    locked: &[Vec<f64>],
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut scratch = vec![0.0; x.len()];
    orthogonalize(&mut x, locked);
    normalize(&mut x);
    let mut lambda = rayleigh(op, &x, &mut scratch);
    for _ in 0..EIG_MAX_ITER {
        let (mut y, _) = solve_interior(op, &x, INNER_TOL, CG_MAX_ITER)?;
        orthogonalize(&mut y, locked);
        normalize(&mut y);
        x = y;
        let next = rayleigh(op, &x, &mut scratch);
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            return Ok((lambda, x));
        }
    }
    Err(KgmError::EigenNotConverged(EIG_MAX_ITER))
}

fn to_field(d: &Domain, x: &[f64]) -> ScalarField {
    // unit weighted l2 norm
    let scale = 1.0 / (dot(x, x) * d.cell_volume()).sqrt();
    let vals: Vec<f64> = x.iter().map(|v| v * scale).collect();
    ScalarField::from_interior(d, &vals)
}

/// Principal Dirichlet eigenpair of `-Δ_h`. The eigenfield has unit `L²`
/// norm and nonnegative sign.
pub fn smallest_eigenvalue(d: &Domain, tol: f64) -> Result<(f64, ScalarField)> {
    let op = EllipticOperator::laplacian(d, BcKind::Dirichlet);
    let start = vec![1.0; d.num_interior()];
    let (lambda, mut x) = inverse_iteration(&op, start, &[], tol)?;
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((lambda, to_field(d, &x)))
}

/// First `k` Dirichlet eigenpairs by deflated inverse iteration, ascending.
/// Random starts are drawn from `seed` so degenerate eigenspaces resolve
/// deterministically.
pub fn dirichlet_eigenpairs(d: &Domain, k: usize, tol: f64, seed: u64) -> Result<Vec<(f64, ScalarField)>> {
    if k == 0 || k > d.num_interior() {
        return Err(KgmError::Config(format!("cannot compute {k} eigenpairs")));
    }
    let op = EllipticOperator::laplacian(d, BcKind::Dirichlet);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for j in 0..k {
        let start: Vec<f64> = if j == 0 {
            vec![1.0; d.num_interior()]
        } else {
            (0..d.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let (lambda, x) = inverse_iteration(&op, start, &locked, tol)?;
        values.push(lambda);
        locked.push(x);
    }
    let mut pairs: Vec<(f64, ScalarField)> = values
        .into_iter()
        .zip(locked)
        .map(|(l, mut x)| {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            (l, to_field(d, &x))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

fn box_modes(d: &Domain, k: usize) -> Vec<Vec<usize>> {
    // enough modes per axis to contain the k lowest
    let per_axis: Vec<usize> = d.counts().iter().map(|&n| n.min(k + 1)).collect();
    let mut modes = vec![vec![]];
    for &m in &per_axis {
        let mut next = Vec::new();
        for prefix in &modes {
            for j in 1..=m {
                let mut p = prefix.clone();
                p.push(j);
                next.push(p);
            }
        }
        modes = next;
    }
    modes
}

/// Lowest `k` continuum Dirichlet eigenvalues of the box, `π² Σ (j_a/L_a)²`.
pub fn analytic_box_eigenvalues(d: &Domain, k: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = box_modes(d, k)
        .iter()
        .map(|m| m.iter().zip(d.lengths()).map(|(&j, l)| (PI * j as f64 / l).powi(2)).sum())
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    vals
}

/// Lowest `k` eigenvalues of the discrete Laplacian on the box in closed
/// form, `Σ_a (4/h_a²) sin²(j_a π h_a / (2 L_a))`.
pub fn discrete_box_eigenvalues(d: &Domain, k: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = box_modes(d, k)
        .iter()
        .map(|m| {
            m.iter()
                .enumerate()
                .map(|(a, &j)| {
                    let h = d.spacing()[a];
                    let l = d.lengths()[a];
                    4.0 / (h * h) * (j as f64 * PI * h / (2.0 * l)).sin().powi(2)
                })
                .sum()
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    vals
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCheck {
    pub holds: bool,
    /// `m² + λ₁ - max_b (qζ_b - ω)²`
    pub margin: f64,
}

/// Spectral smallness condition `‖qζ - ω‖∞² < m² + λ₁`.
pub fn check_spectral_condition(params: &PhysicalParams, zeta: &BoundaryData, lambda1: f64) -> SpectralCheck {
    let sup = zeta
        .values()
        .iter()
        .map(|z| (params.q * z - params.omega).powi(2))
        .fold(0.0, f64::max);
    let margin = params.m * params.m + lambda1 - sup;
    SpectralCheck { holds: margin > 0.0, margin }
}
