//! Discrete `-Δ_h + (w + σ)` operators and the conjugate-gradient solver.
//!
//! Dirichlet operators act on zero-trace interior vectors; nonzero traces are
//! moved to the right-hand side by the caller (see [`lifting`]). Neumann
//! operators drop the stencil edge to a boundary node, which is the
//! zero-flux closure on the interior lattice; prescribed fluxes enter the
//! right-hand side as `θ / h_a` on the adjacent interior row.

pub mod eigen;
pub mod lifting;

use serde::{Deserialize, Serialize};

use crate::error::{KgmError, Result};
use crate::grid::{Domain, ScalarField};

pub use eigen::{
    analytic_box_eigenvalues, check_spectral_condition, dirichlet_eigenpairs, discrete_box_eigenvalues,
    smallest_eigenvalue, SpectralCheck, EIG_TOL,
};
pub use lifting::{
    neumann_incompatibility, solve_lifting_u, solve_phi_d, solve_phi_n, solve_split_phi, solve_split_u,
};

/// Default relative tolerance for every CG solve.
pub const CG_TOL: f64 = 1e-10;
/// Default iteration cap for CG.
pub const CG_MAX_ITER: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// `v ↦ -Δ_h v + (w + σ) v` with Dirichlet or zero-flux Neumann closure.
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    domain: Domain,
    bc: BcKind,
    // interior values of w
    potential: Vec<f64>,
    shift: f64,
}

impl EllipticOperator {
    pub fn laplacian(domain: &Domain, bc: BcKind) -> Self {
        EllipticOperator {
            domain: domain.clone(),
            bc,
            potential: vec![0.0; domain.num_interior()],
            shift: 0.0,
        }
    }

    /// Sets `w` from the interior values of `w`. Negative values are rejected.
    pub fn with_potential(mut self, w: &ScalarField) -> Result<Self> {
        self.domain.check_same(w.domain(), "potential field")?;
        let vals = w.interior_values();
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(KgmError::Config("potential must be finite and nonnegative".into()));
        }
        self.potential = vals;
        Ok(self)
    }

    pub(crate) fn with_potential_values(mut self, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), self.domain.num_interior());
        self.potential = w;
        self
    }

    /// Constant zeroth-order term. Negative shifts are allowed as long as the
    /// operator stays positive definite; CG reports indefiniteness.
    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bc(&self) -> BcKind {
        self.bc
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Applies the operator to a full field. Dirichlet reads the boundary
    /// values of `f`; Neumann ignores them (zero flux). The result has a zero
    /// boundary layer.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.domain.check_same(f.domain(), "apply")?;
        let d = &self.domain;
        let fv = f.values();
        let mut out = ScalarField::zeros(d);
        let ov = out.values_mut();
        for (i, &full) in d.interior_nodes().iter().enumerate() {
            let nf = d.neighbors_full(i);
            let ni = d.neighbors_interior(i);
            let mut acc = (self.potential[i] + self.shift) * fv[full];
            for slot in 0..nf.len() {
                if self.bc == BcKind::Neumann && ni[slot] == Domain::NO_NODE {
                    continue;
                }
                acc += (fv[full] - fv[nf[slot]]) * d.inv_h2(slot);
            }
            ov[full] = acc;
        }
        Ok(out)
    }

    /// Homogeneous apply on interior vectors.
    pub(crate) fn apply_interior(&self, x: &[f64], y: &mut [f64]) {
        let d = &self.domain;
        let dirichlet = self.bc == BcKind::Dirichlet;
        for i in 0..x.len() {
            let ni = d.neighbors_interior(i);
            let xi = x[i];
            let mut acc = (self.potential[i] + self.shift) * xi;
            for (slot, &j) in ni.iter().enumerate() {
                if j == Domain::NO_NODE {
                    if dirichlet {
                        acc += xi * d.inv_h2(slot);
                    }
                } else {
                    acc += (xi - x[j]) * d.inv_h2(slot);
                }
            }
            y[i] = acc;
        }
    }

    fn is_singular_neumann(&self) -> bool {
        self.bc == BcKind::Neumann
            && self.shift == 0.0
            && self.potential.iter().all(|w| *w == 0.0)
    }
}

/// Solves `op x = rhs` on the interior. The returned field has a zero
/// boundary layer. For the pure Neumann Laplacian the solution is taken in
/// the zero-mean subspace and `rhs` must be compatible.
pub fn cg_solve(
    op: &EllipticOperator,
    rhs: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveStats)> {
    op.domain.check_same(rhs.domain(), "cg rhs")?;
    let b = rhs.interior_values();
    let (x, stats) = solve_interior(op, &b, tol, max_iter)?;
    Ok((ScalarField::from_interior(&op.domain, &x), stats))
}

pub(crate) fn solve_interior(
    op: &EllipticOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    if !(tol > 0.0) {
        return Err(KgmError::Config(format!("CG tolerance must be positive, got {tol}")));
    }
    if op.is_singular_neumann() {
        projected_cg(op, b, tol, max_iter)
    } else if op.bc == BcKind::Neumann {
        deflated_cg(op, b, tol, max_iter)
    } else {
        plain_cg(op, b, tol, max_iter)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn plain_cg(
    op: &EllipticOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        op.apply_interior(&p, &mut q);
        let curv = dot(&p, &q);
        if curv <= 0.0 {
            return Err(KgmError::Indefinite(curv / dot(&p, &p)));
        }
        let alpha = rr / curv;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: rel, converged: true }));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(KgmError::NotConverged { iterations: max_iter, relative_residual: rr.sqrt() / bnorm })
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// CG on the mean-free subspace for the singular Neumann Laplacian.
fn projected_cg(
    op: &EllipticOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let sum: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|v| v.abs()).sum();
    if sum.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(KgmError::Incompatible(sum));
    }
    let mut r = b.to_vec();
    remove_mean(&mut r);
    let bnorm = norm(&r);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        op.apply_interior(&p, &mut q);
        let curv = dot(&p, &q);
        if curv <= 0.0 {
            return Err(KgmError::Indefinite(curv / dot(&p, &p)));
        }
        let alpha = rr / curv;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        remove_mean(&mut r);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            remove_mean(&mut x);
            return Ok((x, SolveStats { iterations: it, relative_residual: rel, converged: true }));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(KgmError::NotConverged { iterations: max_iter, relative_residual: rr.sqrt() / bnorm })
}

/// CG deflated by the constant vector. The Neumann Laplacian annihilates
/// constants, so `A 1 = w + σ` and the coarse solve is a scalar division.
/// Keeps iteration counts bounded when `w` is small.
fn deflated_cg(
    op: &EllipticOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let c: Vec<f64> = op.potential.iter().map(|w| w + op.shift).collect();
    let e: f64 = c.iter().sum();
    if !(e > 0.0) {
        return Err(KgmError::Indefinite(e));
    }
    let x0 = b.iter().sum::<f64>() / e;
    let mut x = vec![x0; n];
    let mut r: Vec<f64> = b.iter().zip(&c).map(|(bi, ci)| bi - x0 * ci).collect();
    let mut rr = dot(&r, &r);
    if rr.sqrt() / bnorm <= tol {
        return Ok((x, SolveStats { iterations: 0, relative_residual: rr.sqrt() / bnorm, converged: true }));
    }
    let mu = dot(&c, &r) / e;
    let mut p: Vec<f64> = r.iter().map(|ri| ri - mu).collect();
    let mut q = vec![0.0; n];
    for it in 1..=max_iter {
        op.apply_interior(&p, &mut q);
        let curv = dot(&p, &q);
        if curv <= 0.0 {
            return Err(KgmError::Indefinite(curv / dot(&p, &p)));
        }
        let alpha = rr / curv;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: rel, converged: true }));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        let mu = dot(&c, &r) / e;
        for k in 0..n {
            p[k] = beta * p[k] + r[k] - mu;
        }
    }
    Err(KgmError::NotConverged { iterations: max_iter, relative_residual: rr.sqrt() / bnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dirichlet_form, dirichlet_form_neumann, inner};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_interior(d: &Domain, rng: &mut ChaCha8Rng) -> ScalarField {
        let vals: Vec<f64> = (0..d.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_interior(d, &vals)
    }

    #[test]
    fn constants_are_neumann_harmonic() {
        let d = Domain::cube(2, 1.0, 9).unwrap();
        let op = EllipticOperator::laplacian(&d, BcKind::Neumann);
        let out = op.apply(&ScalarField::constant(&d, 1.0)).unwrap();
        assert!(out.sup_norm() < 1e-10);
    }

    #[test]
    fn dirichlet_apply_of_constant_with_zero_trace() {
        let d = Domain::cube(2, 1.0, 9).unwrap();
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet);
        let f = ScalarField::constant(&d, 1.0).zero_trace();
        let out = op.apply(&f).unwrap();
        let h2 = d.spacing()[0].powi(2);
        for &full in d.interior_nodes() {
            let m = d.multi_index(full);
            let touching = (0..2).filter(|&a| m[a] == 1 || m[a] == 9).count();
            assert!((out.get(full) - touching as f64 / h2).abs() < 1e-9);
        }
    }

    #[test]
    fn apply_matches_eigenvalue_on_sine_mode() {
        let d = Domain::cube(2, 1.0, 63).unwrap();
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet);
        let f = ScalarField::from_fn(&d, |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let out = op.apply(&f).unwrap();
        for &full in d.interior_nodes() {
            let expect = 2.0 * PI * PI * f.get(full);
            assert!((out.get(full) - expect).abs() <= 0.01 * expect.abs() + 1e-12);
        }
    }

    #[test]
    fn summation_by_parts_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = Domain::new(2, &[1.0, 1.5], &[7, 9]).unwrap();
        let f = random_interior(&d, &mut rng);
        let g = random_interior(&d, &mut rng);
        let lap = EllipticOperator::laplacian(&d, BcKind::Dirichlet);
        let lg = lap.apply(&g).unwrap();
        assert!((inner(&f, &lg) - dirichlet_form(&f, &g)).abs() < 1e-10);

        let lap_n = EllipticOperator::laplacian(&d, BcKind::Neumann);
        let lgn = lap_n.apply(&g).unwrap();
        assert!((inner(&f, &lgn) - dirichlet_form_neumann(&f, &g)).abs() < 1e-10);

        let w = random_interior(&d, &mut rng).map(|x| x * x);
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet)
            .with_potential(&w)
            .unwrap()
            .with_shift(0.3);
        let a = inner(&op.apply(&f).unwrap(), &g);
        let b = inner(&f, &op.apply(&g).unwrap());
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        assert!(inner(&op.apply(&f).unwrap(), &f) > 0.0);
    }

    #[test]
    fn zero_rhs_gives_zero_in_zero_iterations() {
        let d = Domain::cube(2, 1.0, 8).unwrap();
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet);
        let (x, stats) = cg_solve(&op, &ScalarField::zeros(&d), 1e-10, 100).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(stats.converged);
        assert_eq!(x.sup_norm(), 0.0);
    }

    #[test]
    fn recovers_eigenfunction_of_shifted_operator() {
        let d = Domain::cube(2, 1.0, 63).unwrap();
        let m2 = 1.0;
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet).with_shift(m2);
        let e = ScalarField::from_fn(&d, |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let rhs = e.scaled(2.0 * PI * PI + m2);
        let (x, stats) = cg_solve(&op, &rhs, 1e-10, 5000).unwrap();
        assert!(stats.converged && stats.relative_residual <= 1e-10);
        let err = x.sub(&e).interior_sup_norm();
        assert!(err < 1e-3, "err {err}");
    }

    #[test]
    fn reports_non_convergence() {
        let d = Domain::cube(2, 1.0, 15).unwrap();
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet);
        let rhs = ScalarField::constant(&d, 1.0);
        match cg_solve(&op, &rhs, 1e-12, 3) {
            Err(KgmError::NotConverged { iterations, .. }) => assert_eq!(iterations, 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn detects_indefinite_operator() {
        let d = Domain::cube(2, 1.0, 15).unwrap();
        // shift below -λ1 makes the operator indefinite
        let op = EllipticOperator::laplacian(&d, BcKind::Dirichlet).with_shift(-100.0);
        let rhs = ScalarField::constant(&d, 1.0);
        assert!(matches!(cg_solve(&op, &rhs, 1e-10, 1000), Err(KgmError::Indefinite(_))));
    }

    #[test]
    fn neumann_with_tiny_potential_converges_quickly() {
        let d = Domain::cube(2, 1.0, 31).unwrap();
        let w = ScalarField::from_fn(&d, |x| 1e-12 * (PI * x[0]).sin().powi(2));
        let op = EllipticOperator::laplacian(&d, BcKind::Neumann).with_potential(&w).unwrap();
        // mean-free source keeps the solution O(1) despite the tiny potential
        let rhs = ScalarField::from_fn(&d, |x| x[0] - 0.5);
        let (x, stats) = cg_solve(&op, &rhs, 1e-10, 2000).unwrap();
        assert!(stats.iterations < 500, "{stats:?}");
        let r = op.apply(&x).unwrap().sub(&rhs);
        let rel = (inner(&r, &r) / inner(&rhs, &rhs)).sqrt();
        assert!(rel < 1e-8, "rel {rel}");
    }

    #[test]
    fn incompatible_singular_neumann_is_rejected() {
        let d = Domain::cube(2, 1.0, 7).unwrap();
        let op = EllipticOperator::laplacian(&d, BcKind::Neumann);
        let rhs = ScalarField::constant(&d, 1.0);
        assert!(matches!(cg_solve(&op, &rhs, 1e-10, 1000), Err(KgmError::Incompatible(_))));
    }
}
