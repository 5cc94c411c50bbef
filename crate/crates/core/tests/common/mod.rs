//! Shared test oracles: dense assembly of the discrete operators straight
//! from the stencil definitions, solved by LU elimination.

#![allow(dead_code)]

use std::f64::consts::PI;

use kgmvar::grid::{BoundaryData, BoundaryKind, Domain, ScalarField};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Interior unknowns in full-index order, found from the multi-indices.
pub struct Lattice {
    pub d: Domain,
    pub nodes: Vec<usize>,
    slot: Vec<Option<usize>>,
}

/// One stencil neighbor of an unknown: `Ok(k)` for an unknown, `Err(b)` for
/// boundary node `b` (boundary order). `axis` selects the spacing.
pub struct Neighbor {
    pub target: Result<usize, usize>,
    pub axis: usize,
}

impl Lattice {
    pub fn new(d: &Domain) -> Self {
        let mut nodes = Vec::new();
        let mut slot = vec![None; d.num_nodes()];
        for full in 0..d.num_nodes() {
            let m = d.multi_index(full);
            if (0..d.dim()).all(|a| m[a] >= 1 && m[a] <= d.counts()[a]) {
                slot[full] = Some(nodes.len());
                nodes.push(full);
            }
        }
        Self { d: d.clone(), nodes, slot }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, k: usize) -> Vec<Neighbor> {
        let d = &self.d;
        let m = d.multi_index(self.nodes[k]);
        let mut out = Vec::new();
        for a in 0..d.dim() {
            for step in [-1i64, 1] {
                let mut n = m;
                n[a] = (n[a] as i64 + step) as usize;
                let full = d.full_index(&n[..d.dim()]);
                let target = match self.slot[full] {
                    Some(j) => Ok(j),
                    None => Err(d.boundary_index(full).expect("boundary neighbor")),
                };
                out.push(Neighbor { target, axis: a });
            }
        }
        out
    }

    /// `-Δ_h + diag(w) + shift` on the unknowns. Dirichlet keeps the full
    /// diagonal; Neumann drops every edge to a boundary node.
    pub fn matrix(&self, neumann: bool, shift: f64, w: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        let h = self.d.spacing();
        let mut a = DMatrix::zeros(n, n);
        for k in 0..n {
            a[(k, k)] += shift + w[k];
            for nb in self.neighbors(k) {
                let c = 1.0 / (h[nb.axis] * h[nb.axis]);
                match nb.target {
                    Ok(j) => {
                        a[(k, k)] += c;
                        a[(k, j)] -= c;
                    }
                    Err(_) if !neumann => a[(k, k)] += c,
                    Err(_) => {}
                }
            }
        }
        a
    }

    /// Right-hand side carried by a Dirichlet trace.
    pub fn trace_rhs(&self, trace: &[f64]) -> Vec<f64> {
        let h = self.d.spacing();
        (0..self.len())
            .map(|k| {
                self.neighbors(k)
                    .iter()
                    .filter_map(|nb| nb.target.err().map(|b| trace[b] / (h[nb.axis] * h[nb.axis])))
                    .sum()
            })
            .collect()
    }

    /// Right-hand side carried by an outward flux `theta`.
    pub fn flux_rhs(&self, theta: &[f64]) -> Vec<f64> {
        let h = self.d.spacing();
        (0..self.len())
            .map(|k| self.neighbors(k).iter().filter_map(|nb| nb.target.err().map(|b| theta[b] / h[nb.axis])).sum())
            .collect()
    }

    pub fn interior_of(&self, f: &ScalarField) -> Vec<f64> {
        self.nodes.iter().map(|&i| f.get(i)).collect()
    }

    /// Full field with `x` on the unknowns and `trace` on the boundary.
    pub fn field(&self, x: &[f64], trace: Option<&[f64]>) -> ScalarField {
        let mut vals = vec![0.0; self.d.num_nodes()];
        for (k, &full) in self.nodes.iter().enumerate() {
            vals[full] = x[k];
        }
        if let Some(t) = trace {
            for (b, &full) in self.d.boundary_nodes().iter().enumerate() {
                vals[full] = t[b];
            }
        }
        ScalarField::from_values(&self.d, vals).unwrap()
    }
}

pub fn lu_solve(a: DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    a.lu().solve(&DVector::from_column_slice(b)).expect("nonsingular oracle system").as_slice().to_vec()
}

/// Solves the singular Neumann Laplacian in the zero-mean subspace through
/// the bordered system `[A 1; 1ᵀ 0]`.
pub fn lu_solve_zero_mean(a: DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut big = DMatrix::zeros(n + 1, n + 1);
    big.view_mut((0, 0), (n, n)).copy_from(&a);
    for k in 0..n {
        big[(k, n)] = 1.0;
        big[(n, k)] = 1.0;
    }
    let mut rhs = b.to_vec();
    rhs.push(0.0);
    let mut x = lu_solve(big, &rhs);
    x.pop();
    x
}

/// Matter lift: `(-Δ + m²)U = 0`, `U = √(4π) q h`.
pub fn oracle_lift_u(l: &Lattice, m: f64, q: f64, h: &BoundaryData) -> ScalarField {
    let trace: Vec<f64> = h.values().iter().map(|v| (4.0 * PI).sqrt() * q * v).collect();
    let x = lu_solve(l.matrix(false, m * m, &vec![0.0; l.len()]), &l.trace_rhs(&trace));
    l.field(&x, Some(&trace))
}

/// Harmonic potential with trace `qζ - ω`.
pub fn oracle_phi_d(l: &Lattice, q: f64, omega: f64, zeta: &BoundaryData) -> ScalarField {
    let trace: Vec<f64> = zeta.values().iter().map(|z| q * z - omega).collect();
    let x = lu_solve(l.matrix(false, 0.0, &vec![0.0; l.len()]), &l.trace_rhs(&trace));
    l.field(&x, Some(&trace))
}

/// Zero-mean Neumann potential with flux `qθ`; returns the interior values
/// and `κ` (total discrete flux over the discrete volume).
pub fn oracle_phi_n(l: &Lattice, q: f64, theta: &BoundaryData) -> (Vec<f64>, f64) {
    let flux = l.flux_rhs(theta.values());
    let kappa = flux.iter().sum::<f64>() / l.len() as f64;
    let rhs: Vec<f64> = flux.iter().map(|f| q * f - q * kappa).collect();
    (lu_solve_zero_mean(l.matrix(true, 0.0, &vec![0.0; l.len()]), &rhs), kappa)
}

/// `(-Δ + w)φ = -Φ w` with zero trace.
pub fn oracle_phi_v_dirichlet(l: &Lattice, w: &[f64], phi_d: &[f64]) -> Vec<f64> {
    let rhs: Vec<f64> = w.iter().zip(phi_d).map(|(wi, p)| -p * wi).collect();
    lu_solve(l.matrix(false, 0.0, w), &rhs)
}

/// `(-Δ + w)φ = -Φ_N w + qκ` with zero flux.
pub fn oracle_phi_v_neumann(l: &Lattice, w: &[f64], phi_n: &[f64], q_kappa: f64) -> Vec<f64> {
    let rhs: Vec<f64> = w.iter().zip(phi_n).map(|(wi, p)| -p * wi + q_kappa).collect();
    lu_solve(l.matrix(true, 0.0, w), &rhs)
}

/// `max |a - b| / max |b|`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn random_interior(d: &Domain, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    let vals: Vec<f64> = (0..d.num_interior()).map(|_| rng.gen_range(-amp..amp)).collect();
    ScalarField::from_interior(d, &vals)
}

pub fn random_boundary(d: &Domain, kind: BoundaryKind, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> BoundaryData {
    let vals = (0..d.num_boundary()).map(|_| rng.gen_range(lo..hi)).collect();
    BoundaryData::new(d, kind, vals).unwrap()
}

/// Random box with at most `max_nodes` nodes including the boundary layer.
pub fn random_domain(rng: &mut ChaCha8Rng, max_nodes: usize) -> Domain {
    loop {
        let dim = rng.gen_range(2..=3);
        let lengths: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect();
        let counts: Vec<usize> = (0..dim).map(|_| rng.gen_range(2..=if dim == 2 { 20 } else { 6 })).collect();
        let total: usize = counts.iter().map(|n| n + 2).product();
        if total <= max_nodes {
            return Domain::new(dim, &lengths, &counts).unwrap();
        }
    }
}
