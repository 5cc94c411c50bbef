//! Rectangular-box lattices, nodal fields and midpoint quadrature.
//!
//! A [`Domain`] is the box `[0, L_1] x ... x [0, L_d]` sampled at
//! `n_a + 2` nodes per axis, with spacing `h_a = L_a / (n_a + 1)`. The
//! outermost layer of nodes is the boundary; everything else is interior.
//! Unknowns of every solve live on interior nodes, boundary nodes carry
//! traces (Dirichlet) or extrapolated values (Neumann).

use std::fmt;
use std::sync::Arc;

use crate::error::{KgmError, Result};

const NONE: usize = usize::MAX;

/// One face of the box: `axis` and whether it is the `x_a = L_a` side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub high: bool,
}

impl Face {
    /// Outward unit normal component along `axis` (+1 or -1).
    pub fn normal_sign(&self) -> f64 {
        if self.high {
            1.0
        } else {
            -1.0
        }
    }
}

struct DomainInner {
    dim: usize,
    lengths: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    full_dims: Vec<usize>,
    strides: Vec<usize>,
    interior_full: Vec<usize>,
    full_interior: Vec<usize>,
    boundary_full: Vec<usize>,
    full_boundary: Vec<usize>,
    boundary_face: Vec<Option<Face>>,
    // 2*dim entries per interior node, ordered (axis 0 -, axis 0 +, axis 1 -, ...)
    nbr_full: Vec<usize>,
    nbr_int: Vec<usize>,
}

/// Axis-aligned box lattice. Cheap to clone; all clones share storage.
#[derive(Clone)]
pub struct Domain(Arc<DomainInner>);

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("dim", &self.0.dim)
            .field("lengths", &self.0.lengths)
            .field("counts", &self.0.counts)
            .finish()
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dim == other.0.dim
                && self.0.counts == other.0.counts
                && self.0.lengths == other.0.lengths)
    }
}

impl Domain {
    /// Builds the lattice. `counts` are interior node counts per axis.
    pub fn new(dim: usize, lengths: &[f64], counts: &[usize]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(KgmError::InvalidDomain(format!("dim must be 2 or 3, got {dim}")));
        }
        if lengths.len() != dim || counts.len() != dim {
            return Err(KgmError::InvalidDomain(format!(
                "expected {dim} lengths and counts, got {} and {}",
                lengths.len(),
                counts.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(KgmError::InvalidDomain(format!("lengths must be positive, got {l}")));
        }
        if let Some(n) = counts.iter().find(|n| **n < 2) {
            return Err(KgmError::InvalidDomain(format!("counts must be >= 2, got {n}")));
        }

        let spacing: Vec<f64> = lengths
            .iter()
            .zip(counts)
            .map(|(l, n)| l / (*n as f64 + 1.0))
            .collect();
        let full_dims: Vec<usize> = counts.iter().map(|n| n + 2).collect();
        let mut strides = vec![1usize; dim];
        for a in 1..dim {
            strides[a] = strides[a - 1] * full_dims[a - 1];
        }
        let total: usize = full_dims.iter().product();

        let mut interior_full = Vec::new();
        let mut boundary_full = Vec::new();
        let mut full_interior = vec![NONE; total];
        let mut full_boundary = vec![NONE; total];
        let mut boundary_face = Vec::new();
        for full in 0..total {
            let mut faces = Vec::new();
            let mut rem = full;
            for a in 0..dim {
                let idx = rem % full_dims[a];
                rem /= full_dims[a];
                if idx == 0 {
                    faces.push(Face { axis: a, high: false });
                } else if idx == full_dims[a] - 1 {
                    faces.push(Face { axis: a, high: true });
                }
            }
            if faces.is_empty() {
                full_interior[full] = interior_full.len();
                interior_full.push(full);
            } else {
                full_boundary[full] = boundary_full.len();
                boundary_full.push(full);
                boundary_face.push(if faces.len() == 1 { Some(faces[0]) } else { None });
            }
        }

        let mut nbr_full = Vec::with_capacity(interior_full.len() * 2 * dim);
        let mut nbr_int = Vec::with_capacity(interior_full.len() * 2 * dim);
        for &full in &interior_full {
            for &s in &strides {
                for nf in [full - s, full + s] {
                    nbr_full.push(nf);
                    nbr_int.push(full_interior[nf]);
                }
            }
        }

        Ok(Domain(Arc::new(DomainInner {
            dim,
            lengths: lengths.to_vec(),
            counts: counts.to_vec(),
            spacing,
            full_dims,
            strides,
            interior_full,
            full_interior,
            boundary_full,
            full_boundary,
            boundary_face,
            nbr_full,
            nbr_int,
        })))
    }

    /// Square / cube of side `length` with `n` interior nodes per axis.
    pub fn cube(dim: usize, length: f64, n: usize) -> Result<Self> {
        Domain::new(dim, &vec![length; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.0.lengths
    }

    pub fn counts(&self) -> &[usize] {
        &self.0.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.0.spacing
    }

    /// Nodes per axis including the two boundary layers.
    pub fn full_dims(&self) -> &[usize] {
        &self.0.full_dims
    }

    /// Volume weight attached to every interior node, `prod h_a`.
    pub fn cell_volume(&self) -> f64 {
        self.0.spacing.iter().product()
    }

    /// Exact measure of the box.
    pub fn volume(&self) -> f64 {
        self.0.lengths.iter().product()
    }

    /// Midpoint-rule measure, `N_interior * prod h_a`.
    pub fn discrete_volume(&self) -> f64 {
        self.num_interior() as f64 * self.cell_volume()
    }

    pub fn num_interior(&self) -> usize {
        self.0.interior_full.len()
    }

    pub fn num_boundary(&self) -> usize {
        self.0.boundary_full.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.0.full_interior.len()
    }

    /// Full indices of interior nodes, in interior order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.0.interior_full
    }

    /// Full indices of boundary nodes, in boundary order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.0.boundary_full
    }

    pub fn interior_index(&self, full: usize) -> Option<usize> {
        match self.0.full_interior[full] {
            NONE => None,
            i => Some(i),
        }
    }

    pub fn boundary_index(&self, full: usize) -> Option<usize> {
        match self.0.full_boundary[full] {
            NONE => None,
            b => Some(b),
        }
    }

    /// Face of boundary node `b`, or `None` for edge/corner nodes that
    /// belong to more than one face (those never enter a stencil).
    pub fn boundary_face(&self, b: usize) -> Option<Face> {
        self.0.boundary_face[b]
    }

    /// Product of spacings tangential to `face`.
    pub fn face_weight(&self, face: Face) -> f64 {
        self.0
            .spacing
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != face.axis)
            .map(|(_, h)| h)
            .product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.0.strides[axis]
    }

    pub fn full_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.0.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, full: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rem = full;
        for a in 0..self.0.dim {
            out[a] = rem % self.0.full_dims[a];
            rem /= self.0.full_dims[a];
        }
        out
    }

    /// Cartesian coordinates of a node (unused axes are 0).
    pub fn coords(&self, full: usize) -> [f64; 3] {
        let m = self.multi_index(full);
        let mut x = [0.0; 3];
        for a in 0..self.0.dim {
            x[a] = m[a] as f64 * self.0.spacing[a];
        }
        x
    }

    /// Full indices of the `2*dim` stencil neighbors of interior node `i`.
    #[inline]
    pub(crate) fn neighbors_full(&self, i: usize) -> &[usize] {
        let k = 2 * self.0.dim;
        &self.0.nbr_full[i * k..(i + 1) * k]
    }

    /// Interior indices of the stencil neighbors (`usize::MAX` for boundary).
    #[inline]
    pub(crate) fn neighbors_interior(&self, i: usize) -> &[usize] {
        let k = 2 * self.0.dim;
        &self.0.nbr_int[i * k..(i + 1) * k]
    }

    /// `1/h_a^2` for the neighbor slot `slot` (slot / 2 is the axis).
    #[inline]
    pub(crate) fn inv_h2(&self, slot: usize) -> f64 {
        let h = self.0.spacing[slot / 2];
        1.0 / (h * h)
    }

    pub(crate) const NO_NODE: usize = NONE;

    pub(crate) fn check_same(&self, other: &Domain, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(KgmError::DomainMismatch(what.to_string()))
        }
    }
}

/// Nodal values of a real function on every node of a [`Domain`].
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: Domain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &Domain) -> Self {
        ScalarField { domain: domain.clone(), values: vec![0.0; domain.num_nodes()] }
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        ScalarField { domain: domain.clone(), values: vec![c; domain.num_nodes()] }
    }

    /// Samples `f` at every node, boundary included.
    pub fn from_fn(domain: &Domain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..domain.num_nodes())
            .map(|full| {
                let x = domain.coords(full);
                f(&x[..domain.dim()])
            })
            .collect();
        ScalarField { domain: domain.clone(), values }
    }

    /// Full-lattice values in full-index order.
    pub fn from_values(domain: &Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.num_nodes() {
            return Err(KgmError::DomainMismatch(format!(
                "expected {} values, got {}",
                domain.num_nodes(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KgmError::Config("field values must be finite".into()));
        }
        Ok(ScalarField { domain: domain.clone(), values })
    }

    /// Interior values given in interior order; boundary set to zero.
    pub fn from_interior(domain: &Domain, interior: &[f64]) -> Self {
        let mut f = ScalarField::zeros(domain);
        f.set_interior(interior);
        f
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, full: usize) -> f64 {
        self.values[full]
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.domain.interior_nodes().iter().map(|&f| self.values[f]).collect()
    }

    pub fn boundary_values(&self) -> Vec<f64> {
        self.domain.boundary_nodes().iter().map(|&f| self.values[f]).collect()
    }

    pub fn set_interior(&mut self, interior: &[f64]) {
        debug_assert_eq!(interior.len(), self.domain.num_interior());
        for (&full, &v) in self.domain.interior_nodes().iter().zip(interior) {
            self.values[full] = v;
        }
    }

    pub fn set_boundary(&mut self, boundary: &[f64]) {
        debug_assert_eq!(boundary.len(), self.domain.num_boundary());
        for (&full, &v) in self.domain.boundary_nodes().iter().zip(boundary) {
            self.values[full] = v;
        }
    }

    /// Copy with the boundary layer replaced by a Dirichlet trace.
    pub fn with_trace(&self, trace: &BoundaryData) -> Self {
        let mut out = self.clone();
        out.set_boundary(&trace.values);
        out
    }

    /// Copy with the boundary layer zeroed.
    pub fn zero_trace(&self) -> Self {
        let mut out = self.clone();
        for &full in self.domain.boundary_nodes() {
            out.values[full] = 0.0;
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.domain == other.domain);
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max |value| over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max |value| over interior nodes.
    pub fn interior_sup_norm(&self) -> f64 {
        self.domain.interior_nodes().iter().fold(0.0, |m, &f| m.max(self.values[f].abs()))
    }

    /// Max |value| over boundary nodes.
    pub fn boundary_sup_norm(&self) -> f64 {
        self.domain.boundary_nodes().iter().fold(0.0, |m, &f| m.max(self.values[f].abs()))
    }
}

/// Whether boundary values are a trace of the function or its outward flux.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundaryKind {
    DirichletTrace,
    NeumannFlux,
}

/// One real value per boundary node, in the domain's boundary order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    kind: BoundaryKind,
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(domain: &Domain, kind: BoundaryKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.num_boundary() {
            return Err(KgmError::DomainMismatch(format!(
                "boundary data has {} values, domain has {} boundary nodes",
                values.len(),
                domain.num_boundary()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KgmError::Config("boundary values must be finite".into()));
        }
        Ok(BoundaryData { kind, values })
    }

    pub fn constant(domain: &Domain, kind: BoundaryKind, c: f64) -> Self {
        BoundaryData { kind, values: vec![c; domain.num_boundary()] }
    }

    pub fn zeros(domain: &Domain, kind: BoundaryKind) -> Self {
        BoundaryData::constant(domain, kind, 0.0)
    }

    /// Samples `f` at the boundary node coordinates.
    pub fn from_fn(domain: &Domain, kind: BoundaryKind, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = domain
            .boundary_nodes()
            .iter()
            .map(|&full| {
                let x = domain.coords(full);
                f(&x[..domain.dim()])
            })
            .collect();
        BoundaryData { kind, values }
    }

    /// Trace of a field on the boundary layer.
    pub fn trace_of(field: &ScalarField) -> Self {
        BoundaryData { kind: BoundaryKind::DirichletTrace, values: field.boundary_values() }
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BoundaryData { kind: self.kind, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Midpoint rule over interior nodes: `sum_i f_i * prod h_a`.
pub fn integrate_volume(f: &ScalarField) -> f64 {
    let d = f.domain();
    let sum: f64 = d.interior_nodes().iter().map(|&i| f.values[i]).sum();
    sum * d.cell_volume()
}

/// Face-wise midpoint rule. Edge and corner nodes carry no weight.
pub fn integrate_boundary(g: &BoundaryData, d: &Domain) -> Result<f64> {
    if g.len() != d.num_boundary() {
        return Err(KgmError::DomainMismatch(format!(
            "boundary data has {} values, domain has {} boundary nodes",
            g.len(),
            d.num_boundary()
        )));
    }
    let mut sum = 0.0;
    for (b, v) in g.values.iter().enumerate() {
        if let Some(face) = d.boundary_face(b) {
            sum += v * d.face_weight(face);
        }
    }
    Ok(sum)
}

/// Weighted inner product over interior nodes.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    let d = f.domain();
    let sum: f64 = d.interior_nodes().iter().map(|&i| f.values[i] * g.values[i]).sum();
    sum * d.cell_volume()
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    inner(f, f).sqrt()
}

/// Discrete `L^p` norm over interior nodes.
pub fn lp_norm(f: &ScalarField, p: f64) -> f64 {
    let d = f.domain();
    let sum: f64 = d.interior_nodes().iter().map(|&i| f.values[i].abs().powf(p)).sum();
    (sum * d.cell_volume()).powf(1.0 / p)
}

/// Discrete Dirichlet form over every lattice edge touching an interior
/// node. Boundary values of `f` and `g` are read, so for zero-trace fields
/// this is exactly `-<f, L g>` with `L` the Dirichlet 2d+1-point Laplacian.
pub fn dirichlet_form(f: &ScalarField, g: &ScalarField) -> f64 {
    edge_form(f, g, true)
}

/// Dirichlet form restricted to interior-interior edges: the energy of the
/// zero-flux Neumann Laplacian.
pub fn dirichlet_form_neumann(f: &ScalarField, g: &ScalarField) -> f64 {
    edge_form(f, g, false)
}

fn edge_form(f: &ScalarField, g: &ScalarField, with_boundary_edges: bool) -> f64 {
    let d = f.domain();
    let fv = &f.values;
    let gv = &g.values;
    let mut sum = 0.0;
    for (i, &full) in d.interior_nodes().iter().enumerate() {
        let nf = d.neighbors_full(i);
        let ni = d.neighbors_interior(i);
        for slot in 0..nf.len() {
            let upper = slot % 2 == 1;
            let is_boundary = ni[slot] == Domain::NO_NODE;
            // interior-interior edges are counted once, from their lower end
            if (!upper && !is_boundary) || (is_boundary && !with_boundary_edges) {
                continue;
            }
            let n = nf[slot];
            sum += (fv[n] - fv[full]) * (gv[n] - gv[full]) * d.inv_h2(slot);
        }
    }
    sum * d.cell_volume()
}

/// `sqrt(dirichlet_form(f, f))`.
pub fn h1_seminorm(f: &ScalarField) -> f64 {
    dirichlet_form(f, f).max(0.0).sqrt()
}

/// `sqrt(dirichlet_form_neumann(f, f))`.
pub fn h1_seminorm_neumann(f: &ScalarField) -> f64 {
    dirichlet_form_neumann(f, f).max(0.0).sqrt()
}
