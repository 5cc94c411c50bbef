use crate::functional::{project_out, FunctionalContext};
use crate::grid::{Domain, ScalarField};

/// Closed subspace of trial fields for a constrained mountain pass.
#[derive(Clone, Debug)]
pub enum Subspace {
    Full,
    /// weighted-`L²` complement of the given orthonormal fields
    Complement(Vec<ScalarField>),
    /// fields odd under the mirror reflection `x_a -> L_a - x_a`
    Odd(usize),
}

fn mirror(d: &Domain, axis: usize, full: usize) -> usize {
    let m = d.multi_index(full);
    let dims = d.full_dims();
    full + d.stride(axis) * (dims[axis] - 1 - m[axis]) - d.stride(axis) * m[axis]
}

/// `f ∘ R_a` for the reflection across the mid-plane of axis `a`.
pub(crate) fn reflect(f: &ScalarField, axis: usize) -> ScalarField {
    let d = f.domain();
    let vals = (0..d.num_nodes()).map(|i| f.get(mirror(d, axis, i))).collect();
    ScalarField::from_values(d, vals).expect("same domain")
}

impl Subspace {
    pub fn project(&self, v: &ScalarField) -> ScalarField {
        match self {
            Subspace::Full => v.clone(),
            Subspace::Complement(basis) => project_out(v, basis),
            Subspace::Odd(axis) => v.sub(&reflect(v, *axis)).scaled(0.5),
        }
    }

    /// Whether the gradient of `J` maps the subspace into itself, so that
    /// its constrained critical points are critical on the whole space.
    /// Complements are only invariant when trivial.
    pub fn preserved_by(&self, ctx: &FunctionalContext) -> bool {
        match self {
            Subspace::Full => true,
            Subspace::Complement(basis) => basis.is_empty(),
            Subspace::Odd(axis) => {
                if *axis >= ctx.domain().dim() {
                    return false;
                }
                let pot = ctx.potential();
                let lift = ctx.u_lift();
                let tol = 1e-12 * (1.0 + pot.sup_norm() + lift.sup_norm());
                pot.sub(&reflect(pot, *axis)).sup_norm() <= tol && lift.add(&reflect(lift, *axis)).sup_norm() <= tol
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Subspace::Full => "full".into(),
            Subspace::Complement(b) => format!("complement of {} eigenfields", b.len()),
            Subspace::Odd(a) => format!("odd in x{a}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_projection_is_idempotent_and_kills_even_fields() {
        let d = Domain::new(2, &[1.0, 2.0], &[6, 9]).unwrap();
        let f = ScalarField::from_fn(&d, |x| (x[0] + 0.3 * x[1]).exp());
        for axis in 0..2 {
            let s = Subspace::Odd(axis);
            let p = s.project(&f);
            assert!(s.project(&p).sub(&p).sup_norm() < 1e-14);
            assert!(p.add(&reflect(&p, axis)).sup_norm() < 1e-14);
            let even = f.add(&reflect(&f, axis));
            assert!(s.project(&even).sup_norm() < 1e-14);
        }
    }
}
