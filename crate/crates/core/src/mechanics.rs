//! Velocity-quadratic Lagrangian systems on velocity phase space.
//!
//! A Lagrangian here has the form `L = (1/2) v^T W(q) v + a(q)^T v - V(q)`
//! with `W` symmetric and possibly degenerate; entries of `W`, `a`, `V` are
//! rational expressions in the positions (and parameters). [`build_system`]
//! validates that shape exactly and assembles the derived geometry: the
//! energy, the Lagrangian two-form, and the force one-form entering the
//! Euler-Lagrange equations `W(q) \ddot q = alpha(q, v)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{big_ratio, ExprError, RationalExpr, VarTable};
use crate::linalg::{self, RfMatrix};

#[derive(Debug, Error)]
pub enum MechanicsError {
    #[error("Lagrangian is not quadratic in velocities: {0}")]
    NotQuadratic(String),
    #[error("Lagrangian could not be evaluated at zero velocity")]
    SingularAtZeroVelocity(#[from] ExprError),
}

/// A validated velocity-quadratic Lagrangian and its derived geometry.
#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    pub table: Arc<VarTable>,
    pub n: usize,
    pub lagrangian: RationalExpr,
    /// Velocity Hessian `W_AB = d^2 L / dv^A dv^B` (velocity independent).
    pub hessian: RfMatrix,
    /// Affine velocity coefficients `a_A = (dL/dv^A)|_{v=0}`.
    pub affine: Vec<RationalExpr>,
    /// Potential `V = -L|_{v=0}`.
    pub potential: RationalExpr,
    /// Energy `E_L = v^A dL/dv^A - L = (1/2) v^T W v + V`.
    pub energy: RationalExpr,
    /// Force terms `alpha_A = dL/dq^A - v^B d^2L/dq^B dv^A`.
    pub force: Vec<RationalExpr>,
    /// Matrix of the Lagrangian two-form in the basis
    /// `(d/dq^1..d/dq^n, d/dv^1..d/dv^n)`.
    pub omega_l: RfMatrix,
    pub rank_w: usize,
    pub rank_omega_l: usize,
}

/// A vector field on velocity phase space, split into its `d/dq` and `d/dv`
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldTq {
    pub q_part: Vec<RationalExpr>,
    pub v_part: Vec<RationalExpr>,
}

impl VectorFieldTq {
    pub fn components(&self) -> impl Iterator<Item = &RationalExpr> {
        self.q_part.iter().chain(self.v_part.iter())
    }

    pub fn from_flat(n: usize, flat: Vec<RationalExpr>) -> Self {
        assert_eq!(flat.len(), 2 * n);
        let mut it = flat.into_iter();
        let q_part = it.by_ref().take(n).collect();
        let v_part = it.collect();
        VectorFieldTq { q_part, v_part }
    }

    /// Directional derivative of a function on velocity phase space.
    pub fn apply(&self, sys: &LagrangianSystem, f: &RationalExpr) -> RationalExpr {
        let mut acc = RationalExpr::zero(&sys.table);
        for a in 0..sys.n {
            acc = acc.add(&self.q_part[a].mul(&f.derivative(sys.table.position(a))));
            acc = acc.add(&self.v_part[a].mul(&f.derivative(sys.table.velocity(a))));
        }
        acc
    }
}

/// Result of a fiber-derivative projectability test.
#[derive(Debug, Clone)]
pub struct Projectability {
    pub projectable: bool,
    /// A nonzero directional derivative along the Hessian kernel, when the
    /// test fails.
    pub witness: Option<RationalExpr>,
}

/// Validate the Lagrangian and assemble the system geometry.
///
/// The table must be one built by [`VarTable::for_lagrangian`]. Fails when
/// the velocity Hessian still depends on a velocity or the quadratic
/// reconstruction `L = (1/2) v^T W v + a^T v - V` does not hold identically.
pub fn build_system(
    table: &Arc<VarTable>,
    lagrangian: &RationalExpr,
) -> Result<LagrangianSystem, MechanicsError> {
    let n = table.dim();
    assert!(n > 0, "configuration dimension must be positive");

    let dl_dv: Vec<RationalExpr> = (0..n)
        .map(|a| lagrangian.derivative(table.velocity(a)))
        .collect();
    let hessian = RfMatrix::from_fn(table, n, n, |a, b| {
        dl_dv[a].derivative(table.velocity(b))
    });
    for a in 0..n {
        for b in 0..n {
            let entry = hessian.at(a, b);
            for c in 0..n {
                if entry.depends_on(table.velocity(c)) {
                    return Err(MechanicsError::NotQuadratic(format!(
                        "d^2L/dv{}dv{} still depends on v{}",
                        a + 1,
                        b + 1,
                        c + 1
                    )));
                }
            }
        }
    }

    let zero_v: BTreeMap<usize, RationalExpr> = (0..n)
        .map(|a| (table.velocity(a), RationalExpr::zero(table)))
        .collect();
    let affine: Vec<RationalExpr> = dl_dv
        .iter()
        .map(|d| d.substitute(&zero_v))
        .collect::<Result<_, _>>()?;
    let potential = lagrangian.substitute(&zero_v)?.neg();

    // Reconstruction: L - ((1/2) v^T W v + a^T v - V) must vanish identically.
    let v_exprs: Vec<RationalExpr> = (0..n)
        .map(|a| RationalExpr::var(table, table.velocity(a)))
        .collect();
    let mut quad = RationalExpr::zero(table);
    for a in 0..n {
        for b in 0..n {
            quad = quad.add(&v_exprs[a].mul(&v_exprs[b]).mul(hessian.at(a, b)));
        }
    }
    quad = quad.mul_scalar(&big_ratio(1, 2));
    for a in 0..n {
        quad = quad.add(&v_exprs[a].mul(&affine[a]));
    }
    quad = quad.sub(&potential);
    if !lagrangian.sub(&quad).is_zero() {
        return Err(MechanicsError::NotQuadratic(
            "quadratic reconstruction failed".into(),
        ));
    }

    // Energy E_L = v^A dL/dv^A - L.
    let mut energy = lagrangian.neg();
    for a in 0..n {
        energy = energy.add(&v_exprs[a].mul(&dl_dv[a]));
    }

    // Force alpha_A = dL/dq^A - v^B d(dL/dv^A)/dq^B.
    let force: Vec<RationalExpr> = (0..n)
        .map(|a| {
            let mut acc = lagrangian.derivative(table.position(a));
            for b in 0..n {
                acc = acc.sub(&v_exprs[b].mul(&dl_dv[a].derivative(table.position(b))));
            }
            acc
        })
        .collect();

    // Two-form matrix: [[D, W], [-W, 0]] with
    // D_AB = d(dL/dv^A)/dq^B - d(dL/dv^B)/dq^A.
    let zero = RationalExpr::zero(table);
    let omega_l = RfMatrix::from_fn(table, 2 * n, 2 * n, |i, j| {
        if i < n && j < n {
            dl_dv[i]
                .derivative(table.position(j))
                .sub(&dl_dv[j].derivative(table.position(i)))
        } else if i < n {
            hessian.at(i, j - n).clone()
        } else if j < n {
            hessian.at(j, i - n).neg()
        } else {
            zero.clone()
        }
    });

    let rank_w = linalg::rank(&hessian);
    let rank_omega_l = linalg::rank(&omega_l);

    Ok(LagrangianSystem {
        table: Arc::clone(table),
        n,
        lagrangian: lagrangian.clone(),
        hessian,
        affine,
        potential,
        energy,
        force,
        omega_l,
        rank_w,
        rank_omega_l,
    })
}

/// Basis of the kernel of the Lagrangian two-form, as vector fields.
pub fn kernel_omega_l(sys: &LagrangianSystem) -> Vec<VectorFieldTq> {
    linalg::nullspace(&sys.omega_l)
        .into_iter()
        .map(|flat| VectorFieldTq::from_flat(sys.n, flat))
        .collect()
}

/// Basis of the Hessian kernel: the vertical directions annihilated by the
/// fiber derivative.
pub fn vertical_kernel(sys: &LagrangianSystem) -> Vec<Vec<RationalExpr>> {
    linalg::nullspace(&sys.hessian)
}

/// Components of `S(X) - Delta` in the `d/dv` basis: zero exactly for
/// second-order fields.
pub fn sode_defect(sys: &LagrangianSystem, field: &VectorFieldTq) -> Vec<RationalExpr> {
    (0..sys.n)
        .map(|a| {
            field.q_part[a].sub(&RationalExpr::var(&sys.table, sys.table.velocity(a)))
        })
        .collect()
}

/// Does `f` descend through the fiber derivative? Tests that the derivative
/// of `f` along every Hessian-kernel vertical direction vanishes
/// identically.
pub fn fl_projectable(sys: &LagrangianSystem, f: &RationalExpr) -> Projectability {
    for gamma in vertical_kernel(sys) {
        let mut d = RationalExpr::zero(&sys.table);
        for a in 0..sys.n {
            d = d.add(&gamma[a].mul(&f.derivative(sys.table.velocity(a))));
        }
        if !d.is_zero() {
            return Projectability {
                projectable: false,
                witness: Some(d),
            };
        }
    }
    Projectability {
        projectable: true,
        witness: None,
    }
}
