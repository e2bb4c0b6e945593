//! The fiber derivative: from velocity phase space to momentum phase space.
//!
//! For a velocity-quadratic Lagrangian the momenta are `p = W(q) v + a(q)`.
//! When `W` is singular the image is cut out by the primary constraints
//! `gamma^T (p - a) = 0`, one per Hessian kernel direction, and the
//! canonical Hamiltonian is the energy evaluated on any velocity section
//! `v*` with `W v* = p - a`. [`legendre`] computes all of these and verifies
//! that the Hamiltonian does not depend on the choice of section.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::constraints::{weak_vanishing, SurfaceReducer, WeakOutcome};
use crate::expr::{ExprError, RationalExpr, TableError, VarTable};
use crate::linalg::{self, RfMatrix};
use crate::mechanics::{self, LagrangianSystem};
use crate::EngineSettings;

/// Internal name of the fiber-shift parameter used by the well-definedness
/// check; deliberately unparseable so user input can never collide with it.
const SHIFT_PARAM: &str = "#t";

#[derive(Debug, Error)]
pub enum LegendreError {
    #[error("variable table extension failed: {0}")]
    Table(#[from] TableError),
    #[error("expression error in fiber derivative: {0}")]
    Expr(#[from] ExprError),
    #[error(
        "canonical Hamiltonian is not fiber-invariant: shifting the velocity \
         section along the Hessian kernel changes it by {residual}"
    )]
    IllDefinedHamiltonian { residual: RationalExpr },
}

/// The fiber derivative of a (possibly singular) Lagrangian system.
#[derive(Debug, Clone)]
pub struct LegendreData {
    /// Extended chart `q1..qn, v1..vn, p1..pn` (+ parameters).
    pub table: Arc<VarTable>,
    /// Index translation from the system's `(q, v)` chart into [`table`].
    pub lift: crate::expr::Remap,
    /// Momenta as functions on velocity phase space: `p^_A = dL/dv^A`.
    pub momentum_exprs: Vec<RationalExpr>,
    /// Primary constraints `gamma^T (p - a)`, normalized; one per Hessian
    /// kernel basis vector, same order.
    pub primary_constraints: Vec<RationalExpr>,
    /// Hessian kernel basis, lifted to the extended chart.
    pub kernel: Vec<Vec<RationalExpr>>,
    /// A velocity section: `W v* = p - a` modulo primaries, free directions
    /// set to zero.
    pub v_star: Vec<RationalExpr>,
    /// Canonical Hamiltonian `h0 = E_L[v -> v*]`, a function of `(q, p)`.
    pub h0: RationalExpr,
}

impl LegendreData {
    /// Pull a phase-space function back to velocity phase space by
    /// substituting `p_A -> dL/dv^A`. The result lives on the extended
    /// chart but depends only on positions and velocities.
    pub fn pullback(&self, f: &RationalExpr) -> Result<RationalExpr, ExprError> {
        let n = self.table.dim();
        let map: BTreeMap<usize, RationalExpr> = (0..n)
            .map(|a| {
                (
                    self.table.momentum(a).expect("extended chart has momenta"),
                    self.momentum_exprs[a].clone(),
                )
            })
            .collect();
        f.substitute(&map)
    }

    /// Lift a function from the system's `(q, v)` chart.
    pub fn lift_expr(&self, f: &RationalExpr) -> RationalExpr {
        f.remap(&self.table, &self.lift.to_new)
    }
}

/// Compute the fiber derivative data and canonical Hamiltonian.
pub fn legendre(
    sys: &LagrangianSystem,
    settings: &EngineSettings,
) -> Result<LegendreData, LegendreError> {
    let n = sys.n;
    let (ext, lift) = sys.table.extend_momenta()?;
    let lift_expr = |e: &RationalExpr| e.remap(&ext, &lift.to_new);

    let momentum_exprs: Vec<RationalExpr> = (0..n)
        .map(|a| lift_expr(&sys.lagrangian.derivative(sys.table.velocity(a))))
        .collect();

    let rhs: Vec<RationalExpr> = (0..n)
        .map(|a| {
            RationalExpr::var(&ext, ext.momentum(a).expect("momentum"))
                .sub(&lift_expr(&sys.affine[a]))
        })
        .collect();

    let kernel: Vec<Vec<RationalExpr>> = mechanics::vertical_kernel(sys)
        .into_iter()
        .map(|gamma| gamma.iter().map(&lift_expr).collect())
        .collect();

    let primary_constraints: Vec<RationalExpr> = kernel
        .iter()
        .map(|gamma| {
            let mut phi = RationalExpr::zero(&ext);
            for a in 0..n {
                phi = phi.add(&gamma[a].mul(&rhs[a]));
            }
            phi.constraint_form()
        })
        .collect();

    let w_ext = RfMatrix::from_fn(&ext, n, n, |i, j| lift_expr(sys.hessian.at(i, j)));
    let sol = linalg::solve(&w_ext, &rhs);
    let v_star = sol.pivot_solution;

    let energy_ext = lift_expr(&sys.energy);
    let section: BTreeMap<usize, RationalExpr> = (0..n)
        .map(|a| (ext.velocity(a), v_star[a].clone()))
        .collect();
    let h0 = energy_ext.substitute(&section)?;

    // Well-definedness: shifting the section along any kernel direction by
    // an indeterminate amount must not change the Hamiltonian modulo the
    // primary constraints.
    let (chk, chk_remap) = ext.extend_parameters(&[SHIFT_PARAM])?;
    let up = |e: &RationalExpr| e.remap(&chk, &chk_remap.to_new);
    let t = RationalExpr::var(
        &chk,
        chk.index_of(SHIFT_PARAM).expect("shift parameter present"),
    );
    let primaries_chk: Vec<RationalExpr> = primary_constraints.iter().map(up).collect();
    let reducer = SurfaceReducer::new(&chk, &primaries_chk);
    for gamma in &kernel {
        let shifted: BTreeMap<usize, RationalExpr> = (0..n)
            .map(|a| {
                (
                    chk.velocity(a),
                    up(&v_star[a]).add(&t.mul(&up(&gamma[a]))),
                )
            })
            .collect();
        let moved = up(&energy_ext).substitute(&shifted)?;
        let diff = moved.sub(&up(&h0));
        match weak_vanishing(&diff, &reducer, settings) {
            WeakOutcome::Holds => {}
            WeakOutcome::Fails { residual, .. }
            | WeakOutcome::Indeterminate { residual } => {
                return Err(LegendreError::IllDefinedHamiltonian { residual });
            }
        }
    }

    Ok(LegendreData {
        table: ext,
        lift,
        momentum_exprs,
        primary_constraints,
        kernel,
        v_star,
        h0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::mechanics::build_system;

    fn data(n: usize, l: &str) -> LegendreData {
        let t = VarTable::for_lagrangian(n, &[]).unwrap();
        let lag = parse(l, &t).unwrap();
        let sys = build_system(&t, &lag).unwrap();
        legendre(&sys, &EngineSettings::default()).unwrap()
    }

    #[test]
    fn relative_motion() {
        let ld = data(2, "(1/2)*(v1 - v2)^2");
        let t = &ld.table;
        assert_eq!(ld.primary_constraints.len(), 1);
        assert!(ld.primary_constraints[0].same_repr(&parse("p1 + p2", t).unwrap()));
        assert!(ld.h0.same_repr(&parse("(1/2)*p1^2", t).unwrap()));
        assert!(ld.v_star[0].same_repr(&parse("p1", t).unwrap()));
        assert!(ld.v_star[1].is_zero());
        // Momenta pull back to themselves.
        let p1 = parse("p1", t).unwrap();
        assert!(ld.pullback(&p1).unwrap().same_repr(&parse("v1 - v2", t).unwrap()));
    }

    #[test]
    fn linear_velocity_coupling() {
        let ld = data(2, "(1/2)*v1^2 + q1*v2");
        let t = &ld.table;
        assert_eq!(ld.primary_constraints.len(), 1);
        assert!(ld.primary_constraints[0].same_repr(&parse("p2 - q1", t).unwrap()));
        assert!(ld.h0.same_repr(&parse("(1/2)*p1^2", t).unwrap()));
        assert!(ld.v_star[0].same_repr(&parse("p1", t).unwrap()));
    }

    #[test]
    fn affine_shift() {
        let ld = data(2, "(1/2)*(v1 - q2)^2");
        let t = &ld.table;
        assert!(ld.primary_constraints[0].same_repr(&parse("p2", t).unwrap()));
        assert!(ld.h0.same_repr(&parse("(1/2)*p1^2 + p1*q2", t).unwrap()));
        assert!(ld.v_star[0].same_repr(&parse("p1 + q2", t).unwrap()));
    }

    #[test]
    fn regular_lagrangian_has_no_primaries() {
        let ld = data(2, "(1/2)*(v1^2 + v2^2) - q1*q2");
        let t = &ld.table;
        assert!(ld.primary_constraints.is_empty());
        assert!(ld
            .h0
            .same_repr(&parse("(1/2)*(p1^2 + p2^2) + q1*q2", t).unwrap()));
        // Pullback of h0 recovers the energy.
        let back = ld.pullback(&ld.h0).unwrap();
        let energy = parse("(1/2)*(v1^2 + v2^2) + q1*q2", t).unwrap();
        assert!(back.same_repr(&energy));
    }

    #[test]
    fn solve_residuals_match_primaries() {
        // For the singular examples the consistency residuals of W v = p - a
        // must vanish on the primary surface.
        for l in ["(1/2)*(v1 - v2)^2", "(1/2)*v1^2 + q1*v2", "(1/2)*(v1 - q2)^2"] {
            let t = VarTable::for_lagrangian(2, &[]).unwrap();
            let lag = parse(l, &t).unwrap();
            let sys = build_system(&t, &lag).unwrap();
            let ld = legendre(&sys, &EngineSettings::default()).unwrap();
            let red = SurfaceReducer::new(&ld.table, &ld.primary_constraints);
            // W v* - (p - a) vanishes modulo the primaries.
            let lift = |e: &RationalExpr| e.remap(&ld.table, &ld.lift.to_new);
            for a in 0..sys.n {
                let mut lhs = RationalExpr::zero(&ld.table);
                for b in 0..sys.n {
                    lhs = lhs.add(&lift(sys.hessian.at(a, b)).mul(&ld.v_star[b]));
                }
                let p = RationalExpr::var(&ld.table, ld.table.momentum(a).unwrap());
                let diff = lhs.sub(&p.sub(&lift(&sys.affine[a])));
                assert!(red.reduce(&diff).unwrap().is_zero(), "row {} of {}", a, l);
            }
        }
    }
}
