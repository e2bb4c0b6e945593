//! The time-evolution operator connecting velocity phase space to phase
//! space.
//!
//! The operator carries a phase-space function to a velocity-phase-space
//! function by differentiating along the flow and pulling momenta back
//! through the fiber derivative:
//! `K(xi) = qdot^A (d xi/d q^A) o FL + pdot_A (d xi/d p_A) o FL` with
//! `qdot^A = v^A` and `pdot_A = dL/dq^A`. Its defining property is that it
//! shifts constraint generations by one: the image of a canonical
//! constraint of generation `i` vanishes on the second-order surface of
//! generation `i + 1`.

use std::sync::Arc;

use crate::constraints::{
    weak_vanishing, ConstraintChain, Klass, SurfaceReducer, WeakOutcome,
};
use crate::expr::{ExprError, RationalExpr, VarTable};
use crate::legendre::LegendreData;
use crate::mechanics::LagrangianSystem;
use crate::EngineSettings;

/// Coordinate data of the evolution operator on the `(q, v)` chart.
#[derive(Debug, Clone)]
pub struct KOperator {
    pub table: Arc<VarTable>,
    /// Configuration velocities: identically `v^A`.
    pub qdot: Vec<RationalExpr>,
    /// Momentum rates along the flow: `dL/dq^A`.
    pub pdot: Vec<RationalExpr>,
}

/// Assemble the evolution operator of a Lagrangian system.
pub fn build_k(sys: &LagrangianSystem) -> KOperator {
    let table = &sys.table;
    KOperator {
        table: Arc::clone(table),
        qdot: (0..sys.n)
            .map(|a| RationalExpr::var(table, table.velocity(a)))
            .collect(),
        pdot: (0..sys.n)
            .map(|a| sys.lagrangian.derivative(table.position(a)))
            .collect(),
    }
}

/// Apply the operator to a phase-space function (expressed on the extended
/// `(q, v, p)` chart of `ld`). The result lives on the `(q, v)` chart.
pub fn apply_k(
    k: &KOperator,
    ld: &LegendreData,
    xi: &RationalExpr,
) -> Result<RationalExpr, ExprError> {
    let ext = &ld.table;
    let n = ext.dim();
    let mut acc = RationalExpr::zero(ext);
    for a in 0..n {
        let dq = ld.pullback(&xi.derivative(ext.position(a)))?;
        let p = ext.momentum(a).expect("extended chart has momenta");
        let dp = ld.pullback(&xi.derivative(p))?;
        acc = acc.add(&ld.lift_expr(&k.qdot[a]).mul(&dq));
        acc = acc.add(&ld.lift_expr(&k.pdot[a]).mul(&dp));
    }
    acc.restrict_to(&k.table)
}

/// Residual vectors of the three defining conditions; every entry is
/// identically zero for a correctly assembled operator.
#[derive(Debug, Clone)]
pub struct KReport {
    /// Momentum compatibility: `p_A o FL - dL/dv^A`.
    pub structural: Vec<RationalExpr>,
    /// Energy-gradient balance in the base directions:
    /// `dE/dq^B + pdot_B - v^A d2L/(dq^B dv^A)`.
    pub dynamical_q: Vec<RationalExpr>,
    /// Energy-gradient balance in the fiber directions:
    /// `dE/dv^B - v^A d2L/(dv^B dv^A)`.
    pub dynamical_v: Vec<RationalExpr>,
    /// Second-order condition: `qdot^A - v^A`.
    pub sode: Vec<RationalExpr>,
}

impl KReport {
    pub fn ok(&self) -> bool {
        self.structural
            .iter()
            .chain(&self.dynamical_q)
            .chain(&self.dynamical_v)
            .chain(&self.sode)
            .all(RationalExpr::is_zero)
    }
}

/// Check the operator against the system that produced it.
pub fn verify_k(
    sys: &LagrangianSystem,
    ld: &LegendreData,
    k: &KOperator,
) -> Result<KReport, ExprError> {
    let table = &sys.table;
    let n = sys.n;
    let ext = &ld.table;

    let mut structural = Vec::with_capacity(n);
    for a in 0..n {
        let p = RationalExpr::var(ext, ext.momentum(a).expect("momentum"));
        let pulled = ld.pullback(&p)?.restrict_to(table)?;
        structural.push(pulled.sub(&sys.lagrangian.derivative(table.velocity(a))));
    }

    let mut dynamical_q = Vec::with_capacity(n);
    let mut dynamical_v = Vec::with_capacity(n);
    for b in 0..n {
        let qb = table.position(b);
        let vb = table.velocity(b);
        let mut mixed_q = RationalExpr::zero(table);
        let mut mixed_v = RationalExpr::zero(table);
        for a in 0..n {
            let va = RationalExpr::var(table, table.velocity(a));
            mixed_q = mixed_q.add(&va.mul(&sys.lagrangian.derivative(qb).derivative(table.velocity(a))));
            mixed_v = mixed_v.add(&va.mul(&sys.lagrangian.derivative(vb).derivative(table.velocity(a))));
        }
        dynamical_q.push(sys.energy.derivative(qb).add(&k.pdot[b]).sub(&mixed_q));
        dynamical_v.push(sys.energy.derivative(vb).sub(&mixed_v));
    }

    let sode = (0..n)
        .map(|a| k.qdot[a].sub(&RationalExpr::var(table, table.velocity(a))))
        .collect();

    Ok(KReport {
        structural,
        dynamical_q,
        dynamical_v,
        sode,
    })
}

/// The image of one canonical constraint under the operator, tested against
/// the second-order surface one generation deeper.
#[derive(Debug, Clone)]
pub struct ShiftRecord {
    pub name: String,
    pub ham_generation: u32,
    pub klass: Klass,
    /// `K(phi)` on the `(q, v)` chart.
    pub image: RationalExpr,
    /// Constraints the image was tested against (second-order chain,
    /// generation at most `ham_generation + 1`).
    pub tested_generations: u32,
    pub outcome: WeakOutcome,
    /// Whether the image representative descends through the fiber
    /// derivative (`None` for a zero image). Class-correspondence data for
    /// the report; the shift property itself does not depend on it.
    pub image_projectable: Option<bool>,
}

/// Verify the generation-shift property constraint by constraint: the image
/// of a generation-`i` canonical constraint vanishes weakly on the
/// second-order constraints of generation at most `i + 1`.
pub fn generation_shift_check(
    sys: &LagrangianSystem,
    k: &KOperator,
    ld: &LegendreData,
    ham_chain: &ConstraintChain,
    s_chain: &ConstraintChain,
    settings: &EngineSettings,
) -> Result<Vec<ShiftRecord>, ExprError> {
    let table = &k.table;
    let mut records = Vec::new();
    for c in ham_chain.all() {
        let image = apply_k(k, ld, &c.expr)?;
        let target = c.generation + 1;
        let surface: Vec<RationalExpr> = s_chain
            .all()
            .filter(|s| s.generation <= target)
            .map(|s| s.expr.clone())
            .collect();
        let (outcome, image_projectable) = if image.is_zero() {
            (WeakOutcome::Holds, None)
        } else {
            let reducer = SurfaceReducer::new(table, &surface);
            (
                weak_vanishing(&image, &reducer, settings),
                Some(crate::mechanics::fl_projectable(sys, &image).projectable),
            )
        };
        records.push(ShiftRecord {
            name: c.name.clone(),
            ham_generation: c.generation,
            klass: c.klass,
            image,
            tested_generations: target,
            outcome,
            image_projectable,
        });
    }
    Ok(records)
}
