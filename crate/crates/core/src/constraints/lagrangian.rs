//! Velocity-space stabilization.
//!
//! Two chains live on velocity phase space. The *second-order* chain
//! stabilizes the equation of motion `W vdot = alpha` together with the
//! second-order condition `qdot = v`: its first generation contracts the
//! force with the Hessian kernel, later generations demand tangency of
//! `(v, b0 + mu^h gamma_h)`. The *energy-equation* chain drops the
//! second-order condition and is plain presymplectic stabilization of
//! `i(X) omega_L = dE_L`. Constraints of the first kind that survive in the
//! second chain are `dynamical`; the extras forced by second-orderness are
//! `sode`.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::constraints::{
    fresh_constraints, resolve_multipliers, ChainError, Constraint, ConstraintChain, Klass,
    MultiplierResolution, MultiplierValue, Origin, Side, SurfaceReducer,
};
use crate::expr::{ExprError, RationalExpr, VarTable};
use crate::legendre::LegendreData;
use crate::linalg::{self, RfMatrix};
use crate::mechanics::{self, LagrangianSystem};
use crate::presymplectic::{pca_run, PcaResult, PresymplecticSystem};
use crate::EngineSettings;

/// First stored generation of every velocity-space chain. Generation 1 is
/// reserved for the primary momentum constraints on phase space, so the
/// velocity-space chains start one step later and the evolution operator
/// shifts generations by exactly one.
pub const LAGRANGIAN_FIRST_GENERATION: u32 = 2;

/// The energy equation `i(X) omega_L = dE_L` as a presymplectic system on
/// the `(q, v)` chart.
///
/// Infallible for systems produced by [`mechanics::build_system`]: the
/// two-form is exact and the right-hand side is an exact differential.
pub fn tq_presymplectic(sys: &LagrangianSystem) -> PresymplecticSystem {
    let table = &sys.table;
    let n = sys.n;
    let chart: Vec<usize> = (0..n)
        .map(|a| table.position(a))
        .chain((0..n).map(|a| table.velocity(a)))
        .collect();
    let alpha: Vec<usize> = chart.clone();
    let alpha: Vec<RationalExpr> = alpha.iter().map(|&i| sys.energy.derivative(i)).collect();
    PresymplecticSystem::new(table, chart, sys.omega_l.clone(), alpha)
        .expect("the Lagrangian two-form is closed and the energy differential exact")
}

/// Stabilize the bare energy equation (no second-order condition).
pub fn lagrangian_pca(
    sys: &LagrangianSystem,
    settings: &EngineSettings,
) -> Result<PcaResult, ChainError> {
    pca_run(
        &tq_presymplectic(sys),
        settings,
        Side::LagrangianPca,
        LAGRANGIAN_FIRST_GENERATION,
        "chi",
    )
}

/// The stabilized second-order chain together with the evolution data it
/// fixes.
#[derive(Debug, Clone)]
pub struct SodeRun {
    pub chain: ConstraintChain,
    /// Acceleration of the base solution: `W * acceleration = alpha` with
    /// kernel directions zeroed. The full field is
    /// `(v, acceleration + mu^h kernel[h])`.
    pub acceleration: Vec<RationalExpr>,
    /// Hessian kernel basis, one vertical direction per multiplier.
    pub kernel: Vec<Vec<RationalExpr>>,
}

/// Stabilize the equation of motion with the second-order condition
/// imposed.
pub fn sode_run(
    sys: &LagrangianSystem,
    settings: &EngineSettings,
) -> Result<SodeRun, ChainError> {
    let table = &sys.table;
    let n = sys.n;
    let kernel = mechanics::vertical_kernel(sys);
    let mut chain = ConstraintChain::empty(Side::LagrangianSode, LAGRANGIAN_FIRST_GENERATION);
    let mut name_counter = 0usize;

    // First generation: the force contracted with each kernel direction.
    // Such a constraint is an obstruction of the equation of motion itself
    // (`dynamical`) exactly when its direction extends to a kernel field of
    // the two-form, i.e. when `D gamma` annihilates the whole Hessian
    // kernel; otherwise only the second-order requirement forces it.
    let mut first: Vec<Constraint> = Vec::new();
    for gamma in &kernel {
        let mut expr = RationalExpr::zero(table);
        for a in 0..n {
            expr = expr.add(&gamma[a].mul(&sys.force[a]));
        }
        let expr = expr.constraint_form();
        if expr.is_zero() {
            continue;
        }
        if expr.as_constant().is_some() {
            return Err(ChainError::Inconsistent { constant: expr });
        }
        let extends = kernel.iter().all(|gp| {
            let mut s = RationalExpr::zero(table);
            for a in 0..n {
                for b in 0..n {
                    s = s.add(&gp[a].mul(sys.omega_l.at(a, b)).mul(&gamma[b]));
                }
            }
            s.is_zero()
        });
        let origin = if extends { Origin::Dynamical } else { Origin::Sode };
        match first.iter_mut().find(|c| c.expr.same_repr(&expr)) {
            Some(c) => {
                if origin == Origin::Dynamical {
                    c.origin = Origin::Dynamical;
                }
            }
            None => {
                name_counter += 1;
                first.push(Constraint {
                    name: format!("chi{}", name_counter),
                    expr,
                    generation: LAGRANGIAN_FIRST_GENERATION,
                    origin,
                    klass: Klass::Unknown,
                });
            }
        }
    }
    if !first.is_empty() {
        chain.generations.push(first);
    }

    let acceleration = linalg::solve(&sys.hessian, &sys.force).pivot_solution;

    chain.stabilized = false;
    for _round in 0..settings.max_generations.max(1) {
        if chain.is_empty() {
            chain.stabilized = true;
            chain.multipliers = kernel
                .iter()
                .enumerate()
                .map(|(h, _)| MultiplierResolution {
                    name: format!("mu{}", h + 1),
                    value: MultiplierValue::Free,
                })
                .collect();
            break;
        }
        let exprs = chain.exprs();
        let reducer = SurfaceReducer::new(table, &exprs);
        let mut b_rows = Vec::with_capacity(exprs.len());
        let mut rhs = Vec::with_capacity(exprs.len());
        for chi in &exprs {
            let mut row = Vec::with_capacity(kernel.len());
            for gamma in &kernel {
                let mut d = RationalExpr::zero(table);
                for a in 0..n {
                    d = d.add(&gamma[a].mul(&chi.derivative(table.velocity(a))));
                }
                row.push(reducer.reduce(&d)?);
            }
            b_rows.push(row);
            let mut x = RationalExpr::zero(table);
            for a in 0..n {
                let v = RationalExpr::var(table, table.velocity(a));
                x = x.add(&v.mul(&chi.derivative(table.position(a))));
                x = x.add(&acceleration[a].mul(&chi.derivative(table.velocity(a))));
            }
            rhs.push(reducer.reduce(&x)?.neg());
        }
        let b = RfMatrix::from_rows(table, b_rows);
        let round = linalg::solve(&b, &rhs);
        let fresh = fresh_constraints(&reducer, &round.residuals, &chain)?;
        if fresh.is_empty() {
            chain.stabilized = true;
            chain.multipliers = resolve_multipliers(&round, "mu", &reducer);
            break;
        }
        let gen = chain.first_generation + chain.generations.len() as u32;
        chain.generations.push(
            fresh
                .into_iter()
                .map(|expr| {
                    name_counter += 1;
                    let p = mechanics::fl_projectable(sys, &expr);
                    Constraint {
                        name: format!("chi{}", name_counter),
                        expr,
                        generation: gen,
                        origin: if p.projectable {
                            Origin::Dynamical
                        } else {
                            Origin::Sode
                        },
                        klass: Klass::Unknown,
                    }
                })
                .collect(),
        );
    }

    Ok(SodeRun {
        chain,
        acceleration,
        kernel,
    })
}

/// Run the velocity-space constraint algorithm. With `with_sode` the
/// second-order condition is imposed; without it the bare energy equation
/// is stabilized.
pub fn lagrangian_run(
    sys: &LagrangianSystem,
    settings: &EngineSettings,
    with_sode: bool,
) -> Result<ConstraintChain, ChainError> {
    if with_sode {
        Ok(sode_run(sys, settings)?.chain)
    } else {
        Ok(lagrangian_pca(sys, settings)?.chain)
    }
}

/// One row of the projectability report: does this velocity-space
/// constraint descend through the fiber derivative, i.e. is it a
/// combination of pulled-back canonical constraints?
#[derive(Debug, Clone)]
pub struct ProjectabilityRow {
    pub name: String,
    pub generation: u32,
    pub origin: Origin,
    /// Base-coefficient combination `chi = sum c_j * (phi_j o FL)` over the
    /// canonical constraints of generation at most this one, modulo earlier
    /// velocity-space constraints; `None` when no such combination exists
    /// (expected for `sode`-type rows).
    pub combination: Option<Vec<(String, RationalExpr)>>,
}

impl ProjectabilityRow {
    pub fn matched(&self) -> bool {
        self.combination.is_some()
    }
}

/// Match every second-order-chain constraint against pullbacks of the
/// canonical chain, generation by generation.
pub fn projectability_report(
    sys: &LagrangianSystem,
    s_chain: &ConstraintChain,
    ham_chain: &ConstraintChain,
    ld: &LegendreData,
) -> Result<Vec<ProjectabilityRow>, ExprError> {
    let table = &sys.table;
    let vset: BTreeSet<usize> = (0..sys.n).map(|a| table.velocity(a)).collect();
    let mut rows = Vec::new();
    let mut earlier: Vec<RationalExpr> = Vec::new();
    for (gi, gen) in s_chain.generations.iter().enumerate() {
        let g = s_chain.generation_number(gi);
        let reducer = SurfaceReducer::new(table, &earlier);
        let mut cands: Vec<(String, RationalExpr)> = Vec::new();
        for h in ham_chain.all().filter(|h| h.generation <= g) {
            let pulled = ld.pullback(&h.expr)?.restrict_to(table)?;
            cands.push((h.name.clone(), reducer.reduce(&pulled)?));
        }
        for c in gen {
            let target = reducer.reduce(&c.expr)?;
            let combination = match_base_combination(table, &vset, &target, &cands);
            rows.push(ProjectabilityRow {
                name: c.name.clone(),
                generation: g,
                origin: c.origin,
                combination,
            });
        }
        earlier.extend(gen.iter().map(|c| c.expr.clone()));
    }
    Ok(rows)
}

/// Solve `target = sum_j c_j * cand_j` for velocity-independent
/// coefficients `c_j`, exactly. Denominators are cleared and coefficients
/// of each velocity monomial matched, leaving a linear system over
/// base functions.
fn match_base_combination(
    table: &Arc<VarTable>,
    vset: &BTreeSet<usize>,
    target: &RationalExpr,
    cands: &[(String, RationalExpr)],
) -> Option<Vec<(String, RationalExpr)>> {
    if target.is_zero() {
        return Some(Vec::new());
    }
    if cands.is_empty() {
        return None;
    }
    // Multiply through by every denominator: over the rational-function
    // field this preserves the velocity-free solution set.
    let one = crate::expr::Polynomial::one(table);
    let all_dens: Vec<_> = std::iter::once(target.den().clone())
        .chain(cands.iter().map(|(_, c)| c.den().clone()))
        .collect();
    let product_except = |skip: usize| {
        all_dens
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .fold(one.clone(), |acc, (_, d)| acc.mul(d))
    };
    let t_poly = target.num().mul(&product_except(0));
    let q_polys: Vec<_> = cands
        .iter()
        .enumerate()
        .map(|(j, (_, c))| c.num().mul(&product_except(j + 1)))
        .collect();

    let mut monomials: BTreeSet<crate::expr::Monomial> = BTreeSet::new();
    let t_groups = t_poly.group_by(vset);
    monomials.extend(t_groups.keys().cloned());
    let q_groups: Vec<_> = q_polys.iter().map(|p| p.group_by(vset)).collect();
    for g in &q_groups {
        monomials.extend(g.keys().cloned());
    }

    let zero = RationalExpr::zero(table);
    let a = RfMatrix::from_rows(
        table,
        monomials
            .iter()
            .map(|m| {
                q_groups
                    .iter()
                    .map(|g| {
                        g.get(m)
                            .map_or_else(|| zero.clone(), |p| RationalExpr::from_poly(p.clone()))
                    })
                    .collect()
            })
            .collect(),
    );
    let b: Vec<RationalExpr> = monomials
        .iter()
        .map(|m| {
            t_groups
                .get(m)
                .map_or_else(|| zero.clone(), |p| RationalExpr::from_poly(p.clone()))
        })
        .collect();
    let sol = linalg::solve(&a, &b);
    let coeffs = sol.particular?;
    Some(
        cands
            .iter()
            .zip(coeffs)
            .map(|((name, _), c)| (name.clone(), c))
            .filter(|(_, c)| !c.is_zero())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::dirac::dirac_run;
    use crate::expr::parse;
    use crate::legendre::legendre;
    use crate::mechanics::build_system;

    fn system(l: &str) -> LagrangianSystem {
        let t = VarTable::for_lagrangian(2, &[]).unwrap();
        let lag = parse(l, &t).unwrap();
        build_system(&t, &lag).unwrap()
    }

    #[test]
    fn velocity_coupling_second_order_chain() {
        let sys = system("(1/2)*v1^2 + q1*v2");
        let run = sode_run(&sys, &EngineSettings::default()).unwrap();
        let chain = &run.chain;
        assert!(chain.stabilized);
        assert_eq!(chain.generations.len(), 2);
        let cs: Vec<_> = chain.all().collect();
        assert!(cs[0].expr.same_repr(&parse("v1", &sys.table).unwrap()));
        assert_eq!(cs[0].generation, 2);
        assert_eq!(cs[0].origin, Origin::Dynamical);
        assert!(cs[1].expr.same_repr(&parse("v2", &sys.table).unwrap()));
        assert_eq!(cs[1].generation, 3);
        assert_eq!(cs[1].origin, Origin::Sode);
        assert_eq!(chain.multipliers.len(), 1);
        assert!(matches!(
            chain.multipliers[0].value,
            MultiplierValue::Fixed(ref v) if v.is_zero()
        ));
        assert!(run.acceleration[0].same_repr(&parse("v2", &sys.table).unwrap()));
        assert!(run.acceleration[1].is_zero());
    }

    #[test]
    fn affine_shift_second_order_chain_keeps_multiplier_free() {
        let sys = system("(1/2)*(v1 - q2)^2");
        let run = sode_run(&sys, &EngineSettings::default()).unwrap();
        assert!(run.chain.stabilized);
        assert_eq!(run.chain.generations.len(), 1);
        let c = run.chain.all().next().unwrap();
        assert!(c.expr.same_repr(&parse("v1 - q2", &sys.table).unwrap()));
        assert_eq!(c.generation, 2);
        assert_eq!(c.origin, Origin::Dynamical);
        assert!(matches!(
            run.chain.multipliers[0].value,
            MultiplierValue::Free
        ));
    }

    #[test]
    fn relative_motion_second_order_chain_is_empty() {
        let sys = system("(1/2)*(v1 - v2)^2");
        let run = sode_run(&sys, &EngineSettings::default()).unwrap();
        assert!(run.chain.stabilized);
        assert!(run.chain.is_empty());
        assert_eq!(run.chain.multipliers.len(), 1);
        assert!(matches!(
            run.chain.multipliers[0].value,
            MultiplierValue::Free
        ));
    }

    #[test]
    fn regular_system_has_unique_second_order_field() {
        let sys = system("(1/2)*(v1^2 + v2^2) - q1^2");
        let run = sode_run(&sys, &EngineSettings::default()).unwrap();
        assert!(run.chain.stabilized);
        assert!(run.chain.is_empty());
        assert!(run.chain.multipliers.is_empty());
        assert!(run.kernel.is_empty());
        assert!(run.acceleration[0].same_repr(&parse("-2*q1", &sys.table).unwrap()));
        assert!(run.acceleration[1].is_zero());
    }

    #[test]
    fn velocity_coupling_energy_equation_chain() {
        let sys = system("(1/2)*v1^2 + q1*v2");
        let res = lagrangian_pca(&sys, &EngineSettings::default()).unwrap();
        assert!(res.chain.stabilized);
        assert_eq!(res.chain.generations.len(), 1);
        let c = res.chain.all().next().unwrap();
        assert!(c.expr.same_repr(&parse("v1", &sys.table).unwrap()));
        assert_eq!(c.generation, 2);
        assert_eq!(c.origin, Origin::Dynamical);
        assert_eq!(res.chain.multipliers.len(), 2);
        let fixed: Vec<bool> = res
            .chain
            .multipliers
            .iter()
            .map(|m| matches!(m.value, MultiplierValue::Fixed(_)))
            .collect();
        assert_eq!(fixed.iter().filter(|&&b| b).count(), 1);
    }

    #[test]
    fn projectability_rows_match_dynamical_and_flag_sode() {
        let tbl = VarTable::for_lagrangian(2, &[]).unwrap();
        let lag = parse("(1/2)*v1^2 + q1*v2", &tbl).unwrap();
        let sys = build_system(&tbl, &lag).unwrap();
        let settings = EngineSettings::default();
        let ld = legendre(&sys, &settings).unwrap();
        let ham = dirac_run(&ld, &settings).unwrap();
        let s = sode_run(&sys, &settings).unwrap();
        let rows = projectability_report(&sys, &s.chain, &ham, &ld).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].matched());
        let combo = rows[0].combination.as_ref().unwrap();
        assert_eq!(combo.len(), 1);
        assert_eq!(combo[0].0, "phi2");
        assert!(combo[0].1.is_one());
        assert_eq!(rows[1].origin, Origin::Sode);
        assert!(!rows[1].matched());
    }

    #[test]
    fn projectability_matches_affine_shift_chain() {
        let tbl = VarTable::for_lagrangian(2, &[]).unwrap();
        let lag = parse("(1/2)*(v1 - q2)^2", &tbl).unwrap();
        let sys = build_system(&tbl, &lag).unwrap();
        let settings = EngineSettings::default();
        let ld = legendre(&sys, &settings).unwrap();
        let ham = dirac_run(&ld, &settings).unwrap();
        let s = sode_run(&sys, &settings).unwrap();
        let rows = projectability_report(&sys, &s.chain, &ham, &ld).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].matched());
        let combo = rows[0].combination.as_ref().unwrap();
        assert_eq!(combo, &[("phi2".to_string(), parse("1", &sys.table).unwrap())]);
    }
}
