//! Generic presymplectic constraint engine.
//!
//! Works on a chart-level triple `(M, omega, alpha)` with `omega` a closed
//! antisymmetric two-form of possibly non-maximal rank and `alpha` a closed
//! one-form. The engine finds the largest surface on which the field
//! equation `i(X) omega = alpha` admits tangent solutions, by alternating
//! pointwise-solvability constraints with tangency rounds that resolve the
//! gauge freedom along `ker omega`.

use std::sync::Arc;

use thiserror::Error;

use crate::constraints::{
    ChainError, Constraint, ConstraintChain, MultiplierResolution, MultiplierValue, Origin, Side,
    SurfaceReducer,
};
use crate::expr::{RationalExpr, VarTable};
use crate::linalg::{self, RfMatrix};
use crate::EngineSettings;

#[derive(Debug, Error)]
pub enum PresymplecticError {
    #[error("two-form matrix must be {expected}x{expected} to match the chart, got {rows}x{cols}")]
    BadShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("one-form must have {expected} components, got {got}")]
    BadAlpha { expected: usize, got: usize },
    #[error("two-form is not antisymmetric at entry ({i}, {j})")]
    NotAntisymmetric { i: usize, j: usize },
    #[error("two-form is not closed: d-omega component ({i}, {j}, {k}) is nonzero")]
    OmegaNotClosed { i: usize, j: usize, k: usize },
    #[error("one-form is not closed: d-alpha component ({i}, {j}) is nonzero")]
    AlphaNotClosed { i: usize, j: usize },
}

/// A chart-level presymplectic system with a closed one-form.
#[derive(Debug, Clone)]
pub struct PresymplecticSystem {
    pub table: Arc<VarTable>,
    /// Indices of the chart variables; fields and forms are indexed by
    /// position in this list.
    pub chart: Vec<usize>,
    /// Matrix of the two-form: entry `(i, j)` is `omega(e_i, e_j)`.
    pub omega: RfMatrix,
    /// Components of the one-form in the chart basis.
    pub alpha: Vec<RationalExpr>,
}

impl PresymplecticSystem {
    pub fn new(
        table: &Arc<VarTable>,
        chart: Vec<usize>,
        omega: RfMatrix,
        alpha: Vec<RationalExpr>,
    ) -> Result<Self, PresymplecticError> {
        let m = chart.len();
        if omega.rows() != m || omega.cols() != m {
            return Err(PresymplecticError::BadShape {
                expected: m,
                rows: omega.rows(),
                cols: omega.cols(),
            });
        }
        if alpha.len() != m {
            return Err(PresymplecticError::BadAlpha {
                expected: m,
                got: alpha.len(),
            });
        }
        for i in 0..m {
            for j in i..m {
                if !omega.at(i, j).add(omega.at(j, i)).is_zero() {
                    return Err(PresymplecticError::NotAntisymmetric { i, j });
                }
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    let d = omega
                        .at(j, k)
                        .derivative(chart[i])
                        .add(&omega.at(k, i).derivative(chart[j]))
                        .add(&omega.at(i, j).derivative(chart[k]));
                    if !d.is_zero() {
                        return Err(PresymplecticError::OmegaNotClosed { i, j, k });
                    }
                }
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let d = alpha[j].derivative(chart[i]).sub(&alpha[i].derivative(chart[j]));
                if !d.is_zero() {
                    return Err(PresymplecticError::AlphaNotClosed { i, j });
                }
            }
        }
        Ok(PresymplecticSystem {
            table: Arc::clone(table),
            chart,
            omega,
            alpha,
        })
    }
}

/// Outcome of the constraint algorithm.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub chain: ConstraintChain,
    /// A particular solution of the field equation (kernel directions set to
    /// zero); satisfies `i(X) omega - alpha ~ 0` on the final surface.
    pub particular: Vec<RationalExpr>,
    /// Basis of `ker omega`: the gauge directions.
    pub kernel: Vec<Vec<RationalExpr>>,
}

/// Directional derivative of `f` along a chart vector field.
pub fn apply_field(
    table: &Arc<VarTable>,
    chart: &[usize],
    field: &[RationalExpr],
    f: &RationalExpr,
) -> RationalExpr {
    let mut acc = RationalExpr::zero(table);
    for (h, &var) in chart.iter().enumerate() {
        acc = acc.add(&field[h].mul(&f.derivative(var)));
    }
    acc
}

/// Run the constraint algorithm on a presymplectic system.
///
/// `side` and `first_generation` control the bookkeeping so the same engine
/// serves both the generic case (generation 1 onward) and instantiations
/// whose reports number their first constraints differently. Reaching the
/// generation limit yields `stabilized = false`, not an error; only a
/// nonzero-constant constraint (empty surface) is fatal.
pub fn pca_run(
    sys: &PresymplecticSystem,
    settings: &EngineSettings,
    side: Side,
    first_generation: u32,
    name_prefix: &str,
) -> Result<PcaResult, ChainError> {
    let table = &sys.table;
    let kernel = linalg::nullspace(&sys.omega);
    let mut chain = ConstraintChain::empty(side, first_generation);
    let mut name_counter = 0usize;

    // Pointwise solvability: alpha must annihilate the kernel.
    let mut first: Vec<RationalExpr> = Vec::new();
    for z in &kernel {
        let c = contract(table, z, &sys.alpha).constraint_form();
        if c.is_zero() || first.iter().any(|e| e.same_repr(&c)) {
            continue;
        }
        if let Some(k) = c.as_constant() {
            if !num_traits::Zero::is_zero(&k) {
                return Err(ChainError::Inconsistent { constant: c });
            }
        }
        first.push(c);
    }
    if !first.is_empty() {
        let gen = chain.first_generation;
        chain.generations.push(
            first
                .into_iter()
                .map(|expr| {
                    name_counter += 1;
                    Constraint {
                        name: format!("{}{}", name_prefix, name_counter),
                        expr,
                        generation: gen,
                        origin: Origin::Dynamical,
                        klass: crate::constraints::Klass::Unknown,
                    }
                })
                .collect(),
        );
    }

    // Particular solution of (-M) X = alpha; its consistency residuals are
    // combinations of the kernel contractions above.
    let neg_m = sys.omega.map(RationalExpr::neg);
    let sol = linalg::solve(&neg_m, &sys.alpha);
    let particular = sol.pivot_solution;

    // Tangency rounds.
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
        let rows: Vec<RationalExpr> = exprs;
        let mut b_rows: Vec<Vec<RationalExpr>> = Vec::with_capacity(rows.len());
        let mut rhs: Vec<RationalExpr> = Vec::with_capacity(rows.len());
        for chi in &rows {
            let mut row = Vec::with_capacity(kernel.len());
            for z in &kernel {
                row.push(reducer.reduce(&apply_field(table, &sys.chart, z, chi))?);
            }
            b_rows.push(row);
            rhs.push(
                reducer
                    .reduce(&apply_field(table, &sys.chart, &particular, chi))?
                    .neg(),
            );
        }
        let b = RfMatrix::from_rows(table, b_rows);
        let round = linalg::solve(&b, &rhs);
        let fresh = crate::constraints::fresh_constraints(&reducer, &round.residuals, &chain)?;
        if fresh.is_empty() {
            chain.stabilized = true;
            chain.multipliers =
                crate::constraints::resolve_multipliers(&round, "mu", &reducer);
            break;
        }
        let gen = chain.first_generation + chain.generations.len() as u32;
        chain.generations.push(
            fresh
                .into_iter()
                .map(|expr| {
                    name_counter += 1;
                    Constraint {
                        name: format!("{}{}", name_prefix, name_counter),
                        expr,
                        generation: gen,
                        origin: Origin::Tangency,
                        klass: crate::constraints::Klass::Unknown,
                    }
                })
                .collect(),
        );
    }

    Ok(PcaResult {
        chain,
        particular,
        kernel,
    })
}

fn contract(
    table: &Arc<VarTable>,
    field: &[RationalExpr],
    form: &[RationalExpr],
) -> RationalExpr {
    let mut acc = RationalExpr::zero(table);
    for (f, a) in field.iter().zip(form.iter()) {
        acc = acc.add(&f.mul(a));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn chart(names: &[&str]) -> Arc<VarTable> {
        VarTable::chart(names).unwrap()
    }

    #[test]
    fn symplectic_case_has_no_constraints() {
        let t = chart(&["x", "y"]);
        let omega = RfMatrix::from_fn(&t, 2, 2, |i, j| {
            if i == 0 && j == 1 {
                RationalExpr::from_int(&t, 1)
            } else if i == 1 && j == 0 {
                RationalExpr::from_int(&t, -1)
            } else {
                RationalExpr::zero(&t)
            }
        });
        // alpha = dH with H = (1/2)(x^2 + y^2)
        let alpha = vec![parse("x", &t).unwrap(), parse("y", &t).unwrap()];
        let sys = PresymplecticSystem::new(&t, vec![0, 1], omega, alpha).unwrap();
        let res = pca_run(
            &sys,
            &EngineSettings::default(),
            Side::Presymplectic,
            1,
            "chi",
        )
        .unwrap();
        assert!(res.chain.is_empty());
        assert!(res.chain.stabilized);
        assert!(res.kernel.is_empty());
        assert!(res.chain.multipliers.is_empty());
        // -M X = alpha: X = (y, -x) is the Hamiltonian field: check
        // i(X)omega = alpha exactly.
        let x = &res.particular;
        assert!(x[0].same_repr(&parse("y", &t).unwrap()));
        assert!(x[1].same_repr(&parse("-x", &t).unwrap()));
    }

    #[test]
    fn degenerate_direction_is_inconsistent() {
        // omega = dx ^ dy on (x, y, z), alpha = dz.
        let t = chart(&["x", "y", "z"]);
        let mut omega = RfMatrix::zero(&t, 3, 3);
        omega.set(0, 1, RationalExpr::from_int(&t, 1));
        omega.set(1, 0, RationalExpr::from_int(&t, -1));
        let alpha = vec![
            RationalExpr::zero(&t),
            RationalExpr::zero(&t),
            RationalExpr::from_int(&t, 1),
        ];
        let sys = PresymplecticSystem::new(&t, vec![0, 1, 2], omega, alpha).unwrap();
        let err = pca_run(
            &sys,
            &EngineSettings::default(),
            Side::Presymplectic,
            1,
            "chi",
        )
        .unwrap_err();
        assert!(matches!(err, ChainError::Inconsistent { .. }));
    }

    #[test]
    fn kernel_constraint_then_stabilization() {
        // omega = dx ^ dy on (x, y, z), alpha = d((1/2) z^2) = z dz: the
        // kernel direction d/dz forces z = 0, and tangency of z fixes the
        // multiplier along d/dz.
        let t = chart(&["x", "y", "z"]);
        let mut omega = RfMatrix::zero(&t, 3, 3);
        omega.set(0, 1, RationalExpr::from_int(&t, 1));
        omega.set(1, 0, RationalExpr::from_int(&t, -1));
        let alpha = vec![
            RationalExpr::zero(&t),
            RationalExpr::zero(&t),
            parse("z", &t).unwrap(),
        ];
        let sys = PresymplecticSystem::new(&t, vec![0, 1, 2], omega, alpha).unwrap();
        let res = pca_run(
            &sys,
            &EngineSettings::default(),
            Side::Presymplectic,
            1,
            "chi",
        )
        .unwrap();
        assert!(res.chain.stabilized);
        assert_eq!(res.chain.len(), 1);
        let c = res.chain.all().next().unwrap();
        assert!(c.expr.same_repr(&parse("z", &t).unwrap()));
        assert_eq!(c.generation, 1);
        assert_eq!(res.chain.multipliers.len(), 1);
        assert!(matches!(
            res.chain.multipliers[0].value,
            MultiplierValue::Fixed(ref v) if v.is_zero()
        ));
    }

    #[test]
    fn invalid_forms_are_rejected() {
        let t = chart(&["x", "y"]);
        let mut not_antisym = RfMatrix::zero(&t, 2, 2);
        not_antisym.set(0, 1, RationalExpr::from_int(&t, 1));
        let alpha = vec![RationalExpr::zero(&t), RationalExpr::zero(&t)];
        assert!(matches!(
            PresymplecticSystem::new(&t, vec![0, 1], not_antisym, alpha.clone()),
            Err(PresymplecticError::NotAntisymmetric { .. })
        ));
        // Non-closed alpha: alpha = x dy.
        let mut omega = RfMatrix::zero(&t, 2, 2);
        omega.set(0, 1, RationalExpr::from_int(&t, 1));
        omega.set(1, 0, RationalExpr::from_int(&t, -1));
        let bad_alpha = vec![RationalExpr::zero(&t), parse("x", &t).unwrap()];
        assert!(matches!(
            PresymplecticSystem::new(&t, vec![0, 1], omega, bad_alpha),
            Err(PresymplecticError::AlphaNotClosed { .. })
        ));
    }

    #[test]
    fn non_closed_omega_rejected() {
        let t = chart(&["x", "y", "z"]);
        // omega = x dy ^ dz fails closedness (d-omega = dx^dy^dz != 0).
        let mut omega = RfMatrix::zero(&t, 3, 3);
        omega.set(1, 2, parse("x", &t).unwrap());
        omega.set(2, 1, parse("-x", &t).unwrap());
        let alpha = vec![
            RationalExpr::zero(&t),
            RationalExpr::zero(&t),
            RationalExpr::zero(&t),
        ];
        assert!(matches!(
            PresymplecticSystem::new(&t, vec![0, 1, 2], omega, alpha),
            Err(PresymplecticError::OmegaNotClosed { .. })
        ));
    }
}
