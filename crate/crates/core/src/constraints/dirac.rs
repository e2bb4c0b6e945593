//! Canonical stabilization of primary constraints.
//!
//! Starting from the primaries and the canonical Hamiltonian, each round
//! demands that every constraint be preserved by the total Hamiltonian
//! `h0 + lambda^mu phi_mu`: the bracket system `{chi, phi_mu} lambda^mu =
//! -{chi, h0}` is solved exactly over the function field; directions the
//! system cannot absorb become the next generation of constraints, and the
//! final solve pins down or frees each multiplier.

use crate::constraints::{
    classify, fresh_constraints, poisson_bracket, resolve_multipliers, ChainError, Constraint,
    ConstraintChain, Klass, Origin, Side, SurfaceReducer,
};
use crate::legendre::LegendreData;
use crate::linalg::{self, RfMatrix};
use crate::EngineSettings;

/// Run the canonical constraint algorithm and classify the outcome.
pub fn dirac_run(
    ld: &LegendreData,
    settings: &EngineSettings,
) -> Result<ConstraintChain, ChainError> {
    let table = &ld.table;
    let primaries = &ld.primary_constraints;
    let mut chain = ConstraintChain::empty(Side::Hamiltonian, 1);
    let mut name_counter = 0usize;
    if !primaries.is_empty() {
        chain.generations.push(
            primaries
                .iter()
                .map(|expr| {
                    name_counter += 1;
                    Constraint {
                        name: format!("phi{}", name_counter),
                        expr: expr.constraint_form(),
                        generation: 1,
                        origin: Origin::Primary,
                        klass: Klass::Unknown,
                    }
                })
                .collect(),
        );
    }

    chain.stabilized = false;
    for _round in 0..settings.max_generations.max(1) {
        if chain.is_empty() {
            chain.stabilized = true;
            break;
        }
        let exprs = chain.exprs();
        let reducer = SurfaceReducer::new(table, &exprs);
        let mut b_rows = Vec::with_capacity(exprs.len());
        let mut rhs = Vec::with_capacity(exprs.len());
        for chi in &exprs {
            let mut row = Vec::with_capacity(primaries.len());
            for phi in primaries {
                row.push(reducer.reduce(&poisson_bracket(table, chi, phi))?);
            }
            b_rows.push(row);
            rhs.push(reducer.reduce(&poisson_bracket(table, chi, &ld.h0))?.neg());
        }
        let b = RfMatrix::from_rows(table, b_rows);
        let round = linalg::solve(&b, &rhs);
        let fresh = fresh_constraints(&reducer, &round.residuals, &chain)?;
        if fresh.is_empty() {
            chain.stabilized = true;
            chain.multipliers = resolve_multipliers(&round, "lambda", &reducer);
            break;
        }
        let gen = chain.first_generation + chain.generations.len() as u32;
        chain.generations.push(
            fresh
                .into_iter()
                .map(|expr| {
                    name_counter += 1;
                    Constraint {
                        name: format!("phi{}", name_counter),
                        expr,
                        generation: gen,
                        origin: Origin::Tangency,
                        klass: Klass::Unknown,
                    }
                })
                .collect(),
        );
    }

    let mut all: Vec<Constraint> = chain.generations.iter().flatten().cloned().collect();
    classify(table, &mut all, settings);
    let mut it = all.into_iter();
    for gen in chain.generations.iter_mut() {
        for slot in gen.iter_mut() {
            *slot = it.next().expect("classification preserves count");
        }
    }

    Ok(chain)
}
