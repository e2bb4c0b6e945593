//! Weak equality: deciding whether expressions vanish on a constraint
//! surface.
//!
//! A [`SurfaceReducer`] triangularizes a set of constraints by repeatedly
//! solving one for a single variable it is affine in and substituting that
//! solution into the rest. Reduction then rewrites any expression into the
//! remaining free variables. When every constraint could be solved this way
//! the surface is an exact graph and weak vanishing is decidable; leftover
//! non-affine constraints make negative answers indeterminate instead.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use rand_chacha::ChaCha8Rng;

use crate::expr::{ExprError, RationalExpr, VarKind, VarTable};
use crate::sampling::{random_point, rng_from_seed};
use crate::EngineSettings;

/// Tri-state answer for "does this expression vanish on the surface?".
#[derive(Debug, Clone)]
pub enum WeakOutcome {
    /// Exactly zero after reduction: vanishes everywhere on the surface.
    Holds,
    /// Reduces to a nonzero function of the free variables on an exactly
    /// solved surface; `witness` is a surface point where it is nonzero,
    /// when sampling found one.
    Fails {
        residual: RationalExpr,
        witness: Option<BTreeMap<usize, BigRational>>,
    },
    /// Nonzero after reduction, but the surface has unsolved (non-affine)
    /// constraints, so the expression may still vanish on the true surface.
    Indeterminate { residual: RationalExpr },
}

impl WeakOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, WeakOutcome::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, WeakOutcome::Fails { .. })
    }

    pub fn indeterminate(&self) -> bool {
        matches!(self, WeakOutcome::Indeterminate { .. })
    }
}

/// Triangular substitution view of a constraint surface.
#[derive(Debug, Clone)]
pub struct SurfaceReducer {
    table: Arc<VarTable>,
    /// `(variable, replacement)` in application order: each replacement only
    /// references variables solved later in the list, or free ones.
    substitutions: Vec<(usize, RationalExpr)>,
    /// Constraints that could not be solved for any variable (already
    /// rewritten in the free variables).
    hard: Vec<RationalExpr>,
    /// True when some solve divided by a non-constant coefficient, so the
    /// triangular view is only valid away from that coefficient's zeros.
    generic: bool,
}

impl SurfaceReducer {
    /// Build a reducer from constraint expressions (all on `table`).
    pub fn new(table: &Arc<VarTable>, constraints: &[RationalExpr]) -> Self {
        let mut work: Vec<RationalExpr> = Vec::new();
        for c in constraints {
            let c = c.constraint_form();
            if c.is_zero() || work.iter().any(|w| w.same_repr(&c)) {
                continue;
            }
            work.push(c);
        }

        let candidates = candidate_order(table);
        let mut substitutions: Vec<(usize, RationalExpr)> = Vec::new();
        let mut solved: BTreeSet<usize> = BTreeSet::new();
        let mut generic = false;

        // Constant-coefficient solves are exhausted (to a fixpoint) before
        // any division by a function coefficient is attempted: a premature
        // function pivot can pick one branch of a reducible surface and lose
        // solutions the remaining constraints would have selected.
        loop {
            if solve_one(&mut work, &candidates, &mut solved, &mut substitutions, true) {
                continue;
            }
            if solve_one(&mut work, &candidates, &mut solved, &mut substitutions, false) {
                generic = true;
                continue;
            }
            break;
        }

        SurfaceReducer {
            table: Arc::clone(table),
            substitutions,
            hard: work,
            generic,
        }
    }

    pub fn table(&self) -> &Arc<VarTable> {
        &self.table
    }

    pub fn substitutions(&self) -> &[(usize, RationalExpr)] {
        &self.substitutions
    }

    pub fn hard_leftovers(&self) -> &[RationalExpr] {
        &self.hard
    }

    /// True when the surface is exactly the graph of the substitutions.
    pub fn is_exact(&self) -> bool {
        self.hard.is_empty()
    }

    /// True when a solve divided by a non-constant coefficient; reductions
    /// are then valid only where those coefficients do not vanish.
    pub fn generic(&self) -> bool {
        self.generic
    }

    pub fn solved_vars(&self) -> BTreeSet<usize> {
        self.substitutions.iter().map(|(v, _)| *v).collect()
    }

    pub fn free_vars(&self) -> Vec<usize> {
        let solved = self.solved_vars();
        (0..self.table.len())
            .filter(|i| !solved.contains(i))
            .collect()
    }

    /// Rewrite `f` modulo the solved constraints.
    pub fn reduce(&self, f: &RationalExpr) -> Result<RationalExpr, ExprError> {
        let mut g = f.clone();
        for (var, repl) in &self.substitutions {
            if g.depends_on(*var) {
                let map: BTreeMap<usize, RationalExpr> =
                    [(*var, repl.clone())].into_iter().collect();
                g = g.substitute(&map)?;
            }
        }
        Ok(g)
    }

    /// A random point on the surface: free variables sampled, solved ones
    /// evaluated from their replacements, hard constraints verified.
    pub fn sample_point(
        &self,
        rng: &mut ChaCha8Rng,
    ) -> Option<BTreeMap<usize, BigRational>> {
        let free = self.free_vars();
        'attempt: for _ in 0..64 {
            let mut pt = random_point(&free, rng);
            for (var, repl) in self.substitutions.iter().rev() {
                match repl.eval(&pt) {
                    Ok(v) => {
                        pt.insert(*var, v);
                    }
                    Err(_) => continue 'attempt,
                }
            }
            for h in &self.hard {
                match h.eval(&pt) {
                    Ok(v) if v.is_zero() => {}
                    _ => continue 'attempt,
                }
            }
            return Some(pt);
        }
        None
    }
}

/// Candidate solve order: momenta, then velocities, then positions, each by
/// descending index; parameters only as a last resort.
fn candidate_order(table: &Arc<VarTable>) -> Vec<usize> {
    let block = |pred: fn(&VarKind) -> bool| {
        let mut ids = table.indices_where(pred);
        ids.reverse();
        ids
    };
    let mut out = block(|k| matches!(k, VarKind::Momentum(_)));
    out.extend(block(|k| matches!(k, VarKind::Velocity(_))));
    out.extend(block(|k| matches!(k, VarKind::Position(_))));
    out.extend(block(|k| matches!(k, VarKind::Parameter(_))));
    out
}

/// Solve at most one constraint for one variable (first constraint in order,
/// first candidate variable it is affine in), substitute the solution into
/// the rest, and report whether anything happened. `require_const` restricts
/// the solve to constant leading coefficients.
fn solve_one(
    work: &mut Vec<RationalExpr>,
    candidates: &[usize],
    solved: &mut BTreeSet<usize>,
    substitutions: &mut Vec<(usize, RationalExpr)>,
    require_const: bool,
) -> bool {
    for i in 0..work.len() {
        for &var in candidates {
            if solved.contains(&var) || work[i].num().degree_in(var) != 1 {
                continue;
            }
            let by = work[i].num().by_powers_of(var);
            let a = by.get(&1).expect("degree-one coefficient").clone();
            if require_const && a.as_constant().is_none() {
                continue;
            }
            let b = by
                .get(&0)
                .cloned()
                .unwrap_or_else(|| crate::expr::Polynomial::zero(work[i].table()));
            let repl = match RationalExpr::from_parts(b.neg(), a) {
                Ok(r) => r,
                Err(_) => continue,
            };
            substitutions.push((var, repl.clone()));
            solved.insert(var);
            work.remove(i);
            let map: BTreeMap<usize, RationalExpr> = [(var, repl)].into_iter().collect();
            *work = work
                .iter()
                .map(|w| match w.substitute(&map) {
                    Ok(s) => s.constraint_form(),
                    Err(_) => w.clone(),
                })
                .filter(|w| !w.is_zero())
                .collect();
            dedup(work);
            return true;
        }
    }
    false
}

fn dedup(work: &mut Vec<RationalExpr>) {
    let mut seen: Vec<RationalExpr> = Vec::new();
    work.retain(|w| {
        if seen.iter().any(|s| s.same_repr(w)) {
            false
        } else {
            seen.push(w.clone());
            true
        }
    });
}

/// Decide whether `f` vanishes on the reducer's surface.
///
/// Exact positive answers always; exact negative answers when the surface
/// was solved completely, with a sampled witness point when one is found
/// within `settings.trials` attempts.
pub fn weak_vanishing(
    f: &RationalExpr,
    reducer: &SurfaceReducer,
    settings: &EngineSettings,
) -> WeakOutcome {
    let r = match reducer.reduce(f) {
        Ok(r) => r,
        Err(_) => {
            return WeakOutcome::Indeterminate {
                residual: f.clone(),
            }
        }
    };
    if r.is_zero() {
        return WeakOutcome::Holds;
    }
    if reducer.is_exact() {
        let mut rng = rng_from_seed(settings.seed);
        let mut witness = None;
        for _ in 0..settings.trials.max(1) {
            if let Some(pt) = reducer.sample_point(&mut rng) {
                if matches!(r.eval(&pt), Ok(v) if !v.is_zero()) {
                    witness = Some(pt);
                    break;
                }
            }
        }
        // Without a concrete witness, a division by a function coefficient
        // leaves open whether the lost locus was where `f` vanished.
        if witness.is_none() && reducer.generic() {
            return WeakOutcome::Indeterminate { residual: r };
        }
        return WeakOutcome::Fails {
            residual: r,
            witness,
        };
    }
    WeakOutcome::Indeterminate { residual: r }
}

/// Up to `settings.trials` random points on the surface.
pub fn surface_samples(
    reducer: &SurfaceReducer,
    settings: &EngineSettings,
) -> Vec<BTreeMap<usize, BigRational>> {
    let mut rng = rng_from_seed(settings.seed);
    (0..settings.trials)
        .filter_map(|_| reducer.sample_point(&mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn phase_table() -> Arc<VarTable> {
        let t = VarTable::for_lagrangian(2, &[]).unwrap();
        let (t, _) = t.extend_momenta().unwrap();
        t
    }

    #[test]
    fn solves_affine_constraints_in_momentum_first_order() {
        let t = phase_table();
        let c = parse("p1 + p2", &t).unwrap();
        let red = SurfaceReducer::new(&t, &[c.clone()]);
        assert!(red.is_exact());
        assert_eq!(red.substitutions().len(), 1);
        // p2 has the higher momentum index, so it is eliminated.
        assert_eq!(red.substitutions()[0].0, t.momentum(1).unwrap());
        assert!(red.reduce(&c).unwrap().is_zero());

        let settings = EngineSettings::default();
        assert!(weak_vanishing(&c, &red, &settings).holds());
        let p1 = parse("p1", &t).unwrap();
        match weak_vanishing(&p1, &red, &settings) {
            WeakOutcome::Fails { witness, .. } => assert!(witness.is_some()),
            other => panic!("expected failure, got {:?}", other),
        }
    }

    #[test]
    fn triangular_chain_reduces_products() {
        let t = phase_table();
        let cs = vec![
            parse("p2 - q1", &t).unwrap(),
            parse("p1", &t).unwrap(),
        ];
        let red = SurfaceReducer::new(&t, &cs);
        assert!(red.is_exact());
        let f = parse("p1*p2 + p1", &t).unwrap();
        assert!(red.reduce(&f).unwrap().is_zero());
        let g = parse("p2 - q1 + v1", &t).unwrap();
        let settings = EngineSettings::default();
        assert!(matches!(
            weak_vanishing(&g, &red, &settings),
            WeakOutcome::Fails { .. }
        ));
    }

    #[test]
    fn iterated_substitution_unlocks_products() {
        let t = phase_table();
        let cs = vec![
            parse("p1*p2", &t).unwrap(),
            parse("p2 - 1", &t).unwrap(),
        ];
        let red = SurfaceReducer::new(&t, &cs);
        // p2 -> 1 turns p1*p2 into p1, which then solves too.
        assert!(red.is_exact());
        assert_eq!(red.substitutions().len(), 2);
        let settings = EngineSettings::default();
        let f = parse("p1 + p2 - 1", &t).unwrap();
        assert!(weak_vanishing(&f, &red, &settings).holds());
    }

    #[test]
    fn non_affine_leftovers_are_indeterminate() {
        let t = phase_table();
        let c = parse("p1^2 + p2^2", &t).unwrap();
        let red = SurfaceReducer::new(&t, &[c]);
        assert!(!red.is_exact());
        let settings = EngineSettings::default();
        let f = parse("p1", &t).unwrap();
        assert!(weak_vanishing(&f, &red, &settings).indeterminate());
        // Zero is still decided exactly.
        let z = parse("0", &t).unwrap();
        assert!(weak_vanishing(&z, &red, &settings).holds());
    }

    #[test]
    fn function_coefficient_pivot_is_last_resort() {
        let t = phase_table();
        // Affine in p1 with function coefficient q1, affine in p2 with
        // constant coefficient; p2 must win despite... both are solvable,
        // order prefers the constant pivot even though p1 < p2 anyway.
        let c = parse("q1*p1 + p2", &t).unwrap();
        let red = SurfaceReducer::new(&t, &[c.clone()]);
        assert!(red.is_exact());
        assert_eq!(red.substitutions()[0].0, t.momentum(1).unwrap());
        assert!(red.reduce(&c).unwrap().is_zero());
    }

    #[test]
    fn empty_surface_means_strong_equality() {
        let t = phase_table();
        let red = SurfaceReducer::new(&t, &[]);
        let settings = EngineSettings::default();
        assert!(weak_vanishing(&parse("0", &t).unwrap(), &red, &settings).holds());
        assert!(matches!(
            weak_vanishing(&parse("q1", &t).unwrap(), &red, &settings),
            WeakOutcome::Fails { .. }
        ));
    }

    #[test]
    fn constant_constraint_stays_hard_and_blocks_sampling() {
        let t = phase_table();
        let red = SurfaceReducer::new(&t, &[parse("2", &t).unwrap()]);
        assert_eq!(red.hard_leftovers().len(), 1);
        let mut rng = rng_from_seed(0);
        assert!(red.sample_point(&mut rng).is_none());
    }

    #[test]
    fn surface_sampling_respects_substitutions() {
        let t = phase_table();
        let cs = vec![parse("p2 - q1", &t).unwrap(), parse("p1", &t).unwrap()];
        let red = SurfaceReducer::new(&t, &cs);
        let settings = EngineSettings::default();
        let pts = surface_samples(&red, &settings);
        assert!(!pts.is_empty());
        for pt in &pts {
            for c in &cs {
                assert!(c.eval(pt).unwrap().is_zero());
            }
        }
    }
}
