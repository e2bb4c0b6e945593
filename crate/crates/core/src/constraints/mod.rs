//! Constraint chains: shared vocabulary for the Hamiltonian and Lagrangian
//! stabilization algorithms, plus the Poisson bracket and the first/second
//! class split.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{RationalExpr, VarTable};
use crate::EngineSettings;

pub mod dirac;
pub mod lagrangian;
pub mod weak;

pub use weak::{surface_samples, weak_vanishing, SurfaceReducer, WeakOutcome};

/// Which formalism produced a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Canonical (phase-space) stabilization of the primary constraints.
    Hamiltonian,
    /// Velocity-space stabilization with the second-order condition imposed.
    LagrangianSode,
    /// Velocity-space stabilization of the bare energy equation.
    LagrangianPca,
    /// Stabilization on a user-supplied presymplectic manifold.
    Presymplectic,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Hamiltonian => "hamiltonian",
            Side::LagrangianSode => "lagrangian-sode",
            Side::LagrangianPca => "lagrangian-pca",
            Side::Presymplectic => "presymplectic",
        }
    }
}

/// How an individual constraint arose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Degenerate fiber derivative (image of the momentum map).
    Primary,
    /// Obstruction to solving the equation of motion at all.
    Dynamical,
    /// Obstruction specific to the second-order condition.
    Sode,
    /// Demanded by tangency of the dynamics to the previous surface.
    Tangency,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::Primary => "primary",
            Origin::Dynamical => "dynamical",
            Origin::Sode => "sode",
            Origin::Tangency => "tangency",
        }
    }
}

/// First/second class split (Hamiltonian side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Klass {
    First,
    Second,
    /// The deciding bracket could not be reduced exactly.
    Unknown,
}

impl Klass {
    pub fn label(self) -> &'static str {
        match self {
            Klass::First => "first-class",
            Klass::Second => "second-class",
            Klass::Unknown => "unknown-class",
        }
    }
}

/// One constraint with its provenance.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Normalized (content- and sign-reduced, denominator-free) expression.
    pub expr: RationalExpr,
    pub generation: u32,
    pub origin: Origin,
    pub klass: Klass,
}

/// Value assigned to a multiplier by the stabilization algorithm.
#[derive(Debug, Clone)]
pub enum MultiplierValue {
    /// Determined on the final surface.
    Fixed(RationalExpr),
    /// Left undetermined: a genuine gauge degree of freedom.
    Free,
}

#[derive(Debug, Clone)]
pub struct MultiplierResolution {
    pub name: String,
    pub value: MultiplierValue,
}

/// A stabilized (or exhausted) constraint chain.
#[derive(Debug, Clone)]
pub struct ConstraintChain {
    pub side: Side,
    /// Generation number of `generations[0]`.
    pub first_generation: u32,
    /// Constraints grouped by generation; `generations[i]` holds generation
    /// `first_generation + i`. Never contains trailing empty groups.
    pub generations: Vec<Vec<Constraint>>,
    /// True when the algorithm reached a self-consistent surface; false when
    /// it was cut off by the generation limit.
    pub stabilized: bool,
    /// Multiplier resolution from the final consistency system.
    pub multipliers: Vec<MultiplierResolution>,
}

impl ConstraintChain {
    pub fn empty(side: Side, first_generation: u32) -> Self {
        ConstraintChain {
            side,
            first_generation,
            generations: Vec::new(),
            stabilized: true,
            multipliers: Vec::new(),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Constraint> {
        self.generations.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exprs(&self) -> Vec<RationalExpr> {
        self.all().map(|c| c.expr.clone()).collect()
    }

    /// Generation number of a group index.
    pub fn generation_number(&self, idx: usize) -> u32 {
        self.first_generation + idx as u32
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    /// A stabilization round produced a nonzero constant: the equations of
    /// motion admit no solution anywhere.
    #[error("inconsistent dynamics: stabilization produced the nonzero constant {constant}")]
    Inconsistent { constant: RationalExpr },
    #[error("expression error during stabilization: {0}")]
    Expr(#[from] crate::expr::ExprError),
}

/// Canonical Poisson bracket on a chart containing momenta.
///
/// Panics if the table carries no momentum block.
pub fn poisson_bracket(
    table: &Arc<VarTable>,
    f: &RationalExpr,
    g: &RationalExpr,
) -> RationalExpr {
    let mut acc = RationalExpr::zero(table);
    for a in 0..table.dim() {
        let q = table.position(a);
        let p = table
            .momentum(a)
            .expect("Poisson bracket requires a momentum chart");
        acc = acc.add(&f.derivative(q).mul(&g.derivative(p)));
        acc = acc.sub(&f.derivative(p).mul(&g.derivative(q)));
    }
    acc
}

/// Classify each constraint as first or second class relative to the full
/// final surface: first class iff its bracket with every constraint vanishes
/// weakly.
pub fn classify(
    table: &Arc<VarTable>,
    constraints: &mut [Constraint],
    settings: &EngineSettings,
) {
    let exprs: Vec<RationalExpr> = constraints.iter().map(|c| c.expr.clone()).collect();
    let reducer = SurfaceReducer::new(table, &exprs);
    let mut klasses = Vec::with_capacity(constraints.len());
    for i in 0..constraints.len() {
        let mut klass = Klass::First;
        for j in 0..constraints.len() {
            let bracket = poisson_bracket(table, &constraints[i].expr, &constraints[j].expr);
            match weak_vanishing(&bracket, &reducer, settings) {
                WeakOutcome::Holds => {}
                WeakOutcome::Fails { .. } => {
                    klass = Klass::Second;
                    break;
                }
                WeakOutcome::Indeterminate { .. } => {
                    klass = Klass::Unknown;
                }
            }
        }
        klasses.push(klass);
    }
    for (c, k) in constraints.iter_mut().zip(klasses) {
        c.klass = k;
    }
}

/// Normalize stabilization residuals into genuinely new constraints: reduce
/// modulo the current surface, drop zeros and duplicates, and fail on a
/// nonzero constant (empty surface).
pub fn fresh_constraints(
    reducer: &SurfaceReducer,
    residuals: &[RationalExpr],
    chain: &ConstraintChain,
) -> Result<Vec<RationalExpr>, ChainError> {
    let mut fresh: Vec<RationalExpr> = Vec::new();
    for r in residuals {
        let red = reducer.reduce(r)?.constraint_form();
        if red.is_zero() {
            continue;
        }
        if let Some(k) = red.as_constant() {
            if !num_traits::Zero::is_zero(&k) {
                return Err(ChainError::Inconsistent { constant: red });
            }
        }
        if chain.all().any(|c| c.expr.same_repr(&red))
            || fresh.iter().any(|e| e.same_repr(&red))
        {
            continue;
        }
        fresh.push(red);
    }
    Ok(fresh)
}

/// Read the multiplier resolution off a final consistency solve: a column
/// touched by the solution kernel stays free, anything else is pinned to the
/// particular value (reduced on the final surface for presentation).
pub fn resolve_multipliers(
    sol: &crate::linalg::SolveResult,
    prefix: &str,
    reducer: &SurfaceReducer,
) -> Vec<MultiplierResolution> {
    (0..sol.pivot_solution.len())
        .map(|j| {
            let free = sol.kernel_basis.iter().any(|v| !v[j].is_zero());
            let value = if free {
                MultiplierValue::Free
            } else {
                let raw = &sol.pivot_solution[j];
                let reduced = reducer.reduce(raw).unwrap_or_else(|_| raw.clone());
                MultiplierValue::Fixed(reduced)
            };
            MultiplierResolution {
                name: format!("{}{}", prefix, j + 1),
                value,
            }
        })
        .collect()
}

/// Numeric evaluation of a chain's constraints at a point (used in reports).
pub fn eval_constraints(
    constraints: &[Constraint],
    point: &BTreeMap<usize, num_rational::BigRational>,
) -> Vec<Option<num_rational::BigRational>> {
    constraints
        .iter()
        .map(|c| c.expr.eval(point).ok())
        .collect()
}
